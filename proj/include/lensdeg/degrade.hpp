#pragma once

#include "lensdeg/image.hpp"
#include "lensdeg/psf.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace lensdeg {

/// Unit-sum convolution kernel. The tap at (anchor_row, anchor_col) maps a pixel onto itself.
struct Kernel {
    int rows = 0;
    int cols = 0;
    int anchor_row = 0;
    int anchor_col = 0;
    std::vector<double> weights;

    double at(int r, int c) const { return weights[static_cast<std::size_t>(r) * cols + c]; }
};

/// psf / Σpsf with the last nonzero tap absorbing the rounding residue, so the weights sum
/// to 1 and stay nonnegative. Anchor = the PSF reference pixel (size/2, size/2).
Kernel normalize_kernel(const PSF& psf);

enum class BoundaryPolicy { mirror, clamp, zero };

struct BlendPolicy {
    enum class Kind { hard, feather };
    Kind kind = Kind::hard;
    int width_px = 8;  // feather only: ramp width centered on each seam
};

struct DegradationPlan {
    int grid_rows = 0;
    int grid_cols = 0;
    int region_w = 0;
    int region_h = 0;
    BoundaryPolicy boundary = BoundaryPolicy::mirror;
    BlendPolicy blend;

    /// Plan whose regions tile `width`×`height` exactly; throws ValidationError otherwise.
    static DegradationPlan tiling(int width, int height, int grid_rows, int grid_cols,
                                  BoundaryPolicy boundary = BoundaryPolicy::mirror,
                                  BlendPolicy blend = {});

    void validate(const RasterImage& img) const;
};

/// Spatially-variant convolution. grids[ch] drives channel ch (R, G, B) and must be ordered
/// by strictly decreasing wavelength. Each region is convolved with its own kernel reading
/// real neighbor pixels; only the image border uses the boundary policy.
RasterImage degrade_image(const RasterImage& img, std::span<const PSFGrid> grids,
                          const DegradationPlan& plan);

/// Same kernel set applied to a single plane (used for grayscale charts and tests).
std::vector<float> degrade_plane(std::span<const float> plane, int width, int height,
                                 const PSFGrid& grid, const DegradationPlan& plan);

std::array<double, 3> mean_brightness(const RasterImage& img);

/// Largest jump of (after − before) across any region seam, over all channels.
double max_seam_discontinuity(const RasterImage& before, const RasterImage& after,
                              const DegradationPlan& plan);

BoundaryPolicy parse_boundary(const std::string& s);
/// "hard" or "feather:N" (plain "feather" uses 8 px).
BlendPolicy parse_blend(const std::string& s);

}  // namespace lensdeg
