#pragma once

#include "lensdeg/raytrace.hpp"

#include <optional>
#include <vector>

namespace lensdeg {

/// Sampled exit-pupil transmission and wavefront error on the launch grid.
struct PupilFunction {
    int samples = 0;                 // N, arrays are N×N row-major (row = +y)
    std::vector<double> amplitude;   // 0 or 1
    std::vector<double> opd_mm;      // valid where amplitude = 1
    double sample_pitch_mm = 0.0;    // grid pitch in pupil coordinates
    double focal_distance_mm = 0.0;  // pupil coordinate → image plane scale
    double wavelength_nm = 0.0;
    FieldAngle field;
    int chief_row = 0;
    int chief_col = 0;

    double amp(int r, int c) const { return amplitude[static_cast<std::size_t>(r) * samples + c]; }
    double opd(int r, int c) const { return opd_mm[static_cast<std::size_t>(r) * samples + c]; }
    std::size_t support() const;
};

/// Normalized intensity on a square grid. Rows run top to bottom (−y), columns +x; the
/// reference point (chief-ray image) sits at pixel (size/2, size/2).
struct PSF {
    int size = 0;
    std::vector<double> intensity;
    double pixel_pitch_um = 0.0;
    double wavelength_nm = 0.0;
    FieldAngle field;

    double at(int r, int c) const { return intensity[static_cast<std::size_t>(r) * size + c]; }
    double sum() const;
};

struct PSFGrid {
    int rows = 0;
    int cols = 0;
    int cell_size_px = 0;
    double wavelength_nm = 0.0;
    double fov_deg = 0.0;
    std::vector<PSF> cells;  // row-major, row 0 = top of the image

    const PSF& at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
    PSF& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
};

/// OPD against the reference sphere centered on the chief ray's image-plane hit and passing
/// through the exit-pupil center (0, 0, exit_pupil_z_mm). Vignetted rays get amplitude 0.
/// The bundle must be anchored on the chief ray so its middle sample is the chief ray.
PupilFunction opd_map(const Bundle& bundle, const RayPath& chief, double exit_pupil_z_mm,
                      double focal_distance_mm);

struct PupilOptions {
    int samples = 128;
};

/// Chief-ray search, anchored bundle and OPD map for one field/wavelength.
PupilFunction compute_pupil(const LensPrescription& p, FieldAngle field, double wavelength_nm,
                            const PupilOptions& options = {});

/// RMS of the OPD over the pupil support, piston removed, in waves.
double rms_wavefront_waves(const PupilFunction& pupil);

struct FocusResult {
    double image_shift_mm = 0.0;  // applied to the stop/image gap, positive = away from the lens
    double rms_waves = 0.0;       // root-mean-square over the wavelengths at the optimum
    LensPrescription prescription;
};

/// Moves the image plane to the minimum of the on-axis polychromatic RMS wavefront error
/// (equal weights over `wavelengths_nm`, golden-section search around the paraxial focus).
FocusResult best_focus(const LensPrescription& p, std::span<const double> wavelengths_nm,
                       int pupil_samples = 64);

/// |DFT(A · exp(−i 2π OPD/λ))|² on a pad_factor·N grid, resampled to out_size pixels of
/// `output_pitch_um` (native FFT pitch when unset) and normalized to unit sum.
/// Native pitch = λ · focal_distance / (pad_factor · N · sample_pitch).
PSF fraunhofer_psf(const PupilFunction& pupil, int pad_factor, int out_size,
                   std::optional<double> output_pitch_um = std::nullopt);

double native_pitch_um(const PupilFunction& pupil, int pad_factor);

struct GridOptions {
    int pupil_samples = 128;
    int pad_factor = 4;
    /// PSF sample pitch; one sample = one image pixel. Unset: the pitch at which
    /// `image_width_px` pixels span the full ±fov field, 2·EFL·tan(fov)/width.
    std::optional<double> pixel_pitch_um;
    int image_width_px = 1280;
};

/// Pixel pitch implied by GridOptions for a given prescription and field half-angle.
double default_pixel_pitch_um(const LensPrescription& p, double fov_deg, int image_width_px);

/// Field direction of cell (r, c): angular pitch 2·fov / max(rows, cols), cell centers
/// symmetric about the axis, row 0 at +θy.
FieldAngle grid_field(int rows, int cols, double fov_deg, int r, int c);

/// Throws NumericError naming the failing cell when a bundle degenerates.
PSFGrid render_psf_grid(const LensPrescription& p, int rows, int cols, double fov_deg,
                        double wavelength_nm, int cell_size_px, const GridOptions& options = {});

/// Nearest-field-direction selection onto a smaller grid with the same angular pitch along
/// the longer target side. Throws ValidationError when upsizing.
PSFGrid resize_grid(const PSFGrid& g, int rows, int cols);

/// rows·cell × cols·cell grayscale tiles, each peak-normalized, then raised to `gamma`.
struct Mosaic {
    int width = 0;
    int height = 0;
    std::vector<double> values;
};
Mosaic mosaic(const PSFGrid& g, double gamma = 1.0);

// Structural measurements used by tests and reports.

struct PsfMoments {
    double centroid_x_px = 0.0;  // relative to the reference pixel, +x right
    double centroid_y_px = 0.0;  // +y up
    double var_x = 0.0;
    double var_y = 0.0;
    double cov_xy = 0.0;
};
PsfMoments psf_moments(const PSF& psf);

/// Energy outside radius `core_radius_px` (around the peak) divided by energy inside.
double ring_to_peak_ratio(const PSF& psf, double core_radius_px);

/// Number of local maxima brighter than `fraction` of the global peak.
int count_lobes(const PSF& psf, double fraction);

/// Semi-axes (px) of the ellipse holding `fraction` of the energy, from the second moments
/// scaled to the requested energy content.
std::pair<double, double> energy_ellipse_axes(const PSF& psf, double fraction);

}  // namespace lensdeg
