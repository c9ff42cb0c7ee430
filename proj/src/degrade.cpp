#include "lensdeg/degrade.hpp"

#include "lensdeg/error.hpp"
#include "lensdeg/fft.hpp"
#include "lensdeg/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace lensdeg {

Kernel normalize_kernel(const PSF& psf) {
    if (psf.size <= 0 || psf.intensity.size() != static_cast<std::size_t>(psf.size) * psf.size) {
        throw ValidationError("PSF array does not match its size");
    }
    Kernel k;
    k.rows = k.cols = psf.size;
    k.anchor_row = k.anchor_col = psf.size / 2;
    k.weights = psf.intensity;

    double total = 0.0;
    std::ptrdiff_t last = -1;
    for (std::size_t i = 0; i < k.weights.size(); ++i) {
        const double v = k.weights[i];
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("PSF has negative or non-finite samples");
        if (v > 0.0) last = static_cast<std::ptrdiff_t>(i);
        total += v;
    }
    if (last < 0) throw NumericError("cannot normalize an all-zero PSF");

    double partial = 0.0;
    for (std::ptrdiff_t i = 0; i < last; ++i) {
        k.weights[i] /= total;
        partial += k.weights[i];
    }
    k.weights[last] = std::max(0.0, 1.0 - partial);
    return k;
}

DegradationPlan DegradationPlan::tiling(int width, int height, int grid_rows, int grid_cols,
                                        BoundaryPolicy boundary, BlendPolicy blend) {
    if (grid_rows <= 0 || grid_cols <= 0) throw ValidationError("grid dimensions must be positive");
    if (width % grid_cols != 0 || height % grid_rows != 0) {
        throw ValidationError("image " + std::to_string(width) + "x" + std::to_string(height) +
                              " is not divisible into " + std::to_string(grid_rows) + "x" +
                              std::to_string(grid_cols) + " regions");
    }
    return {grid_rows, grid_cols, width / grid_cols, height / grid_rows, boundary, blend};
}

void DegradationPlan::validate(const RasterImage& img) const {
    if (grid_rows <= 0 || grid_cols <= 0 || region_w <= 0 || region_h <= 0) {
        throw ValidationError("degradation plan dimensions must be positive");
    }
    if (grid_rows * region_h != img.height || grid_cols * region_w != img.width) {
        throw ValidationError("plan regions do not tile the image (grid_rows*region_h must equal height, "
                              "grid_cols*region_w must equal width)");
    }
    if (blend.kind == BlendPolicy::Kind::feather &&
        (blend.width_px < 1 || blend.width_px > std::min(region_w, region_h))) {
        throw ValidationError("feather width must be between 1 and the region size");
    }
}

namespace {

int resolve(int i, int n, BoundaryPolicy policy) {
    if (i >= 0 && i < n) return i;
    switch (policy) {
        case BoundaryPolicy::clamp:
            return std::clamp(i, 0, n - 1);
        case BoundaryPolicy::zero:
            return -1;
        case BoundaryPolicy::mirror: {
            // Half-sample symmetric: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
            const int period = 2 * n;
            int m = i % period;
            if (m < 0) m += period;
            return m < n ? m : period - 1 - m;
        }
    }
    return -1;
}

struct Tap {
    int dr, dc;  // source offset: output(y, x) += w · src(y − dr, x − dc)
    double w;
};

struct PreparedKernel {
    int r0 = 0, r1 = -1, c0 = 0, c1 = -1;  // nonzero bounding box, offsets from the anchor
    std::vector<Tap> taps;
    std::vector<double> box;  // dense weights over the bounding box
};

PreparedKernel prepare(const Kernel& k) {
    PreparedKernel p;
    p.r0 = k.rows;
    p.c0 = k.cols;
    for (int r = 0; r < k.rows; ++r) {
        for (int c = 0; c < k.cols; ++c) {
            const double w = k.at(r, c);
            if (w == 0.0) continue;
            p.taps.push_back({r - k.anchor_row, c - k.anchor_col, w});
            p.r0 = std::min(p.r0, r);
            p.r1 = std::max(p.r1, r);
            p.c0 = std::min(p.c0, c);
            p.c1 = std::max(p.c1, c);
        }
    }
    const int bh = p.r1 - p.r0 + 1, bw = p.c1 - p.c0 + 1;
    p.box.assign(static_cast<std::size_t>(bh) * bw, 0.0);
    for (int r = 0; r < bh; ++r) {
        for (int c = 0; c < bw; ++c) p.box[r * bw + c] = k.at(p.r0 + r, p.c0 + c);
    }
    p.r0 -= k.anchor_row;
    p.r1 -= k.anchor_row;
    p.c0 -= k.anchor_col;
    p.c1 -= k.anchor_col;
    return p;
}

constexpr std::size_t kDirectTapLimit = 15 * 15;

/// Convolves window [y0, y1) × [x0, x1) of the plane; result row-major over the window.
std::vector<double> convolve_window(std::span<const float> src, int width, int height, int y0, int y1,
                                    int x0, int x1, const PreparedKernel& k, BoundaryPolicy policy) {
    const int wh = y1 - y0, ww = x1 - x0;
    std::vector<double> out(static_cast<std::size_t>(wh) * ww, 0.0);

    // Source patch covering every tap: rows y0 − r1 … y1 − 1 − r0.
    const int py0 = y0 - k.r1, px0 = x0 - k.c1;
    const int ph = wh + (k.r1 - k.r0), pw = ww + (k.c1 - k.c0);
    std::vector<double> patch(static_cast<std::size_t>(ph) * pw, 0.0);
    for (int r = 0; r < ph; ++r) {
        const int sy = resolve(py0 + r, height, policy);
        if (sy < 0) continue;
        for (int c = 0; c < pw; ++c) {
            const int sx = resolve(px0 + c, width, policy);
            if (sx < 0) continue;
            patch[static_cast<std::size_t>(r) * pw + c] = src[static_cast<std::size_t>(sy) * width + sx];
        }
    }

    if (k.taps.size() <= kDirectTapLimit) {
        for (int y = 0; y < wh; ++y) {
            for (int x = 0; x < ww; ++x) {
                double acc = 0.0;
                for (const Tap& t : k.taps) {
                    acc += t.w * patch[static_cast<std::size_t>(y + k.r1 - t.dr) * pw + (x + k.c1 - t.dc)];
                }
                out[static_cast<std::size_t>(y) * ww + x] = acc;
            }
        }
        return out;
    }

    // Circular convolution on a grid at least as large as the patch leaves the valid part intact.
    const int bh = k.r1 - k.r0 + 1, bw = k.c1 - k.c0 + 1;
    const int fh = fft::fast_size(ph), fw = fft::fast_size(pw);
    std::vector<double> a(static_cast<std::size_t>(fh) * fw, 0.0), b(a.size(), 0.0);
    for (int r = 0; r < ph; ++r) std::copy_n(&patch[static_cast<std::size_t>(r) * pw], pw, &a[static_cast<std::size_t>(r) * fw]);
    for (int r = 0; r < bh; ++r) std::copy_n(&k.box[static_cast<std::size_t>(r) * bw], bw, &b[static_cast<std::size_t>(r) * fw]);
    auto fa = fft::r2c(a, fh, fw);
    const auto fb = fft::r2c(b, fh, fw);
    for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
    const auto conv = fft::c2r(std::move(fa), fh, fw);
    const double scale = 1.0 / (static_cast<double>(fh) * fw);
    // Full-convolution index (y + bh − 1, x + bw − 1) is output pixel (y, x).
    for (int y = 0; y < wh; ++y) {
        for (int x = 0; x < ww; ++x) {
            out[static_cast<std::size_t>(y) * ww + x] =
                conv[static_cast<std::size_t>(y + bh - 1) * fw + (x + bw - 1)] * scale;
        }
    }
    return out;
}

/// Weight of region `index` (of `count`) at pixel `p`: a partition of unity along one axis.
double axis_weight(int p, int index, int count, int region, const BlendPolicy& blend) {
    if (blend.kind == BlendPolicy::Kind::hard) return p / region == index ? 1.0 : 0.0;
    const double w = blend.width_px;
    const double centre = p + 0.5;
    auto ramp = [&](int boundary) { return std::clamp((centre - boundary + 0.5 * w) / w, 0.0, 1.0); };
    const double left = index == 0 ? 1.0 : ramp(index * region);
    const double right = index == count - 1 ? 0.0 : ramp((index + 1) * region);
    return left - right;
}

}  // namespace

std::vector<float> degrade_plane(std::span<const float> plane, int width, int height,
                                 const PSFGrid& grid, const DegradationPlan& plan) {
    if (grid.rows != plan.grid_rows || grid.cols != plan.grid_cols) {
        throw ValidationError("PSF grid is " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                              " but the plan expects " + std::to_string(plan.grid_rows) + "x" +
                              std::to_string(plan.grid_cols));
    }
    const int margin = plan.blend.kind == BlendPolicy::Kind::feather ? (plan.blend.width_px + 1) / 2 : 0;
    const std::size_t regions = static_cast<std::size_t>(plan.grid_rows) * plan.grid_cols;

    struct Tile {
        int y0, y1, x0, x1;
        std::vector<double> values;
    };
    std::vector<Tile> tiles(regions);
    parallel_for(regions, [&](std::size_t i) {
        const int r = static_cast<int>(i) / plan.grid_cols, c = static_cast<int>(i) % plan.grid_cols;
        Tile& t = tiles[i];
        t.y0 = std::max(0, r * plan.region_h - margin);
        t.y1 = std::min(height, (r + 1) * plan.region_h + margin);
        t.x0 = std::max(0, c * plan.region_w - margin);
        t.x1 = std::min(width, (c + 1) * plan.region_w + margin);
        const PreparedKernel k = prepare(normalize_kernel(grid.at(r, c)));
        t.values = convolve_window(plane, width, height, t.y0, t.y1, t.x0, t.x1, k, plan.boundary);
    });

    std::vector<double> acc(static_cast<std::size_t>(width) * height, 0.0);
    for (std::size_t i = 0; i < regions; ++i) {
        const int r = static_cast<int>(i) / plan.grid_cols, c = static_cast<int>(i) % plan.grid_cols;
        const Tile& t = tiles[i];
        const int tw = t.x1 - t.x0;
        for (int y = t.y0; y < t.y1; ++y) {
            const double wy = axis_weight(y, r, plan.grid_rows, plan.region_h, plan.blend);
            if (wy == 0.0) continue;
            for (int x = t.x0; x < t.x1; ++x) {
                const double wx = axis_weight(x, c, plan.grid_cols, plan.region_w, plan.blend);
                if (wx == 0.0) continue;
                const double v = t.values[static_cast<std::size_t>(y - t.y0) * tw + (x - t.x0)];
                // Hard tiles are disjoint; keep the single-owner path a plain copy so identity
                // kernels stay bit-exact.
                double& dst = acc[static_cast<std::size_t>(y) * width + x];
                dst = (wy == 1.0 && wx == 1.0) ? v : dst + wy * wx * v;
            }
        }
    }

    std::vector<float> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(std::clamp(acc[i], 0.0, 1.0));
    return out;
}

RasterImage degrade_image(const RasterImage& img, std::span<const PSFGrid> grids, const DegradationPlan& plan) {
    img.validate();
    plan.validate(img);
    if (grids.size() != 3) throw ValidationError("degrade_image needs one PSF grid per channel (3)");
    for (std::size_t ch = 0; ch < 3; ++ch) {
        const PSFGrid& g = grids[ch];
        for (const PSF& cell : g.cells) {
            if (cell.wavelength_nm != g.wavelength_nm) {
                throw ValidationError("PSF grid for channel " + std::to_string(ch) + " mixes wavelengths");
            }
        }
        if (ch > 0 && !(grids[ch - 1].wavelength_nm > g.wavelength_nm)) {
            throw ValidationError("channel grids must be ordered R, G, B by strictly decreasing wavelength");
        }
    }
    RasterImage out(img.width, img.height);
    for (int ch = 0; ch < 3; ++ch) {
        const auto plane = img.channel(ch);
        out.set_channel(ch, degrade_plane(plane, img.width, img.height, grids[ch], plan));
    }
    return out;
}

std::array<double, 3> mean_brightness(const RasterImage& img) {
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    if (n == 0) return sum;
    for (std::size_t i = 0; i < n; ++i) {
        for (int ch = 0; ch < 3; ++ch) sum[ch] += img.data[i * 3 + ch];
    }
    for (double& s : sum) s /= static_cast<double>(n);
    return sum;
}

double max_seam_discontinuity(const RasterImage& before, const RasterImage& after, const DegradationPlan& plan) {
    if (before.width != after.width || before.height != after.height) {
        throw ValidationError("images differ in size");
    }
    auto residual = [&](int x, int y, int ch) {
        return static_cast<double>(after.at(x, y, ch)) - before.at(x, y, ch);
    };
    double worst = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        for (int c = 1; c < plan.grid_cols; ++c) {
            const int x = c * plan.region_w;
            for (int y = 0; y < before.height; ++y) {
                worst = std::max(worst, std::abs(residual(x, y, ch) - residual(x - 1, y, ch)));
            }
        }
        for (int r = 1; r < plan.grid_rows; ++r) {
            const int y = r * plan.region_h;
            for (int x = 0; x < before.width; ++x) {
                worst = std::max(worst, std::abs(residual(x, y, ch) - residual(x, y - 1, ch)));
            }
        }
    }
    return worst;
}

BoundaryPolicy parse_boundary(const std::string& s) {
    if (s == "mirror") return BoundaryPolicy::mirror;
    if (s == "clamp") return BoundaryPolicy::clamp;
    if (s == "zero") return BoundaryPolicy::zero;
    throw ValidationError("unknown boundary policy '" + s + "' (mirror, clamp or zero)");
}

BlendPolicy parse_blend(const std::string& s) {
    if (s == "hard") return {};
    if (s == "feather") return {BlendPolicy::Kind::feather, 8};
    if (s.rfind("feather:", 0) == 0) {
        int w = 0;
        const char* first = s.data() + 8;
        const char* last = s.data() + s.size();
        auto [ptr, ec] = std::from_chars(first, last, w);
        if (ec != std::errc() || ptr != last || w < 1) {
            throw ValidationError("bad feather width in '" + s + "'");
        }
        return {BlendPolicy::Kind::feather, w};
    }
    throw ValidationError("unknown blend '" + s + "' (hard or feather:N)");
}

}  // namespace lensdeg
