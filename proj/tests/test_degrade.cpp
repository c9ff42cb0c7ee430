#include "helpers.hpp"

#include "lensdeg/degrade.hpp"
#include "lensdeg/error.hpp"
#include "lensdeg/parallel.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

using namespace lensdeg;

namespace {

PSF tap_psf(int size, const std::function<double(int, int)>& f, double nm = 531.0) {
    PSF p;
    p.size = size;
    p.wavelength_nm = nm;
    p.pixel_pitch_um = 5.0;
    p.intensity.resize(static_cast<std::size_t>(size) * size);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) p.intensity[static_cast<std::size_t>(r) * size + c] = f(r - size / 2, c - size / 2);
    }
    return p;
}

PSF delta(int size, double nm = 531.0) {
    return tap_psf(size, [](int dr, int dc) { return dr == 0 && dc == 0 ? 1.0 : 0.0; }, nm);
}

PSF gaussian(int size, double sigma, double nm = 531.0) {
    return tap_psf(size, [sigma](int dr, int dc) { return std::exp(-(dr * dr + dc * dc) / (2 * sigma * sigma)); }, nm);
}

PSFGrid uniform_grid(int rows, int cols, const PSF& cell) {
    PSFGrid g;
    g.rows = rows;
    g.cols = cols;
    g.cell_size_px = cell.size;
    g.wavelength_nm = cell.wavelength_nm;
    g.fov_deg = 2.0;
    g.cells.assign(static_cast<std::size_t>(rows) * cols, cell);
    return g;
}

std::array<PSFGrid, 3> rgb(int rows, int cols, const std::function<PSF(double)>& make) {
    return {uniform_grid(rows, cols, make(656.0)), uniform_grid(rows, cols, make(531.0)),
            uniform_grid(rows, cols, make(486.0))};
}

RasterImage random_image(int w, int h, unsigned seed, float lo = 0.0f, float hi = 1.0f) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    RasterImage img(w, h);
    for (float& v : img.data) v = u(rng);
    return img;
}

// Reference spatially-invariant convolution with half-sample mirror borders.
std::vector<float> naive_mirror(std::span<const float> src, int w, int h, const Kernel& k) {
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
        return i;
    };
    std::vector<float> out(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int r = 0; r < k.rows; ++r) {
                for (int c = 0; c < k.cols; ++c) {
                    const int sy = reflect(y - (r - k.anchor_row), h), sx = reflect(x - (c - k.anchor_col), w);
                    acc += k.at(r, c) * src[static_cast<std::size_t>(sy) * w + sx];
                }
            }
            out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
        }
    }
    return out;
}

double tile_std(std::span<const float> plane, int w, int x0, int y0, int size) {
    double s = 0, s2 = 0;
    for (int y = y0; y < y0 + size; ++y) {
        for (int x = x0; x < x0 + size; ++x) {
            const double v = plane[static_cast<std::size_t>(y) * w + x];
            s += v;
            s2 += v * v;
        }
    }
    const double n = static_cast<double>(size) * size;
    return std::sqrt(std::max(0.0, s2 / n - (s / n) * (s / n)));
}

}  // namespace

TEST_SUITE("degrade") {

TEST_CASE("kernel normalization") {
    const Kernel k = normalize_kernel(gaussian(31, 3.0));
    double sum = 0.0;
    for (double w : k.weights) {
        CHECK(w >= 0.0);
        sum += w;
    }
    CHECK(sum == 1.0);

    const Kernel d = normalize_kernel(delta(16));
    CHECK(d.rows == 16);
    CHECK(d.anchor_row == 8);
    CHECK(d.anchor_col == 8);
    CHECK(d.at(8, 8) == 1.0);

    CHECK_THROWS_AS(normalize_kernel(tap_psf(8, [](int, int) { return 0.0; })), NumericError);
    CHECK_THROWS_AS(normalize_kernel(tap_psf(8, [](int dr, int) { return dr == 0 ? -1.0 : 1.0; })), ValidationError);
    CHECK_THROWS_AS(normalize_kernel(tap_psf(8, [](int, int) { return std::nan(""); })), ValidationError);
}

TEST_CASE("delta kernels reproduce the input exactly") {
    const RasterImage img = random_image(64, 48, 1);
    const auto grids = rgb(3, 4, [](double nm) { return delta(32, nm); });
    for (BoundaryPolicy b : {BoundaryPolicy::mirror, BoundaryPolicy::clamp, BoundaryPolicy::zero}) {
        for (BlendPolicy blend : {BlendPolicy{}, BlendPolicy{BlendPolicy::Kind::feather, 6}}) {
            const auto plan = DegradationPlan::tiling(64, 48, 3, 4, b, blend);
            CHECK(degrade_image(img, grids, plan) == img);
        }
    }
}

TEST_CASE("brightness and flat fields are preserved") {
    const RasterImage img = random_image(96, 64, 2, 0.1f, 0.9f);
    const auto grids = rgb(2, 3, [](double nm) { return gaussian(33, 2.5, nm); });
    const auto out = degrade_image(img, grids, DegradationPlan::tiling(96, 64, 2, 3));
    const auto before = mean_brightness(img), after = mean_brightness(out);
    for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(after[ch] - before[ch]) / before[ch] < 0.005);

    const RasterImage flat(40, 30, 0.4f);
    for (BoundaryPolicy b : {BoundaryPolicy::mirror, BoundaryPolicy::clamp}) {
        const auto o = degrade_image(flat, rgb(1, 1, [](double nm) { return gaussian(21, 3.0, nm); }),
                                     DegradationPlan::tiling(40, 30, 1, 1, b));
        for (float v : o.data) CHECK(v == doctest::Approx(0.4).epsilon(1e-5));
    }
}

TEST_CASE("regions read real neighbor pixels across seams") {
    const RasterImage img = random_image(16, 16, 3);
    // One row down: output(y, x) = input(y − 1, x).
    const auto grids = rgb(2, 2, [](double nm) {
        return tap_psf(8, [](int dr, int dc) { return dr == 1 && dc == 0 ? 1.0 : 0.0; }, nm);
    });
    const auto out = degrade_image(img, grids, DegradationPlan::tiling(16, 16, 2, 2));
    for (int x = 0; x < 16; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
            CHECK(out.at(x, 8, ch) == img.at(x, 7, ch));
            CHECK(out.at(x, 0, ch) == img.at(x, 0, ch));  // half-sample mirror at the border
        }
    }
}

TEST_CASE("FFT path agrees with a direct convolution") {
    const RasterImage img = random_image(70, 50, 4, 0.2f, 0.8f);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> taps(21 * 21);
    for (double& t : taps) t = u(rng);
    const PSF odd = tap_psf(32, [&](int dr, int dc) {
        return std::abs(dr) <= 10 && std::abs(dc) <= 10 ? taps[(dr + 10) * 21 + dc + 10] : 0.0;
    });
    PSFGrid g = uniform_grid(1, 1, odd);
    const auto plane = img.channel(1);
    const auto out = degrade_plane(plane, 70, 50, g, DegradationPlan::tiling(70, 50, 1, 1));
    const auto ref = naive_mirror(plane, 70, 50, normalize_kernel(odd));
    double worst = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, static_cast<double>(std::abs(out[i] - ref[i])));
    CHECK(worst < 1e-5);
}

TEST_CASE("feathering identical kernels changes nothing") {
    const RasterImage img = random_image(64, 64, 5, 0.1f, 0.9f);
    const auto grids = rgb(4, 4, [](double nm) { return gaussian(25, 1.5, nm); });
    const auto hard = degrade_image(img, grids, DegradationPlan::tiling(64, 64, 4, 4));
    const auto soft = degrade_image(img, grids, DegradationPlan::tiling(64, 64, 4, 4, BoundaryPolicy::mirror,
                                                                        {BlendPolicy::Kind::feather, 5}));
    for (std::size_t i = 0; i < hard.data.size(); ++i) CHECK(soft.data[i] == doctest::Approx(hard.data[i]).epsilon(1e-5));
}

TEST_CASE("results do not depend on the worker count") {
    const RasterImage img = random_image(80, 60, 6);
    std::array<PSFGrid, 3> grids = rgb(3, 4, [](double nm) { return gaussian(21, 2.0, nm); });
    grids[1].at(0, 0) = gaussian(21, 4.0, 531.0);
    const auto plan = DegradationPlan::tiling(80, 60, 3, 4, BoundaryPolicy::mirror, {BlendPolicy::Kind::feather, 4});
    const unsigned saved = thread_count();
    set_thread_count(1);
    const auto a = degrade_image(img, grids, plan);
    set_thread_count(7);
    const auto b = degrade_image(img, grids, plan);
    set_thread_count(saved);
    CHECK(a == b);
}

TEST_CASE("invalid plans and grids are rejected") {
    const RasterImage img = random_image(64, 48, 7);
    const auto grids = rgb(3, 4, [](double nm) { return delta(16, nm); });
    CHECK_THROWS_AS(DegradationPlan::tiling(64, 48, 5, 4), ValidationError);
    CHECK_THROWS_AS(degrade_image(img, grids, DegradationPlan::tiling(64, 48, 4, 4)), ValidationError);
    CHECK_THROWS_AS(degrade_image(img, std::span(grids).first(2), DegradationPlan::tiling(64, 48, 3, 4)), ValidationError);
    auto swapped = grids;
    std::swap(swapped[0], swapped[2]);
    CHECK_THROWS_AS(degrade_image(img, swapped, DegradationPlan::tiling(64, 48, 3, 4)), ValidationError);
    CHECK_THROWS_AS(degrade_image(img, grids, DegradationPlan::tiling(64, 48, 3, 4, BoundaryPolicy::mirror,
                                                                      {BlendPolicy::Kind::feather, 40})),
                    ValidationError);
}

TEST_CASE("mean brightness and option parsing") {
    RasterImage img(2, 1);
    img.data = {0.0f, 0.5f, 1.0f, 1.0f, 0.5f, 0.0f};
    const auto m = mean_brightness(img);
    CHECK(m[0] == doctest::Approx(0.5));
    CHECK(m[1] == doctest::Approx(0.5));
    CHECK(m[2] == doctest::Approx(0.5));

    CHECK(parse_boundary("clamp") == BoundaryPolicy::clamp);
    CHECK_THROWS_AS(parse_boundary("wrap"), ValidationError);
    CHECK(parse_blend("hard").kind == BlendPolicy::Kind::hard);
    CHECK(parse_blend("feather").width_px == 8);
    CHECK(parse_blend("feather:12").width_px == 12);
    CHECK_THROWS_AS(parse_blend("feather:x"), ValidationError);
    CHECK_THROWS_AS(parse_blend("feather:0"), ValidationError);
}

TEST_CASE("finer PSF grids give smaller seam jumps") {
    const auto focus = best_focus(doublet(), doublet().wavelengths_nm());
    GridOptions opt;
    opt.pupil_samples = 32;
    opt.pixel_pitch_um = 1.0;
    const int w = 256, h = 192;
    RasterImage img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // A ramp: each kernel's centroid offset becomes a constant residual, so a seam
            // jump measures how much neighboring kernels differ.
            const float v = static_cast<float>(0.2 + 0.6 * (x + y) / (w + h));
            for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = v;
        }
    }
    auto seam = [&](int rows, int cols) {
        std::vector<PSFGrid> grids;
        for (double nm : {656.0, 531.0, 486.0}) grids.push_back(render_psf_grid(focus.prescription, rows, cols, 2.0, nm, 32, opt));
        const auto plan = DegradationPlan::tiling(w, h, rows, cols);
        return max_seam_discontinuity(img, degrade_image(img, grids, plan), plan);
    };
    const double coarse = seam(6, 8), fine = seam(24, 32);
    MESSAGE("seam jump 6x8 " << coarse << ", 24x32 " << fine);
    CHECK(fine < coarse);
}

TEST_CASE("corners lose more contrast than the center") {
    const auto focus = best_focus(doublet(), doublet().wavelengths_nm());
    GridOptions opt;
    opt.pupil_samples = 64;
    opt.pixel_pitch_um = 5.4563;
    const PSFGrid grid = render_psf_grid(focus.prescription, 6, 8, 2.0, 486.0, 64, opt);
    const int w = 320, h = 240;
    const RasterImage img = random_image(w, h, 8, 0.2f, 0.8f);
    const auto plane = img.channel(2);
    const auto out = degrade_plane(plane, w, h, grid, DegradationPlan::tiling(w, h, 6, 8));
    auto drop = [&](int x0, int y0) { return 1.0 - tile_std(out, w, x0, y0, 32) / tile_std(plane, w, x0, y0, 32); };
    const double corner = drop(4, 4), center = drop(w / 2 - 16, h / 2 - 16);
    MESSAGE("contrast drop center " << center << ", corner " << corner);
    CHECK(corner > center);
}

}  // TEST_SUITE
