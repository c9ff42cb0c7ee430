// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include "lensdeg/degrade.hpp"
#include "lensdeg/metrology.hpp"
#include "lensdeg/pipeline.hpp"
#include "lensdeg/psf.hpp"
#include "lensdeg/psf_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

using namespace lensdeg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string data_path(const std::string& name) { return std::string(LENSDEG_DATA_DIR) + "/" + name; }

const LensPrescription& doublet() {
    static const LensPrescription p = load_prescription(data_path("doublet.lens"));
    return p;
}

const LensPrescription& focused() {
    static const LensPrescription p = best_focus(doublet(), doublet().wavelengths_nm()).prescription;
    return p;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("lensdeg_accept_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::array<PSFGrid, 3> doublet_grids(int pupil) {
    GridOptions opt;
    opt.pupil_samples = pupil;
    std::array<PSFGrid, 3> out;
    const double nms[3] = {656.0, 531.0, 486.0};
    for (int i = 0; i < 3; ++i) out[i] = resize_grid(render_psf_grid(focused(), 8, 8, 2.0, nms[i], 160, opt), 6, 8);
    return out;
}

// ---- criteria ----

Outcome snell_invariant() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240531);
    const double aperture = doublet().surfaces()[1].semi_diameter_mm;
    std::uniform_real_distribution<double> pos(-aperture, aperture), field(-2.0, 2.0);
    const double nms[3] = {486.0, 531.0, 656.0};
    double worst = 0.0;
    long events = 0;
    for (int i = 0; i < 10000; ++i) {
        const Ray ray = launch_ray(doublet(), {field(rng), field(rng)}, nms[i % 3], pos(rng), pos(rng));
        const RayPath path = trace_ray(doublet(), ray);
        for (std::size_t k = 1; k < path.hits.size(); ++k) {
            const SurfaceHit& h = path.hits[k];
            const Vec3& in = path.hits[k - 1].direction;
            const double s1 = norm(cross(in, h.normal)), s2 = norm(cross(h.direction, h.normal));
            worst = std::max(worst, std::abs(h.n_before * s1 - h.n_after * s2));
            ++events;
        }
    }
    const double t = seconds_since(t0);
    return {worst < 1e-12 && t < 5.0, fmt("%ld refraction events, max residual %.2e (< 1e-12), %.2f s (< 5 s)", events, worst, t)};
}

Outcome paraxial_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const LensPrescription& p = doublet();
    const double efl = paraxial_solve(p).effective_focal_length_mm;
    const double h = 0.001;
    const RayPath r = trace_ray(p, launch_ray(p, {}, p.reference_wavelength_nm(), 0.0, h));
    const double real = -h / (r.last().direction.y / r.last().direction.z);
    const double err = std::abs(efl - real);

    // One refracting surface n → n': f' = n'·R / (n' − n).
    auto single = [](double n, double radius) {
        return parse_prescription("wavelengths 550\nfields 0\nreference 550\nglass G constant " + std::to_string(n) +
                                  "\n0 obj AIR 10 40 0\n1 s1 G 1 40 " + std::to_string(radius) +
                                  "\n2 stop G 149 10 0\n3 img G 0 40 0\n");
    };
    const double f1 = paraxial_solve(single(1.5, 50.0)).effective_focal_length_mm;
    const double f2 = paraxial_solve(single(2.0, -30.0)).effective_focal_length_mm;
    const bool hand = f1 == 1.5 * 50.0 / 0.5 && f2 == 2.0 * -30.0 / 1.0;
    const double t = seconds_since(t0);
    return {err < 1e-6 && hand && t < 1.0,
            fmt("EFL %.9f vs real-ray %.9f (diff %.1e < 1e-6); single surface %.15g / %.15g (exact 150 / -60); %.3f s",
                efl, real, err, f1, f2, t)};
}

Outcome airy_oracle() {
    const int n = 128;
    const double radius = 32.0;
    PupilFunction pu;
    pu.samples = n;
    pu.amplitude.assign(n * n, 0.0);
    pu.opd_mm.assign(n * n, 0.0);
    pu.sample_pitch_mm = 0.2;
    pu.focal_distance_mm = 100.0;
    pu.wavelength_nm = 550.0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) pu.amplitude[r * n + c] = std::hypot(r - n / 2, c - n / 2) <= radius ? 1.0 : 0.0;
    }
    const double expected = 1.22 * pu.wavelength_nm * 1e-3 * pu.focal_distance_mm / (2 * radius * pu.sample_pitch_mm);
    std::string detail;
    bool ok = true;
    for (int pad : {4, 8}) {
        const PSF psf = fraunhofer_psf(pu, pad, 128);
        const double c = psf.size / 2;
        auto sample = [&](double x, double y) {
            const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
            const double fx = x - x0, fy = y - y0;
            return (1 - fx) * (1 - fy) * psf.at(y0, x0) + fx * (1 - fy) * psf.at(y0, x0 + 1) +
                   (1 - fx) * fy * psf.at(y0 + 1, x0) + fx * fy * psf.at(y0 + 1, x0 + 1);
        };
        const double step = 0.02;
        std::vector<double> prof;
        for (double r = 0.0; r < 60.0; r += step) {
            double acc = 0.0;
            for (int k = 0; k < 180; ++k) acc += sample(c + r * std::cos(k * kPi / 90), c + r * std::sin(k * kPi / 90));
            prof.push_back(acc);
        }
        std::size_t m = 1;
        while (m + 1 < prof.size() && !(prof[m] <= prof[m - 1] && prof[m] <= prof[m + 1])) ++m;
        const double y0 = prof[m - 1], y1 = prof[m], y2 = prof[m + 1];
        const double rmin = (m + 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)) * step * psf.pixel_pitch_um;
        const double rel = std::abs(rmin - expected) / expected;
        ok = ok && rel < 0.02;
        detail += fmt("pad %d: %.4f um vs %.4f um (%.2f%%); ", pad, rmin, expected, 100 * rel);
    }
    return {ok, detail + "tolerance 2%"};
}

Outcome psf_structure() {
    const auto para = paraxial_solve(focused(), 531.0);
    const double fnum = 1.0 / (2.0 * std::abs(para.image_space_marginal_angle_rad));
    const double pitch = 0.5;
    auto psf_at = [&](double nm) { return fraunhofer_psf(compute_pupil(focused(), {}, nm, {128}), 4, 129, pitch); };
    auto ratio = [&](const PSF& p) { return ring_to_peak_ratio(p, 1.22 * p.wavelength_nm * 1e-3 * fnum / pitch); };

    bool ok = true;
    std::string detail;
    double ratios[2] = {0, 0};
    int i = 0;
    for (double nm : {656.0, 531.0}) {
        const PSF p = psf_at(nm);
        const double peak = *std::max_element(p.intensity.begin(), p.intensity.end());
        double worst = 0.0;
        for (int r = 0; r < p.size; ++r) {
            for (int c = 0; c < p.size; ++c) {
                worst = std::max(worst, std::abs(p.at(r, c) - p.at(p.size - 1 - r, p.size - 1 - c)));
            }
        }
        const int lobes = count_lobes(p, 0.1);
        ok = ok && worst / peak < 1e-6 && lobes == 1;
        ratios[i++] = ratio(p);
        detail += fmt("%g nm: asym %.1e, lobes %d, ring/peak %.3f; ", nm, worst / peak, lobes, ratios[i - 1]);
    }
    const double blue = ratio(psf_at(486.0));
    const bool blue_ok = blue > ratios[0] && blue > ratios[1];
    detail += fmt("486 nm ring/peak %.3f %s both; ", blue, blue_ok ? ">" : "NOT >");
    ok = ok && blue_ok;

    // Substitutes for the external-tool comparison: self-RMSE and export round-trip.
    const PSF g = psf_at(531.0);
    const fs::path dir = scratch("c4");
    export_psf(g, dir / "g");
    const PSF back = load_reference_psf(dir / "g");
    const bool identical = back.intensity == g.intensity;
    fs::remove_all(dir);
    ok = ok && rmse(g, g) == 0.0 && identical;
    detail += fmt("rmse(a,a) = %g, round-trip %s", rmse(g, g), identical ? "bit-identical" : "DIFFERS");
    return {ok, detail};
}

Outcome grid_geometry() {
    GridOptions opt;
    opt.pupil_samples = 32;
    const PSFGrid g8 = render_psf_grid(focused(), 8, 8, 2.0, 531.0, 160, opt);
    const PSFGrid g32 = render_psf_grid(focused(), 32, 32, 2.0, 531.0, 160, opt);
    const Mosaic m8 = mosaic(g8), m32 = mosaic(g32);
    const std::size_t r8 = resize_grid(g8, 6, 8).cells.size(), r32 = resize_grid(g32, 24, 32).cells.size();
    const bool ok = m8.width == 1280 && m8.height == 1280 && m32.width == 5120 && m32.height == 5120 && r8 == 48 && r32 == 768;
    return {ok, fmt("mosaics %dx%d and %dx%d, resized cells %zu and %zu", m8.width, m8.height, m32.width, m32.height, r8, r32)};
}

Outcome degradation_identity() {
    const TestChart chart = make_test_chart(1280, 960, standard_chart_layout(1280, 960), {.blur_sigma_px = 0.8});
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    RasterImage noise(1280, 960);
    for (float& v : noise.data) v = u(rng);

    std::array<PSFGrid, 3> deltas;
    const double nms[3] = {656.0, 531.0, 486.0};
    for (int i = 0; i < 3; ++i) {
        PSF d;
        d.size = 160;
        d.wavelength_nm = nms[i];
        d.intensity.assign(160 * 160, 0.0);
        d.intensity[80 * 160 + 80] = 1.0;
        deltas[i] = PSFGrid{6, 8, 160, nms[i], 2.0, std::vector<PSF>(48, d)};
    }
    const auto plan = DegradationPlan::tiling(1280, 960, 6, 8);
    const bool exact = degrade_image(chart.image, deltas, plan) == chart.image && degrade_image(noise, deltas, plan) == noise;

    const auto grids = doublet_grids(64);
    double worst = 0.0;
    for (const RasterImage* img : {&chart.image, static_cast<const RasterImage*>(&noise)}) {
        const auto before = mean_brightness(*img), after = mean_brightness(degrade_image(*img, grids, plan));
        for (int ch = 0; ch < 3; ++ch) worst = std::max(worst, std::abs(after[ch] - before[ch]) / before[ch]);
    }
    return {exact && worst < 0.005,
            fmt("delta grids %s; max per-channel mean change %.4f%% (< 0.5%%)", exact ? "bit-exact" : "NOT exact", 100 * worst)};
}

Outcome slanted_edge_oracle() {
    bool ok = true;
    std::string detail;
    double first = 0.0;
    for (double sigma : {1.0, 2.0}) {
        const ChartEdge e{100, 100, 5.0};
        const TestChart c = make_test_chart(200, 200, std::span(&e, 1), {.blur_sigma_px = sigma});
        const auto plane = c.image.channel(0);
        const auto t0 = std::chrono::steady_clock::now();
        const double m = mtf50(esfr(plane, 200, 200, c.rois[0]));
        const double t = seconds_since(t0);
        const double target = sigma == 1.0 ? 0.187 : first / 2.0;
        if (sigma == 1.0) first = m;
        const double rel = std::abs(m - target) / target;
        ok = ok && rel < 0.05 && t < 1.0;
        detail += fmt("sigma %.0f: MTF50 %.4f vs %.4f (%.2f%%), %.3f s; ", sigma, m, target, 100 * rel, t);
    }
    return {ok, detail + "tolerance 5%, 1 s per ROI"};
}

Outcome regional_ordering() {
    const auto t0 = std::chrono::steady_clock::now();
    const TestChart chart = make_test_chart(1280, 960, standard_chart_layout(1280, 960), {.blur_sigma_px = 0.8});
    GridOptions opt;
    std::array<PSFGrid, 3> grids;
    const double nms[3] = {656.0, 531.0, 486.0};
    for (int i = 0; i < 3; ++i) grids[i] = resize_grid(render_psf_grid(focused(), 8, 8, 2.0, nms[i], 160, opt), 6, 8);
    const RasterImage after = degrade_image(chart.image, grids, DegradationPlan::tiling(1280, 960, 6, 8));
    const auto part = AnnulusPartition::for_image(1280, 960);
    const MTFReport r = region_report(chart.image, after, chart.rois, part);
    const auto& c = r.zone(Zone::center);
    const auto& m = r.zone(Zone::middle);
    const auto& e = r.zone(Zone::edge);
    const double t = seconds_since(t0);
    const double dc = -c.delta(), dm = -m.delta(), de = -e.delta();
    const bool spans = c.count > 0 && m.count > 0 && e.count > 0 && chart.rois.size() >= 15;
    const bool order = e.mean_after <= m.mean_after && m.mean_after <= c.mean_after;
    const bool drops = de > dc && dc < dm;
    return {spans && order && drops && t < 60.0,
            fmt("%zu edges (%d/%d/%d measured); MTF50 after center %.4f, middle %.4f, edge %.4f; "
                "drop center %.4f, middle %.4f, edge %.4f; %.1f s (< 60 s)",
                chart.rois.size(), c.count, m.count, e.count, c.mean_after, m.mean_after, e.mean_after, dc, dm, de, t)};
}

Outcome determinism() {
    const auto t0 = std::chrono::steady_clock::now();
    PipelineConfig cfg = load_pipeline_config(data_path("pipeline.json"));
    const fs::path a = scratch("c9a"), b = scratch("c9b");
    cfg.output_dir = a;
    run_pipeline(cfg);
    cfg.output_dir = b;
    run_pipeline(cfg);
    const std::string ma = slurp(a / "manifest.json"), mb = slurp(b / "manifest.json");
    fs::remove_all(a);
    fs::remove_all(b);
    return {!ma.empty() && ma == mb,
            fmt("manifests %zu bytes, %s, %.1f s for two runs", ma.size(), ma == mb ? "byte-identical" : "DIFFER", seconds_since(t0))};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"Snell invariant", snell_invariant},
        {"paraxial oracle", paraxial_oracle},
        {"Airy first minimum", airy_oracle},
        {"on-axis PSF structure", psf_structure},
        {"grid geometry", grid_geometry},
        {"degradation identity and energy", degradation_identity},
        {"slanted-edge Gaussian oracle", slanted_edge_oracle},
        {"regional MTF50 ordering", regional_ordering},
        {"pipeline determinism", determinism},
    };
    int failed = 0, index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("[%s] criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
