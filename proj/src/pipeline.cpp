#include "lensdeg/pipeline.hpp"

#include "lensdeg/error.hpp"
#include "lensdeg/plot.hpp"
#include "lensdeg/psf_io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

namespace fs = std::filesystem;
using nlohmann::json;

namespace lensdeg {

std::string sha256_hex(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot hash '" + file.string() + "'");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

void PipelineConfig::validate() const {
    if (!fs::exists(prescription)) throw ValidationError("prescription file '" + prescription.string() + "' does not exist");
    for (const auto& img : images) {
        if (!fs::exists(img)) throw ValidationError("input image '" + img.string() + "' does not exist");
    }
    if (rois && !fs::exists(*rois)) throw ValidationError("ROI file '" + rois->string() + "' does not exist");
    if (!(fov_deg > 0.0)) throw ValidationError("fov_deg must be positive");
    if (psf_rows < 1 || psf_cols < 1 || grid_rows < 1 || grid_cols < 1) throw ValidationError("grid dims must be >= 1");
    if (grid_rows > psf_rows || grid_cols > psf_cols) {
        throw ValidationError("degradation grid must not exceed the rendered PSF grid");
    }
    if (cell_px < 1) throw ValidationError("cell_px must be >= 1");
    if (pupil_samples < 16) throw ValidationError("pupil_samples must be >= 16");
    if (pad_factor < 2) throw ValidationError("pad_factor must be >= 2");
    if (bit_depth != 8 && bit_depth != 16) throw ValidationError("bit_depth must be 8 or 16");
    if (!annuli && !annuli_default) {
        throw ValidationError("annulus radii are mandatory: give \"annuli\": [r1, r2] or \"annuli\": \"default\"");
    }
    if (annuli && !(annuli->first > 0 && annuli->first < annuli->second)) {
        throw ValidationError("annuli must satisfy 0 < r1 < r2");
    }
    if (images.empty() && (chart_width % grid_cols != 0 || chart_height % grid_rows != 0)) {
        throw ValidationError("chart size is not divisible into the degradation grid");
    }
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pipeline config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("pipeline config is not valid JSON: " + std::string(e.what()));
    }
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    auto dims = [&](const char* key, int& rows, int& cols) {
        if (!j.contains(key)) return;
        const auto& d = j[key];
        if (!d.is_array() || d.size() != 2) throw ValidationError(std::string(key) + " must be [rows, cols]");
        rows = d[0].get<int>();
        cols = d[1].get<int>();
    };

    static const std::vector<std::string> known = {
        "prescription", "wavelengths_nm", "fov_deg", "psf_grid", "grid", "cell_px", "pupil_samples",
        "pad_factor", "pixel_pitch_um", "refocus", "images", "chart", "rois", "annuli", "boundary",
        "blend", "assume_linear", "bit_depth", "output_dir"};
    PipelineConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (std::find(known.begin(), known.end(), key) == known.end()) {
                throw ValidationError("unknown pipeline config key '" + key + "'");
            }
        }
        if (!j.contains("prescription")) throw ValidationError("pipeline config needs \"prescription\"");
        c.prescription = resolve(j["prescription"].get<std::string>());
        if (j.contains("wavelengths_nm")) c.wavelengths_nm = j["wavelengths_nm"].get<std::vector<double>>();
        c.fov_deg = j.value("fov_deg", c.fov_deg);
        dims("psf_grid", c.psf_rows, c.psf_cols);
        dims("grid", c.grid_rows, c.grid_cols);
        c.cell_px = j.value("cell_px", c.cell_px);
        c.pupil_samples = j.value("pupil_samples", c.pupil_samples);
        c.pad_factor = j.value("pad_factor", c.pad_factor);
        if (j.contains("pixel_pitch_um") && !j["pixel_pitch_um"].is_null()) c.pixel_pitch_um = j["pixel_pitch_um"].get<double>();
        c.refocus = j.value("refocus", c.refocus);
        if (j.contains("images")) {
            for (const auto& p : j["images"]) c.images.push_back(resolve(p.get<std::string>()));
        }
        if (j.contains("chart")) {
            const auto& ch = j["chart"];
            c.chart_width = ch.value("width", c.chart_width);
            c.chart_height = ch.value("height", c.chart_height);
            c.chart_blur_sigma_px = ch.value("blur_sigma_px", c.chart_blur_sigma_px);
        }
        if (j.contains("rois")) c.rois = resolve(j["rois"].get<std::string>());
        if (j.contains("annuli")) {
            const auto& a = j["annuli"];
            if (a.is_string() && a.get<std::string>() == "default") {
                c.annuli_default = true;
            } else if (a.is_array() && a.size() == 2) {
                c.annuli = std::pair{a[0].get<double>(), a[1].get<double>()};
            } else {
                throw ValidationError("annuli must be [r1, r2] or \"default\"");
            }
        }
        if (j.contains("boundary")) c.boundary = parse_boundary(j["boundary"].get<std::string>());
        if (j.contains("blend")) c.blend = parse_blend(j["blend"].get<std::string>());
        c.assume_linear = j.value("assume_linear", c.assume_linear);
        c.bit_depth = j.value("bit_depth", c.bit_depth);
        c.output_dir = resolve(j.value("output_dir", std::string("out")));
    } catch (const json::exception& e) {
        throw ValidationError("pipeline config has a wrongly typed value: " + std::string(e.what()));
    }
    return c;
}

std::string Manifest::to_json() const {
    json files = json::array();
    for (const ManifestEntry& e : entries) {
        files.push_back({{"path", e.path}, {"kind", e.kind}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    }
    json j = {{"format", "lensdeg-manifest"}, {"files", files}};
    if (!summary_json.empty()) j["summary"] = json::parse(summary_json);
    return j.dump(2) + "\n";
}

namespace {

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.category(), std::string("stage '") + name + "': " + e.what());
    } catch (const fs::filesystem_error& e) {
        throw IoError(std::string("stage '") + name + "': " + e.what());
    }
}

std::string wavelength_tag(double nm) {
    const double r = std::round(nm);
    if (std::abs(nm - r) < 1e-9) return std::to_string(static_cast<long long>(r)) + "nm";
    std::string s = std::to_string(nm);
    std::replace(s.begin(), s.end(), '.', 'p');
    return s + "nm";
}

}  // namespace

Manifest run_pipeline(const PipelineConfig& cfg) {
    stage("config", [&] { cfg.validate(); return 0; });
    const fs::path out = cfg.output_dir;
    stage("output", [&] { fs::create_directories(out); return 0; });

    Manifest manifest;
    json summary;
    std::vector<std::pair<fs::path, std::string>> written;
    auto record = [&](const fs::path& p, const std::string& kind) { written.emplace_back(p, kind); };

    LensPrescription lens = stage("prescription", [&] { return load_prescription(cfg.prescription.string()); });
    std::vector<double> wavelengths = cfg.wavelengths_nm;
    if (wavelengths.empty()) wavelengths.assign(lens.wavelengths_nm().begin(), lens.wavelengths_nm().end());
    if (wavelengths.size() != 3) throw ValidationError("stage 'prescription': the pipeline needs exactly 3 wavelengths (R, G, B)");
    if (cfg.refocus) {
        const FocusResult focus = stage("refocus", [&] { return best_focus(lens, wavelengths); });
        summary["image_shift_mm"] = focus.image_shift_mm;
        summary["focus_rms_waves"] = focus.rms_waves;
        lens = focus.prescription;
        const fs::path lens_out = out / "refocused.lens";
        std::ofstream(lens_out) << serialize_prescription(lens);
        record(lens_out, "prescription");
    }

    // Channel order R, G, B is decreasing wavelength.
    std::vector<double> channel_nm = wavelengths;
    std::sort(channel_nm.begin(), channel_nm.end(), std::greater<>());

    GridOptions gopt;
    gopt.pupil_samples = cfg.pupil_samples;
    gopt.pad_factor = cfg.pad_factor;
    gopt.pixel_pitch_um = cfg.pixel_pitch_um;
    gopt.image_width_px = cfg.images.empty() ? cfg.chart_width : 0;

    // Input images are loaded first so the default pixel pitch can follow their width.
    struct Input {
        std::string name;
        RasterImage image;
        std::vector<EdgeROI> rois;
    };
    std::vector<Input> inputs = stage("inputs", [&] {
        std::vector<Input> v;
        if (cfg.images.empty()) {
            ChartOptions co;
            co.blur_sigma_px = cfg.chart_blur_sigma_px;
            const auto edges = standard_chart_layout(cfg.chart_width, cfg.chart_height);
            TestChart chart = make_test_chart(cfg.chart_width, cfg.chart_height, edges, co);
            write_png((out / "chart.png").string(), chart.image, cfg.bit_depth, {cfg.assume_linear});
            record(out / "chart.png", "input-chart");
            std::ofstream(out / "chart_rois.json") << rois_to_json(chart.rois);
            record(out / "chart_rois.json", "rois");
            v.push_back({"chart", std::move(chart.image), std::move(chart.rois)});
        } else {
            const auto rois = cfg.rois ? load_rois(cfg.rois->string()) : std::vector<EdgeROI>{};
            for (const auto& p : cfg.images) {
                v.push_back({p.stem().string(), read_png(p.string(), {cfg.assume_linear}).image, rois});
            }
        }
        return v;
    });
    if (gopt.image_width_px == 0) gopt.image_width_px = inputs.front().image.width;
    const double pitch = cfg.pixel_pitch_um ? *cfg.pixel_pitch_um
                                            : default_pixel_pitch_um(lens, cfg.fov_deg, gopt.image_width_px);
    gopt.pixel_pitch_um = pitch;
    summary["pixel_pitch_um"] = pitch;

    std::vector<PSFGrid> grids;
    for (double nm : channel_nm) {
        const std::string tag = wavelength_tag(nm);
        PSFGrid g = stage("psf-grid", [&] {
            return render_psf_grid(lens, cfg.psf_rows, cfg.psf_cols, cfg.fov_deg, nm, cfg.cell_px, gopt);
        });
        stage("psf-export", [&] {
            for (const auto& f : save_psf_grid(g, out / "psf" / tag)) record(f, "psf-grid");
            const Mosaic m = mosaic(g, 0.5);
            write_gray_png((out / ("mosaic_" + tag + ".png")).string(), m.width, m.height, m.values, 8);
            record(out / ("mosaic_" + tag + ".png"), "mosaic");
            return 0;
        });
        grids.push_back(stage("resize", [&] { return resize_grid(g, cfg.grid_rows, cfg.grid_cols); }));
    }
    stage("plot", [&] {
        std::vector<PSF> centre;
        for (const PSFGrid& g : grids) centre.push_back(g.at(g.rows / 2, g.cols / 2));
        plot_psf_panel(out / "psf_panel.png", centre);
        record(out / "psf_panel.png", "plot");
        return 0;
    });

    json reports = json::array();
    for (const Input& in : inputs) {
        const DegradationPlan plan = stage("degrade", [&] {
            return DegradationPlan::tiling(in.image.width, in.image.height, cfg.grid_rows, cfg.grid_cols, cfg.boundary, cfg.blend);
        });
        const RasterImage degraded = stage("degrade", [&] { return degrade_image(in.image, grids, plan); });
        const fs::path dpath = out / ("degraded_" + in.name + ".png");
        stage("degrade", [&] { write_png(dpath.string(), degraded, cfg.bit_depth, {cfg.assume_linear}); return 0; });
        record(dpath, "degraded");
        if (in.rois.empty()) continue;

        stage("mtf", [&] {
            const AnnulusPartition part =
                cfg.annuli ? AnnulusPartition{0.5 * in.image.width, 0.5 * in.image.height, cfg.annuli->first, cfg.annuli->second}
                           : AnnulusPartition::for_image(in.image.width, in.image.height);
            const MTFReport rep = region_report(in.image, degraded, in.rois, part);
            const fs::path rpath = out / ("report_" + in.name + ".json");
            std::ofstream(rpath) << rep.to_json();
            record(rpath, "report");
            std::ofstream(out / ("report_" + in.name + ".csv")) << rep.to_csv();
            record(out / ("report_" + in.name + ".csv"), "report-csv");
            plot_region_bars(out / ("regions_" + in.name + ".png"), rep);
            record(out / ("regions_" + in.name + ".png"), "plot");
            json z;
            for (const ZoneSummary& s : rep.zones) {
                z[to_string(s.zone)] = {{"before", s.mean_before}, {"after", s.mean_after}, {"delta", s.delta()}};
            }
            reports.push_back({{"input", in.name}, {"regions", z}});
            return 0;
        });
    }
    summary["reports"] = reports;
    manifest.summary_json = summary.dump();

    stage("manifest", [&] {
        for (const auto& [p, kind] : written) {
            manifest.entries.push_back({fs::relative(p, out).generic_string(), kind, sha256_hex(p), fs::file_size(p)});
        }
        std::ofstream mf(out / "manifest.json", std::ios::binary);
        if (!mf) throw IoError("cannot write manifest");
        mf << manifest.to_json();
        return 0;
    });
    return manifest;
}

}  // namespace lensdeg
