// lensdeg: ray trace, PSF grids, spatially-variant degradation and slanted-edge metrology.

#include "lensdeg/degrade.hpp"
#include "lensdeg/error.hpp"
#include "lensdeg/metrology.hpp"
#include "lensdeg/parallel.hpp"
#include "lensdeg/pipeline.hpp"
#include "lensdeg/plot.hpp"
#include "lensdeg/psf_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>

namespace fs = std::filesystem;
using namespace lensdeg;

namespace {

constexpr int kExitConfig = 2, kExitNumeric = 3, kExitIo = 4;

std::pair<int, int> parse_dims(const std::string& s) {
    static const std::regex re(R"((\d+)[xX](\d+))");
    std::smatch m;
    if (!std::regex_match(s, m, re)) throw ValidationError("expected RxC (rows x cols), got '" + s + "'");
    const int r = std::stoi(m[1]), c = std::stoi(m[2]);
    if (r < 1 || c < 1) throw ValidationError("grid dims must be >= 1");
    return {r, c};
}

AnnulusPartition parse_annuli(const std::string& s, int width, int height) {
    if (s == "default") return AnnulusPartition::for_image(width, height);
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw ValidationError("--annuli expects r1,r2 (px) or 'default'");
    AnnulusPartition p;
    try {
        p = {0.5 * width, 0.5 * height, std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw ValidationError("--annuli expects numbers, got '" + s + "'");
    }
    p.validate();
    return p;
}

LensPrescription maybe_refocus(LensPrescription lens, bool refocus) {
    if (!refocus) return lens;
    const FocusResult f = best_focus(lens, lens.wavelengths_nm());
    std::fprintf(stderr, "refocus: image plane moved by %+.5f mm (rms %.4f waves)\n", f.image_shift_mm, f.rms_waves);
    return f.prescription;
}

std::string tag(double nm) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%gnm", nm);
    return buf;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw IoError("cannot write '" + path + "'");
}

struct Common {
    std::string lens = "data/doublet.lens";
    bool no_refocus = false;
};

void add_lens(CLI::App* cmd, Common& c) {
    cmd->add_option("--lens", c.lens, "Prescription file")->capture_default_str();
    cmd->add_flag("--no-refocus", c.no_refocus, "Keep the image plane exactly as prescribed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lens ray tracing, PSF grids, spatially-variant degradation and MTF metrology"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

    // trace
    Common trace_c;
    double t_fx = 0, t_fy = 0, t_wl = 531;
    int t_samples = 0;
    std::string t_out;
    auto* trace = app.add_subcommand("trace", "Trace a bundle (or the chief ray) and emit a per-surface CSV");
    trace->add_option("--lens", trace_c.lens, "Prescription file")->capture_default_str();
    trace->add_option("--field-x", t_fx, "Field angle theta_x (deg)");
    trace->add_option("--field", t_fy, "Field angle theta_y (deg)");
    trace->add_option("--wavelength", t_wl, "Wavelength (nm)");
    trace->add_option("--samples", t_samples, "N for an NxN bundle; 0 traces only the chief ray");
    trace->add_option("--out", t_out, "CSV file (default stdout)");

    // paraxial
    Common par_c;
    std::optional<double> par_wl;
    bool par_json = false;
    auto* paraxial = app.add_subcommand("paraxial", "Paraxial EFL, BFD, marginal angle and exit pupil");
    paraxial->add_option("--lens", par_c.lens, "Prescription file")->capture_default_str();
    paraxial->add_option("--wavelength", par_wl, "Wavelength (nm), default the reference");
    paraxial->add_flag("--json", par_json, "JSON output");

    // psf
    Common psf_c;
    double p_fx = 0, p_fy = 0, p_wl = 531;
    int p_size = 160, p_pupil = 128, p_pad = 4, p_width = 1280;
    double p_fov = 2.0;
    std::optional<double> p_pitch;
    std::string p_out;
    auto* psf = app.add_subcommand("psf", "Fraunhofer PSF for one field direction and wavelength");
    add_lens(psf, psf_c);
    psf->add_option("--field-x", p_fx, "theta_x (deg)");
    psf->add_option("--field", p_fy, "theta_y (deg)");
    psf->add_option("--wavelength", p_wl, "Wavelength (nm)");
    psf->add_option("--size", p_size, "Output size (px)");
    psf->add_option("--pupil", p_pupil, "Pupil samples N");
    psf->add_option("--pad", p_pad, "Zero-padding factor");
    psf->add_option("--pitch", p_pitch, "Output pitch (um); default from --fov/--image-width");
    psf->add_option("--fov", p_fov, "Field half-angle used for the default pitch (deg)");
    psf->add_option("--image-width", p_width, "Image width used for the default pitch (px)");
    psf->add_option("--out", p_out, "Output stem (writes .bin/.json/.png)")->required();

    // psf-grid
    Common grid_c;
    std::string g_grid = "8x8";
    double g_fov = 2.0;
    std::vector<double> g_wls;
    int g_cell = 160, g_pupil = 128, g_pad = 4, g_width = 1280;
    std::optional<double> g_pitch;
    std::string g_out;
    auto* psfgrid = app.add_subcommand("psf-grid", "Render field-sampled PSF grids, one directory per wavelength");
    add_lens(psfgrid, grid_c);
    psfgrid->add_option("--grid", g_grid, "RxC field grid")->capture_default_str();
    psfgrid->add_option("--fov", g_fov, "Field half-angle (deg)");
    psfgrid->add_option("--wavelengths", g_wls, "Wavelengths (nm); default the prescription's");
    psfgrid->add_option("--cell", g_cell, "Cell size (px)");
    psfgrid->add_option("--pupil", g_pupil, "Pupil samples N");
    psfgrid->add_option("--pad", g_pad, "Zero-padding factor");
    psfgrid->add_option("--pitch", g_pitch, "PSF pixel pitch (um)");
    psfgrid->add_option("--image-width", g_width, "Image width the grid will degrade (px), sets the default pitch");
    psfgrid->add_option("--out", g_out, "Output directory")->required();

    // degrade
    std::string d_image, d_grid_dir, d_regions, d_blend = "hard", d_boundary = "mirror", d_out;
    int d_bits = 0;
    bool d_srgb = false;
    auto* degrade = app.add_subcommand("degrade", "Spatially-variant convolution of an RGB PNG");
    degrade->add_option("--image", d_image, "Input PNG")->required();
    degrade->add_option("--grid-dir", d_grid_dir, "psf-grid output directory")->required();
    degrade->add_option("--regions", d_regions, "RxC regions (rows x cols); default the grid dims");
    degrade->add_option("--blend", d_blend, "hard | feather:N")->capture_default_str();
    degrade->add_option("--boundary", d_boundary, "mirror | clamp | zero")->capture_default_str();
    degrade->add_option("--bit-depth", d_bits, "Output bit depth (default: input's)");
    degrade->add_flag("--srgb", d_srgb, "Decode/encode the sRGB curve instead of treating code values as linear");
    degrade->add_option("--out", d_out, "Output PNG")->required();

    // compare
    std::string c_a, c_b, c_norm = "peak";
    auto* compare = app.add_subcommand("compare", "RMSE between two exported PSFs");
    compare->add_option("--a", c_a, "First PSF")->required();
    compare->add_option("--b", c_b, "Second PSF")->required();
    compare->add_option("--norm", c_norm, "peak | sum")->capture_default_str();

    // mtf
    std::string m_image, m_before, m_rois, m_annuli, m_out, m_plot, m_csv;
    auto* mtf = app.add_subcommand("mtf", "Slanted-edge MTF50 per ROI and per radial region");
    mtf->add_option("--image", m_image, "Image to measure (the degraded one when --before is given)")->required();
    mtf->add_option("--before", m_before, "Reference image for before/after deltas");
    mtf->add_option("--rois", m_rois, "ROI JSON list of {x, y, w, h}")->required();
    mtf->add_option("--annuli", m_annuli, "r1,r2 in px, or 'default' (0.35 and 0.72 of the half-diagonal)")->required();
    mtf->add_option("--out", m_out, "Report JSON")->required();
    mtf->add_option("--csv", m_csv, "Report CSV");
    mtf->add_option("--plot", m_plot, "SFR plot (.png or .svg)");

    // pipeline
    std::string pl_config, pl_out;
    auto* pipeline = app.add_subcommand("pipeline", "Run lens -> PSF grids -> degradation -> MTF report");
    pipeline->add_option("--config", pl_config, "Pipeline JSON")->required();
    pipeline->add_option("--out", pl_out, "Override the output directory");

    // plot
    std::string pt_report, pt_out;
    std::vector<std::string> pt_psf;
    auto* plot = app.add_subcommand("plot", "Render a region bar chart or a PSF panel");
    plot->add_option("--report", pt_report, "MTF report JSON");
    plot->add_option("--psf", pt_psf, "Exported PSFs for a side-by-side panel");
    plot->add_option("--out", pt_out, "Output .png or .svg")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (threads > 0) set_thread_count(threads);

        if (*trace) {
            const LensPrescription lens = load_prescription(trace_c.lens);
            const FieldAngle field{t_fx, t_fy};
            std::vector<RayPath> paths;
            if (t_samples > 0) {
                paths = trace_bundle(lens, field, t_wl, t_samples).paths;
            } else {
                paths.push_back(find_chief_ray(lens, field, t_wl).path);
            }
            std::ofstream file;
            if (!t_out.empty()) {
                file.open(t_out);
                if (!file) throw IoError("cannot write '" + t_out + "'");
            }
            std::ostream& os = t_out.empty() ? std::cout : file;
            os << "ray_id,surface,x,y,z,L,M,N,opl,status\n";
            char line[320];
            for (const RayPath& p : paths) {
                for (const SurfaceHit& h : p.hits) {
                    std::snprintf(line, sizeof line, "%d,%d,%.12g,%.12g,%.12g,%.15g,%.15g,%.15g,%.12g,%s\n", p.ray_id,
                                  h.surface, h.point.x, h.point.y, h.point.z, h.direction.x, h.direction.y,
                                  h.direction.z, h.opl_mm, std::string(to_string(p.status)).c_str());
                    os << line;
                }
            }
        } else if (*paraxial) {
            const LensPrescription lens = load_prescription(par_c.lens);
            const ParaxialSummary s = paraxial_solve(lens, par_wl);
            if (par_json) {
                nlohmann::json j = {{"efl_mm", s.effective_focal_length_mm},
                                    {"bfd_mm", s.back_focal_distance_mm},
                                    {"marginal_angle_rad", s.image_space_marginal_angle_rad},
                                    {"exit_pupil_z_mm", s.exit_pupil_z_mm}};
                std::cout << j.dump(2) << "\n";
            } else {
                std::printf("EFL %.9f mm\nBFD %.9f mm\nmarginal angle %.9f rad\nexit pupil z %.6f mm\n",
                            s.effective_focal_length_mm, s.back_focal_distance_mm, s.image_space_marginal_angle_rad,
                            s.exit_pupil_z_mm);
            }
        } else if (*psf) {
            const LensPrescription lens = maybe_refocus(load_prescription(psf_c.lens), !psf_c.no_refocus);
            const double pitch = p_pitch ? *p_pitch : default_pixel_pitch_um(lens, p_fov, p_width);
            const PupilFunction pupil = compute_pupil(lens, {p_fx, p_fy}, p_wl, {p_pupil});
            const PSF result = fraunhofer_psf(pupil, p_pad, p_size, pitch);
            export_psf(result, p_out);
            std::printf("rms wavefront %.5f waves, pitch %.5f um\n", rms_wavefront_waves(pupil), pitch);
        } else if (*psfgrid) {
            const auto [rows, cols] = parse_dims(g_grid);
            const LensPrescription lens = maybe_refocus(load_prescription(grid_c.lens), !grid_c.no_refocus);
            std::vector<double> wls = g_wls;
            if (wls.empty()) wls.assign(lens.wavelengths_nm().begin(), lens.wavelengths_nm().end());
            GridOptions opt;
            opt.pupil_samples = g_pupil;
            opt.pad_factor = g_pad;
            opt.image_width_px = g_width;
            opt.pixel_pitch_um = g_pitch ? *g_pitch : default_pixel_pitch_um(lens, g_fov, g_width);
            for (double wl : wls) {
                const PSFGrid g = render_psf_grid(lens, rows, cols, g_fov, wl, g_cell, opt);
                const fs::path dir = fs::path(g_out) / tag(wl);
                save_psf_grid(g, dir);
                const Mosaic m = mosaic(g, 0.5);
                write_gray_png((fs::path(g_out) / ("mosaic_" + tag(wl) + ".png")).string(), m.width, m.height, m.values, 8);
                std::printf("%s: %dx%d cells, mosaic %dx%d\n", tag(wl).c_str(), rows, cols, m.width, m.height);
            }
        } else if (*degrade) {
            const PngOptions po{!d_srgb};
            const LoadedImage in = read_png(d_image, po);
            std::vector<PSFGrid> grids;
            if (!fs::is_directory(d_grid_dir)) throw IoError("'" + d_grid_dir + "' is not a directory");
            for (const auto& entry : fs::directory_iterator(d_grid_dir)) {
                if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
                    grids.push_back(load_psf_grid(entry.path()));
                }
            }
            std::sort(grids.begin(), grids.end(), [](const PSFGrid& a, const PSFGrid& b) { return a.wavelength_nm > b.wavelength_nm; });
            if (grids.size() != 3) {
                throw ValidationError("'" + d_grid_dir + "' must hold exactly three wavelength grids, found " + std::to_string(grids.size()));
            }
            auto [rows, cols] = d_regions.empty() ? std::pair{grids[0].rows, grids[0].cols} : parse_dims(d_regions);
            for (PSFGrid& g : grids) {
                if (g.rows != rows || g.cols != cols) g = resize_grid(g, rows, cols);
            }
            const DegradationPlan plan = DegradationPlan::tiling(in.image.width, in.image.height, rows, cols,
                                                                 parse_boundary(d_boundary), parse_blend(d_blend));
            const RasterImage out = degrade_image(in.image, grids, plan);
            write_png(d_out, out, d_bits ? d_bits : in.bit_depth, po);
            const auto mb = mean_brightness(in.image), ma = mean_brightness(out);
            std::printf("mean brightness R %.6f -> %.6f, G %.6f -> %.6f, B %.6f -> %.6f\n", mb[0], ma[0], mb[1], ma[1], mb[2], ma[2]);
        } else if (*compare) {
            const Normalization norm = parse_normalization(c_norm);
            std::printf("%.10g\n", rmse(load_reference_psf(c_a), load_reference_psf(c_b), norm));
        } else if (*mtf) {
            const RasterImage after = read_png(m_image).image;
            const RasterImage before = m_before.empty() ? after : read_png(m_before).image;
            const auto rois = load_rois(m_rois);
            const AnnulusPartition part = parse_annuli(m_annuli, after.width, after.height);
            const MTFReport rep = region_report(before, after, rois, part);
            write_file(m_out, rep.to_json());
            if (!m_csv.empty()) write_file(m_csv, rep.to_csv());
            if (!m_plot.empty()) {
                std::vector<LabeledCurve> curves;
                const auto luma = after.luminance();
                for (std::size_t i = 0; i < rois.size(); ++i) {
                    try {
                        curves.push_back({"ROI " + std::to_string(i), esfr(luma, after.width, after.height, rois[i])});
                    } catch (const Error&) {
                    }
                }
                plot_sfr(m_plot, curves);
            }
            for (const ZoneSummary& z : rep.zones) {
                std::printf("%-6s n=%d before %.4f after %.4f delta %+.4f cy/px\n", to_string(z.zone).c_str(), z.count,
                            z.mean_before, z.mean_after, z.delta());
            }
            for (std::size_t i = 0; i < rep.rois.size(); ++i) {
                if (!rep.rois[i].error.empty()) std::fprintf(stderr, "roi %zu: %s\n", i, rep.rois[i].error.c_str());
            }
        } else if (*pipeline) {
            PipelineConfig cfg = load_pipeline_config(pl_config);
            if (!pl_out.empty()) cfg.output_dir = pl_out;
            const Manifest m = run_pipeline(cfg);
            std::printf("%zu artifacts, manifest %s\n", m.entries.size(), (cfg.output_dir / "manifest.json").string().c_str());
        } else if (*plot) {
            if (!pt_report.empty() == !pt_psf.empty()) throw ValidationError("plot needs exactly one of --report or --psf");
            if (!pt_report.empty()) {
                plot_region_bars(pt_out, load_report(pt_report));
            } else {
                std::vector<PSF> psfs;
                for (const auto& p : pt_psf) psfs.push_back(load_reference_psf(p));
                plot_psf_panel(pt_out, psfs);
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.category()) {
            case Error::Category::config: return kExitConfig;
            case Error::Category::numeric: return kExitNumeric;
            case Error::Category::io: return kExitIo;
        }
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
    return 0;
}
