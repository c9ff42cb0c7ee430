#include "lensdeg/degrade.hpp"
#include "lensdeg/error.hpp"
#include "lensdeg/metrology.hpp"
#include "lensdeg/pipeline.hpp"
#include "lensdeg/psf_io.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace lensdeg;

namespace {

py::array_t<double> psf_array(const PSF& p) {
    py::array_t<double> a({p.size, p.size});
    std::copy(p.intensity.begin(), p.intensity.end(), a.mutable_data());
    return a;
}

PSF psf_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a, double pitch_um,
                   double wavelength_nm) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw ValidationError("PSF array must be square 2-D");
    PSF p;
    p.size = static_cast<int>(a.shape(0));
    p.intensity.assign(a.data(), a.data() + a.size());
    p.pixel_pitch_um = pitch_um;
    p.wavelength_nm = wavelength_nm;
    return p;
}

RasterImage image_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ValidationError("image must be an H x W x 3 array");
    RasterImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
}

py::array_t<float> image_array(const RasterImage& img) {
    py::array_t<float> a({img.height, img.width, 3});
    std::copy(img.data.begin(), img.data.end(), a.mutable_data());
    return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Lens ray tracing, Fraunhofer PSFs, spatially-variant degradation and slanted-edge MTF";

    // Errors map onto Python built-ins by category.
    static py::exception<Error> base(m, "LensdegError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            switch (e.category()) {
                case Error::Category::config: PyErr_SetString(PyExc_ValueError, e.what()); break;
                case Error::Category::numeric: PyErr_SetString(PyExc_ArithmeticError, e.what()); break;
                case Error::Category::io: PyErr_SetString(PyExc_OSError, e.what()); break;
            }
        }
    });

    py::class_<LensPrescription>(m, "LensPrescription")
        .def_property_readonly("wavelengths_nm", [](const LensPrescription& p) {
            return std::vector<double>(p.wavelengths_nm().begin(), p.wavelengths_nm().end());
        })
        .def_property_readonly("field_angles_deg", [](const LensPrescription& p) {
            return std::vector<double>(p.field_angles_deg().begin(), p.field_angles_deg().end());
        })
        .def_property_readonly("stop_index", &LensPrescription::stop_index)
        .def_property_readonly("vertex_z", [](const LensPrescription& p) {
            return std::vector<double>(p.vertex_z().begin(), p.vertex_z().end());
        })
        .def("__len__", &LensPrescription::size)
        .def("serialize", &serialize_prescription)
        .def("with_image_shift", &LensPrescription::with_image_shift, py::arg("shift_mm"));

    m.def("parse_prescription", [](const std::string& text) { return parse_prescription(text); }, py::arg("text"));
    m.def("load_prescription", &load_prescription, py::arg("path"));
    m.def("refractive_index", [](const std::string& glass, double nm) {
        const auto mat = GlassCatalog().find(glass);
        if (!mat) throw ValidationError("unknown glass '" + glass + "'");
        return refractive_index(*mat, nm);
    }, py::arg("glass"), py::arg("wavelength_nm"));

    m.def("paraxial_solve", [](const LensPrescription& p, std::optional<double> nm) {
        const ParaxialSummary s = paraxial_solve(p, nm);
        py::dict d;
        d["efl_mm"] = s.effective_focal_length_mm;
        d["bfd_mm"] = s.back_focal_distance_mm;
        d["marginal_angle_rad"] = s.image_space_marginal_angle_rad;
        d["exit_pupil_z_mm"] = s.exit_pupil_z_mm;
        return d;
    }, py::arg("prescription"), py::arg("wavelength_nm") = py::none());

    m.def("trace_chief_ray", [](const LensPrescription& p, double theta_x, double theta_y, double nm) {
        const ChiefRay c = find_chief_ray(p, {theta_x, theta_y}, nm);
        py::array_t<double> pts({static_cast<py::ssize_t>(c.path.hits.size()), py::ssize_t{3}});
        auto v = pts.mutable_unchecked<2>();
        for (std::size_t i = 0; i < c.path.hits.size(); ++i) {
            v(i, 0) = c.path.hits[i].point.x;
            v(i, 1) = c.path.hits[i].point.y;
            v(i, 2) = c.path.hits[i].point.z;
        }
        return py::make_tuple(pts, c.path.last().opl_mm);
    }, py::arg("prescription"), py::arg("theta_x_deg"), py::arg("theta_y_deg"), py::arg("wavelength_nm"),
       "Chief-ray surface intersections (K x 3, mm) and its optical path length to the image.");

    m.def("best_focus", [](const LensPrescription& p) {
        const FocusResult f = best_focus(p, p.wavelengths_nm());
        return py::make_tuple(f.prescription, f.image_shift_mm, f.rms_waves);
    }, py::arg("prescription"));

    m.def("compute_psf", [](const LensPrescription& p, double theta_x, double theta_y, double nm, int size,
                            int pupil_samples, int pad, std::optional<double> pitch_um) {
        const PupilFunction pupil = compute_pupil(p, {theta_x, theta_y}, nm, {pupil_samples});
        const PSF psf = fraunhofer_psf(pupil, pad, size, pitch_um);
        return py::make_tuple(psf_array(psf), psf.pixel_pitch_um);
    }, py::arg("prescription"), py::arg("theta_x_deg"), py::arg("theta_y_deg"), py::arg("wavelength_nm"),
       py::arg("size") = 160, py::arg("pupil_samples") = 128, py::arg("pad_factor") = 4,
       py::arg("pixel_pitch_um") = py::none(), "Unit-sum PSF array and its pixel pitch (um).");

    m.def("render_psf_grid", [](const LensPrescription& p, int rows, int cols, double fov, double nm, int cell,
                                int pupil_samples, std::optional<double> pitch_um) {
        GridOptions o;
        o.pupil_samples = pupil_samples;
        o.pixel_pitch_um = pitch_um;
        const PSFGrid g = render_psf_grid(p, rows, cols, fov, nm, cell, o);
        py::array_t<double> a({rows, cols, cell, cell});
        double* out = a.mutable_data();
        for (const PSF& c : g.cells) out = std::copy(c.intensity.begin(), c.intensity.end(), out);
        return a;
    }, py::arg("prescription"), py::arg("rows"), py::arg("cols"), py::arg("fov_deg"), py::arg("wavelength_nm"),
       py::arg("cell_px") = 160, py::arg("pupil_samples") = 128, py::arg("pixel_pitch_um") = py::none(),
       "rows x cols x cell x cell array of unit-sum PSFs.");

    m.def("degrade_image", [](py::array_t<float, py::array::c_style | py::array::forcecast> image,
                              std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>> grids,
                              std::vector<double> wavelengths_nm, const std::string& boundary, const std::string& blend) {
        const RasterImage img = image_from_array(image);
        if (grids.size() != 3 || wavelengths_nm.size() != 3) throw ValidationError("need three grids and three wavelengths");
        std::vector<PSFGrid> gs;
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const auto& a = grids[ch];
            if (a.ndim() != 4 || a.shape(2) != a.shape(3)) throw ValidationError("grid must be rows x cols x cell x cell");
            PSFGrid g;
            g.rows = static_cast<int>(a.shape(0));
            g.cols = static_cast<int>(a.shape(1));
            g.cell_size_px = static_cast<int>(a.shape(2));
            g.wavelength_nm = wavelengths_nm[ch];
            const std::size_t n = static_cast<std::size_t>(g.cell_size_px) * g.cell_size_px;
            for (int i = 0; i < g.rows * g.cols; ++i) {
                PSF p;
                p.size = g.cell_size_px;
                p.wavelength_nm = g.wavelength_nm;
                p.intensity.assign(a.data() + i * n, a.data() + (i + 1) * n);
                g.cells.push_back(std::move(p));
            }
            gs.push_back(std::move(g));
        }
        const auto plan = DegradationPlan::tiling(img.width, img.height, gs[0].rows, gs[0].cols,
                                                  parse_boundary(boundary), parse_blend(blend));
        return image_array(degrade_image(img, gs, plan));
    }, py::arg("image"), py::arg("grids"), py::arg("wavelengths_nm"), py::arg("boundary") = "mirror",
       py::arg("blend") = "hard", "Image H x W x 3 in [0, 1]; grids ordered R, G, B.");

    m.def("mean_brightness", [](py::array_t<float, py::array::c_style | py::array::forcecast> image) {
        const auto b = mean_brightness(image_from_array(image));
        return py::make_tuple(b[0], b[1], b[2]);
    }, py::arg("image"));

    m.def("rmse", [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
                     py::array_t<double, py::array::c_style | py::array::forcecast> b, const std::string& norm) {
        return rmse(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()),
                    parse_normalization(norm));
    }, py::arg("a"), py::arg("b"), py::arg("norm") = "peak");

    m.def("export_psf", [](py::array_t<double, py::array::c_style | py::array::forcecast> a, double pitch_um,
                           double nm, const std::filesystem::path& stem) {
        export_psf(psf_from_array(a, pitch_um, nm), stem);
    }, py::arg("psf"), py::arg("pixel_pitch_um"), py::arg("wavelength_nm"), py::arg("stem"));
    m.def("load_reference_psf", [](const std::filesystem::path& path) {
        const PSF p = load_reference_psf(path);
        return py::make_tuple(psf_array(p), p.pixel_pitch_um, p.wavelength_nm);
    }, py::arg("path"));

    m.def("make_test_chart", [](int width, int height, double blur_sigma_px) {
        ChartOptions o;
        o.blur_sigma_px = blur_sigma_px;
        const auto edges = standard_chart_layout(width, height);
        TestChart c = make_test_chart(width, height, edges, o);
        py::list rois;
        for (const EdgeROI& r : c.rois) rois.append(py::make_tuple(r.x, r.y, r.width, r.height));
        return py::make_tuple(image_array(c.image), rois);
    }, py::arg("width") = 1280, py::arg("height") = 960, py::arg("blur_sigma_px") = 0.0,
       "Standard 5 x 3 slanted-edge chart and its ROIs (x, y, w, h).");

    m.def("mtf50", [](py::array_t<float, py::array::c_style | py::array::forcecast> plane, std::tuple<int, int, int, int> roi) {
        if (plane.ndim() != 2) throw ValidationError("plane must be 2-D");
        const auto [x, y, w, h] = roi;
        const SFRCurve c = esfr(std::span<const float>(plane.data(), plane.size()), static_cast<int>(plane.shape(1)),
                                static_cast<int>(plane.shape(0)), EdgeROI{x, y, w, h});
        return mtf50(c);
    }, py::arg("plane"), py::arg("roi"), "Slanted-edge MTF50 (cy/px) of one ROI (x, y, w, h).");

    m.def("run_pipeline", [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        PipelineConfig cfg = load_pipeline_config(config);
        if (out) cfg.output_dir = *out;
        return run_pipeline(cfg).to_json();
    }, py::arg("config"), py::arg("output_dir") = py::none(), "Runs the pipeline; returns the manifest JSON.");
}
