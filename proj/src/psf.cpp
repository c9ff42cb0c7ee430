#include "lensdeg/psf.hpp"

#include "lensdeg/error.hpp"
#include "lensdeg/fft.hpp"
#include "lensdeg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lensdeg {

std::size_t PupilFunction::support() const {
    return static_cast<std::size_t>(std::ranges::count_if(amplitude, [](double a) { return a > 0.0; }));
}

double PSF::sum() const { return std::accumulate(intensity.begin(), intensity.end(), 0.0); }

PupilFunction opd_map(const Bundle& bundle, const RayPath& chief, double exit_pupil_z_mm,
                      double focal_distance_mm) {
    if (!chief.reached_image()) {
        throw NumericError(std::string("chief ray ") + std::string(to_string(chief.status)) +
                           " at surface " + std::to_string(chief.status_surface));
    }
    const int n = bundle.samples;
    PupilFunction pupil;
    pupil.samples = n;
    pupil.amplitude.assign(static_cast<std::size_t>(n) * n, 0.0);
    pupil.opd_mm.assign(static_cast<std::size_t>(n) * n, 0.0);
    pupil.sample_pitch_mm = bundle.pitch_mm;
    pupil.focal_distance_mm = focal_distance_mm;
    pupil.wavelength_nm = bundle.wavelength_nm;
    pupil.field = bundle.field;
    pupil.chief_row = n / 2;
    pupil.chief_col = n / 2;

    const Vec3 center = chief.last().point;
    const Vec3 exit_pupil{0.0, 0.0, exit_pupil_z_mm};
    const double radius = norm(center - exit_pupil);
    const double n_image = chief.last().n_after;

    // OPL from the launch wavefront back to the reference sphere along the final ray segment.
    auto opl_at_sphere = [&](const RayPath& path) {
        const Vec3 w = path.last().point - center;
        const Vec3& d = path.last().direction;
        const double wd = dot(w, d);
        const double s = wd + std::sqrt(std::max(0.0, wd * wd - dot(w, w) + radius * radius));
        return path.last().opl_mm - n_image * s;
    };
    const double chief_opl = opl_at_sphere(chief);

    for (std::size_t i = 0; i < bundle.paths.size(); ++i) {
        const auto& path = bundle.paths[i];
        if (!path.reached_image()) continue;
        pupil.amplitude[i] = 1.0;
        pupil.opd_mm[i] = opl_at_sphere(path) - chief_opl;
    }
    return pupil;
}

PupilFunction compute_pupil(const LensPrescription& p, FieldAngle field, double wavelength_nm,
                            const PupilOptions& options) {
    if (options.samples < 16) throw ValidationError("pupil sampling needs N >= 16");
    const auto chief = find_chief_ray(p, field, wavelength_nm);
    BundleOptions bo;
    bo.anchor_mm = std::make_pair(chief.x_mm, chief.y_mm);
    const auto bundle = trace_bundle(p, field, wavelength_nm, options.samples, bo);
    const auto para = paraxial_solve(p, wavelength_nm);
    return opd_map(bundle, chief.path, para.exit_pupil_z_mm, para.effective_focal_length_mm);
}

double rms_wavefront_waves(const PupilFunction& pupil) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pupil.amplitude.size(); ++i) {
        if (pupil.amplitude[i] == 0.0) continue;
        sum += pupil.opd_mm[i];
        sum2 += pupil.opd_mm[i] * pupil.opd_mm[i];
        ++n;
    }
    if (n == 0) throw NumericError("empty pupil support");
    const double mean = sum / n;
    return std::sqrt(std::max(0.0, sum2 / n - mean * mean)) / (pupil.wavelength_nm * 1e-6);
}

FocusResult best_focus(const LensPrescription& p, std::span<const double> wavelengths_nm,
                       int pupil_samples) {
    if (wavelengths_nm.empty()) throw ValidationError("best_focus needs at least one wavelength");
    auto merit = [&](double shift) {
        const auto shifted = p.with_image_shift(shift);
        double acc = 0.0;
        for (double wl : wavelengths_nm) {
            const double w = rms_wavefront_waves(compute_pupil(shifted, {}, wl, {pupil_samples}));
            acc += w * w;
        }
        return std::sqrt(acc / wavelengths_nm.size());
    };

    // Paraxial focus at the reference wavelength seeds a ±1 mm bracket.
    const auto para = paraxial_solve(p);
    const auto z = p.vertex_z();
    std::size_t last_powered = 1;
    for (std::size_t i = 1; i < p.image_index(); ++i) {
        if (p.surface(i).curvature() != 0.0 &&
            p.index_after(i - 1, p.reference_wavelength_nm()) != p.index_after(i, p.reference_wavelength_nm()))
            last_powered = i;
    }
    const double paraxial_shift = z[last_powered] + para.back_focal_distance_mm - z[p.image_index()];
    const double min_shift = -p.surface(p.image_index() - 1).thickness_mm + 1e-3;
    double lo = std::max(paraxial_shift - 1.0, min_shift), hi = paraxial_shift + 1.0;

    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    double fa = merit(a), fb = merit(b);
    while (hi - lo > 1e-5) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = merit(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = merit(b);
        }
    }
    const double shift = 0.5 * (lo + hi);
    return {shift, merit(shift), p.with_image_shift(shift)};
}

double native_pitch_um(const PupilFunction& pupil, int pad_factor) {
    const double m = static_cast<double>(pad_factor) * pupil.samples;
    return pupil.wavelength_nm * 1e-6 * pupil.focal_distance_mm / (m * pupil.sample_pitch_mm) * 1e3;
}

namespace {

struct Tap {
    int index;
    double weight;
};

// Maps output pixel i (center at sign·(i − out/2)·p_out) onto FFT pixels k (center at
// (k − m/2)·p_in). Box integration when downsampling, linear interpolation otherwise.
std::vector<std::vector<Tap>> resample_taps(int out, double p_out, double sign, int m, double p_in) {
    std::vector<std::vector<Tap>> taps(out);
    for (int i = 0; i < out; ++i) {
        const double pos = sign * (i - out / 2) * p_out;
        if (p_out >= p_in) {
            const double lo = pos - 0.5 * p_out, hi = pos + 0.5 * p_out;
            const int k0 = std::max(0, static_cast<int>(std::floor(lo / p_in + m / 2 - 0.5)));
            const int k1 = std::min(m - 1, static_cast<int>(std::ceil(hi / p_in + m / 2 + 0.5)));
            for (int k = k0; k <= k1; ++k) {
                const double a = (k - m / 2 - 0.5) * p_in, b = (k - m / 2 + 0.5) * p_in;
                const double overlap = std::min(hi, b) - std::max(lo, a);
                if (overlap > 0.0) taps[i].push_back({k, overlap / p_in});
            }
        } else {
            const double u = pos / p_in + m / 2;
            const int k = static_cast<int>(std::floor(u));
            const double f = u - k;
            if (k >= 0 && k < m) taps[i].push_back({k, 1.0 - f});
            if (k + 1 >= 0 && k + 1 < m && f > 0.0) taps[i].push_back({k + 1, f});
        }
    }
    return taps;
}

}  // namespace

PSF fraunhofer_psf(const PupilFunction& pupil, int pad_factor, int out_size,
                   std::optional<double> output_pitch_um) {
    if (pad_factor < 2) throw ValidationError("pad_factor must be >= 2");
    if (out_size < 1) throw ValidationError("PSF size must be positive");
    if (pupil.support() == 0) throw NumericError("empty pupil support");

    const int n = pupil.samples;
    const int m = pad_factor * n;
    const int offset = (m - n) / 2;
    const double wavelength_mm = pupil.wavelength_nm * 1e-6;
    std::vector<fft::cplx> field(static_cast<std::size_t>(m) * m, 0.0);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double a = pupil.amp(r, c);
            if (a == 0.0) continue;
            const double phase = -2.0 * kPi * pupil.opd(r, c) / wavelength_mm;
            field[static_cast<std::size_t>(r + offset) * m + c + offset] = std::polar(a, phase);
        }
    }
    fft::dft2d(field, m, m, +1);
    std::vector<double> power(field.size());
    std::ranges::transform(field, power.begin(), [](const fft::cplx& z) { return std::norm(z); });
    fft::fftshift(power, m, m);

    const double p_in = native_pitch_um(pupil, pad_factor);
    const double p_out = output_pitch_um.value_or(p_in);
    if (!(p_out > 0.0)) throw ValidationError("PSF pixel pitch must be positive");
    const auto taps_x = resample_taps(out_size, p_out, +1.0, m, p_in);
    const auto taps_y = resample_taps(out_size, p_out, -1.0, m, p_in);

    std::vector<double> rows_resampled(static_cast<std::size_t>(out_size) * m, 0.0);
    for (int r = 0; r < out_size; ++r) {
        double* dst = &rows_resampled[static_cast<std::size_t>(r) * m];
        for (const auto& t : taps_y[r]) {
            const double* src = &power[static_cast<std::size_t>(t.index) * m];
            for (int k = 0; k < m; ++k) dst[k] += t.weight * src[k];
        }
    }
    PSF psf;
    psf.size = out_size;
    psf.pixel_pitch_um = p_out;
    psf.wavelength_nm = pupil.wavelength_nm;
    psf.field = pupil.field;
    psf.intensity.assign(static_cast<std::size_t>(out_size) * out_size, 0.0);
    for (int r = 0; r < out_size; ++r) {
        const double* src = &rows_resampled[static_cast<std::size_t>(r) * m];
        for (int c = 0; c < out_size; ++c) {
            double v = 0.0;
            for (const auto& t : taps_x[c]) v += t.weight * src[t.index];
            psf.intensity[static_cast<std::size_t>(r) * out_size + c] = v;
        }
    }
    const double total = psf.sum();
    if (!(total > 0.0)) throw NumericError("PSF has no energy inside the output window");
    for (double& v : psf.intensity) v /= total;
    return psf;
}

double default_pixel_pitch_um(const LensPrescription& p, double fov_deg, int image_width_px) {
    const double efl = paraxial_solve(p).effective_focal_length_mm;
    return 2.0 * std::abs(efl) * std::tan(deg_to_rad(fov_deg)) / image_width_px * 1e3;
}

FieldAngle grid_field(int rows, int cols, double fov_deg, int r, int c) {
    const double pitch = 2.0 * fov_deg / std::max(rows, cols);
    return {pitch * (c + 0.5 - cols / 2.0), pitch * (rows / 2.0 - r - 0.5)};
}

PSFGrid render_psf_grid(const LensPrescription& p, int rows, int cols, double fov_deg,
                        double wavelength_nm, int cell_size_px, const GridOptions& options) {
    if (rows < 1 || cols < 1) throw ValidationError("grid needs at least one row and column");
    if (!(fov_deg > 0.0)) throw ValidationError("field of view must be positive");
    if (cell_size_px < 1) throw ValidationError("cell size must be positive");
    const double pitch =
        options.pixel_pitch_um.value_or(default_pixel_pitch_um(p, fov_deg, options.image_width_px));

    PSFGrid g;
    g.rows = rows;
    g.cols = cols;
    g.cell_size_px = cell_size_px;
    g.wavelength_nm = wavelength_nm;
    g.fov_deg = fov_deg;
    g.cells.resize(static_cast<std::size_t>(rows) * cols);
    parallel_for(g.cells.size(), [&](std::size_t i) {
        const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
        try {
            const auto pupil = compute_pupil(p, grid_field(rows, cols, fov_deg, r, c), wavelength_nm,
                                             {options.pupil_samples});
            g.cells[i] = fraunhofer_psf(pupil, options.pad_factor, cell_size_px, pitch);
        } catch (const NumericError& e) {
            throw NumericError("PSF grid cell (" + std::to_string(r) + ", " + std::to_string(c) +
                               "): " + e.what());
        }
    });
    return g;
}

namespace {

int nearest_source_index(double theta, double pitch, int n) {
    const double u = theta / pitch + n / 2.0 - 0.5;
    const double center = (n - 1) / 2.0;
    int k = static_cast<int>(std::floor(u + 0.5));
    if (std::abs(u - std::floor(u) - 0.5) < 1e-9) {
        // Tie: step toward the axis.
        k = u < center ? static_cast<int>(std::ceil(u)) : static_cast<int>(std::floor(u));
    }
    return std::clamp(k, 0, n - 1);
}

}  // namespace

PSFGrid resize_grid(const PSFGrid& g, int rows, int cols) {
    if (rows < 1 || cols < 1) throw ValidationError("grid needs at least one row and column");
    if (rows > g.rows || cols > g.cols) {
        throw ValidationError("resize_grid only shrinks: requested " + std::to_string(rows) + "x" +
                              std::to_string(cols) + " from " + std::to_string(g.rows) + "x" +
                              std::to_string(g.cols));
    }
    const double src_pitch = 2.0 * g.fov_deg / std::max(g.rows, g.cols);
    const double dst_pitch = 2.0 * g.fov_deg / std::max(rows, cols);
    PSFGrid out = g;
    out.rows = rows;
    out.cols = cols;
    out.cells.clear();
    out.cells.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        // Row angles run from +θy at the top, so mirror the index for the lookup.
        const double theta_y = dst_pitch * (rows / 2.0 - r - 0.5);
        const int sr = g.rows - 1 - nearest_source_index(theta_y, src_pitch, g.rows);
        for (int c = 0; c < cols; ++c) {
            const double theta_x = dst_pitch * (c + 0.5 - cols / 2.0);
            out.cells.push_back(g.at(sr, nearest_source_index(theta_x, src_pitch, g.cols)));
        }
    }
    return out;
}

Mosaic mosaic(const PSFGrid& g, double gamma) {
    Mosaic m;
    const int cell = g.cell_size_px;
    m.width = g.cols * cell;
    m.height = g.rows * cell;
    m.values.assign(static_cast<std::size_t>(m.width) * m.height, 0.0);
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            const PSF& psf = g.at(r, c);
            const double peak = *std::ranges::max_element(psf.intensity);
            for (int y = 0; y < cell; ++y) {
                for (int x = 0; x < cell; ++x) {
                    double v = peak > 0.0 ? psf.at(y, x) / peak : 0.0;
                    if (gamma != 1.0) v = std::pow(v, gamma);
                    m.values[static_cast<std::size_t>(r * cell + y) * m.width + c * cell + x] = v;
                }
            }
        }
    }
    return m;
}

PsfMoments psf_moments(const PSF& psf) {
    PsfMoments mo;
    double total = 0.0, sx = 0.0, sy = 0.0;
    const int half = psf.size / 2;
    for (int r = 0; r < psf.size; ++r) {
        for (int c = 0; c < psf.size; ++c) {
            const double v = psf.at(r, c);
            total += v;
            sx += v * (c - half);
            sy += v * (half - r);
        }
    }
    if (total <= 0.0) return mo;
    mo.centroid_x_px = sx / total;
    mo.centroid_y_px = sy / total;
    for (int r = 0; r < psf.size; ++r) {
        for (int c = 0; c < psf.size; ++c) {
            const double v = psf.at(r, c) / total;
            const double dx = c - half - mo.centroid_x_px, dy = half - r - mo.centroid_y_px;
            mo.var_x += v * dx * dx;
            mo.var_y += v * dy * dy;
            mo.cov_xy += v * dx * dy;
        }
    }
    return mo;
}

double ring_to_peak_ratio(const PSF& psf, double core_radius_px) {
    const auto peak_it = std::ranges::max_element(psf.intensity);
    const auto peak_idx = static_cast<int>(peak_it - psf.intensity.begin());
    const int pr = peak_idx / psf.size, pc = peak_idx % psf.size;
    double inside = 0.0, outside = 0.0;
    for (int r = 0; r < psf.size; ++r) {
        for (int c = 0; c < psf.size; ++c) {
            const double d = std::hypot(r - pr, c - pc);
            (d <= core_radius_px ? inside : outside) += psf.at(r, c);
        }
    }
    return inside > 0.0 ? outside / inside : std::numeric_limits<double>::infinity();
}

int count_lobes(const PSF& psf, double fraction) {
    const double peak = *std::ranges::max_element(psf.intensity);
    int lobes = 0;
    for (int r = 0; r < psf.size; ++r) {
        for (int c = 0; c < psf.size; ++c) {
            const double v = psf.at(r, c);
            if (v <= fraction * peak) continue;
            bool is_max = true;
            for (int dr = -1; dr <= 1 && is_max; ++dr) {
                for (int dc = -1; dc <= 1 && is_max; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= psf.size || cc >= psf.size) continue;
                    const double w = psf.at(rr, cc);
                    // Earlier neighbours must be strictly lower so plateaus count once.
                    const bool earlier = dr < 0 || (dr == 0 && dc < 0);
                    if (earlier ? w >= v : w > v) is_max = false;
                }
            }
            if (is_max) ++lobes;
        }
    }
    return lobes;
}

std::pair<double, double> energy_ellipse_axes(const PSF& psf, double fraction) {
    const auto mo = psf_moments(psf);
    const double det = mo.var_x * mo.var_y - mo.cov_xy * mo.cov_xy;
    if (!(det > 0.0)) return {0.0, 0.0};
    const int half = psf.size / 2;
    // Mahalanobis radius of every pixel, then the radius enclosing `fraction` of the energy.
    std::vector<std::pair<double, double>> d2;
    d2.reserve(psf.intensity.size());
    for (int r = 0; r < psf.size; ++r) {
        for (int c = 0; c < psf.size; ++c) {
            const double dx = c - half - mo.centroid_x_px, dy = half - r - mo.centroid_y_px;
            const double m2 = (mo.var_y * dx * dx - 2.0 * mo.cov_xy * dx * dy + mo.var_x * dy * dy) / det;
            d2.emplace_back(m2, psf.at(r, c));
        }
    }
    std::ranges::sort(d2);
    const double total = psf.sum();
    double acc = 0.0, scale2 = d2.back().first;
    for (const auto& [m2, v] : d2) {
        acc += v;
        if (acc >= fraction * total) {
            scale2 = m2;
            break;
        }
    }
    const double s = std::sqrt(scale2);
    return {s * std::sqrt(mo.var_x), s * std::sqrt(mo.var_y)};
}

}  // namespace lensdeg
