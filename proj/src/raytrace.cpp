#include "lensdeg/raytrace.hpp"

#include "lensdeg/error.hpp"
#include "lensdeg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lensdeg {

Vec3 FieldAngle::direction() const {
    return normalized({std::tan(deg_to_rad(theta_x_deg)), std::tan(deg_to_rad(theta_y_deg)), 1.0});
}

std::string_view to_string(TraceStatus status) {
    switch (status) {
        case TraceStatus::reached_image: return "reached_image";
        case TraceStatus::vignetted: return "vignetted";
        case TraceStatus::total_internal_reflection: return "total_internal_reflection";
        case TraceStatus::missed: return "missed";
    }
    return "unknown";
}

Intersection intersect(const Ray& ray, const Surface& surface, double vertex_z, bool clip_aperture) {
    Intersection out;
    const Vec3 q = ray.position - Vec3{0.0, 0.0, vertex_z};
    const Vec3& d = ray.direction;
    const double c = surface.curvature();

    // c|q + t d|^2 - 2 (q_z + t d_z) = 0  →  c t² + 2 b t + k = 0
    const double b = c * dot(q, d) - d.z;
    const double k = c * dot(q, q) - 2.0 * q.z;
    const double disc = b * b - c * k;
    if (disc < 0.0) return out;
    const double denom = -b - std::copysign(std::sqrt(disc), b);
    if (denom == 0.0) return out;
    const double t = k / denom;
    if (!(t >= 0.0) || !std::isfinite(t)) return out;

    out.distance = t;
    out.point = ray.position + d * t;
    const Vec3 local = out.point - Vec3{0.0, 0.0, vertex_z};
    Vec3 n = normalized(Vec3{-c * local.x, -c * local.y, 1.0 - c * local.z});
    if (dot(n, d) > 0.0) n = -n;
    out.normal = n;

    const double h2 = out.point.x * out.point.x + out.point.y * out.point.y;
    out.outcome = (clip_aperture && h2 > surface.semi_diameter_mm * surface.semi_diameter_mm)
                      ? IntersectOutcome::vignetted
                      : IntersectOutcome::hit;
    return out;
}

std::optional<Vec3> refract(const Vec3& direction, const Vec3& normal, double n1, double n2) {
    const double mu = n1 / n2;
    const double cos_i = -dot(normal, direction);
    const double sin2_t = mu * mu * std::max(0.0, 1.0 - cos_i * cos_i);
    if (sin2_t > 1.0) return std::nullopt;
    const double cos_t = std::sqrt(1.0 - sin2_t);
    return normalized(direction * mu + normal * (mu * cos_i - cos_t));
}

namespace {

double angle_to_normal(const Vec3& d, const Vec3& n) {
    return std::atan2(norm(cross(d, n)), std::abs(dot(d, n)));
}

}  // namespace

Ray launch_ray(const LensPrescription& p, FieldAngle field, double wavelength_nm, double x, double y) {
    const Vec3 d = field.direction();
    const Vec3 origin{x, y, 0.0};
    const double n0 = p.index_after(0, wavelength_nm);
    return Ray{origin, d, wavelength_nm, n0 * dot(origin, d), true};
}

RayPath trace_ray(const LensPrescription& p, const Ray& ray, const TraceOptions& options) {
    RayPath path;
    const auto last = std::min(options.last_surface.value_or(p.image_index()), p.image_index());
    path.hits.reserve(last + 1);

    Ray r = ray;
    double n_before = p.index_after(0, r.wavelength_nm);
    path.hits.push_back({0, r.position, {0.0, 0.0, -1.0}, r.direction, 0.0, 0.0, n_before, n_before,
                         r.opl_mm});

    const auto z = p.vertex_z();
    for (std::size_t i = 1; i <= last; ++i) {
        const Surface& s = p.surface(i);
        const Intersection hit = intersect(r, s, z[i], options.clip_apertures);
        if (hit.outcome == IntersectOutcome::missed) {
            path.status = TraceStatus::missed;
            path.status_surface = static_cast<int>(i);
            return path;
        }
        r.opl_mm += n_before * hit.distance;
        r.position = hit.point;
        if (hit.outcome == IntersectOutcome::vignetted) {
            path.hits.push_back({static_cast<int>(i), hit.point, hit.normal, r.direction, 0.0, 0.0,
                                 n_before, n_before, r.opl_mm});
            path.status = TraceStatus::vignetted;
            path.status_surface = static_cast<int>(i);
            return path;
        }

        const double n_after = p.index_after(i, r.wavelength_nm);
        const double theta_i = angle_to_normal(r.direction, hit.normal);
        Vec3 new_dir = r.direction;
        if (n_after != n_before) {
            auto refracted = refract(r.direction, hit.normal, n_before, n_after);
            if (!refracted) {
                path.hits.push_back({static_cast<int>(i), hit.point, hit.normal, r.direction, theta_i,
                                     0.0, n_before, n_after, r.opl_mm});
                path.status = TraceStatus::total_internal_reflection;
                path.status_surface = static_cast<int>(i);
                return path;
            }
            new_dir = *refracted;
        }
        path.hits.push_back({static_cast<int>(i), hit.point, hit.normal, new_dir, theta_i,
                             angle_to_normal(new_dir, hit.normal), n_before, n_after, r.opl_mm});
        r.direction = new_dir;
        n_before = n_after;
    }
    path.status = last == p.image_index() ? TraceStatus::reached_image : TraceStatus::missed;
    path.status_surface = static_cast<int>(last);
    return path;
}

std::size_t Bundle::survivors() const {
    return static_cast<std::size_t>(std::ranges::count_if(paths, &RayPath::reached_image));
}

namespace {

double entrance_semi_aperture(const LensPrescription& p) {
    for (std::size_t i = 1; i < p.image_index(); ++i) {
        if (p.surface(i).kind == SurfaceKind::refracting) return p.surface(i).semi_diameter_mm;
    }
    return p.surface(1).semi_diameter_mm;
}

}  // namespace

Bundle trace_bundle(const LensPrescription& p, FieldAngle field, double wavelength_nm, int samples,
                    const BundleOptions& options) {
    if (samples < 1) throw ValidationError("bundle needs at least one sample per side");
    Bundle b;
    b.field = field;
    b.wavelength_nm = wavelength_nm;
    b.samples = samples;
    const double a = entrance_semi_aperture(p);
    b.pitch_mm = 2.0 * a / samples;
    if (options.anchor_mm) {
        const int mid = samples / 2;
        b.x0_mm = options.anchor_mm->first - mid * b.pitch_mm;
        b.y0_mm = options.anchor_mm->second - mid * b.pitch_mm;
    } else {
        b.x0_mm = -a + 0.5 * b.pitch_mm;
        b.y0_mm = -a + 0.5 * b.pitch_mm;
    }

    const auto n = static_cast<std::size_t>(samples) * samples;
    b.paths.resize(n);
    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t row) {
        for (int col = 0; col < samples; ++col) {
            const auto id = row * samples + col;
            // Anchored grids use the anchor itself for the middle sample so it traces bit-identically.
            double x = b.x_of(col);
            double y = b.y_of(static_cast<int>(row));
            if (options.anchor_mm && col == samples / 2) x = options.anchor_mm->first;
            if (options.anchor_mm && static_cast<int>(row) == samples / 2) y = options.anchor_mm->second;
            auto path = trace_ray(p, launch_ray(p, field, wavelength_nm, x, y), options.trace);
            path.ray_id = static_cast<int>(id);
            b.paths[id] = std::move(path);
        }
    });
    if (b.survivors() == 0) {
        throw NumericError("degenerate bundle: every ray vignetted at field (" +
                           std::to_string(field.theta_x_deg) + ", " + std::to_string(field.theta_y_deg) +
                           ") deg, " + std::to_string(wavelength_nm) + " nm");
    }
    return b;
}

ChiefRay find_chief_ray(const LensPrescription& p, FieldAngle field, double wavelength_nm,
                        double tolerance_mm) {
    const auto stop = p.stop_index();
    TraceOptions to_stop{false, stop};
    auto stop_hit = [&](double x, double y, Vec3& out) {
        const auto path = trace_ray(p, launch_ray(p, field, wavelength_nm, x, y), to_stop);
        if (path.status != TraceStatus::reached_image && path.status_surface != static_cast<int>(stop))
            return false;
        if (path.hits.size() <= stop) return false;
        out = path.hits[stop].point;
        return true;
    };

    // Coarse seed: grid ray closest to the stop center.
    const double a = entrance_semi_aperture(p);
    constexpr int kSeed = 33;
    double x = 0.0, y = 0.0, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kSeed; ++i) {
        for (int j = 0; j < kSeed; ++j) {
            const double xs = -a + (j + 0.5) * 2.0 * a / kSeed;
            const double ys = -a + (i + 0.5) * 2.0 * a / kSeed;
            Vec3 h;
            if (!stop_hit(xs, ys, h)) continue;
            const double r = std::hypot(h.x, h.y);
            if (r < best) {
                best = r;
                x = xs;
                y = ys;
            }
        }
    }
    if (!std::isfinite(best)) throw NumericError("chief ray search: no ray reaches the stop");

    Vec3 h;
    stop_hit(x, y, h);
    for (int iter = 0; iter < 60 && std::hypot(h.x, h.y) >= tolerance_mm; ++iter) {
        const double step = std::max(1e-6, std::min(1e-3, std::hypot(h.x, h.y)));
        Vec3 hx, hy;
        if (!stop_hit(x + step, y, hx) || !stop_hit(x, y + step, hy)) break;
        const double j11 = (hx.x - h.x) / step, j12 = (hy.x - h.x) / step;
        const double j21 = (hx.y - h.y) / step, j22 = (hy.y - h.y) / step;
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0 || !std::isfinite(det)) break;
        const double dx = (j22 * h.x - j12 * h.y) / det;
        const double dy = (-j21 * h.x + j11 * h.y) / det;
        x -= dx;
        y -= dy;
        if (!stop_hit(x, y, h)) throw NumericError("chief ray iteration left the system");
    }
    if (!(std::hypot(h.x, h.y) < tolerance_mm)) {
        throw NumericError("chief ray did not converge to the stop center");
    }

    ChiefRay chief{x, y, trace_ray(p, launch_ray(p, field, wavelength_nm, x, y))};
    if (!chief.path.reached_image()) {
        throw NumericError(std::string("chief ray ") + std::string(to_string(chief.path.status)) +
                           " at surface " + std::to_string(chief.path.status_surface));
    }
    return chief;
}

ParaxialSummary paraxial_solve(const LensPrescription& p, std::optional<double> wavelength_nm) {
    const double wl = wavelength_nm.value_or(p.reference_wavelength_nm());
    const auto last = p.image_index();

    double y = 1.0;
    double u = 0.0;  // object at infinity
    double y_stop = 0.0;
    double n = p.index_after(0, wl);
    double y_last_powered = 0.0;
    bool any_power = false;
    for (std::size_t i = 1; i < last; ++i) {
        const Surface& s = p.surface(i);
        if (i == p.stop_index()) y_stop = y;
        const double n2 = p.index_after(i, wl);
        const double power = (n2 - n) * s.curvature();
        if (power != 0.0) {
            any_power = true;
            y_last_powered = y;
        }
        u = (n * u - y * power) / n2;
        n = n2;
        y += s.thickness_mm * u;
    }
    if (!any_power || std::abs(u) < 1e-15) throw NumericError("zero-power system has no focal length");

    ParaxialSummary out;
    out.effective_focal_length_mm = -1.0 / u;
    // u is unchanged after the last powered surface, so the focus distance follows directly.
    out.back_focal_distance_mm = -y_last_powered / u;
    const double stop_semi = p.surface(p.stop_index()).semi_diameter_mm;
    out.image_space_marginal_angle_rad = y_stop != 0.0 ? u * stop_semi / y_stop : 0.0;

    // Exit pupil: image of the stop through the surfaces behind it.
    const auto z = p.vertex_z();
    double ey = 0.0, eu = 1.0;
    double en = p.index_after(p.stop_index(), wl);
    std::size_t k = p.stop_index();
    bool imaged = false;
    for (std::size_t i = p.stop_index() + 1; i < last; ++i) {
        ey += p.surface(i - 1).thickness_mm * eu;
        const double n2 = p.index_after(i, wl);
        const double power = (n2 - en) * p.surface(i).curvature();
        if (power != 0.0) imaged = true;
        eu = (en * eu - ey * power) / n2;
        en = n2;
        k = i;
    }
    out.exit_pupil_z_mm = imaged && eu != 0.0 ? z[k] - ey / eu : z[p.stop_index()];
    return out;
}

}  // namespace lensdeg
