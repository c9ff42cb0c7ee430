#pragma once

#include "lensdeg/prescription.hpp"
#include "lensdeg/vec3.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace lensdeg {

/// Field direction of a collimated bundle. The ray direction is normalize(tan θx, tan θy, 1).
struct FieldAngle {
    double theta_x_deg = 0.0;
    double theta_y_deg = 0.0;

    Vec3 direction() const;
    bool operator==(const FieldAngle&) const = default;
};

struct Ray {
    Vec3 position;
    Vec3 direction;  // unit length
    double wavelength_nm = 0.0;
    double opl_mm = 0.0;
    bool alive = true;
};

enum class TraceStatus { reached_image, vignetted, total_internal_reflection, missed };

std::string_view to_string(TraceStatus status);

struct SurfaceHit {
    int surface = 0;
    Vec3 point;
    Vec3 normal;     // unit, oriented against the incoming ray
    Vec3 direction;  // after refraction at this surface
    double incidence_rad = 0.0;
    double refraction_rad = 0.0;
    double n_before = 1.0;
    double n_after = 1.0;
    double opl_mm = 0.0;  // accumulated up to this surface
};

struct RayPath {
    int ray_id = 0;
    std::vector<SurfaceHit> hits;  // ordered by surface index, hits[0] is the launch point
    TraceStatus status = TraceStatus::missed;
    int status_surface = -1;  // surface that ended the trace (image index on success)

    bool reached_image() const { return status == TraceStatus::reached_image; }
    const SurfaceHit& last() const { return hits.back(); }
};

enum class IntersectOutcome { hit, vignetted, missed };

struct Intersection {
    IntersectOutcome outcome = IntersectOutcome::missed;
    Vec3 point;
    Vec3 normal;
    double distance = 0.0;  // geometric path length from the ray origin
};

/// Intersects `ray` with `surface` whose vertex sits at (0, 0, vertex_z).
/// Uses the cancellation-free root of the sag quadratic and keeps the vertex-side sheet.
Intersection intersect(const Ray& ray, const Surface& surface, double vertex_z,
                       bool clip_aperture = true);

/// Vector Snell refraction. `normal` must point against `direction`. nullopt on TIR.
std::optional<Vec3> refract(const Vec3& direction, const Vec3& normal, double n1, double n2);

struct TraceOptions {
    bool clip_apertures = true;
    /// Stop after this surface (inclusive); defaults to the image plane.
    std::optional<std::size_t> last_surface;
};

/// Sequential trace from the object plane to the image plane. Never throws for ray failures;
/// the terminal status records them.
RayPath trace_ray(const LensPrescription& p, const Ray& ray, const TraceOptions& options = {});

/// Collimated ray launched on the object plane at (x, y) with an initial OPL that puts the
/// incoming plane wavefront through the origin.
Ray launch_ray(const LensPrescription& p, FieldAngle field, double wavelength_nm, double x, double y);

/// N×N uniform grid of parallel rays on the object plane, row-major (row = y index).
struct Bundle {
    FieldAngle field;
    double wavelength_nm = 0.0;
    int samples = 0;
    double pitch_mm = 0.0;
    double x0_mm = 0.0;  // launch coordinates of sample (0, 0)
    double y0_mm = 0.0;
    std::vector<RayPath> paths;

    double x_of(int col) const { return x0_mm + col * pitch_mm; }
    double y_of(int row) const { return y0_mm + row * pitch_mm; }
    const RayPath& at(int row, int col) const { return paths[static_cast<std::size_t>(row) * samples + col]; }
    std::size_t survivors() const;
};

struct BundleOptions {
    /// When set, the grid is shifted so sample (N/2, N/2) launches exactly here.
    std::optional<std::pair<double, double>> anchor_mm;
    TraceOptions trace;
};

/// Samples the square circumscribing the first refracting surface's clear aperture.
/// Throws NumericError if no ray reaches the image.
Bundle trace_bundle(const LensPrescription& p, FieldAngle field, double wavelength_nm, int samples,
                    const BundleOptions& options = {});

struct ChiefRay {
    double x_mm = 0.0;  // launch position on the object plane
    double y_mm = 0.0;
    RayPath path;
};

/// Ray through the stop center, refined by secant/Newton iteration on the launch position
/// until its stop-plane height is below `tolerance_mm`. Throws NumericError when it fails.
ChiefRay find_chief_ray(const LensPrescription& p, FieldAngle field, double wavelength_nm,
                        double tolerance_mm = 1e-9);

struct ParaxialSummary {
    double effective_focal_length_mm = 0.0;
    double back_focal_distance_mm = 0.0;  // from the last powered surface to the paraxial focus
    double image_space_marginal_angle_rad = 0.0;
    double exit_pupil_z_mm = 0.0;  // paraxial image of the stop, absolute axial coordinate
};

/// y-nu paraxial trace at `wavelength_nm` (reference wavelength when omitted).
/// Throws NumericError for a zero-power system.
ParaxialSummary paraxial_solve(const LensPrescription& p, std::optional<double> wavelength_nm = {});

}  // namespace lensdeg
