#include "helpers.hpp"

#include "lensdeg/error.hpp"
#include "lensdeg/raytrace.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lensdeg;

namespace {

double sin_angle(const Vec3& a, const Vec3& n) {
    return norm(cross(a, n));
}

}  // namespace

TEST_SUITE("raytrace") {

TEST_CASE("intersections with a plane and a sphere vertex") {
    Surface plane;
    plane.semi_diameter_mm = 15.0;
    Ray axial{{0, 0, 0}, {0, 0, 1}, 531.0};
    const auto a = intersect(axial, plane, 100.0);
    REQUIRE(a.outcome == IntersectOutcome::hit);
    CHECK(a.point.x == 0.0);
    CHECK(a.point.y == 0.0);
    CHECK(a.point.z == doctest::Approx(100.0));
    CHECK(a.normal.z == doctest::Approx(-1.0));

    Surface sphere = plane;
    sphere.radius_mm = 92.847;
    const auto b = intersect(axial, sphere, 100.0);
    REQUIRE(b.outcome == IntersectOutcome::hit);
    CHECK(b.point.z == doctest::Approx(100.0).epsilon(1e-14));
    CHECK(b.normal.z == doctest::Approx(-1.0));

    Ray high{{0, 20, 0}, {0, 0, 1}, 531.0};
    CHECK(intersect(high, sphere, 100.0).outcome == IntersectOutcome::vignetted);
    CHECK(intersect(high, sphere, 100.0, false).outcome == IntersectOutcome::hit);

    Ray parallel{{0, 0, 0}, {0, 1, 0}, 531.0};
    CHECK(intersect(parallel, plane, 100.0).outcome == IntersectOutcome::missed);
}

TEST_CASE("intersection points lie on the surface") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> h(-14.0, 14.0), ang(-0.1, 0.1);
    for (double R : {92.847, -30.716, -78.197, 500.0}) {
        Surface s;
        s.radius_mm = R;
        s.semi_diameter_mm = 15.0;
        for (int i = 0; i < 200; ++i) {
            Ray r{{h(rng), h(rng), 0.0}, normalized(Vec3{ang(rng), ang(rng), 1.0}), 531.0};
            const auto hit = intersect(r, s, 100.0, false);
            if (hit.outcome != IntersectOutcome::hit) continue;
            const Vec3 c{0, 0, 100.0 + R};
            CHECK(std::abs(norm(hit.point - c) - std::abs(R)) < 1e-10);
            CHECK(dot(hit.normal, r.direction) < 0.0);
            CHECK(std::abs(norm(hit.normal) - 1.0) < 1e-14);
        }
    }
}

TEST_CASE("Snell refraction cases") {
    const Vec3 n{0, 0, -1};
    const auto same = refract({0, 0, 1}, n, 1.0, 1.7);
    REQUIRE(same);
    CHECK(same->z == doctest::Approx(1.0));
    CHECK(same->x == 0.0);

    const double ti = deg_to_rad(30.0);
    const auto t = refract({std::sin(ti), 0, std::cos(ti)}, n, 1.0, 1.5);
    REQUIRE(t);
    CHECK(rad_to_deg(std::asin(t->x)) == doctest::Approx(19.47122063).epsilon(1e-9));
    CHECK(std::abs(norm(*t) - 1.0) < 1e-15);

    const double t60 = deg_to_rad(60.0);
    CHECK_FALSE(refract({std::sin(t60), 0, std::cos(t60)}, n, 1.5, 1.0).has_value());
}

TEST_CASE("refraction is reversible and coplanar") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0), nd(1.0, 2.0);
    int checked = 0;
    for (int i = 0; i < 2000; ++i) {
        const Vec3 n = normalized(Vec3{0.3 * u(rng), 0.3 * u(rng), -1.0});
        const Vec3 d = normalized(Vec3{0.6 * u(rng), 0.6 * u(rng), 1.0});
        const double n1 = nd(rng), n2 = nd(rng);
        const auto t = refract(d, n, n1, n2);
        if (!t) continue;
        ++checked;
        CHECK(std::abs(n1 * sin_angle(d, n) - n2 * sin_angle(*t, n)) < 1e-12);
        CHECK(std::abs(dot(cross(d, n), *t)) < 1e-12);
        const auto back = refract(-*t, -n, n2, n1);
        REQUIRE(back);
        CHECK(norm(-*back - d) < 1e-10);
    }
    CHECK(checked > 1000);
}

TEST_CASE("axial ray stays on the axis at every wavelength") {
    for (double nm : {486.0, 531.0, 588.0, 656.0}) {
        const RayPath path = trace_ray(doublet(), launch_ray(doublet(), {}, nm, 0.0, 0.0));
        REQUIRE(path.reached_image());
        for (const SurfaceHit& h : path.hits) {
            CHECK(std::abs(h.point.x) < 1e-10);
            CHECK(std::abs(h.point.y) < 1e-10);
        }
        CHECK(path.last().point.z == doctest::Approx(205.872));
    }
}

TEST_CASE("every refraction in a bundle obeys Snell and opl increases") {
    const Bundle b = trace_bundle(doublet(), {0.0, 2.0}, 486.0, 32);
    for (const RayPath& p : b.paths) {
        for (std::size_t i = 1; i < p.hits.size(); ++i) {
            const SurfaceHit& h = p.hits[i];
            CHECK(std::abs(h.n_before * std::sin(h.incidence_rad) - h.n_after * std::sin(h.refraction_rad)) < 1e-12);
            CHECK(h.opl_mm > p.hits[i - 1].opl_mm);
        }
        for (std::size_t i = 1; i < p.hits.size(); ++i) CHECK(p.hits[i].surface > p.hits[i - 1].surface);
    }
}

TEST_CASE("rotational symmetry on axis") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.5, 1.5), phi(0.0, 2 * kPi);
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng), y = u(rng), a = phi(rng);
        const Ray r = launch_ray(doublet(), {}, 531.0, x, y);
        Ray rr = r;
        rr.position = {x * std::cos(a) - y * std::sin(a), x * std::sin(a) + y * std::cos(a), r.position.z};
        const RayPath p = trace_ray(doublet(), r), q = trace_ray(doublet(), rr);
        REQUIRE(p.reached_image());
        REQUIRE(q.reached_image());
        const Vec3 h = p.last().point, g = q.last().point;
        CHECK(std::abs(h.x * std::cos(a) - h.y * std::sin(a) - g.x) < 1e-9);
        CHECK(std::abs(h.x * std::sin(a) + h.y * std::cos(a) - g.y) < 1e-9);
    }
}

TEST_CASE("meridional mirror symmetry at zero field") {
    const RayPath p = trace_ray(doublet(), launch_ray(doublet(), {}, 656.0, 0.7, 1.9));
    const RayPath q = trace_ray(doublet(), launch_ray(doublet(), {}, 656.0, 0.7, -1.9));
    REQUIRE(p.hits.size() == q.hits.size());
    for (std::size_t i = 0; i < p.hits.size(); ++i) {
        CHECK(p.hits[i].point.x == doctest::Approx(q.hits[i].point.x));
        CHECK(p.hits[i].point.y == doctest::Approx(-q.hits[i].point.y));
        CHECK(p.hits[i].opl_mm == doctest::Approx(q.hits[i].opl_mm));
    }
}

TEST_CASE("on-axis vignetting is exactly the stop disc") {
    const LensPrescription& p = doublet();
    const Bundle b = trace_bundle(p, {}, 531.0, 64);
    TraceOptions to_stop;
    to_stop.clip_apertures = false;
    to_stop.last_surface = p.stop_index();
    double cx = 0.0, cy = 0.0;
    for (int r = 0; r < b.samples; ++r) {
        for (int c = 0; c < b.samples; ++c) {
            const RayPath free = trace_ray(p, launch_ray(p, {}, 531.0, b.x_of(c), b.y_of(r)), to_stop);
            const Vec3 s = free.last().point;
            const bool inside = std::hypot(s.x, s.y) <= p.surface(p.stop_index()).semi_diameter_mm;
            CHECK(b.at(r, c).reached_image() == inside);
            if (b.at(r, c).reached_image()) {
                cx += b.x_of(c);
                cy += b.y_of(r);
            }
        }
    }
    const double n = static_cast<double>(b.survivors());
    CHECK(n > 0);
    CHECK(std::abs(cx / n) < 1e-9);
    CHECK(std::abs(cy / n) < 1e-9);
}

TEST_CASE("plus and minus field bundles mirror each other") {
    const Bundle up = trace_bundle(doublet(), {0.0, 2.0}, 531.0, 48);
    const Bundle down = trace_bundle(doublet(), {0.0, -2.0}, 531.0, 48);
    CHECK(up.survivors() == down.survivors());
    auto centroid = [](const Bundle& b) {
        double y = 0.0;
        for (const RayPath& p : b.paths) {
            if (p.reached_image()) y += p.last().point.y;
        }
        return y / static_cast<double>(b.survivors());
    };
    const double yu = centroid(up), yd = centroid(down);
    CHECK(yu == doctest::Approx(-yd).epsilon(1e-9));
    // Image height of the 2° bundle against the paraxial prediction EFL·tan(2°).
    const double efl = paraxial_solve(doublet(), 531.0).effective_focal_length_mm;
    CHECK(yu == doctest::Approx(efl * std::tan(deg_to_rad(2.0))).epsilon(0.02));
}

TEST_CASE("single-ray bundle and degenerate bundles") {
    const Bundle one = trace_bundle(doublet(), {}, 531.0, 1);
    CHECK(one.paths.size() == 1);
    CHECK(one.paths[0].reached_image());
    CHECK_THROWS_AS(trace_bundle(doublet(), {0.0, 40.0}, 531.0, 16), NumericError);
}

TEST_CASE("chief ray passes the stop center") {
    for (double fy : {-2.0, 0.0, 2.0}) {
        for (double nm : {486.0, 656.0}) {
            const ChiefRay c = find_chief_ray(doublet(), {0.5, fy}, nm);
            const Vec3 s = c.path.hits[doublet().stop_index()].point;
            CHECK(std::hypot(s.x, s.y) < 1e-9);
            CHECK(c.path.reached_image());
        }
    }
}

TEST_CASE("paraxial EFL agrees with a near-axis real ray") {
    const LensPrescription& p = doublet();
    const double nm = p.reference_wavelength_nm();
    const ParaxialSummary s = paraxial_solve(p);
    const double h = 0.001;
    const RayPath r = trace_ray(p, launch_ray(p, {}, nm, 0.0, h));
    REQUIRE(r.reached_image());
    const Vec3 d = r.last().direction;
    const double real_efl = -h / (d.y / d.z);
    CHECK(std::abs(s.effective_focal_length_mm - real_efl) < 1e-6);
    // Axis crossing of the same ray against the back focal distance.
    const Vec3 q = r.last().point;
    const double crossing = q.z - q.y * d.z / d.y;
    CHECK(std::abs(crossing - p.vertex_z()[3] - s.back_focal_distance_mm) < 1e-5);
}

TEST_CASE("surface power oracle and zero-power systems") {
    const ParaxialSummary s = paraxial_solve(single_surface(1.5, 50.0));
    CHECK(s.effective_focal_length_mm == doctest::Approx(150.0).epsilon(1e-15));
    CHECK(std::abs(s.effective_focal_length_mm - 150.0) < 1e-12);
    CHECK(paraxial_solve(single_surface(1.8, -40.0)).effective_focal_length_mm == doctest::Approx(-1.8 * 40.0 / 0.8));
    CHECK_THROWS_AS(paraxial_solve(single_surface(1.5, 0.0)), NumericError);
}

}  // TEST_SUITE
