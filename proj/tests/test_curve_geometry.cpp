#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "softguide/curve_geometry.hpp"
#include "softguide/errors.hpp"
#include "softguide/special_math.hpp"

using namespace softguide;
constexpr double pi = std::numbers::pi;

namespace {

// Constant curvature 1/R on [-L, L] as a tabulated profile.
CurvatureProfile circle_profile(double R, double L) {
    return CurvatureProfile::tabulated({-L, 0.0, L}, {1.0 / R, 1.0 / R, 1.0 / R});
}

double numeric_turning(const CurvatureProfile& p, double s1, double s2) {
    std::vector<double> cuts{std::min(s1, s2)};
    for (double b : p.breakpoints())
        if (b > cuts.front() && b < std::max(s1, s2)) cuts.push_back(b);
    cuts.push_back(std::max(s1, s2));
    const auto rule = composite_rule(refine_to_length(cuts, 0.05), gauss_legendre(20));
    const double v = rule.integrate([&](double s) { return p.curvature(s); });
    return s2 >= s1 ? v : -v;
}

}  // namespace

TEST_CASE("turning angle") {
    const auto zero = CurvatureProfile::zero();
    CHECK(turning_angle(zero, -3.0, 7.0) == 0.0);
    const auto circ = circle_profile(2.0, 10.0);
    CHECK(turning_angle(circ, -1.0, 3.0) == doctest::Approx(0.5 * 4.0).epsilon(1e-13));
    const auto bump = CurvatureProfile::smooth_bump(5.0, pi / 10);
    CHECK(std::abs(turning_angle(bump, -1.0, 1.0) - 5.0 * pi / 10) < 1e-14);
    CHECK(std::abs(turning_angle(bump, -1.0, 1.0) - pi / 2) < 1e-14);

    const auto gauss = CurvatureProfile::gaussian(1.5, 0.7);
    const auto table = CurvatureProfile::tabulated({-1.0, -0.4, 0.1, 0.5, 1.2}, {0.0, 0.8, 1.1, 0.3, 0.0});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (const auto* p : {&bump, &gauss, &table}) {
        for (int i = 0; i < 200; ++i) {
            const double a = U(rng), b = U(rng);
            CHECK(std::abs(turning_angle(*p, a, b) - numeric_turning(*p, a, b)) < 1e-10);
            CHECK(turning_angle(*p, a, b) == -turning_angle(*p, b, a));
        }
    }
}

TEST_CASE("profile metadata") {
    const auto bump = CurvatureProfile::smooth_bump(2.0, 0.5);
    CHECK(bump.curvature(0.6) == 0.0);
    CHECK(bump.curvature(-0.5000001) == 0.0);
    CHECK(bump.curvature(0.0) == 2.0);
    CHECK(bump.sup_abs() == 2.0);
    CHECK(bump.support_bound().value() == 0.5);
    const auto g = CurvatureProfile::gaussian(3.0, 0.5);
    CHECK_FALSE(g.support_bound().has_value());
    CHECK(std::abs(g.curvature(g.effective_extent())) < 1.01e-12);
    // derivatives against central differences
    for (const auto* p : {&bump, &g}) {
        for (double s : {-0.3, 0.1, 0.45}) {
            const double h = 1e-5;
            CHECK(p->derivative(s, 1) == doctest::Approx((p->curvature(s + h) - p->curvature(s - h)) / (2 * h)).epsilon(1e-6));
            CHECK(p->derivative(s, 2) ==
                  doctest::Approx((p->derivative(s + h, 1) - p->derivative(s - h, 1)) / (2 * h)).epsilon(1e-6));
        }
    }
    const auto m = bump.mirrored();
    CHECK(m.curvature(0.1) == -bump.curvature(0.1));
    CHECK(m.sup_abs() == bump.sup_abs());
}

TEST_CASE("curve reconstruction") {
    const auto zero = reconstruct_curve(CurvatureProfile::zero(), 0.0, {0.0, 0.0}, {-5.0, 5.0, 0.01});
    for (double s : {-4.3, 0.0, 1.7, 5.0}) {
        const Vec2 p = zero.position(s);
        CHECK(std::abs(p.x - s) < 1e-14);
        CHECK(std::abs(p.y) < 1e-14);
    }

    const double R = 2.0;
    const auto circ = reconstruct_curve(circle_profile(R, 10.0), 0.0, {0.0, 0.0}, {-6.0, 6.0, 0.01});
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-6.0, 6.0);
    for (int i = 0; i < 500; ++i) {
        const double s = U(rng), t = U(rng);
        const double chord = norm(circ.position(s) - circ.position(t));
        CHECK(std::abs(chord - 2 * R * std::abs(std::sin((s - t) / (2 * R)))) < 1e-8);
    }

    // Euclidean invariance under changes of the anchor.
    const auto bump = CurvatureProfile::smooth_bump(5.0, pi / 10);
    const auto c1 = reconstruct_curve(bump, 0.0, {0.0, 0.0}, {-4.0, 4.0, 0.005});
    const auto c2 = reconstruct_curve(bump, -2.5, {3.0, -7.0}, {-4.0, 4.0, 0.005});
    CHECK(c2.position(-2.5) == Vec2{3.0, -7.0});
    for (int i = 0; i < 500; ++i) {
        const double s = 0.99 * U(rng) * 4 / 6, t = 0.99 * U(rng) * 4 / 6;
        CHECK(std::abs(norm(c1.position(s) - c1.position(t)) - norm(c2.position(s) - c2.position(t))) < 1e-10);
    }
    for (std::size_t i = 1; i < c1.size(); ++i) CHECK(norm(c1.node_point(i) - c1.node_point(i - 1)) <= c1.step() + 1e-12);

    CHECK_THROWS_AS(reconstruct_curve(bump, 0.0, {}, {-4.0, 4.0, 0.05}), DomainError);
}

TEST_CASE("arc-length contraction on random pairs") {
    const auto curve = reconstruct_curve(CurvatureProfile::gaussian(2.0, 0.6), 0.0, {}, {-8.0, 8.0, 0.01});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-8.0, 8.0);
    for (int i = 0; i < 10000; ++i) {
        const double s = U(rng), t = U(rng);
        REQUIRE(norm(curve.position(s) - curve.position(t)) <= std::abs(s - t) * (1 + 1e-13) + 1e-15);
    }
}

TEST_CASE("strip points") {
    const auto straight = reconstruct_curve(CurvatureProfile::zero(), 0.0, {}, {-5.0, 5.0, 0.01});
    const Vec2 p = strip_point(straight, 2.5, 0.3, 0.5);
    CHECK(std::abs(p.x - 2.5) < 1e-14);
    CHECK(std::abs(p.y - 0.3) < 1e-14);
    CHECK_THROWS_AS(strip_point(straight, 0.0, 0.5, 0.5), DomainError);

    const double R = 2.0;
    const auto circ = reconstruct_curve(circle_profile(R, 10.0), 0.0, {}, {-5.0, 5.0, 0.01});
    const Vec2 center = circ.position(0.0) - R * circ.normal(0.0);
    for (double s : {-3.0, -0.7, 0.0, 1.9, 4.0}) {
        CHECK(strip_point(circ, s, 0.0, 0.5) == circ.position(s));
        for (double u : {-0.4, 0.25}) CHECK(std::abs(norm(strip_point(circ, s, u, 0.5) - center) - (R + u)) < 1e-9);
    }
}

TEST_CASE("squared distance formula") {
    const auto zero = CurvatureProfile::zero();
    CHECK(squared_distance(zero, {1.0, 0.2}, {-2.0, -0.1}) == doctest::Approx(9.0 + 0.09).epsilon(1e-14));

    const double R = 1.0;
    const auto circ_p = circle_profile(R, 10.0);
    CHECK(std::abs(squared_distance(circ_p, {pi / 2, 0.0}, {0.0, 0.0}) - 2.0) < 1e-12);
    // Off-curve points on a unit circle, checked by hand geometry.
    const auto circ = reconstruct_curve(circ_p, 0.0, {}, {-5.0, 5.0, 0.01});
    CHECK(std::abs(squared_distance(circ_p, {pi / 2, 0.1}, {0.0, 0.0}) - 2.21) < 1e-12);
    CHECK(std::abs(circ.squared_distance({pi / 2, 0.1}, {0.0, 0.0}) - 2.21) < 1e-10);
    for (double d : {0.3, 1.0, 2.5}) {
        const double chord = 2 * R * std::sin(d / (2 * R));
        CHECK(std::abs(squared_distance(circ_p, {0.4 + d, 0.0}, {0.4, 0.0}) - chord * chord) < 1e-8 * chord * chord);
    }

    const auto bump = CurvatureProfile::smooth_bump(4.0, 0.5);
    const double a = 0.2;
    const auto curve = reconstruct_curve(bump, 0.0, {}, {-6.0, 6.0, 0.005});
    const auto mirror = bump.mirrored();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> S(-5.0, 5.0), Uu(-a, a);
    for (int i = 0; i < 2000; ++i) {
        const StripCoords x{S(rng), 0.99 * Uu(rng)}, y{S(rng), 0.99 * Uu(rng)};
        const double d = squared_distance(bump, x, y);
        const Vec2 px = strip_point(curve, x.s, x.u, a), py = strip_point(curve, y.s, y.u, a);
        const double e = dot(px - py, px - py);
        CHECK(std::abs(d - e) < 1e-7 * std::max(e, 1e-3));
        CHECK(std::abs(d - squared_distance(bump, y, x)) <= 1e-12 * std::max(1.0, d));
        CHECK(std::abs(d - squared_distance(mirror, {x.s, -x.u}, {y.s, -y.u})) <= 1e-12 * std::max(1.0, d));
        CHECK(std::abs(d - curve.squared_distance(x, y)) < 1e-9 * std::max(1.0, d));
        // the curve itself
        const double g = squared_distance(bump, {x.s, 0.0}, {y.s, 0.0});
        const Vec2 dg = curve.position(x.s) - curve.position(y.s);
        CHECK(std::abs(g - dot(dg, dg)) < 1e-8 * std::max(1.0, g));
    }
}

TEST_CASE("reflection leaves the pairwise distance unchanged") {
    // Mirroring the curvature maps x(s,u) to the mirror image of x(s,u), so
    // distances between the same strip coordinates agree.
    const auto bump = CurvatureProfile::smooth_bump(4.0, 0.5);
    const auto mirror = bump.mirrored();
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> S(-3.0, 3.0), Uu(-0.2, 0.2);
    for (int i = 0; i < 500; ++i) {
        const StripCoords x{S(rng), Uu(rng)}, y{S(rng), Uu(rng)};
        const double d = squared_distance(bump, x, y);
        const double m = squared_distance(mirror, {x.s, -x.u}, {y.s, -y.u});
        CHECK(std::abs(d - m) < 1e-12 * std::max(1.0, d));
    }
}

TEST_CASE("strip coordinates") {
    const auto straight = reconstruct_curve(CurvatureProfile::zero(), 0.0, {}, {-10.0, 10.0, 0.01});
    const auto sc = strip_coordinates_of(straight, {3.0, 0.2}, 0.5);
    REQUIRE(sc.has_value());
    CHECK(std::abs(sc->s - 3.0) < 1e-12);
    CHECK(std::abs(sc->u - 0.2) < 1e-12);
    CHECK_FALSE(strip_coordinates_of(straight, {3.0, 0.7}, 0.5).has_value());
    CHECK_THROWS_AS(strip_coordinates_of(straight, {10.02, 0.1}, 0.5), DomainError);

    const double a = 0.1;
    const auto bump = CurvatureProfile::smooth_bump(5.0, pi / 10);
    const auto curve = reconstruct_curve(bump, -4.0, {0.0, 0.0}, {-5.0, 5.0, 0.005});
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> S(-4.0, 4.0), Uu(-a, a);
    for (int i = 0; i < 1000; ++i) {
        const double s = S(rng), u = 0.999 * Uu(rng);
        const auto back = strip_coordinates_of(curve, strip_point(curve, s, u, a), a);
        REQUIRE(back.has_value());
        CHECK(std::abs(back->s - s) < 1e-8);
        CHECK(std::abs(back->u - u) < 1e-8);
    }
    // A point just outside the strip near the bend.
    const Vec2 far = curve.position(0.0) + 1.5 * a * curve.normal(0.0);
    CHECK_FALSE(strip_coordinates_of(curve, far, a).has_value());
}

TEST_CASE("assumption validation") {
    const auto z = validate_assumptions(CurvatureProfile::zero(), 0.7, 20.0);
    CHECK(z.all_pass());
    CHECK(z.sup_curvature == 0.0);
    CHECK(z.injectivity_margin == doctest::Approx(1.0));

    const auto b = validate_assumptions(CurvatureProfile::smooth_bump(2.0, 0.5), 0.6, 10.0);
    CHECK_FALSE(b.strip_fits);
    CHECK(b.product == doctest::Approx(1.2));
    CHECK(b.strip_fits == (b.product < 1.0));

    const auto g = validate_assumptions(CurvatureProfile::gaussian(1.0, 0.5), 0.3, 8.0);
    REQUIRE(g.decay_samples.size() == 3);
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(std::isfinite(g.decay_samples[i].gamma));
        CHECK(g.decay_samples[i].gamma < g.decay_samples[i - 1].gamma);
        CHECK(g.decay_samples[i].first < g.decay_samples[i - 1].first);
        CHECK(g.decay_samples[i].second < g.decay_samples[i - 1].second);
    }
    CHECK(g.decay);
    CHECK(g.injective);

    // A full loop: the outgoing arm crosses the incoming one.
    const auto hairpin = validate_assumptions(CurvatureProfile::smooth_bump(2.0 * pi / 0.6, 0.6), 0.05, 6.0);
    CHECK(hairpin.strip_fits);
    CHECK_FALSE(hairpin.injective);
}
