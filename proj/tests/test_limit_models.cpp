#include <doctest.h>

#include <cmath>
#include <numbers>

#include "softguide/errors.hpp"
#include "softguide/limit_models.hpp"
#include "softguide/special_math.hpp"

using namespace softguide;

namespace {

constexpr double pi = std::numbers::pi;

TransverseWell parabola() {
    return TransverseWell::function([](double u) { return 1.0 - u * u; }, 1.0);
}

TransverseWell tent() { return TransverseWell::sampled({-1.0, 0.0, 1.0}, {0.0, 2.0, 0.0}, 1.0); }

double integral(const TransverseWell& w) {
    const auto pieces = w.support_pieces();
    const auto rule = composite_rule(refine_to_length(pieces, (pieces.back() - pieces.front()) / 256.0),
                                     cached_gauss_legendre(20));
    return rule.integrate([&](double u) { return w(u); });
}

}  // namespace

TEST_CASE("delta coupling: alpha and threshold") {
    auto c = delta_coupling(TransverseWell::flat_bottom(1.0, 1.0, 1.0, 1.0));
    CHECK(c.alpha == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(c.threshold == doctest::Approx(-1.0).epsilon(1e-15));
    c = delta_coupling(TransverseWell::flat_bottom(50.0, 0.1, 0.1, 0.1));
    CHECK(c.alpha == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(c.threshold == doctest::Approx(-25.0).epsilon(1e-14));

    CHECK(std::abs(delta_coupling(parabola()).alpha - 4.0 / 3.0) < 1e-10);
    const auto quartic = TransverseWell::function([](double u) { return (1.0 - u * u) * (1.0 - u * u); }, 1.0);
    CHECK(std::abs(delta_coupling(quartic).alpha - 16.0 / 15.0) < 1e-10);
    CHECK(std::abs(delta_coupling(tent()).alpha - 2.0) < 1e-14);
}

TEST_CASE("scaled well: identity at eps = 1, preserved integral, flat-bottom shape") {
    const auto flat = TransverseWell::flat_bottom(1.0, 1.0, 1.0, 1.0);
    for (const auto& w : {flat, parabola(), tent()}) {
        const auto same = scaled_well(w, 1.0);
        for (double u : {-0.9, -0.3, 0.0, 0.4, 0.95}) CHECK(same(u) == w(u));
        const double alpha = delta_coupling(w).alpha;
        for (double eps : default_eps_ladder()) {
            const auto s = scaled_well(w, eps);
            CHECK(s.halfwidth() == doctest::Approx(eps * w.halfwidth()));
            CHECK(std::abs(delta_coupling(s).alpha - alpha) < 1e-12);
            CHECK(std::abs(integral(s) - alpha) < 1e-12);
        }
    }
    const auto q = scaled_well(flat, 0.25);
    CHECK(q.depth() == doctest::Approx(4.0));
    CHECK(q.halfwidth() == doctest::Approx(0.25));
    CHECK(q.a1() == doctest::Approx(0.25));
    CHECK_THROWS_AS(scaled_well(flat, 0.0), DomainError);
    CHECK_THROWS_AS(scaled_well(flat, 1.5), DomainError);
}

TEST_CASE("Dirichlet threshold") {
    CHECK(dirichlet_threshold(2.0) == doctest::Approx(2.4674011002723395));
    CHECK(dirichlet_threshold(1.0) == doctest::Approx(pi * pi));
    CHECK(dirichlet_threshold(0.2) == doctest::Approx(25.0 * pi * pi));
    CHECK(dirichlet_threshold(TransverseWell::flat_bottom(3.0, 0.2, 0.5, 0.6)) ==
          doctest::Approx(pi * pi / 0.49));
    CHECK_THROWS_AS(dirichlet_threshold(0.0), DomainError);
}

TEST_CASE("delta limit: gaps shrink along the dyadic ladder") {
    const auto study = delta_limit_study(TransverseWell::flat_bottom(1.0, 1.0, 1.0, 1.0));
    REQUIRE(study.rows.size() == 5);
    CHECK(study.gaps_decreasing);
    for (std::size_t i = 1; i < study.rows.size(); ++i) CHECK(study.rows[i].gap < study.rows[i - 1].gap);
    CHECK(study.final_ratio < 0.25);
    CHECK(study.rows.back().gap < 0.25 * study.rows.front().gap);
    for (const auto& r : study.rows) {
        CHECK(std::isfinite(r.epsilon0));
        CHECK(r.epsilon0 < 0.0);
        CHECK(r.above_threshold);
    }
}

TEST_CASE("delta limit: monotone gaps for sampled and function wells") {
    for (const auto& w : {parabola(), tent()}) {
        const auto study = delta_limit_study(w);
        CHECK(study.gaps_decreasing);
        for (const auto& r : study.rows) CHECK(r.above_threshold);
    }
}

TEST_CASE("hard-wall limit: eps0 + V0 climbs toward pi^2 / |J|^2") {
    const auto trend = hard_wall_trend(1.0, 1.0, 1.0);
    REQUIRE(trend.rows.size() == 3);
    CHECK(trend.dirichlet == doctest::Approx(pi * pi / 4.0));
    CHECK(trend.increasing);
    CHECK(trend.below_dirichlet);
    for (std::size_t i = 1; i < trend.rows.size(); ++i) CHECK(trend.rows[i].shifted > trend.rows[i - 1].shifted);
    for (const auto& r : trend.rows) CHECK(r.shifted < trend.dirichlet);
    // Deep wells look like a box widened by the penetration depth 1/sqrt(V0) on each side.
    const double wide = 2.0 + 2.0 / std::sqrt(1000.0);
    CHECK(trend.rows.back().shifted == doctest::Approx(pi * pi / (wide * wide)).epsilon(1e-3));
}

TEST_CASE("limit summary: thread count does not change the table") {
    const auto w = TransverseWell::flat_bottom(1.0, 1.0, 1.0, 1.0);
    const auto one = limit_summary(w, default_eps_ladder(), 1);
    const auto three = limit_summary(w, default_eps_ladder(), 3);
    REQUIRE(one.delta.rows.size() == three.delta.rows.size());
    for (std::size_t i = 0; i < one.delta.rows.size(); ++i)
        CHECK(one.delta.rows[i].epsilon0 == three.delta.rows[i].epsilon0);
    CHECK(one.hard_wall.rows.size() == 3);
    CHECK(one.dirichlet == doctest::Approx(pi * pi / 4.0));
    CHECK(limit_summary(parabola()).hard_wall.rows.empty());
}
