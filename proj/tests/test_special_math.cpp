#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "softguide/errors.hpp"
#include "softguide/special_math.hpp"

using namespace softguide;

namespace {

// K0(x) = integral over t in [0, inf) of exp(-x cosh t). The integrand decays
// doubly exponentially and is analytic in a strip, so the trapezoid rule
// converges geometrically.
double k0_oracle(double x) {
    const double h = 1.0 / 64.0;
    long double sum = 0.5L * std::exp(-x);
    for (int k = 1;; ++k) {
        const double arg = x * std::cosh(k * h);
        if (arg > 745.0) break;
        sum += std::exp(-static_cast<long double>(arg));
    }
    return static_cast<double>(sum * h);
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("k0 matches frozen high-precision values") {
    // 30-digit reference values of K0.
    const std::pair<double, double> table[] = {
        {1e-8, 18.536612259610778409},  {1e-3, 7.0236888005623813436}, {0.5, 0.92441907122766586178},
        {1.0, 0.42102443824070833334},  {1.999, 0.11403383058923292414}, {2.0, 0.11389387274953343565},
        {2.001, 0.1137540987366846116}, {3.7, 0.015630659921626661612}, {10.0, 1.7780062316167651811e-5},
        {50.0, 3.4101677497894955139e-23}, {200.0, 1.2256819797765334517e-88}, {700.0, 4.669776431685376881e-306},
    };
    for (auto [x, v] : table) {
        CAPTURE(x);
        CHECK(rel(macdonald_k0(x), v) < 1e-12);
    }
}

TEST_CASE("k0 agrees with the integral representation on a log grid") {
    double worst = 0.0;
    for (int i = 0; i <= 400; ++i) {
        const double x = 1e-8 * std::pow(700.0 / 1e-8, i / 400.0);
        if (x > 700.0) break;
        worst = std::max(worst, rel(macdonald_k0(x), k0_oracle(x)));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("k0 small-argument expansion and underflow") {
    for (double x : {1e-6, 1e-8, 1e-10}) CHECK(std::abs(macdonald_k0(x) + std::log(x / 2) + euler_gamma) < 1e-9);
    CHECK(macdonald_k0(800.0) == 0.0);
    CHECK(macdonald_k0(std::numeric_limits<double>::infinity()) == 0.0);
    CHECK_THROWS_AS(macdonald_k0(0.0), DomainError);
    CHECK_THROWS_AS(macdonald_k0(-1.0), DomainError);
    CHECK_THROWS_AS(macdonald_k0(std::nan("")), DomainError);
}

TEST_CASE("k0 is strictly decreasing and convex on a log grid") {
    std::vector<double> x, y;
    for (int i = 0; i <= 2000; ++i) {
        x.push_back(1e-6 * std::pow(1e8, i / 2000.0));
        y.push_back(macdonald_k0(x.back()));
    }
    for (std::size_t i = 1; i < x.size(); ++i) CHECK(y[i] < y[i - 1]);
    int bad = 0;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        const double d1 = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        const double d2 = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        if (d2 - d1 < 0.0) ++bad;
    }
    CHECK(bad == 0);
}

TEST_CASE("i0 and the regular part of the log split") {
    CHECK(rel(bessel_i0(0.5), 1.0634833707413235193) < 1e-14);
    CHECK(rel(bessel_i0(3.0), 4.8807925858650240856) < 1e-14);
    CHECK(rel(bessel_i0(30.0), 781672297823.97748972) < 1e-13);
    CHECK(rel(bessel_i0(60.0), std::cyl_bessel_i(0.0, 60.0)) < 1e-12);
    const double kappa = 3.7;
    CHECK(k0_regular_part(kappa, 0.0) == doctest::Approx(-std::log(kappa / 2) - euler_gamma).epsilon(1e-15));
    for (double r : {1e-9, 1e-4, 0.3, 0.54, 0.55, 2.0}) {
        CAPTURE(r);
        const double direct = macdonald_k0(kappa * r) + std::log(r) * bessel_i0(kappa * r);
        CHECK(std::abs(k0_regular_part(kappa, r) - direct) < 1e-12 * std::max(1.0, std::abs(std::log(r)) * bessel_i0(kappa * r)));
    }
}

TEST_CASE("gauss-legendre rules") {
    const auto r1 = gauss_legendre(1);
    CHECK(r1.nodes == std::vector<double>{0.0});
    CHECK(r1.weights == std::vector<double>{2.0});
    const auto r2 = gauss_legendre(2);
    CHECK(r2.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(r2.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(r2.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
    const auto r16 = gauss_legendre(16);
    CHECK(std::abs(r16.integrate([](double x) { return std::pow(x, 30); }) - 2.0 / 31.0) < 1e-13);
    CHECK_THROWS_AS(gauss_legendre(0), DomainError);
    CHECK_THROWS_AS(gauss_legendre(257), DomainError);

    for (int n : {3, 7, 8, 33, 100, 255, 256}) {
        CAPTURE(n);
        const auto r = gauss_legendre(n);
        REQUIRE(r.nodes.size() == static_cast<std::size_t>(n));
        REQUIRE(r.weights.size() == static_cast<std::size_t>(n));
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(r.weights[i] > 0.0);
            if (i > 0) CHECK(r.nodes[i] > r.nodes[i - 1]);
            total += r.weights[i];
        }
        CHECK(std::abs(total - 2.0) < 1e-14);
        // exactness up to degree 2n-1 on a few monomials
        for (int deg : {2 * n - 2, 2 * n - 1}) {
            const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
            CHECK(std::abs(r.integrate([deg](double x) { return std::pow(x, deg); }) - exact) < 1e-13);
        }
    }
}

TEST_CASE("composite rules integrate constants to the interval length") {
    const auto single = composite_rule(uniform_partition(0.0, 1.0, 1), gauss_legendre(1));
    CHECK(single.nodes == std::vector<double>{0.5});
    CHECK(single.weights == std::vector<double>{1.0});
    const auto two = composite_rule(uniform_partition(0.0, 2.0, 2), gauss_legendre(5));
    CHECK(two.integrate([](double) { return 1.0; }) == doctest::Approx(2.0).epsilon(1e-15));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
        double lo = U(rng), hi = U(rng);
        if (lo > hi) std::swap(lo, hi);
        if (hi - lo < 1e-3) continue;
        const double mark = lo + (hi - lo) * std::abs(U(rng)) / 10.0;
        for (const auto& part : {uniform_partition(lo, hi, 1 + trial % 9), dyadic_partition(lo, hi, mark, trial % 25)}) {
            for (std::size_t k = 1; k < part.breakpoints.size(); ++k) CHECK(part.breakpoints[k] > part.breakpoints[k - 1]);
            const auto rule = composite_rule(part, gauss_legendre(1 + trial % 12));
            CHECK(std::abs(rule.integrate([](double) { return 1.0; }) - (hi - lo)) < 1e-13 * std::max(1.0, hi - lo));
        }
    }
}

TEST_CASE("dyadic refinement integrates the log singularity") {
    const auto part = dyadic_partition(0.0, 1.0, 0.0, 20);
    CHECK(part.refinement_depth == 20);
    CHECK(part.breakpoints[1] == std::ldexp(1.0, -20));
    // widths halve toward the marked point; the two innermost panels share a width
    for (std::size_t k = 2; k + 1 < part.breakpoints.size(); ++k) {
        const double w0 = part.breakpoints[k] - part.breakpoints[k - 1];
        const double w1 = part.breakpoints[k + 1] - part.breakpoints[k];
        CHECK(w1 == doctest::Approx(2.0 * w0).epsilon(1e-12));
    }
    const auto rule = composite_rule(part, gauss_legendre(8));
    CHECK(std::abs(rule.integrate([](double x) { return std::log(x); }) + 1.0) < 1e-8);

    // interior marked point, default depth
    const auto mid = composite_rule(dyadic_partition(-1.0, 2.0, 0.25), gauss_legendre(8));
    const double exact = 1.25 * std::log(1.25) - 1.25 + 1.75 * std::log(1.75) - 1.75;
    CHECK(std::abs(mid.integrate([](double x) { return std::log(std::abs(x - 0.25)); }) - exact) < 1e-8);
}
