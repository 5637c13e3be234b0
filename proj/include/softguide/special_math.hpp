#pragma once

#include <span>
#include <vector>

namespace softguide {

// Modified Bessel function of the second kind, order zero.
// Relative error below 1e-12 on [1e-8, 700]; returns 0 once the value
// underflows. Throws DomainError for x <= 0 or NaN.
double macdonald_k0(double x);

// Modified Bessel function of the first kind, order zero (x >= 0).
double bessel_i0(double x);

// Regular part of the logarithmic split K0(kappa*r) = -ln(r) I0(kappa*r) + F.
// F(kappa, r) = K0(kappa r) + ln(r) I0(kappa r) is smooth in r, including r = 0
// where it equals -ln(kappa/2) - euler_gamma.
double k0_regular_part(double kappa, double r);

inline constexpr double euler_gamma = 0.57721566490153286061;

// Nodes and weights of a quadrature rule. For gauss_legendre the nodes live in
// [-1, 1]; composite_rule returns rules mapped onto a physical interval.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const { return nodes.size(); }

    template <class F>
    [[nodiscard]] double integrate(F&& f) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(nodes[i]);
        return sum;
    }
};

// n-point Gauss-Legendre rule on [-1, 1], 1 <= n <= 256.
QuadratureRule gauss_legendre(int n);

// Cached rule; the returned reference lives for the program lifetime.
const QuadratureRule& cached_gauss_legendre(int n);

struct PanelPartition {
    std::vector<double> breakpoints;
    int refinement_depth = 0;

    [[nodiscard]] std::size_t panel_count() const {
        return breakpoints.empty() ? 0 : breakpoints.size() - 1;
    }
    [[nodiscard]] double lower() const { return breakpoints.front(); }
    [[nodiscard]] double upper() const { return breakpoints.back(); }
};

// n equal panels on [lo, hi].
PanelPartition uniform_partition(double lo, double hi, int panels);

// Panels on [lo, hi] that halve in width toward `marked`, `depth` times on each
// side that has positive length. The innermost panels touch `marked`.
PanelPartition dyadic_partition(double lo, double hi, double marked, int depth = 24);

// Breakpoints of `sorted` (strictly increasing, at least two points) split
// further so that no panel is longer than max_length.
PanelPartition refine_to_length(std::span<const double> sorted, double max_length);

// Maps `base` onto every panel of `partition` and concatenates.
QuadratureRule composite_rule(const PanelPartition& partition, const QuadratureRule& base);

}  // namespace softguide
