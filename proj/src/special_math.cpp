#include "softguide/special_math.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "softguide/errors.hpp"

namespace softguide {
namespace {

// Chebyshev expansion of sqrt(x) e^x K0(x) in t = 4/x - 1, valid for x >= 2.
// Generated at 40 digits from the integral representation; the tail beyond
// the last term is below 1e-19.
constexpr std::array<double, 28> k0_large_cheb = {
    2.44030308206595545,     -3.14481013119645005e-2, 1.56988388573005337e-3,
    -1.28495495816278026e-4, 1.39498137188764994e-5,  -1.83175552271911948e-6,
    2.76681363944501508e-7,  -4.66048989768794767e-8, 8.57403401741422609e-9,
    -1.69753450938906152e-9, 3.57739728140032845e-10, -7.95748924447739704e-11,
    1.85594911495492655e-11, -4.51459788337451918e-12, 1.14034058820734423e-12,
    -2.98009692314817835e-13, 8.03289077506837437e-14, -2.22751332674629636e-14,
    6.34007647627664597e-15, -1.84859337792090717e-15, 5.51205599940433336e-16,
    -1.67823112575490064e-16, 5.21039177764355411e-17, -1.64758059398426328e-17,
    5.30043377117733577e-18, -1.73317120058210003e-18, 5.75510920288272935e-19,
    -1.93909560531835539e-19,
};

double chebyshev_sum(double t) {
    // Clenshaw recurrence, first coefficient halved.
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t j = k0_large_cheb.size() - 1; j >= 1; --j) {
        const double b0 = 2.0 * t * b1 - b2 + k0_large_cheb[j];
        b2 = b1;
        b1 = b0;
    }
    return t * b1 - b2 + 0.5 * k0_large_cheb[0];
}

// Both small-argument series at once: I0(x) and sum_k H_k q^k / (k!)^2.
struct SmallSeries {
    double i0;
    double harmonic;
};

SmallSeries small_series(double x) {
    const double q = 0.25 * x * x;
    double term = 1.0, i0 = 1.0, harmonic = 0.0, h = 0.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<double>(k) * k);
        h += 1.0 / k;
        i0 += term;
        harmonic += h * term;
        if (term < 1e-18 * i0) break;
    }
    return {i0, harmonic};
}

}  // namespace

double bessel_i0(double x) {
    x = std::abs(x);
    if (x <= 50.0) return small_series(x).i0;
    // Hankel asymptotic series; at x > 50 the terms drop below 1e-17 quickly.
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 40; ++k) {
        const double m = 2.0 * k - 1.0;
        term *= m * m / (8.0 * k * x);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * sum;
}

double macdonald_k0(double x) {
    if (!(x > 0.0)) throw DomainError("macdonald_k0: argument must be positive, got " + std::to_string(x));
    if (x <= 2.0) {
        const auto [i0, harmonic] = small_series(x);
        return -(std::log(0.5 * x) + euler_gamma) * i0 + harmonic;
    }
    if (std::isinf(x)) return 0.0;
    return chebyshev_sum(4.0 / x - 1.0) * std::exp(-x) / std::sqrt(x);
}

double k0_regular_part(double kappa, double r) {
    const double z = kappa * r;
    if (z < 2.0) {
        const auto [i0, harmonic] = small_series(z);
        return -(std::log(0.5 * kappa) + euler_gamma) * i0 + harmonic;
    }
    return macdonald_k0(z) + std::log(r) * bessel_i0(z);
}

QuadratureRule gauss_legendre(int n) {
    if (n < 1 || n > 256) throw DomainError("gauss_legendre: n must be in [1, 256], got " + std::to_string(n));
    if (n == 1) return {{0.0}, {2.0}};
    QuadratureRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Tricomi initial guess for the i-th largest root, then Newton.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        if (n % 2 == 1 && i == half - 1) x = 0.0;
        // Recompute the derivative at the converged root.
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[n - 1 - i] = x;
        rule.nodes[i] = -x;
        rule.weights[n - 1 - i] = w;
        rule.weights[i] = w;
    }
    return rule;
}

const QuadratureRule& cached_gauss_legendre(int n) {
    if (n < 1 || n > 256) throw DomainError("gauss_legendre: n must be in [1, 256], got " + std::to_string(n));
    static std::array<std::once_flag, 257> flags;
    static std::array<std::unique_ptr<QuadratureRule>, 257> rules;
    std::call_once(flags[n], [n] { rules[n] = std::make_unique<QuadratureRule>(gauss_legendre(n)); });
    return *rules[n];
}

PanelPartition uniform_partition(double lo, double hi, int panels) {
    if (!(hi > lo) || panels < 1) throw DomainError("uniform_partition: need hi > lo and panels >= 1");
    PanelPartition p;
    p.breakpoints.resize(panels + 1);
    for (int i = 0; i <= panels; ++i) p.breakpoints[i] = lo + (hi - lo) * i / panels;
    p.breakpoints.back() = hi;
    return p;
}

PanelPartition dyadic_partition(double lo, double hi, double marked, int depth) {
    if (!(hi > lo) || marked < lo || marked > hi || depth < 0)
        throw DomainError("dyadic_partition: need lo < hi, marked in [lo, hi], depth >= 0");
    PanelPartition p;
    p.refinement_depth = depth;
    auto& b = p.breakpoints;
    b.push_back(lo);
    if (marked > lo) {
        const double len = marked - lo;
        for (int k = 1; k <= depth; ++k) b.push_back(marked - len * std::ldexp(1.0, -k));
        b.push_back(marked);
    }
    if (hi > marked) {
        const double len = hi - marked;
        for (int k = depth; k >= 1; --k) b.push_back(marked + len * std::ldexp(1.0, -k));
        b.push_back(hi);
    }
    return p;
}

PanelPartition refine_to_length(std::span<const double> sorted, double max_length) {
    if (sorted.size() < 2 || !(max_length > 0.0)) throw DomainError("refine_to_length: need two breakpoints and positive length");
    PanelPartition p;
    p.breakpoints.push_back(sorted[0]);
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double lo = sorted[i - 1], hi = sorted[i];
        if (!(hi > lo)) throw DomainError("refine_to_length: breakpoints must increase strictly");
        const int m = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_length - 1e-9)));
        for (int k = 1; k < m; ++k) p.breakpoints.push_back(lo + (hi - lo) * k / m);
        p.breakpoints.push_back(hi);
    }
    return p;
}

QuadratureRule composite_rule(const PanelPartition& partition, const QuadratureRule& base) {
    if (partition.panel_count() == 0) throw DomainError("composite_rule: empty partition");
    QuadratureRule out;
    out.nodes.reserve(partition.panel_count() * base.size());
    out.weights.reserve(partition.panel_count() * base.size());
    const auto& b = partition.breakpoints;
    for (std::size_t k = 0; k + 1 < b.size(); ++k) {
        const double mid = 0.5 * (b[k] + b[k + 1]);
        const double half = 0.5 * (b[k + 1] - b[k]);
        for (std::size_t i = 0; i < base.size(); ++i) {
            out.nodes.push_back(mid + half * base.nodes[i]);
            out.weights.push_back(half * base.weights[i]);
        }
    }
    return out;
}

}  // namespace softguide
