#include "softguide/transverse_spectrum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "softguide/errors.hpp"
#include "softguide/special_math.hpp"

namespace softguide {

TransverseWell TransverseWell::flat_bottom(double depth, double a1, double a2, double halfwidth) {
    if (!(depth > 0.0) || !std::isfinite(depth)) throw DomainError("flat-bottom well: depth must be positive and finite");
    if (!(a1 + a2 > 0.0)) throw DomainError("flat-bottom well: interval J must have positive length");
    if (!(halfwidth > 0.0) || a1 > halfwidth || a2 > halfwidth || -a1 > halfwidth || -a2 > halfwidth)
        throw DomainError("flat-bottom well: J must lie inside [-a, a]");
    TransverseWell w;
    w.kind_ = WellKind::flat_bottom;
    w.depth_ = depth;
    w.a1_ = a1;
    w.a2_ = a2;
    w.a_ = halfwidth;
    w.finish();
    return w;
}

TransverseWell TransverseWell::sampled(std::vector<double> u, std::vector<double> v, double halfwidth) {
    if (u.size() < 2 || u.size() != v.size()) throw DomainError("sampled well: need >= 2 samples of equal length");
    if (!(halfwidth > 0.0)) throw DomainError("sampled well: halfwidth must be positive");
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!std::isfinite(u[i]) || !std::isfinite(v[i])) throw DomainError("sampled well: non-finite sample");
        if (i > 0 && !(u[i] > u[i - 1])) throw DomainError("sampled well: u must increase strictly");
    }
    if (u.front() < -halfwidth || u.back() > halfwidth) throw DomainError("sampled well: samples outside [-a, a]");
    TransverseWell w;
    w.kind_ = WellKind::sampled;
    w.a_ = halfwidth;
    w.tu_ = std::move(u);
    w.tv_ = std::move(v);
    w.finish();
    return w;
}

TransverseWell TransverseWell::function(std::function<double(double)> v, double halfwidth,
                                        std::vector<double> breakpoints) {
    if (!v) throw DomainError("function well: empty callable");
    if (!(halfwidth > 0.0)) throw DomainError("function well: halfwidth must be positive");
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    std::erase_if(breakpoints, [&](double b) { return !(b > -halfwidth && b < halfwidth); });
    TransverseWell w;
    w.kind_ = WellKind::function;
    w.a_ = halfwidth;
    w.fn_ = std::move(v);
    w.kinks_ = std::move(breakpoints);
    w.finish();
    return w;
}

void TransverseWell::finish() {
    double sup = 0.0;
    auto probe = [&](double u) {
        const double v = (*this)(u);
        if (!std::isfinite(v)) throw DomainError("transverse well: V is not finite at u = " + std::to_string(u));
        if (v < 0.0) throw DomainError("transverse well: V must be nonnegative (negative at u = " + std::to_string(u) + ")");
        sup = std::max(sup, v);
    };
    if (kind_ == WellKind::flat_bottom) {
        sup = depth_;
    } else {
        constexpr int n = 8192;
        for (int i = 0; i <= n; ++i) probe(-a_ + 2.0 * a_ * i / n);
        for (double u : tu_) probe(u);
        for (double u : kinks_) probe(u);
    }
    if (!(sup > 0.0)) throw DomainError("transverse well: V vanishes identically");
    sup_ = sup;
}

double TransverseWell::operator()(double u) const {
    switch (kind_) {
        case WellKind::flat_bottom: return (u >= -a1_ && u <= a2_) ? depth_ : 0.0;
        case WellKind::sampled: {
            if (u < tu_.front() || u > tu_.back()) return 0.0;
            const auto it = std::upper_bound(tu_.begin(), tu_.end(), u);
            const auto i = std::clamp<std::size_t>(static_cast<std::size_t>(it - tu_.begin()), 1, tu_.size() - 1);
            const double t = (u - tu_[i - 1]) / (tu_[i] - tu_[i - 1]);
            return (1.0 - t) * tv_[i - 1] + t * tv_[i];
        }
        case WellKind::function: return std::abs(u) <= a_ ? fn_(u) : 0.0;
    }
    return 0.0;
}

std::vector<double> TransverseWell::support_pieces() const {
    switch (kind_) {
        case WellKind::flat_bottom: return {-a1_, a2_};
        case WellKind::sampled: return tu_;
        case WellKind::function: {
            std::vector<double> p{-a_};
            p.insert(p.end(), kinks_.begin(), kinks_.end());
            p.push_back(a_);
            return p;
        }
    }
    return {};
}

std::vector<double> TransverseWell::jump_points() const {
    if (kind_ == WellKind::flat_bottom) return {-a1_, a2_};
    return {};
}

TransverseWell TransverseWell::scaled(double eps) const {
    if (!(eps > 0.0)) throw DomainError("scaled well: eps must be positive");
    TransverseWell w = *this;
    w.a_ = a_ * eps;
    switch (kind_) {
        case WellKind::flat_bottom:
            w.depth_ = depth_ / eps;
            w.a1_ = a1_ * eps;
            w.a2_ = a2_ * eps;
            break;
        case WellKind::sampled:
            for (double& x : w.tu_) x *= eps;
            for (double& x : w.tv_) x /= eps;
            break;
        case WellKind::function: {
            auto f = fn_;
            w.fn_ = [f, eps](double u) { return f(u / eps) / eps; };
            for (double& x : w.kinks_) x *= eps;
            break;
        }
    }
    w.finish();
    return w;
}

namespace {

// Number of eigenvalues of the tridiagonal matrix below x.
int sturm_count(const std::vector<double>& diag, double off2, double x) {
    int count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < diag.size(); ++i) {
        q = diag[i] - x - (i > 0 ? off2 / q : 0.0);
        if (q == 0.0) q = -1e-300;
        if (q < 0.0) ++count;
    }
    return count;
}

// Solves (T - sigma) x = b for the tridiagonal T with constant off-diagonal.
std::vector<double> tridiagonal_solve(const std::vector<double>& diag, double off, double sigma, std::vector<double> b) {
    const std::size_t n = diag.size();
    std::vector<double> c(n, 0.0);
    double denom = diag[0] - sigma;
    c[0] = off / denom;
    b[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - sigma - off * c[i - 1];
        if (denom == 0.0) denom = 1e-300;
        c[i] = off / denom;
        b[i] = (b[i] - off * b[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) b[i] -= c[i] * b[i + 1];
    return b;
}

double well_integral(const TransverseWell& well) {
    const auto pieces = well.support_pieces();
    const auto rule = composite_rule(refine_to_length(pieces, well.halfwidth() / 8.0), cached_gauss_legendre(8));
    return rule.integrate([&](double u) { return well(u); });
}

// Dirichlet FD grid x_k = origin + (k + 1/2) h covering (-L, L).
struct FdGrid {
    double first = 0.0;
    double h = 0.0;
    std::vector<double> diag;
};

FdGrid dirichlet_grid(const TransverseWell& well, double origin, double h, double L) {
    FdGrid g;
    g.h = h;
    const auto kmin = static_cast<long>(std::ceil((-L - origin) / h - 0.5));
    const auto kmax = static_cast<long>(std::floor((L - origin) / h - 0.5));
    g.first = origin + (static_cast<double>(kmin) + 0.5) * h;
    const double inv = 1.0 / (h * h);
    for (long k = kmin; k <= kmax; ++k) {
        const double x = origin + (static_cast<double>(k) + 0.5) * h;
        g.diag.push_back(2.0 * inv - well(x));
    }
    return g;
}

double lowest_bound_energy(const FdGrid& g, double sup) {
    const double off = -1.0 / (g.h * g.h);
    if (sturm_count(g.diag, off * off, 0.0) == 0)
        throw ToleranceError("transverse solver: discretised operator has no negative eigenvalue");
    return lowest_tridiagonal_eigenvalue(g.diag, off, -sup - 1e-12, 0.0);
}

std::vector<double> inverse_iteration(const std::vector<double>& diag, double off, double energy) {
    const double sigma = energy - 1e-9 * std::max(1.0, std::abs(energy));
    std::vector<double> x(diag.size(), 1.0);
    for (int it = 0; it < 4; ++it) {
        x = tridiagonal_solve(diag, off, sigma, x);
        double nrm = 0.0;
        for (double v : x) nrm = std::max(nrm, std::abs(v));
        for (double& v : x) v /= nrm;
    }
    if (x[x.size() / 2] < 0.0)
        for (double& v : x) v = -v;
    return x;
}

// Step h and origin such that every point of `marks` sits at origin + j h.
// Jumps and kinks of V then fall midway between FD nodes, which keeps the
// error expansion in even powers of h so Richardson extrapolation works.
std::pair<double, double> aligned_step(const std::vector<double>& marks, int steps_across) {
    const double origin = marks.front();
    const double span = marks.back() - marks.front();
    const int m0 = std::max(4, steps_across);
    for (int m = m0; m < 64 * m0; ++m) {
        const double h = span / m;
        bool ok = true;
        for (double p : marks) {
            const double t = (p - origin) / h;
            ok = ok && std::abs(t - std::round(t)) < 1e-8;
        }
        if (ok) return {origin, h};
    }
    return {origin, span / m0};
}

}  // namespace

double lowest_tridiagonal_eigenvalue(const std::vector<double>& diag, double off, double lo, double hi) {
    if (diag.empty()) throw DomainError("lowest_tridiagonal_eigenvalue: empty matrix");
    const double off2 = off * off;
    for (int it = 0; it < 300 && hi - lo > 4e-16 * std::max({1.0, std::abs(lo), std::abs(hi)}); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(diag, off2, mid) >= 1)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

double GroundState::phi_at(double x) const {
    if (analytic_) {
        const double t = std::abs(x - center_);
        if (t <= half_) return amp_ * std::cos(k_ * (x - center_));
        return amp_ * std::cos(k_ * half_) * std::exp(-kappa0 * (t - half_));
    }
    if (x > a_) return tail_right * std::exp(-kappa0 * x);
    if (x < -a_) return tail_left * std::exp(kappa0 * x);
    // Cubic Lagrange interpolation on the fine FD grid.
    const double t = (x - grid_origin_) / grid_step_;
    const auto n = static_cast<long>(grid_phi_.size());
    long j = static_cast<long>(std::floor(t)) - 1;
    j = std::clamp(j, 0L, n - 4);
    double sum = 0.0;
    for (long p = 0; p < 4; ++p) {
        double w = 1.0;
        for (long q = 0; q < 4; ++q)
            if (q != p) w *= (t - static_cast<double>(j + q)) / static_cast<double>(p - q);
        sum += w * grid_phi_[static_cast<std::size_t>(j + p)];
    }
    return sum;
}

GroundState flat_bottom_ground_state(double depth, double a1, double a2, double halfwidth) {
    if (!(depth > 0.0) || !(a1 + a2 > 0.0)) throw DomainError("flat_bottom_ground_state: need V0 > 0 and |J| > 0");
    const double c = 0.5 * (a2 - a1);
    const double d = 0.5 * (a1 + a2);
    const double R = std::sqrt(depth) * d;
    // Even state of the centred well: z tan z = sqrt(R^2 - z^2), z = k d.
    auto f = [R](double z) { return z * std::sin(z) - std::sqrt(std::max(0.0, R * R - z * z)) * std::cos(z); };
    double lo = 0.0, hi = std::min(R, std::numbers::pi / 2);
    for (int it = 0; it < 400 && hi - lo > 1e-17 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    const double z = 0.5 * (lo + hi);
    GroundState g;
    g.analytic_ = true;
    g.k_ = z / d;
    g.kappa0 = std::sqrt(std::max(0.0, R * R - z * z)) / d;
    g.epsilon0 = -g.kappa0 * g.kappa0;
    g.center_ = c;
    g.half_ = d;
    g.a_ = halfwidth;
    g.amp_ = 1.0 / std::sqrt(d + std::sin(2.0 * z) / (2.0 * g.k_) + std::cos(z) * std::cos(z) / g.kappa0);
    const double edge = g.amp_ * std::cos(z);
    g.tail_right = edge * std::exp(g.kappa0 * (c + d));
    g.tail_left = edge * std::exp(g.kappa0 * (d - c));
    g.error_estimate = 1e-14 * std::max(1.0, std::abs(g.epsilon0));
    g.method = "analytic";
    constexpr int samples = 401;
    for (int i = 0; i < samples; ++i) {
        const double x = -halfwidth + 2.0 * halfwidth * i / (samples - 1);
        g.u.push_back(x);
        g.phi.push_back(g.phi_at(x));
    }
    return g;
}

GroundState solve_ground_state_numeric(const TransverseWell& well, int steps_across) {
    const double a = well.halfwidth();
    const double sup = well.sup_norm();
    const auto pieces = well.support_pieces();
    const auto [origin, h0] = aligned_step(pieces, steps_across);

    // Domain from a deliberately small decay-rate guess, then from a coarse solve.
    const double alpha = well_integral(well);
    const double kappa_guess = 0.5 * std::min(0.5 * alpha, std::sqrt(sup));
    const double e_coarse = lowest_bound_energy(dirichlet_grid(well, origin, h0, a + 30.0 / kappa_guess), sup);
    const double L = a + 30.0 / std::sqrt(-e_coarse);

    std::array<double, 3> e{};
    FdGrid finest;
    for (int lvl = 0; lvl < 3; ++lvl) {
        FdGrid g = dirichlet_grid(well, origin, h0 / static_cast<double>(1 << lvl), L);
        e[lvl] = lowest_bound_energy(g, sup);
        if (lvl == 2) finest = std::move(g);
    }
    const double r1 = (4.0 * e[1] - e[0]) / 3.0;
    const double r2 = (4.0 * e[2] - e[1]) / 3.0;
    const double r3 = (16.0 * r2 - r1) / 15.0;

    GroundState gs;
    gs.epsilon0 = r3;
    gs.kappa0 = std::sqrt(-r3);
    gs.error_estimate = std::abs(r3 - r2) + 1e-12 * std::abs(r3);
    gs.method = "fd";
    gs.a_ = a;
    gs.grid_origin_ = finest.first;
    gs.grid_step_ = finest.h;
    gs.grid_phi_ = inverse_iteration(finest.diag, -1.0 / (finest.h * finest.h), e[2]);

    // Tails are pure exponentials beyond the support of V.
    const double right_edge = a, left_edge = -a;
    const double phi_r = gs.phi_at(right_edge), phi_l = gs.phi_at(left_edge);
    gs.tail_right = phi_r * std::exp(gs.kappa0 * right_edge);
    gs.tail_left = phi_l * std::exp(-gs.kappa0 * left_edge);

    std::vector<double> cuts{-a};
    for (double p : pieces)
        if (p > -a && p < a) cuts.push_back(p);
    cuts.push_back(a);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const auto rule = composite_rule(refine_to_length(cuts, 4.0 * finest.h), cached_gauss_legendre(8));
    double nrm2 = rule.integrate([&](double x) { return gs.phi_at(x) * gs.phi_at(x); });
    const double decay = std::exp(-2.0 * gs.kappa0 * a) / (2.0 * gs.kappa0);
    nrm2 += (gs.tail_left * gs.tail_left + gs.tail_right * gs.tail_right) * decay;
    const double scale = 1.0 / std::sqrt(nrm2);
    for (double& v : gs.grid_phi_) v *= scale;
    gs.tail_left *= scale;
    gs.tail_right *= scale;

    constexpr int samples = 401;
    for (int i = 0; i < samples; ++i) {
        const double x = -a + 2.0 * a * i / (samples - 1);
        gs.u.push_back(x);
        gs.phi.push_back(gs.phi_at(x));
    }
    return gs;
}

GroundState solve_ground_state(const TransverseWell& well, const GroundStateOptions& options) {
    if (well.kind() == WellKind::flat_bottom && !options.force_numeric)
        return flat_bottom_ground_state(well.depth(), well.a1(), well.a2(), well.halfwidth());
    return solve_ground_state_numeric(well, options.steps_across);
}

std::vector<double> weighted_ground_function(const GroundState& state, const TransverseWell& well) {
    std::vector<double> g(state.u.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::sqrt(well(state.u[i])) * state.phi[i];
    return g;
}

double neumann_threshold(const TransverseWell& well, double u1) {
    const double a = well.halfwidth();
    if (!(u1 >= a)) throw DomainError("neumann_threshold: need u1 >= a");
    // Cell-centred grid on (-u1, u1): walls sit halfway between a node and its
    // mirror image. Pick the resolution so that jumps of V also fall midway.
    const auto pieces = well.support_pieces();
    const double h_target = aligned_step(pieces, 50).second;
    long n0 = std::max(8L, static_cast<long>(std::ceil(2.0 * u1 / h_target)));
    long best = n0;
    for (long n = n0; n < n0 + 4096; ++n) {
        const double h = 2.0 * u1 / static_cast<double>(n);
        bool aligned = true;
        for (double j : pieces) {
            const double t = (j + u1) / h;
            aligned = aligned && std::abs(t - std::round(t)) < 1e-7;
        }
        if (aligned) {
            best = n;
            break;
        }
    }
    std::array<double, 3> e{};
    for (int lvl = 0; lvl < 3; ++lvl) {
        const long n = best << lvl;
        const double h = 2.0 * u1 / static_cast<double>(n);
        const double inv = 1.0 / (h * h);
        std::vector<double> diag(static_cast<std::size_t>(n));
        for (long k = 0; k < n; ++k) diag[static_cast<std::size_t>(k)] = 2.0 * inv - well(-u1 + (static_cast<double>(k) + 0.5) * h);
        diag.front() -= inv;
        diag.back() -= inv;
        e[lvl] = lowest_tridiagonal_eigenvalue(diag, -inv, -well.sup_norm() - 1e-12, 4.0 * inv);
    }
    const double r1 = (4.0 * e[1] - e[0]) / 3.0;
    const double r2 = (4.0 * e[2] - e[1]) / 3.0;
    return (16.0 * r2 - r1) / 15.0;
}

}  // namespace softguide
