#include "softguide/bs_engine.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "softguide/errors.hpp"
#include "softguide/lanczos.hpp"
#include "softguide/parallel.hpp"
#include "softguide/special_math.hpp"

namespace softguide {

namespace {

constexpr double inv_two_pi = 0.5 / std::numbers::pi;
constexpr int cheb_points = 24;

// Chebyshev extreme points cos(pi j / 23) and their barycentric weights.
struct ChebNodes {
    std::array<double, cheb_points> x{}, w{};
    ChebNodes() {
        for (int j = 0; j < cheb_points; ++j) {
            x[j] = std::cos(std::numbers::pi * j / (cheb_points - 1));
            w[j] = (j % 2 == 0 ? 1.0 : -1.0) * ((j == 0 || j == cheb_points - 1) ? 0.5 : 1.0);
        }
    }
};
const ChebNodes cheb_nodes;

// Barycentric Lagrange basis on the nodes of an n-point Gauss rule in [-1, 1].
struct LagrangeBasis {
    std::vector<double> x, w;

    explicit LagrangeBasis(const QuadratureRule& rule) : x(rule.nodes), w(rule.size(), 1.0) {
        for (std::size_t a = 0; a < x.size(); ++a)
            for (std::size_t b = 0; b < x.size(); ++b)
                if (a != b) w[a] /= x[a] - x[b];
    }

    void eval(double t, double* out) const {
        double denom = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a) {
            if (t == x[a]) {
                std::fill(out, out + x.size(), 0.0);
                out[a] = 1.0;
                return;
            }
            out[a] = w[a] / (t - x[a]);
            denom += out[a];
        }
        for (std::size_t a = 0; a < x.size(); ++a) out[a] /= denom;
    }
};

// Near-field split K0(kappa r) = -ln(r) g(kappa r) + F(kappa, r) with g the
// Taylor polynomial of I0 through (z/2)^(2 m). Using I0 itself makes the
// product rule interpolate exp(kappa r) across a panel, which fails for
// kappa well above kappa0; the truncated g stays polynomial and F is still
// C^(2m+1) at r = 0.
constexpr int split_order = 3;

double split_weight(double z) {
    const double t = 0.25 * z * z;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= split_order; ++k) {
        term *= t / (static_cast<double>(k) * k);
        sum += term;
    }
    return sum;
}

double split_regular(double kappa, double r) {
    const double z = kappa * r;
    if (r == 0.0) return k0_regular_part(kappa, 0.0);
    if (z < 2.0) {
        // F = (K0 + ln r I0) - ln r (I0 - g), the tail summed directly.
        const double t = 0.25 * z * z;
        double term = 1.0;
        for (int k = 1; k <= split_order; ++k) term *= t / (static_cast<double>(k) * k);
        double tail = 0.0;
        for (int k = split_order + 1; k < 60; ++k) {
            term *= t / (static_cast<double>(k) * k);
            tail += term;
            if (term < 1e-18 * tail) break;
        }
        return k0_regular_part(kappa, r) - std::log(r) * tail;
    }
    return macdonald_k0(z) + std::log(r) * split_weight(z);
}

struct QuadPoint {
    double s, u, w;
};

// Tensor Gauss rule on a rectangle.
void tensor_leaf(double s1, double s2, double u1, double u2, std::vector<QuadPoint>& out) {
    const auto& g = cached_gauss_legendre(10);
    const double hs = 0.5 * (s2 - s1), hu = 0.5 * (u2 - u1);
    for (std::size_t a = 0; a < g.size(); ++a)
        for (std::size_t b = 0; b < g.size(); ++b)
            out.push_back({s1 + hs * (1.0 + g.nodes[a]), u1 + hu * (1.0 + g.nodes[b]), hs * hu * g.weights[a] * g.weights[b]});
}

// Rectangle not containing q: split while q is close relative to the size.
void adaptive_rect(double s1, double s2, double u1, double u2, double qs, double qu, std::vector<QuadPoint>& out,
                   int depth = 0) {
    const double ds = std::max({s1 - qs, 0.0, qs - s2});
    const double du = std::max({u1 - qu, 0.0, qu - u2});
    const double dist = std::hypot(ds, du), diam = std::hypot(s2 - s1, u2 - u1);
    if (dist < 0.7 * diam && depth < 40) {
        const double sm = 0.5 * (s1 + s2), um = 0.5 * (u1 + u2);
        adaptive_rect(s1, sm, u1, um, qs, qu, out, depth + 1);
        adaptive_rect(s1, sm, um, u2, qs, qu, out, depth + 1);
        adaptive_rect(sm, s2, u1, um, qs, qu, out, depth + 1);
        adaptive_rect(sm, s2, um, u2, qs, qu, out, depth + 1);
        return;
    }
    tensor_leaf(s1, s2, u1, u2, out);
}

// Rectangle with corner q and opposite corner q + (A, B): two Duffy
// triangles with t = tau^2 grading toward q.
void duffy_corner(double qs, double qu, double A, double B, std::vector<QuadPoint>& out) {
    const auto& g = cached_gauss_legendre(16);
    const double jac = std::abs(A * B);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double tau = 0.5 * (g.nodes[i] + 1.0);
        const double t = tau * tau, wt = g.weights[i] * tau;  // 0.5 w * 2 tau
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double v = 0.5 * (g.nodes[k] + 1.0), wv = 0.5 * g.weights[k];
            const double w = wt * wv * jac * t;
            out.push_back({qs + A * t, qu + B * t * v, w});
            out.push_back({qs + A * t * v, qu + B * t, w});
        }
    }
}

void corner_rect(double qs, double qu, double A, double B, std::vector<QuadPoint>& out) {
    const double a = std::abs(A), b = std::abs(B);
    if (a > 2.0 * b) {
        const double sa = std::copysign(b, A);
        duffy_corner(qs, qu, sa, B, out);
        adaptive_rect(std::min(qs + sa, qs + A), std::max(qs + sa, qs + A), std::min(qu, qu + B), std::max(qu, qu + B),
                      qs, qu, out);
    } else if (b > 2.0 * a) {
        const double sb = std::copysign(a, B);
        duffy_corner(qs, qu, A, sb, out);
        adaptive_rect(std::min(qs, qs + A), std::max(qs, qs + A), std::min(qu + sb, qu + B), std::max(qu + sb, qu + B),
                      qs, qu, out);
    } else {
        duffy_corner(qs, qu, A, B, out);
    }
}

// Quadrature for integrands with a log singularity at q over the rectangle.
void singular_rect(double s1, double s2, double u1, double u2, double qs, double qu, std::vector<QuadPoint>& out) {
    const double ts = 1e-14 * (1.0 + std::abs(qs)), tu = 1e-14 * (1.0 + std::abs(qu));
    const bool inside = qs >= s1 - ts && qs <= s2 + ts && qu >= u1 - tu && qu <= u2 + tu;
    if (!inside) {
        adaptive_rect(s1, s2, u1, u2, qs, qu, out);
        return;
    }
    qs = std::clamp(qs, s1, s2);
    qu = std::clamp(qu, u1, u2);
    for (double se : {s1, s2})
        for (double ue : {u1, u2}) {
            const double A = se - qs, B = ue - qu;
            if (std::abs(A) > ts && std::abs(B) > tu) corner_rect(qs, qu, A, B, out);
        }
}

std::vector<double> panel_lengths_split(std::vector<double> marks, double lo, double hi, double bend_lo, double bend_hi,
                                        double arm_length, double bend_length) {
    marks.push_back(lo);
    marks.push_back(hi);
    if (bend_hi > bend_lo) {
        marks.push_back(bend_lo);
        marks.push_back(bend_hi);
    }
    std::vector<double> pts;
    for (double m : marks)
        if (m >= lo && m <= hi) pts.push_back(m);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(), [](double x, double y) { return std::abs(x - y) < 1e-13; }),
              pts.end());
    std::vector<double> out{pts.front()};
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double a = pts[k], b = pts[k + 1];
        const bool bend = a >= bend_lo - 1e-13 && b <= bend_hi + 1e-13;
        const double len = bend ? std::min(bend_length, arm_length) : arm_length;
        const int n = std::max(1, static_cast<int>(std::ceil((b - a) / len - 1e-9)));
        for (int i = 1; i < n; ++i) out.push_back(a + (b - a) * i / n);
        out.push_back(b);
    }
    return out;
}

std::vector<double> subdivide(const std::vector<double>& br, int parts) {
    std::vector<double> out{br.front()};
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
        for (int i = 1; i < parts; ++i) out.push_back(br[k] + (br[k + 1] - br[k]) * i / parts);
        out.push_back(br[k + 1]);
    }
    return out;
}

struct NodeRule {
    std::vector<double> nodes, weights;
    std::vector<int> panel;
};

NodeRule panel_rule(const std::vector<double>& br, int order) {
    const auto& g = cached_gauss_legendre(order);
    NodeRule r;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
        const double h = 0.5 * (br[k + 1] - br[k]), m = 0.5 * (br[k + 1] + br[k]);
        for (std::size_t a = 0; a < g.size(); ++a) {
            r.nodes.push_back(m + h * g.nodes[a]);
            r.weights.push_back(h * g.weights[a]);
            r.panel.push_back(static_cast<int>(k));
        }
    }
    return r;
}

}  // namespace

NystromGrids NystromGrids::resolved(double kappa0, const CurvatureProfile& profile) const {
    if (!(kappa0 > 0.0)) throw DomainError("NystromGrids: kappa0 must be positive");
    NystromGrids g = *this;
    const double base = std::min(1.6 / kappa0, 2.0);
    if (g.s_panel_length <= 0.0) g.s_panel_length = base;
    if (g.u_panel_length <= 0.0) g.u_panel_length = base;
    if (g.bend_panel_length <= 0.0) {
        double bend = g.s_panel_length;
        if (profile.sup_abs() > 0.0) bend = std::min(bend, 0.5 / profile.sup_abs());
        if (profile.width() > 0.0) bend = std::min(bend, 0.5 * profile.width());
        g.bend_panel_length = bend;
    }
    if (g.subdivision < 1) throw DomainError("NystromGrids: subdivision must be at least 1");
    if (g.s_order < 2 || g.u_order < 2) throw DomainError("NystromGrids: panel order must be at least 2");
    return g;
}

NystromGrids NystromGrids::refined(double kappa0, const CurvatureProfile& profile) const {
    NystromGrids g = resolved(kappa0, profile);
    g.subdivision *= 2;
    return g;
}

double default_truncation(const CurvatureProfile& profile, double kappa) {
    if (!(kappa > 0.0)) throw DomainError("default_truncation: kappa must be positive");
    return profile.effective_extent() + 23.0 / kappa;
}

// ---------------------------------------------------------------- fiber

FiberOperator fiber_operator(const TransverseWell& well, double kappa, double p, int n) {
    if (!(kappa > 0.0) || n < 1) throw DomainError("fiber_operator: need kappa > 0 and n >= 1");
    const auto pieces = well.support_pieces();
    const double total = pieces.back() - pieces.front();
    const int order = std::min(8, n);
    const int panels = std::max(1, n / order);
    std::vector<double> br{pieces.front()};
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
        const double len = pieces[k + 1] - pieces[k];
        const int m = std::max(1, static_cast<int>(std::lround(panels * len / total)));
        for (int i = 1; i <= m; ++i) br.push_back(pieces[k] + len * i / m);
    }
    const auto rule = panel_rule(br, order);
    FiberOperator op;
    op.kappa = kappa;
    op.p = p;
    op.nodes = rule.nodes;
    op.weights = rule.weights;
    const double mu = std::sqrt(kappa * kappa + p * p);
    const auto m = static_cast<Eigen::Index>(op.nodes.size());
    Eigen::VectorXd root(m);
    for (Eigen::Index i = 0; i < m; ++i) root[i] = std::sqrt(op.weights[i] * well(op.nodes[i]));
    op.matrix.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            op.matrix(i, j) = root[i] * root[j] * std::exp(-mu * std::abs(op.nodes[i] - op.nodes[j])) / (2.0 * mu);
    return op;
}

double fiber_top_eigenvalue(const TransverseWell& well, double kappa, double p, int n) {
    return top_eigenvalue(fiber_operator(well, kappa, p, n).matrix).value;
}

bool StraightCheckReport::passed(double tol) const { return residual < tol; }

StraightCheckReport straight_bs_check(const TransverseWell& well, const GroundState& state, int n) {
    const auto op = fiber_operator(well, state.kappa0, 0.0, n);
    const auto top = top_eigenvalue(op.matrix);
    StraightCheckReport rep;
    rep.nodes = static_cast<int>(op.nodes.size());
    rep.lambda_max = top.value;
    rep.residual = std::abs(top.value - 1.0);
    Eigen::VectorXd g0(op.matrix.rows());
    for (Eigen::Index i = 0; i < g0.size(); ++i)
        g0[i] = std::sqrt(op.weights[i] * well(op.nodes[i])) * state.phi_at(op.nodes[i]);
    rep.cosine_similarity = std::abs(g0.dot(top.vector)) / (g0.norm() * top.vector.norm());
    for (double frac : {0.25, 0.5, 0.75}) {
        const double p = frac * state.kappa0;
        const double kappa = std::sqrt(state.kappa0 * state.kappa0 - p * p);
        rep.spectrum_line.push_back({p, kappa, fiber_top_eigenvalue(well, kappa, p, n)});
    }
    return rep;
}

// ---------------------------------------------------------------- Lanczos

std::vector<EigenResult> top_eigenpairs(const Eigen::MatrixXd& matrix, int count, double tol) {
    const Eigen::Index n = matrix.rows();
    if (n == 0 || matrix.cols() != n) throw DomainError("top_eigenpairs: matrix must be square and nonempty");
    const auto pairs = lanczos_largest(
        n, [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y.noalias() = matrix * x; }, count, tol, 600, 2);
    std::vector<EigenResult> out;
    for (const auto& p : pairs) {
        EigenResult r;
        r.value = p.value;
        r.vector = p.vector;
        const double scale = std::abs(r.value) > 0.0 ? std::abs(r.value) : 1.0;
        r.residual = (matrix * r.vector - r.value * r.vector).norm() / scale;
        r.iterations = p.steps;
        r.converged = r.residual <= tol;
        out.push_back(std::move(r));
    }
    return out;
}

EigenResult top_eigenvalue(const Eigen::MatrixXd& matrix, double tol) {
    auto r = top_eigenpairs(matrix, 1, tol);
    if (!r.front().converged)
        throw ToleranceError("top_eigenvalue: Lanczos stopped with relative residual " +
                             std::to_string(r.front().residual) + " after " + std::to_string(r.front().iterations) +
                             " steps");
    return std::move(r.front());
}

// ---------------------------------------------------------------- Nystrom discretisation

struct BSDiscretization::Impl {
    CurvatureProfile profile = CurvatureProfile::zero();
    bool straight = true;
    double S = 0.0;
    std::vector<double> sb, ub;
    int ps = 8, pu = 8;
    int threads = 1;
    std::size_t ns = 0, nu = 0, n_spanels = 0;
    std::vector<double> s_nodes, u_nodes, u_weights;
    std::vector<int> u_panel;
    std::vector<StripCoords> nodes;
    std::vector<double> weights, W, sqrt_w, sqrt_Ww;
    std::vector<Vec2> X;
    std::optional<PlanarCurve> curve;
    double primitive0 = 0.0;
    // Chebyshev samples of Gamma on each s-panel.
    std::vector<std::array<Vec2, cheb_points>> cheb;
    LagrangeBasis basis_s, basis_u;
    // Symmetrised near-field log moments, per target, over its near range.
    std::vector<std::size_t> mu_offset;
    std::vector<double> mu;

    Impl(int s_order, int u_order)
        : basis_s(cached_gauss_legendre(s_order)), basis_u(cached_gauss_legendre(u_order)) {}

    [[nodiscard]] std::size_t spanel_of(std::size_t i) const { return (i / nu) / static_cast<std::size_t>(ps); }
    [[nodiscard]] std::size_t near_begin(std::size_t i) const {
        const std::size_t k = spanel_of(i);
        return (k == 0 ? 0 : k - 1) * static_cast<std::size_t>(ps) * nu;
    }
    [[nodiscard]] std::size_t near_end(std::size_t i) const {
        const std::size_t k = spanel_of(i);
        return std::min(n_spanels, k + 2) * static_cast<std::size_t>(ps) * nu;
    }

    [[nodiscard]] Vec2 gamma_on_panel(std::size_t k, double s) const {
        const double lo = sb[k], hi = sb[k + 1];
        const double t = (2.0 * s - lo - hi) / (hi - lo);
        double num_x = 0.0, num_y = 0.0, den = 0.0;
        for (int j = 0; j < cheb_points; ++j) {
            const double xj = cheb_nodes.x[j];
            if (t == xj) return cheb[k][j];
            const double c = cheb_nodes.w[j] / (t - xj);
            num_x += c * cheb[k][j].x;
            num_y += c * cheb[k][j].y;
            den += c;
        }
        return {num_x / den, num_y / den};
    }

    [[nodiscard]] Vec2 point(std::size_t k, double s, double u) const {
        if (straight) return {s, u};
        const double beta = profile.primitive(s) - primitive0;
        const Vec2 g = gamma_on_panel(k, s);
        return {g.x + u * std::sin(beta), g.y + u * std::cos(beta)};
    }

    // Integrals of ln|X(y) - target| times the product basis of node j over
    // the rectangles of s-panels [k_lo, k_hi), for j in that node range.
    void log_moments(double qs, double qu, Vec2 target, std::size_t k_lo, std::size_t k_hi,
                     std::vector<double>& out, std::vector<QuadPoint>& pts) const {
        const std::size_t begin = k_lo * ps * nu;
        out.assign((k_hi - k_lo) * ps * nu, 0.0);
        std::vector<double> Ls(ps), Lu(pu);
        const std::size_t u_panels = ub.size() - 1;
        for (std::size_t k = k_lo; k < k_hi; ++k)
            for (std::size_t m = 0; m < u_panels; ++m) {
                pts.clear();
                singular_rect(sb[k], sb[k + 1], ub[m], ub[m + 1], qs, qu, pts);
                const double sl = sb[k], sh = sb[k + 1], ul = ub[m], uh = ub[m + 1];
                for (const auto& qp : pts) {
                    const Vec2 x = point(k, qp.s, qp.u);
                    const double r = std::hypot(x.x - target.x, x.y - target.y);
                    const double f = qp.w * std::log(r);
                    basis_s.eval((2.0 * qp.s - sl - sh) / (sh - sl), Ls.data());
                    basis_u.eval((2.0 * qp.u - ul - uh) / (uh - ul), Lu.data());
                    for (int a = 0; a < ps; ++a) {
                        const double fa = f * Ls[a];
                        double* row = out.data() + ((k * ps + a) * nu + m * pu) - begin;
                        for (int b = 0; b < pu; ++b) row[b] += fa * Lu[b];
                    }
                }
            }
    }

    [[nodiscard]] double far_entry(std::size_t i, std::size_t j, double kappa) const {
        const double r = std::hypot(X[i].x - X[j].x, X[i].y - X[j].y);
        return inv_two_pi * sqrt_Ww[i] * sqrt_Ww[j] * macdonald_k0(kappa * r);
    }

    [[nodiscard]] double near_entry(std::size_t i, std::size_t j, double kappa) const {
        const double r = std::hypot(X[i].x - X[j].x, X[i].y - X[j].y);
        const double m = mu[mu_offset[i] + (j - near_begin(i))];
        return inv_two_pi * std::sqrt(W[i] * W[j]) *
               (sqrt_w[i] * sqrt_w[j] * split_regular(kappa, r) - m * split_weight(kappa * r));
    }

    [[nodiscard]] double entry(std::size_t i, std::size_t j, double kappa) const {
        if (j >= near_begin(i) && j < near_end(i)) return near_entry(i, j, kappa);
        return far_entry(i, j, kappa);
    }

    void build_geometry() {
        const double extra = 2.0 * (sb.back() - sb.front()) / static_cast<double>(n_spanels) + 1.0 +
                             std::max(std::abs(ub.front()), std::abs(ub.back()));
        double step = 0.01;
        if (profile.sup_abs() > 0.0) step = std::min(step, 0.05 / profile.sup_abs());
        curve.emplace(profile, 0.0, Vec2{}, ArcGrid{sb.front() - extra, sb.back() + extra, step});
        primitive0 = profile.primitive(0.0);
        cheb.assign(n_spanels, {});
        if (!straight)
            for (std::size_t k = 0; k < n_spanels; ++k)
                for (int j = 0; j < cheb_points; ++j) {
                    const double t = cheb_nodes.x[j];
                    cheb[k][j] = curve->position(0.5 * (sb[k] + sb[k + 1]) + 0.5 * (sb[k + 1] - sb[k]) * t);
                }
    }

    void build_nodes(const TransverseWell* well, const std::vector<double>* W_source) {
        const auto srule = panel_rule(sb, ps);
        const auto urule = panel_rule(ub, pu);
        s_nodes = srule.nodes;
        u_nodes = urule.nodes;
        u_weights = urule.weights;
        u_panel = urule.panel;
        ns = s_nodes.size();
        nu = u_nodes.size();
        n_spanels = sb.size() - 1;
        build_geometry();
        const std::size_t N = ns * nu;
        nodes.resize(N);
        weights.resize(N);
        W.resize(N);
        sqrt_w.resize(N);
        sqrt_Ww.resize(N);
        X.resize(N);
        for (std::size_t a = 0; a < ns; ++a)
            for (std::size_t b = 0; b < nu; ++b) {
                const std::size_t i = a * nu + b;
                nodes[i] = {s_nodes[a], u_nodes[b]};
                weights[i] = srule.weights[a] * u_weights[b];
                if (W_source) {
                    W[i] = (*W_source)[i];
                } else {
                    const double jac = straight ? 1.0 : 1.0 + u_nodes[b] * profile.curvature(s_nodes[a]);
                    W[i] = jac * (*well)(u_nodes[b]);
                }
                sqrt_w[i] = std::sqrt(weights[i]);
                sqrt_Ww[i] = std::sqrt(W[i] * weights[i]);
                X[i] = point(static_cast<std::size_t>(srule.panel[a]), s_nodes[a], u_nodes[b]);
            }
    }

    void build_moments() {
        const std::size_t N = nodes.size();
        mu_offset.assign(N + 1, 0);
        for (std::size_t i = 0; i < N; ++i) mu_offset[i + 1] = mu_offset[i] + (near_end(i) - near_begin(i));
        std::vector<double> lam(mu_offset[N]);
        parallel_for(N, threads, [&](std::size_t i) {
            thread_local std::vector<QuadPoint> pts;
            std::vector<double> out;
            const std::size_t k = spanel_of(i);
            log_moments(nodes[i].s, nodes[i].u, X[i], k == 0 ? 0 : k - 1, std::min(n_spanels, k + 2), out, pts);
            std::copy(out.begin(), out.end(), lam.begin() + static_cast<std::ptrdiff_t>(mu_offset[i]));
        });
        mu.assign(mu_offset[N], 0.0);
        parallel_for(N, threads, [&](std::size_t i) {
            const std::size_t b = near_begin(i);
            for (std::size_t j = b; j < near_end(i); ++j) {
                const double lij = lam[mu_offset[i] + (j - b)];
                const double lji = lam[mu_offset[j] + (i - near_begin(j))];
                mu[mu_offset[i] + (j - b)] = 0.5 * (sqrt_w[i] / sqrt_w[j] * lij + sqrt_w[j] / sqrt_w[i] * lji);
            }
        });
    }
};

BSDiscretization::BSDiscretization(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
BSDiscretization::~BSDiscretization() = default;
BSDiscretization::BSDiscretization(BSDiscretization&&) noexcept = default;
BSDiscretization& BSDiscretization::operator=(BSDiscretization&&) noexcept = default;

BSDiscretization::BSDiscretization(const CurvatureProfile& profile, const TransverseWell& well, double S,
                                   std::vector<double> s_breakpoints, std::vector<double> u_breakpoints, int s_order,
                                   int u_order, int threads) {
    if (!(S > 0.0)) throw DomainError("BSDiscretization: truncation S must be positive");
    if (!(well.halfwidth() * profile.sup_abs() < 1.0))
        throw DomainError("BSDiscretization: a sup|gamma| must be below 1");
    if (s_breakpoints.size() < 2 || u_breakpoints.size() < 2 ||
        !std::is_sorted(s_breakpoints.begin(), s_breakpoints.end()) ||
        !std::is_sorted(u_breakpoints.begin(), u_breakpoints.end()))
        throw DomainError("BSDiscretization: breakpoints must be sorted with at least two entries");
    auto impl = std::make_unique<Impl>(s_order, u_order);
    impl->profile = profile;
    impl->straight = profile.is_straight();
    impl->S = S;
    impl->sb = std::move(s_breakpoints);
    impl->ub = std::move(u_breakpoints);
    impl->ps = s_order;
    impl->pu = u_order;
    impl->threads = std::max(1, threads);
    impl->build_nodes(&well, nullptr);
    impl->build_moments();
    impl_ = std::move(impl);
}

BSDiscretization BSDiscretization::build(const CurvatureProfile& profile, const TransverseWell& well, double S,
                                         const NystromGrids& grids) {
    const double lo = -S, hi = S;
    double bend_lo = 0.0, bend_hi = 0.0;
    if (!profile.is_straight()) {
        const double e = profile.effective_extent();
        bend_lo = std::max(lo, -e);
        bend_hi = std::min(hi, e);
    }
    const auto sb = subdivide(panel_lengths_split(profile.breakpoints(), lo, hi, bend_lo, bend_hi,
                                                  grids.s_panel_length, grids.bend_panel_length),
                              grids.subdivision);
    const auto ub = subdivide(refine_to_length(well.support_pieces(), grids.u_panel_length).breakpoints,
                              grids.subdivision);
    return BSDiscretization(profile, well, S, sb, ub, grids.s_order, grids.u_order, grids.threads);
}

BSDiscretization BSDiscretization::straight_companion() const {
    auto impl = std::make_unique<Impl>(impl_->ps, impl_->pu);
    impl->profile = CurvatureProfile::zero();
    impl->straight = true;
    impl->S = impl_->S;
    impl->sb = impl_->sb;
    impl->ub = impl_->ub;
    impl->ps = impl_->ps;
    impl->pu = impl_->pu;
    impl->threads = impl_->threads;
    // W = V: undo the Jacobian factor of the bent layout.
    std::vector<double> V(impl_->W.size());
    for (std::size_t i = 0; i < V.size(); ++i) {
        const double jac = impl_->straight ? 1.0 : 1.0 + impl_->nodes[i].u * impl_->profile.curvature(impl_->nodes[i].s);
        V[i] = impl_->W[i] / jac;
    }
    impl->build_nodes(nullptr, &V);
    impl->build_moments();
    return BSDiscretization(std::move(impl));
}

std::size_t BSDiscretization::size() const { return impl_->nodes.size(); }
double BSDiscretization::truncation() const { return impl_->S; }
const std::vector<double>& BSDiscretization::s_breakpoints() const { return impl_->sb; }
const std::vector<double>& BSDiscretization::u_breakpoints() const { return impl_->ub; }
const std::vector<StripCoords>& BSDiscretization::nodes() const { return impl_->nodes; }
const std::vector<double>& BSDiscretization::weights() const { return impl_->weights; }
const std::vector<double>& BSDiscretization::modified_potential() const { return impl_->W; }
const std::vector<Vec2>& BSDiscretization::positions() const { return impl_->X; }
const CurvatureProfile& BSDiscretization::profile() const { return impl_->profile; }
const PlanarCurve& BSDiscretization::curve() const { return *impl_->curve; }

Eigen::MatrixXd BSDiscretization::matrix(double kappa) const {
    if (!(kappa > 0.0)) throw DomainError("BSDiscretization::matrix: kappa must be positive");
    const std::size_t N = size();
    Eigen::MatrixXd M(N, N);
    // Column j >= i of row i is owned by the worker handling i.
    parallel_for(N, impl_->threads, [&](std::size_t i) {
        for (std::size_t j = i; j < N; ++j) {
            const double v = impl_->entry(i, j, kappa);
            M(i, j) = v;
            M(j, i) = v;
        }
    });
    return M;
}

double BSDiscretization::quadratic_form(double kappa, const Eigen::VectorXd& v) const {
    const std::size_t N = size();
    if (static_cast<std::size_t>(v.size()) != N) throw DomainError("quadratic_form: size mismatch");
    std::vector<double> rows(N, 0.0);
    parallel_for(N, impl_->threads, [&](std::size_t i) {
        double acc = impl_->entry(i, i, kappa) * v[i];
        for (std::size_t j = i + 1; j < N; ++j) acc += 2.0 * impl_->entry(i, j, kappa) * v[j];
        rows[i] = v[i] * acc;
    });
    double sum = 0.0;
    for (double r : rows) sum += r;
    return sum;
}

double BSDiscretization::difference_form(const BSDiscretization& other, double kappa, const Eigen::VectorXd& v) const {
    const std::size_t N = size();
    if (other.size() != N || static_cast<std::size_t>(v.size()) != N ||
        other.impl_->sb != impl_->sb || other.impl_->ub != impl_->ub)
        throw DomainError("difference_form: discretisations do not share a layout");
    const Impl& a = *impl_;
    const Impl& b = *other.impl_;
    std::vector<double> rows(N, 0.0);
    parallel_for(N, impl_->threads, [&](std::size_t i) {
        if (v[i] == 0.0) return;
        double acc = (a.entry(i, i, kappa) - b.entry(i, i, kappa)) * v[i];
        for (std::size_t j = i + 1; j < N; ++j) {
            if (v[j] == 0.0) continue;
            acc += 2.0 * (a.entry(i, j, kappa) - b.entry(i, j, kappa)) * v[j];
        }
        rows[i] = v[i] * acc;
    });
    double sum = 0.0;
    for (double r : rows) sum += r;
    return sum;
}

std::vector<double> BSDiscretization::reconstruct(const Eigen::VectorXd& v, double kappa,
                                                  std::span<const Vec2> points) const {
    const Impl& d = *impl_;
    const std::size_t N = size();
    if (static_cast<std::size_t>(v.size()) != N) throw DomainError("reconstruct: eigenvector size mismatch");
    std::vector<double> coef(N);
    for (std::size_t j = 0; j < N; ++j) coef[j] = inv_two_pi * std::sqrt(d.W[j]) * v[j] / d.sqrt_w[j];

    double u_reach = std::max(std::abs(d.ub.front()), std::abs(d.ub.back())) +
                     (d.ub.back() - d.ub.front()) / static_cast<double>(d.ub.size() - 1);
    if (d.profile.sup_abs() > 0.0) u_reach = std::min(u_reach, 0.9 / d.profile.sup_abs());

    std::vector<double> out(points.size(), 0.0);
    parallel_for(points.size(), d.threads, [&](std::size_t p) {
        const Vec2 x = points[p];
        std::optional<StripCoords> q;
        if (d.straight) {
            if (std::abs(x.y) < u_reach) q = StripCoords{x.x, x.y};
        } else {
            try {
                q = strip_coordinates_of(*d.curve, x, u_reach);
            } catch (const DomainError&) {
                q.reset();
            }
        }
        std::size_t near_lo = 0, near_hi = 0;
        std::vector<double> lam;
        if (q) {
            const auto it = std::upper_bound(d.sb.begin(), d.sb.end(), q->s);
            const std::size_t k = std::min<std::size_t>(
                d.n_spanels - 1, static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - d.sb.begin() - 1)));
            near_lo = k == 0 ? 0 : k - 1;
            near_hi = std::min(d.n_spanels, k + 2);
            std::vector<QuadPoint> pts;
            d.log_moments(q->s, q->u, x, near_lo, near_hi, lam, pts);
        }
        const std::size_t jb = near_lo * d.ps * d.nu, je = near_hi * d.ps * d.nu;
        double acc = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            const double r = std::hypot(x.x - d.X[j].x, x.y - d.X[j].y);
            if (j >= jb && j < je) {
                acc += coef[j] * (d.weights[j] * split_regular(kappa, r) - lam[j - jb] * split_weight(kappa * r));
            } else {
                acc += coef[j] * d.weights[j] * macdonald_k0(kappa * r);
            }
        }
        out[p] = acc;
    });
    return out;
}

// ---------------------------------------------------------------- drivers

BentBSMatrix bent_bs_matrix(const CurvatureProfile& profile, const TransverseWell& well, double kappa, double S,
                            const NystromGrids& grids) {
    if (!(kappa > 0.0)) throw DomainError("bent_bs_matrix: kappa must be positive");
    const double need = default_truncation(profile, kappa);
    if (S < need * (1.0 - 1e-12))
        throw DomainError("bent_bs_matrix: truncation too small, S = " + std::to_string(S) + " < " +
                          std::to_string(need));
    const auto disc = BSDiscretization::build(profile, well, S, grids.resolved(kappa, profile));
    BentBSMatrix out;
    out.kappa = kappa;
    out.S = S;
    out.u_nodes = static_cast<std::size_t>(grids.u_order) * (disc.u_breakpoints().size() - 1);
    out.s_nodes = disc.size() / out.u_nodes;
    out.matrix = disc.matrix(kappa);
    return out;
}

namespace {

double branch_value(const BSDiscretization& disc, double kappa, int branch, int& evaluations) {
    ++evaluations;
    const auto r = top_eigenpairs(disc.matrix(kappa), branch + 1);
    if (static_cast<int>(r.size()) <= branch) return 0.0;
    return r[branch].value;
}

}  // namespace

BoundStateSearch find_bound_states(const BSDiscretization& disc, const TransverseWell& well, const GroundState& state,
                                   int branches) {
    const double kappa0 = state.kappa0;
    const double need = default_truncation(disc.profile(), kappa0);
    if (disc.truncation() < need * (1.0 - 1e-12))
        throw DomainError("find_bound_states: truncation too small, S = " + std::to_string(disc.truncation()) +
                          " < " + std::to_string(need));
    BoundStateSearch out;
    out.kappa_lo = kappa0 * (1.0 + 1e-6);
    out.kappa_hi = kappa0 + std::sqrt(well.sup_norm());
    out.nodes = disc.size();
    out.S = disc.truncation();
    branches = std::max(1, branches);

    const auto start = top_eigenpairs(disc.matrix(out.kappa_lo), branches);
    ++out.evaluations;
    for (const auto& r : start) out.lambda_at_start.push_back(r.value);

    for (int b = 0; b < static_cast<int>(start.size()); ++b) {
        if (start[b].value <= 1.0) break;
        const double top_hi = branch_value(disc, out.kappa_hi, b, out.evaluations);
        if (top_hi > 1.0)
            throw ToleranceError("find_bound_states: bracketing failure, lambda = " + std::to_string(top_hi) +
                                 " > 1 at kappa cap " + std::to_string(out.kappa_hi));
        auto f = [&](double kappa) { return branch_value(disc, kappa, b, out.evaluations) - 1.0; };
        std::uintmax_t iters = 200;
        const auto [lo, hi] = boost::math::tools::toms748_solve(
            f, out.kappa_lo, out.kappa_hi, start[b].value - 1.0, top_hi - 1.0,
            [](double x, double y) { return std::abs(y - x) <= 1e-10; }, iters);
        BoundState st;
        st.kappa = 0.5 * (lo + hi);
        st.energy = -st.kappa * st.kappa;
        st.branch = b;
        auto pairs = top_eigenpairs(disc.matrix(st.kappa), b + 1);
        ++out.evaluations;
        st.lambda_residual = std::abs(pairs[b].value - 1.0);
        st.eigenvector = std::move(pairs[b].vector);
        out.states.push_back(std::move(st));
    }
    return out;
}

BoundStateSearch find_bound_states(const CurvatureProfile& profile, const TransverseWell& well,
                                   const GroundState& state, double S, const NystromGrids& grids, int branches) {
    const auto disc = BSDiscretization::build(profile, well, S, grids.resolved(state.kappa0, profile));
    return find_bound_states(disc, well, state, branches);
}

std::vector<LambdaSample> lambda_curve(const BSDiscretization& disc, double kappa_lo, double kappa_hi, int points) {
    if (points < 2 || !(kappa_lo > 0.0) || !(kappa_hi > kappa_lo)) throw DomainError("lambda_curve: bad range");
    std::vector<LambdaSample> out;
    for (int k = 0; k < points; ++k) {
        const double kappa = kappa_lo + (kappa_hi - kappa_lo) * k / (points - 1);
        out.push_back({kappa, top_eigenvalue(disc.matrix(kappa)).value});
    }
    return out;
}

Eigen::VectorXd ground_vector(const BSDiscretization& disc, const TransverseWell& well, const GroundState& state) {
    const auto& nodes = disc.nodes();
    const auto& w = disc.weights();
    Eigen::VectorXd v(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = std::sqrt(w[i] * well(nodes[i].u)) * state.phi_at(nodes[i].u);
    return v;
}

ConditionIntegral condition_integral(const CurvatureProfile& profile, const TransverseWell& well,
                                     const GroundState& state, double S, double tol, const NystromGrids& grids) {
    const double kappa0 = state.kappa0;
    const double need = default_truncation(profile, kappa0);
    if (S < need * (1.0 - 1e-12))
        throw DomainError("condition_integral: truncation too small, S = " + std::to_string(S) + " < " +
                          std::to_string(need));
    ConditionIntegral out;
    out.S = S;

    auto level = [&](const NystromGrids& g, std::size_t& nodes) {
        const auto bent = BSDiscretization::build(profile, well, S, g);
        const auto flat = bent.straight_companion();
        nodes = bent.size();
        const auto v = ground_vector(bent, well, state);
        return bent.difference_form(flat, kappa0, v);
    };
    out.coarse_value = level(grids.resolved(kappa0, profile), out.coarse_nodes);
    out.value = level(grids.refined(kappa0, profile), out.fine_nodes);
    out.error_estimate = std::abs(out.value - out.coarse_value);

    // ||phi0 V||^2 on a fine composite rule over the pieces of V.
    const auto rule =
        composite_rule(refine_to_length(well.support_pieces(), well.halfwidth() / 32.0), cached_gauss_legendre(16));
    out.normalization = rule.integrate([&](double u) {
        const double p = state.phi_at(u) * well(u);
        return p * p;
    });
    out.ratio = out.value / out.normalization;
    const double s_supp = profile.is_straight() ? 0.0 : profile.effective_extent();
    out.truncation_bound = out.normalization * std::exp(-kappa0 * (S - s_supp)) * (2.0 * s_supp + 2.0 / kappa0);
    out.certified = out.value > 10.0 * out.error_estimate;
    if (tol > 0.0 && out.error_estimate > tol)
        throw ToleranceError("condition_integral: estimated error " + std::to_string(out.error_estimate) +
                             " exceeds tolerance " + std::to_string(tol));
    return out;
}

OnCurveExcess on_curve_excess(const CurvatureProfile& profile, double kappa0, double S, double panel_length,
                              int threads) {
    if (!(kappa0 > 0.0) || !(S > 0.0)) throw DomainError("on_curve_excess: need kappa0 > 0 and S > 0");
    NystromGrids g;
    g.s_panel_length = panel_length;
    g = g.resolved(kappa0, profile);
    const auto support = profile.support_bound();
    double step = 0.01;
    if (profile.sup_abs() > 0.0) step = std::min(step, 0.05 / profile.sup_abs());
    const PlanarCurve curve(profile, 0.0, Vec2{}, ArcGrid{-S - 1.0, S + 1.0, step});

    auto level = [&](double arm, double bend, double& min_f) {
        double bend_lo = 0.0, bend_hi = 0.0;
        if (!profile.is_straight()) {
            bend_lo = std::max(-S, -profile.effective_extent());
            bend_hi = std::min(S, profile.effective_extent());
        }
        const auto br = panel_lengths_split(profile.breakpoints(), -S, S, bend_lo, bend_hi, arm, bend);
        const auto outer = panel_rule(br, 8);
        const auto& gl = cached_gauss_legendre(8);
        auto same_arm = [&](double s, double t) {
            if (!support) return false;
            return (s >= *support && t >= *support) || (s <= -*support && t <= -*support);
        };
        std::vector<double> rows(outer.nodes.size(), 0.0), mins(outer.nodes.size(), 0.0);
        parallel_for(outer.nodes.size(), threads, [&](std::size_t i) {
            const double s = outer.nodes[i];
            const std::size_t own = static_cast<std::size_t>(outer.panel[i]);
            double acc = 0.0, lowest = 0.0;
            auto integrand = [&](double t) {
                if (same_arm(s, t) || t == s) return 0.0;
                const double arc = std::abs(s - t);
                // Short chords from the frame integrals keep their relative accuracy.
                const double d2 = arc < 0.5 ? squared_distance(profile, {s, 0.0}, {t, 0.0})
                                            : dot(curve.position(s) - curve.position(t),
                                                  curve.position(s) - curve.position(t));
                const double chord = std::min(arc, std::sqrt(d2));
                const double f = macdonald_k0(kappa0 * chord) - macdonald_k0(kappa0 * arc);
                lowest = std::min(lowest, f);
                return f;
            };
            for (std::size_t k = 0; k + 1 < br.size(); ++k) {
                if (same_arm(s, br[k]) && same_arm(s, br[k + 1])) continue;
                if (k == own) {
                    const auto part = dyadic_partition(br[k], br[k + 1], s, 16);
                    acc += composite_rule(part, gl).integrate(integrand);
                } else {
                    const double h = 0.5 * (br[k + 1] - br[k]), m = 0.5 * (br[k + 1] + br[k]);
                    for (std::size_t a = 0; a < gl.size(); ++a) acc += h * gl.weights[a] * integrand(m + h * gl.nodes[a]);
                }
            }
            rows[i] = outer.weights[i] * acc;
            mins[i] = lowest;
        });
        double sum = 0.0;
        for (double r : rows) sum += r;
        for (double m : mins) min_f = std::min(min_f, m);
        return sum;
    };

    OnCurveExcess out;
    out.S = S;
    double min_f = 0.0;
    out.coarse_value = level(g.s_panel_length, g.bend_panel_length, min_f);
    out.value = level(0.5 * g.s_panel_length, 0.5 * g.bend_panel_length, min_f);
    out.error_estimate = std::abs(out.value - out.coarse_value);
    out.min_integrand = min_f;
    return out;
}

}  // namespace softguide
