#include "softguide/curve_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "softguide/errors.hpp"
#include "softguide/special_math.hpp"

namespace softguide {
namespace {

constexpr double pi = std::numbers::pi;

// Splits [lo, hi] at the given cut points and into pieces no longer than
// max_len, then applies a 16-point Gauss rule to each piece.
template <class F>
void for_each_piece_node(double lo, double hi, const std::vector<double>& cuts, double max_len, F&& f) {
    const auto& gl = cached_gauss_legendre(16);
    std::vector<double> pts{lo};
    for (double c : cuts)
        if (c > lo && c < hi) pts.push_back(c);
    pts.push_back(hi);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double a = pts[k], b = pts[k + 1];
        const int m = std::max(1, static_cast<int>(std::ceil((b - a) / max_len)));
        for (int j = 0; j < m; ++j) {
            const double pa = a + (b - a) * j / m, pb = a + (b - a) * (j + 1) / m;
            const double mid = 0.5 * (pa + pb), half = 0.5 * (pb - pa);
            for (std::size_t i = 0; i < gl.size(); ++i) f(mid + half * gl.nodes[i], half * gl.weights[i]);
        }
    }
}

double piece_length(const CurvatureProfile& p) {
    // Keep the turning angle per piece below half a radian.
    const double sup = p.sup_abs();
    return sup > 0.0 ? std::min(0.5, 0.5 / sup) : 0.5;
}

}  // namespace

std::string to_string(CurveFamily family) {
    switch (family) {
        case CurveFamily::zero: return "zero";
        case CurveFamily::smooth_bump: return "smooth_bump";
        case CurveFamily::gaussian: return "gaussian";
        case CurveFamily::tabulated: return "tabulated";
    }
    return "unknown";
}

CurvatureProfile CurvatureProfile::zero() { return CurvatureProfile{}; }

CurvatureProfile CurvatureProfile::smooth_bump(double amplitude, double half_support) {
    if (!std::isfinite(amplitude) || !(half_support > 0.0) || !std::isfinite(half_support))
        throw DomainError("smooth_bump: need finite amplitude and positive half-support");
    CurvatureProfile p;
    p.family_ = amplitude == 0.0 ? CurveFamily::zero : CurveFamily::smooth_bump;
    p.amplitude_ = amplitude;
    p.width_ = half_support;
    p.sup_ = std::abs(amplitude);
    if (p.family_ == CurveFamily::zero) p.width_ = 0.0;
    return p;
}

CurvatureProfile CurvatureProfile::gaussian(double amplitude, double width) {
    if (!std::isfinite(amplitude) || !(width > 0.0) || !std::isfinite(width))
        throw DomainError("gaussian: need finite amplitude and positive width");
    CurvatureProfile p;
    p.family_ = amplitude == 0.0 ? CurveFamily::zero : CurveFamily::gaussian;
    p.amplitude_ = amplitude;
    p.width_ = amplitude == 0.0 ? 0.0 : width;
    p.sup_ = std::abs(amplitude);
    return p;
}

CurvatureProfile CurvatureProfile::tabulated(std::vector<double> s, std::vector<double> gamma) {
    const std::size_t n = s.size();
    if (n < 2 || gamma.size() != n) throw DomainError("tabulated curvature: need >= 2 samples of equal length");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s[i]) || !std::isfinite(gamma[i])) throw DomainError("tabulated curvature: non-finite sample");
        if (i > 0 && !(s[i] > s[i - 1])) throw DomainError("tabulated curvature: s must increase strictly");
    }
    CurvatureProfile p;
    p.family_ = CurveFamily::tabulated;
    p.knots_ = std::move(s);
    p.values_ = std::move(gamma);

    // Natural spline: tridiagonal system for the interior second derivatives.
    const auto& x = p.knots_;
    const auto& y = p.values_;
    p.second_.assign(n, 0.0);
    if (n > 2) {
        std::vector<double> diag(n, 0.0), rhs(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            diag[i] = 2.0 * (x[i + 1] - x[i - 1]);
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]));
        }
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double sub = x[i] - x[i - 1];
            const double m = sub / diag[i - 1];
            diag[i] -= m * sub;
            rhs[i] -= m * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            const double sup = (i + 2 < n) ? (x[i + 1] - x[i]) * p.second_[i + 1] : 0.0;
            p.second_[i] = (rhs[i] - sup) / diag[i];
        }
    }
    p.cumulative_.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = x[i + 1] - x[i];
        p.cumulative_[i + 1] = p.cumulative_[i] + 0.5 * h * (y[i] + y[i + 1]) -
                               h * h * h / 24.0 * (p.second_[i] + p.second_[i + 1]);
    }
    double sup = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (int k = 0; k <= 64; ++k) sup = std::max(sup, std::abs(p.curvature(x[i] + (x[i + 1] - x[i]) * k / 64.0)));
    p.sup_ = sup;
    return p;
}

std::size_t CurvatureProfile::piece(double s) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
    const auto idx = static_cast<std::size_t>(std::distance(knots_.begin(), it));
    return std::clamp<std::size_t>(idx, 1, knots_.size() - 1) - 1;
}

double CurvatureProfile::curvature(double s) const {
    switch (family_) {
        case CurveFamily::zero: return 0.0;
        case CurveFamily::smooth_bump: {
            if (std::abs(s) > width_) return 0.0;
            const double c = std::cos(0.5 * pi * s / width_);
            return amplitude_ * c * c;
        }
        case CurveFamily::gaussian: {
            const double t = s / width_;
            return amplitude_ * std::exp(-t * t);
        }
        case CurveFamily::tabulated: {
            if (s < knots_.front() || s > knots_.back()) return 0.0;
            const std::size_t i = piece(s);
            const double h = knots_[i + 1] - knots_[i];
            const double A = (knots_[i + 1] - s) / h, B = 1.0 - A;
            return A * values_[i] + B * values_[i + 1] +
                   ((A * A * A - A) * second_[i] + (B * B * B - B) * second_[i + 1]) * h * h / 6.0;
        }
    }
    return 0.0;
}

double CurvatureProfile::derivative(double s, int order) const {
    if (order != 1 && order != 2) throw DomainError("curvature derivative: order must be 1 or 2");
    switch (family_) {
        case CurveFamily::zero: return 0.0;
        case CurveFamily::smooth_bump: {
            if (std::abs(s) > width_) return 0.0;
            const double w = pi / width_;
            return order == 1 ? -0.5 * amplitude_ * w * std::sin(w * s) : -0.5 * amplitude_ * w * w * std::cos(w * s);
        }
        case CurveFamily::gaussian: {
            const double g = curvature(s), w2 = width_ * width_;
            return order == 1 ? -2.0 * s / w2 * g : (4.0 * s * s / (w2 * w2) - 2.0 / w2) * g;
        }
        case CurveFamily::tabulated: {
            if (s < knots_.front() || s > knots_.back()) return 0.0;
            const std::size_t i = piece(s);
            const double h = knots_[i + 1] - knots_[i];
            const double A = (knots_[i + 1] - s) / h, B = 1.0 - A;
            if (order == 2) return A * second_[i] + B * second_[i + 1];
            return (values_[i + 1] - values_[i]) / h - (3.0 * A * A - 1.0) / 6.0 * h * second_[i] +
                   (3.0 * B * B - 1.0) / 6.0 * h * second_[i + 1];
        }
    }
    return 0.0;
}

double CurvatureProfile::primitive(double s) const {
    switch (family_) {
        case CurveFamily::zero: return 0.0;
        case CurveFamily::smooth_bump: {
            const double t = std::clamp(s, -width_, width_);
            return amplitude_ * (0.5 * t + width_ / (2.0 * pi) * std::sin(pi * t / width_));
        }
        case CurveFamily::gaussian:
            return amplitude_ * width_ * 0.5 * std::sqrt(pi) * std::erf(s / width_);
        case CurveFamily::tabulated: {
            // Primitive measured from the first knot; only differences matter.
            if (s <= knots_.front()) return 0.0;
            if (s >= knots_.back()) return cumulative_.back();
            const std::size_t i = piece(s);
            const double h = knots_[i + 1] - knots_[i];
            const double t = s - knots_[i];
            const double A = 1.0 - t / h, B = t / h;
            const double A2 = A * A, B2 = B * B;
            return cumulative_[i] + values_[i] * (t - 0.5 * t * t / h) + values_[i + 1] * 0.5 * t * t / h +
                   h * h / 6.0 *
                       (second_[i] * (0.25 * h * (1.0 - A2 * A2) - 0.5 * h * (1.0 - A2)) +
                        second_[i + 1] * (0.25 * h * B2 * B2 - 0.5 * h * B2));
        }
    }
    return 0.0;
}

double CurvatureProfile::sup_abs() const { return sup_; }

std::optional<double> CurvatureProfile::support_bound() const {
    switch (family_) {
        case CurveFamily::zero: return 0.0;
        case CurveFamily::smooth_bump: return width_;
        case CurveFamily::gaussian: return std::nullopt;
        case CurveFamily::tabulated: return std::max(std::abs(knots_.front()), std::abs(knots_.back()));
    }
    return std::nullopt;
}

double CurvatureProfile::effective_extent() const {
    if (auto b = support_bound()) return *b;
    const double ratio = std::abs(amplitude_) / 1e-12;
    return ratio > 1.0 ? width_ * std::sqrt(std::log(ratio)) : 0.0;
}

std::vector<double> CurvatureProfile::breakpoints() const {
    switch (family_) {
        case CurveFamily::smooth_bump: return {-width_, width_};
        case CurveFamily::tabulated: return knots_;
        default: return {};
    }
}

CurvatureProfile CurvatureProfile::mirrored() const {
    CurvatureProfile p = *this;
    p.amplitude_ = -amplitude_;
    for (double& v : p.values_) v = -v;
    for (double& v : p.second_) v = -v;
    for (double& v : p.cumulative_) v = -v;
    return p;
}

double turning_angle(const CurvatureProfile& profile, double s1, double s2) {
    if (s1 == s2) return 0.0;
    return profile.primitive(s2) - profile.primitive(s1);
}

PlanarCurve::PlanarCurve(CurvatureProfile profile, double s_ref, Vec2 x_ref, ArcGrid grid)
    : profile_(std::move(profile)), s_ref_(s_ref), x_ref_(x_ref), s_min_(grid.s_min) {
    if (!(grid.s_max > grid.s_min) || !(grid.step > 0.0))
        throw DomainError("reconstruct_curve: grid needs s_max > s_min and positive step");
    if (s_ref < grid.s_min || s_ref > grid.s_max) throw DomainError("reconstruct_curve: s_ref outside the grid");
    if (profile_.sup_abs() * grid.step >= 0.1)
        throw DomainError("reconstruct_curve: step too coarse, sup|gamma| * step = " +
                          std::to_string(profile_.sup_abs() * grid.step) + " >= 0.1");
    const auto n = static_cast<std::size_t>(std::ceil((grid.s_max - grid.s_min) / grid.step - 1e-9));
    step_ = (grid.s_max - grid.s_min) / static_cast<double>(n);
    primitive_ref_ = profile_.primitive(s_ref_);
    points_.resize(n + 1);

    auto k = static_cast<std::size_t>(std::floor((s_ref_ - s_min_) / step_));
    k = std::min(k, n);
    points_[k] = x_ref_ - integrate_tangent(node(k), s_ref_);
    // Compensated running sums: plain accumulation over ~1e3 steps drifts by
    // ~100 ulps, enough to make a long chord exceed its arc.
    auto march = [&](std::size_t from, std::size_t to) {
        Vec2 sum = points_[from], carry{};
        const int dir = to > from ? 1 : -1;
        for (std::size_t i = from; i != to; i += static_cast<std::size_t>(dir)) {
            const std::size_t next = i + static_cast<std::size_t>(dir);
            const Vec2 piece = dir > 0 ? integrate_tangent(node(i), node(next)) : -1.0 * integrate_tangent(node(next), node(i));
            const Vec2 y = piece - carry;
            const Vec2 t = sum + y;
            carry = (t - sum) - y;
            sum = t;
            points_[next] = sum;
        }
    };
    march(k, 0);
    march(k, n);

    Vec2 lo = points_[0], hi = points_[0];
    for (const auto& p : points_) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    cell_ = std::max({16.0 * step_, (hi.x - lo.x) / 2048.0, (hi.y - lo.y) / 2048.0});
    box_lo_ = lo;
    cells_x_ = static_cast<std::size_t>((hi.x - lo.x) / cell_) + 1;
    cells_y_ = static_cast<std::size_t>((hi.y - lo.y) / cell_) + 1;
    std::vector<std::size_t> count(cells_x_ * cells_y_ + 1, 0);
    auto cell_of = [&](Vec2 p) {
        const auto cx = std::min(cells_x_ - 1, static_cast<std::size_t>((p.x - lo.x) / cell_));
        const auto cy = std::min(cells_y_ - 1, static_cast<std::size_t>((p.y - lo.y) / cell_));
        return cy * cells_x_ + cx;
    };
    for (const auto& p : points_) ++count[cell_of(p) + 1];
    for (std::size_t c = 1; c < count.size(); ++c) count[c] += count[c - 1];
    cell_start_ = count;
    cell_items_.assign(points_.size(), 0);
    for (std::size_t i = 0; i < points_.size(); ++i) cell_items_[count[cell_of(points_[i])]++] = i;
}

Vec2 PlanarCurve::integrate_tangent(double a, double b) const {
    if (a == b) return {};
    const double sign = b > a ? 1.0 : -1.0;
    const double lo = std::min(a, b), hi = std::max(a, b);
    Vec2 acc;
    for_each_piece_node(lo, hi, profile_.breakpoints(), piece_length(profile_), [&](double x, double w) {
        const double beta = profile_.primitive(x) - primitive_ref_;
        acc.x += w * std::cos(beta);
        acc.y -= w * std::sin(beta);
    });
    return sign * acc;
}

double PlanarCurve::turning(double s) const { return profile_.primitive(s) - primitive_ref_; }

Vec2 PlanarCurve::tangent(double s) const {
    const double b = turning(s);
    return {std::cos(b), -std::sin(b)};
}

Vec2 PlanarCurve::normal(double s) const {
    const double b = turning(s);
    return {std::sin(b), std::cos(b)};
}

Vec2 PlanarCurve::position(double s) const {
    if (s == s_ref_) return x_ref_;
    const double t = std::clamp((s - s_min_) / step_, 0.0, static_cast<double>(size() - 1));
    const auto j = static_cast<std::size_t>(std::lround(t));
    if (std::abs(s - s_ref_) < std::abs(s - node(j))) return x_ref_ + integrate_tangent(s_ref_, s);
    return points_[j] + integrate_tangent(node(j), s);
}

std::optional<std::size_t> PlanarCurve::nearest_sample(Vec2 x, double radius) const {
    const double fx0 = (x.x - radius - box_lo_.x) / cell_, fx1 = (x.x + radius - box_lo_.x) / cell_;
    const double fy0 = (x.y - radius - box_lo_.y) / cell_, fy1 = (x.y + radius - box_lo_.y) / cell_;
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 >= static_cast<double>(cells_x_) || fy0 >= static_cast<double>(cells_y_))
        return std::nullopt;
    const auto cx0 = static_cast<std::size_t>(std::max(0.0, fx0));
    const auto cy0 = static_cast<std::size_t>(std::max(0.0, fy0));
    const auto cx1 = std::min(cells_x_ - 1, static_cast<std::size_t>(fx1));
    const auto cy1 = std::min(cells_y_ - 1, static_cast<std::size_t>(fy1));
    std::optional<std::size_t> best;
    double best_d2 = radius * radius;
    for (std::size_t cy = cy0; cy <= cy1; ++cy)
        for (std::size_t cx = cx0; cx <= cx1; ++cx) {
            const std::size_t c = cy * cells_x_ + cx;
            for (std::size_t k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
                const std::size_t i = cell_items_[k];
                const Vec2 d = points_[i] - x;
                const double d2 = dot(d, d);
                if (d2 < best_d2 || (d2 == best_d2 && best && i < *best)) {
                    best_d2 = d2;
                    best = i;
                }
            }
        }
    return best;
}

double PlanarCurve::squared_distance(StripCoords a, StripCoords b) const {
    const Vec2 delta = position(a.s) - position(b.s);
    const double c = dot(delta, tangent(b.s));
    const double s = -dot(delta, normal(b.s));
    return squared_distance_from_frame(c, s, turning(a.s) - turning(b.s), a.u, b.u);
}

PlanarCurve reconstruct_curve(const CurvatureProfile& profile, double s_ref, Vec2 x_ref, ArcGrid grid) {
    return PlanarCurve(profile, s_ref, x_ref, grid);
}

Vec2 strip_point(const PlanarCurve& curve, double s, double u, double halfwidth) {
    if (!(std::abs(u) < halfwidth))
        throw DomainError("strip_point: |u| = " + std::to_string(std::abs(u)) + " not below halfwidth " +
                          std::to_string(halfwidth));
    return curve.position(s) + u * curve.normal(s);
}

double squared_distance(const CurvatureProfile& profile, StripCoords a, StripCoords b) {
    if (a.s == b.s) return (a.u - b.u) * (a.u - b.u);
    const double p0 = profile.primitive(b.s);
    const double lo = std::min(a.s, b.s), hi = std::max(a.s, b.s);
    const double sign = a.s > b.s ? 1.0 : -1.0;
    double c = 0.0, s = 0.0;
    for_each_piece_node(lo, hi, profile.breakpoints(), piece_length(profile), [&](double x, double w) {
        const double beta = profile.primitive(x) - p0;
        c += w * std::cos(beta);
        s += w * std::sin(beta);
    });
    return squared_distance_from_frame(sign * c, sign * s, profile.primitive(a.s) - p0, a.u, b.u);
}

std::optional<StripCoords> strip_coordinates_of(const PlanarCurve& curve, Vec2 x, double a) {
    const auto j = curve.nearest_sample(x, a + curve.step());
    if (!j) return std::nullopt;
    if (*j == 0 || *j + 1 == curve.size())
        throw DomainError("strip_coordinates_of: nearest curve sample is at the window edge");
    const auto& prof = curve.profile();
    double s = curve.node(*j);
    for (int it = 0; it < 50; ++it) {
        const Vec2 d = x - curve.position(s);
        const double f = dot(d, curve.tangent(s));
        const double u = dot(d, curve.normal(s));
        const double step = f / (1.0 + prof.curvature(s) * u);
        s += step;
        if (std::abs(step) < 1e-12) break;
    }
    if (s <= curve.s_min() || s >= curve.s_max())
        throw DomainError("strip_coordinates_of: projection left the sampled window");
    const double u = dot(x - curve.position(s), curve.normal(s));
    if (!(std::abs(u) < a)) return std::nullopt;
    return StripCoords{s, u};
}

AssumptionReport validate_assumptions(const CurvatureProfile& profile, double a, double window) {
    if (!(a > 0.0) || !(window > 0.0)) throw DomainError("validate_assumptions: a and window must be positive");
    AssumptionReport r;
    r.window = window;
    r.l_min = 4.0 * a;
    r.sup_curvature = profile.sup_abs();
    r.product = a * r.sup_curvature;
    r.strip_fits = r.product < 1.0;
    // Built-in families have C^1 (bump) or smoother curvature, so the curve is C^3.
    r.smooth = true;

    r.compact_support = profile.support_bound().has_value();
    if (!r.compact_support) {
        bool decreasing = true;
        for (double frac : {0.25, 0.5, 1.0}) {
            const double s = frac * window;
            DecaySample d{s, std::abs(profile.curvature(s)), std::abs(profile.derivative(s, 1)),
                          std::abs(profile.derivative(s, 2))};
            if (!r.decay_samples.empty()) {
                const auto& prev = r.decay_samples.back();
                decreasing = decreasing && d.gamma <= prev.gamma && d.first <= prev.first && d.second <= prev.second;
            }
            r.decay_samples.push_back(d);
        }
        const auto& last = r.decay_samples.back();
        r.decay = decreasing && std::isfinite(last.second) && std::max({last.gamma, last.first, last.second}) < 1e-8;
    }

    if (2.0 * window > r.l_min) {
        const double step = std::min(window / 2000.0, r.sup_curvature > 0.0 ? 0.05 / r.sup_curvature : window);
        const PlanarCurve curve(profile, 0.0, {}, {-window, window, step});
        constexpr int samples = 401;
        std::vector<double> s(samples);
        std::vector<Vec2> pts(samples);
        for (int i = 0; i < samples; ++i) {
            s[i] = -window + 2.0 * window * i / (samples - 1);
            pts[i] = curve.position(s[i]);
        }
        double margin = std::numeric_limits<double>::infinity();
        double chord = std::numeric_limits<double>::infinity();
        for (int i = 0; i < samples; ++i)
            for (int j = i + 1; j < samples; ++j) {
                const double ds = s[j] - s[i];
                if (ds < r.l_min) continue;
                const double c = norm(pts[j] - pts[i]);
                margin = std::min(margin, c / ds);
                chord = std::min(chord, c);
            }
        r.injectivity_margin = margin;
        r.min_chord = chord;
        r.injective = margin > 0.0 && chord > 2.0 * a;
    }
    return r;
}

}  // namespace softguide
