#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace softguide {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
    friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Strip (Fermi) coordinates: arc length along the curve and signed normal offset.
struct StripCoords {
    double s = 0.0;
    double u = 0.0;
};

enum class CurveFamily { zero, smooth_bump, gaussian, tabulated };

std::string to_string(CurveFamily family);

// Signed curvature gamma(s) of an arc-length parametrised curve.
//   smooth_bump: c cos^2(pi s / 2 s0) on [-s0, s0], zero outside
//   gaussian:    c exp(-s^2 / sigma^2)
//   tabulated:   natural cubic spline through samples, zero outside the table
class CurvatureProfile {
public:
    static CurvatureProfile zero();
    static CurvatureProfile smooth_bump(double amplitude, double half_support);
    static CurvatureProfile gaussian(double amplitude, double width);
    static CurvatureProfile tabulated(std::vector<double> s, std::vector<double> gamma);

    [[nodiscard]] double curvature(double s) const;
    // order 1 or 2
    [[nodiscard]] double derivative(double s, int order) const;
    // Integral of gamma from 0 to s, in closed form for every family.
    [[nodiscard]] double primitive(double s) const;

    [[nodiscard]] double sup_abs() const;
    // Half-length of the support, or nullopt for the gaussian.
    [[nodiscard]] std::optional<double> support_bound() const;
    // support_bound() if compact, else the radius beyond which |gamma| < 1e-12.
    [[nodiscard]] double effective_extent() const;
    // Points where gamma loses smoothness (quadrature should split there).
    [[nodiscard]] std::vector<double> breakpoints() const;
    [[nodiscard]] bool is_straight() const { return family_ == CurveFamily::zero || sup_ == 0.0; }

    // Same profile with gamma replaced by -gamma.
    [[nodiscard]] CurvatureProfile mirrored() const;

    [[nodiscard]] CurveFamily family() const { return family_; }
    [[nodiscard]] double amplitude() const { return amplitude_; }
    // s0 for the bump, sigma for the gaussian, 0 otherwise.
    [[nodiscard]] double width() const { return width_; }
    [[nodiscard]] const std::vector<double>& table_s() const { return knots_; }
    [[nodiscard]] const std::vector<double>& table_gamma() const { return values_; }

private:
    CurvatureProfile() = default;

    CurveFamily family_ = CurveFamily::zero;
    double amplitude_ = 0.0;
    double width_ = 0.0;
    double sup_ = 0.0;
    // Spline data for the tabulated family: values, second derivatives and the
    // primitive at each knot.
    std::vector<double> knots_, values_, second_, cumulative_;

    [[nodiscard]] std::size_t piece(double s) const;
};

// beta(s2, s1) = integral of gamma over [s1, s2]
double turning_angle(const CurvatureProfile& profile, double s1, double s2);

struct ArcGrid {
    double s_min = 0.0;
    double s_max = 0.0;
    double step = 0.01;
};

// Arc-length sampled realisation of the curve. The tangent is
// (cos beta, -sin beta) and the normal (sin beta, cos beta), where
// beta(s) = beta(s, s_ref); tangent_angle() returns the polar angle -beta.
class PlanarCurve {
public:
    PlanarCurve(CurvatureProfile profile, double s_ref, Vec2 x_ref, ArcGrid grid);

    [[nodiscard]] const CurvatureProfile& profile() const { return profile_; }
    [[nodiscard]] double s_ref() const { return s_ref_; }
    [[nodiscard]] Vec2 x_ref() const { return x_ref_; }
    [[nodiscard]] double step() const { return step_; }
    [[nodiscard]] std::size_t size() const { return points_.size(); }
    [[nodiscard]] double node(std::size_t i) const { return s_min_ + step_ * static_cast<double>(i); }
    [[nodiscard]] Vec2 node_point(std::size_t i) const { return points_[i]; }
    [[nodiscard]] double s_min() const { return s_min_; }
    [[nodiscard]] double s_max() const { return node(size() - 1); }

    [[nodiscard]] double turning(double s) const;  // beta(s, s_ref)
    [[nodiscard]] double tangent_angle(double s) const { return -turning(s); }
    [[nodiscard]] Vec2 tangent(double s) const;
    [[nodiscard]] Vec2 normal(double s) const;
    [[nodiscard]] Vec2 position(double s) const;

    // Index of the closest sample within `radius` of x, if any.
    [[nodiscard]] std::optional<std::size_t> nearest_sample(Vec2 x, double radius) const;

    // |x(s,u) - x(s',u')|^2 via the frame formula, using cached positions.
    [[nodiscard]] double squared_distance(StripCoords a, StripCoords b) const;

private:
    CurvatureProfile profile_;
    double s_ref_;
    Vec2 x_ref_;
    double s_min_;
    double step_;
    double primitive_ref_;
    std::vector<Vec2> points_;

    // Uniform bucket index over the samples.
    Vec2 box_lo_;
    double cell_ = 1.0;
    std::size_t cells_x_ = 1, cells_y_ = 1;
    std::vector<std::size_t> cell_start_, cell_items_;

    [[nodiscard]] Vec2 integrate_tangent(double a, double b) const;
};

PlanarCurve reconstruct_curve(const CurvatureProfile& profile, double s_ref, Vec2 x_ref, ArcGrid grid);

// x(s,u) = Gamma(s) + u N(s). Throws DomainError when |u| >= halfwidth.
Vec2 strip_point(const PlanarCurve& curve, double s, double u, double halfwidth);

// Squared distance between two strip points from the curvature alone:
//   |x - x'|^2 = C^2 + S^2 + u^2 + u'^2 - 2 u u' cos(b) + 2 u sin(b) C + 2 (u' - u cos(b)) S
// with b = beta(s, s'), C and S the integrals of cos and sin of beta(., s') over [s', s].
double squared_distance(const CurvatureProfile& profile, StripCoords a, StripCoords b);

// Same formula given the frame integrals.
inline double squared_distance_from_frame(double c, double s, double beta, double u, double up) {
    const double cb = std::cos(beta), sb = std::sin(beta);
    const double d = c * c + s * s + u * u + up * up - 2.0 * u * up * cb + 2.0 * u * sb * c +
                     2.0 * (up - u * cb) * s;
    return d > 0.0 ? d : 0.0;
}

// Inverse of strip_point. nullopt when dist(x, Gamma) >= a. Throws
// DomainError when the closest sample is an end of the sampled window.
std::optional<StripCoords> strip_coordinates_of(const PlanarCurve& curve, Vec2 x, double a);

struct DecaySample {
    double s = 0.0;
    double gamma = 0.0;
    double first = 0.0;
    double second = 0.0;
};

struct AssumptionReport {
    bool smooth = true;       // (a)
    bool decay = true;        // (b)
    bool injective = true;    // (c), sampled proxy
    bool strip_fits = true;   // (d)
    double sup_curvature = 0.0;
    double product = 0.0;     // a * sup|gamma|
    double injectivity_margin = 1.0;
    double min_chord = 0.0;   // smallest |Gamma(s) - Gamma(s')| among proxy pairs
    double l_min = 0.0;
    double window = 0.0;
    bool compact_support = true;
    std::vector<DecaySample> decay_samples;

    [[nodiscard]] bool all_pass() const { return smooth && decay && injective && strip_fits; }
};

// window is the half-length of the sampled arc [-window, window].
AssumptionReport validate_assumptions(const CurvatureProfile& profile, double a, double window);

}  // namespace softguide
