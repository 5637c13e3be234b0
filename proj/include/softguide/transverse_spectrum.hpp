#pragma once

#include <functional>
#include <string>
#include <vector>

namespace softguide {

enum class WellKind { flat_bottom, sampled, function };

// Nonnegative transverse channel profile V supported in [-a, a].
class TransverseWell {
public:
    // V0 on J = [-a1, a2], which must lie inside [-a, a].
    static TransverseWell flat_bottom(double depth, double a1, double a2, double halfwidth);
    // Piecewise-linear interpolation of samples, zero outside the table.
    static TransverseWell sampled(std::vector<double> u, std::vector<double> v, double halfwidth);
    // Arbitrary profile restricted to [-a, a]; breakpoints mark kinks.
    static TransverseWell function(std::function<double(double)> v, double halfwidth,
                                   std::vector<double> breakpoints = {});

    [[nodiscard]] double operator()(double u) const;
    [[nodiscard]] WellKind kind() const { return kind_; }
    [[nodiscard]] double halfwidth() const { return a_; }
    [[nodiscard]] double sup_norm() const { return sup_; }

    // Flat-bottom data; zero for other kinds.
    [[nodiscard]] double depth() const { return depth_; }
    [[nodiscard]] double a1() const { return a1_; }
    [[nodiscard]] double a2() const { return a2_; }

    // Sorted points splitting the support of V into smooth pieces, ends included.
    [[nodiscard]] std::vector<double> support_pieces() const;
    // Points where V jumps (flat-bottom edges), for grid alignment.
    [[nodiscard]] std::vector<double> jump_points() const;

    [[nodiscard]] const std::vector<double>& table_u() const { return tu_; }
    [[nodiscard]] const std::vector<double>& table_v() const { return tv_; }

    // V_eps(u) = V(u / eps) / eps on [-eps a, eps a].
    [[nodiscard]] TransverseWell scaled(double eps) const;

private:
    TransverseWell() = default;
    void finish();

    WellKind kind_ = WellKind::flat_bottom;
    double a_ = 0.0;
    double sup_ = 0.0;
    double depth_ = 0.0, a1_ = 0.0, a2_ = 0.0;
    std::vector<double> tu_, tv_;
    std::function<double(double)> fn_;
    std::vector<double> kinks_;
};

// Transverse ground state of -d^2/du^2 - V.
class GroundState {
public:
    double epsilon0 = 0.0;
    double kappa0 = 0.0;
    // phi0 sampled on a uniform grid of [-a, a]
    std::vector<double> u;
    std::vector<double> phi;
    // phi0(u) = tail_left e^{kappa0 u} for u < -a and tail_right e^{-kappa0 u} for u > a
    double tail_left = 0.0;
    double tail_right = 0.0;
    double error_estimate = 0.0;
    std::string method;

    [[nodiscard]] double phi_at(double x) const;
    [[nodiscard]] double tail_coefficient() const { return tail_right; }

private:
    friend GroundState flat_bottom_ground_state(double, double, double, double);
    friend GroundState solve_ground_state_numeric(const TransverseWell&, int);
    // analytic flat-bottom branch
    bool analytic_ = false;
    double amp_ = 0.0, k_ = 0.0, center_ = 0.0, half_ = 0.0;
    // numeric branch: fine grid values used for interpolation inside [-a, a]
    double a_ = 0.0;
    double grid_origin_ = 0.0, grid_step_ = 1.0;
    std::vector<double> grid_phi_;
};

struct GroundStateOptions {
    // Force the finite-difference path even for flat-bottom wells.
    bool force_numeric = false;
    // Coarsest grid has about this many steps across the support of V.
    int steps_across = 50;
};

GroundState solve_ground_state(const TransverseWell& well, const GroundStateOptions& options = {});
// halfwidth is the strip halfwidth a, used for the tail convention.
GroundState flat_bottom_ground_state(double depth, double a1, double a2, double halfwidth);
GroundState solve_ground_state_numeric(const TransverseWell& well, int steps_across);

// g0 = V^{1/2} phi0 at the state's sample points.
std::vector<double> weighted_ground_function(const GroundState& state, const TransverseWell& well);

// Lowest eigenvalue of -d^2 - V on (-u1, u1) with Neumann ends.
double neumann_threshold(const TransverseWell& well, double u1);

// Lowest eigenvalue of the symmetric tridiagonal matrix (diag, off) by
// Sturm-sequence bisection inside [lo, hi].
double lowest_tridiagonal_eigenvalue(const std::vector<double>& diag, double off, double lo, double hi);

}  // namespace softguide
