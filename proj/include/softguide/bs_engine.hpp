#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "softguide/curve_geometry.hpp"
#include "softguide/transverse_spectrum.hpp"

namespace softguide {

// Panel layout of the tensor Nystrom grid. Zero lengths mean "choose from
// kappa0 and the profile" (see resolved()).
struct NystromGrids {
    double s_panel_length = 0.0;     // straight arms
    double bend_panel_length = 0.0;  // inside the curvature support
    double u_panel_length = 0.0;
    int s_order = 8;
    int u_order = 8;
    int threads = 1;
    // Every panel is cut into this many equal parts after layout.
    int subdivision = 1;

    // Defaults: s and u panels of 1.6/kappa0 (at most 2), bend panels no
    // longer than 0.5/sup|gamma| or half the profile width.
    [[nodiscard]] NystromGrids resolved(double kappa0, const CurvatureProfile& profile) const;
    // resolved() with the subdivision doubled: twice the node density in s and u.
    [[nodiscard]] NystromGrids refined(double kappa0, const CurvatureProfile& profile) const;
};

// Truncation half-length s_supp + 23/kappa, with the gaussian support radius
// taken where |gamma| < 1e-12.
double default_truncation(const CurvatureProfile& profile, double kappa);

struct FiberOperator {
    double kappa = 0.0;
    double p = 0.0;
    std::vector<double> nodes;
    std::vector<double> weights;
    Eigen::MatrixXd matrix;
};

FiberOperator fiber_operator(const TransverseWell& well, double kappa, double p, int n);
double fiber_top_eigenvalue(const TransverseWell& well, double kappa, double p, int n = 400);

struct StraightCheckReport {
    double lambda_max = 0.0;
    double residual = 0.0;            // |lambda_max - 1|
    double cosine_similarity = 0.0;   // top eigenvector vs g0
    int nodes = 0;
    struct LinePoint {
        double p, kappa, lambda;
    };
    std::vector<LinePoint> spectrum_line;  // samples with kappa^2 + p^2 = kappa0^2
    [[nodiscard]] bool passed(double tol = 1e-4) const;
};

StraightCheckReport straight_bs_check(const TransverseWell& well, const GroundState& state, int n = 400);

struct EigenResult {
    double value = 0.0;
    Eigen::VectorXd vector;
    double residual = 0.0;  // ||M v - lambda v|| / |lambda|
    int iterations = 0;
    bool converged = false;
};

// Largest eigenpairs of a symmetric matrix by Lanczos with full
// reorthogonalisation, sorted by decreasing value.
std::vector<EigenResult> top_eigenpairs(const Eigen::MatrixXd& matrix, int count, double tol = 1e-10);
// Throws ToleranceError when the iteration cap is hit before tol.
EigenResult top_eigenvalue(const Eigen::MatrixXd& matrix, double tol = 1e-10);

// kappa-independent part of the Nystrom discretisation of the
// Birman-Schwinger operator on the truncated strip: nodes, weights, node
// geometry and the logarithmic moments of the near-field panels.
class BSDiscretization {
public:
    BSDiscretization(const CurvatureProfile& profile, const TransverseWell& well, double S,
                     std::vector<double> s_breakpoints, std::vector<double> u_breakpoints, int s_order,
                     int u_order, int threads);
    ~BSDiscretization();
    BSDiscretization(BSDiscretization&&) noexcept;
    BSDiscretization& operator=(BSDiscretization&&) noexcept;

    // Discretisation with layout chosen from `grids`.
    static BSDiscretization build(const CurvatureProfile& profile, const TransverseWell& well, double S,
                                  const NystromGrids& grids);
    // Same nodes and panels on the straight strip (W = V, straight distances).
    [[nodiscard]] BSDiscretization straight_companion() const;

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] double truncation() const;
    [[nodiscard]] const std::vector<double>& s_breakpoints() const;
    [[nodiscard]] const std::vector<double>& u_breakpoints() const;
    [[nodiscard]] const std::vector<StripCoords>& nodes() const;
    [[nodiscard]] const std::vector<double>& weights() const;
    [[nodiscard]] const std::vector<double>& modified_potential() const;  // W = (1 + u gamma) V
    [[nodiscard]] const std::vector<Vec2>& positions() const;
    [[nodiscard]] const CurvatureProfile& profile() const;
    [[nodiscard]] const PlanarCurve& curve() const;

    // Symmetric Nystrom matrix at kappa.
    [[nodiscard]] Eigen::MatrixXd matrix(double kappa) const;
    // v^T M v without storing M.
    [[nodiscard]] double quadratic_form(double kappa, const Eigen::VectorXd& v) const;
    // v^T (M_this - M_other) v entry by entry; the layouts must match.
    [[nodiscard]] double difference_form(const BSDiscretization& other, double kappa, const Eigen::VectorXd& v) const;

    // phi(x) = sum_j w_j (1/2pi) K0(kappa |x - x_j|) W_j^{1/2} g_j with g_j = v_j / sqrt(w_j);
    // points close to the strip use the same log-split product rule as the matrix.
    [[nodiscard]] std::vector<double> reconstruct(const Eigen::VectorXd& v, double kappa,
                                                  std::span<const Vec2> points) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    explicit BSDiscretization(std::unique_ptr<Impl> impl);
};

struct BentBSMatrix {
    double kappa = 0.0;
    double S = 0.0;
    std::size_t s_nodes = 0;
    std::size_t u_nodes = 0;
    Eigen::MatrixXd matrix;
};

BentBSMatrix bent_bs_matrix(const CurvatureProfile& profile, const TransverseWell& well, double kappa, double S,
                            const NystromGrids& grids);

struct BoundState {
    double kappa = 0.0;
    double energy = 0.0;
    int branch = 0;
    double lambda_residual = 0.0;  // |lambda(kappa*) - 1|
    Eigen::VectorXd eigenvector;
};

struct BoundStateSearch {
    std::vector<BoundState> states;
    double kappa_lo = 0.0;
    double kappa_hi = 0.0;
    std::vector<double> lambda_at_start;  // top branches at kappa_lo
    std::size_t nodes = 0;
    double S = 0.0;
    int evaluations = 0;
};

BoundStateSearch find_bound_states(const BSDiscretization& disc, const TransverseWell& well, const GroundState& state,
                                   int branches = 3);
BoundStateSearch find_bound_states(const CurvatureProfile& profile, const TransverseWell& well,
                                   const GroundState& state, double S, const NystromGrids& grids, int branches = 3);

struct LambdaSample {
    double kappa;
    double lambda;
};
std::vector<LambdaSample> lambda_curve(const BSDiscretization& disc, double kappa_lo, double kappa_hi, int points);

struct ConditionIntegral {
    double value = 0.0;           // raw quadruple integral at the finer level
    double coarse_value = 0.0;
    double error_estimate = 0.0;  // |fine - coarse|
    double normalization = 0.0;   // ||phi0 V||^2
    double ratio = 0.0;           // value / normalization
    double truncation_bound = 0.0;
    double S = 0.0;
    std::size_t coarse_nodes = 0;
    std::size_t fine_nodes = 0;
    bool certified = false;       // value > 10 * error_estimate
};

// tol <= 0 disables the tolerance check.
ConditionIntegral condition_integral(const CurvatureProfile& profile, const TransverseWell& well,
                                     const GroundState& state, double S, double tol, const NystromGrids& grids);

// v_i = sqrt(w_i) g0(u_i) on the nodes of `disc`.
Eigen::VectorXd ground_vector(const BSDiscretization& disc, const TransverseWell& well, const GroundState& state);

struct OnCurveExcess {
    double value = 0.0;
    double coarse_value = 0.0;
    double error_estimate = 0.0;
    double min_integrand = 0.0;  // smallest integrand value seen at any node
    double S = 0.0;
};

OnCurveExcess on_curve_excess(const CurvatureProfile& profile, double kappa0, double S, double panel_length = 0.0,
                              int threads = 1);

}  // namespace softguide
