#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "softguide/curve_geometry.hpp"
#include "softguide/transverse_spectrum.hpp"

namespace softguide {

// Uniform grid of interior nodes x0 + i h, y0 + j h (1 <= i <= nx,
// 1 <= j <= ny); the Dirichlet walls sit at i = 0, nx + 1 and j = 0, ny + 1.
struct BoxGrid {
    double x0 = 0.0;
    double y0 = 0.0;
    double h = 0.1;
    int nx = 1;
    int ny = 1;

    [[nodiscard]] std::size_t nodes() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    [[nodiscard]] std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j - 1) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i - 1);
    }
    [[nodiscard]] Vec2 node(int i, int j) const { return {x0 + i * h, y0 + j * h}; }
    [[nodiscard]] Vec2 node(std::size_t k) const {
        return node(static_cast<int>(k % static_cast<std::size_t>(nx)) + 1,
                    static_cast<int>(k / static_cast<std::size_t>(nx)) + 1);
    }
    [[nodiscard]] double width() const { return (nx + 1) * h; }
    [[nodiscard]] double height() const { return (ny + 1) * h; }
};

// Square box [x0, x0 + L] x [y0, y0 + L] with n interior nodes per axis.
BoxGrid square_box(double x0, double y0, double side, int n);

struct FdOptions {
    double h = 0.0;            // 0: min(0.1/kappa0, a/8), adjusted so |J|/h is even
    double margin = 0.0;       // 0: 15/kappa0
    double arm_extent = 0.0;   // half-length of the arc window; 0: s_supp + margin
    std::size_t node_cap = 4'000'000;
    int eigenvalues = 4;
    int threads = 1;
};

// Curve placed with its incoming arm on the x axis (beta = 0 for
// s <= -s_supp) and the box anchored so the edges of J fall midway between
// grid lines on the incoming arm and, for a quarter turn, on the outgoing arm.
struct GuideLayout {
    PlanarCurve curve;
    BoxGrid grid;
    double arm_extent = 0.0;
    double margin = 0.0;
};

GuideLayout make_guide_layout(const CurvatureProfile& profile, const TransverseWell& well, const GroundState& state,
                              const FdOptions& options);
// Same placement with the step scaled by `factor` (2 gives the coarse member of a Richardson pair).
GuideLayout make_guide_layout(const CurvatureProfile& profile, const TransverseWell& well, const GroundState& state,
                              const FdOptions& options, double factor);

// V(u) at nodes with strip coordinates (s, u), |u| < a; zero elsewhere.
std::vector<double> potential_on_grid(const PlanarCurve& curve, const TransverseWell& well, const BoxGrid& grid,
                                      int threads = 1);

struct SparseHamiltonian {
    BoxGrid grid;
    Eigen::SparseMatrix<double> matrix;  // 5-point -Laplacian minus the potential, Dirichlet walls
    std::vector<double> potential;
    double norm_bound = 0.0;             // 8/h^2 + sup V
};

// Throws DomainError when the grid exceeds node_cap.
SparseHamiltonian assemble(const BoxGrid& grid, std::vector<double> potential, std::size_t node_cap = 4'000'000);
SparseHamiltonian assemble(const GuideLayout& layout, const TransverseWell& well, const FdOptions& options);

struct FdEigenpair {
    double energy = 0.0;
    double residual = 0.0;  // ||H v - E v||
    Eigen::VectorXd vector;
};

struct FdSpectrum {
    std::vector<FdEigenpair> pairs;  // ascending
    double shift = 0.0;              // final shift-invert pole
    int steps = 0;
    bool converged = false;
};

// k lowest eigenpairs by shift-invert Lanczos. A first pass at `target`
// locates the bottom of the spectrum; the pole is then moved just below it,
// a successful Cholesky factorisation certifying that the pole lies under
// the spectrum.
FdSpectrum lowest_eigenvalues(const SparseHamiltonian& H, int k, double target);

enum class Verdict { below, none_below, inconclusive };
std::string to_string(Verdict v);

struct FdLevel {
    double h = 0.0;
    std::size_t nodes = 0;
    std::vector<double> energies;
    std::vector<double> residuals;
};

struct FdEnergy {
    double extrapolated = 0.0;
    double error = 0.0;  // |E_h - E_2h| / 3
    Verdict verdict = Verdict::inconclusive;
};

struct OracleReport {
    double epsilon0 = 0.0;
    FdLevel fine, coarse;
    std::vector<FdEnergy> energies;
    int count_below = 0;
    Verdict verdict = Verdict::inconclusive;
    double margin = 0.0;
    double arm_extent = 0.0;
    Eigen::VectorXd ground_vector;  // fine-grid lowest eigenvector
    BoxGrid fine_grid;
};

// Two resolutions (h, 2h) and Richardson extrapolation. A level is "below"
// when eps0 - E exceeds three error bars, "inconclusive" when E < eps0 by
// less than that, and "none_below" when E >= eps0.
OracleReport discrete_spectrum_report(const CurvatureProfile& profile, const TransverseWell& well,
                                      const GroundState& state, const FdOptions& options = {});

// Plain-text dump, one "x y value" row per node.
void write_eigenvector(const std::filesystem::path& path, const BoxGrid& grid, const Eigen::VectorXd& v);

}  // namespace softguide
