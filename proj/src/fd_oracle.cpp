#include "softguide/fd_oracle.hpp"

#include <Eigen/CholmodSupport>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>

#include "softguide/errors.hpp"
#include "softguide/lanczos.hpp"
#include "softguide/parallel.hpp"

namespace softguide {

BoxGrid square_box(double x0, double y0, double side, int n) {
    if (n < 1 || !(side > 0.0)) throw DomainError("square_box: need side > 0 and n >= 1");
    const double h = side / (n + 1);
    return {x0, y0, h, n, n};
}

namespace {

struct Bounds {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    void add(Vec2 p) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
};

// Wall coordinate c0 <= lo such that `mark` sits halfway between grid lines.
double anchored_origin(double lo, double mark, double h) {
    const double k = std::ceil((mark - lo) / h - 0.5);
    return mark - (k + 0.5) * h;
}

}  // namespace

GuideLayout make_guide_layout(const CurvatureProfile& profile, const TransverseWell& well, const GroundState& state,
                              const FdOptions& options) {
    return make_guide_layout(profile, well, state, options, 1.0);
}

GuideLayout make_guide_layout(const CurvatureProfile& profile, const TransverseWell& well, const GroundState& state,
                              const FdOptions& options, double factor) {
    const double kappa0 = state.kappa0;
    if (!(kappa0 > 0.0)) throw DomainError("make_guide_layout: kappa0 must be positive");
    const double margin = options.margin > 0.0 ? options.margin : 15.0 / kappa0;
    const double s_supp = profile.is_straight() ? 0.0 : profile.effective_extent();
    const double arm = options.arm_extent > 0.0 ? options.arm_extent : s_supp + margin;
    const double a = well.halfwidth();

    const auto pieces = well.support_pieces();
    const double jl = pieces.front(), jr = pieces.back();
    const double h_target = options.h > 0.0 ? options.h : std::min(0.1 / kappa0, a / 8.0);
    int n = static_cast<int>(std::ceil((jr - jl) / h_target - 1e-9));
    n += n % 2;
    const double h = (jr - jl) / n * factor;
    if (!(h * kappa0 < 0.2 * factor)) throw DomainError("make_guide_layout: h kappa0 must be below 0.2");

    double step = std::min(0.01, 0.5 * h);
    if (profile.sup_abs() > 0.0) step = std::min(step, 0.05 / profile.sup_abs());
    const double reach = arm + 3.0 * margin + 1.0;
    PlanarCurve curve(profile, -arm, Vec2{}, ArcGrid{-reach, reach, step});

    Bounds b;
    const int samples = std::max(2, static_cast<int>(std::ceil(2.0 * arm / std::min(0.01, step))));
    for (int k = 0; k <= samples; ++k) {
        const double s = -arm + 2.0 * arm * k / samples;
        const Vec2 g = curve.position(s), nrm = curve.normal(s);
        b.add(g + a * nrm);
        b.add(g - a * nrm);
    }
    b.xmin -= margin;
    b.xmax += margin;
    b.ymin -= margin;
    b.ymax += margin;

    // Incoming arm along y = 0 with normal (0, 1); outgoing arm edge in x.
    const double beta_end = curve.turning(arm);
    const double x_mark = curve.position(arm).x + (std::sin(beta_end) >= 0.0 ? jl : -jr) * std::abs(std::sin(beta_end));
    BoxGrid grid;
    grid.h = h;
    grid.x0 = anchored_origin(b.xmin, x_mark, h);
    grid.y0 = anchored_origin(b.ymin, jl, h);
    grid.nx = static_cast<int>(std::ceil((b.xmax - grid.x0) / h));
    grid.ny = static_cast<int>(std::ceil((b.ymax - grid.y0) / h));
    return GuideLayout{std::move(curve), grid, arm, margin};
}

std::vector<double> potential_on_grid(const PlanarCurve& curve, const TransverseWell& well, const BoxGrid& grid,
                                      int threads) {
    std::vector<double> V(grid.nodes(), 0.0);
    const double a = well.halfwidth();
    parallel_for(static_cast<std::size_t>(grid.ny), threads, [&](std::size_t row) {
        const int j = static_cast<int>(row) + 1;
        for (int i = 1; i <= grid.nx; ++i) {
            const auto q = strip_coordinates_of(curve, grid.node(i, j), a);
            if (q) V[grid.index(i, j)] = well(q->u);
        }
    });
    return V;
}

SparseHamiltonian assemble(const BoxGrid& grid, std::vector<double> potential, std::size_t node_cap) {
    const std::size_t n = grid.nodes();
    if (n > node_cap)
        throw DomainError("assemble: " + std::to_string(n) + " nodes exceed the budget of " + std::to_string(node_cap));
    if (potential.size() != n) throw DomainError("assemble: potential size does not match the grid");
    const double ih2 = 1.0 / (grid.h * grid.h);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * n);
    double vmax = 0.0;
    for (int j = 1; j <= grid.ny; ++j)
        for (int i = 1; i <= grid.nx; ++i) {
            const auto k = static_cast<int>(grid.index(i, j));
            vmax = std::max(vmax, potential[static_cast<std::size_t>(k)]);
            trip.emplace_back(k, k, 4.0 * ih2 - potential[static_cast<std::size_t>(k)]);
            if (i > 1) trip.emplace_back(k, static_cast<int>(grid.index(i - 1, j)), -ih2);
            if (i < grid.nx) trip.emplace_back(k, static_cast<int>(grid.index(i + 1, j)), -ih2);
            if (j > 1) trip.emplace_back(k, static_cast<int>(grid.index(i, j - 1)), -ih2);
            if (j < grid.ny) trip.emplace_back(k, static_cast<int>(grid.index(i, j + 1)), -ih2);
        }
    SparseHamiltonian H;
    H.grid = grid;
    H.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    H.matrix.setFromTriplets(trip.begin(), trip.end());
    H.matrix.makeCompressed();
    H.potential = std::move(potential);
    H.norm_bound = 8.0 * ih2 + vmax;
    return H;
}

SparseHamiltonian assemble(const GuideLayout& layout, const TransverseWell& well, const FdOptions& options) {
    if (layout.grid.nodes() > options.node_cap)
        throw DomainError("assemble: " + std::to_string(layout.grid.nodes()) + " nodes exceed the budget of " +
                          std::to_string(options.node_cap));
    return assemble(layout.grid, potential_on_grid(layout.curve, well, layout.grid, options.threads), options.node_cap);
}

namespace {

// Simplicial: no BLAS in the factorisation, so results do not depend on the
// BLAS build or its kernel selection.
using Factor = Eigen::CholmodSimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower>;

class ShiftedSolver {
public:
    explicit ShiftedSolver(const SparseHamiltonian& H) : H_(H) {
        solver_.cholmod().print = 0;
        identity_.resize(H.matrix.rows(), H.matrix.cols());
        identity_.setIdentity();
        solver_.analyzePattern(H.matrix);
    }

    // True when H - sigma is positive definite.
    bool factor(double sigma) {
        shifted_ = H_.matrix - sigma * identity_;
        solver_.factorize(shifted_);
        sigma_ = sigma;
        return solver_.info() == Eigen::Success;
    }

    void solve(const Eigen::VectorXd& x, Eigen::VectorXd& y) const { y = solver_.solve(x); }
    [[nodiscard]] double sigma() const { return sigma_; }

private:
    const SparseHamiltonian& H_;
    Eigen::SparseMatrix<double> identity_, shifted_;
    Factor solver_;
    double sigma_ = 0.0;
};

std::vector<RitzPair> inverse_pairs(const ShiftedSolver& solver, Eigen::Index n, int k, double tol,
                                    Eigen::Index steps, int restarts) {
    return lanczos_largest(
        n, [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { solver.solve(x, y); }, k, tol, steps, restarts);
}

}  // namespace

FdSpectrum lowest_eigenvalues(const SparseHamiltonian& H, int k, double target) {
    if (k < 1) throw DomainError("lowest_eigenvalues: k must be at least 1");
    const Eigen::Index n = H.matrix.rows();
    k = std::min<int>(k, static_cast<int>(n));
    ShiftedSolver solver(H);

    // Phase 1: a pole below the spectrum. H >= -sup V bounds it from below.
    double vmax = 0.0;
    for (double v : H.potential) vmax = std::max(vmax, v);
    double sigma1 = target;
    if (!solver.factor(sigma1)) {
        sigma1 = -vmax - 1.0;
        if (!solver.factor(sigma1)) throw ToleranceError("lowest_eigenvalues: factorisation failed below -sup V");
    }
    const auto rough = inverse_pairs(solver, n, 1, 1e-8, 40, 0);
    const double theta1 = sigma1 + 1.0 / rough.front().value;

    // Phase 2: move the pole just under the lowest eigenvalue.
    const double gap = theta1 - sigma1;
    double delta = 1e-3 * gap;
    double sigma2 = theta1 - delta;
    while (!solver.factor(sigma2)) {
        delta *= 8.0;
        sigma2 = std::max(theta1 - delta, sigma1);
        if (sigma2 == sigma1) {
            if (!solver.factor(sigma1)) throw ToleranceError("lowest_eigenvalues: lost the lower pole");
            break;
        }
    }
    const auto pairs = inverse_pairs(solver, n, k, 1e-11, 80, 4);

    FdSpectrum out;
    out.shift = solver.sigma();
    out.converged = true;
    for (const auto& p : pairs) {
        FdEigenpair e;
        e.energy = solver.sigma() + 1.0 / p.value;
        e.vector = p.vector;
        e.residual = (H.matrix * p.vector - e.energy * p.vector).norm();
        out.converged = out.converged && e.residual <= 1e-8 * H.norm_bound;
        out.steps = p.steps;
        out.pairs.push_back(std::move(e));
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const FdEigenpair& x, const FdEigenpair& y) { return x.energy < y.energy; });
    return out;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::below: return "below";
        case Verdict::none_below: return "none_below";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

OracleReport discrete_spectrum_report(const CurvatureProfile& profile, const TransverseWell& well,
                                      const GroundState& state, const FdOptions& options) {
    OracleReport rep;
    rep.epsilon0 = state.epsilon0;
    const double target = state.epsilon0 - 0.5 * well.sup_norm();

    auto run = [&](double factor, FdLevel& level, bool keep) {
        const auto layout = make_guide_layout(profile, well, state, options, factor);
        rep.margin = layout.margin;
        rep.arm_extent = layout.arm_extent;
        const auto H = assemble(layout, well, options);
        auto spec = lowest_eigenvalues(H, options.eigenvalues, target);
        if (!spec.converged) throw ToleranceError("discrete_spectrum_report: eigensolver residuals above tolerance");
        level.h = layout.grid.h;
        level.nodes = layout.grid.nodes();
        for (const auto& p : spec.pairs) {
            level.energies.push_back(p.energy);
            level.residuals.push_back(p.residual);
        }
        if (keep) {
            rep.fine_grid = layout.grid;
            rep.ground_vector = std::move(spec.pairs.front().vector);
        }
    };
    run(2.0, rep.coarse, false);
    run(1.0, rep.fine, true);

    bool straddle = false;
    const std::size_t m = std::min(rep.fine.energies.size(), rep.coarse.energies.size());
    for (std::size_t i = 0; i < m; ++i) {
        FdEnergy e;
        const double ef = rep.fine.energies[i], ec = rep.coarse.energies[i];
        e.extrapolated = (4.0 * ef - ec) / 3.0;
        e.error = std::abs(ef - ec) / 3.0;
        const double gap = state.epsilon0 - e.extrapolated;
        if (gap > 3.0 * e.error) {
            e.verdict = Verdict::below;
            ++rep.count_below;
        } else if (gap > 0.0) {
            // Below eps0 but within the error bars.
            e.verdict = Verdict::inconclusive;
            straddle = true;
        } else {
            e.verdict = Verdict::none_below;
        }
        rep.energies.push_back(e);
    }
    rep.verdict = rep.count_below > 0 ? Verdict::below : (straddle ? Verdict::inconclusive : Verdict::none_below);
    return rep;
}

void write_eigenvector(const std::filesystem::path& path, const BoxGrid& grid, const Eigen::VectorXd& v) {
    if (static_cast<std::size_t>(v.size()) != grid.nodes()) throw DomainError("write_eigenvector: size mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.precision(17);
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        const Vec2 x = grid.node(k);
        out << x.x << ' ' << x.y << ' ' << v[static_cast<Eigen::Index>(k)] << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace softguide
