#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "softguide/errors.hpp"
#include "softguide/fd_oracle.hpp"

using namespace softguide;

namespace {

constexpr double pi = std::numbers::pi;

// Deep narrow channel around a quarter turn; the BS engine finds one bound
// state at kappa* = 3.9539751814, E = -15.6339197351.
constexpr double bs_energy = -15.6339197351;

CurvatureProfile quarter_turn() { return CurvatureProfile::smooth_bump(5.0, pi / 10.0); }
TransverseWell deep_well() { return TransverseWell::flat_bottom(50.0, 0.1, 0.1, 0.1); }

double discrete_box_level(int m, int n, const BoxGrid& g) {
    const double ih2 = 1.0 / (g.h * g.h);
    const auto sx = std::sin(m * pi * g.h / (2.0 * g.width()));
    const auto sy = std::sin(n * pi * g.h / (2.0 * g.height()));
    return 4.0 * ih2 * (sx * sx + sy * sy);
}

}  // namespace

TEST_CASE("Dirichlet rectangle: exact discrete levels and second-order convergence") {
    double prev_err = 0.0;
    for (int n : {31, 63}) {
        const BoxGrid g{0.0, 0.0, 1.0 / (n + 1), 2 * n + 1, n};  // 2 x 1
        const auto H = assemble(g, std::vector<double>(g.nodes(), 0.0));
        const auto spec = lowest_eigenvalues(H, 3, -1.0);
        REQUIRE(spec.pairs.size() == 3);
        CHECK(spec.converged);
        CHECK(spec.pairs[0].energy == doctest::Approx(discrete_box_level(1, 1, g)).epsilon(1e-10));
        CHECK(spec.pairs[1].energy == doctest::Approx(discrete_box_level(2, 1, g)).epsilon(1e-10));
        CHECK(spec.pairs[2].energy == doctest::Approx(discrete_box_level(3, 1, g)).epsilon(1e-10));
        const double err = std::abs(spec.pairs[0].energy - 1.25 * pi * pi);
        if (prev_err > 0.0) {
            const double order = std::log2(prev_err / err);
            CHECK(order >= 1.8);
            CHECK(order <= 2.2);
        }
        prev_err = err;
    }
    const auto sq = square_box(0.0, 0.0, pi, 40);
    CHECK(sq.width() == doctest::Approx(pi));
    const auto spec = lowest_eigenvalues(assemble(sq, std::vector<double>(sq.nodes(), 0.0)), 1, 0.0);
    CHECK(spec.pairs[0].energy == doctest::Approx(2.0).epsilon(2e-3));
}

TEST_CASE("assembled Hamiltonian: symmetric 5-point stencil, node budget") {
    const BoxGrid g{0.0, 0.0, 0.5, 5, 4};
    std::vector<double> V(g.nodes());
    for (std::size_t k = 0; k < V.size(); ++k) V[k] = 0.3 * static_cast<double>(k % 7);
    const auto H = assemble(g, V);
    const Eigen::SparseMatrix<double> T = H.matrix.transpose();
    CHECK((H.matrix - T).norm() == 0.0);
    const Eigen::MatrixXd D(H.matrix);
    for (int j = 1; j <= g.ny; ++j)
        for (int i = 1; i <= g.nx; ++i) {
            const auto k = static_cast<Eigen::Index>(g.index(i, j));
            CHECK(D(k, k) == doctest::Approx(16.0 - V[static_cast<std::size_t>(k)]));
            const int walls = (i == 1) + (i == g.nx) + (j == 1) + (j == g.ny);
            CHECK(D.row(k).sum() + V[static_cast<std::size_t>(k)] == doctest::Approx(4.0 * walls));
        }
    CHECK(H.norm_bound == doctest::Approx(32.0 + 1.8));
    CHECK_THROWS_AS(assemble(g, V, 10), DomainError);
}

TEST_CASE("potential sampling: straight guide and a node on the curve") {
    const auto well = deep_well();
    const auto state = solve_ground_state(well);
    FdOptions opt;
    opt.h = 0.025;
    const auto layout = make_guide_layout(CurvatureProfile::zero(), well, state, opt);
    const auto V = potential_on_grid(layout.curve, well, layout.grid);
    const double h = layout.grid.h;
    CHECK(0.2 / h == doctest::Approx(std::round(0.2 / h)));
    CHECK(static_cast<long>(std::round(0.2 / h)) % 2 == 0);
    for (std::size_t k = 0; k < V.size(); ++k) {
        const double y = layout.grid.node(k).y;
        CHECK(std::abs(std::abs(y) - 0.1) > 0.49 * h);  // J edges midway between grid lines
        const double expected = std::abs(y) < 0.1 ? 50.0 : 0.0;
        if (V[k] != expected) CHECK(V[k] == expected);
    }

    const BoxGrid g{-1.0, -1.0, 0.1, 19, 19};
    CHECK(g.node(10, 10).x == doctest::Approx(0.0));
    const auto Vg = potential_on_grid(layout.curve, well, g);
    CHECK(Vg[g.index(10, 10)] == 50.0);
}

TEST_CASE("potential sampling: area integral carries the Jacobian 1 + u gamma") {
    // Off-centre support J = [-0.02, 0.1] so the first moment of V is nonzero.
    const auto well = TransverseWell::flat_bottom(50.0, 0.02, 0.1, 0.1);
    const auto profile = quarter_turn();
    const double L = pi / 10.0;
    const PlanarCurve curve(profile, 0.0, Vec2{}, ArcGrid{-2.0, 2.0, 0.001});
    const double h = 0.001;
    const BoxGrid g{-0.6, -0.6, h, 1199, 1199};
    const auto V = potential_on_grid(curve, well, g);
    double sum = 0.0;
    for (std::size_t k = 0; k < V.size(); ++k) {
        if (V[k] == 0.0) continue;
        const auto q = strip_coordinates_of(curve, g.node(k), 0.1);
        REQUIRE(q);
        if (std::abs(q->s) <= L) sum += V[k] * h * h;
    }
    const double mass = 50.0 * 0.12;
    const double moment = 50.0 * (0.1 * 0.1 - 0.02 * 0.02) / 2.0;
    const double beta = turning_angle(profile, -L, L);
    const double expected = 2.0 * L * mass + beta * moment;
    CHECK(sum == doctest::Approx(expected).epsilon(0.02));
    CHECK(std::abs(sum - 2.0 * L * mass) > 0.05 * expected);
}

TEST_CASE("eigensolver: ordering, residuals, domain monotonicity") {
    const auto well = deep_well();
    const auto state = solve_ground_state(well);
    FdOptions opt;
    opt.h = 0.025;
    double previous = 1e300;
    for (double arm : {1.0, 2.0, 4.0}) {
        opt.arm_extent = arm;
        opt.margin = 1.0;
        const auto layout = make_guide_layout(CurvatureProfile::zero(), well, state, opt);
        const auto H = assemble(layout, well, opt);
        const auto spec = lowest_eigenvalues(H, 3, state.epsilon0 - 25.0);
        CHECK(spec.converged);
        for (std::size_t i = 1; i < spec.pairs.size(); ++i) CHECK(spec.pairs[i - 1].energy < spec.pairs[i].energy);
        for (const auto& p : spec.pairs) CHECK(p.residual < 1e-8 * H.norm_bound);
        // Nested boxes with the same lattice: the Dirichlet ground level decreases.
        CHECK(spec.pairs[0].energy < previous);
        previous = spec.pairs[0].energy;
    }
}

TEST_CASE("straight guide: no level below eps0, lowest level approaches it from above") {
    const auto well = deep_well();
    const auto state = solve_ground_state(well);
    FdOptions opt;
    opt.h = 0.025;
    double previous = 1e300;
    for (double arm : {2.0, 4.0, 8.0}) {
        opt.arm_extent = arm;
        const auto rep = discrete_spectrum_report(CurvatureProfile::zero(), well, state, opt);
        CHECK(rep.verdict == Verdict::none_below);
        CHECK(rep.count_below == 0);
        const auto& e = rep.energies.front();
        CHECK(e.extrapolated > state.epsilon0);
        CHECK(e.extrapolated < previous);
        // Longitudinal box mode: the gap closes like (pi / L)^2.
        const double L = rep.fine_grid.width();
        const double gap = pi * pi / (L * L);
        CHECK(std::abs(e.extrapolated - state.epsilon0 - gap) < 0.05 * gap + 1e-3);
        previous = e.extrapolated;
    }
}

TEST_CASE("quarter turn, coarse grid: mirror image has the same ground level") {
    const auto well = deep_well();
    const auto state = solve_ground_state(well);
    FdOptions opt;
    opt.h = 0.05;
    opt.margin = 10.0;  // walls far beyond the slow longitudinal decay
    double level[2];
    for (int k = 0; k < 2; ++k) {
        const auto profile = k == 0 ? quarter_turn() : quarter_turn().mirrored();
        const auto layout = make_guide_layout(profile, well, state, opt);
        const auto spec = lowest_eigenvalues(assemble(layout, well, opt), 1, state.epsilon0 - 25.0);
        level[k] = spec.pairs.front().energy;
    }
    CHECK(level[0] < state.epsilon0);
    CHECK(level[0] == doctest::Approx(level[1]).epsilon(1e-9));
}

TEST_CASE("quarter turn: one level below eps0, matching the BS bound state") {
    const auto well = deep_well();
    const auto state = solve_ground_state(well);
    const auto rep = discrete_spectrum_report(quarter_turn(), well, state);
    CHECK(rep.fine.h == doctest::Approx(0.0125));
    CHECK(rep.coarse.h == doctest::Approx(0.025));
    CHECK(rep.verdict == Verdict::below);
    CHECK(rep.count_below == 1);
    const auto& e = rep.energies.front();
    CHECK(e.verdict == Verdict::below);
    CHECK(std::abs(e.extrapolated - bs_energy) <= 3.0 * e.error);
    CHECK(e.error < 0.05);

    // Ground state keeps one sign.
    const Eigen::VectorXd& v = rep.ground_vector;
    CHECK(v.minCoeff() > -1e-8 * v.maxCoeff());

    const auto path = std::filesystem::temp_directory_path() / "softguide_fd_vector.txt";
    write_eigenvector(path, rep.fine_grid, v);
    std::ifstream in(path);
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == rep.fine_grid.nodes());
    std::filesystem::remove(path);
    CHECK_THROWS_AS(write_eigenvector("/nonexistent-dir/v.txt", rep.fine_grid, v), IoError);
}
