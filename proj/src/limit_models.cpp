#include "softguide/limit_models.hpp"

#include <cmath>
#include <numbers>

#include "softguide/errors.hpp"
#include "softguide/parallel.hpp"
#include "softguide/special_math.hpp"

namespace softguide {

DeltaCoupling delta_coupling(const TransverseWell& well) {
    double alpha = 0.0;
    switch (well.kind()) {
        case WellKind::flat_bottom:
            alpha = well.depth() * (well.a1() + well.a2());
            break;
        case WellKind::sampled: {
            // The interpolant is piecewise linear, so the trapezoid sum is exact.
            const auto& u = well.table_u();
            const auto& v = well.table_v();
            for (std::size_t i = 1; i < u.size(); ++i) alpha += 0.5 * (u[i] - u[i - 1]) * (v[i] + v[i - 1]);
            break;
        }
        case WellKind::function: {
            const auto pieces = well.support_pieces();
            const double width = pieces.back() - pieces.front();
            const auto rule =
                composite_rule(refine_to_length(pieces, width / 64.0), cached_gauss_legendre(20));
            alpha = rule.integrate([&](double x) { return well(x); });
            break;
        }
    }
    return {alpha, -0.25 * alpha * alpha};
}

TransverseWell scaled_well(const TransverseWell& well, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("scaled_well: eps must lie in (0, 1]");
    return eps == 1.0 ? well : well.scaled(eps);
}

double dirichlet_threshold(double length) {
    if (!(length > 0.0)) throw DomainError("dirichlet_threshold: |J| must be positive");
    return std::numbers::pi * std::numbers::pi / (length * length);
}

double dirichlet_threshold(const TransverseWell& well) {
    const auto pieces = well.support_pieces();
    return dirichlet_threshold(pieces.back() - pieces.front());
}

std::vector<double> default_eps_ladder() { return {1.0, 0.5, 0.25, 0.125, 0.0625}; }

DeltaLimitStudy delta_limit_study(const TransverseWell& well, const std::vector<double>& ladder, int threads) {
    DeltaLimitStudy out;
    out.coupling = delta_coupling(well);
    out.rows.resize(ladder.size());
    parallel_for(ladder.size(), threads, [&](std::size_t i) {
        const auto state = solve_ground_state(scaled_well(well, ladder[i]));
        auto& row = out.rows[i];
        row.eps = ladder[i];
        row.epsilon0 = state.epsilon0;
        row.gap = std::abs(state.epsilon0 - out.coupling.threshold);
        row.above_threshold = state.epsilon0 > out.coupling.threshold;
    });
    out.gaps_decreasing = true;
    for (std::size_t i = 1; i < out.rows.size(); ++i)
        out.gaps_decreasing = out.gaps_decreasing && out.rows[i].gap < out.rows[i - 1].gap;
    if (!out.rows.empty() && out.rows.front().gap > 0.0) out.final_ratio = out.rows.back().gap / out.rows.front().gap;
    return out;
}

HardWallTrend hard_wall_trend(double a1, double a2, double halfwidth, const std::vector<double>& depths) {
    HardWallTrend out;
    out.dirichlet = dirichlet_threshold(a1 + a2);
    out.increasing = true;
    out.below_dirichlet = true;
    for (double v0 : depths) {
        const auto state = solve_ground_state(TransverseWell::flat_bottom(v0, a1, a2, halfwidth));
        HardWallRow row{v0, state.epsilon0, state.epsilon0 + v0};
        if (!out.rows.empty()) out.increasing = out.increasing && row.shifted > out.rows.back().shifted;
        out.below_dirichlet = out.below_dirichlet && row.shifted < out.dirichlet;
        out.rows.push_back(row);
    }
    return out;
}

LimitSummary limit_summary(const TransverseWell& well, const std::vector<double>& ladder, int threads) {
    LimitSummary out;
    out.delta = delta_limit_study(well, ladder, threads);
    out.dirichlet = dirichlet_threshold(well);
    if (well.kind() == WellKind::flat_bottom) out.hard_wall = hard_wall_trend(well.a1(), well.a2(), well.halfwidth());
    return out;
}

}  // namespace softguide
