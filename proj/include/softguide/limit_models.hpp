#pragma once

#include <vector>

#include "softguide/transverse_spectrum.hpp"

namespace softguide {

// Strength of the delta interaction obtained by squeezing V onto the curve.
struct DeltaCoupling {
    double alpha = 0.0;      // integral of V over [-a, a]
    double threshold = 0.0;  // -alpha^2 / 4
};

DeltaCoupling delta_coupling(const TransverseWell& well);

// V_eps(u) = V(u / eps) / eps, eps in (0, 1]; the integral of V is preserved.
TransverseWell scaled_well(const TransverseWell& well, double eps);

// Bottom of the Dirichlet Laplacian on an interval of the given length.
double dirichlet_threshold(double length);
// Same for the support interval J of the well.
double dirichlet_threshold(const TransverseWell& well);

struct DeltaLimitRow {
    double eps = 0.0;
    double epsilon0 = 0.0;
    double gap = 0.0;  // |epsilon0(V_eps) + alpha^2 / 4|
    bool above_threshold = false;  // epsilon0 > -alpha^2 / 4, observed
};

struct DeltaLimitStudy {
    DeltaCoupling coupling;
    std::vector<DeltaLimitRow> rows;
    bool gaps_decreasing = false;
    double final_ratio = 0.0;  // gap at the last rung / gap at the first
};

std::vector<double> default_eps_ladder();  // 1, 1/2, 1/4, 1/8, 1/16

DeltaLimitStudy delta_limit_study(const TransverseWell& well, const std::vector<double>& ladder = default_eps_ladder(),
                                  int threads = 1);

struct HardWallRow {
    double depth = 0.0;
    double epsilon0 = 0.0;
    double shifted = 0.0;  // epsilon0 + V0
};

struct HardWallTrend {
    double dirichlet = 0.0;  // pi^2 / |J|^2
    std::vector<HardWallRow> rows;
    bool increasing = false;
    bool below_dirichlet = false;
};

// Flat-bottom wells on J = [-a1, a2] with growing depth; epsilon0 + V0 should
// climb toward the Dirichlet threshold from below.
HardWallTrend hard_wall_trend(double a1, double a2, double halfwidth,
                              const std::vector<double>& depths = {10.0, 100.0, 1000.0});

struct LimitSummary {
    DeltaLimitStudy delta;
    double dirichlet = 0.0;
    HardWallTrend hard_wall;  // empty rows unless the well is flat-bottom
};

LimitSummary limit_summary(const TransverseWell& well, const std::vector<double>& ladder = default_eps_ladder(),
                           int threads = 1);

}  // namespace softguide
