#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace softguide {

struct RitzPair {
    double value = 0.0;
    Eigen::VectorXd vector;  // unit norm, sign fixed by a positive component sum
    double estimate = 0.0;   // Lanczos bound on ||A v - value v|| / |value|
    int steps = 0;
};

// y = A x for a symmetric operator A.
using SymmetricApply = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& y)>;

// Largest `count` eigenpairs of A by Lanczos with full reorthogonalisation,
// restarted from the sum of the wanted Ritz vectors when max_steps is reached.
// The start vector is fixed, so results are reproducible.
std::vector<RitzPair> lanczos_largest(Eigen::Index n, const SymmetricApply& apply, int count, double tol,
                                      Eigen::Index max_steps, int restarts = 0);

}  // namespace softguide
