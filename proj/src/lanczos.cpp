#include "softguide/lanczos.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>

#include "softguide/errors.hpp"

namespace softguide {

namespace {

Eigen::VectorXd start_vector(Eigen::Index n) {
    Eigen::VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        // splitmix64 of the index
        std::uint64_t z = static_cast<std::uint64_t>(i) + 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        q[i] = 1.0 + 0.5 * (static_cast<double>(z >> 11) * 0x1.0p-53 - 0.5);
    }
    return q.normalized();
}

struct Cycle {
    std::vector<RitzPair> pairs;
    bool done = false;
};

Cycle lanczos_cycle(Eigen::Index n, const SymmetricApply& apply, int count, double tol, Eigen::Index cap,
                    const Eigen::VectorXd& q0) {
    Eigen::MatrixXd Q(n, cap);
    Q.col(0) = q0;
    std::vector<double> alpha, beta;
    Eigen::VectorXd w(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    Eigen::Index m = 0;
    double last_beta = 0.0, norm_est = 0.0;
    bool done = false;

    auto ritz = [&](Eigen::Index steps) {
        Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(alpha.data(), steps);
        if (steps == 1) {
            Eigen::MatrixXd one(1, 1);
            one(0, 0) = d[0];
            tri.compute(one);
        } else {
            Eigen::VectorXd e = Eigen::Map<Eigen::VectorXd>(beta.data(), steps - 1);
            tri.computeFromTridiagonal(d, e);
        }
    };
    auto converged = [&](Eigen::Index steps, double b) {
        const int avail = std::min<int>(count, static_cast<int>(steps));
        if (avail < count) return false;
        for (int k = 0; k < count; ++k) {
            const Eigen::Index idx = steps - 1 - k;
            const double theta = tri.eigenvalues()[idx];
            if (b * std::abs(tri.eigenvectors()(steps - 1, idx)) > 0.1 * tol * std::max(std::abs(theta), 1e-300))
                return false;
        }
        return true;
    };

    for (Eigen::Index j = 0; j < cap; ++j) {
        apply(Q.col(j), w);
        const double a = Q.col(j).dot(w);
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        const double b = w.norm();
        m = j + 1;
        last_beta = b;
        norm_est = std::max(norm_est, std::abs(a) + b);
        if (b <= 1e-14 * std::max(norm_est, 1e-300)) {
            // Invariant subspace: the Ritz values are exact.
            last_beta = 0.0;
            done = true;
            break;
        }
        if (m >= count && (m % 5 == 0 || m == cap)) {
            ritz(m);
            if (converged(m, b)) {
                done = true;
                break;
            }
        }
        beta.push_back(b);
        if (j + 1 < cap) Q.col(j + 1) = w / b;
    }
    ritz(m);
    Cycle out;
    out.done = done;
    const int avail = std::min<int>(count, static_cast<int>(m));
    for (int k = 0; k < avail; ++k) {
        const Eigen::Index idx = m - 1 - k;
        RitzPair p;
        p.value = tri.eigenvalues()[idx];
        p.vector = Q.leftCols(m) * tri.eigenvectors().col(idx);
        p.vector.normalize();
        if (p.vector.sum() < 0.0) p.vector = -p.vector;
        p.estimate = last_beta * std::abs(tri.eigenvectors()(m - 1, idx)) / std::max(std::abs(p.value), 1e-300);
        p.steps = static_cast<int>(m);
        out.pairs.push_back(std::move(p));
    }
    return out;
}

}  // namespace

std::vector<RitzPair> lanczos_largest(Eigen::Index n, const SymmetricApply& apply, int count, double tol,
                                      Eigen::Index max_steps, int restarts) {
    if (n <= 0) throw DomainError("lanczos_largest: empty operator");
    count = std::clamp(count, 1, static_cast<int>(n));
    const Eigen::Index cap = std::clamp<Eigen::Index>(max_steps, std::min<Eigen::Index>(n, count + 1), n);
    Eigen::VectorXd q = start_vector(n);
    int total = 0;
    for (int cycle = 0;; ++cycle) {
        auto c = lanczos_cycle(n, apply, count, tol, cap, q);
        total += c.pairs.empty() ? 0 : c.pairs.front().steps;
        if (c.done || cycle >= restarts) {
            for (auto& p : c.pairs) p.steps = total;
            return std::move(c.pairs);
        }
        q.setZero();
        for (const auto& p : c.pairs) q += p.vector;
        q.normalize();
    }
}

}  // namespace softguide
