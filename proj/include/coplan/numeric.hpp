#pragma once

// Shared numeric kernels: stable log-sum-exp, linear-system solvers used by
// policy evaluation and the semi-MDP outcome model, and a seeded sampler.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace coplan {

using SparseRow = std::vector<std::pair<int, double>>;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// log(sum_i exp(x_i)) with max shift; -inf for an empty input.
inline double log_sum_exp(const std::vector<double>& xs) {
    if (xs.empty()) return -kInf;
    double m = *std::max_element(xs.begin(), xs.end());
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

/// Dense LU with partial pivoting, solving A x = b for several right-hand
/// sides in place. A is n*n row major; rhs is a list of n-vectors.
class DenseLU {
public:
    DenseLU(std::vector<double> a, int n) : a_(std::move(a)), n_(n), piv_(n) {
        if ((int)a_.size() != n * n) throw std::invalid_argument("DenseLU: bad matrix size");
        for (int i = 0; i < n_; ++i) piv_[i] = i;
        for (int k = 0; k < n_; ++k) {
            int p = k;
            double best = std::fabs(a_[k * n_ + k]);
            for (int i = k + 1; i < n_; ++i) {
                double v = std::fabs(a_[i * n_ + k]);
                if (v > best) { best = v; p = i; }
            }
            if (best < 1e-300) throw std::runtime_error("DenseLU: singular matrix");
            if (p != k) {
                for (int j = 0; j < n_; ++j) std::swap(a_[k * n_ + j], a_[p * n_ + j]);
                std::swap(piv_[k], piv_[p]);
            }
            double d = a_[k * n_ + k];
            for (int i = k + 1; i < n_; ++i) {
                double f = a_[i * n_ + k] / d;
                a_[i * n_ + k] = f;
                for (int j = k + 1; j < n_; ++j) a_[i * n_ + j] -= f * a_[k * n_ + j];
            }
        }
    }

    std::vector<double> solve(const std::vector<double>& b) const {
        std::vector<double> x(n_);
        for (int i = 0; i < n_; ++i) x[i] = b[piv_[i]];
        for (int i = 1; i < n_; ++i) {
            double s = x[i];
            for (int j = 0; j < i; ++j) s -= a_[i * n_ + j] * x[j];
            x[i] = s;
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double s = x[i];
            for (int j = i + 1; j < n_; ++j) s -= a_[i * n_ + j] * x[j];
            x[i] = s / a_[i * n_ + i];
        }
        return x;
    }

private:
    std::vector<double> a_;
    int n_;
    std::vector<int> piv_;
};

/// Solves x = b + M x for a sparse substochastic M (fixed-point form used by
/// policy evaluation and absorption masses). Small systems are eliminated
/// directly; larger ones run Gauss-Seidel sweeps to `tol`.
inline std::vector<double> solve_fixed_point(const std::vector<SparseRow>& m,
                                             const std::vector<double>& b,
                                             double tol = 1e-12,
                                             int max_sweeps = 500000) {
    const int n = (int)b.size();
    if ((int)m.size() != n) throw std::invalid_argument("solve_fixed_point: size mismatch");
    const int direct_cutoff = 600;
    if (n <= direct_cutoff) {
        std::vector<double> a(std::size_t(n) * n, 0.0);
        for (int i = 0; i < n; ++i) {
            a[std::size_t(i) * n + i] = 1.0;
            for (auto [j, w] : m[i]) a[std::size_t(i) * n + j] -= w;
        }
        return DenseLU(std::move(a), n).solve(b);
    }
    std::vector<double> x(n, 0.0);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double delta = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = b[i];
            for (auto [j, w] : m[i]) v += w * x[j];
            delta = std::max(delta, std::fabs(v - x[i]));
            x[i] = v;
        }
        if (delta < tol) return x;
    }
    throw std::runtime_error("solve_fixed_point: no convergence after " +
                             std::to_string(max_sweeps) + " sweeps");
}

/// Draws an index from a sparse distribution row; weights must sum to ~1.
inline int sample_row(const SparseRow& row, std::mt19937_64& rng) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (auto [j, w] : row) {
        acc += w;
        if (u <= acc) return j;
    }
    return row.back().first;
}

inline int sample_dense(const std::vector<double>& row, std::mt19937_64& rng) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (int j = 0; j < (int)row.size(); ++j) {
        acc += row[j];
        if (u <= acc) return j;
    }
    return (int)row.size() - 1;
}

}  // namespace coplan
