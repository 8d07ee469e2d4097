// fitting.hpp: power law with offset, ξ²_min(N) = a N^b + const, by
// Levenberg–Marquardt, and a golden-section minimiser with a coarse pre-grid.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dicke/errors.hpp"

namespace dicke {

struct FitResult {
    double a = 0.0, b = 0.0, c = 0.0;  // c is the additive constant
    double se_a = 0.0, se_b = 0.0, se_c = 0.0;
    double residual_norm = 0.0;
    double N_min = 0.0, N_max = 0.0;
    int points = 0;
    int iterations = 0;
    bool const_at_bound = false;  // const pinned at 0 by the non-negativity constraint
    bool log_space = false;

    double operator()(double N) const { return a * std::pow(N, b) + c; }
};

struct FitOptions {
    /// Keep const ≥ 0 (a squeezing floor cannot be negative).
    bool nonnegative_const = true;
    /// Fit log ξ² instead of ξ² (sensitivity analysis).
    bool log_space = false;
    int max_iter = 500;
    double step_tol = 1e-10;
};

namespace detail {

inline double model(const Eigen::Vector3d& p, double N) { return p(0) * std::pow(N, p(1)) + p(2); }

inline void residuals(const Eigen::Vector3d& p, std::span<const double> N, std::span<const double> y, bool logs,
                      Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    const auto n = static_cast<Eigen::Index>(N.size());
    r.resize(n);
    J.resize(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double Nb = std::pow(N[i], p(1));
        const double f = p(0) * Nb + p(2);
        Eigen::Vector3d g(Nb, p(0) * Nb * std::log(N[i]), 1.0);
        if (logs) {
            r(i) = std::log(f) - std::log(y[i]);
            g /= f;
        } else {
            r(i) = f - y[i];
        }
        J.row(i) = g.transpose();
    }
}

}  // namespace detail

/// Unweighted least squares. Start: log-log line through y − const₀ with
/// const₀ = min(y)/2, then damped Gauss–Newton until the relative step is
/// below step_tol.
inline FitResult fit_power_law(std::span<const double> N, std::span<const double> y, const FitOptions& opt = {}) {
    if (N.size() != y.size()) throw DomainError("fit: N and value arrays differ in length");
    if (N.size() < 4) throw DomainError("fit needs at least 4 points for 3 parameters");
    for (std::size_t i = 0; i < N.size(); ++i)
        if (!(N[i] > 0.0) || !std::isfinite(y[i])) throw DomainError("fit: N must be positive and values finite");
    if (opt.log_space)
        for (double v : y)
            if (!(v > 0.0)) throw DomainError("log-space fit needs positive values");

    const auto n = static_cast<Eigen::Index>(N.size());
    const double ymin = *std::min_element(y.begin(), y.end());
    const double c0 = ymin > 0.0 ? 0.5 * ymin : ymin - 0.5 * std::abs(ymin) - 1e-12;
    // log-log line for the start point
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lx = std::log(N[i]);
        const double ly = std::log(std::max(y[i] - c0, 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    const double b0 = den != 0.0 ? (n * sxy - sx * sy) / den : -1.0;
    const double a0 = std::exp((sy - b0 * sx) / n);

    Eigen::Vector3d p(a0, b0, c0);
    if (opt.nonnegative_const) p(2) = std::max(p(2), 0.0);
    bool c_fixed = false;

    std::vector<std::array<double, 3>> trace;
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    auto cost = [&](const Eigen::Vector3d& q) {
        Eigen::VectorXd rr;
        Eigen::MatrixXd JJ;
        if (opt.log_space)
            for (Eigen::Index i = 0; i < n; ++i)
                if (!(detail::model(q, N[i]) > 0.0)) return std::numeric_limits<double>::infinity();
        detail::residuals(q, N, y, opt.log_space, rr, JJ);
        return rr.squaredNorm();
    };

    double lambda = 1e-3;
    FitResult out;
    bool converged = false;
    for (int it = 0; it < opt.max_iter; ++it) {
        trace.push_back({p(0), p(1), p(2)});
        if (!p.allFinite()) break;
        detail::residuals(p, N, y, opt.log_space, r, J);
        const double c_now = r.squaredNorm();
        const int k = c_fixed ? 2 : 3;
        const Eigen::MatrixXd Jk = J.leftCols(k);
        const Eigen::MatrixXd JtJ = Jk.transpose() * Jk;
        const Eigen::VectorXd Jtr = Jk.transpose() * r;
        bool accepted = false;
        Eigen::Vector3d step = Eigen::Vector3d::Zero();
        for (int tries = 0; tries < 60; ++tries) {
            Eigen::MatrixXd Aug = JtJ;
            for (int d = 0; d < k; ++d) Aug(d, d) += lambda * std::max(JtJ(d, d), 1e-300);
            step.head(k) = -Aug.ldlt().solve(Jtr);
            Eigen::Vector3d trial = p + step;
            if (opt.nonnegative_const && !c_fixed && trial(2) < 0.0) {
                if (p(2) == 0.0) break;  // bound is active: pin const below
                trial(2) = 0.0;
            }
            step = trial - p;
            if (cost(trial) <= c_now) {
                p = trial;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        out.iterations = it + 1;
        if (!accepted && opt.nonnegative_const && !c_fixed && p(2) == 0.0) {
            c_fixed = true;
            lambda = 1e-3;
            continue;
        }
        // no accepted step at any damping: stationary to working precision
        if (!accepted || step.norm() / (p.norm() + 1e-300) < opt.step_tol) {
            converged = true;
            break;
        }
    }
    trace.push_back({p(0), p(1), p(2)});
    if (!converged || !p.allFinite())
        throw FitDivergenceError("power-law fit did not converge", std::move(trace));

    detail::residuals(p, N, y, opt.log_space, r, J);
    out.a = p(0);
    out.b = p(1);
    out.c = p(2);
    out.const_at_bound = c_fixed || (opt.nonnegative_const && p(2) == 0.0);
    out.log_space = opt.log_space;
    out.residual_norm = r.norm();
    out.points = static_cast<int>(n);
    out.N_min = *std::min_element(N.begin(), N.end());
    out.N_max = *std::max_element(N.begin(), N.end());
    const int k = out.const_at_bound ? 2 : 3;
    if (n > k) {
        const double s2 = r.squaredNorm() / static_cast<double>(n - k);
        const Eigen::MatrixXd Jk = J.leftCols(k);
        const Eigen::MatrixXd cov = s2 * (Jk.transpose() * Jk).completeOrthogonalDecomposition().pseudoInverse();
        out.se_a = std::sqrt(std::max(cov(0, 0), 0.0));
        out.se_b = std::sqrt(std::max(cov(1, 1), 0.0));
        out.se_c = k == 3 ? std::sqrt(std::max(cov(2, 2), 0.0)) : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scalar minimisation

struct ScalarMinimum {
    double x = 0.0;
    double f = 0.0;
    int evaluations = 0;
    std::vector<double> pre_grid_x, pre_grid_f;
    bool non_unimodal = false;  // NonUnimodalWarning
    bool flat = false;          // pre-grid spread below flat_tol relative
    bool at_edge = false;       // best pre-grid point on the bracket edge
};

struct GoldenOptions {
    int pre_grid = 8;
    double x_tol = 1e-3;  // absolute, in the search variable
    int max_iter = 200;
    double flat_tol = 1e-6;
};

/// Golden-section search on [lo, hi]. A pre-grid of evenly spaced points
/// checks unimodality and narrows the bracket to the neighbours of its best point.
inline ScalarMinimum golden_section(const std::function<double(double)>& f, double lo, double hi,
                                    const GoldenOptions& opt = {}) {
    if (!(hi > lo)) throw DomainError("golden_section: empty bracket");
    if (opt.pre_grid < 3) throw DomainError("golden_section: pre-grid needs at least 3 points");
    ScalarMinimum m;
    const int n = opt.pre_grid;
    for (int i = 0; i < n; ++i) {
        const double x = lo + (hi - lo) * i / (n - 1);
        m.pre_grid_x.push_back(x);
        m.pre_grid_f.push_back(f(x));
        ++m.evaluations;
    }
    const auto& F = m.pre_grid_f;
    std::size_t best = 0;
    for (std::size_t i = 1; i < F.size(); ++i)
        if (F[i] < F[best]) best = i;
    // unimodal: non-increasing up to best, non-decreasing after
    for (std::size_t i = 1; i <= best; ++i)
        if (F[i] > F[i - 1]) m.non_unimodal = true;
    for (std::size_t i = best + 1; i < F.size(); ++i)
        if (F[i] < F[i - 1]) m.non_unimodal = true;
    const double fmax = *std::max_element(F.begin(), F.end());
    m.flat = (fmax - F[best]) <= opt.flat_tol * std::max(std::abs(F[best]), 1e-300);
    m.at_edge = best == 0 || best + 1 == F.size();
    m.x = m.pre_grid_x[best];
    m.f = F[best];
    if (m.flat) return m;

    double a = m.pre_grid_x[best == 0 ? 0 : best - 1];
    double b = m.pre_grid_x[std::min(best + 1, F.size() - 1)];
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    m.evaluations += 2;
    for (int it = 0; it < opt.max_iter && (b - a) > opt.x_tol; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
        ++m.evaluations;
    }
    const double xb = f1 <= f2 ? x1 : x2;
    const double fb = std::min(f1, f2);
    if (fb < m.f) {
        m.x = xb;
        m.f = fb;
    }
    return m;
}

}  // namespace dicke
