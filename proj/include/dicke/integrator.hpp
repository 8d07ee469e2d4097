// integrator.hpp: adaptive Dormand-Prince 5(4) integrator for complex vector
// ODEs, with the 4th-order continuous extension used to sample output grids.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "dicke/errors.hpp"

namespace dicke {

struct IntegratorOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double initial_step = 0.0;  // 0: automatic
    double max_step = 0.0;      // 0: unbounded
    double min_step = 0.0;      // 0: relative to |t|
    long max_steps = 50'000'000;
};

struct IntegratorStats {
    long accepted = 0;
    long rejected = 0;
    long rhs_evaluations = 0;
    bool stopped_early = false;
};

namespace dopri {

// Butcher tableau
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense output
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

}  // namespace dopri

/// Integrates dy/dt = f(t, y) from t_grid.front() to t_grid.back(), calling
/// `observe(t, y)` at every grid point (including the first). `observe`
/// returns false to stop the integration early.
///
/// `rhs(t, y, dydt)` must fill dydt (already sized) and may not alias y.
template <class Rhs, class Observer>
IntegratorStats integrate_dopri5(Rhs&& rhs, Eigen::VectorXcd y, std::span<const double> t_grid,
                                 Observer&& observe, const IntegratorOptions& opt = {}) {
    using namespace dopri;
    using Vec = Eigen::VectorXcd;
    IntegratorStats stats;
    if (t_grid.empty()) return stats;
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("time grid must be strictly increasing");

    const Eigen::Index n = y.size();
    double t = t_grid.front();
    if (!observe(t, static_cast<const Vec&>(y))) {
        stats.stopped_early = true;
        return stats;
    }
    if (t_grid.size() == 1) return stats;
    const double t_end = t_grid.back();

    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), yout(n);
    auto f = [&](double tt, const Vec& yy, Vec& out) {
        rhs(tt, yy, out);
        ++stats.rhs_evaluations;
    };

    auto error_norm = [&](const Vec& a, const Vec& b, const Vec& e) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt.atol + opt.rtol * std::max(std::abs(a[i]), std::abs(b[i]));
            const double r = std::abs(e[i]) / sc;
            s += r * r;
        }
        return std::sqrt(s / static_cast<double>(std::max<Eigen::Index>(n, 1)));
    };

    f(t, y, k1);
    double h = opt.initial_step;
    if (h <= 0.0) {
        // Hairer's starting step heuristic (first stage only)
        double d0 = 0.0, d1n = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt.atol + opt.rtol * std::abs(y[i]);
            d0 += std::norm(y[i]) / (sc * sc);
            d1n += std::norm(k1[i]) / (sc * sc);
        }
        d0 = std::sqrt(d0 / n);
        d1n = std::sqrt(d1n / n);
        h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 * (t_end - t) : 0.01 * d0 / d1n;
        h = std::min(h, t_end - t);
    }
    if (opt.max_step > 0.0) h = std::min(h, opt.max_step);

    std::size_t next = 1;  // next grid index to emit
    double err_prev = 1e-4;

    while (next < t_grid.size()) {
        if (stats.accepted + stats.rejected >= opt.max_steps) throw IntegratorError("maximum number of steps exceeded");
        const double min_h = opt.min_step > 0.0 ? opt.min_step : 1e-14 * std::max(1.0, std::abs(t));
        if (h < min_h) throw IntegratorError("step size underflow at t = " + std::to_string(t));
        if (t + h > t_end) h = t_end - t;

        ytmp = y + h * a21 * k1;
        f(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        f(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        f(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + h, ytmp, k6);
        ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        f(t + h, ynew, k7);
        ytmp = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double err = error_norm(y, ynew, ytmp);

        if (!std::isfinite(err)) {
            ++stats.rejected;
            h *= 0.1;
            continue;
        }
        if (err <= 1.0) {
            const double t_new = (t + h >= t_end) ? t_end : t + h;
            // emit grid points inside (t, t_new]
            while (next < t_grid.size() && t_grid[next] <= t_new) {
                const double tg = t_grid[next];
                if (tg == t_new) {
                    yout = ynew;
                } else {
                    const double th = (tg - t) / h;
                    const double th1 = 1.0 - th;
                    for (Eigen::Index i = 0; i < n; ++i) {
                        const auto r2 = ynew[i] - y[i];
                        const auto r3 = h * k1[i] - r2;
                        const auto r4 = r2 - h * k7[i] - r3;
                        const auto r5 = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                                             d7 * k7[i]);
                        yout[i] = y[i] + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
                    }
                }
                ++next;
                if (!observe(tg, static_cast<const Vec&>(yout))) {
                    stats.stopped_early = true;
                    ++stats.accepted;
                    return stats;
                }
            }
            ++stats.accepted;
            t = t_new;
            y.swap(ynew);
            k1.swap(k7);  // FSAL
            // PI step-size controller
            const double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            h *= std::clamp(fac, 0.2, 5.0);
            err_prev = std::max(err, 1e-4);
        } else {
            ++stats.rejected;
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
        if (opt.max_step > 0.0) h = std::min(h, opt.max_step);
    }
    return stats;
}

}  // namespace dicke
