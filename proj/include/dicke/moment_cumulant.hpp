// moment_cumulant.hpp: linearised second-moment equations for the two-axis
// scheme, their closed-form large-N solution, the analytic optimum and the
// asymptotic squeezing bound.

#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "dicke/dicke_algebra.hpp"
#include "dicke/errors.hpp"
#include "dicke/model_params.hpp"
#include "dicke/trajectory.hpp"

namespace dicke {

/// dX/dt = A X + M for X = (⟨Sy²⟩, ⟨Sz²⟩, ⟨{Sy,Sz}⟩/2).
struct MomentSystem {
    Eigen::Matrix3d A;
    Eigen::Vector3d M;
    Eigen::Vector3d X0;
    double chi = 0.0;
    double c = 0.0;
    double T2 = std::numeric_limits<double>::infinity();
    int N = 0;
};

inline double inverse_T2(double T2) { return std::isfinite(T2) ? 1.0 / T2 : 0.0; }

inline MomentSystem build_moment_system(double chi, double c, double T2, int N) {
    if (N < 1) throw DomainError("N must be >= 1");
    const double iT2 = inverse_T2(T2);
    const double k = std::numbers::sqrt2 * chi * N;
    MomentSystem s;
    s.chi = chi;
    s.c = c;
    s.T2 = T2;
    s.N = N;
    s.A << -(c + 2.0 * iT2), c, k,
           c, -5.0 * c, k,
           0.5 * k, 0.5 * k, -(4.0 * c + iT2);
    s.M << 0.5 * N * iT2, c * N * (N + 2.0), 0.0;
    s.X0 << N / 4.0, N / 4.0, 0.0;
    return s;
}

inline MomentSystem build_moment_system(const DerivedParams& p, int N) {
    if (p.scheme != Scheme::TAT_yz)
        throw SchemeError("moment equations are derived for the TAT_yz scheme only (got " + std::string(to_string(p.scheme)) + ")");
    return build_moment_system(p.chi, p.c, p.T2, N);
}

/// ξ² = (4/N)·(V₊ − √(V₋² + 4V_yz²))/2 with |⟨S⟩|² = N²/4.
inline double cumulant_xi2(const Eigen::Vector3d& X, int N) {
    const double vp = X(0) + X(1);
    const double vm = X(0) - X(1);
    return (4.0 / N) * 0.5 * (vp - std::sqrt(vm * vm + 4.0 * X(2) * X(2)));
}

inline TrajectoryRecord cumulant_record(double t, const Eigen::Vector3d& X, int N) {
    TrajectoryRecord r;
    r.t = t;
    r.moments.Sx = 0.5 * N;
    r.moments.Sx2 = 0.25 * N * N;
    r.moments.Sy2 = X(0);
    r.moments.Sz2 = X(1);
    r.moments.Cyz = X(2);
    r.xi2 = cumulant_xi2(X, N);
    r.trace = 1.0;
    r.purity = std::numeric_limits<double>::quiet_NaN();
    return r;
}

/// X(t) = e^{At}X0 + ∫₀ᵗ e^{As} ds M, both read off the exponential of the
/// augmented matrix [[A, M], [0, 0]] (no inverse of A needed).
inline Eigen::Vector3d moments_at(const MomentSystem& s, double t) {
    Eigen::Matrix4d B = Eigen::Matrix4d::Zero();
    B.topLeftCorner<3, 3>() = s.A * t;
    B.topRightCorner<3, 1>() = s.M * t;
    const Eigen::Matrix4d E = B.exp();
    return E.topLeftCorner<3, 3>() * s.X0 + E.topRightCorner<3, 1>();
}

inline Trajectory solve_moments(const MomentSystem& s, std::span<const double> t_grid) {
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("time grid must be strictly increasing");
    Trajectory traj;
    traj.N = s.N;
    traj.source = "cumulant";
    for (double t : t_grid) traj.records.push_back(cumulant_record(t, moments_at(s, t), s.N));
    return traj;
}

// ---------------------------------------------------------------------------
// Closed form and optimum

struct AnalyticOptimum {
    double t_min = 0.0;
    double xi2_min = 0.0;          // derivation form
    double xi2_min_printed = 0.0;  // main-text grouping of the 1/N term
    double Theta = 0.0;            // signed: ln of a number in (0, 1) for weak noise
    double M_factor = 0.0;
    double A_plus = 0.0;
    double A_minus = 0.0;
    double P = 0.0;
    std::vector<std::string> warnings;
};

struct ClosedFormCoefficients {
    double A_plus, A_minus, P, kappa;
};

inline ClosedFormCoefficients closed_form_coefficients(double chi, double c, double T2, int N) {
    const double iT2 = inverse_T2(T2);
    const double r2 = std::numbers::sqrt2;
    ClosedFormCoefficients k{};
    k.A_plus = N / 8.0 * (1.0 + r2 * c / chi) + r2 / (4.0 * chi) * (c + 0.25 * iT2);
    k.A_minus = N / 8.0 * (1.0 - r2 * c / chi) - r2 / (4.0 * chi) * (c + 0.25 * iT2);
    k.P = N * (c * N + (2.0 * c - 0.5 * iT2));
    k.kappa = r2 * N * chi;
    return k;
}

/// Large-N hyperbolic solution (neglects the diagonal decay against √2Nχ).
inline Trajectory closed_form_moments(const MomentSystem& s, std::span<const double> t_grid) {
    const auto k = closed_form_coefficients(s.chi, s.c, s.T2, s.N);
    Trajectory traj;
    traj.N = s.N;
    traj.source = "cumulant_closed_form";
    for (double t : t_grid) {
        const double ep = std::exp(k.kappa * t), em = std::exp(-k.kappa * t);
        const double diff = -k.P * t;
        const double sum = 2.0 * k.A_plus * ep + 2.0 * k.A_minus * em;
        const double cyz = k.A_plus * (ep - 1.0) - k.A_minus * (em - 1.0);
        traj.records.push_back(cumulant_record(t, Eigen::Vector3d(0.5 * (sum + diff), 0.5 * (sum - diff), cyz), s.N));
    }
    return traj;
}

/// a − √(Θ² + s²) with a = 1 + q u², s = (1 − u)(1 + q u), u = e^{−Θ},
/// evaluated without cancellation for u ≥ 1.
inline double optimum_bracket(double Theta, double q) {
    const double u = std::exp(-Theta);
    const double a = 1.0 + q * u * u;
    const double s = (1.0 - u) * (1.0 + q * u);
    const double root = std::sqrt(Theta * Theta + s * s);
    if (u >= 1.0 && 1.0 + q * u >= 0.0) {
        // (a − |s|)(a + |s|) in closed form
        const double a_minus_s = 2.0 - u * (1.0 - q);
        const double a_plus_s = 2.0 * q * u * u + u * (1.0 - q);
        return (a_minus_s * a_plus_s - Theta * Theta) / (a + root);
    }
    return a - root;
}

inline AnalyticOptimum analytic_optimum(double chi, double c, double T2, int N) {
    if (!(chi > 0.0)) throw DomainError("chi must be positive");
    const auto k = closed_form_coefficients(chi, c, T2, N);
    const double iT2 = inverse_T2(T2);
    const double r2 = std::numbers::sqrt2;
    AnalyticOptimum o;
    o.A_plus = k.A_plus;
    o.A_minus = k.A_minus;
    o.P = k.P;
    if (N < 20) o.warnings.emplace_back("N < 20: large-N approximation is not reliable");

    const double arg = 1.0 - (2.0 * chi * k.A_minus + r2 / 2.0 * iT2) / (2.0 * chi * k.A_plus);
    if (!(arg > 0.0)) throw DomainError("log argument of Theta is not positive (" + std::to_string(arg) + ")");
    o.Theta = std::log(arg);
    if (o.Theta > 0.0) o.warnings.emplace_back("Theta > 0: noise exceeds the weak-dissipation regime");
    o.t_min = std::abs(o.Theta) / (r2 * N * chi);

    const double q = k.A_minus / k.A_plus;
    o.M_factor = optimum_bracket(o.Theta, q);
    const double pref_derivation = r2 * c / chi + (2.0 * r2 * c / chi - r2 / (2.0 * chi) * iT2) / N;
    const double pref_printed = r2 * c / chi + (r2 / chi) * (2.0 * c - 0.5 * iT2) / N;
    o.xi2_min = pref_derivation * o.M_factor;
    o.xi2_min_printed = pref_printed * o.M_factor;
    return o;
}

inline AnalyticOptimum analytic_optimum(const DerivedParams& p, int N) { return analytic_optimum(p.chi, p.c, p.T2, N); }

/// ξ²_lb(ε) = ε/(2−ε)·[1 + (1−ε)/ε² − √(ln²ε + (1−ε)²/ε⁴)].
/// Returns 0 at ε = 0 (continuous extension).
inline double asymptotic_bound(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 2.0)) throw DomainError("epsilon must lie in [0, 2)");
    if (epsilon == 0.0) return 0.0;
    const double e = epsilon;
    const double L = std::log(e);
    const double a = 1.0 + (1.0 - e) / (e * e);
    const double b = L * L + (1.0 - e) * (1.0 - e) / (e * e * e * e);
    // a² − b = 1 + 2(1−ε)/ε² − ln²ε, exact algebra; avoids cancellation as ε → 0
    const double num = 1.0 + 2.0 * (1.0 - e) / (e * e) - L * L;
    return e / (2.0 - e) * num / (a + std::sqrt(b));
}

inline double asymptotic_bound(const DerivedParams& p) { return asymptotic_bound(p.epsilon); }

/// Largest error of the third-moment factorisation over all ordered triples of
/// (Sx, Sy, Sz), in units of (N/2)³. Diagnostic only.
inline double kubo_factorization_error(const StateVector& psi) {
    const auto ops = build_collective_ops(psi.j);
    const MatrixXcd* S[3] = {&ops.Sx, &ops.Sy, &ops.Sz};
    const auto& v = psi.amplitudes;
    auto ev1 = [&](int a) { return v.dot(*S[a] * v); };
    auto ev2 = [&](int a, int b) { return v.dot(*S[a] * (*S[b] * v)); };
    double worst = 0.0;
    const double scale = std::pow(psi.j.value(), 3);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                const cplx exact = v.dot(*S[a] * (*S[b] * (*S[c] * v)));
                const cplx approx = ev1(a) * ev2(b, c) + ev1(b) * ev2(c, a) + ev2(a, b) * ev1(c) -
                                    2.0 * ev1(a) * ev1(b) * ev1(c);
                worst = std::max(worst, std::abs(exact - approx) / scale);
            }
    return worst;
}

}  // namespace dicke
