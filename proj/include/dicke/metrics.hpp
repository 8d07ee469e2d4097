// metrics.hpp: Ramsey squeezing parameter, Husimi Q function and trajectory
// minimum location.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dicke/dicke_algebra.hpp"
#include "dicke/errors.hpp"
#include "dicke/trajectory.hpp"

namespace dicke {

struct SqueezingRecord {
    double xi2 = 0.0;
    double xi2_dB = 0.0;
    std::array<double, 3> mean_spin{};
    double var_perp_min = 0.0;
    /// Angle of the minimal-variance direction measured in the plane ⊥ n from
    /// e1 = normalize(ẑ × n) towards e2 = n × e1 (e1 = ŷ, e2 = ẑ when n = x̂).
    double optimal_quadrature_angle = 0.0;
};

/// ξ² = N ⟨ΔS²⟩⊥,min / |⟨S⟩|² using the full covariance in the plane ⊥ ⟨S⟩.
inline SqueezingRecord squeezing_parameter(const SpinMoments& m, int N) {
    const Eigen::Vector3d mean(m.Sx, m.Sy, m.Sz);
    const double norm = mean.norm();
    if (!(norm > 1e-12 * N)) throw DegenerateSpinError("mean spin vanishes; squeezing parameter undefined");

    Eigen::Matrix3d C;
    C << m.Sx2, m.Cxy, m.Cxz, m.Cxy, m.Sy2, m.Cyz, m.Cxz, m.Cyz, m.Sz2;
    C -= mean * mean.transpose();

    const Eigen::Vector3d n = mean / norm;
    Eigen::Vector3d e1 = Eigen::Vector3d::UnitZ().cross(n);
    if (e1.norm() < 1e-8) e1 = n.cross(Eigen::Vector3d::UnitX());
    e1.normalize();
    const Eigen::Vector3d e2 = n.cross(e1);

    const double p = e1.dot(C * e1);
    const double q = e2.dot(C * e2);
    const double r = e1.dot(C * e2);
    const double half_sum = 0.5 * (p + q);
    const double radius = std::hypot(0.5 * (p - q), r);
    const double vmin = half_sum - radius;

    SqueezingRecord out;
    out.mean_spin = {m.Sx, m.Sy, m.Sz};
    out.var_perp_min = vmin;
    out.xi2 = N * vmin / (norm * norm);
    out.xi2_dB = 10.0 * std::log10(out.xi2);
    out.optimal_quadrature_angle = 0.5 * std::atan2(2.0 * r, p - q) + 0.5 * std::numbers::pi;
    return out;
}

/// ξ² or NaN when the mean spin vanishes.
inline double xi2_or_nan(const SpinMoments& m, int N) {
    try {
        return squeezing_parameter(m, N).xi2;
    } catch (const DegenerateSpinError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

/// Moments of a normalised pure state on one j block. Uses
/// ⟨SaSb⟩ = (Sa ψ)†(Sb ψ) with the ladder action applied directly.
inline SpinMoments moments_of(const StateVector& psi) {
    const auto& v = psi.amplitudes;
    const int d = psi.j.dim();
    const double j = psi.j.value();
    VectorXcd up = VectorXcd::Zero(d), dn = VectorXcd::Zero(d), z(d);
    for (int i = 0; i < d; ++i) {
        const double m = psi.j.m(i);
        z(i) = m * v(i);
        if (i > 0) up(i - 1) = raising_element(j, m) * v(i);      // S+ raises m: index i -> i-1
        if (i + 1 < d) dn(i + 1) = raising_element(j, m - 1.0) * v(i);
    }
    const VectorXcd x = 0.5 * (up + dn);
    const VectorXcd y = cplx(0.0, -0.5) * (up - dn);
    SpinMoments mo;
    mo.Sx = v.dot(x).real();
    mo.Sy = v.dot(y).real();
    mo.Sz = v.dot(z).real();
    mo.Sx2 = x.squaredNorm();
    mo.Sy2 = y.squaredNorm();
    mo.Sz2 = z.squaredNorm();
    mo.Cxy = x.dot(y).real();
    mo.Cxz = x.dot(z).real();
    mo.Cyz = y.dot(z).real();
    return mo;
}

inline SqueezingRecord squeezing_parameter(const StateVector& psi, int N) {
    return squeezing_parameter(moments_of(psi), N);
}

// ---------------------------------------------------------------------------
// Husimi Q

enum class HusimiGridKind { Uniform, Gauss };

struct HusimiGridSpec {
    int n_theta = 64;
    int n_phi = 128;
    HusimiGridKind kind = HusimiGridKind::Gauss;  // exact for the band-limited Q; Uniform is O(dθ²)
};

struct HusimiField {
    std::vector<double> theta;          // size n_theta
    std::vector<double> phi;            // size n_phi
    std::vector<double> theta_weights;  // quadrature weights including sinθ dθ
    double phi_weight = 0.0;
    Eigen::MatrixXd values;             // (n_theta, n_phi)
    double block_weight = 1.0;          // trace of the represented j block
    double j = 0.0;

    double integral() const {
        double s = 0.0;
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            s += theta_weights[static_cast<std::size_t>(i)] * values.row(i).sum();
        return s * phi_weight;
    }
    double max_value() const { return values.maxCoeff(); }
};

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the three-term recurrence).
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[static_cast<std::size_t>(i)] = -z;
        x[static_cast<std::size_t>(n - 1 - i)] = z;
        const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[static_cast<std::size_t>(i)] = wi;
        w[static_cast<std::size_t>(n - 1 - i)] = wi;
    }
}

/// Q(θ,φ) = (2j+1)/(4π) ⟨θ,φ|ρ|θ,φ⟩ for a density matrix on one j block.
/// ρ is normalised by its trace; the trace is reported as block_weight.
inline HusimiField husimi_q(const MatrixXcd& rho, HalfInteger j, const HusimiGridSpec& grid = {}) {
    if (grid.n_theta < 16 || grid.n_phi < 16) throw DomainError("Husimi grid resolution must be at least 16x16");
    if (rho.rows() != j.dim()) throw DomainError("density block dimension does not match j");
    HusimiField f;
    f.j = j.value();
    f.block_weight = rho.trace().real();
    const MatrixXcd rn = rho / f.block_weight;

    if (grid.kind == HusimiGridKind::Gauss) {
        std::vector<double> x, w;
        gauss_legendre(grid.n_theta, x, w);
        // θ ascending <-> cosθ descending
        for (int i = grid.n_theta - 1; i >= 0; --i) {
            f.theta.push_back(std::acos(x[static_cast<std::size_t>(i)]));
            f.theta_weights.push_back(w[static_cast<std::size_t>(i)]);
        }
    } else {
        const double dth = std::numbers::pi / grid.n_theta;
        for (int i = 0; i < grid.n_theta; ++i) {
            const double th = (i + 0.5) * dth;
            f.theta.push_back(th);
            // exact measure of the cell [th - dth/2, th + dth/2]
            f.theta_weights.push_back(2.0 * std::sin(th) * std::sin(0.5 * dth));
        }
    }
    f.phi_weight = 2.0 * std::numbers::pi / grid.n_phi;
    for (int k = 0; k < grid.n_phi; ++k) f.phi.push_back(k * f.phi_weight);

    const double pref = j.dim() / (4.0 * std::numbers::pi);
    f.values.resize(grid.n_theta, grid.n_phi);
    for (int i = 0; i < grid.n_theta; ++i) {
        // amplitudes at φ = 0, phases applied per column
        const VectorXcd base = css_state(j, f.theta[static_cast<std::size_t>(i)], 0.0).amplitudes;
        for (int k = 0; k < grid.n_phi; ++k) {
            VectorXcd c = base;
            for (int a = 0; a < j.dim(); ++a) c(a) *= std::polar(1.0, -j.m(a) * f.phi[static_cast<std::size_t>(k)]);
            f.values(i, k) = pref * c.dot(rn * c).real();
        }
    }
    return f;
}

inline HusimiField husimi_q(const StateVector& psi, const HusimiGridSpec& grid = {}) {
    return husimi_q(MatrixXcd(psi.amplitudes * psi.amplitudes.adjoint()), psi.j, grid);
}

/// Ratio of the largest to smallest spread of Q on the tangent plane at its
/// mean direction. 1 for isotropic profiles; large for elongated or curved ones.
inline double husimi_anisotropy(const HusimiField& f) {
    Eigen::Vector3d mu = Eigen::Vector3d::Zero();
    Eigen::Matrix3d T = Eigen::Matrix3d::Zero();
    double total = 0.0;
    for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
        const double th = f.theta[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < f.values.cols(); ++k) {
            const double ph = f.phi[static_cast<std::size_t>(k)];
            const Eigen::Vector3d n(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
            const double wq = f.theta_weights[static_cast<std::size_t>(i)] * f.phi_weight * f.values(i, k);
            mu += wq * n;
            T += wq * n * n.transpose();
            total += wq;
        }
    }
    mu /= total;
    T /= total;
    const Eigen::Matrix3d C = T - mu * mu.transpose();
    const Eigen::Vector3d d = mu.normalized();
    Eigen::Vector3d e1 = Eigen::Vector3d::UnitZ().cross(d);
    if (e1.norm() < 1e-8) e1 = d.cross(Eigen::Vector3d::UnitX());
    e1.normalize();
    const Eigen::Vector3d e2 = d.cross(e1);
    Eigen::Matrix2d P;
    P << e1.dot(C * e1), e1.dot(C * e2), e2.dot(C * e1), e2.dot(C * e2);
    const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(P).eigenvalues();
    return ev(1) / ev(0);
}

// ---------------------------------------------------------------------------
// Minimum location

struct MinimumResult {
    double t_raw = 0.0;
    double xi2_raw = 0.0;
    double t_min = 0.0;
    double xi2_min = 0.0;
    std::size_t index = 0;
    bool boundary = false;  // BoundaryWarning: minimum sits on the grid edge
};

/// Grid minimum of ξ²(t) refined by the parabola through the three bracketing points.
/// NaN samples (degenerate mean spin) are skipped.
inline MinimumResult find_minimum(std::span<const double> t, std::span<const double> xi2) {
    if (t.size() != xi2.size()) throw DomainError("time and value arrays differ in length");
    if (t.size() < 3) throw DomainError("find_minimum needs at least 3 points");
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < xi2.size(); ++i)
        if (std::isfinite(xi2[i]) && (!best || xi2[i] < xi2[*best])) best = i;
    if (!best) throw DomainError("trajectory has no finite squeezing values");

    MinimumResult r;
    r.index = *best;
    r.t_raw = r.t_min = t[*best];
    r.xi2_raw = r.xi2_min = xi2[*best];
    const std::size_t i = *best;
    if (i == 0 || i + 1 == t.size() || !std::isfinite(xi2[i - 1]) || !std::isfinite(xi2[i + 1])) {
        r.boundary = true;
        return r;
    }
    const double x0 = t[i - 1], x1 = t[i], x2 = t[i + 1];
    const double y0 = xi2[i - 1], y1 = xi2[i], y2 = xi2[i + 1];
    // Newton divided differences
    const double f01 = (y1 - y0) / (x1 - x0);
    const double f12 = (y2 - y1) / (x2 - x1);
    const double f012 = (f12 - f01) / (x2 - x0);
    if (f012 > 0.0) {
        const double tv = 0.5 * (x0 + x1) - f01 / (2.0 * f012);
        if (tv >= x0 && tv <= x2) {
            r.t_min = tv;
            r.xi2_min = y0 + f01 * (tv - x0) + f012 * (tv - x0) * (tv - x1);
        }
    }
    return r;
}

inline MinimumResult find_minimum(const Trajectory& traj) {
    const auto t = traj.times();
    const auto x = traj.xi2();
    return find_minimum(std::span<const double>(t), std::span<const double>(x));
}

}  // namespace dicke
