// brute_force.hpp: the same master equation on the full 2^N product space,
// used only as a validation oracle for small N.

#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dicke/dicke_algebra.hpp"
#include "dicke/errors.hpp"
#include "dicke/integrator.hpp"
#include "dicke/metrics.hpp"
#include "dicke/open_dynamics.hpp"
#include "dicke/trajectory.hpp"

namespace dicke {

inline constexpr int brute_force_max_spins = 6;

/// Collective and single-site operators on (C²)^⊗N. Site basis: index 0 = |↑⟩ (m = +1/2).
struct ProductSpace {
    int N = 0;
    int dim = 0;
    MatrixXcd Sx, Sy, Sz, Sp, Sm;
    std::vector<MatrixXcd> sigma_z;  // one per site

    explicit ProductSpace(int n) : N(n) {
        if (n < 1) throw DomainError("N must be >= 1");
        if (n > brute_force_max_spins)
            throw ResourceError("brute-force oracle is capped at N = " + std::to_string(brute_force_max_spins));
        dim = 1 << n;
        Sx = Sy = Sz = Sp = MatrixXcd::Zero(dim, dim);
        for (int k = 0; k < n; ++k) {
            MatrixXcd sz = MatrixXcd::Zero(dim, dim);
            const int bit = 1 << (n - 1 - k);
            for (int s = 0; s < dim; ++s) {
                const bool down = (s & bit) != 0;
                sz(s, s) = down ? -1.0 : 1.0;
                if (down) Sp(s ^ bit, s) += 1.0;  // σ+ at site k
            }
            Sz += 0.5 * sz;
            sigma_z.push_back(std::move(sz));
        }
        Sm = Sp.adjoint();
        Sx = 0.5 * (Sp + Sm);
        Sy = cplx(0.0, -0.5) * (Sp - Sm);
    }

    /// ⊗_k [e^{−iφ/2} cos(θ/2)|↑⟩ + e^{iφ/2} sin(θ/2)|↓⟩], the product form of css_state.
    VectorXcd product_css(double theta, double phi) const {
        const cplx up = std::polar(std::cos(0.5 * theta), -0.5 * phi);
        const cplx dn = std::polar(std::sin(0.5 * theta), 0.5 * phi);
        VectorXcd v(dim);
        for (int s = 0; s < dim; ++s) {
            cplx a = 1.0;
            for (int k = 0; k < N; ++k) a *= (s & (1 << (N - 1 - k))) ? dn : up;
            v(s) = a;
        }
        return v;
    }

    SpinMoments moments(const MatrixXcd& rho) const {
        auto ev = [&](const MatrixXcd& A) { return (rho * A).trace().real(); };
        SpinMoments m;
        m.Sx = ev(Sx);
        m.Sy = ev(Sy);
        m.Sz = ev(Sz);
        m.Sx2 = ev(Sx * Sx);
        m.Sy2 = ev(Sy * Sy);
        m.Sz2 = ev(Sz * Sz);
        m.Cxy = 0.5 * ev(Sx * Sy + Sy * Sx);
        m.Cxz = 0.5 * ev(Sx * Sz + Sz * Sx);
        m.Cyz = 0.5 * ev(Sy * Sz + Sz * Sy);
        return m;
    }

    /// Orthonormal basis |j, m, α⟩ ordered as the block layout (descending j,
    /// m = j..−j inside each copy α). Columns of the returned unitary.
    MatrixXcd dicke_basis() const {
        const BlockLayout layout = dicke_block_structure(N);
        MatrixXcd V(dim, dim);
        int col = 0;
        for (const auto& b : layout.blocks) {
            const double j = b.j.value();
            // highest-weight vectors: S+ v = 0 within the Sz = j eigenspace
            std::vector<int> states;
            for (int s = 0; s < dim; ++s)
                if (std::abs(Sz(s, s).real() - j) < 1e-9) states.push_back(s);
            MatrixXcd P = MatrixXcd::Zero(dim, static_cast<Eigen::Index>(states.size()));
            for (std::size_t c = 0; c < states.size(); ++c) P(states[c], static_cast<Eigen::Index>(c)) = 1.0;
            const MatrixXcd SpP = Sp * P;
            Eigen::SelfAdjointEigenSolver<MatrixXcd> es(SpP.adjoint() * SpP);
            const int deg = static_cast<int>(std::llround(b.degeneracy));
            for (int a = 0; a < deg; ++a) {
                VectorXcd v = P * es.eigenvectors().col(a);  // ascending eigenvalues: kernel first
                for (int i = 0; i < b.dim(); ++i) {
                    V.col(col + a * b.dim() + i) = v;
                    v = Sm * v;
                    if (v.norm() > 0.0) v.normalize();
                }
            }
            col += deg * b.dim();
        }
        return V;
    }
};

/// ρ_full = V (⊕_j ρ_j ⊗ I_{d_j}) V† for a block state (N ≤ 6).
inline MatrixXcd embed_block_state(const BlockDensityMatrix& rho, const ProductSpace& ps) {
    if (rho.N() != ps.N) throw DomainError("embed_block_state: mismatched N");
    MatrixXcd R = MatrixXcd::Zero(ps.dim, ps.dim);
    int col = 0;
    for (std::size_t k = 0; k < rho.num_blocks(); ++k) {
        const auto& b = rho.layout.blocks[k];
        const int deg = static_cast<int>(std::llround(b.degeneracy));
        for (int a = 0; a < deg; ++a) {
            R.block(col, col, b.dim(), b.dim()) = rho.block(k) / b.degeneracy;
            col += b.dim();
        }
    }
    const MatrixXcd V = ps.dicke_basis();
    return V * R * V.adjoint();
}

inline double trace_distance(const MatrixXcd& a, const MatrixXcd& b) {
    const MatrixXcd D = a - b;
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (D + D.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

struct BruteForceModel {
    ProductSpace space;
    MatrixXcd H;
    MatrixXcd Z;
    LindbladRates rates;
};

/// H and Z given as functions of the collective operators of the product space.
inline BruteForceModel brute_force_model(int N, const SpinHamiltonianCoeffs& k, double r, const LindbladRates& rates) {
    ProductSpace ps(N);
    const MatrixXcd S2 = ps.Sx * ps.Sx + ps.Sy * ps.Sy + ps.Sz * ps.Sz;
    const MatrixXcd H = -k.chi_tilde * ((S2 - ps.Sz * ps.Sz) - k.tanh2r * (ps.Sx * ps.Sx - ps.Sy * ps.Sy)) +
                        k.Omega_tilde * ps.Sz;
    const MatrixXcd Z = std::exp(-2.0 * r) * ps.Sx - cplx(0.0, 1.0) * std::exp(2.0 * r) * ps.Sy;
    return {std::move(ps), H, Z, rates};
}

inline void brute_force_rhs(const BruteForceModel& m, const MatrixXcd& rho, MatrixXcd& out) {
    const cplx I(0.0, 1.0);
    out = -I * (m.H * rho - rho * m.H);
    auto dissipator = [&](const MatrixXcd& A, double rate) {
        if (rate <= 0.0) return;
        const MatrixXcd AdA = A.adjoint() * A;
        out += rate * (A * rho * A.adjoint() - 0.5 * (AdA * rho + rho * AdA));
    };
    dissipator(m.Z, m.rates.down);
    dissipator(m.Z.adjoint(), m.rates.up);
    if (m.rates.dephasing > 0.0)
        for (const auto& sz : m.space.sigma_z) out += m.rates.dephasing * (sz * rho * sz - rho);
}

/// Integrates the full-space master equation with the same integrator contract as evolve.
inline Trajectory brute_force_evolve(const BruteForceModel& m, const MatrixXcd& rho0, std::span<const double> t_grid,
                                     const IntegratorOptions& opt = {}, MatrixXcd* final_state = nullptr) {
    const int d = m.space.dim;
    if (rho0.rows() != d || rho0.cols() != d) throw DomainError("initial state has the wrong dimension");
    Trajectory traj;
    traj.N = m.space.N;
    traj.source = "brute_force";
    MatrixXcd rho(d, d), drho(d, d);
    auto rhs = [&](double, const VectorXcd& y, VectorXcd& dy) {
        rho = Eigen::Map<const MatrixXcd>(y.data(), d, d);
        brute_force_rhs(m, rho, drho);
        dy = Eigen::Map<const VectorXcd>(drho.data(), static_cast<Eigen::Index>(d) * d);
    };
    MatrixXcd last = rho0;
    auto observe = [&](double t, const VectorXcd& y) {
        last = Eigen::Map<const MatrixXcd>(y.data(), d, d);
        TrajectoryRecord r;
        r.t = t;
        r.moments = m.space.moments(last);
        r.xi2 = xi2_or_nan(r.moments, m.space.N);
        r.trace = last.trace().real();
        r.purity = (last * last).trace().real();
        r.hermiticity_error = (last - last.adjoint()).cwiseAbs().maxCoeff();
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (last + last.adjoint()), Eigen::EigenvaluesOnly);
        r.min_eigenvalue = es.eigenvalues().minCoeff();
        traj.records.push_back(r);
        return true;
    };
    const VectorXcd y0 = Eigen::Map<const VectorXcd>(rho0.data(), static_cast<Eigen::Index>(d) * d);
    integrate_dopri5(rhs, y0, t_grid, observe, opt);
    if (final_state) *final_state = last;
    return traj;
}

}  // namespace dicke
