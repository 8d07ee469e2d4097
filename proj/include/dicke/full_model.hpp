// full_model.hpp: truncated cavity ⊗ phonon ⊗ spin simulator of the
// linearised optomechanical Hamiltonian, the mean-field steady state, and a
// numerical check of the reduction to the effective spin Hamiltonian.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <new>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dicke/dicke_algebra.hpp"
#include "dicke/effective_hamiltonian.hpp"
#include "dicke/errors.hpp"
#include "dicke/metrics.hpp"
#include "dicke/model_params.hpp"

namespace dicke {

// ---------------------------------------------------------------------------
// Mean field

struct MeanField {
    cplx alpha = 0.0;
    cplx beta = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

struct MeanFieldOptions {
    int max_iter = 10'000;
    double damping = 0.5;  // weight of the new iterate
};

/// Residuals of the two steady-state Langevin equations.
inline std::pair<cplx, cplx> mean_field_residual(const RawParams& raw, cplx s_minus, cplx alpha, cplx beta) {
    const cplx I(0.0, 1.0);
    const cplx ra = -(I * raw.Delta_a + 0.5 * raw.kappa_a) * alpha - I * raw.g0 * alpha * (beta + std::conj(beta)) -
                    I * raw.Omega_p;
    const cplx rb = -(I * raw.omega_b + 0.5 * raw.kappa_b) * beta - I * raw.g0 * std::norm(alpha) - I * raw.g * s_minus;
    return {ra, rb};
}

/// Damped fixed-point iteration of
///   0 = −(iΔ_a + κ_a/2)α − i g₀ α(β + β*) − iΩ_p
///   0 = −(iω_b + κ_b/2)β − i g₀|α|² − i g⟨S₋⟩
inline MeanField mean_field_steady_state(const RawParams& raw, cplx s_minus = 0.0, const MeanFieldOptions& opt = {}) {
    if (raw.kappa_a <= 0.0 && raw.Delta_a == 0.0)
        throw DomainError("mean field needs kappa_a > 0 or Delta_a != 0");
    const cplx I(0.0, 1.0);
    const double tol = raw.Omega_p != 0.0 ? 1e-10 * std::abs(raw.Omega_p) : 1e-12;
    MeanField mf;
    auto residual = [&](cplx a, cplx b) {
        const auto [ra, rb] = mean_field_residual(raw, s_minus, a, b);
        return std::max(std::abs(ra), std::abs(rb));
    };
    for (int it = 0; it < opt.max_iter; ++it) {
        mf.residual = residual(mf.alpha, mf.beta);
        mf.iterations = it;
        if (mf.residual < tol) return mf;
        const cplx da = I * (raw.Delta_a + 2.0 * raw.g0 * mf.beta.real()) + 0.5 * raw.kappa_a;
        if (std::abs(da) == 0.0) throw ConvergenceError("mean-field cavity denominator vanished", mf.residual);
        const cplx a_new = -I * raw.Omega_p / da;
        const cplx b_new = -I * (raw.g0 * std::norm(a_new) + raw.g * s_minus) / (I * raw.omega_b + 0.5 * raw.kappa_b);
        mf.alpha = (1.0 - opt.damping) * mf.alpha + opt.damping * a_new;
        mf.beta = (1.0 - opt.damping) * mf.beta + opt.damping * b_new;
    }
    mf.residual = residual(mf.alpha, mf.beta);
    if (mf.residual < tol) return mf;
    throw ConvergenceError("mean-field iteration did not converge", mf.residual);
}

// ---------------------------------------------------------------------------
// Truncated model

/// Parameters of the linearised Hamiltonian (angular frequencies, any unit).
struct LinearizedParams {
    double Delta = 0.0;
    double omega_b = 1.0;
    double G = 0.0;
    double Omega = 0.0;
    double g = 0.0;

    double Gamma() const { return Delta * G * G / (Delta * Delta - omega_b * omega_b); }
};

struct Cutoffs {
    int n_a = 4;  // photon Fock states kept
    int n_b = 12; // phonon Fock states kept
};

inline constexpr long default_max_full_dimension = 200'000;

/// H_L on cavity ⊗ phonon ⊗ spin; index = (n_a·n_b_dim + n_b)·(2j+1) + spin index.
struct TruncatedModel {
    LinearizedParams params;
    Cutoffs cutoffs;
    HalfInteger j;
    MatrixXcd H;

    int spin_dim() const { return j.dim(); }
    long dimension() const { return static_cast<long>(cutoffs.n_a) * cutoffs.n_b * j.dim(); }
    int index(int na, int nb, int s) const { return (na * cutoffs.n_b + nb) * j.dim() + s; }
};

inline MatrixXcd annihilation(int n) {
    MatrixXcd a = MatrixXcd::Zero(n, n);
    for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

inline MatrixXcd kron(const MatrixXcd& A, const MatrixXcd& B) {
    MatrixXcd K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index k = 0; k < A.cols(); ++k) K.block(i * B.rows(), k * B.cols(), B.rows(), B.cols()) = A(i, k) * B;
    return K;
}

inline TruncatedModel build_linearized_hamiltonian(const LinearizedParams& p, const Cutoffs& c, HalfInteger j,
                                                   long max_dimension = default_max_full_dimension) {
    if (c.n_a < 2 || c.n_b < 2) throw DomainError("Fock cutoffs must be at least 2");
    TruncatedModel m{p, c, j, {}};
    if (m.dimension() > max_dimension)
        throw ResourceError("truncated dimension " + std::to_string(m.dimension()) + " exceeds bound " +
                            std::to_string(max_dimension));
    try {
        const auto ops = build_collective_ops(j);
        const MatrixXcd a = annihilation(c.n_a), b = annihilation(c.n_b);
        const MatrixXcd Ia = MatrixXcd::Identity(c.n_a, c.n_a), Ib = MatrixXcd::Identity(c.n_b, c.n_b);
        const MatrixXcd Is = MatrixXcd::Identity(j.dim(), j.dim());
        const MatrixXcd na = a.adjoint() * a, nb = b.adjoint() * b;
        const MatrixXcd xa = a + a.adjoint(), xb = b + b.adjoint();
        m.H = p.Delta * kron(kron(na, Ib), Is) + p.omega_b * kron(kron(Ia, nb), Is) +
              p.G * kron(kron(xa, xb), Is) + p.Omega * kron(kron(Ia, Ib), ops.Sz) +
              p.g * (kron(kron(Ia, b), ops.Sp) + kron(kron(Ia, b.adjoint()), ops.Sm));
    } catch (const std::bad_alloc&) {
        throw ResourceError("cannot allocate the truncated Hamiltonian");
    }
    return m;
}

/// Lowest eigenvector of ω_b b†b − Γ(b + b†)² on n Fock states: the squeezed
/// vacuum the effective model assumes for the phonon.
inline VectorXcd squeezed_phonon_vacuum(double omega_b, double Gamma, int n) {
    const MatrixXcd b = annihilation(n);
    const MatrixXcd x = b + b.adjoint();
    const MatrixXcd h = omega_b * b.adjoint() * b - Gamma * x * x;
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
    VectorXcd v = es.eigenvectors().col(0);
    // fix the global phase so the vacuum amplitude is real positive
    const cplx ph = v(0) / std::abs(v(0));
    return v / ph;
}

// ---------------------------------------------------------------------------
// Reduction check

struct ReductionOptions {
    bool squeezed_phonon = true;  // false: plain phonon vacuum
    double hierarchy_factor_G = 0.1;
    double hierarchy_factor_g = 0.1;
    double leakage_threshold = 1e-6;
};

struct ComparisonReport {
    int N = 0;
    LinearizedParams params;
    Cutoffs cutoffs;
    double Gamma = 0.0, r = 0.0, omega_r = 0.0, chi = 0.0;
    double ratio_G = 0.0;  // G/|Δ − ω_b|
    double ratio_g = 0.0;  // g/|ω_r − Ω|
    bool hierarchy_ok = true;
    bool squeezed_phonon = true;
    std::vector<double> times, xi2_full, xi2_eff, abs_deviation, rel_deviation;
    double t_eff_min = 0.0;
    double max_abs_deviation = 0.0;       // up to the effective-model minimum
    double max_rel_deviation = 0.0;       // up to the effective-model minimum
    double max_rel_deviation_all = 0.0;   // over the whole grid
    double max_norm_error = 0.0;
    double leakage_a = 0.0, leakage_b = 0.0;  // peak population in the top two Fock levels
    bool cutoff_ok = true;
    std::vector<std::string> warnings;
};

/// Eigendecomposition propagator for a Hermitian matrix.
class ExactPropagator {
public:
    explicit ExactPropagator(const MatrixXcd& H) : es_(H) {}
    VectorXcd operator()(const VectorXcd& psi0_eigen, double t) const {
        VectorXcd c = psi0_eigen;
        for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::polar(1.0, -es_.eigenvalues()(k) * t);
        return es_.eigenvectors() * c;
    }
    VectorXcd to_eigenbasis(const VectorXcd& psi) const { return es_.eigenvectors().adjoint() * psi; }

private:
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es_;
};

/// Spin moments of a tripartite pure state (partial trace over both modes).
inline SpinMoments reduced_spin_moments(const TruncatedModel& m, const VectorXcd& psi) {
    const int d = m.spin_dim();
    const int modes = m.cutoffs.n_a * m.cutoffs.n_b;
    MatrixXcd rho = MatrixXcd::Zero(d, d);
    for (int k = 0; k < modes; ++k) {
        const VectorXcd v = psi.segment(static_cast<Eigen::Index>(k) * d, d);
        rho += v * v.adjoint();
    }
    const auto ops = build_collective_ops(m.j);
    auto ev = [&](const MatrixXcd& A) { return (rho * A).trace().real(); };
    SpinMoments s;
    s.Sx = ev(ops.Sx);
    s.Sy = ev(ops.Sy);
    s.Sz = ev(ops.Sz);
    s.Sx2 = ev(ops.Sx * ops.Sx);
    s.Sy2 = ev(ops.Sy * ops.Sy);
    s.Sz2 = ev(ops.Sz * ops.Sz);
    s.Cxy = 0.5 * ev(ops.Sx * ops.Sy + ops.Sy * ops.Sx);
    s.Cxz = 0.5 * ev(ops.Sx * ops.Sz + ops.Sz * ops.Sx);
    s.Cyz = 0.5 * ev(ops.Sy * ops.Sz + ops.Sz * ops.Sy);
    return s;
}

/// Linearised parameters in the large-|Δ| branch realising a given Γ with
/// G = ratio_G·|Δ − ω_b|, and g = ratio_g·|ω_r − Ω|.
inline LinearizedParams dispersive_parameters(double Gamma, double omega_b, double ratio_G, double ratio_g,
                                              double Omega = 0.0) {
    LinearizedParams p;
    p.omega_b = omega_b;
    p.Omega = Omega;
    if (Gamma == 0.0) {
        p.Delta = 0.0;
        p.G = 0.0;
    } else {
        // ρ²Δ² − (ρ²ω_b + Γ)Δ − Γω_b = 0
        const double rho2 = ratio_G * ratio_G;
        const double bq = rho2 * omega_b + Gamma;
        const double disc = bq * bq + 4.0 * rho2 * Gamma * omega_b;
        if (disc < 0.0) throw DomainError("no detuning realises this Gamma at the requested coupling ratio");
        const double r1 = (bq + std::sqrt(disc)) / (2.0 * rho2);
        const double r2 = (bq - std::sqrt(disc)) / (2.0 * rho2);
        p.Delta = std::abs(r1) > std::abs(r2) ? r1 : r2;
        p.G = ratio_G * std::abs(p.Delta - omega_b);
    }
    const double arg = 1.0 - 4.0 * p.Gamma() / omega_b;
    if (!(arg > 0.0)) throw DomainError("1 - 4 Gamma/omega_b <= 0");
    const double omega_r = std::sqrt(arg) * omega_b;
    p.g = ratio_g * std::abs(omega_r - Omega);
    return p;
}

/// Evolves |0⟩_a ⊗ |vac'⟩_b ⊗ |π/2,0⟩ under H_L and |π/2,0⟩ under the
/// effective spin Hamiltonian (Ω̃ = Ω − χ kept) and compares ξ²(t).
inline ComparisonReport verify_effective_reduction(const LinearizedParams& p, int N, std::span<const double> t_grid,
                                                   const Cutoffs& cut, const ReductionOptions& opt = {},
                                                   bool strict = false) {
    if (t_grid.size() < 2) throw DomainError("verification needs at least two time points");
    ComparisonReport rep;
    rep.N = N;
    rep.params = p;
    rep.cutoffs = cut;
    rep.squeezed_phonon = opt.squeezed_phonon;
    rep.Gamma = p.G == 0.0 ? 0.0 : p.Gamma();
    const double arg = 1.0 - 4.0 * rep.Gamma / p.omega_b;
    if (!(arg > 0.0)) throw DomainError("1 - 4 Gamma/omega_b <= 0");
    rep.r = 0.25 * std::log(arg);
    rep.omega_r = std::exp(2.0 * rep.r) * p.omega_b;
    rep.chi = p.g * p.g / rep.omega_r;
    rep.ratio_G = p.G / std::abs(p.Delta - p.omega_b);
    rep.ratio_g = p.g / std::abs(rep.omega_r - p.Omega);
    if (rep.ratio_G > opt.hierarchy_factor_G) {
        rep.hierarchy_ok = false;
        rep.warnings.push_back("G/|Delta - omega_b| = " + std::to_string(rep.ratio_G) + " exceeds the dispersive bound");
    }
    if (rep.ratio_g > opt.hierarchy_factor_g) {
        rep.hierarchy_ok = false;
        rep.warnings.push_back("g/|omega_r - Omega| = " + std::to_string(rep.ratio_g) + " exceeds the dispersive bound");
    }
    if (!rep.hierarchy_ok && strict) throw RegimeError(rep.warnings.front());

    const HalfInteger j(N);
    const TruncatedModel full = build_linearized_hamiltonian(p, cut, j);
    const StateVector css = css_state(j, std::numbers::pi / 2.0, 0.0);

    VectorXcd phonon = VectorXcd::Zero(cut.n_b);
    if (opt.squeezed_phonon)
        phonon = squeezed_phonon_vacuum(p.omega_b, rep.Gamma, cut.n_b);
    else
        phonon(0) = 1.0;
    VectorXcd cavity = VectorXcd::Zero(cut.n_a);
    cavity(0) = 1.0;
    const VectorXcd psi0 = kron(kron(cavity, phonon), css.amplitudes);

    // effective model with the linear term kept
    SpinHamiltonianCoeffs k;
    k.chi_tilde = rep.chi * std::cosh(2.0 * rep.r);
    k.tanh2r = std::tanh(2.0 * rep.r);
    k.Omega_tilde = p.Omega - rep.chi;
    const MatrixXcd Hs = spin_hamiltonian_matrix(k, build_collective_ops(j));

    const ExactPropagator Uf(full.H), Ue(Hs);
    const VectorXcd cf = Uf.to_eigenbasis(psi0), ce = Ue.to_eigenbasis(css.amplitudes);

    for (double t : t_grid) {
        const VectorXcd pf = Uf(cf, t);
        const VectorXcd pe = Ue(ce, t);
        rep.max_norm_error = std::max(rep.max_norm_error, std::abs(pf.norm() - 1.0));
        // leakage into the top two Fock levels of each mode
        double la = 0.0, lb = 0.0;
        for (int na = 0; na < cut.n_a; ++na)
            for (int nb = 0; nb < cut.n_b; ++nb) {
                const double w = pf.segment(full.index(na, nb, 0), j.dim()).squaredNorm();
                if (na >= cut.n_a - 2) la += w;
                if (nb >= cut.n_b - 2) lb += w;
            }
        rep.leakage_a = std::max(rep.leakage_a, la);
        rep.leakage_b = std::max(rep.leakage_b, lb);

        const double xf = xi2_or_nan(reduced_spin_moments(full, pf), N);
        const double xe = squeezing_parameter(StateVector{j, pe}, N).xi2;
        rep.times.push_back(t);
        rep.xi2_full.push_back(xf);
        rep.xi2_eff.push_back(xe);
        rep.abs_deviation.push_back(std::abs(xf - xe));
        rep.rel_deviation.push_back(std::abs(xf - xe) / xe);
    }
    rep.cutoff_ok = rep.leakage_a < opt.leakage_threshold && rep.leakage_b < opt.leakage_threshold;
    if (!rep.cutoff_ok) rep.warnings.push_back("Fock cutoff leakage above threshold");

    // first local minimum of the effective curve bounds the comparison window
    std::size_t stop = rep.times.size() - 1;
    for (std::size_t i = 1; i + 1 < rep.times.size(); ++i)
        if (rep.xi2_eff[i] <= rep.xi2_eff[i - 1] && rep.xi2_eff[i] < rep.xi2_eff[i + 1]) {
            stop = i;
            break;
        }
    rep.t_eff_min = rep.times[stop];
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        if (i <= stop) {
            rep.max_abs_deviation = std::max(rep.max_abs_deviation, rep.abs_deviation[i]);
            rep.max_rel_deviation = std::max(rep.max_rel_deviation, rep.rel_deviation[i]);
        }
        rep.max_rel_deviation_all = std::max(rep.max_rel_deviation_all, rep.rel_deviation[i]);
    }
    return rep;
}

}  // namespace dicke
