// effective_hamiltonian.hpp: the spin-only Hamiltonian family, the Bogoliubov
// spin operator and the phonon-induced collective jump operator.

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "dicke/dicke_algebra.hpp"
#include "dicke/model_params.hpp"

namespace dicke {

/// Coefficients of H = -χ̃[(S² - Sz²) - tanh2r (Sx² - Sy²)] + Ω̃ Sz.
struct SpinHamiltonianCoeffs {
    double chi_tilde = 0.0;
    double tanh2r = 0.0;
    double Omega_tilde = 0.0;

    static SpinHamiltonianCoeffs from(const DerivedParams& p) { return {p.chi_tilde, p.tanh2r, p.Omega_tilde}; }
};

struct SpinHamiltonian {
    MatrixXcd matrix;
    Scheme scheme = Scheme::Mixed;
    SpinHamiltonianCoeffs coeffs;
};

inline MatrixXcd spin_hamiltonian_matrix(const SpinHamiltonianCoeffs& k, const SpinOps& ops) {
    const MatrixXcd Sx2 = ops.Sx * ops.Sx;
    const MatrixXcd Sy2 = ops.Sy * ops.Sy;
    const MatrixXcd Sz2 = ops.Sz * ops.Sz;
    return -k.chi_tilde * ((ops.S2 - Sz2) - k.tanh2r * (Sx2 - Sy2)) + k.Omega_tilde * ops.Sz;
}

inline SpinHamiltonian build_spin_hamiltonian(const DerivedParams& params, const SpinOps& ops) {
    const auto k = SpinHamiltonianCoeffs::from(params);
    return {spin_hamiltonian_matrix(k, ops), params.scheme, k};
}

/// Ξ = S- cosh r - S+ sinh r
inline MatrixXcd build_bogoliubov_operator(const SpinOps& ops, double r) {
    return std::cosh(r) * ops.Sm - std::sinh(r) * ops.Sp;
}

/// Z = e^{-2r} Sx - i e^{2r} Sy  (= cosh2r S- - sinh2r S+)
inline MatrixXcd build_jump_operator(const SpinOps& ops, double r) {
    return std::exp(-2.0 * r) * ops.Sx - cplx(0.0, 1.0) * std::exp(2.0 * r) * ops.Sy;
}

/// Square operator with bandwidth <= 2 on one j block. band(o)[i] = A(i, i+o).
struct BandedOp {
    int dim = 0;
    std::array<std::vector<cplx>, 5> bands;

    explicit BandedOp(int d = 0) : dim(d) {
        for (auto& b : bands) b.assign(static_cast<std::size_t>(d), cplx(0.0));
    }
    std::vector<cplx>& band(int offset) { return bands[static_cast<std::size_t>(offset + 2)]; }
    const std::vector<cplx>& band(int offset) const { return bands[static_cast<std::size_t>(offset + 2)]; }
    cplx operator()(int row, int col) const {
        const int o = col - row;
        if (o < -2 || o > 2 || row < 0 || row >= dim || col < 0 || col >= dim) return 0.0;
        return band(o)[static_cast<std::size_t>(row)];
    }
    bool band_is_zero(int offset) const {
        for (const auto& v : band(offset))
            if (v != cplx(0.0)) return false;
        return true;
    }
    MatrixXcd dense() const {
        MatrixXcd m = MatrixXcd::Zero(dim, dim);
        for (int o = -2; o <= 2; ++o)
            for (int i = 0; i < dim; ++i)
                if (i + o >= 0 && i + o < dim) m(i, i + o) = band(o)[static_cast<std::size_t>(i)];
        return m;
    }
};

inline BandedOp bands_from_dense(const MatrixXcd& m, double tol = 0.0) {
    const int d = static_cast<int>(m.rows());
    BandedOp out(d);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            const int o = k - i;
            if (o >= -2 && o <= 2) {
                out.band(o)[static_cast<std::size_t>(i)] = m(i, k);
            } else if (std::abs(m(i, k)) > tol) {
                throw DomainError("operator bandwidth exceeds 2 in the |j,m> basis");
            }
        }
    return out;
}

/// Banded form of the spin Hamiltonian on block j (no dense intermediate).
inline BandedOp spin_hamiltonian_bands(const SpinHamiltonianCoeffs& k, HalfInteger j) {
    const int d = j.dim();
    const double jv = j.value();
    BandedOp h(d);
    for (int i = 0; i < d; ++i) {
        const double m = j.m(i);
        h.band(0)[static_cast<std::size_t>(i)] = -k.chi_tilde * (jv * (jv + 1.0) - m * m) + k.Omega_tilde * m;
    }
    // Sx² - Sy² = (S+² + S-²)/2; ⟨m+2|S+²|m⟩ = λ(m) λ(m+1)
    for (int i = 2; i < d; ++i) {
        const double m = j.m(i);
        const double amp = raising_element(jv, m) * raising_element(jv, m + 1.0);
        const double v = k.chi_tilde * k.tanh2r * 0.5 * amp;
        h.band(2)[static_cast<std::size_t>(i - 2)] = v;  // (i-2, i)
        h.band(-2)[static_cast<std::size_t>(i)] = v;     // (i, i-2)
    }
    return h;
}

}  // namespace dicke
