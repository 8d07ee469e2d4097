// dicke_algebra.hpp: collective spin operators, coherent spin states and the
// total-spin block layout of N spin-1/2 particles.
//
// Basis ordering is fixed as m = j, j-1, ..., -j (index i <-> m = j - i).

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dicke/errors.hpp"

namespace dicke {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

/// Non-negative half-integer stored as 2j.
class HalfInteger {
public:
    constexpr HalfInteger() = default;
    constexpr explicit HalfInteger(int twice) : twice_(twice) {
        if (twice < 0) throw DomainError("spin quantum number must be non-negative");
    }
    static HalfInteger from_double(double j) {
        const double t = 2.0 * j;
        const double rounded = std::round(t);
        if (j < 0.0 || std::abs(t - rounded) > 1e-12)
            throw DomainError("j must be a non-negative half-integer");
        return HalfInteger(static_cast<int>(rounded));
    }
    constexpr int twice() const { return twice_; }
    constexpr double value() const { return 0.5 * twice_; }
    constexpr int dim() const { return twice_ + 1; }
    /// m value at basis index i.
    constexpr double m(int i) const { return value() - i; }
    constexpr auto operator<=>(const HalfInteger&) const = default;

private:
    int twice_ = 0;
};

/// ⟨j,m+1|S+|j,m⟩
inline double raising_element(double j, double m) {
    return std::sqrt(std::max(0.0, j * (j + 1.0) - m * (m + 1.0)));
}

struct SpinOps {
    HalfInteger j;
    MatrixXcd Sx, Sy, Sz, Sp, Sm, S2;

    int dim() const { return j.dim(); }
};

inline SpinOps build_collective_ops(HalfInteger j) {
    const int d = j.dim();
    const double jv = j.value();
    SpinOps ops;
    ops.j = j;
    ops.Sz = MatrixXcd::Zero(d, d);
    ops.Sp = MatrixXcd::Zero(d, d);
    for (int i = 0; i < d; ++i) ops.Sz(i, i) = j.m(i);
    // S+ maps index i (m) to index i-1 (m+1)
    for (int i = 1; i < d; ++i) ops.Sp(i - 1, i) = raising_element(jv, j.m(i));
    ops.Sm = ops.Sp.adjoint();
    ops.Sx = 0.5 * (ops.Sp + ops.Sm);
    ops.Sy = cplx(0.0, -0.5) * (ops.Sp - ops.Sm);
    ops.S2 = jv * (jv + 1.0) * MatrixXcd::Identity(d, d);
    return ops;
}

inline SpinOps build_collective_ops(double j) { return build_collective_ops(HalfInteger::from_double(j)); }

/// ln C(n, k)
inline double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

struct Block {
    HalfInteger j;
    /// Multiplicity d_{N,j}; exact for N <= 60, rounded beyond.
    double degeneracy = 1.0;
    double log_degeneracy = 0.0;
    int dim() const { return j.dim(); }
};

struct BlockLayout {
    int N = 0;
    std::vector<Block> blocks;  // descending j

    std::size_t size() const { return blocks.size(); }
    /// Σ_j d_{N,j}(2j+1) evaluated in floating point.
    double total_dimension() const {
        double s = 0.0;
        for (const auto& b : blocks) s += b.degeneracy * b.dim();
        return s;
    }
    /// d_{N,j_a}/d_{N,j_b} without overflow.
    double degeneracy_ratio(std::size_t a, std::size_t b) const {
        return std::exp(blocks[a].log_degeneracy - blocks[b].log_degeneracy);
    }
};

namespace detail {

inline std::uint64_t binomial_exact(int n, int k) {
    if (k < 0 || k > n) return 0;
    unsigned __int128 c = 1;
    for (int i = 1; i <= k; ++i) c = c * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    return static_cast<std::uint64_t>(c);
}

}  // namespace detail

/// d_{N,j} = C(N, N/2-j) - C(N, N/2-j-1), blocks sorted by descending j.
inline BlockLayout dicke_block_structure(int N) {
    if (N < 1) throw DomainError("N must be >= 1");
    BlockLayout layout;
    layout.N = N;
    for (int twice_j = N; twice_j >= 0; twice_j -= 2) {
        const int k = (N - twice_j) / 2;
        Block b;
        b.j = HalfInteger(twice_j);
        // d = C(N,k) (2j+1)/(N/2+j+1)
        b.log_degeneracy = log_binomial(N, k) + std::log(twice_j + 1.0) - std::log(N - k + 1.0);
        if (N <= 60) {
            b.degeneracy = static_cast<double>(detail::binomial_exact(N, k) - detail::binomial_exact(N, k - 1));
            b.log_degeneracy = std::log(b.degeneracy);
        } else {
            b.degeneracy = std::exp(b.log_degeneracy);
        }
        layout.blocks.push_back(b);
    }
    return layout;
}

struct StateVector {
    HalfInteger j;
    VectorXcd amplitudes;
};

/// Coherent spin state exp(-iφSz) exp(-iθSy)|j,j⟩, built from the closed-form
/// Wigner d-matrix column d^j_{m,j}(θ) in log space (no overflow near θ = π).
inline StateVector css_state(HalfInteger j, double theta, double phi) {
    const int d = j.dim();
    const int two_j = j.twice();
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    StateVector out{j, VectorXcd::Zero(d)};
    for (int i = 0; i < d; ++i) {
        const int p = two_j - i;  // power of cos: j + m
        const int q = i;          // power of sin: j - m
        if ((p > 0 && c == 0.0) || (q > 0 && s == 0.0)) continue;
        double log_mag = 0.5 * log_binomial(two_j, i);
        if (p > 0) log_mag += p * std::log(std::abs(c));
        if (q > 0) log_mag += q * std::log(std::abs(s));
        double sign = 1.0;
        if (p % 2 == 1 && c < 0.0) sign = -sign;
        if (q % 2 == 1 && s < 0.0) sign = -sign;
        out.amplitudes(i) = sign * std::exp(log_mag) * std::polar(1.0, -j.m(i) * phi);
    }
    return out;
}

inline StateVector css_state(double j, double theta, double phi) {
    return css_state(HalfInteger::from_double(j), theta, phi);
}

inline cplx expectation(const VectorXcd& psi, const MatrixXcd& op) { return psi.dot(op * psi); }

}  // namespace dicke
