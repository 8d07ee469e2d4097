// open_dynamics.hpp: master-equation integration in the permutation-invariant
// block representation.
//
// The state is stored as weighted blocks W_j = d_{N,j} ρ_j so that
// Σ_j tr W_j = 1 and ⟨O⟩ = Σ_j tr(W_j O_j) with no large degeneracy factors
// in the arithmetic.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dicke/dicke_algebra.hpp"
#include "dicke/effective_hamiltonian.hpp"
#include "dicke/errors.hpp"
#include "dicke/integrator.hpp"
#include "dicke/metrics.hpp"
#include "dicke/model_params.hpp"
#include "dicke/trajectory.hpp"

namespace dicke {

// ---------------------------------------------------------------------------
// Banded helpers

/// Transpose (no conjugation).
inline BandedOp banded_transpose(const BandedOp& a) {
    BandedOp t(a.dim);
    for (int o = -2; o <= 2; ++o)
        for (int i = 0; i < a.dim; ++i)
            if (i + o >= 0 && i + o < a.dim) t.band(-o)[static_cast<std::size_t>(i + o)] = a.band(o)[static_cast<std::size_t>(i)];
    return t;
}

inline BandedOp banded_adjoint(const BandedOp& a) {
    BandedOp t = banded_transpose(a);
    for (auto& b : t.bands)
        for (auto& v : b) v = std::conj(v);
    return t;
}

inline BandedOp banded_scale_add(cplx alpha, const BandedOp& a, cplx beta, const BandedOp& b) {
    BandedOp c(a.dim);
    for (std::size_t k = 0; k < 5; ++k)
        for (std::size_t i = 0; i < static_cast<std::size_t>(a.dim); ++i) c.bands[k][i] = alpha * a.bands[k][i] + beta * b.bands[k][i];
    return c;
}

/// A·B; throws if the product has entries outside bandwidth 2.
inline BandedOp banded_product(const BandedOp& a, const BandedOp& b) {
    const int d = a.dim;
    BandedOp c(d);
    for (int i = 0; i < d; ++i)
        for (int oa = -2; oa <= 2; ++oa) {
            const int l = i + oa;
            if (l < 0 || l >= d) continue;
            const cplx av = a.band(oa)[static_cast<std::size_t>(i)];
            if (av == cplx(0.0)) continue;
            for (int ob = -2; ob <= 2; ++ob) {
                const int k = l + ob;
                if (k < 0 || k >= d) continue;
                const cplx bv = b.band(ob)[static_cast<std::size_t>(l)];
                if (bv == cplx(0.0)) continue;
                const int o = k - i;
                if (o < -2 || o > 2) throw DomainError("banded product exceeds bandwidth 2");
                c.band(o)[static_cast<std::size_t>(i)] += av * bv;
            }
        }
    return c;
}

struct SpinBands {
    HalfInteger j;
    BandedOp Sp, Sm, Sx, Sy, Sz;
};

inline SpinBands spin_bands(HalfInteger j) {
    const int d = j.dim();
    SpinBands s{j, BandedOp(d), BandedOp(d), BandedOp(d), BandedOp(d), BandedOp(d)};
    for (int i = 0; i < d; ++i) s.Sz.band(0)[static_cast<std::size_t>(i)] = j.m(i);
    for (int i = 1; i < d; ++i) {
        const double v = raising_element(j.value(), j.m(i));
        s.Sp.band(1)[static_cast<std::size_t>(i - 1)] = v;  // (i-1, i)
        s.Sm.band(-1)[static_cast<std::size_t>(i)] = v;     // (i, i-1)
    }
    s.Sx = banded_scale_add(0.5, s.Sp, 0.5, s.Sm);
    s.Sy = banded_scale_add(cplx(0.0, -0.5), s.Sp, cplx(0.0, 0.5), s.Sm);
    return s;
}

/// Z = cosh2r S- - sinh2r S+ on one block.
inline BandedOp jump_operator_bands(HalfInteger j, double r) {
    const auto s = spin_bands(j);
    return banded_scale_add(std::cosh(2.0 * r), s.Sm, -std::sinh(2.0 * r), s.Sp);
}

// ---------------------------------------------------------------------------
// State

struct BlockDensityMatrix {
    BlockLayout layout;
    std::vector<std::size_t> offsets;  // start of block k in data
    VectorXcd data;                    // column-major W_j blocks, back to back

    BlockDensityMatrix() = default;
    explicit BlockDensityMatrix(int N) : layout(dicke_block_structure(N)) {
        std::size_t off = 0;
        for (const auto& b : layout.blocks) {
            offsets.push_back(off);
            off += static_cast<std::size_t>(b.dim()) * static_cast<std::size_t>(b.dim());
        }
        data = VectorXcd::Zero(static_cast<Eigen::Index>(off));
    }

    int N() const { return layout.N; }
    std::size_t num_blocks() const { return layout.size(); }
    int dim(std::size_t k) const { return layout.blocks[k].dim(); }

    Eigen::Map<MatrixXcd> block(std::size_t k) {
        return {data.data() + offsets[k], dim(k), dim(k)};
    }
    Eigen::Map<const MatrixXcd> block(std::size_t k) const {
        return {data.data() + offsets[k], dim(k), dim(k)};
    }

    /// CSS (or any symmetric pure state) in the maximal-j block.
    static BlockDensityMatrix from_symmetric_state(int N, const StateVector& psi) {
        if (psi.j.twice() != N) throw DomainError("state does not live in the maximal-j block");
        BlockDensityMatrix rho(N);
        rho.block(0) = psi.amplitudes * psi.amplitudes.adjoint();
        return rho;
    }

    static BlockDensityMatrix maximally_mixed(int N) {
        BlockDensityMatrix rho(N);
        for (std::size_t k = 0; k < rho.num_blocks(); ++k) {
            const double w = std::exp(rho.layout.blocks[k].log_degeneracy - N * std::numbers::ln2);
            rho.block(k) = w * MatrixXcd::Identity(rho.dim(k), rho.dim(k));
        }
        return rho;
    }

    double trace() const {
        double t = 0.0;
        for (std::size_t k = 0; k < num_blocks(); ++k) t += block(k).trace().real();
        return t;
    }
    double purity() const {
        double p = 0.0;
        for (std::size_t k = 0; k < num_blocks(); ++k) {
            const auto W = block(k);
            // tr(W²) for Hermitian W is the squared Frobenius norm
            p += W.squaredNorm() / layout.blocks[k].degeneracy;
        }
        return p;
    }
    double hermiticity_error() const {
        double e = 0.0;
        for (std::size_t k = 0; k < num_blocks(); ++k) {
            const auto W = block(k);
            e = std::max(e, (W - W.adjoint()).cwiseAbs().maxCoeff());
        }
        return e;
    }
    /// Smallest eigenvalue of any ρ_j, relative to that block's normalisation W_j = d_j ρ_j.
    double min_eigenvalue() const {
        double mn = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < num_blocks(); ++k) {
            const MatrixXcd H = 0.5 * (block(k) + block(k).adjoint());
            Eigen::SelfAdjointEigenSolver<MatrixXcd> es(H, Eigen::EigenvaluesOnly);
            mn = std::min(mn, es.eigenvalues().minCoeff());
        }
        return mn;
    }
    /// Project every block onto the PSD cone and renormalise the global trace.
    void project_psd() {
        for (std::size_t k = 0; k < num_blocks(); ++k) {
            const MatrixXcd H = 0.5 * (block(k) + block(k).adjoint());
            Eigen::SelfAdjointEigenSolver<MatrixXcd> es(H);
            const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
            block(k) = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
        }
        data /= trace();
    }
};

/// ½ Σ_j ‖W_j − W'_j‖₁, the trace distance of the full 2^N-space states.
inline double trace_distance(const BlockDensityMatrix& a, const BlockDensityMatrix& b) {
    if (a.N() != b.N()) throw DomainError("trace_distance: mismatched N");
    double s = 0.0;
    for (std::size_t k = 0; k < a.num_blocks(); ++k) {
        const MatrixXcd D = a.block(k) - b.block(k);
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (D + D.adjoint()), Eigen::EigenvaluesOnly);
        s += es.eigenvalues().cwiseAbs().sum();
    }
    return 0.5 * s;
}

// ---------------------------------------------------------------------------
// Moments

/// Banded second-moment operators for every block, built once per N.
class MomentOperators {
public:
    explicit MomentOperators(const BlockLayout& layout) {
        for (const auto& b : layout.blocks) {
            const auto s = spin_bands(b.j);
            Ops o;
            o.Sx = s.Sx;
            o.Sy = s.Sy;
            o.Sz = s.Sz;
            o.Sx2 = banded_product(s.Sx, s.Sx);
            o.Sy2 = banded_product(s.Sy, s.Sy);
            o.Sz2 = banded_product(s.Sz, s.Sz);
            o.Cxy = banded_scale_add(0.5, banded_product(s.Sx, s.Sy), 0.5, banded_product(s.Sy, s.Sx));
            o.Cxz = banded_scale_add(0.5, banded_product(s.Sx, s.Sz), 0.5, banded_product(s.Sz, s.Sx));
            o.Cyz = banded_scale_add(0.5, banded_product(s.Sy, s.Sz), 0.5, banded_product(s.Sz, s.Sy));
            ops_.push_back(std::move(o));
        }
    }

    SpinMoments operator()(const BlockDensityMatrix& rho) const {
        SpinMoments m;
        for (std::size_t k = 0; k < rho.num_blocks(); ++k) {
            const auto W = rho.block(k);
            const auto& o = ops_[k];
            m.Sx += trace_product(W, o.Sx);
            m.Sy += trace_product(W, o.Sy);
            m.Sz += trace_product(W, o.Sz);
            m.Sx2 += trace_product(W, o.Sx2);
            m.Sy2 += trace_product(W, o.Sy2);
            m.Sz2 += trace_product(W, o.Sz2);
            m.Cxy += trace_product(W, o.Cxy);
            m.Cxz += trace_product(W, o.Cxz);
            m.Cyz += trace_product(W, o.Cyz);
        }
        return m;
    }

private:
    struct Ops {
        BandedOp Sx, Sy, Sz, Sx2, Sy2, Sz2, Cxy, Cxz, Cyz;
    };
    std::vector<Ops> ops_;

    /// Re tr(W O) = Re Σ_b Σ_o O(b, b+o) W(b+o, b).
    static double trace_product(const Eigen::Map<const MatrixXcd>& W, const BandedOp& O) {
        const int d = O.dim;
        cplx s = 0.0;
        for (int o = -2; o <= 2; ++o) {
            const auto& band = O.band(o);
            for (int b = std::max(0, -o); b < std::min(d, d - o); ++b) s += band[static_cast<std::size_t>(b)] * W(b + o, b);
        }
        return s.real();
    }
};

// ---------------------------------------------------------------------------
// Liouvillian

/// Banded Hamiltonian for a given j block.
using HamiltonianBuilder = std::function<BandedOp(HalfInteger)>;

inline HamiltonianBuilder spin_hamiltonian_builder(const SpinHamiltonianCoeffs& k) {
    return [k](HalfInteger j) { return spin_hamiltonian_bands(k, j); };
}

struct LindbladRates {
    double dephasing = 0.0;  // 1/(2T₂)
    double down = 0.0;       // Γ_γ(n̄+1), coefficient of D[Z]
    double up = 0.0;         // Γ_γ n̄, coefficient of D[Z†]

    static LindbladRates from(const DerivedParams& p) { return {p.dephasing_rate(), p.rate_down(), p.rate_up()}; }
};

inline constexpr int default_max_spins = 512;

/// −i[H,·] + (1/2T₂) Σ_k D[σz^k] + Γ↓ D[Z] + Γ↑ D[Z†], applied matrix-free.
class Liouvillian {
public:
    Liouvillian(int N, const HamiltonianBuilder& H_builder, double r, const LindbladRates& rates,
                int max_spins = default_max_spins)
        : layout_(dicke_block_structure(check_size(N, max_spins))), rates_(rates), r_(r) {
        if (rates.dephasing < 0.0 || rates.down < 0.0 || rates.up < 0.0)
            throw DomainError("Lindblad rates must be non-negative");
        const double half_N = 0.5 * N;
        for (std::size_t k = 0; k < layout_.size(); ++k) {
            const HalfInteger j = layout_.blocks[k].j;
            const double jv = j.value();
            const int d = j.dim();
            BlockTerms bt;
            bt.dim = d;
            bt.H = H_builder(j);
            if (bt.H.dim != d) throw DomainError("Hamiltonian builder returned wrong block dimension");
            bt.Z = jump_operator_bands(j, r);
            bt.Zt = banded_adjoint(bt.Z);
            const BandedOp K = banded_scale_add(rates.down, banded_product(bt.Zt, bt.Z), rates.up,
                                                banded_product(bt.Z, bt.Zt));
            bt.G = banded_scale_add(cplx(0.0, -1.0), bt.H, -0.5, K);

            bt.m.resize(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) bt.m[static_cast<std::size_t>(i)] = j.m(i);
            bt.same_coeff = jv > 0.0 ? (N + 2.0) / (jv * (jv + 1.0)) : 0.0;
            // inflow from j+1 (previous block in descending order)
            if (k > 0) {
                bt.from_upper_pref = 2.0 * (half_N + jv + 2.0) / ((jv + 1.0) * (2.0 * jv + 3.0));
                bt.from_upper.resize(static_cast<std::size_t>(d));
                for (int i = 0; i < d; ++i) {
                    const double m = j.m(i);
                    bt.from_upper[static_cast<std::size_t>(i)] = std::sqrt((jv + 1.0) * (jv + 1.0) - m * m);
                }
            }
            // inflow from j-1 (next block)
            if (k + 1 < layout_.size()) {
                bt.from_lower_pref = 2.0 * (half_N - jv + 1.0) / (jv * (2.0 * jv - 1.0));
                bt.from_lower.resize(static_cast<std::size_t>(d));
                for (int i = 0; i < d; ++i) {
                    const double m = j.m(i);
                    bt.from_lower[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, jv * jv - m * m));
                }
            }
            terms_.push_back(std::move(bt));
        }
        offsets_ = BlockDensityMatrix(N).offsets;
    }

    int N() const { return layout_.N; }
    const BlockLayout& layout() const { return layout_; }
    const LindbladRates& rates() const { return rates_; }
    double squeeze_parameter() const { return r_; }
    const BandedOp& hamiltonian(std::size_t k) const { return terms_[k].H; }
    const BandedOp& jump(std::size_t k) const { return terms_[k].Z; }

    /// Length of the flattened vector holding the first `blocks` blocks.
    std::size_t prefix_size(std::size_t blocks) const {
        return blocks >= terms_.size() ? offsets_.back() + static_cast<std::size_t>(terms_.back().dim) * terms_.back().dim
                                       : offsets_[blocks];
    }

    /// dW = L(W) on the flattened block vector. A shorter vector holding only
    /// the leading (highest-j) blocks is accepted; the remaining blocks are
    /// treated as empty and the weight flowing into them is dropped.
    void apply(const VectorXcd& w, VectorXcd& dw) const {
        std::size_t active = 0;
        while (active < terms_.size() && prefix_size(active + 1) <= static_cast<std::size_t>(w.size())) ++active;
        if (prefix_size(active) != static_cast<std::size_t>(w.size()))
            throw DomainError("state vector length does not match a block prefix");
        dw.setZero(w.size());
        std::vector<cplx> scratch(static_cast<std::size_t>(terms_.front().dim) * terms_.front().dim);
        for (std::size_t k = 0; k < active; ++k) apply_block(k, w, dw, scratch.data(), active);
    }

    BlockDensityMatrix apply(const BlockDensityMatrix& rho) const {
        BlockDensityMatrix out = rho;
        apply(rho.data, out.data);
        return out;
    }

private:
    struct BlockTerms {
        int dim = 0;
        BandedOp H, Z, Zt, G;
        std::vector<double> m;
        double same_coeff = 0.0;
        double from_upper_pref = 0.0, from_lower_pref = 0.0;
        std::vector<double> from_upper, from_lower;
    };

    static int check_size(int N, int max_spins) {
        if (N < 1) throw DomainError("N must be >= 1");
        if (N > max_spins) throw ResourceError("N = " + std::to_string(N) + " exceeds the configured maximum of " +
                                               std::to_string(max_spins) + " spins");
        return N;
    }

    BlockLayout layout_;
    LindbladRates rates_;
    double r_ = 0.0;
    std::vector<BlockTerms> terms_;
    std::vector<std::size_t> offsets_;
    void apply_block(std::size_t k, const VectorXcd& w, VectorXcd& dw, cplx* X, std::size_t active) const {
        const BlockTerms& bt = terms_[k];
        const int d = bt.dim;
        const cplx* W = w.data() + offsets_[k];
        cplx* D = dw.data() + offsets_[k];
        auto at = [d](int row, int col) { return static_cast<std::size_t>(row) + static_cast<std::size_t>(col) * d; };

        // D += G W + W G†. Both products are formed explicitly: the shortcut
        // X + X† with X = G W is only valid for Hermitian W and lets roundoff
        // in the anti-Hermitian part grow at a rate of order ||K||.
        left_multiply(bt.G, W, X, d);
        for (std::size_t i = 0; i < static_cast<std::size_t>(d) * d; ++i) D[i] += X[i];
        add_right_adjoint(bt.G, W, D, 1.0, d);

        if (rates_.down > 0.0) sandwich(bt.Z, W, X, D, rates_.down, d);
        if (rates_.up > 0.0) sandwich(bt.Zt, W, X, D, rates_.up, d);

        if (rates_.dephasing > 0.0) {
            const double g = rates_.dephasing;
            const double N = layout_.N;
            for (int b = 0; b < d; ++b) {
                const double mb = bt.m[static_cast<std::size_t>(b)];
                for (int a = 0; a < d; ++a) {
                    const double ma = bt.m[static_cast<std::size_t>(a)];
                    D[at(a, b)] += g * (bt.same_coeff * ma * mb - N) * W[at(a, b)];
                }
            }
            if (k > 0) {
                // W_{j+1}[i+1, i'+1]
                const int du = terms_[k - 1].dim;
                const cplx* U = w.data() + offsets_[k - 1];
                const double pref = g * bt.from_upper_pref;
                for (int b = 0; b < d; ++b) {
                    const double fb = pref * bt.from_upper[static_cast<std::size_t>(b)];
                    for (int a = 0; a < d; ++a)
                        D[at(a, b)] += fb * bt.from_upper[static_cast<std::size_t>(a)] *
                                       U[static_cast<std::size_t>(a + 1) + static_cast<std::size_t>(b + 1) * du];
                }
            }
            if (k + 1 < active) {
                // W_{j-1}[i-1, i'-1]; zero on the outer rows/columns where |m| = j
                const int dl = terms_[k + 1].dim;
                const cplx* L = w.data() + offsets_[k + 1];
                const double pref = g * bt.from_lower_pref;
                for (int b = 1; b < d - 1; ++b) {
                    const double fb = pref * bt.from_lower[static_cast<std::size_t>(b)];
                    for (int a = 1; a < d - 1; ++a)
                        D[at(a, b)] += fb * bt.from_lower[static_cast<std::size_t>(a)] *
                                       L[static_cast<std::size_t>(a - 1) + static_cast<std::size_t>(b - 1) * dl];
                }
            }
        }
    }

    /// X = A W (column-major, dimension d).
    static void left_multiply(const BandedOp& A, const cplx* W, cplx* X, int d) {
        std::fill(X, X + static_cast<std::size_t>(d) * d, cplx(0.0));
        for (int o = -2; o <= 2; ++o) {
            if (A.band_is_zero(o)) continue;
            const cplx* band = A.band(o).data();
            const int a0 = std::max(0, -o), a1 = std::min(d, d - o);
            for (int b = 0; b < d; ++b) {
                cplx* xc = X + static_cast<std::size_t>(b) * d;
                const cplx* wc = W + static_cast<std::size_t>(b) * d;
                for (int a = a0; a < a1; ++a) xc[a] += band[a] * wc[a + o];
            }
        }
    }

    /// D += rate · Y A†, where (Y A†)(a, b) = Σ_o conj(A(b, b+o)) Y(a, b+o).
    static void add_right_adjoint(const BandedOp& A, const cplx* Y, cplx* D, double rate, int d) {
        for (int o = -2; o <= 2; ++o) {
            if (A.band_is_zero(o)) continue;
            const cplx* band = A.band(o).data();
            for (int b = std::max(0, -o); b < std::min(d, d - o); ++b) {
                const cplx c = rate * std::conj(band[b]);
                cplx* dc = D + static_cast<std::size_t>(b) * d;
                const cplx* yc = Y + static_cast<std::size_t>(b + o) * d;
                for (int a = 0; a < d; ++a) dc[a] += c * yc[a];
            }
        }
    }

    /// D += rate · A W A†, using X as scratch for A W.
    static void sandwich(const BandedOp& A, const cplx* W, cplx* X, cplx* D, double rate, int d) {
        left_multiply(A, W, X, d);
        add_right_adjoint(A, X, D, rate, d);
    }
};

inline Liouvillian build_liouvillian(int N, const HamiltonianBuilder& H_builder, const DerivedParams& params,
                                     int max_spins = default_max_spins) {
    return Liouvillian(N, H_builder, params.r, LindbladRates::from(params), max_spins);
}

inline Liouvillian build_liouvillian(const DerivedParams& params, int max_spins = default_max_spins) {
    return build_liouvillian(params.N, spin_hamiltonian_builder(SpinHamiltonianCoeffs::from(params)), params,
                             max_spins);
}

// ---------------------------------------------------------------------------
// Evolution

struct EvolveOptions {
    IntegratorOptions integrator{};
    /// Eigenvalue check on every record (O(d³) per block); PositivityWarning below −10·rtol.
    bool monitor_positivity = true;
    /// Project onto the PSD cone at every grid point. Off by default.
    bool project_psd = false;
    /// Stop once ξ² has risen by this fraction above its running minimum
    /// (at least 3 records past it). 0 disables.
    double stop_after_minimum = 0.0;
    /// Blocks that local dephasing cannot reach with probability above this
    /// bound are left out of the integration. 0 keeps every block.
    double truncation_tail = 1e-15;
};

/// Number of leading blocks to integrate. Each σz jump lowers j by at most
/// one and jumps form a Poisson process of rate N/(2T₂), so the weight below
/// depth K is bounded by P(Poisson(λ) > K) with λ = N t/(2T₂).
inline std::size_t reachable_blocks(const BlockDensityMatrix& rho0, double dephasing_rate, double t_span,
                                    double tail) {
    const std::size_t nb = rho0.num_blocks();
    std::size_t occupied = 0;
    for (std::size_t k = 0; k < nb; ++k)
        if (rho0.block(k).cwiseAbs().maxCoeff() > 0.0) occupied = k + 1;
    if (tail <= 0.0 || occupied == 0) return nb;
    const double lambda = rho0.N() * dephasing_rate * t_span;
    if (lambda <= 0.0) return occupied;
    // upper-tail probabilities P(X > K) summed from the far end
    std::vector<double> pmf(nb + 1);
    for (std::size_t k = 0; k <= nb; ++k)
        pmf[k] = std::exp(-lambda + static_cast<double>(k) * std::log(lambda) - std::lgamma(k + 1.0));
    double below = 0.0;
    for (double v : pmf) below += v;
    double upper = std::max(0.0, 1.0 - below);  // mass beyond the last block
    std::size_t depth = nb;
    for (std::size_t K = nb; K-- > 0;) {
        upper += pmf[K + 1];
        if (upper >= tail) break;
        depth = K;
    }
    return std::min(nb, occupied + depth);
}

/// Record of a block state at time t.
inline TrajectoryRecord make_record(double t, const BlockDensityMatrix& rho, const MomentOperators& mops,
                                    bool positivity) {
    TrajectoryRecord r;
    r.t = t;
    r.moments = mops(rho);
    r.xi2 = xi2_or_nan(r.moments, rho.N());
    r.trace = rho.trace();
    r.purity = rho.purity();
    r.hermiticity_error = rho.hermiticity_error();
    r.min_eigenvalue = positivity ? rho.min_eigenvalue() : std::numeric_limits<double>::quiet_NaN();
    return r;
}

namespace detail {

/// Early-termination test shared by the evolvers.
struct MinimumTracker {
    double factor = 0.0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    std::size_t count = 0;

    /// Returns false when integration may stop.
    bool push(double xi2) {
        const std::size_t idx = count++;
        if (std::isfinite(xi2) && xi2 < best) {
            best = xi2;
            best_index = idx;
        }
        if (factor <= 0.0 || !std::isfinite(best)) return true;
        return !(idx >= best_index + 3 && std::isfinite(xi2) && xi2 > best * (1.0 + factor) && best < 1.0);
    }
};

}  // namespace detail

/// State at the record just before the running ξ² minimum, so a refinement
/// around the minimum can restart there instead of at t = 0.
struct MinimumCheckpoint {
    bool valid = false;
    double t = 0.0;
    BlockDensityMatrix state;
};

inline Trajectory evolve(const BlockDensityMatrix& rho0, const Liouvillian& L, std::span<const double> t_grid,
                         const EvolveOptions& opt = {}, BlockDensityMatrix* final_state = nullptr,
                         MinimumCheckpoint* checkpoint = nullptr) {
    if (rho0.N() != L.N()) throw DomainError("initial state and Liouvillian disagree on N");
    if (t_grid.empty()) throw DomainError("empty time grid");
    Trajectory traj;
    traj.N = rho0.N();
    const MomentOperators mops(rho0.layout);
    BlockDensityMatrix work = rho0;
    detail::MinimumTracker tracker{opt.stop_after_minimum};
    BlockDensityMatrix prev;
    double prev_t = 0.0;
    if (checkpoint) checkpoint->valid = false;
    bool warned = false;
    const double neg_threshold = -10.0 * opt.integrator.rtol;

    auto observe_full = [&](double t) {
        auto rec = make_record(t, work, mops, opt.monitor_positivity);
        if (opt.monitor_positivity && rec.min_eigenvalue < neg_threshold && !warned) {
            traj.warnings.push_back("PositivityWarning: block eigenvalue " + std::to_string(rec.min_eigenvalue) +
                                    " at t = " + std::to_string(t));
            warned = true;
        }
        traj.records.push_back(rec);
        const double best_before = tracker.best;
        const bool keep = tracker.push(rec.xi2);
        if (checkpoint) {
            if (tracker.best < best_before || !checkpoint->valid) {
                checkpoint->valid = true;
                checkpoint->t = traj.records.size() > 1 ? prev_t : t;
                checkpoint->state = traj.records.size() > 1 ? prev : work;
            }
            prev = work;
            prev_t = t;
        }
        return keep;
    };
    auto rhs = [&](double, const VectorXcd& y, VectorXcd& dy) { L.apply(y, dy); };

    const std::size_t active =
        reachable_blocks(rho0, L.rates().dephasing, t_grid.back() - t_grid.front(), opt.truncation_tail);
    const auto len = static_cast<Eigen::Index>(L.prefix_size(active));
    auto observe_prefix = [&](double t, const VectorXcd& y) {
        work.data.head(len) = y;
        return observe_full(t);
    };

    if (!opt.project_psd) {
        integrate_dopri5(rhs, VectorXcd(rho0.data.head(len)), t_grid, observe_prefix, opt.integrator);
    } else {
        VectorXcd y = rho0.data;
        auto observe = [&](double t, const VectorXcd& yy) {
            work.data = yy;
            return observe_full(t);
        };
        if (!observe(t_grid.front(), y)) return traj;
        for (std::size_t i = 1; i < t_grid.size(); ++i) {
            const double seg[2] = {t_grid[i - 1], t_grid[i]};
            bool first = true;
            bool keep = true;
            integrate_dopri5(
                rhs, y, std::span<const double>(seg, 2),
                [&](double t, const VectorXcd& yy) {
                    if (first) {
                        first = false;
                        return true;
                    }
                    work.data = yy;
                    work.project_psd();
                    y = work.data;
                    keep = observe(t, y);
                    return true;
                },
                opt.integrator);
            if (!keep) break;
        }
    }
    if (final_state) *final_state = work;
    return traj;
}

/// Husimi Q of the maximal-j block (degeneracy one, so W = ρ there); the
/// block's trace weight is reported with the field.
inline HusimiField husimi_q(const BlockDensityMatrix& rho, const HusimiGridSpec& grid = {}) {
    return husimi_q(MatrixXcd(rho.block(0)), rho.layout.blocks.front().j, grid);
}

}  // namespace dicke
