// experiments.hpp: time scans, N-scaling fits, ω_r optimisation, the
// asymptote comparison and the preparation-time comparison.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <iomanip>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dicke/dicke_algebra.hpp"
#include "dicke/effective_hamiltonian.hpp"
#include "dicke/errors.hpp"
#include "dicke/fitting.hpp"
#include "dicke/metrics.hpp"
#include "dicke/model_params.hpp"
#include "dicke/moment_cumulant.hpp"
#include "dicke/open_dynamics.hpp"
#include "dicke/trajectory.hpp"

namespace dicke {

enum class Solver { Exact, Cumulant, Analytic };

inline std::string_view to_string(Solver s) {
    switch (s) {
        case Solver::Exact: return "exact";
        case Solver::Cumulant: return "cumulant";
        case Solver::Analytic: return "analytic";
    }
    return "?";
}

inline Solver solver_from_string(std::string_view s) {
    if (s == "exact") return Solver::Exact;
    if (s == "cumulant") return Solver::Cumulant;
    if (s == "analytic") return Solver::Analytic;
    throw ConfigError("unknown solver '" + std::string(s) + "'");
}

/// A squeezing scheme given by Γ/ω_b, with a display label.
struct SchemeSpec {
    std::string label;
    double gamma_ratio = 0.0;  // Γ/ω_b

    static SchemeSpec of(Scheme s) { return {std::string(to_string(s)), scheme_gamma(s, 1.0)}; }
};

struct ScanConfig {
    RawParams base;
    std::vector<SchemeSpec> schemes{SchemeSpec::of(Scheme::OAT), SchemeSpec::of(Scheme::TAT_yz)};
    std::vector<double> n_th_values;  // empty: base.n_th
    std::vector<int> N_values;        // empty: base.N
    std::optional<double> omega_r;    // fixed ω_r; empty: e^{2r}ω_b
    std::vector<double> t_grid;       // explicit grid for scan_time; empty: automatic
    int time_points = 400;
    double span_factor = 5.0;         // automatic grid spans span_factor × pilot time
    int max_extensions = 4;           // grid doublings when the minimum sits on the edge
    bool refine = true;               // second pass around the located minimum
    int refine_points = 41;
    double stop_after_minimum = 0.05;
    Solver solver = Solver::Exact;
    IntegratorOptions integrator{.rtol = 1e-7, .atol = 1e-10};
    double omega_r_lo = two_pi * 10e3;  // bracket for the optimisation (rad/s)
    double omega_r_hi = two_pi * 2e6;
    GoldenOptions golden{};
    FitOptions fit{};

    void validate() const {
        if (time_points < 3) throw ConfigError("time_points must be >= 3");
        if (!(span_factor > 0.0)) throw ConfigError("span_factor must be positive");
        for (int N : N_values)
            if (N < 1) throw ConfigError("N values must be positive");
        for (double n : n_th_values)
            if (!(n >= 0.0)) throw ConfigError("n_th values must be non-negative");
        for (std::size_t i = 1; i < t_grid.size(); ++i)
            if (!(t_grid[i] > t_grid[i - 1])) throw ConfigError("t_grid must be strictly increasing");
        if (!t_grid.empty() && t_grid.front() < 0.0) throw ConfigError("t_grid must be non-negative");
        if (!(omega_r_hi > omega_r_lo && omega_r_lo > 0.0)) throw ConfigError("omega_r bracket must be positive and ordered");
    }
    std::vector<int> Ns() const { return N_values.empty() ? std::vector<int>{base.N} : N_values; }
    std::vector<double> n_ths() const { return n_th_values.empty() ? std::vector<double>{base.n_th} : n_th_values; }
};

/// Derived parameters for one point of a scan.
inline DerivedParams point_params(const ScanConfig& cfg, const SchemeSpec& s, double n_th, int N,
                                  std::optional<double> omega_r = {}) {
    RawParams raw = cfg.base;
    raw.gamma_knob = s.gamma_ratio * raw.omega_b;
    raw.n_th = n_th;
    raw.N = N;
    raw.omega_r = omega_r ? omega_r : cfg.omega_r;
    return derive_chain(raw);
}

inline bool is_unitary(const DerivedParams& p) {
    return p.dephasing_rate() == 0.0 && p.rate_down() == 0.0 && p.rate_up() == 0.0;
}

// ---------------------------------------------------------------------------
// Single trajectories

/// Dissipation-free evolution of |π/2,0⟩ inside the j = N/2 block by exact
/// diagonalisation of the block Hamiltonian.
inline Trajectory unitary_trajectory(const DerivedParams& p, int N, std::span<const double> t_grid,
                                     StateVector* final_state = nullptr) {
    const HalfInteger j(N);
    const MatrixXcd H = spin_hamiltonian_matrix(SpinHamiltonianCoeffs::from(p), build_collective_ops(j));
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(H);
    const StateVector css = css_state(j, std::numbers::pi / 2.0, 0.0);
    const VectorXcd c0 = es.eigenvectors().adjoint() * css.amplitudes;
    Trajectory traj;
    traj.N = N;
    traj.source = "exact_unitary";
    VectorXcd c(c0.size());
    for (double t : t_grid) {
        for (Eigen::Index k = 0; k < c.size(); ++k) c(k) = c0(k) * std::polar(1.0, -es.eigenvalues()(k) * t);
        const StateVector psi{j, es.eigenvectors() * c};
        TrajectoryRecord r;
        r.t = t;
        r.moments = moments_of(psi);
        r.xi2 = xi2_or_nan(r.moments, N);
        r.trace = psi.amplitudes.squaredNorm();
        r.purity = r.trace * r.trace;
        r.min_eigenvalue = 0.0;
        traj.records.push_back(r);
        if (final_state) *final_state = psi;
    }
    return traj;
}

/// One trajectory with the configured solver. The exact solver switches to
/// unitary_trajectory when every dissipative rate vanishes. For the
/// dissipative exact solver, `checkpoint` and `start` let a refinement resume
/// near the minimum; other solvers ignore them.
inline Trajectory simulate(const DerivedParams& p, int N, std::span<const double> t_grid, const ScanConfig& cfg,
                           bool stop_early = false, MinimumCheckpoint* checkpoint = nullptr,
                           const BlockDensityMatrix* start = nullptr) {
    switch (cfg.solver) {
        case Solver::Exact: {
            if (is_unitary(p)) return unitary_trajectory(p, N, t_grid);
            const auto L = build_liouvillian(N, spin_hamiltonian_builder(SpinHamiltonianCoeffs::from(p)), p);
            EvolveOptions opt;
            opt.integrator = cfg.integrator;
            opt.monitor_positivity = false;
            opt.stop_after_minimum = stop_early ? cfg.stop_after_minimum : 0.0;
            if (start) return evolve(*start, L, t_grid, opt, nullptr, checkpoint);
            const auto rho0 = BlockDensityMatrix::from_symmetric_state(N, css_state(HalfInteger(N), std::numbers::pi / 2.0, 0.0));
            return evolve(rho0, L, t_grid, opt, nullptr, checkpoint);
        }
        case Solver::Cumulant: return solve_moments(build_moment_system(p, N), t_grid);
        case Solver::Analytic: return closed_form_moments(build_moment_system(p, N), t_grid);
    }
    throw ConfigError("unknown solver");
}

/// Rough time of the squeezing minimum, used to size the automatic grid.
inline double pilot_time(const DerivedParams& p, int N) {
    if (p.scheme == Scheme::TAT_yz && !is_unitary(p)) {
        try {
            const auto o = analytic_optimum(p, N);
            if (o.t_min > 0.0 && std::isfinite(o.t_min)) return o.t_min;
        } catch (const DomainError&) {
        }
    }
    // one-axis-twisting estimate; two-axis minima come earlier
    return 1.09 * std::pow(static_cast<double>(N), -2.0 / 3.0) / p.chi_tilde;
}

inline std::vector<double> uniform_grid(double t_end, int points) {
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = t_end * i / (points - 1);
    return t;
}

struct MinimumPoint {
    int N = 0;
    double n_th = 0.0;
    double omega_r = 0.0;
    double t_min = 0.0;
    double xi2_min = 0.0;
    bool boundary = false;
    std::string scheme;
    std::vector<std::string> warnings;
};

/// ξ²_min over time for one parameter point.
inline MinimumPoint squeezing_minimum(const DerivedParams& p, int N, const ScanConfig& cfg) {
    MinimumPoint mp;
    mp.N = N;
    mp.n_th = p.n_th;
    mp.omega_r = p.omega_r;
    if (cfg.solver == Solver::Analytic) {
        const auto o = analytic_optimum(p, N);
        mp.t_min = o.t_min;
        mp.xi2_min = o.xi2_min;
        mp.warnings = o.warnings;
        return mp;
    }
    double t_end = cfg.span_factor * pilot_time(p, N);
    Trajectory traj;
    MinimumResult m;
    MinimumCheckpoint cp;
    for (int ext = 0;; ++ext) {
        const auto grid = uniform_grid(t_end, cfg.time_points);
        traj = simulate(p, N, grid, cfg, true, &cp);
        m = find_minimum(traj);
        const bool at_end = m.index + 1 == traj.size() && traj.size() == grid.size();
        if (!at_end || ext >= cfg.max_extensions) {
            mp.boundary = m.boundary;
            break;
        }
        t_end *= 2.0;
    }
    if (cfg.refine && !m.boundary && m.index > 0) {
        const auto t = traj.times();
        const double lo = t[m.index - 1], hi = t[m.index + 1];
        // resume from the stored state at lo when there is one
        const bool resume = cp.valid && cp.t == lo;
        std::vector<double> grid;
        if (!resume) grid.assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(m.index - 1));
        for (int i = 0; i < cfg.refine_points; ++i) grid.push_back(lo + (hi - lo) * i / (cfg.refine_points - 1));
        const auto fine = simulate(p, N, grid, cfg, false, nullptr, resume ? &cp.state : nullptr);
        const auto mf = find_minimum(fine);
        if (mf.xi2_min <= m.xi2_min || !std::isfinite(m.xi2_min)) m = mf;
    }
    mp.t_min = m.t_min;
    mp.xi2_min = m.xi2_min;
    mp.warnings = traj.warnings;
    if (mp.boundary) mp.warnings.emplace_back("BoundaryWarning: minimum on the grid edge");
    return mp;
}

// ---------------------------------------------------------------------------
// Scans

struct LabeledTrajectory {
    std::string scheme;
    double n_th = 0.0;
    int N = 0;
    Trajectory trajectory;
};

/// One trajectory per (scheme, n̄, N). Automatic grids span span_factor × pilot.
inline std::vector<LabeledTrajectory> scan_time(const ScanConfig& cfg) {
    cfg.validate();
    std::vector<LabeledTrajectory> out;
    for (const auto& s : cfg.schemes)
        for (double n : cfg.n_ths())
            for (int N : cfg.Ns()) {
                const auto p = point_params(cfg, s, n, N);
                const auto grid = cfg.t_grid.empty() ? uniform_grid(cfg.span_factor * pilot_time(p, N), cfg.time_points)
                                                     : cfg.t_grid;
                out.push_back({s.label, n, N, simulate(p, N, grid, cfg)});
            }
    return out;
}

inline void write_scan_csv(std::ostream& os, const std::vector<LabeledTrajectory>& scan) {
    bool header = true;
    for (const auto& lt : scan) {
        std::ostringstream tags;
        tags << std::setprecision(17) << lt.scheme << ',' << lt.n_th << ',' << lt.N << ',' << lt.trajectory.source;
        write_trajectory_csv(os, lt.trajectory, header, "scheme,n_th,N,source", tags.str());
        header = false;
    }
}

struct OmegaOptimum {
    int N = 0;
    double omega_r = 0.0;
    double xi2_opt = 0.0;
    double t_opt = 0.0;
    ScalarMinimum search;  // in log ω_r
    std::vector<std::string> warnings;
};

/// Minimises ξ²_min over ω_r in [omega_r_lo, omega_r_hi] by golden-section
/// search in log ω_r.
inline OmegaOptimum optimize_omega_r(const ScanConfig& cfg, const SchemeSpec& s, double n_th, int N) {
    cfg.validate();
    std::vector<MinimumPoint> seen;
    auto objective = [&](double logw) {
        const auto mp = squeezing_minimum(point_params(cfg, s, n_th, N, std::exp(logw)), N, cfg);
        seen.push_back(mp);
        return mp.xi2_min;
    };
    OmegaOptimum o;
    o.N = N;
    o.search = golden_section(objective, std::log(cfg.omega_r_lo), std::log(cfg.omega_r_hi), cfg.golden);
    o.omega_r = std::exp(o.search.x);
    o.xi2_opt = o.search.f;
    for (const auto& mp : seen)
        if (mp.xi2_min == o.xi2_opt && std::abs(std::log(mp.omega_r) - o.search.x) < 1e-12) o.t_opt = mp.t_min;
    if (o.search.non_unimodal) {
        std::ostringstream w;
        w << "NonUnimodalWarning: pre-grid xi2 =";
        for (double v : o.search.pre_grid_f) w << ' ' << v;
        o.warnings.push_back(w.str());
    }
    if (o.search.flat) o.warnings.emplace_back("flat profile: xi2_min does not depend on omega_r");
    if (o.search.at_edge) o.warnings.emplace_back("optimum on the bracket edge");
    return o;
}

struct ScalingResult {
    std::string scheme;
    double n_th = 0.0;
    std::vector<MinimumPoint> points;
    FitResult fit;
};

/// ξ²_min(N) for each N (at fixed ω_r, or optimised per N) and the fit a N^b + const.
inline ScalingResult scan_N_fit(const ScanConfig& cfg, const SchemeSpec& s, double n_th, bool optimize = false) {
    cfg.validate();
    const auto Ns = cfg.Ns();
    if (Ns.size() < 5) throw ConfigError("scan_N_fit needs at least 5 N values");
    ScalingResult res;
    res.scheme = s.label;
    res.n_th = n_th;
    std::vector<double> x, y;
    for (int N : Ns) {
        MinimumPoint mp;
        if (optimize) {
            const auto o = optimize_omega_r(cfg, s, n_th, N);
            mp.N = N;
            mp.n_th = n_th;
            mp.omega_r = o.omega_r;
            mp.t_min = o.t_opt;
            mp.xi2_min = o.xi2_opt;
            mp.warnings = o.warnings;
        } else {
            mp = squeezing_minimum(point_params(cfg, s, n_th, N), N, cfg);
        }
        mp.scheme = s.label;
        x.push_back(N);
        y.push_back(mp.xi2_min);
        res.points.push_back(std::move(mp));
    }
    res.fit = fit_power_law(x, y, cfg.fit);
    return res;
}

struct AsymptoteRow {
    double n_th = 0.0;
    double fitted_const = 0.0;
    double xi2_lb = 0.0;
    double relative_gap = 0.0;  // |const − ξ²_lb| / ξ²_lb
    FitResult fit;
};

/// Fitted const of the two-axis scaling against the analytic bound, per n̄.
inline std::vector<AsymptoteRow> asymptote_report(const ScanConfig& cfg) {
    cfg.validate();
    const SchemeSpec tat = SchemeSpec::of(Scheme::TAT_yz);
    std::vector<AsymptoteRow> rows;
    for (double n : cfg.n_ths()) {
        const auto sr = scan_N_fit(cfg, tat, n);
        AsymptoteRow row;
        row.n_th = n;
        row.fit = sr.fit;
        row.fitted_const = sr.fit.c;
        row.xi2_lb = asymptotic_bound(point_params(cfg, tat, n, cfg.Ns().front()));
        row.relative_gap = row.xi2_lb > 0.0 ? std::abs(row.fitted_const - row.xi2_lb) / row.xi2_lb
                                            : std::abs(row.fitted_const);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace dicke
