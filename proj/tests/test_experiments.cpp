#include <gtest/gtest.h>

#include <sstream>

#include "dicke/experiments.hpp"

using namespace dicke;

namespace {

ScanConfig dissipative_config() {
    ScanConfig cfg;
    cfg.base.omega_b = from_hz(1e9);
    cfg.base.g = from_hz(1e3);
    cfg.base.Q_m = 1e6;
    cfg.base.T2 = 0.01;
    cfg.omega_r = from_hz(53e3);
    cfg.time_points = 120;
    return cfg;
}

ScanConfig unitary_config() {
    ScanConfig cfg;
    cfg.base.T2 = std::numeric_limits<double>::infinity();
    cfg.base.Q_m = std::numeric_limits<double>::infinity();
    return cfg;
}

std::string scan_csv(const ScanConfig& cfg) {
    std::ostringstream os;
    write_scan_csv(os, scan_time(cfg));
    return os.str();
}

}  // namespace

TEST(Experiments, TimeRescalingInvariance) {
    ScanConfig cfg = dissipative_config();
    cfg.base.n_th = 5.0;
    const int N = 10;
    const auto p = point_params(cfg, SchemeSpec::of(Scheme::TAT_yz), 5.0, N);
    const double s = 7.5;
    DerivedParams q = p;
    q.chi *= s;
    q.chi_tilde *= s;
    q.Gamma_gamma *= s;
    q.c *= s;
    q.T2 /= s;
    const auto t = uniform_grid(3.0 * pilot_time(p, N), 30);
    std::vector<double> ts;
    for (double x : t) ts.push_back(x / s);
    cfg.integrator.rtol = 1e-11;
    cfg.integrator.atol = 1e-13;
    const auto a = simulate(p, N, t, cfg);
    const auto b = simulate(q, N, ts, cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.records[i].xi2, b.records[i].xi2, 1e-8);

    const auto pu = point_params(unitary_config(), SchemeSpec::of(Scheme::OAT), 0.0, 40);
    DerivedParams qu = pu;
    qu.chi *= s;
    qu.chi_tilde *= s;
    const auto tu = uniform_grid(2.0 * pilot_time(pu, 40), 30);
    std::vector<double> tus;
    for (double x : tu) tus.push_back(x / s);
    const auto u1 = unitary_trajectory(pu, 40, tu);
    const auto u2 = unitary_trajectory(qu, 40, tus);
    for (std::size_t i = 0; i < u1.size(); ++i) EXPECT_NEAR(u1.records[i].xi2, u2.records[i].xi2, 1e-10);
}

TEST(Experiments, ScanIsDeterministic) {
    ScanConfig cfg = dissipative_config();
    cfg.N_values = {8, 12};
    cfg.n_th_values = {0.0, 3.0};
    cfg.time_points = 40;
    EXPECT_EQ(scan_csv(cfg), scan_csv(cfg));
}

TEST(Experiments, EmptySchemeListGivesEmptyOutput) {
    ScanConfig cfg;
    cfg.schemes.clear();
    EXPECT_TRUE(scan_time(cfg).empty());
    EXPECT_TRUE(scan_csv(cfg).empty());
}

TEST(Experiments, ScanCsvHasTaggedColumns) {
    ScanConfig cfg = unitary_config();
    cfg.N_values = {6};
    cfg.time_points = 5;
    const auto csv = scan_csv(cfg);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), std::string("scheme,n_th,N,source,") + trajectory_csv_header);
    EXPECT_NE(csv.find("\nTAT_yz,0,6,exact_unitary,"), std::string::npos);
}

TEST(Experiments, TwoAxisTwistingSqueezesDeepest) {
    ScanConfig cfg = unitary_config();
    const int N = 100;
    std::vector<SchemeSpec> schemes{SchemeSpec::of(Scheme::OAT), SchemeSpec::of(Scheme::TAT_xz), {"mixed", -0.1}};
    const double tat = squeezing_minimum(point_params(cfg, SchemeSpec::of(Scheme::TAT_yz), 0.0, N), N, cfg).xi2_min;
    for (const auto& s : schemes) {
        const auto mp = squeezing_minimum(point_params(cfg, s, 0.0, N), N, cfg);
        EXPECT_FALSE(mp.boundary) << s.label;
        EXPECT_LT(tat, mp.xi2_min) << s.label;
    }
}

TEST(Experiments, ThermalPhononsDegradeSqueezing) {
    ScanConfig cfg = dissipative_config();
    const int N = 20;
    double prev = 0.0;
    for (double n : {0.0, 10.0, 50.0}) {
        const auto mp = squeezing_minimum(point_params(cfg, SchemeSpec::of(Scheme::TAT_yz), n, N), N, cfg);
        EXPECT_FALSE(mp.boundary);
        EXPECT_GT(mp.xi2_min, prev);
        prev = mp.xi2_min;
    }
    EXPECT_LT(prev, 1.0);
}

TEST(Experiments, RefinementResumesFromCheckpoint) {
    ScanConfig cfg = dissipative_config();
    const int N = 12;
    const auto p = point_params(cfg, SchemeSpec::of(Scheme::TAT_yz), 1.0, N);
    const auto grid = uniform_grid(cfg.span_factor * pilot_time(p, N), cfg.time_points);
    MinimumCheckpoint cp;
    const auto coarse = simulate(p, N, grid, cfg, true, &cp);
    const auto m = find_minimum(coarse);
    ASSERT_GT(m.index, 0u);
    ASSERT_TRUE(cp.valid);
    EXPECT_EQ(cp.t, grid[m.index - 1]);

    const std::vector<double> tail{cp.t, grid[m.index], grid[m.index + 1]};
    const auto resumed = simulate(p, N, tail, cfg, false, nullptr, &cp.state);
    const std::vector<double> head(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(m.index + 2));
    const auto fresh = simulate(p, N, head, cfg, false);
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NEAR(resumed.records[k].xi2, fresh.records[m.index - 1 + k].xi2, 1e-7);
}

TEST(Experiments, SolversAgreeInUnitaryLimit) {
    ScanConfig cfg = unitary_config();
    const int N = 30;
    const auto p = point_params(cfg, SchemeSpec::of(Scheme::TAT_yz), 0.0, N);
    const auto t = uniform_grid(2.0 * pilot_time(p, N), 25);
    const auto u = unitary_trajectory(p, N, t);
    const auto L = build_liouvillian(N, spin_hamiltonian_builder(SpinHamiltonianCoeffs::from(p)), p);
    const auto rho0 = BlockDensityMatrix::from_symmetric_state(N, css_state(HalfInteger(N), std::numbers::pi / 2.0, 0.0));
    EvolveOptions opt;
    opt.integrator.rtol = 1e-10;
    opt.integrator.atol = 1e-12;
    const auto e = evolve(rho0, L, t, opt);
    ASSERT_EQ(u.size(), e.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        EXPECT_NEAR(u.records[i].xi2, e.records[i].xi2, 1e-7 * std::max(1.0, u.records[i].xi2));
        EXPECT_NEAR(u.records[i].moments.Sx, e.records[i].moments.Sx, 1e-7 * N);
    }
}

TEST(Experiments, UnitaryFinalStateMatchesLastRecord) {
    ScanConfig cfg = unitary_config();
    const auto p = point_params(cfg, SchemeSpec::of(Scheme::OAT), 0.0, 12);
    StateVector psi;
    const auto tr = unitary_trajectory(p, 12, uniform_grid(1.0 / p.chi, 7), &psi);
    EXPECT_NEAR(psi.amplitudes.norm(), 1.0, 1e-12);
    EXPECT_NEAR(moments_of(psi).Sy2, tr.records.back().moments.Sy2, 1e-10);
}

TEST(Experiments, OptimizerIsFlatWithoutDissipation) {
    ScanConfig cfg = unitary_config();
    const auto o = optimize_omega_r(cfg, SchemeSpec::of(Scheme::TAT_yz), 0.0, 20);
    EXPECT_TRUE(o.search.flat);
    EXPECT_EQ(o.search.evaluations, cfg.golden.pre_grid);
    EXPECT_FALSE(o.warnings.empty());
}

TEST(Experiments, OptimizerDominatesItsPreGrid) {
    ScanConfig cfg = dissipative_config();
    cfg.golden.x_tol = 1e-2;
    const auto o = optimize_omega_r(cfg, SchemeSpec::of(Scheme::TAT_yz), 1.0, 20);
    EXPECT_FALSE(o.search.flat);
    for (double v : o.search.pre_grid_f) EXPECT_LE(o.xi2_opt, v);
    EXPECT_GE(o.omega_r, cfg.omega_r_lo);
    EXPECT_LE(o.omega_r, cfg.omega_r_hi);
    EXPECT_GT(o.t_opt, 0.0);
}

TEST(Experiments, ScalingFitNeedsFivePoints) {
    ScanConfig cfg;
    cfg.N_values = {10, 20, 30, 40};
    EXPECT_THROW(scan_N_fit(cfg, SchemeSpec::of(Scheme::OAT), 0.0), ConfigError);
}

TEST(Experiments, ConfigValidation) {
    ScanConfig cfg;
    cfg.time_points = 2;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.t_grid = {0.0, 1.0, 0.5};
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.omega_r_lo = cfg.omega_r_hi;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(solver_from_string("rk4"), ConfigError);
}
