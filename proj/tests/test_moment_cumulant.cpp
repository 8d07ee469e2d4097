#include <gtest/gtest.h>

#include <numbers>

#include "dicke/integrator.hpp"
#include "dicke/metrics.hpp"
#include "dicke/moment_cumulant.hpp"

using namespace dicke;

namespace {

DerivedParams tat(double omega_r_hz, double n_th, double T2, double Q_m = 1e6) {
    RawParams raw;
    raw.Q_m = Q_m;
    raw.T2 = T2;
    raw.n_th = n_th;
    return scheme_params(Scheme::TAT_yz, raw, from_hz(omega_r_hz));
}

constexpr double inf = std::numeric_limits<double>::infinity();

}  // namespace

TEST(MomentSystem, DissipationFreeStructure) {
    const auto s = build_moment_system(2.0, 0.0, inf, 50);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(s.A(i, i), 0.0);
    const double k = std::numbers::sqrt2 * 2.0 * 50;
    EXPECT_DOUBLE_EQ(s.A(0, 2), k);
    EXPECT_DOUBLE_EQ(s.A(1, 2), k);
    EXPECT_DOUBLE_EQ(s.A(2, 0), k / 2);
    EXPECT_EQ(s.A(0, 1), 0.0);
    EXPECT_EQ(s.M.norm(), 0.0);
}

TEST(MomentSystem, InhomogeneityHasNoCrossTerm) {
    for (double c : {0.0, 0.1, 3.0})
        for (double T2 : {0.5, inf}) EXPECT_EQ(build_moment_system(1.0, c, T2, 30).M(2), 0.0);
}

TEST(MomentSystem, OnlyTwoAxisScheme) {
    RawParams raw;
    const auto oat = scheme_params(Scheme::OAT, raw);
    EXPECT_THROW(build_moment_system(oat, 10), SchemeError);
}

TEST(Cumulant, HyperbolicGrowthWithoutDissipation) {
    const int N = 100;
    const double chi = 1.0;
    const auto s = build_moment_system(chi, 0.0, inf, N);
    const double k = std::numbers::sqrt2 * N * chi;
    for (double t : {0.0, 0.002, 0.01, 0.03}) {
        const auto X = moments_at(s, t);
        EXPECT_NEAR((X(0) + X(1)) / (0.5 * N * std::cosh(k * t)), 1.0, 1e-11) << t;
        EXPECT_NEAR(X(0) - X(1), 0.0, 1e-9 * X(0));
    }
    const auto cf = closed_form_moments(s, std::vector<double>{0.0, 0.01, 0.02});
    const auto ex = solve_moments(s, std::vector<double>{0.0, 0.01, 0.02});
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(cf.records[i].moments.Sy2 / ex.records[i].moments.Sy2, 1.0, 1e-11);
        EXPECT_NEAR(cf.records[i].moments.Cyz, ex.records[i].moments.Cyz, 1e-9 * ex.records[i].moments.Sy2);
    }
}

TEST(Cumulant, ExponentialAgreesWithRungeKutta) {
    // augmented-matrix exponential against direct integration of dX/dt = AX + M
    const auto s = build_moment_system(0.7, 0.05, 2.0, 40);
    const std::vector<double> t{0.0, 0.01, 0.03, 0.06};
    std::vector<Eigen::VectorXcd> rk;
    IntegratorOptions io;
    io.rtol = 1e-12;
    io.atol = 1e-12;
    integrate_dopri5(
        [&](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
            dy = s.A.cast<cplx>() * y + s.M.cast<cplx>();
        },
        Eigen::VectorXcd(s.X0.cast<cplx>()), t,
        [&](double, const Eigen::VectorXcd& y) {
            rk.push_back(y);
            return true;
        },
        io);
    ASSERT_EQ(rk.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const Eigen::Vector3d X = moments_at(s, t[i]);
        EXPECT_LT((X - rk[i].real()).norm() / X.norm(), 1e-9) << t[i];
    }
}

TEST(Cumulant, InitialConditionIsCoherent) {
    const auto tr = solve_moments(build_moment_system(1.0, 0.1, 1.0, 64), std::vector<double>{0.0});
    EXPECT_NEAR(tr.records[0].xi2, 1.0, 1e-14);
    EXPECT_EQ(tr.source, "cumulant");
}

TEST(AnalyticOptimum, HeisenbergRecovery) {
    const int N = 100000;
    double prev = 1.0;
    for (double c : {1e-2, 1e-4, 1e-6}) {
        const auto o = analytic_optimum(1.0, c, inf, N);
        EXPECT_LT(o.xi2_min, prev);
        prev = o.xi2_min;
    }
    EXPECT_LT(prev, 1e-4);
}

TEST(AnalyticOptimum, ApproachesBoundForLargeN) {
    for (double nth : {0.0, 1.0, 10.0, 20.0}) {
        const auto p = tat(53e3, nth, 0.01);
        const auto o = analytic_optimum(p, 1000000);
        const double lb = asymptotic_bound(p);
        EXPECT_LT(std::abs(o.xi2_min / lb - 1.0), 0.01) << nth;
        EXPECT_NEAR(o.Theta, std::log(p.epsilon), 0.01) << nth;
    }
}

TEST(AnalyticOptimum, RejectsBadDomain) {
    EXPECT_THROW(analytic_optimum(0.0, 0.1, 1.0, 100), DomainError);
}

TEST(AsymptoticBound, Limits) {
    EXPECT_EQ(asymptotic_bound(0.0), 0.0);
    EXPECT_LT(asymptotic_bound(1e-6), 1e-5);
    EXPECT_NEAR(asymptotic_bound(1.0), 1.0, 1e-15);
    EXPECT_THROW(asymptotic_bound(2.0), DomainError);
    EXPECT_THROW(asymptotic_bound(-0.1), DomainError);
    double prev = 0.0;
    for (double e = 1e-4; e < 1.9; e *= 1.5) {
        const double v = asymptotic_bound(e);
        EXPECT_GT(v, prev) << e;
        prev = v;
    }
}

TEST(AsymptoticBound, IncreasesWithThermalOccupation) {
    double prev = 0.0;
    for (double nth : {10.0, 30.0, 50.0}) {
        const double lb = asymptotic_bound(tat(80e3, nth, 0.01));
        EXPECT_GT(lb, prev) << nth;
        prev = lb;
    }
}

TEST(Kubo, FactorisationErrorFallsAsInverseSpin) {
    // third cumulants of a coherent state are commutator terms of order j², so the relative error is O(1/j)
    const double e100 = kubo_factorization_error(css_state(HalfInteger(200), std::numbers::pi / 2, 0.0));
    const double e200 = kubo_factorization_error(css_state(HalfInteger(400), std::numbers::pi / 2, 0.0));
    EXPECT_LT(e100, 1.0 / 100.0);
    EXPECT_NEAR(e100 / e200, 2.0, 0.05);
}
