#include <gtest/gtest.h>

#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "dicke/brute_force.hpp"
#include "dicke/metrics.hpp"

using namespace dicke;

namespace {
const double half_pi = std::numbers::pi / 2.0;
}

TEST(Squeezing, CoherentStateIsUnity) {
    for (int N : {1, 2, 10, 100, 1000}) {
        const auto rec = squeezing_parameter(css_state(HalfInteger(N), half_pi, 0.0), N);
        EXPECT_NEAR(rec.xi2, 1.0, 1e-9) << N;
    }
    // orientation does not matter
    EXPECT_NEAR(squeezing_parameter(css_state(HalfInteger(20), 0.7, 2.1), 20).xi2, 1.0, 1e-9);
}

TEST(Squeezing, DecibelConversion) {
    SpinMoments m;
    m.Sx = 1.0;
    m.Sx2 = 1.0;
    m.Sy2 = 0.25;  // N V / |S|² with N = 2 gives ξ² = 0.5
    m.Sz2 = 1.0;
    const auto rec = squeezing_parameter(m, 2);
    EXPECT_NEAR(rec.xi2, 0.5, 1e-15);
    EXPECT_NEAR(rec.xi2_dB, -3.0103, 1e-4);
}

TEST(Squeezing, DegenerateMeanSpin) {
    const HalfInteger j(4);
    StateVector dicke0{j, VectorXcd::Zero(5)};
    dicke0.amplitudes(2) = 1.0;
    EXPECT_THROW(squeezing_parameter(dicke0, 4), DegenerateSpinError);
    EXPECT_TRUE(std::isnan(xi2_or_nan(moments_of(dicke0), 4)));
}

TEST(Moments, MatchDenseOperators) {
    const HalfInteger j(9);
    const auto o = build_collective_ops(j);
    VectorXcd v = VectorXcd::Random(j.dim());
    v.normalize();
    const auto m = moments_of(StateVector{j, v});
    auto ev = [&](const MatrixXcd& A) { return expectation(v, A).real(); };
    EXPECT_NEAR(m.Sx, ev(o.Sx), 1e-13);
    EXPECT_NEAR(m.Sy, ev(o.Sy), 1e-13);
    EXPECT_NEAR(m.Sz, ev(o.Sz), 1e-13);
    EXPECT_NEAR(m.Sx2, ev(o.Sx * o.Sx), 1e-12);
    EXPECT_NEAR(m.Sy2, ev(o.Sy * o.Sy), 1e-12);
    EXPECT_NEAR(m.Sz2, ev(o.Sz * o.Sz), 1e-12);
    EXPECT_NEAR(m.Cxy, 0.5 * ev(o.Sx * o.Sy + o.Sy * o.Sx), 1e-12);
    EXPECT_NEAR(m.Cxz, 0.5 * ev(o.Sx * o.Sz + o.Sz * o.Sx), 1e-12);
    EXPECT_NEAR(m.Cyz, 0.5 * ev(o.Sy * o.Sz + o.Sz * o.Sy), 1e-12);
}

TEST(Squeezing, FourSpinOneAxisTwistingAgainstProductSpace) {
    // H = −χ(S² − Sz²), χt = 0.1, compared in the 16-dim product space where ξ²
    // is evaluated from the raw covariance along the y-z plane
    const int N = 4;
    const double chi = 1.0, t = 0.1;
    const HalfInteger j(N);
    const auto o = build_collective_ops(j);
    const MatrixXcd H = -chi * (o.S2 - o.Sz * o.Sz);
    const VectorXcd psi = (cplx(0.0, -t) * H).exp() * css_state(j, half_pi, 0.0).amplitudes;
    const double xi2 = squeezing_parameter(StateVector{j, psi}, N).xi2;

    const ProductSpace ps(N);
    const MatrixXcd Hp = -chi * (ps.Sx * ps.Sx + ps.Sy * ps.Sy);
    const VectorXcd phi = (cplx(0.0, -t) * Hp).exp() * ps.product_css(half_pi, 0.0);
    auto ev = [&](const MatrixXcd& A) { return expectation(phi, A).real(); };
    const double sx = ev(ps.Sx), sy = ev(ps.Sy), sz = ev(ps.Sz);
    ASSERT_NEAR(sy, 0.0, 1e-12);
    ASSERT_NEAR(sz, 0.0, 1e-12);
    const double vy = ev(ps.Sy * ps.Sy), vz = ev(ps.Sz * ps.Sz);
    const double cyz = 0.5 * ev(ps.Sy * ps.Sz + ps.Sz * ps.Sy);
    const double vmin = 0.5 * (vy + vz) - std::sqrt(0.25 * (vy - vz) * (vy - vz) + cyz * cyz);
    EXPECT_NEAR(xi2, N * vmin / (sx * sx), 1e-12);
    EXPECT_LT(xi2, 1.0);
}

TEST(Husimi, MaximallyMixedIsFlat) {
    const HalfInteger j(7);
    const MatrixXcd rho = MatrixXcd::Identity(j.dim(), j.dim()) / double(j.dim());
    const auto f = husimi_q(rho, j, {32, 64, HusimiGridKind::Gauss});
    EXPECT_LT((f.values.array() - 1.0 / (4.0 * std::numbers::pi)).abs().maxCoeff(), 1e-12);
}

TEST(Husimi, CoherentPeak) {
    const HalfInteger j(30);
    HusimiGridSpec g{64, 128, HusimiGridKind::Uniform};
    const auto f = husimi_q(css_state(j, half_pi, 0.0), g);
    // uniform grid has θ = π/2 only as a cell boundary; evaluate exactly at the peak instead
    const auto c = css_state(j, half_pi, 0.0).amplitudes;
    EXPECT_NEAR(j.dim() / (4 * std::numbers::pi) * std::norm(c.dot(c)), j.dim() / (4 * std::numbers::pi), 1e-12);
    EXPECT_LE(f.max_value(), j.dim() / (4 * std::numbers::pi) + 1e-12);
    EXPECT_GT(f.max_value(), 0.9 * j.dim() / (4 * std::numbers::pi));
}

TEST(Husimi, Normalisation) {
    for (int N : {4, 40, 100}) {
        const auto f = husimi_q(css_state(HalfInteger(N), 1.0, 0.5), {48, 96, HusimiGridKind::Gauss});
        EXPECT_NEAR(f.integral(), 1.0, 1e-12) << N;
        // midpoint rule in θ: error bounded by dθ²/12
        const double h = std::numbers::pi / 96;
        const auto u = husimi_q(css_state(HalfInteger(N), 1.0, 0.5), {96, 192, HusimiGridKind::Uniform});
        EXPECT_NEAR(u.integral(), 1.0, h * h / 12.0) << N;
    }
    EXPECT_THROW(husimi_q(css_state(2.0, 0.0, 0.0), {8, 8, HusimiGridKind::Gauss}), DomainError);
}

TEST(Husimi, OversqueezedStateIsElongated) {
    const int N = 100;
    const HalfInteger j(N);
    const auto o = build_collective_ops(j);
    const MatrixXcd H = -(o.S2 - o.Sz * o.Sz);  // χ = 1
    const VectorXcd psi = (cplx(0.0, -0.3) * H).exp() * css_state(j, half_pi, 0.0).amplitudes;
    const HusimiGridSpec g{64, 128, HusimiGridKind::Gauss};
    const double a_css = husimi_anisotropy(husimi_q(css_state(j, half_pi, 0.0), g));
    const double a_oat = husimi_anisotropy(husimi_q(StateVector{j, psi}, g));
    EXPECT_NEAR(a_css, 1.0, 1e-3);
    EXPECT_GT(a_oat, 10.0);
}

TEST(FindMinimum, MonotoneIsBoundary) {
    const std::vector<double> t{0, 1, 2, 3}, x{1.0, 0.9, 0.8, 0.7};
    const auto m = find_minimum(t, x);
    EXPECT_TRUE(m.boundary);
    EXPECT_EQ(m.index, 3u);
}

TEST(FindMinimum, ParabolaVertexExact) {
    std::vector<double> t, x;
    for (int i = 0; i <= 10; ++i) {
        t.push_back(0.3 * i);
        x.push_back(2.0 * (t.back() - 1.37) * (t.back() - 1.37) + 0.25);
    }
    const auto m = find_minimum(t, x);
    EXPECT_FALSE(m.boundary);
    EXPECT_NEAR(m.t_min, 1.37, 1e-12);
    EXPECT_NEAR(m.xi2_min, 0.25, 1e-12);
}

TEST(FindMinimum, SkipsNaN) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::vector<double> t{0, 1, 2, 3, 4}, x{1.0, 0.5, 0.4, 0.6, nan};
    EXPECT_EQ(find_minimum(t, x).index, 2u);
    const std::vector<double> y{nan, nan, nan};
    EXPECT_THROW(find_minimum(std::vector<double>{0, 1, 2}, y), DomainError);
}
