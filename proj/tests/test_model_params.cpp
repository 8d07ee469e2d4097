#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dicke/model_params.hpp"

using namespace dicke;

namespace {

RawParams knob(double gamma_ratio) {
    RawParams raw;
    raw.gamma_knob = gamma_ratio * raw.omega_b;
    return raw;
}

}  // namespace

TEST(DeriveChain, GammaZeroIsOneAxisTwisting) {
    const auto p = derive_chain(knob(0.0));
    EXPECT_EQ(p.r, 0.0);
    EXPECT_DOUBLE_EQ(p.omega_r, p.omega_b);
    EXPECT_EQ(p.tanh2r, 0.0);
    EXPECT_EQ(p.scheme, Scheme::OAT);
}

TEST(DeriveChain, QuarterNegativeGammaIsTwoAxis) {
    const auto p = derive_chain(knob(-0.25));
    EXPECT_NEAR(p.tanh2r, 1.0 / 3.0, 1e-14);
    EXPECT_NEAR(p.chi_tilde, 3.0 * p.chi / (2.0 * std::numbers::sqrt2), 1e-12 * p.chi);
    EXPECT_NEAR(p.r, 0.25 * std::log(2.0), 1e-14);
    EXPECT_EQ(p.scheme, Scheme::TAT_yz);
}

TEST(DeriveChain, ChiFromCouplingAndRenormalisedFrequency) {
    RawParams raw = knob(0.0);
    raw.g = from_hz(1e3);
    raw.omega_r = from_hz(200e3);
    const auto p = derive_chain(raw);
    EXPECT_NEAR(to_hz(p.chi), 5.0, 1e-12);
}

TEST(DeriveChain, TanhMatchesExponentialForm) {
    for (double ratio : {-2.0, -0.25, -0.05, 0.1, 0.2}) {
        const auto p = derive_chain(knob(ratio));
        EXPECT_NEAR(p.tanh2r, std::tanh(2.0 * p.r), 1e-12) << ratio;
    }
}

TEST(DeriveChain, LinearisedPairGivesGamma) {
    RawParams raw;
    raw.Delta_lin = 3.0 * raw.omega_b;
    raw.G_lin = 0.1 * raw.omega_b;
    const auto p = derive_chain(raw);
    EXPECT_NEAR(p.Gamma, 3.0 * 0.01 / 8.0 * raw.omega_b, 1e-12 * raw.omega_b);
}

TEST(DeriveChain, RejectsUndefinedSqueezeParameter) {
    EXPECT_THROW(derive_chain(knob(0.25)), DomainError);
    EXPECT_THROW(derive_chain(knob(0.3)), DomainError);
}

TEST(DeriveChain, PoleOfGamma) {
    RawParams raw;
    raw.Delta_lin = raw.omega_b;
    raw.G_lin = 1.0;
    EXPECT_THROW(derive_chain(raw), DomainError);
}

TEST(DeriveChain, EpsilonRange) {
    for (double nth : {0.0, 1.0, 100.0, 1e6}) {
        RawParams raw = knob(-0.25);
        raw.n_th = nth;
        raw.omega_r = from_hz(53e3);
        const auto p = derive_chain(raw);
        EXPECT_GE(p.epsilon, 0.0);
        EXPECT_LT(p.epsilon, 2.0);
    }
    EXPECT_EQ(dissipation_ratio(0.0, 1.0), 0.0);
}

TEST(ClassifyScheme, Examples) {
    const double wb = 1.0;
    EXPECT_EQ(classify_scheme(0.0, wb), Scheme::OAT);
    EXPECT_EQ(classify_scheme(-wb / 4, wb), Scheme::TAT_yz);
    EXPECT_EQ(classify_scheme(wb / 8, wb), Scheme::TAT_xz);
    EXPECT_EQ(classify_scheme(-0.05, wb), Scheme::Mixed);
}

TEST(ThermalOccupation, Examples) {
    const double wb = from_hz(1e9);
    EXPECT_EQ(thermal_occupation(wb, 0.0), 0.0);
    EXPECT_NEAR(thermal_occupation(wb, hbar * wb / (k_boltzmann * std::log(2.0))), 1.0, 1e-12);
    const double T = 60.0 * hbar * wb / k_boltzmann;
    EXPECT_NEAR(thermal_occupation(wb, T) / 60.0, 1.0, 0.01);
    EXPECT_THROW(thermal_occupation(wb, -1.0), DomainError);
}

TEST(RawParams, Validation) {
    RawParams raw = knob(0.0);
    raw.N = 0;
    EXPECT_THROW(raw.validate(), DomainError);
    raw = knob(0.0);
    raw.T2 = -1.0;
    EXPECT_THROW(raw.validate(), DomainError);
}
