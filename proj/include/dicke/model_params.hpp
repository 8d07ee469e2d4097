// model_params.hpp: physical inputs and the coupling/dissipation derivation chain

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dicke/errors.hpp"

namespace dicke {

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double hbar = 1.054571817e-34;   // J s
inline constexpr double k_boltzmann = 1.380649e-23; // J/K

/// Convert a frequency quoted as f = ω/2π (Hz) to angular frequency (rad/s).
constexpr double from_hz(double f) { return two_pi * f; }
constexpr double to_hz(double omega) { return omega / two_pi; }

enum class Scheme { OAT, TAT_yz, TAT_xz, Mixed };

inline std::string_view to_string(Scheme s) {
    switch (s) {
    case Scheme::OAT: return "OAT";
    case Scheme::TAT_yz: return "TAT_yz";
    case Scheme::TAT_xz: return "TAT_xz";
    case Scheme::Mixed: return "Mixed";
    }
    return "Mixed";
}

inline Scheme scheme_from_string(std::string_view s) {
    if (s == "OAT" || s == "oat") return Scheme::OAT;
    if (s == "TAT" || s == "TAT_yz" || s == "tat" || s == "tat_yz") return Scheme::TAT_yz;
    if (s == "TAT_xz" || s == "tat_xz") return Scheme::TAT_xz;
    if (s == "Mixed" || s == "mixed") return Scheme::Mixed;
    throw ConfigError("unknown scheme '" + std::string(s) + "'");
}

/// Control-knob value Γ that realises a pure scheme. Mixed has no canonical value.
inline double scheme_gamma(Scheme s, double omega_b) {
    switch (s) {
    case Scheme::OAT: return 0.0;
    case Scheme::TAT_yz: return -omega_b / 4.0;
    case Scheme::TAT_xz: return omega_b / 8.0;
    case Scheme::Mixed: break;
    }
    throw DomainError("Mixed scheme has no canonical Gamma; supply gamma_knob directly");
}

/// Hardware-style inputs. All frequencies are angular (rad/s); times in seconds.
///
/// Γ can be given directly (`gamma_knob`), through the linearised pair
/// (`Delta_lin`, `G_lin`), or derived from the bare detuning and the mean-field
/// amplitudes passed to derive_chain.
struct RawParams {
    double omega_b = from_hz(1e9);
    double g = from_hz(1e3);
    double g0 = 0.0;
    double Delta_a = 0.0;
    double Omega = 0.0;
    double Omega_p = 0.0;
    double kappa_a = 0.0;
    double kappa_b = 0.0;
    double Q_m = 1e6;
    double T2 = std::numeric_limits<double>::infinity();
    double n_th = 0.0;
    int N = 1;

    std::optional<double> gamma_knob;
    std::optional<double> Delta_lin;
    std::optional<double> G_lin;
    /// Renormalised phonon frequency supplied independently of the chain.
    std::optional<double> omega_r;
    /// Keep Ω̃ = Ω − χ in the spin Hamiltonian; otherwise Ω̃ = 0.
    bool keep_linear_term = false;

    void validate() const {
        if (!(omega_b > 0.0)) throw DomainError("omega_b must be positive");
        if (!(g > 0.0)) throw DomainError("g must be positive");
        if (N < 1) throw DomainError("N must be >= 1");
        if (!(T2 > 0.0)) throw DomainError("T2 must be positive");
        if (!(Q_m > 0.0)) throw DomainError("Q_m must be positive");
        if (!(n_th >= 0.0)) throw DomainError("n_th must be non-negative");
        if (omega_r && !(*omega_r > 0.0)) throw DomainError("omega_r must be positive");
    }
};

struct DerivedParams {
    double G = 0.0;
    double Delta = 0.0;
    double Gamma = 0.0;
    double r = 0.0;
    double omega_r = 0.0;
    double chi = 0.0;
    double chi_tilde = 0.0;
    double tanh2r = 0.0;
    double cosh2r = 1.0;
    double Omega_tilde = 0.0;
    double gamma = 0.0;
    double Gamma_gamma = 0.0;
    double c = 0.0;
    double epsilon = 0.0;

    // carried along so downstream builders need a single argument
    double omega_b = 0.0;
    double n_th = 0.0;
    double T2 = std::numeric_limits<double>::infinity();
    int N = 1;
    Scheme scheme = Scheme::Mixed;
    std::vector<std::string> warnings;

    double dephasing_rate() const { return std::isfinite(T2) ? 1.0 / (2.0 * T2) : 0.0; }
    double rate_down() const { return Gamma_gamma * (n_th + 1.0); }
    double rate_up() const { return Gamma_gamma * n_th; }
};

/// Relative tolerance (in units of ω_b) used to recognise the pure schemes.
inline constexpr double scheme_tolerance = 1e-9;

inline Scheme classify_scheme(double Gamma, double omega_b) {
    auto near = [&](double target) { return std::abs(Gamma - target) <= scheme_tolerance * omega_b; };
    if (near(0.0)) return Scheme::OAT;
    if (near(-omega_b / 4.0)) return Scheme::TAT_yz;
    if (near(omega_b / 8.0)) return Scheme::TAT_xz;
    return Scheme::Mixed;
}

/// Bose occupation of a mode at temperature T (K). Zero at T = 0.
inline double thermal_occupation(double omega_b, double T) {
    if (T < 0.0) throw DomainError("temperature must be non-negative");
    if (T == 0.0) return 0.0;
    return 1.0 / std::expm1(hbar * omega_b / (k_boltzmann * T));
}

/// ε = 4c/(√2χ + 2c), the dissipation ratio controlling the squeezing floor.
inline double dissipation_ratio(double c, double chi) {
    return 4.0 * c / (std::numbers::sqrt2 * chi + 2.0 * c);
}

inline DerivedParams derive_chain(const RawParams& raw,
                                  std::complex<double> alpha = 0.0,
                                  std::complex<double> beta = 0.0) {
    raw.validate();
    DerivedParams d;
    d.omega_b = raw.omega_b;
    d.n_th = raw.n_th;
    d.T2 = raw.T2;
    d.N = raw.N;

    if (raw.gamma_knob) {
        d.Gamma = *raw.gamma_knob;
        d.G = raw.G_lin.value_or(0.0);
        d.Delta = raw.Delta_lin.value_or(0.0);
    } else {
        if (raw.G_lin && raw.Delta_lin) {
            d.G = *raw.G_lin;
            d.Delta = *raw.Delta_lin;
        } else {
            if (alpha.imag() != 0.0 || beta.imag() != 0.0)
                d.warnings.emplace_back("complex mean-field amplitudes: using |alpha| and Re(beta)");
            d.G = raw.g0 * std::abs(alpha);
            d.Delta = raw.Delta_a + 2.0 * raw.g0 * beta.real();
        }
        const double denom = d.Delta * d.Delta - raw.omega_b * raw.omega_b;
        if (denom == 0.0) throw DomainError("|Delta| = omega_b is a pole of Gamma");
        d.Gamma = d.Delta * d.G * d.G / denom;
    }

    const double arg = 1.0 - 4.0 * d.Gamma / raw.omega_b;
    if (!(arg > 0.0)) throw DomainError("1 - 4 Gamma/omega_b <= 0: squeeze parameter undefined");
    d.r = 0.25 * std::log(arg);
    d.tanh2r = 2.0 * d.Gamma / (2.0 * d.Gamma - raw.omega_b);
    d.cosh2r = std::cosh(2.0 * d.r);
    d.omega_r = raw.omega_r ? *raw.omega_r : std::exp(2.0 * d.r) * raw.omega_b;
    d.scheme = classify_scheme(d.Gamma, raw.omega_b);

    d.chi = raw.g * raw.g / d.omega_r;
    d.chi_tilde = d.chi * d.cosh2r;
    d.Omega_tilde = raw.keep_linear_term ? raw.Omega - d.chi : 0.0;
    d.gamma = raw.omega_b / raw.Q_m;
    d.Gamma_gamma = d.gamma * raw.g * raw.g / (d.omega_r * d.omega_r);
    d.c = d.Gamma_gamma * (raw.n_th + 0.5);
    d.epsilon = dissipation_ratio(d.c, d.chi);
    return d;
}

/// Convenience for the experiments: pure scheme at an independently chosen ω_r.
inline DerivedParams scheme_params(Scheme s, RawParams raw, std::optional<double> omega_r = {}) {
    raw.gamma_knob = scheme_gamma(s, raw.omega_b);
    if (omega_r) raw.omega_r = omega_r;
    return derive_chain(raw);
}

}  // namespace dicke
