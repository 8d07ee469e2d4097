// io.hpp: params.v1 configuration files and JSON/CSV serialisation of
// states, trajectories, Husimi fields and reduction reports.

#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dicke/dicke_algebra.hpp"
#include "dicke/errors.hpp"
#include "dicke/experiments.hpp"
#include "dicke/full_model.hpp"
#include "dicke/metrics.hpp"
#include "dicke/model_params.hpp"
#include "dicke/trajectory.hpp"

namespace dicke {

using json = nlohmann::json;

inline constexpr const char* params_schema = "params.v1";

// ---------------------------------------------------------------------------
// Configuration

struct MeanFieldInputs {
    double g0 = 0.0, Delta_a = 0.0, Omega_p = 0.0, kappa_a = 0.0, kappa_b = 0.0;
};

/// Options of the reduction check, in units of ω_b.
struct VerifyConfig {
    double gamma_ratio = -0.25;  // Γ/ω_b
    double ratio_G = 0.05;
    double ratio_g = 0.05;
    int N = 4;
    Cutoffs cutoffs{5, 14};
    double t_end_chi = 1.6;  // in units of 1/(Nχ)
    int points = 161;
    ReductionOptions options{};
};

struct RunConfig {
    ScanConfig scan;
    std::optional<MeanFieldInputs> mean_field;
    std::optional<double> t_end;       // s
    HusimiGridSpec husimi{};
    std::vector<double> husimi_times;  // s
    bool optimize = false;             // scan-n: optimise ω_r per N
    VerifyConfig verify{};
};

namespace detail {

inline double number(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::numeric_limits<double>::infinity();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        throw ConfigError(std::string(key) + ": expected a number");
    }
    if (!v.is_number()) throw ConfigError(std::string(key) + ": expected a number");
    return v.get<double>();
}

inline std::optional<double> optional_number(const json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    return number(j, key);
}

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

inline std::vector<double> numbers(const json& j, const char* key) {
    std::vector<double> v;
    if (!j.contains(key)) return v;
    if (!j.at(key).is_array()) throw ConfigError(std::string(key) + ": expected an array");
    for (const auto& x : j.at(key)) {
        if (!x.is_number()) throw ConfigError(std::string(key) + ": expected numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

}  // namespace detail

/// Physical parameters from a params.v1 object. Frequencies are quoted as
/// f = ω/2π in Hz and converted to angular units.
inline RawParams parse_params(const json& j, std::optional<MeanFieldInputs>* mf_out = nullptr) {
    using namespace detail;
    try {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        if (j.contains("schema") && j.at("schema") != params_schema)
            throw ConfigError("unsupported schema '" + j.at("schema").dump() + "'");
        RawParams raw;
        raw.omega_b = from_hz(j.contains("omega_b_hz") ? number(j, "omega_b_hz") : 1e9);
        raw.g = from_hz(number(j, "g_hz"));
        if (j.contains("Q_m")) raw.Q_m = number(j, "Q_m");
        if (j.contains("T2_s")) raw.T2 = number(j, "T2_s");
        if (j.contains("N")) raw.N = j.at("N").get<int>();

        const bool has_nth = j.contains("n_th"), has_T = j.contains("temperature_K");
        if (has_nth && has_T) throw ConfigError("give n_th or temperature_K, not both");
        if (has_nth) raw.n_th = number(j, "n_th");
        if (has_T) raw.n_th = thermal_occupation(raw.omega_b, number(j, "temperature_K"));

        const bool has_knob = j.contains("gamma_knob_hz");
        const bool has_lin = j.contains("delta_hz") || j.contains("G_hz");
        const bool has_scheme = j.contains("scheme_override") && !j.at("scheme_override").is_null();
        if (int(has_knob) + int(has_lin) + int(has_scheme) > 1)
            throw ConfigError("give only one of gamma_knob_hz, {delta_hz, G_hz}, scheme_override");
        if (has_knob) raw.gamma_knob = from_hz(number(j, "gamma_knob_hz"));
        if (has_lin) {
            if (!(j.contains("delta_hz") && j.contains("G_hz"))) throw ConfigError("delta_hz and G_hz go together");
            raw.Delta_lin = from_hz(number(j, "delta_hz"));
            raw.G_lin = from_hz(number(j, "G_hz"));
        }
        if (has_scheme) raw.gamma_knob = scheme_gamma(scheme_from_string(j.at("scheme_override").get<std::string>()), raw.omega_b);

        if (j.contains("omega_r_hz") && !j.at("omega_r_hz").is_null()) raw.omega_r = from_hz(number(j, "omega_r_hz"));
        if (j.contains("Omega_hz")) raw.Omega = from_hz(number(j, "Omega_hz"));
        if (j.contains("keep_linear_term")) raw.keep_linear_term = j.at("keep_linear_term").get<bool>();

        if (j.contains("mean_field")) {
            const auto& m = j.at("mean_field");
            reject_unknown(m, {"g0_hz", "Delta_a_hz", "Omega_p_hz", "kappa_a_hz", "kappa_b_hz"}, "mean_field");
            MeanFieldInputs in;
            in.g0 = from_hz(number(m, "g0_hz"));
            in.Delta_a = from_hz(number(m, "Delta_a_hz"));
            in.Omega_p = from_hz(number(m, "Omega_p_hz"));
            in.kappa_a = from_hz(number(m, "kappa_a_hz"));
            in.kappa_b = m.contains("kappa_b_hz") ? from_hz(number(m, "kappa_b_hz")) : raw.omega_b / raw.Q_m;
            raw.g0 = in.g0;
            raw.Delta_a = in.Delta_a;
            raw.Omega_p = in.Omega_p;
            raw.kappa_a = in.kappa_a;
            raw.kappa_b = in.kappa_b;
            if (mf_out) *mf_out = in;
        } else if (!has_knob && !has_lin && !has_scheme) {
            throw ConfigError("Gamma undetermined: give gamma_knob_hz, {delta_hz, G_hz}, scheme_override or mean_field");
        }
        raw.validate();
        return raw;
    } catch (const ConfigError&) {
        throw;
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

/// Γ from the config: direct knob, linearised pair, or the mean-field steady state.
inline DerivedParams derive_from_config(const RawParams& raw, std::vector<std::string>* notes = nullptr) {
    if (raw.gamma_knob || (raw.G_lin && raw.Delta_lin)) return derive_chain(raw);
    const auto mf = mean_field_steady_state(raw);
    if (notes) {
        std::ostringstream s;
        s << "mean field: |alpha| = " << std::abs(mf.alpha) << ", Re beta = " << mf.beta.real()
          << ", iterations = " << mf.iterations;
        notes->push_back(s.str());
    }
    return derive_chain(raw, mf.alpha, mf.beta);
}

inline RunConfig parse_run_config(const json& j) {
    using namespace detail;
    RunConfig rc;
    reject_unknown(j, {"schema", "omega_b_hz", "g_hz", "gamma_knob_hz", "delta_hz", "G_hz", "Q_m", "T2_s", "n_th",
                       "temperature_K", "N", "scheme_override", "omega_r_hz", "Omega_hz", "keep_linear_term",
                       "mean_field", "run", "verify"},
                   "config");
    rc.scan.base = parse_params(j, &rc.mean_field);
    if (j.contains("omega_r_hz") && !j.at("omega_r_hz").is_null()) rc.scan.omega_r = rc.scan.base.omega_r;
    // scans set ω_r per point; keep the base free of it
    rc.scan.base.omega_r.reset();
    try {
        if (j.contains("run")) {
            const auto& r = j.at("run");
            reject_unknown(r,
                           {"schemes", "n_th_values", "N_values", "t_end_s", "t_grid_s", "time_points", "span_factor",
                            "solver", "rtol", "atol", "refine", "omega_r_bracket_hz", "pre_grid", "log_space_fit",
                            "nonnegative_const", "optimize", "husimi_times_s", "husimi_grid", "husimi_quadrature"},
                           "run");
            if (r.contains("schemes")) {
                rc.scan.schemes.clear();
                for (const auto& s : r.at("schemes")) {
                    if (s.is_string()) {
                        rc.scan.schemes.push_back(SchemeSpec::of(scheme_from_string(s.get<std::string>())));
                    } else if (s.is_object()) {
                        SchemeSpec sp;
                        sp.gamma_ratio = number(s, "gamma_over_omega_b");
                        sp.label = s.contains("label") ? s.at("label").get<std::string>()
                                                       : "Gamma=" + std::to_string(sp.gamma_ratio);
                        rc.scan.schemes.push_back(sp);
                    } else {
                        throw ConfigError("schemes: expected names or {gamma_over_omega_b} objects");
                    }
                }
            }
            rc.scan.n_th_values = numbers(r, "n_th_values");
            for (double n : numbers(r, "N_values")) {
                if (n != std::floor(n)) throw ConfigError("N_values must be integers");
                rc.scan.N_values.push_back(static_cast<int>(n));
            }
            rc.t_end = optional_number(r, "t_end_s");
            rc.scan.t_grid = numbers(r, "t_grid_s");
            if (r.contains("time_points")) rc.scan.time_points = r.at("time_points").get<int>();
            if (r.contains("span_factor")) rc.scan.span_factor = number(r, "span_factor");
            if (r.contains("solver")) rc.scan.solver = solver_from_string(r.at("solver").get<std::string>());
            if (r.contains("rtol")) rc.scan.integrator.rtol = number(r, "rtol");
            if (r.contains("atol")) rc.scan.integrator.atol = number(r, "atol");
            if (r.contains("refine")) rc.scan.refine = r.at("refine").get<bool>();
            if (r.contains("omega_r_bracket_hz")) {
                const auto b = numbers(r, "omega_r_bracket_hz");
                if (b.size() != 2) throw ConfigError("omega_r_bracket_hz needs two values");
                rc.scan.omega_r_lo = from_hz(b[0]);
                rc.scan.omega_r_hi = from_hz(b[1]);
            }
            if (r.contains("pre_grid")) rc.scan.golden.pre_grid = r.at("pre_grid").get<int>();
            if (r.contains("log_space_fit")) rc.scan.fit.log_space = r.at("log_space_fit").get<bool>();
            if (r.contains("nonnegative_const")) rc.scan.fit.nonnegative_const = r.at("nonnegative_const").get<bool>();
            if (r.contains("optimize")) rc.optimize = r.at("optimize").get<bool>();
            rc.husimi_times = numbers(r, "husimi_times_s");
            if (r.contains("husimi_grid")) {
                const auto g = numbers(r, "husimi_grid");
                if (g.size() != 2) throw ConfigError("husimi_grid needs [n_theta, n_phi]");
                rc.husimi.n_theta = static_cast<int>(g[0]);
                rc.husimi.n_phi = static_cast<int>(g[1]);
            }
            if (r.contains("husimi_quadrature")) {
                const auto q = r.at("husimi_quadrature").get<std::string>();
                if (q == "gauss") rc.husimi.kind = HusimiGridKind::Gauss;
                else if (q == "uniform") rc.husimi.kind = HusimiGridKind::Uniform;
                else throw ConfigError("husimi_quadrature must be 'gauss' or 'uniform'");
            }
        }
        if (j.contains("verify")) {
            const auto& v = j.at("verify");
            reject_unknown(v, {"gamma_over_omega_b", "ratio_G", "ratio_g", "N", "n_a", "n_b", "t_end_chi", "points",
                               "squeezed_phonon"},
                           "verify");
            auto& vc = rc.verify;
            if (v.contains("gamma_over_omega_b")) vc.gamma_ratio = number(v, "gamma_over_omega_b");
            if (v.contains("ratio_G")) vc.ratio_G = number(v, "ratio_G");
            if (v.contains("ratio_g")) vc.ratio_g = number(v, "ratio_g");
            if (v.contains("N")) vc.N = v.at("N").get<int>();
            if (v.contains("n_a")) vc.cutoffs.n_a = v.at("n_a").get<int>();
            if (v.contains("n_b")) vc.cutoffs.n_b = v.at("n_b").get<int>();
            if (v.contains("t_end_chi")) vc.t_end_chi = number(v, "t_end_chi");
            if (v.contains("points")) vc.points = v.at("points").get<int>();
            if (v.contains("squeezed_phonon")) vc.options.squeezed_phonon = v.at("squeezed_phonon").get<bool>();
        }
        rc.scan.validate();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Serialisation

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const DerivedParams& p) {
    return {{"scheme", std::string(to_string(p.scheme))},
            {"Gamma_hz", to_hz(p.Gamma)},
            {"r", p.r},
            {"omega_r_hz", to_hz(p.omega_r)},
            {"chi", p.chi},
            {"chi_tilde", p.chi_tilde},
            {"tanh2r", p.tanh2r},
            {"Omega_tilde", p.Omega_tilde},
            {"gamma", p.gamma},
            {"Gamma_gamma", p.Gamma_gamma},
            {"c", p.c},
            {"epsilon", p.epsilon},
            {"n_th", p.n_th},
            {"T2_s", finite_or_null(p.T2)},
            {"N", p.N},
            {"warnings", p.warnings}};
}

/// {"j": j, "amplitudes": [re0, im0, re1, im1, ...]}
inline json state_to_json(const StateVector& psi) {
    json amp = json::array();
    for (Eigen::Index i = 0; i < psi.amplitudes.size(); ++i) {
        amp.push_back(psi.amplitudes(i).real());
        amp.push_back(psi.amplitudes(i).imag());
    }
    return {{"j", psi.j.value()}, {"amplitudes", amp}};
}

inline StateVector state_from_json(const json& j) {
    try {
        const HalfInteger jj = HalfInteger::from_double(j.at("j").get<double>());
        const auto& a = j.at("amplitudes");
        if (static_cast<int>(a.size()) != 2 * jj.dim()) throw ConfigError("state: expected 2(2j+1) amplitude entries");
        StateVector psi{jj, VectorXcd(jj.dim())};
        for (int i = 0; i < jj.dim(); ++i) psi.amplitudes(i) = cplx(a[2 * i].get<double>(), a[2 * i + 1].get<double>());
        return psi;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed state: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

inline json trajectory_to_json(const Trajectory& traj) {
    json rows = json::array();
    for (const auto& r : traj.records) {
        const auto& m = r.moments;
        rows.push_back({r.t, m.Sx, m.Sy, m.Sz, m.Sy2, m.Sz2, m.Sx2, m.Cyz, m.Cxy, m.Cxz, finite_or_null(r.xi2),
                        finite_or_null(r.xi2_dB()), r.trace, finite_or_null(r.purity)});
    }
    return {{"N", traj.N},
            {"source", traj.source},
            {"columns", {"t", "Sx", "Sy", "Sz", "Sy2", "Sz2", "Sx2", "Cyz", "Cxy", "Cxz", "xi2", "xi2_dB", "trace", "purity"}},
            {"records", rows},
            {"warnings", traj.warnings}};
}

inline json husimi_header(const HusimiField& f, double t) {
    return {{"j", f.j},
            {"t", t},
            {"n_theta", f.theta.size()},
            {"n_phi", f.phi.size()},
            {"block_weight", f.block_weight},
            {"integral", f.integral()},
            {"max", f.max_value()},
            {"anisotropy", husimi_anisotropy(f)},
            {"columns", {"theta", "phi", "Q"}}};
}

inline void write_husimi_csv(std::ostream& os, const HusimiField& f) {
    os << "theta,phi,Q\n" << std::setprecision(17);
    for (std::size_t i = 0; i < f.theta.size(); ++i)
        for (std::size_t k = 0; k < f.phi.size(); ++k)
            os << f.theta[i] << ',' << f.phi[k] << ','
               << f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) << '\n';
}

inline json to_json(const ComparisonReport& r) {
    return {{"N", r.N},
            {"params", {{"Delta", r.params.Delta}, {"omega_b", r.params.omega_b}, {"G", r.params.G},
                        {"Omega", r.params.Omega}, {"g", r.params.g}}},
            {"cutoffs", {{"n_a", r.cutoffs.n_a}, {"n_b", r.cutoffs.n_b}}},
            {"Gamma", r.Gamma},
            {"r", r.r},
            {"omega_r", r.omega_r},
            {"chi", r.chi},
            {"ratio_G", r.ratio_G},
            {"ratio_g", r.ratio_g},
            {"hierarchy_ok", r.hierarchy_ok},
            {"squeezed_phonon", r.squeezed_phonon},
            {"cutoff_ok", r.cutoff_ok},
            {"leakage_a", r.leakage_a},
            {"leakage_b", r.leakage_b},
            {"max_norm_error", r.max_norm_error},
            {"t_eff_min", r.t_eff_min},
            {"max_abs_deviation", r.max_abs_deviation},
            {"max_rel_deviation", r.max_rel_deviation},
            {"max_rel_deviation_all", r.max_rel_deviation_all},
            {"times", r.times},
            {"xi2_full", r.xi2_full},
            {"xi2_eff", r.xi2_eff},
            {"abs_deviation", r.abs_deviation},
            {"rel_deviation", r.rel_deviation},
            {"warnings", r.warnings}};
}

inline json to_json(const FitResult& f) {
    return {{"a", f.a},         {"b", f.b},         {"const", f.c},
            {"se_a", f.se_a},   {"se_b", f.se_b},   {"se_const", f.se_c},
            {"residual_norm", f.residual_norm},     {"N_range", {f.N_min, f.N_max}},
            {"points", f.points}, {"const_at_bound", f.const_at_bound}, {"log_space", f.log_space}};
}

inline json to_json(const MinimumPoint& m) {
    return {{"scheme", m.scheme},   {"N", m.N},         {"n_th", m.n_th},         {"omega_r_hz", to_hz(m.omega_r)},
            {"t_min", m.t_min},     {"xi2_min", m.xi2_min}, {"boundary", m.boundary}, {"warnings", m.warnings}};
}

inline json to_json(const AnalyticOptimum& o) {
    return {{"t_min", o.t_min},         {"xi2_min", o.xi2_min}, {"xi2_min_printed", o.xi2_min_printed},
            {"Theta", o.Theta},         {"M", o.M_factor},      {"A_plus", o.A_plus},
            {"A_minus", o.A_minus},     {"P", o.P},             {"warnings", o.warnings}};
}

}  // namespace dicke
