// dicke-squeeze: command-line driver for the squeezing simulations.
//
//   dicke-squeeze <evolve|scan-n|optimize|husimi|moments|bound|verify>
//                 --config <file.json> --out <dir> [--format json|csv]
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>

#include <CLI11.hpp>

#include "dicke/io.hpp"
#include "dicke/open_dynamics.hpp"

namespace fs = std::filesystem;
using namespace dicke;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

struct Output {
    fs::path dir;
    std::string format;

    std::ofstream open(const std::string& name) const {
        std::ofstream os(dir / name);
        if (!os) throw ConfigError("cannot write " + (dir / name).string());
        return os;
    }
    void json_file(const std::string& name, const json& j) const { open(name) << j.dump(2) << '\n'; }
    bool csv() const { return format == "csv"; }
};

DerivedParams params_of(const RunConfig& rc, std::vector<std::string>& notes) {
    RawParams raw = rc.scan.base;
    raw.omega_r = rc.scan.omega_r;
    return derive_from_config(raw, &notes);
}

std::vector<double> time_grid(const RunConfig& rc, const DerivedParams& p, int N) {
    if (!rc.scan.t_grid.empty()) return rc.scan.t_grid;
    const double t_end = rc.t_end ? *rc.t_end : rc.scan.span_factor * pilot_time(p, N);
    return uniform_grid(t_end, rc.scan.time_points);
}

json minimum_json(const Trajectory& traj) {
    const auto m = find_minimum(traj);
    return {{"t_min", m.t_min}, {"xi2_min", m.xi2_min}, {"xi2_min_dB", 10.0 * std::log10(m.xi2_min)},
            {"boundary", m.boundary}};
}

void write_trajectory(const Output& out, const Trajectory& traj, const std::string& stem) {
    if (out.csv()) {
        auto os = out.open(stem + ".csv");
        write_trajectory_csv(os, traj, true, "source", traj.source);
    } else {
        out.json_file(stem + ".json", trajectory_to_json(traj));
    }
}

int cmd_evolve(const RunConfig& rc, const Output& out) {
    std::vector<std::string> notes;
    const auto p = params_of(rc, notes);
    const int N = rc.scan.base.N;
    const auto grid = time_grid(rc, p, N);
    Trajectory traj;
    json summary = {{"command", "evolve"}, {"N", N}, {"solver", std::string(to_string(rc.scan.solver))},
                    {"params", to_json(p)}};
    if (rc.scan.solver != Solver::Exact) {
        traj = simulate(p, N, grid, rc.scan);
    } else if (is_unitary(p)) {
        StateVector psi;
        traj = unitary_trajectory(p, N, grid, &psi);
        out.json_file("state.json", state_to_json(psi));
    } else {
        const auto L = build_liouvillian(N, spin_hamiltonian_builder(SpinHamiltonianCoeffs::from(p)), p);
        const auto rho0 =
            BlockDensityMatrix::from_symmetric_state(N, css_state(HalfInteger(N), std::numbers::pi / 2.0, 0.0));
        EvolveOptions opt;
        opt.integrator = rc.scan.integrator;
        traj = evolve(rho0, L, grid, opt);
        double herm = 0.0, min_ev = 0.0;
        for (const auto& r : traj.records) {
            herm = std::max(herm, r.hermiticity_error);
            min_ev = std::min(min_ev, r.min_eigenvalue);
        }
        summary["max_hermiticity_error"] = herm;
        summary["min_block_eigenvalue"] = min_ev;
    }
    write_trajectory(out, traj, "trajectory");
    summary["minimum"] = minimum_json(traj);
    summary["warnings"] = traj.warnings;
    summary["notes"] = notes;
    out.json_file("summary.json", summary);
    return 0;
}

int cmd_moments(const RunConfig& rc, const Output& out) {
    std::vector<std::string> notes;
    const auto p = params_of(rc, notes);
    const int N = rc.scan.base.N;
    const auto grid = time_grid(rc, p, N);
    const auto sys = build_moment_system(p, N);
    const auto traj = rc.scan.solver == Solver::Analytic ? closed_form_moments(sys, grid) : solve_moments(sys, grid);
    write_trajectory(out, traj, "moments");
    json summary = {{"command", "moments"}, {"N", N},         {"params", to_json(p)},
                    {"minimum", minimum_json(traj)}, {"notes", notes}, {"warnings", traj.warnings}};
    out.json_file("summary.json", summary);
    return 0;
}

int cmd_bound(const RunConfig& rc, const Output& out) {
    std::vector<std::string> notes;
    const auto p = params_of(rc, notes);
    json rows = json::array();
    for (int N : rc.scan.Ns()) {
        RawParams raw = rc.scan.base;
        raw.omega_r = rc.scan.omega_r;
        raw.N = N;
        const auto pn = derive_chain(raw);
        rows.push_back({{"N", N}, {"analytic_optimum", to_json(analytic_optimum(pn, N))}});
    }
    const json summary = {{"command", "bound"},
                          {"params", to_json(p)},
                          {"epsilon", p.epsilon},
                          {"xi2_lb", asymptotic_bound(p)},
                          {"optima", rows},
                          {"notes", notes}};
    if (out.csv()) {
        auto os = out.open("bound.csv");
        os << "N,t_min,xi2_min,xi2_lb\n" << std::setprecision(17);
        for (const auto& r : rows)
            os << r["N"] << ',' << r["analytic_optimum"]["t_min"] << ',' << r["analytic_optimum"]["xi2_min"] << ','
               << asymptotic_bound(p) << '\n';
    }
    out.json_file("summary.json", summary);
    return 0;
}

int cmd_scan_n(const RunConfig& rc, const Output& out) {
    json fits = json::array();
    auto os = out.open("scan.csv");
    os << "scheme,n_th,N,omega_r_hz,t_min,xi2_min,boundary\n" << std::setprecision(17);
    for (const auto& s : rc.scan.schemes)
        for (double n : rc.scan.n_ths()) {
            const auto res = scan_N_fit(rc.scan, s, n, rc.optimize);
            json pts = json::array();
            for (const auto& m : res.points) {
                os << s.label << ',' << n << ',' << m.N << ',' << to_hz(m.omega_r) << ',' << m.t_min << ','
                   << m.xi2_min << ',' << m.boundary << '\n';
                pts.push_back(to_json(m));
            }
            json entry = {{"scheme", s.label}, {"n_th", n}, {"optimized", rc.optimize}, {"fit", to_json(res.fit)}};
            if (!out.csv()) entry["points"] = pts;
            fits.push_back(entry);
        }
    out.json_file("summary.json", {{"command", "scan-n"}, {"fits", fits}});
    return 0;
}

int cmd_optimize(const RunConfig& rc, const Output& out) {
    json rows = json::array();
    auto os = out.open("optimize.csv");
    os << "scheme,n_th,N,omega_r_hz,t_opt,xi2_opt,evaluations\n" << std::setprecision(17);
    for (const auto& s : rc.scan.schemes)
        for (double n : rc.scan.n_ths())
            for (int N : rc.scan.Ns()) {
                const auto o = optimize_omega_r(rc.scan, s, n, N);
                os << s.label << ',' << n << ',' << N << ',' << to_hz(o.omega_r) << ',' << o.t_opt << ','
                   << o.xi2_opt << ',' << o.search.evaluations << '\n';
                json pre = json::array();
                for (std::size_t i = 0; i < o.search.pre_grid_x.size(); ++i)
                    pre.push_back({to_hz(std::exp(o.search.pre_grid_x[i])), o.search.pre_grid_f[i]});
                rows.push_back({{"scheme", s.label},
                                {"n_th", n},
                                {"N", N},
                                {"omega_r_hz", to_hz(o.omega_r)},
                                {"t_opt", o.t_opt},
                                {"xi2_opt", o.xi2_opt},
                                {"pre_grid", pre},
                                {"warnings", o.warnings}});
            }
    out.json_file("summary.json", {{"command", "optimize"}, {"optima", rows}});
    return 0;
}

int cmd_husimi(const RunConfig& rc, const Output& out) {
    std::vector<std::string> notes;
    const auto p = params_of(rc, notes);
    const int N = rc.scan.base.N;
    auto times = rc.husimi_times;
    if (times.empty()) times = {0.0, find_minimum(simulate(p, N, time_grid(rc, p, N), rc.scan)).t_min};
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] >= times[i - 1])) throw ConfigError("husimi_times_s must be non-decreasing");

    const auto L = build_liouvillian(N, spin_hamiltonian_builder(SpinHamiltonianCoeffs::from(p)), p);
    auto rho = BlockDensityMatrix::from_symmetric_state(N, css_state(HalfInteger(N), std::numbers::pi / 2.0, 0.0));
    EvolveOptions opt;
    opt.integrator = rc.scan.integrator;
    opt.monitor_positivity = false;
    double t_prev = 0.0;
    json frames = json::array();
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] > t_prev) {
            const double seg[2] = {t_prev, times[k]};
            BlockDensityMatrix next;
            evolve(rho, L, std::span<const double>(seg, 2), opt, &next);
            rho = std::move(next);
            t_prev = times[k];
        }
        const auto f = husimi_q(rho, rc.husimi);
        const std::string stem = "husimi_" + std::to_string(k);
        auto os = out.open(stem + ".csv");
        write_husimi_csv(os, f);
        const auto header = husimi_header(f, times[k]);
        out.json_file(stem + ".json", header);
        frames.push_back(header);
    }
    out.json_file("summary.json", {{"command", "husimi"}, {"N", N}, {"params", to_json(p)}, {"frames", frames}});
    return 0;
}

int cmd_verify(const RunConfig& rc, const Output& out) {
    const auto& v = rc.verify;
    // dimensionless: frequencies in units of ω_b
    const auto lp = dispersive_parameters(v.gamma_ratio, 1.0, v.ratio_G, v.ratio_g);
    const double omega_r = std::sqrt(1.0 - 4.0 * (lp.G == 0.0 ? 0.0 : lp.Gamma()));
    const double chi = lp.g * lp.g / omega_r;
    const auto grid = uniform_grid(v.t_end_chi / (v.N * chi), v.points);
    const auto rep = verify_effective_reduction(lp, v.N, grid, v.cutoffs, v.options);
    if (out.csv()) {
        auto os = out.open("verify.csv");
        os << "t,xi2_full,xi2_eff,abs_deviation,rel_deviation\n" << std::setprecision(17);
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            os << rep.times[i] << ',' << rep.xi2_full[i] << ',' << rep.xi2_eff[i] << ',' << rep.abs_deviation[i]
               << ',' << rep.rel_deviation[i] << '\n';
    }
    out.json_file("report.json", to_json(rep));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spin squeezing in a dissipative Dicke-type model"};
    app.require_subcommand(1);
    std::string config, out_dir = ".", format = "csv";
    const char* names[] = {"evolve", "scan-n", "optimize", "husimi", "moments", "bound", "verify"};
    const char* help[] = {"time evolution of xi^2 for one parameter point",
                          "xi^2_min versus N and the power-law fit",
                          "per-N optimisation of omega_r",
                          "Husimi Q snapshots",
                          "cumulant moment trajectory",
                          "analytic optimum and asymptotic bound",
                          "full tripartite model against the effective spin model"};
    for (int i = 0; i < 7; ++i) {
        auto* sc = app.add_subcommand(names[i], help[i]);
        sc->add_option("--config", config, "params.v1 JSON file")->required();
        sc->add_option("--out", out_dir, "output directory");
        sc->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        const auto rc = load_run_config(config);
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw ConfigError("cannot create output directory '" + out_dir + "': " + ec.message());
        const Output out{out_dir, format};
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "evolve") return cmd_evolve(rc, out);
        if (cmd == "scan-n") return cmd_scan_n(rc, out);
        if (cmd == "optimize") return cmd_optimize(rc, out);
        if (cmd == "husimi") return cmd_husimi(rc, out);
        if (cmd == "moments") return cmd_moments(rc, out);
        if (cmd == "bound") return cmd_bound(rc, out);
        return cmd_verify(rc, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const DomainError& e) {
        std::cerr << "invalid parameters: " << e.what() << '\n';
        return exit_config;
    } catch (const SchemeError& e) {
        std::cerr << "invalid parameters: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    }
}
