#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dicke/io.hpp"

using namespace dicke;
namespace fs = std::filesystem;

namespace {

json base_config() {
    return json::parse(R"({"schema": "params.v1", "omega_b_hz": 1e9, "g_hz": 1e3, "scheme_override": "TAT_yz",
                           "Q_m": 1e6, "T2_s": 0.01, "n_th": 2, "N": 10})");
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("dicke_io_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string write_config(const fs::path& dir, const json& j) {
    const auto p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p.string();
}

int run_cli(const std::string& args) {
    const char* exe = std::getenv("DICKE_SQUEEZE");
    if (!exe) return -1;
    const int status = std::system((std::string(exe) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

}  // namespace

TEST(Config, ConvertsHertzToAngular) {
    const auto raw = parse_params(base_config());
    EXPECT_DOUBLE_EQ(raw.omega_b, from_hz(1e9));
    EXPECT_DOUBLE_EQ(raw.g, from_hz(1e3));
    EXPECT_DOUBLE_EQ(*raw.gamma_knob, -raw.omega_b / 4.0);
    EXPECT_EQ(raw.N, 10);
    EXPECT_EQ(raw.n_th, 2.0);
}

TEST(Config, InfiniteT2FromNullOrString) {
    auto j = base_config();
    j["T2_s"] = nullptr;
    EXPECT_TRUE(std::isinf(parse_params(j).T2));
    j["T2_s"] = "inf";
    EXPECT_TRUE(std::isinf(parse_params(j).T2));
}

TEST(Config, TemperatureGivesBoseOccupation) {
    auto j = base_config();
    j.erase("n_th");
    j["temperature_K"] = 0.05;
    EXPECT_NEAR(parse_params(j).n_th, thermal_occupation(from_hz(1e9), 0.05), 1e-15);
    j["n_th"] = 1;
    EXPECT_THROW(parse_params(j), ConfigError);
}

TEST(Config, GammaSourcesAreExclusive) {
    auto j = base_config();
    j["gamma_knob_hz"] = 0.0;
    EXPECT_THROW(parse_params(j), ConfigError);
    j.erase("scheme_override");
    EXPECT_NO_THROW(parse_params(j));
    j.erase("gamma_knob_hz");
    EXPECT_THROW(parse_params(j), ConfigError);
    j["delta_hz"] = 1e10;
    EXPECT_THROW(parse_params(j), ConfigError);
    j["G_hz"] = 1e8;
    const auto raw = parse_params(j);
    const auto p = derive_chain(raw);
    EXPECT_NEAR(p.Gamma, from_hz(1e10) * std::pow(from_hz(1e8), 2) / (std::pow(from_hz(1e10), 2) - std::pow(from_hz(1e9), 2)),
                1e-6 * std::abs(p.Gamma));
}

TEST(Config, RejectsMalformedInput) {
    auto j = base_config();
    j["bogus"] = 1;
    EXPECT_THROW(parse_run_config(j), ConfigError);
    j = base_config();
    j["schema"] = "params.v0";
    EXPECT_THROW(parse_params(j), ConfigError);
    j = base_config();
    j["g_hz"] = "fast";
    EXPECT_THROW(parse_params(j), ConfigError);
    j = base_config();
    j["g_hz"] = -1;
    EXPECT_THROW(parse_params(j), ConfigError);
    j = base_config();
    j["run"] = {{"solver", "euler"}};
    EXPECT_THROW(parse_run_config(j), ConfigError);
    j["run"] = {{"N_values", {10.5, 20}}};
    EXPECT_THROW(parse_run_config(j), ConfigError);
    j["run"] = {{"husimi_grid", {32}}};
    EXPECT_THROW(parse_run_config(j), ConfigError);
    EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, RunSection) {
    auto j = base_config();
    j["omega_r_hz"] = 53e3;
    j["run"] = {{"schemes", {"OAT", {{"gamma_over_omega_b", -0.1}, {"label", "mixed"}}}},
                {"N_values", {20, 40}},
                {"n_th_values", {0, 1}},
                {"solver", "cumulant"},
                {"rtol", 1e-8},
                {"husimi_grid", {32, 64}},
                {"omega_r_bracket_hz", {2e4, 1e6}}};
    j["verify"] = {{"N", 3}, {"n_b", 9}, {"squeezed_phonon", false}};
    const auto rc = parse_run_config(j);
    ASSERT_EQ(rc.scan.schemes.size(), 2u);
    EXPECT_EQ(rc.scan.schemes[1].label, "mixed");
    EXPECT_DOUBLE_EQ(rc.scan.schemes[1].gamma_ratio, -0.1);
    EXPECT_EQ(rc.scan.N_values, (std::vector<int>{20, 40}));
    EXPECT_EQ(rc.scan.solver, Solver::Cumulant);
    EXPECT_DOUBLE_EQ(rc.scan.integrator.rtol, 1e-8);
    EXPECT_EQ(rc.husimi.n_theta, 32);
    EXPECT_DOUBLE_EQ(*rc.scan.omega_r, from_hz(53e3));
    EXPECT_FALSE(rc.scan.base.omega_r.has_value());
    EXPECT_DOUBLE_EQ(rc.scan.omega_r_lo, from_hz(2e4));
    EXPECT_EQ(rc.verify.N, 3);
    EXPECT_EQ(rc.verify.cutoffs.n_b, 9);
    EXPECT_FALSE(rc.verify.options.squeezed_phonon);
}

TEST(Config, MeanFieldBlockDeterminesGamma) {
    auto j = base_config();
    j.erase("scheme_override");
    j["mean_field"] = {{"g0_hz", 100.0}, {"Delta_a_hz", -2e9}, {"Omega_p_hz", 1e8}, {"kappa_a_hz", 1e7}};
    std::optional<MeanFieldInputs> mf;
    const auto raw = parse_params(j, &mf);
    ASSERT_TRUE(mf.has_value());
    EXPECT_DOUBLE_EQ(raw.kappa_b, raw.omega_b / raw.Q_m);
    std::vector<std::string> notes;
    const auto p = derive_from_config(raw, &notes);
    EXPECT_EQ(notes.size(), 1u);
    EXPECT_LT(p.Gamma, 0.0);
    EXPECT_TRUE(std::isfinite(p.r));
}

TEST(Serialisation, StateRoundTrip) {
    StateVector psi = css_state(HalfInteger(5), 1.1, -0.4);
    psi.amplitudes(2) += cplx(0.0, 1e-3);
    const json j = json::parse(state_to_json(psi).dump());
    EXPECT_DOUBLE_EQ(j.at("j").get<double>(), 2.5);
    EXPECT_EQ(j.at("amplitudes").size(), 12u);
    const auto back = state_from_json(j);
    EXPECT_EQ(back.j, psi.j);
    EXPECT_EQ((back.amplitudes - psi.amplitudes).cwiseAbs().maxCoeff(), 0.0);
    json bad = j;
    bad["amplitudes"].erase(0);
    EXPECT_THROW(state_from_json(bad), ConfigError);
}

TEST(Serialisation, TrajectoryAndReports) {
    Trajectory t;
    t.N = 4;
    t.source = "cumulant";
    t.records.resize(2);
    const auto j = trajectory_to_json(t);
    EXPECT_EQ(j.at("source"), "cumulant");
    const auto fj = to_json(FitResult{});
    EXPECT_TRUE(fj.contains("const"));
    EXPECT_TRUE(to_json(DerivedParams{}).at("T2_s").is_null());
}

TEST(Serialisation, HusimiCsvShape) {
    const auto f = husimi_q(css_state(HalfInteger(6), 1.0, 0.5), {16, 32});
    std::ostringstream os;
    write_husimi_csv(os, f);
    std::istringstream in(os.str());
    std::string line;
    int rows = 0;
    std::getline(in, line);
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 16 * 32);
    const auto h = husimi_header(f, 0.25);
    EXPECT_EQ(h.at("n_theta"), 16);
    EXPECT_DOUBLE_EQ(h.at("t").get<double>(), 0.25);
}

TEST(Cli, EvolveWritesTrajectory) {
    const auto dir = scratch_dir("evolve");
    auto j = base_config();
    j["N"] = 6;
    j["run"] = {{"time_points", 20}};
    const auto cfg = write_config(dir, j);
    ASSERT_EQ(run_cli("evolve --config " + cfg + " --out " + (dir / "out").string()), 0);
    EXPECT_EQ(first_line(dir / "out" / "trajectory.csv"), std::string("source,") + trajectory_csv_header);
    EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
    fs::remove_all(dir);
}

TEST(Cli, MomentsAreTaggedCumulant) {
    const auto dir = scratch_dir("moments");
    auto j = base_config();
    j["N"] = 1000;
    const auto cfg = write_config(dir, j);
    ASSERT_EQ(run_cli("moments --config " + cfg + " --out " + (dir / "out").string() + " --format json"), 0);
    std::ifstream in(dir / "out" / "moments.json");
    const auto m = json::parse(in);
    EXPECT_EQ(m.at("source"), "cumulant");
    fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch_dir("codes");
    auto j = base_config();
    j["bogus"] = true;
    const auto bad = write_config(dir, j);
    EXPECT_EQ(run_cli("evolve --config " + bad + " --out " + (dir / "o1").string()), 2);
    EXPECT_EQ(run_cli("evolve --config " + (dir / "missing.json").string() + " --out " + (dir / "o2").string()), 2);
    EXPECT_EQ(run_cli("evolve --config " + bad + " --format xml"), 2);

    // dissipative exact evolution beyond the Liouvillian size cap
    j = base_config();
    j["N"] = 2000;
    const auto big = write_config(dir, j);
    EXPECT_EQ(run_cli("evolve --config " + big + " --out " + (dir / "o3").string()), 3);
    fs::remove_all(dir);
}

TEST(Cli, ShippedConfigsParse) {
    const char* dir = std::getenv("DICKE_CONFIGS");
    if (!dir) GTEST_SKIP() << "DICKE_CONFIGS not set";
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_run_config(e.path().string())) << e.path();
        ++n;
    }
    EXPECT_GE(n, 5);
}
