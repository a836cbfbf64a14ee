// Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned here.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scatlen/cli.hpp"
#include "scatlen/verify.hpp"

using namespace scatlen;
namespace fs = std::filesystem;

namespace {

VerifySettings pinned() {
    VerifySettings s;
    s.dim = 1;
    s.alpha = 0.6;
    s.box = Box{{-4.0}, {4.0}};
    s.n = 256;
    s.potential = PotentialSpec::gaussian({0.0}, 0.5, 1.0);
    s.omega = Box{{-1.0}, {1.0}};
    s.omega_n = 256;
    s.seed = 20240601;
    s.solver = SolverOptions{};
    s.solver.tolerance = 1e-10;

    s.scaling_r = 2.0;
    s.scaling_n = 512;
    s.scaling_tol = 0.02;

    s.epsilons = {0.5, 0.1, 0.02};
    s.lp_exponent = 2.0;
    s.deficit_fraction = 0.05;
    s.slope_margin = 0.15;

    s.random_pairs = 100;

    s.consistency_fp_tol = 1e-10;
    s.residual_tol = 1e-8;
    s.algebraic_ulps = 8.0;

    s.multipliers = {10.0, 100.0, 1000.0, 10000.0};
    s.capacity_refine = 4;
    s.capacity_rel_tol = 0.03;

    s.mc_paths = 100000;
    s.mc_step = 0.01;
    s.mc_horizon = 50.0;
    s.mc_halt_radius = 200.0;
    s.mc_sigmas = 3.0;

    s.fold_paths = 10000;
    s.fold_horizon = 10.0;

    s.cf_samples = 100000;
    s.cf_time = 1.0;
    s.cf_frequencies = {0.5, 1.0, 2.0};
    s.cf_sigmas = 3.0;

    s.moment_paths = 20000;
    s.moment_times = {0.5, 1.0, 2.0, 4.0, 8.0};
    s.moment_rel_tol = 0.10;

    s.family_size = 20;
    s.family_amp_low = 0.005;
    s.family_amp_high = 0.5;
    s.ratio_low = 0.49;
    s.ratio_high = 0.58;
    s.ratio_spread_max = 50.0;
    s.numerator_tol = 0.05;

    s.smoke_2d = false;
    s.threads = 1;
    return s;
}

void report(const CheckResult& r, double secs) {
    std::printf("criterion %-2s %-4s %-34s statistic=%.6g threshold=%.6g aux=%.6g (%.1fs)%s%s\n", r.id.c_str(),
                r.pass ? "PASS" : "FAIL", r.name.c_str(), r.statistic, r.threshold, r.aux, secs,
                r.note.empty() ? "" : " note: ", r.note.c_str());
    std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"scatlen"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != cli::ok && code != cli::verification_failed) std::cerr << err.str();
    return code;
}

// Full verify run through the CLI with 1 and 2 workers; verify.csv must match byte for byte.
CheckResult check_reproducibility(const fs::path& work) {
    const std::string cfg = std::string(SCATLEN_SOURCE_DIR) + "/configs/default.json";
    const fs::path a = work / "threads1", b = work / "threads2";
    fs::remove_all(a);
    fs::remove_all(b);
    const int ca = run_cli({"verify", "--config", cfg, "--out", a.string(), "--threads", "1"});
    const int cb = run_cli({"verify", "--config", cfg, "--out", b.string(), "--threads", "2"});
    const std::string sa = slurp(a / "verify.csv"), sb = slurp(b / "verify.csv");
    CheckResult r{"11", "reproducible verify output", false, static_cast<double>(sa.size()),
                  static_cast<double>(sb.size()), static_cast<double>(ca * 10 + cb), {}};
    r.pass = ca == cli::ok && cb == cli::ok && !sa.empty() && sa == sb;
    if (sa != sb) r.note = "verify.csv differs between worker counts";
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "scatlen_acceptance";
    fs::create_directories(work);

    bool all = true;
    for (const auto& r : run_verify(pinned(), report)) all = all && r.pass;

    const auto t0 = std::chrono::steady_clock::now();
    CheckResult repro;
    try {
        repro = check_reproducibility(work);
    } catch (const std::exception& e) {
        repro = CheckResult{"11", "reproducible verify output", false, 0, 0, 0, e.what()};
    }
    report(repro, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    all = all && repro.pass;

    std::printf("acceptance %s\n", all ? "PASS" : "FAIL");
    return all ? 0 : 1;
}
