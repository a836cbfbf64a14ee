#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "scatlen/capacitory.hpp"
#include "scatlen/config.hpp"
#include "scatlen/csv.hpp"
#include "scatlen/kernel_cache.hpp"
#include "scatlen/spectral.hpp"
#include "scatlen/stable_mc.hpp"
#include "scatlen/verify.hpp"

namespace scatlen::cli {

enum ExitCode : int {
    ok = 0,
    verification_failed = 1,
    bad_config = 2,
    no_convergence = 3,
};

namespace detail {

/// Where CSV tables go: files in a directory, or the main table to `out`.
class Sink {
public:
    Sink(std::string dir, std::ostream& out) : dir_(std::move(dir)), out_(out) {
        if (!dir_.empty()) std::filesystem::create_directories(dir_);
    }

    bool to_files() const { return !dir_.empty(); }

    /// Writes a table; secondary tables are skipped when printing to the stream.
    void table(const std::string& name, const std::function<void(std::ostream&)>& body, bool primary = true) {
        if (dir_.empty()) {
            if (primary) body(out_);
            return;
        }
        std::ofstream os(std::filesystem::path(dir_) / (name + ".csv"), std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + name + ".csv");
        body(os);
    }

    void text(const std::string& file, const std::string& content) {
        if (dir_.empty()) return;
        std::ofstream os(std::filesystem::path(dir_) / file, std::ios::binary | std::ios::trunc);
        os << content;
    }

private:
    std::string dir_;
    std::ostream& out_;
};

inline KernelMatrix kernel_for(const RunConfig& cfg, const GridSpec& g) {
    return cached_riesz(g, cfg.output.cache_dir, cfg.threads);
}

inline int scatter(const RunConfig& cfg, const std::string& hash, Sink& sink) {
    const GridSpec g = cfg.problem.grid();
    const Potential v = eval_potential(cfg.potential, g);
    const KernelMatrix k = kernel_for(cfg, g);
    const CapacitoryResult r = solve_capacitory(v, k, cfg.solver);
    sink.table("scatter", [&](std::ostream& os) {
        csv_line(os, {"dim", "alpha", "n", "norm_l1", "gamma_low", "gamma_high", "gamma_mid", "bracket_width", "sup_gap",
                      "iterations", "converged", "direct_solve", "config_hash"});
        csv_line(os, {csv_cell(g.dim()), csv_cell(g.alpha()), csv_cell(g.points_per_axis()), csv_cell(v.norm_l1()),
                      csv_cell(r.gamma_low), csv_cell(r.gamma_high), csv_cell(r.gamma_mid()), csv_cell(r.bracket_width()),
                      csv_cell(r.sup_gap()), csv_cell(r.iterations), csv_cell(r.converged), csv_cell(r.direct_solve),
                      csv_cell(hash)});
    });
    sink.table(
        "scatter_cells",
        [&](std::ostream& os) {
            csv_line(os, {"cell", "x", "v", "u_low", "u_high", "mu"});
            for (std::size_t i = 0; i < g.size(); ++i)
                csv_line(os, {csv_cell(i), csv_list(g.center(i)), csv_cell(v[i]), csv_cell(r.u_low[i]),
                              csv_cell(r.u_high[i]), csv_cell(r.mu[i])});
        },
        false);
    return r.converged ? ok : no_convergence;
}

inline int monte_carlo(const RunConfig& cfg, const std::string& hash, Sink& sink) {
    const GridSpec g = cfg.problem.grid();
    const Potential v = eval_potential(cfg.potential, g);
    const McConfig mc = cfg.mc_config();
    McConfig importance = mc;
    importance.start.reset();
    const McScattering est = mc_scattering(v, importance);
    sink.table("mc", [&](std::ostream& os) {
        csv_line(os, {"paths", "halted_paths", "gamma", "se", "bias_budget", "gamma_raw", "se_raw", "norm_l1", "dim", "alpha",
                      "step", "horizon", "halt_radius", "seed", "config_hash"});
        csv_line(os, {csv_cell(est.paths), csv_cell(est.halted_paths), csv_cell(est.gamma), csv_cell(est.se),
                      csv_cell(est.bias_budget), csv_cell(est.gamma_raw), csv_cell(est.se_raw), csv_cell(est.norm_l1),
                      csv_cell(mc.dim), csv_cell(mc.alpha), csv_cell(mc.step), csv_cell(mc.horizon),
                      csv_cell(mc.halt_radius), csv_cell(mc.seed), csv_cell(hash)});
    });
    if (mc.start) {
        const FkEstimate fk = feynman_kac(v, mc);
        sink.table(
            "mc_start",
            [&](std::ostream& os) {
                csv_line(os, {"start", "mean", "se", "halting_bias", "horizon_gap", "paths", "halted_paths", "config_hash"});
                csv_line(os, {csv_list(*mc.start), csv_cell(fk.mean), csv_cell(fk.se), csv_cell(fk.halting_bias),
                              csv_cell(fk.horizon_gap), csv_cell(fk.paths), csv_cell(fk.halted_paths), csv_cell(hash)});
            },
            false);
    }
    return ok;
}

inline void bound_header(std::ostream& os) {
    csv_line(os, {"dim", "alpha", "omega_lower", "omega_upper", "n", "potential_id", "lambda1", "gamma_low", "gamma_high",
                  "ratio", "numerator", "denominator", "beta", "above_threshold", "denominator_floor", "upper_bound",
                  "numerator_ok", "denominator_ok", "variational_ok"});
}

inline void bound_row(std::ostream& os, const BoundReport& r) {
    csv_line(os, {csv_cell(r.dim), csv_cell(r.alpha), csv_list(r.omega.lower), csv_list(r.omega.upper), csv_cell(r.n),
                  csv_cell(r.potential_id), csv_cell(r.lambda), csv_cell(r.gamma_low), csv_cell(r.gamma_high),
                  csv_cell(r.ratio), csv_cell(r.numerator), csv_cell(r.denominator), csv_cell(r.beta),
                  csv_cell(r.above_threshold), csv_cell(r.denominator_floor), csv_cell(r.upper_bound()),
                  csv_cell(r.numerator_ok), csv_cell(r.denominator_ok), csv_cell(r.variational_ok)});
}

inline int eigen(const RunConfig& cfg, const std::string& hash, Sink& sink) {
    const GridSpec go(cfg.problem.dim, cfg.problem.alpha, cfg.spectral.omega, cfg.spectral.n);
    const Potential v = eval_potential(cfg.potential, go);
    const FormMatrix l = assemble_neumann_form(go, cfg.threads);
    const KernelMatrix ko = kernel_for(cfg, go);
    const KernelMatrix ke = kernel_for(cfg, enclosing_grid(go, go.box().diameter()));
    BoundOptions opts;
    opts.solver = cfg.solver;
    opts.threads = cfg.threads;
    const BoundReport rep = eigen_bound_report(v, l, ko, ke, opts, "config-" + hash);
    sink.table("eigen", [&](std::ostream& os) {
        bound_header(os);
        bound_row(os, rep);
    });
    return ok;
}

inline int capacity(const RunConfig& cfg, const std::string& hash, Sink& sink) {
    const GridSpec g = cfg.problem.grid();
    const Potential set = eval_potential(cfg.capacity.set ? *cfg.capacity.set : cfg.potential, g);
    const KernelMatrix k = kernel_for(cfg, g);
    const CapacitySweep sweep = capacity_sweep(set, cfg.capacity.multipliers, k, cfg.solver);
    const double cap = equilibrium_capacity(set, k);
    sink.table("capacity", [&](std::ostream& os) {
        csv_line(os, {"multiplier", "gamma_low", "gamma_high", "gamma_mid", "equilibrium_capacity", "nondecreasing",
                      "config_hash"});
        for (const auto& row : sweep.rows)
            csv_line(os, {csv_cell(row.multiplier), csv_cell(row.gamma_low), csv_cell(row.gamma_high),
                          csv_cell(row.gamma_mid()), csv_cell(cap), csv_cell(sweep.nondecreasing), csv_cell(hash)});
    });
    return ok;
}

inline int scaling(const RunConfig& cfg, const std::string& hash, Sink& sink) {
    const GridSpec g = cfg.problem.grid();
    const Potential v = eval_potential(cfg.potential, g);
    const KernelMatrix k = kernel_for(cfg, g);
    const KernelMatrix ks = kernel_for(cfg, scale_potential(v, cfg.scaling_r).grid());
    const ScalingReport rep = scaling_check(v, cfg.scaling_r, k, ks, cfg.solver);
    sink.table("scaling", [&](std::ostream& os) {
        csv_line(os, {"r", "gamma_scaled", "predicted", "relative_error", "potential_sup_diff", "bracket_width",
                      "config_hash"});
        csv_line(os, {csv_cell(cfg.scaling_r), csv_cell(rep.lhs), csv_cell(rep.rhs), csv_cell(rep.relative_error),
                      csv_cell(rep.potential_sup_diff), csv_cell(rep.bracket_width), csv_cell(hash)});
    });
    return ok;
}

inline int verify(const RunConfig& cfg, Sink& sink, std::ostream& err) {
    const VerifySettings s = verify_settings(cfg);
    const auto results = run_verify(s, [&](const CheckResult& r, double secs) {
        err << "[verify] " << r.id << ' ' << r.name << ": " << (r.pass ? "PASS" : "FAIL") << " (" << std::fixed
            << std::setprecision(1) << secs << " s)" << (r.note.empty() ? "" : " " + r.note) << '\n';
        err.flush();
    });
    sink.table("verify", [&](std::ostream& os) { write_verify_csv(os, results); });
    for (const auto& r : results)
        if (!r.pass) return verification_failed;
    return ok;
}

}  // namespace detail

/// Entry point of the command-line tool:
///   scatlen <scatter|mc|eigen|capacity|verify|scaling> --config FILE [--out DIR] [--threads N]
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Scattering length of stable processes"};
    app.require_subcommand(1, 1);
    std::string config_path, out_dir;
    unsigned threads = 0;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"scatter", "capacitory potential and scattering-length bracket"},
        {"mc", "Monte Carlo scattering length"},
        {"eigen", "lowest Schrodinger eigenvalue and bound report"},
        {"capacity", "large-potential sweep towards the capacity"},
        {"verify", "run the verification suite"},
        {"scaling", "scaling-law check"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "directory for CSV output (default: standard output)");
        sub->add_option("--threads", threads, "worker threads (overrides the config)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return bad_config;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return bad_config;
    }
    if (threads > 0) cfg.threads = threads;
    if (!out_dir.empty()) cfg.output.dir = out_dir;
    const std::string hash = config_hash(cfg);
    err << "config hash: " << hash << '\n';

    try {
        detail::Sink sink(cfg.output.dir, out);
        sink.text("config.json", config_to_json(cfg).dump(2) + "\n");
        if (command == "scatter") return detail::scatter(cfg, hash, sink);
        if (command == "mc") return detail::monte_carlo(cfg, hash, sink);
        if (command == "eigen") return detail::eigen(cfg, hash, sink);
        if (command == "capacity") return detail::capacity(cfg, hash, sink);
        if (command == "scaling") return detail::scaling(cfg, hash, sink);
        return detail::verify(cfg, sink, err);
    } catch (const NonConvergence& e) {
        err << "non-convergence: " << e.what() << '\n';
        return no_convergence;
    } catch (const InvalidArgument& e) {
        err << "invalid input: " << e.what() << '\n';
        return bad_config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return bad_config;
    }
}

}  // namespace scatlen::cli
