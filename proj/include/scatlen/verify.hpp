#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "scatlen/capacitory.hpp"
#include "scatlen/config.hpp"
#include "scatlen/csv.hpp"
#include "scatlen/riesz.hpp"
#include "scatlen/spectral.hpp"
#include "scatlen/stable_mc.hpp"

namespace scatlen {

/// Sizes and tolerances of the verification suite. Defaults reproduce the
/// acceptance thresholds for d = 1, alpha = 0.6.
struct VerifySettings {
    int dim = 1;
    double alpha = 0.6;
    Box box{{-4.0}, {4.0}};
    std::size_t n = 256;
    PotentialSpec potential = PotentialSpec::gaussian({0.0}, 0.5, 1.0);
    Box omega{{-1.0}, {1.0}};
    std::size_t omega_n = 256;
    std::uint64_t seed = 20240601;
    SolverOptions solver;

    // scaling
    double scaling_r = 2.0;
    std::size_t scaling_n = 512;
    double scaling_tol = 0.02;
    // small potentials
    std::vector<double> epsilons{0.5, 0.1, 0.02};
    double lp_exponent = 2.0;
    double deficit_fraction = 0.05;
    double slope_margin = 0.15;
    // order properties
    std::size_t random_pairs = 100;
    // self-consistency
    double consistency_fp_tol = 1e-10;
    double residual_tol = 1e-8;
    double algebraic_ulps = 8.0;
    // capacity
    std::vector<double> multipliers{10.0, 100.0, 1000.0, 10000.0};
    std::size_t capacity_refine = 4;
    double capacity_rel_tol = 0.03;
    // Monte Carlo against the deterministic solve
    std::size_t mc_paths = 100000;
    double mc_step = 0.01;
    double mc_horizon = 50.0;
    double mc_halt_radius = 200.0;
    double mc_sigmas = 3.0;
    // folding
    std::size_t fold_paths = 10000;
    double fold_horizon = 10.0;
    // increment law
    std::size_t cf_samples = 100000;
    double cf_time = 1.0;
    std::vector<double> cf_frequencies{0.5, 1.0, 2.0};
    double cf_sigmas = 3.0;
    // moment decay
    std::size_t moment_paths = 20000;
    std::vector<double> moment_times{0.5, 1.0, 2.0, 4.0, 8.0};
    double moment_rel_tol = 0.10;
    // eigenvalue bound
    std::size_t family_size = 20;
    double family_amp_low = 0.005;
    double family_amp_high = 0.5;
    double ratio_low = 0.49;
    double ratio_high = 0.58;
    double ratio_spread_max = 50.0;
    double numerator_tol = 0.05;
    // two-dimensional smoke run
    bool smoke_2d = true;

    unsigned threads = 1;
};

inline VerifySettings verify_settings(const RunConfig& cfg) {
    VerifySettings s;
    s.dim = cfg.problem.dim;
    s.alpha = cfg.problem.alpha;
    s.box = cfg.problem.box;
    s.n = cfg.problem.n;
    s.potential = cfg.potential;
    s.omega = cfg.spectral.omega;
    s.omega_n = cfg.spectral.n;
    s.seed = cfg.seed;
    s.solver = cfg.solver;
    s.scaling_r = cfg.scaling_r;
    s.multipliers = cfg.capacity.multipliers;
    s.mc_paths = cfg.mc.paths;
    s.mc_step = cfg.mc.step;
    s.mc_horizon = cfg.mc.horizon;
    s.mc_halt_radius = cfg.mc.halt_radius;
    s.threads = cfg.threads;
    return s;
}

struct CheckResult {
    std::string id;
    std::string name;
    bool pass = false;
    double statistic = 0.0;  // the quantity compared
    double threshold = 0.0;  // what it is compared against
    double aux = 0.0;        // one supporting number
    std::string note;
};

namespace verify_detail {

inline std::vector<double> log_space(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
        out[i] = lo * std::pow(hi / lo, t);
    }
    return out;
}

/// One random potential: 1 to 3 gaussian or box terms centred in the middle
/// quarter of the box, amplitudes log-uniform over four decades.
inline PotentialSpec random_potential(Engine& rng, const Box& box) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int d = box.dim();
    const int terms = 1 + static_cast<int>(unit(rng) * 3.0) % 3;
    std::vector<PotentialSpec> parts;
    for (int t = 0; t < terms; ++t) {
        const double amp = std::pow(10.0, -2.0 + 4.0 * unit(rng));
        std::vector<double> c(d);
        for (int k = 0; k < d; ++k) {
            const double mid = 0.5 * (box.lower[k] + box.upper[k]);
            c[k] = mid + 0.25 * box.side(k) * (2.0 * unit(rng) - 1.0) * 0.5;
        }
        const double scale = 0.25 * box.side(0);
        if (unit(rng) < 0.5) {
            parts.push_back(PotentialSpec::gaussian(c, scale * (0.1 + 0.4 * unit(rng)), amp));
        } else {
            Box b = box;
            for (int k = 0; k < d; ++k) {
                const double half = scale * (0.05 + 0.45 * unit(rng));
                b.lower[k] = c[k] - half;
                b.upper[k] = c[k] + half;
            }
            parts.push_back(PotentialSpec::box_indicator(b, amp));
        }
    }
    return parts.size() == 1 ? parts.front() : PotentialSpec::sum(std::move(parts));
}

/// v with every cell not contained in `region` set to zero.
inline Potential restrict_support(const Potential& v, const Box& region) {
    std::vector<double> values(v.values().begin(), v.values().end());
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!region.contains(v.grid().cell_box(i))) values[i] = 0.0;
    return Potential(v.grid(), std::move(values));
}

inline std::vector<PotentialSpec> bound_family(const VerifySettings& s) {
    std::vector<double> c(s.dim);
    for (int k = 0; k < s.dim; ++k) c[k] = 0.5 * (s.omega.lower[k] + s.omega.upper[k]);
    Box inner = s.omega;
    for (int k = 0; k < s.dim; ++k) {
        inner.lower[k] = c[k] - 0.15 * s.omega.side(k);
        inner.upper[k] = c[k] + 0.15 * s.omega.side(k);
    }
    const std::size_t half = s.family_size / 2;
    std::vector<PotentialSpec> fam;
    for (double a : log_space(s.family_amp_low, s.family_amp_high, half))
        fam.push_back(PotentialSpec::gaussian(c, 0.1 * s.omega.side(0), a));
    for (double a : log_space(s.family_amp_low, s.family_amp_high, s.family_size - half))
        fam.push_back(PotentialSpec::box_indicator(inner, a));
    return fam;
}

}  // namespace verify_detail

// Criteria --------------------------------------------------------------------------

inline CheckResult check_scaling(const VerifySettings& s) {
    const GridSpec g(s.dim, s.alpha, s.box, s.scaling_n);
    const Potential v = eval_potential(s.potential, g);
    const ScalingReport rep = scaling_check(v, s.scaling_r, s.solver, s.threads);
    CheckResult r{"1", "scaling law", false, rep.relative_error, s.scaling_tol, rep.lhs, {}};
    r.pass = rep.relative_error < s.scaling_tol;
    return r;
}

inline CheckResult check_small_potential(const VerifySettings& s, const KernelMatrix& k) {
    const Potential v = eval_potential(s.potential, k.grid());
    const EpsilonExpansion ex = epsilon_expansion(v, s.lp_exponent, s.epsilons, k, s.solver);
    bool positive = true, monotone = true;
    for (std::size_t i = 0; i < ex.rows.size(); ++i) {
        if (!(ex.rows[i].deficit > 0.0)) positive = false;
        if (i > 0 && !(ex.rows[i].deficit > ex.rows[i - 1].deficit)) monotone = false;
    }
    const double smallest = ex.rows.front().deficit;
    const double slope_floor = 1.0 / ex.q - s.slope_margin;
    CheckResult r{"2", "small-potential limit", false, smallest / ex.norm_l1, s.deficit_fraction, ex.slope, {}};
    r.pass = positive && monotone && smallest < s.deficit_fraction * ex.norm_l1 && ex.slope >= slope_floor;
    r.note = std::string(positive ? "" : "nonpositive deficit;") + (monotone ? "" : "deficit not monotone;") +
             (ex.slope >= slope_floor ? "" : "slope below floor;");
    return r;
}

inline CheckResult check_order_properties(const VerifySettings& s, const KernelMatrix& k) {
    std::size_t violations = 0;
    double worst = 0.0;
    for (std::size_t p = 0; p < s.random_pairs; ++p) {
        Engine rng = stream_engine(s.seed, StreamDomain::potentials, p);
        const Potential v = eval_potential(verify_detail::random_potential(rng, s.box), k.grid());
        const Potential w = eval_potential(verify_detail::random_potential(rng, s.box), k.grid());
        const Potential vw = v + w;
        const CapacitoryResult rv = solve_capacitory(v, k, s.solver);
        const CapacitoryResult rw = solve_capacitory(w, k, s.solver);
        const CapacitoryResult rvw = solve_capacitory(vw, k, s.solver);
        auto slack = [&](double excess) {
            worst = std::max(worst, excess);
            if (excess > 0.0) ++violations;
        };
        slack(rv.gamma_low - v.norm_l1());                     // Gamma(v) <= ||v||_1
        slack(rv.gamma_low - rvw.gamma_high);                  // v <= v + w
        slack(rw.gamma_low - rvw.gamma_high);
        slack(rvw.gamma_low - (rv.gamma_high + rw.gamma_high));  // subadditivity
    }
    CheckResult r{"3", "order properties", violations == 0, static_cast<double>(violations), 0.0, worst, {}};
    return r;
}

inline CheckResult check_self_consistency(const VerifySettings& s, const KernelMatrix& k) {
    SolverOptions opts = s.solver;
    opts.tolerance = s.consistency_fp_tol;
    const Potential v = eval_potential(s.potential, k.grid());
    const CapacitoryResult res = solve_capacitory(v, k, opts);
    const ConsistencyReport c = consistency_check(res, v, k);
    CheckResult r{"4", "self-consistency", false, c.potential_residual, s.residual_tol, c.algebraic_gap / c.ulp_gamma, {}};
    const bool energy_ok = c.energy <= res.gamma_high;
    const bool algebra_ok = c.algebraic_gap <= s.algebraic_ulps * c.ulp_gamma;
    r.pass = res.converged && c.potential_residual <= s.residual_tol && energy_ok && algebra_ok;
    r.note = std::string(energy_ok ? "" : "energy exceeds gamma;") + (algebra_ok ? "" : "algebraic identity;");
    return r;
}

inline CheckResult check_capacity(const VerifySettings& s, const KernelMatrix& k) {
    const Potential set = eval_potential(PotentialSpec::box_indicator(s.omega, 1.0), k.grid());
    const CapacitySweep sweep = capacity_sweep(set, s.multipliers, k, s.solver);
    const double oracle = equilibrium_capacity(set, k);
    const Potential fine = prolong(set, s.capacity_refine);
    const double refined = equilibrium_capacity(fine, assemble_riesz(fine.grid(), s.threads));
    bool below = true;
    for (const auto& row : sweep.rows)
        if (row.gamma_low > oracle) below = false;
    const double rel = std::abs(sweep.rows.back().gamma_mid() - refined) / refined;
    CheckResult r{"5", "capacity limit", false, rel, s.capacity_rel_tol, sweep.rows.back().gamma_mid(), {}};
    r.pass = sweep.nondecreasing && below && rel <= s.capacity_rel_tol;
    r.note = std::string(sweep.nondecreasing ? "" : "not nondecreasing;") + (below ? "" : "exceeds capacity;");
    return r;
}

inline CheckResult check_monte_carlo(const VerifySettings& s, const KernelMatrix& k) {
    const Potential v = eval_potential(s.potential, k.grid());
    const CapacitoryResult det = solve_capacitory(v, k, s.solver);
    const Potential fine = prolong(v, 2);
    const CapacitoryResult det2 = solve_capacitory(fine, assemble_riesz(fine.grid(), s.threads), s.solver);
    const double spatial = 2.0 * std::abs(det2.gamma_mid() - det.gamma_mid());
    McConfig cfg;
    cfg.alpha = s.alpha;
    cfg.dim = s.dim;
    cfg.step = s.mc_step;
    cfg.horizon = s.mc_horizon;
    cfg.halt_radius = s.mc_halt_radius;
    cfg.paths = s.mc_paths;
    cfg.seed = s.seed;
    cfg.threads = s.threads;
    const McScattering mc = mc_scattering(v, cfg);
    const double gap = std::abs(mc.gamma - det.gamma_mid());
    const double allowed = s.mc_sigmas * mc.se + det.bracket_width() + mc.bias_budget + spatial;
    CheckResult r{"6", "monte carlo vs deterministic", gap <= allowed, gap, allowed, mc.gamma, {}};
    return r;
}

inline CheckResult check_folding(const VerifySettings& s, const KernelMatrix& k) {
    const Potential v = verify_detail::restrict_support(eval_potential(s.potential, k.grid()), s.omega);
    McConfig cfg;
    cfg.alpha = s.alpha;
    cfg.dim = s.dim;
    cfg.step = s.mc_step;
    cfg.horizon = s.fold_horizon;
    cfg.halt_radius = s.mc_halt_radius;
    cfg.paths = s.fold_paths;
    cfg.seed = s.seed;
    cfg.threads = s.threads;
    const FoldingReport rep = folded_comparison(v, cfg, FoldSpec{s.omega});
    CheckResult r{"7", "folding comparison", false, static_cast<double>(rep.violations), 0.0, rep.mean_folded, {}};
    r.pass = rep.violations == 0 && rep.inside_mismatches == 0 && rep.mean_folded <= rep.mean_free;
    return r;
}

inline CheckResult check_increment_law(const VerifySettings& s) {
    double worst = 0.0;
    bool pass = true;
    for (std::size_t i = 0; i < s.cf_frequencies.size(); ++i) {
        std::vector<double> xi(s.dim, 0.0);
        xi[0] = s.cf_frequencies[i];
        const CfEstimate cf = empirical_cf(s.alpha, s.dim, s.cf_time, xi, s.cf_samples, s.seed + i, s.threads);
        const double z = std::abs(cf.mean - cf.exact) / cf.se;
        worst = std::max(worst, z);
        if (!(z <= s.cf_sigmas)) pass = false;
    }
    return {"8", "increment law", pass, worst, s.cf_sigmas, 0.0, {}};
}

inline CheckResult check_moment_decay(const VerifySettings& s) {
    McConfig cfg;
    cfg.step = s.mc_step;
    cfg.paths = s.moment_paths;
    cfg.seed = s.seed;
    cfg.threads = s.threads;
    const MomentDecay md = moment_decay(s.alpha, s.dim, s.moment_times, cfg);
    const double rel = std::abs(md.slope - md.expected_slope) / std::abs(md.expected_slope);
    return {"9", "moment decay", rel <= s.moment_rel_tol, rel, s.moment_rel_tol, md.slope, {}};
}

struct FamilyOutcome {
    std::vector<BoundReport> reports;
    double ratio_min = 0.0;
    double ratio_max = 0.0;
};

inline FamilyOutcome run_bound_family(const VerifySettings& s) {
    const GridSpec go(s.dim, s.alpha, s.omega, s.omega_n);
    const FormMatrix l = assemble_neumann_form(go, s.threads);
    const KernelMatrix ko = assemble_riesz(go, s.threads);
    const KernelMatrix ke = assemble_riesz(enclosing_grid(go, s.omega.diameter()), s.threads);
    BoundOptions opts;
    opts.solver = s.solver;
    opts.numerator_tolerance = s.numerator_tol;
    opts.threads = s.threads;
    FamilyOutcome out;
    out.ratio_min = std::numeric_limits<double>::infinity();
    const auto fam = verify_detail::bound_family(s);
    for (std::size_t i = 0; i < fam.size(); ++i) {
        out.reports.push_back(eigen_bound_report(eval_potential(fam[i], go), l, ko, ke, opts, "family-" + std::to_string(i)));
        out.ratio_min = std::min(out.ratio_min, out.reports.back().ratio);
        out.ratio_max = std::max(out.ratio_max, out.reports.back().ratio);
    }
    return out;
}

inline CheckResult check_eigen_bound(const VerifySettings& s) {
    const FamilyOutcome fam = run_bound_family(s);
    bool chain = true, below = true;
    for (const auto& rep : fam.reports) {
        if (!rep.ok()) chain = false;
        if (rep.above_threshold) below = false;
    }
    const double spread = fam.ratio_max / fam.ratio_min;
    CheckResult r{"10", "two-sided eigenvalue bound", false, fam.ratio_max, s.ratio_high, fam.ratio_min, {}};
    r.pass = chain && below && fam.ratio_min >= s.ratio_low && fam.ratio_max <= s.ratio_high &&
             spread <= s.ratio_spread_max;
    r.note = std::string(chain ? "" : "bound chain;") + (below ? "" : "potential above threshold;");
    return r;
}

/// d = 2, alpha = 1 on a coarse grid: solver convergence, the scaling law,
/// Gamma <= ||v||_1 and the potential identity.
inline CheckResult check_smoke_2d(const VerifySettings& s) {
    const GridSpec g(2, 1.0, cube(2, -3.0, 3.0), 24);
    const Potential v = eval_potential(PotentialSpec::gaussian({0.0, 0.0}, 0.5, 1.0), g);
    const KernelMatrix k = assemble_riesz(g, s.threads);
    const CapacitoryResult res = solve_capacitory(v, k, s.solver);
    const ConsistencyReport c = consistency_check(res, v, k);
    const ScalingReport sc = scaling_check(v, 2.0, s.solver, s.threads);
    CheckResult r{"smoke-2d", "d=2 alpha=1 smoke", false, sc.relative_error, s.scaling_tol, res.gamma_mid(), {}};
    r.pass = res.converged && res.gamma_high <= v.norm_l1() && c.potential_residual <= s.residual_tol &&
             sc.relative_error < s.scaling_tol;
    return r;
}

/// Runs every check in order. `progress` receives each result together with
/// its wall time.
inline std::vector<CheckResult> run_verify(const VerifySettings& s,
                                           const std::function<void(const CheckResult&, double)>& progress = {}) {
    std::vector<CheckResult> out;
    std::optional<KernelMatrix> k;
    auto base = [&]() -> const KernelMatrix& {
        if (!k) k.emplace(assemble_riesz(GridSpec(s.dim, s.alpha, s.box, s.n), s.threads));
        return *k;
    };
    auto timed = [&](auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        CheckResult r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r.pass = false;
            r.note = e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(r);
        if (progress) progress(out.back(), secs);
    };
    timed([&] { return check_scaling(s); });
    timed([&] { return check_small_potential(s, base()); });
    timed([&] { return check_order_properties(s, base()); });
    timed([&] { return check_self_consistency(s, base()); });
    timed([&] { return check_capacity(s, base()); });
    timed([&] { return check_monte_carlo(s, base()); });
    timed([&] { return check_folding(s, base()); });
    timed([&] { return check_increment_law(s); });
    timed([&] { return check_moment_decay(s); });
    timed([&] { return check_eigen_bound(s); });
    if (s.smoke_2d) timed([&] { return check_smoke_2d(s); });
    return out;
}

inline void write_verify_csv(std::ostream& os, const std::vector<CheckResult>& results) {
    csv_line(os, {"criterion", "name", "pass", "statistic", "threshold", "aux", "note"});
    for (const auto& r : results)
        csv_line(os, {csv_cell(r.id), csv_cell(r.name), csv_cell(r.pass), csv_cell(r.statistic), csv_cell(r.threshold),
                      csv_cell(r.aux), csv_cell(r.note)});
}

}  // namespace scatlen
