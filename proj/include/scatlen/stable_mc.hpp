#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "scatlen/error.hpp"
#include "scatlen/grid.hpp"
#include "scatlen/numeric.hpp"
#include "scatlen/riesz.hpp"

namespace scatlen {

// Random streams ---------------------------------------------------------------

using Engine = std::mt19937_64;

/// Independent stream families, so different estimators never share draws.
enum class StreamDomain : std::uint64_t {
    feynman_kac = 1,
    scattering = 2,
    folding = 3,
    moments = 4,
    sampling = 5,
    potentials = 6,
};

/// Engine for path `index` of a run. Depends only on (seed, domain, index),
/// never on scheduling.
inline Engine stream_engine(std::uint64_t seed, StreamDomain domain, std::uint64_t index) {
    auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); };
    auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
    const auto dom = static_cast<std::uint64_t>(domain);
    std::seed_seq seq{lo(seed), hi(seed), lo(dom), hi(dom), lo(index), hi(index)};
    return Engine(seq);
}

/// Uniform on the open interval (0, 1).
inline double open_uniform(Engine& rng) {
    double u;
    do {
        u = std::generate_canonical<double, 64>(rng);
    } while (u <= 0.0 || u >= 1.0);
    return u;
}

// Samplers -----------------------------------------------------------------------

/// Standard positive beta-stable variable, E exp(-lambda A) = exp(-lambda^beta),
/// by Kanter's representation
///   A = sin(beta U) / sin(U)^(1/beta) * (sin((1-beta) U) / W)^((1-beta)/beta)
/// with U uniform on (0, pi) and W standard exponential.
inline double sample_positive_stable(double beta, Engine& rng) {
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("positive stable index must lie in (0, 1)");
    const double u = std::numbers::pi * open_uniform(rng);
    const double w = -std::log(open_uniform(rng));
    const double log_a = std::log(std::sin(beta * u)) - std::log(std::sin(u)) / beta +
                         (1.0 - beta) / beta * (std::log(std::sin((1.0 - beta) * u)) - std::log(w));
    return std::exp(log_a);
}

/// Increment of the isotropic alpha-stable process over time dt, as Brownian
/// motion at twice the usual speed run for a subordinator time
/// dt^(2/alpha) A_1: characteristic function exp(-dt |xi|^alpha).
inline void sample_stable_increment(double alpha, double dt, Engine& rng, std::normal_distribution<double>& normal,
                                    std::span<double> out) {
    const double a = std::pow(dt, 2.0 / alpha) * sample_positive_stable(0.5 * alpha, rng);
    const double scale = std::sqrt(2.0 * a);
    for (double& x : out) x = scale * normal(rng);
}

inline std::vector<double> sample_stable_increment(double alpha, int dim, double dt, Engine& rng) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidArgument("alpha must lie in (0, 2)");
    if (!(dt > 0.0)) throw InvalidArgument("time increment must be positive");
    std::normal_distribution<double> normal;
    std::vector<double> x(dim);
    sample_stable_increment(alpha, dt, rng, normal, x);
    return x;
}

// Configuration ---------------------------------------------------------------------

struct McConfig {
    double alpha = 0.6;
    int dim = 1;
    double step = 0.01;      // h_t
    double horizon = 50.0;   // T
    double halt_radius = 200.0;
    std::size_t paths = 100000;
    std::uint64_t seed = 20240601;
    std::optional<std::vector<double>> start;  // nullopt: importance sampling from v
    unsigned threads = 1;

    std::size_t steps() const { return static_cast<std::size_t>(std::llround(horizon / step)); }

    void validate() const {
        if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidArgument("mc alpha must lie in (0, 2)");
        if (dim < 1 || !(static_cast<double>(dim) > alpha)) throw InvalidArgument("mc needs d > alpha");
        if (!(step > 0.0)) throw InvalidArgument("mc step must be positive");
        if (!(horizon >= step)) throw InvalidArgument("mc horizon must be at least one step");
        if (!(halt_radius > 0.0)) throw InvalidArgument("mc halt_radius must be positive");
        if (paths < 1) throw InvalidArgument("mc needs at least one path");
        if (start && static_cast<int>(start->size()) != dim) throw InvalidArgument("mc start point dimension");
    }
};

inline double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double a : x) s += a * a;
    return std::sqrt(s);
}

// Paths -------------------------------------------------------------------------------

struct PathRecord {
    std::vector<double> positions;  // X_0, X_h, ..., flattened
    bool halted = false;
    std::size_t increments = 0;

    std::span<const double> position(std::size_t k, int dim) const {
        return std::span<const double>(positions.data() + k * dim, dim);
    }
};

/// Walks one path from x0 with exact stable increments, calling
/// visit(k, X_{k h}) for k = 0, 1, ... before each increment. Stops after
/// `steps` increments or once |X| exceeds the halt radius. Returns whether the
/// path halted early; `x` holds the final position.
template <typename Visit>
bool walk_path(const McConfig& cfg, std::span<double> x, Engine& rng, Visit&& visit) {
    std::normal_distribution<double> normal;
    std::vector<double> dx(cfg.dim);
    const std::size_t steps = std::max<std::size_t>(1, cfg.steps());
    for (std::size_t k = 0; k < steps; ++k) {
        visit(k, std::span<const double>(x.data(), x.size()));
        sample_stable_increment(cfg.alpha, cfg.step, rng, normal, dx);
        for (int a = 0; a < cfg.dim; ++a) x[a] += dx[a];
        if (norm2(x) > cfg.halt_radius) return k + 1 < steps;
    }
    return false;
}

inline PathRecord simulate_path(const McConfig& cfg, std::span<const double> x0, Engine& rng) {
    cfg.validate();
    PathRecord rec;
    std::vector<double> x(x0.begin(), x0.end());
    rec.halted = walk_path(cfg, x, rng, [&](std::size_t, std::span<const double> pos) {
        rec.positions.insert(rec.positions.end(), pos.begin(), pos.end());
        ++rec.increments;
    });
    rec.positions.insert(rec.positions.end(), x.begin(), x.end());
    return rec;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Sample mean and standard error (sample std / sqrt N), summed in index order.
inline MeanSe mean_se(std::span<const double> xs) {
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) return {};
    const double mean = compensated_sum(xs) / n;
    CompensatedSum ss;
    for (double x : xs) ss.add((x - mean) * (x - mean));
    const double var = xs.size() > 1 ? ss.value() / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

namespace mc_detail {

inline void require_support_inside(const Potential& v, double radius) {
    const auto supp = v.support_box();
    if (!supp) return;
    const std::vector<double> origin(v.grid().dim(), 0.0);
    if (!(supp->distance_range(origin).second < radius))
        throw SupportViolation("halt radius must enclose the support of the potential");
}

/// Sampler of starting points with density v / ||v||_1: cell by weight, then
/// uniform inside the cell.
class ImportanceSampler {
public:
    explicit ImportanceSampler(const Potential& v) : grid_(v.grid()) {
        cumulative_.reserve(v.size());
        CompensatedSum acc;
        for (std::size_t i = 0; i < v.size(); ++i) {
            acc.add(v[i]);
            cumulative_.push_back(acc.value());
        }
    }

    void sample(Engine& rng, std::span<double> out) const {
        const double target = open_uniform(rng) * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        auto cell = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                                      static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
        const Box b = grid_.cell_box(cell);
        for (int k = 0; k < grid_.dim(); ++k) out[k] = b.lower[k] + open_uniform(rng) * b.side(k);
    }

private:
    GridSpec grid_;
    std::vector<double> cumulative_;
};

}  // namespace mc_detail

// Feynman-Kac -------------------------------------------------------------------

struct FkEstimate {
    double mean = 1.0;          // E^x exp(-sum v(X_kh) h)
    double se = 0.0;
    double halting_bias = 0.0;  // mean over paths of exp(-I) min(1, U[v](X_exit)), halted paths
    double horizon_gap = 0.0;   // same for paths alive at T: bounds U_v - U_v^T
    std::size_t paths = 0;
    std::size_t halted_paths = 0;
};

/// Monte Carlo estimate of E^x exp(-integral_0^T v(X_s) ds) with the
/// left-endpoint Riemann sum on the step grid, started at cfg.start.
inline FkEstimate feynman_kac(const Potential& v, const McConfig& cfg) {
    cfg.validate();
    if (!cfg.start) throw InvalidArgument("feynman_kac needs a start point");
    if (v.grid().dim() != cfg.dim) throw InvalidArgument("mc dimension does not match the potential");
    mc_detail::require_support_inside(v, cfg.halt_radius);
    FkEstimate est;
    est.paths = cfg.paths;
    if (v.is_zero()) return est;

    std::vector<double> weight(cfg.paths), halt_term(cfg.paths), horizon_term(cfg.paths);
    std::vector<char> halted(cfg.paths);
    parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
        Engine rng = stream_engine(cfg.seed, StreamDomain::feynman_kac, p);
        std::vector<double> x(*cfg.start);
        CompensatedSum integral;
        const bool h = walk_path(cfg, x, rng, [&](std::size_t, std::span<const double> pos) {
            integral.add(v.value_at(pos) * cfg.step);
        });
        weight[p] = std::exp(-integral.value());
        const double tail = weight[p] * std::min(1.0, riesz_potential_at(v.grid(), v.values(), x));
        halted[p] = h;
        halt_term[p] = h ? tail : 0.0;
        horizon_term[p] = h ? 0.0 : tail;
    });
    const MeanSe m = mean_se(weight);
    est.mean = m.mean;
    est.se = m.se;
    est.halting_bias = compensated_sum(halt_term) / static_cast<double>(cfg.paths);
    est.horizon_gap = compensated_sum(horizon_term) / static_cast<double>(cfg.paths);
    est.halted_paths = static_cast<std::size_t>(std::count(halted.begin(), halted.end(), 1));
    return est;
}

struct McScattering {
    double gamma = 0.0;        // tail-corrected estimate
    double se = 0.0;
    double bias_budget = 0.0;  // bound on the error of the tail correction
    double gamma_raw = 0.0;    // ||v||_1 E exp(-I_T), an upper estimate
    double se_raw = 0.0;
    double norm_l1 = 0.0;
    std::size_t paths = 0;
    std::size_t halted_paths = 0;
};

/// Gamma(v) = ||v||_1 E_{x ~ v/||v||_1} E^x exp(-integral_0^inf v(X_s) ds).
///
/// Paths stop at T or on leaving the halt ball; the strong Markov property
/// turns the missing factor into 1 - U_v(X_end). Far from the support
/// U_v(y) ~ Gamma U[nu](y) for the normalised capacitory measure nu, which is
/// replaced by the normalised potential v / ||v||_1; solving
/// Gamma = ||v|| (A - Gamma B) gives the estimate. The bias budget bounds
/// |U_v(y) - Gamma U[v / ||v||](y)| by Gamma_max times the oscillation of the
/// Riesz kernel over the support box, Gamma_max = ||v||_1.
inline McScattering mc_scattering(const Potential& v, const McConfig& cfg) {
    cfg.validate();
    if (v.grid().dim() != cfg.dim) throw InvalidArgument("mc dimension does not match the potential");
    McScattering out;
    out.paths = cfg.paths;
    out.norm_l1 = v.norm_l1();
    if (v.is_zero()) return out;
    mc_detail::require_support_inside(v, cfg.halt_radius);

    const mc_detail::ImportanceSampler sampler(v);
    const Box supp = *v.support_box();
    const double c = riesz_constant(cfg.dim, cfg.alpha);
    const double expo = cfg.alpha - cfg.dim;
    const double norm = out.norm_l1;

    std::vector<double> a(cfg.paths), b(cfg.paths), bias(cfg.paths);
    std::vector<char> halted(cfg.paths);
    parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
        Engine rng = stream_engine(cfg.seed, StreamDomain::scattering, p);
        std::vector<double> x(cfg.dim);
        if (cfg.start)
            x = *cfg.start;
        else
            sampler.sample(rng, x);
        CompensatedSum integral;
        halted[p] = walk_path(cfg, x, rng, [&](std::size_t, std::span<const double> pos) {
            integral.add(v.value_at(pos) * cfg.step);
        });
        const double wgt = std::exp(-integral.value());
        const double shape = riesz_potential_at(v.grid(), v.values(), x) / norm;
        const auto [near, far] = supp.distance_range(x);
        const double osc = near > 0.0 ? c * (std::pow(near, expo) - std::pow(far, expo)) : 1.0 / norm;
        a[p] = wgt;
        b[p] = wgt * shape;
        bias[p] = wgt * std::min(1.0, norm * osc);
    });
    const MeanSe ma = mean_se(a);
    const double mb = compensated_sum(b) / static_cast<double>(cfg.paths);
    const double denom = 1.0 + norm * mb;
    out.gamma = norm * ma.mean / denom;
    // Delta method on (A, B).
    const double da = norm / denom;
    const double db = -norm * norm * ma.mean / (denom * denom);
    std::vector<double> lin(cfg.paths);
    for (std::size_t p = 0; p < cfg.paths; ++p) lin[p] = da * a[p] + db * b[p];
    out.se = mean_se(lin).se;
    out.bias_budget = norm * (compensated_sum(bias) / static_cast<double>(cfg.paths)) / denom;
    out.gamma_raw = norm * ma.mean;
    out.se_raw = norm * ma.se;
    out.halted_paths = static_cast<std::size_t>(std::count(halted.begin(), halted.end(), 1));
    return out;
}

// Folding -----------------------------------------------------------------------------

/// Target box of the coordinatewise tent-map fold.
struct FoldSpec {
    Box cube;

    void validate() const {
        if (cube.dim() < 1 || cube.upper.size() != cube.lower.size()) throw InvalidArgument("fold box dimension");
        for (int k = 0; k < cube.dim(); ++k)
            if (!(cube.upper[k] > cube.lower[k])) throw InvalidArgument("degenerate fold box");
    }
};

/// Folds the real line onto [0, 1]: t - 2n on [2n, 2n+1), 2n - t on [2n-1, 2n).
inline double fold_unit(double t) {
    const double n = std::floor(t);
    const bool even = std::fmod(n, 2.0) == 0.0;
    return even ? t - n : (n + 1.0) - t;
}

/// Coordinatewise fold into the box; points already inside are returned
/// unchanged.
inline std::vector<double> fold_point(std::span<const double> x, const FoldSpec& spec) {
    std::vector<double> out(x.begin(), x.end());
    for (int k = 0; k < spec.cube.dim(); ++k) {
        const double a = spec.cube.lower[k], b = spec.cube.upper[k];
        if (x[k] >= a && x[k] <= b) continue;
        out[k] = a + fold_unit((x[k] - a) / (b - a)) * (b - a);
    }
    return out;
}

struct FoldingReport {
    std::size_t paths = 0;
    std::size_t violations = 0;       // paths with I_folded < I_free
    std::size_t paths_inside = 0;     // never left the box
    std::size_t inside_mismatches = 0;  // of those, I_folded != I_free
    double mean_free = 1.0;           // E exp(-I_free)
    double mean_folded = 1.0;         // E exp(-I_folded)
    double se_free = 0.0;
    double se_folded = 0.0;
};

/// Integrates v along each path and along its folded image on the same
/// draws. Since v vanishes off the box and the fold is the identity on it,
/// v(fold(x)) >= v(x) termwise, so I_folded >= I_free must hold exactly.
inline FoldingReport folded_comparison(const Potential& v, const McConfig& cfg, const FoldSpec& spec) {
    cfg.validate();
    spec.validate();
    if (v.grid().dim() != cfg.dim || spec.cube.dim() != cfg.dim) throw InvalidArgument("folding dimension mismatch");
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] > 0.0 && !spec.cube.contains(v.grid().cell_box(i)))
            throw SupportViolation("potential support must lie inside the folding box");

    FoldingReport rep;
    rep.paths = cfg.paths;
    std::optional<mc_detail::ImportanceSampler> sampler;
    if (!cfg.start && !v.is_zero()) sampler.emplace(v);

    std::vector<double> wf(cfg.paths), wv(cfg.paths);
    std::vector<char> bad(cfg.paths), inside(cfg.paths), mismatch(cfg.paths);
    parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
        Engine rng = stream_engine(cfg.seed, StreamDomain::folding, p);
        std::vector<double> x(cfg.dim, 0.0);
        if (cfg.start)
            x = *cfg.start;
        else if (sampler)
            sampler->sample(rng, x);
        else
            for (int k = 0; k < cfg.dim; ++k) x[k] = 0.5 * (spec.cube.lower[k] + spec.cube.upper[k]);
        double free_sum = 0.0, folded_sum = 0.0;
        bool stayed = true;
        walk_path(cfg, x, rng, [&](std::size_t, std::span<const double> pos) {
            if (!spec.cube.contains(pos)) stayed = false;
            const std::vector<double> f = fold_point(pos, spec);
            free_sum += v.value_at(pos);
            folded_sum += v.value_at(f);
        });
        if (!spec.cube.contains(x)) stayed = false;
        const double i_free = free_sum * cfg.step;
        const double i_folded = folded_sum * cfg.step;
        bad[p] = i_folded < i_free;
        inside[p] = stayed;
        mismatch[p] = stayed && i_folded != i_free;
        wv[p] = std::exp(-i_free);
        wf[p] = std::exp(-i_folded);
    });
    rep.violations = static_cast<std::size_t>(std::count(bad.begin(), bad.end(), 1));
    rep.paths_inside = static_cast<std::size_t>(std::count(inside.begin(), inside.end(), 1));
    rep.inside_mismatches = static_cast<std::size_t>(std::count(mismatch.begin(), mismatch.end(), 1));
    const MeanSe mf = mean_se(wf), mv = mean_se(wv);
    rep.mean_folded = mf.mean;
    rep.se_folded = mf.se;
    rep.mean_free = mv.mean;
    rep.se_free = mv.se;
    return rep;
}

// Moments -----------------------------------------------------------------------------

struct MomentRow {
    double time = 0.0;
    double mean = 0.0;  // E^0 |X_t|^(alpha-d)
    double se = 0.0;
};

struct MomentDecay {
    std::vector<MomentRow> rows;
    double slope = 0.0;           // fitted d log M / d log t
    double slope_se = 0.0;
    double expected_slope = 0.0;  // (alpha - d) / alpha
    double scaled_spread = 0.0;   // max/min of M(t) t^((d-alpha)/alpha)
    bool strictly_decreasing = true;
};

/// M(t) = E^0 |X_t|^(alpha-d) along paths from the origin, recorded at the
/// step nearest each requested time. Self-similarity gives
/// M(t) = t^((alpha-d)/alpha) M(1).
inline MomentDecay moment_decay(double alpha, int dim, std::vector<double> times, McConfig cfg) {
    cfg.alpha = alpha;
    cfg.dim = dim;
    cfg.start = std::vector<double>(dim, 0.0);
    if (times.empty()) throw InvalidArgument("moment_decay needs at least one time");
    std::sort(times.begin(), times.end());
    if (!(times.front() > 0.0)) throw InvalidArgument("moment times must be positive");
    std::vector<std::size_t> marks;
    for (double t : times) marks.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t / cfg.step))));
    cfg.horizon = static_cast<double>(marks.back()) * cfg.step;
    cfg.halt_radius = std::numeric_limits<double>::infinity();
    cfg.validate();

    const std::size_t nt = marks.size();
    std::vector<double> samples(cfg.paths * nt);
    const double expo = alpha - dim;
    parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
        Engine rng = stream_engine(cfg.seed, StreamDomain::moments, p);
        std::vector<double> x(dim, 0.0);
        std::size_t next = 0;
        walk_path(cfg, x, rng, [&](std::size_t k, std::span<const double> pos) {
            while (next < nt && marks[next] == k) {
                samples[p * nt + next] = std::pow(norm2(pos), expo);
                ++next;
            }
        });
        while (next < nt) samples[p * nt + next++] = std::pow(norm2(x), expo);
    });

    MomentDecay out;
    out.expected_slope = (alpha - dim) / alpha;
    std::vector<double> lx, ly, column(cfg.paths);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t j = 0; j < nt; ++j) {
        for (std::size_t p = 0; p < cfg.paths; ++p) column[p] = samples[p * nt + j];
        const MeanSe m = mean_se(column);
        const double t = static_cast<double>(marks[j]) * cfg.step;
        out.rows.push_back({t, m.mean, m.se});
        if (j > 0 && !(m.mean < out.rows[j - 1].mean)) out.strictly_decreasing = false;
        lx.push_back(std::log(t));
        ly.push_back(std::log(m.mean));
        const double scaled = m.mean * std::pow(t, -out.expected_slope);
        lo = std::min(lo, scaled);
        hi = std::max(hi, scaled);
    }
    out.scaled_spread = hi / lo;
    // Least squares with its standard error from the per-point relative SEs.
    const double n = static_cast<double>(nt);
    double mx = 0.0;
    for (double v : lx) mx += v / n;
    double sxx = 0.0;
    for (double v : lx) sxx += (v - mx) * (v - mx);
    double slope_var = 0.0;
    CompensatedSum sxy;
    double my = 0.0;
    for (double v : ly) my += v / n;
    for (std::size_t j = 0; j < nt; ++j) {
        sxy.add((lx[j] - mx) * (ly[j] - my));
        const double rel = out.rows[j].se / out.rows[j].mean;
        slope_var += (lx[j] - mx) * (lx[j] - mx) * rel * rel;
    }
    out.slope = nt > 1 ? sxy.value() / sxx : 0.0;
    out.slope_se = nt > 1 ? std::sqrt(slope_var) / sxx : 0.0;
    return out;
}

// Characteristic function -----------------------------------------------------------

struct CfEstimate {
    double mean = 0.0;   // empirical E cos(xi . X_t)
    double se = 0.0;
    double exact = 0.0;  // exp(-t |xi|^alpha)
};

inline CfEstimate empirical_cf(double alpha, int dim, double t, std::span<const double> xi, std::size_t samples,
                               std::uint64_t seed, unsigned threads = 1) {
    if (static_cast<int>(xi.size()) != dim) throw InvalidArgument("frequency dimension");
    std::vector<double> c(samples);
    parallel_for(samples, threads, [&](std::size_t i) {
        Engine rng = stream_engine(seed, StreamDomain::sampling, i);
        const std::vector<double> x = sample_stable_increment(alpha, dim, t, rng);
        double dot = 0.0;
        for (int k = 0; k < dim; ++k) dot += xi[k] * x[k];
        c[i] = std::cos(dot);
    });
    const MeanSe m = mean_se(c);
    return {m.mean, m.se, std::exp(-t * std::pow(norm2(xi), alpha))};
}

}  // namespace scatlen
