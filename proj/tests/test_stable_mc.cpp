#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "scatlen/capacitory.hpp"
#include "scatlen/stable_mc.hpp"

using namespace scatlen;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// Kolmogorov-Smirnov distance between a sample and a CDF.
template <typename Cdf>
double ks_distance(std::vector<double> xs, Cdf cdf) {
    std::sort(xs.begin(), xs.end());
    const auto n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

GridSpec line_grid() { return build_grid(1, 0.6, cube(1, -4, 4), 128); }

}  // namespace

TEST_CASE("streams depend only on seed, domain and index", "[mc]") {
    Engine a = stream_engine(5, StreamDomain::scattering, 17);
    Engine b = stream_engine(5, StreamDomain::scattering, 17);
    Engine c = stream_engine(5, StreamDomain::folding, 17);
    Engine d = stream_engine(5, StreamDomain::scattering, 18);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
    for (int i = 0; i < 1000; ++i) {
        const double u = open_uniform(a);
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("positive stable law with index 1/2", "[mc]") {
    // A with E exp(-l A) = exp(-sqrt(l)) has CDF erfc(1 / (2 sqrt(x))).
    const std::size_t n = 20000;
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        Engine rng = stream_engine(3, StreamDomain::sampling, i);
        xs[i] = sample_positive_stable(0.5, rng);
    }
    const double d = ks_distance(xs, [](double x) { return std::erfc(1.0 / (2.0 * std::sqrt(x))); });
    // 1% critical value of the KS statistic
    CHECK(d * std::sqrt(static_cast<double>(n)) < 1.63);
    CHECK_THAT(std::erfc(1.0 / (2.0 * std::sqrt(1.0))), WithinAbs(0.4795001221869535, 1e-15));
}

TEST_CASE("positive stable Laplace transform", "[mc]") {
    for (double beta : {0.3, 0.5, 0.8}) {
        const std::size_t n = 40000;
        std::vector<double> e(n);
        for (std::size_t i = 0; i < n; ++i) {
            Engine rng = stream_engine(9, StreamDomain::sampling, i);
            e[i] = std::exp(-sample_positive_stable(beta, rng));
        }
        const MeanSe m = mean_se(e);
        INFO("beta " << beta);
        CHECK(std::abs(m.mean - std::exp(-1.0)) <= 4.0 * m.se);
    }
    Engine rng(1);
    CHECK_THROWS_AS(sample_positive_stable(1.0, rng), InvalidArgument);
}

TEST_CASE("increment characteristic function", "[mc]") {
    for (double xi : {0.5, 1.0, 2.0}) {
        const std::vector<double> f{xi};
        const CfEstimate cf = empirical_cf(0.6, 1, 0.5, f, 40000, 21);
        INFO("xi " << xi);
        CHECK(std::abs(cf.mean - cf.exact) <= 4.0 * cf.se);
    }
    // isotropy in d = 2
    const std::vector<double> e1{1.0, 0.0}, e2{0.6, 0.8};
    const CfEstimate a = empirical_cf(1.0, 2, 1.0, e1, 40000, 4);
    const CfEstimate b = empirical_cf(1.0, 2, 1.0, e2, 40000, 4);
    CHECK(a.exact == b.exact);
    CHECK(std::abs(a.mean - b.mean) <= 4.0 * std::hypot(a.se, b.se));
}

TEST_CASE("path simulation", "[mc]") {
    McConfig cfg;
    cfg.step = 0.5;
    cfg.horizon = 0.5;
    Engine rng = stream_engine(1, StreamDomain::feynman_kac, 0);
    const std::vector<double> x0{0.0};
    const PathRecord one = simulate_path(cfg, x0, rng);
    CHECK(one.increments == 1);
    CHECK(one.positions.size() == 2);
    CHECK(one.position(0, 1)[0] == 0.0);

    cfg.horizon = 100.0;
    cfg.halt_radius = 0.5;
    const PathRecord halted = simulate_path(cfg, x0, rng);
    CHECK(halted.halted);
    CHECK(std::abs(halted.positions.back()) > 0.5);

    McConfig bad;
    bad.horizon = 0.001;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = {};
    bad.dim = 1;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("feynman-kac estimates", "[mc]") {
    const GridSpec g = line_grid();
    McConfig cfg;
    cfg.paths = 2000;
    cfg.horizon = 5.0;
    cfg.start = std::vector<double>{0.0};
    const FkEstimate zero = feynman_kac(Potential::zero(g), cfg);
    CHECK(zero.mean == 1.0);
    CHECK(zero.se == 0.0);

    const Potential v = eval_potential(PotentialSpec::gaussian({0.0}, 0.5, 1.0), g);
    const FkEstimate est = feynman_kac(v, cfg);
    CHECK(est.mean > 0.0);
    CHECK(est.mean < 1.0);
    CHECK(est.halting_bias >= 0.0);

    McConfig no_start = cfg;
    no_start.start.reset();
    CHECK_THROWS_AS(feynman_kac(v, no_start), InvalidArgument);
    McConfig small = cfg;
    small.halt_radius = 2.0;
    CHECK_THROWS_AS(feynman_kac(v, small), SupportViolation);
}

TEST_CASE("monte carlo scattering length agrees with the solver", "[mc]") {
    const GridSpec g = line_grid();
    const Potential v = eval_potential(PotentialSpec::gaussian({0.0}, 0.5, 1.0), g);
    const auto det = solve_capacitory(v, assemble_riesz(g));
    McConfig cfg;
    cfg.paths = 4000;
    cfg.step = 0.02;
    cfg.horizon = 20.0;
    const McScattering mc = mc_scattering(v, cfg);
    CHECK(mc.gamma <= mc.gamma_raw);
    CHECK(mc.bias_budget > 0.0);
    CHECK(std::abs(mc.gamma - det.gamma_mid()) <= 4.0 * mc.se + mc.bias_budget + 0.02);
    CHECK(mc_scattering(Potential::zero(g), cfg).gamma == 0.0);
}

TEST_CASE("results do not depend on the worker count", "[mc][determinism]") {
    const GridSpec g = line_grid();
    const Potential v = eval_potential(PotentialSpec::gaussian({0.0}, 0.5, 1.0), g);
    McConfig cfg;
    cfg.paths = 300;
    cfg.horizon = 2.0;
    const McScattering a = mc_scattering(v, cfg);
    cfg.threads = 3;
    const McScattering b = mc_scattering(v, cfg);
    CHECK(a.gamma == b.gamma);
    CHECK(a.se == b.se);
    CHECK(a.bias_budget == b.bias_budget);
    const MomentDecay m1 = moment_decay(0.6, 1, {0.5, 1.0}, cfg);
    cfg.threads = 1;
    const MomentDecay m2 = moment_decay(0.6, 1, {0.5, 1.0}, cfg);
    CHECK(m1.rows[1].mean == m2.rows[1].mean);
}

TEST_CASE("tent-map fold", "[mc][fold]") {
    CHECK(fold_unit(1.5) == 0.5);
    CHECK(fold_unit(0.25) == 0.25);
    CHECK(fold_unit(2.25) == 0.25);
    CHECK(fold_unit(-0.25) == 0.25);
    CHECK(fold_unit(-1.75) == 0.25);
    CHECK(fold_unit(3.0) == 1.0);
    const FoldSpec spec{Box{{-1.0, 0.0}, {1.0, 2.0}}};
    const std::vector<double> inside{0.3, 1.7};
    CHECK(fold_point(inside, spec) == inside);
    const std::vector<double> outside{1.5, -0.5};
    const auto f = fold_point(outside, spec);
    CHECK(f[0] == 0.5);
    CHECK(f[1] == 0.5);
    // idempotent and always inside
    for (double t = -7.3; t < 7.3; t += 0.37) {
        const std::vector<double> x{t, 2.0 * t};
        const auto y = fold_point(x, spec);
        REQUIRE(spec.cube.contains(y));
        REQUIRE(fold_point(y, spec) == y);
    }
}

TEST_CASE("folded paths integrate at least as much potential", "[mc][fold]") {
    const GridSpec g = line_grid();
    const FoldSpec spec{cube(1, -1, 1)};
    const Potential v = eval_potential(
        PotentialSpec::sum({PotentialSpec::box_indicator(Box{{-0.5}, {0.5}}, 1.0),
                            PotentialSpec::box_indicator(Box{{-0.9}, {0.1}}, 2.0)}),
        g);
    McConfig cfg;
    cfg.paths = 2000;
    cfg.horizon = 5.0;
    const FoldingReport rep = folded_comparison(v, cfg, spec);
    CHECK(rep.violations == 0);
    CHECK(rep.inside_mismatches == 0);
    CHECK(rep.mean_folded <= rep.mean_free);

    const FoldingReport zero = folded_comparison(Potential::zero(g), cfg, spec);
    CHECK(zero.mean_free == 1.0);
    CHECK(zero.mean_folded == 1.0);

    const Potential wide = eval_potential(PotentialSpec::box_indicator(cube(1, -2, 2), 1.0), g);
    CHECK_THROWS_AS(folded_comparison(wide, cfg, spec), SupportViolation);
}

TEST_CASE("moment decay follows self-similarity", "[mc]") {
    McConfig cfg;
    cfg.paths = 5000;
    const MomentDecay md = moment_decay(0.6, 1, {0.5, 1.0, 2.0, 4.0}, cfg);
    CHECK_THAT(md.expected_slope, WithinRel(-2.0 / 3.0, 1e-15));
    CHECK(std::abs(md.slope - md.expected_slope) <= 0.1 * std::abs(md.expected_slope));
    CHECK(md.strictly_decreasing);
    CHECK(md.scaled_spread < 1.2);
    CHECK_THROWS_AS(moment_decay(0.6, 1, {}, cfg), InvalidArgument);
}
