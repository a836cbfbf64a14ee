#include <catch_amalgamated.hpp>

#include <random>

#include "scatlen/grid.hpp"

using namespace scatlen;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("grid validation", "[grid]") {
    CHECK_THROWS_AS(build_grid(1, 2.0, cube(1, -1, 1), 8), InvalidArgument);
    CHECK_THROWS_AS(build_grid(1, 0.0, cube(1, -1, 1), 8), InvalidArgument);
    CHECK_THROWS_AS(build_grid(1, 1.5, cube(1, -1, 1), 8), InvalidArgument);  // d must exceed alpha
    CHECK_THROWS_AS(build_grid(1, 0.6, cube(1, -1, 1), 1), InvalidArgument);
    CHECK_THROWS_AS(build_grid(1, 0.6, cube(1, 1, 1), 8), InvalidArgument);
    CHECK_THROWS_AS(build_grid(2, 0.6, cube(1, -1, 1), 8), InvalidArgument);
    CHECK_NOTHROW(build_grid(2, 1.5, cube(2, -1, 1), 8));
}

TEST_CASE("cell layout", "[grid]") {
    const GridSpec g = build_grid(2, 1.0, Box{{0.0, -1.0}, {2.0, 1.0}}, 4);
    CHECK(g.size() == 16);
    CHECK(g.spacing(0) == 0.5);
    CHECK(g.cell_weight() == 0.25);
    // last axis fastest
    CHECK(g.axis_index(1, 0) == 0);
    CHECK(g.axis_index(1, 1) == 1);
    CHECK(g.axis_index(4, 0) == 1);
    const auto c = g.center(6);  // (1, 2)
    CHECK(c[0] == 0.75);
    CHECK(c[1] == 0.25);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.center(i);
        REQUIRE(g.locate(x).has_value());
        CHECK(*g.locate(x) == i);
        CHECK(g.cell_box(i).contains(x));
    }
    const std::vector<double> outside{3.0, 0.0};
    CHECK_FALSE(g.locate(outside).has_value());
}

TEST_CASE("potential validation and norms", "[grid]") {
    const GridSpec g = build_grid(1, 0.6, cube(1, -4, 4), 256);
    CHECK_THROWS_AS(Potential(g, std::vector<double>(g.size(), -1.0)), NegativePotential);
    std::vector<double> bad(g.size(), 0.0);
    bad[3] = std::nan("");
    CHECK_THROWS_AS(Potential(g, bad), NegativePotential);
    CHECK_THROWS_AS(Potential(g, std::vector<double>(3, 0.0)), InvalidArgument);

    // [-1, 1] is a union of whole cells: exact mass
    const Potential s = eval_potential(PotentialSpec::box_indicator(cube(1, -1, 1), 2.5), g);
    CHECK(s.norm_l1() == 5.0);
    CHECK(s.norm_sup() == 2.5);
    CHECK_THAT(s.norm_lp(2.0), WithinRel(std::sqrt(2.5 * 2.5 * 2.0), 1e-14));
    REQUIRE(s.support_box().has_value());
    CHECK(*s.support_box() == cube(1, -1, 1));
    const std::vector<double> far{10.0}, in{0.3};
    CHECK(s.value_at(far) == 0.0);
    CHECK(s.value_at(in) == 2.5);
    CHECK_FALSE(Potential::zero(g).support_box().has_value());
    CHECK(Potential::zero(g).is_zero());
    CHECK_THROWS_AS(s.scaled(-1.0), NegativePotential);
    CHECK(s.truncated(1.0).norm_sup() == 1.0);
}

TEST_CASE("shape algebra", "[grid]") {
    const std::vector<double> x{0.3};
    const auto gauss = PotentialSpec::gaussian({0.0}, 0.5, 2.0);
    CHECK_THAT(gauss(x), WithinRel(2.0 * std::exp(-0.09 / 0.5), 1e-15));
    const auto ball = PotentialSpec::ball_indicator({0.0}, 0.3, 1.0);
    CHECK(ball(x) == 1.0);  // closed ball
    const auto sum = PotentialSpec::sum({gauss, ball});
    CHECK_THAT(sum(x), WithinRel(gauss(x) + 1.0, 1e-15));
    CHECK_THAT(PotentialSpec::scaled(3.0, sum)(x), WithinRel(3.0 * sum(x), 1e-15));
    CHECK_THROWS_AS(PotentialSpec::gaussian({0.0}, 0.5, -1.0).validate(1), NegativePotential);
    CHECK_THROWS_AS(PotentialSpec::gaussian({0.0}, 0.0, 1.0).validate(1), InvalidArgument);
    CHECK_THROWS_AS(PotentialSpec::gaussian({0.0, 0.0}, 1.0, 1.0).validate(1), InvalidArgument);
    CHECK_THROWS_AS(PotentialSpec::scaled(-2.0, gauss).validate(1), NegativePotential);
    CHECK_NOTHROW(PotentialSpec::sum({gauss, ball}).validate(1));
}

TEST_CASE("scaled potential lives on the shrunken grid", "[grid]") {
    const GridSpec g = build_grid(1, 0.6, cube(1, -4, 4), 64);
    const Potential v = eval_potential(PotentialSpec::gaussian({0.5}, 0.7, 1.0), g);
    const Potential vr = scale_potential(v, 2.0);
    CHECK(vr.grid().box() == cube(1, -2, 2));
    CHECK(vr.grid().points_per_axis() == 64);
    const double amp = std::pow(2.0, 0.6);
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(vr.grid().center_coord(i, 0) == g.center_coord(i, 0) / 2.0);
        CHECK(vr[i] == v[i] * amp);
    }
    // ||v_r||_1 = r^(alpha-d) ||v||_1
    CHECK_THAT(vr.norm_l1(), WithinRel(std::pow(2.0, 0.6 - 1.0) * v.norm_l1(), 1e-14));
    CHECK_THROWS_AS(scale_potential(v, 0.0), InvalidArgument);
}

TEST_CASE("prolongation keeps the function", "[grid]") {
    const GridSpec g = build_grid(2, 1.0, cube(2, -1, 1), 8);
    const Potential v = eval_potential(PotentialSpec::gaussian({0.2, -0.1}, 0.4, 1.0), g);
    const Potential f = prolong(v, 3);
    CHECK(f.grid().points_per_axis() == 24);
    CHECK_THAT(f.norm_l1(), WithinRel(v.norm_l1(), 1e-13));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.999, 0.999);
    for (int t = 0; t < 200; ++t) {
        const std::vector<double> x{u(rng), u(rng)};
        CHECK(f.value_at(x) == v.value_at(x));
    }
}

TEST_CASE("integration and distances", "[grid]") {
    const GridSpec g = build_grid(1, 0.6, cube(1, 0, 1), 10);
    CHECK_THAT(integrate(ScalarField(g, std::vector<double>(10, 3.0))), WithinAbs(3.0, 1e-15));
    const Box b = cube(2, 0, 1);
    const std::vector<double> p{2.0, 0.5};
    const auto [near, far] = b.distance_range(p);
    CHECK(near == 1.0);
    CHECK_THAT(far, WithinRel(std::sqrt(4.0 + 0.25), 1e-15));
    CHECK(b.hull_with(p).upper[0] == 2.0);
}
