#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hjb/gridsolve.hpp"
#include "hjb/riccati.hpp"

#include <cmath>
#include <random>

using namespace hjb;

namespace {

GridSpec window1d(double lo, double hi, int n) {
    GridSpec spec;
    spec.lo = Vec::Constant(1, lo);
    spec.hi = Vec::Constant(1, hi);
    spec.points = {n};
    return spec;
}

}  // namespace

TEST_CASE("value grid interpolation and extrapolation") {
    ValueGrid grid(Vec::Constant(1, 0.0), Vec::Constant(1, 1.0), {3}, {0.0});
    grid.at(0, 0) = 1.0;
    grid.at(0, 1) = 2.0;
    grid.at(0, 2) = 5.0;
    CHECK(grid.value(0.0, Vec::Constant(1, 0.5)) == doctest::Approx(2.0));    // node
    CHECK(grid.value(0.0, Vec::Constant(1, 0.25)) == doctest::Approx(1.5));   // midpoint
    CHECK(grid.value(0.0, Vec::Constant(1, 1.25)) == doctest::Approx(6.5));   // linear continuation
    CHECK(grid.value(0.0, Vec::Constant(1, -0.5)) == doctest::Approx(0.0));   // left continuation
    CHECK_THROWS_AS(grid.value(0.5, Vec::Constant(1, 0.5)), Error);           // time-index error

    ValueGrid grid2(Vec::Zero(2), Vec::Ones(2), {2, 2}, {0.0});
    grid2.at(0, 0) = 0.0;
    grid2.at(0, 1) = 1.0;
    grid2.at(0, 2) = 2.0;
    grid2.at(0, 3) = 3.0;
    CHECK(grid2.value(0.0, Vec::Constant(2, 0.5)) == doctest::Approx(1.5));
}

TEST_CASE("constants are preserved through the backward sweep") {
    ControlProblem prob = builtin_problem("diffuse1d");
    prob.terminal_forms[0] = QuadraticForm(Mat::Zero(1, 1), Vec::Zero(1), 2.5);
    const Decomposition decomp = build_decomposition(prob);
    const Engine quad = Engine::quadrature(1, 7);
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.25);
    const ValueGrid grid = solve_grid(prob, decomp, cfg, quad, window1d(-1.0, 1.0, 11));
    for (std::size_t flat = 0; flat < grid.nodes_per_layer(); ++flat)
        for (int ti = 0; ti < static_cast<int>(grid.times().size()); ++ti)
            REQUIRE(grid.at(ti, flat) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("h must divide the horizon") {
    const ControlProblem prob = builtin_problem("lq1d");
    const Decomposition decomp = build_decomposition(prob);
    const Engine quad = Engine::quadrature(1, 7);
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.3);
    CHECK_THROWS_AS(solve_grid(prob, decomp, cfg, quad, window1d(-1.0, 1.0, 11)), Error);
}

TEST_CASE("grid solution tracks the closed-form value") {
    const ControlProblem prob = builtin_problem("lq1d");
    const Decomposition decomp = build_decomposition(prob);
    const Engine quad = Engine::quadrature(1, 7);
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.1);
    const ValueGrid grid = solve_grid(prob, decomp, cfg, quad, window1d(-2.0, 2.0, 41));
    const RiccatiSolution oracle = riccati_solve(prob, 0, 0.001);
    double sup = 0.0;
    for (double xv = -2.0; xv <= 2.0 + 1e-12; xv += 0.25)
        sup = std::max(sup, std::abs(grid.value(0.0, Vec::Constant(1, xv)) -
                                     oracle.value(0.0, Vec::Constant(1, xv))));
    CHECK(sup <= 1.5 * std::sqrt(0.1));  // C sqrt(h); the constant is a regression guard
}

TEST_CASE("dominated mode never shows up in the solution") {
    const ControlProblem both = builtin_problem("switch2");
    ControlProblem only_second = both;
    only_second.modes.erase(only_second.modes.begin());
    const Engine quad = Engine::quadrature(1, 7);
    SchemeConfig cfg = SchemeConfig::make(both, SchemeVariant::new_upwind, 0, 0.125);
    const ValueGrid two = solve_grid(both, build_decomposition(both), cfg, quad, window1d(-2, 2, 33));
    const ValueGrid one =
        solve_grid(only_second, build_decomposition(only_second), cfg, quad, window1d(-2, 2, 33));
    REQUIRE(two.nodes_per_layer() == one.nodes_per_layer());
    for (std::size_t flat = 0; flat < two.nodes_per_layer(); ++flat)
        REQUIRE(two.at(0, flat) == doctest::Approx(one.at(0, flat)).epsilon(1e-9));
}

TEST_CASE("one backward step is monotone in the data layer") {
    const ControlProblem prob = builtin_problem("lq1d");
    const Decomposition decomp = build_decomposition(prob);
    const Engine quad = Engine::quadrature(1, 7);
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.1);
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        RandomBumpField base = RandomBumpField::draw(1, 3, 2.0, 2.0, rng);
        RandomBumpField bump = RandomBumpField::draw(1, 2, 2.0, unit(rng), rng);
        SpaceFn lo = [&](const Vec& y) { return base(y); };
        SpaceFn hi = [&](const Vec& y) { return base(y) + std::abs(bump(y)); };
        const Vec x = Vec::Constant(1, -1.5 + 3.0 * unit(rng));
        REQUIRE(apply_step(cfg, prob, decomp, quad, 0.0, lo, x).value <=
                apply_step(cfg, prob, decomp, quad, 0.0, hi, x).value + 1e-10);
    }
}

TEST_CASE("stability envelope of the iterated operator") {
    // ||v(t)||_inf <= e^{C (T-t)} (||psi||_inf + (T-t) max ||l||_inf) + slack
    // with C = 2 max(0, -inf delta), all sup norms over the padded grid.
    for (const char* name : {"lq1d", "switch2"}) {
        const ControlProblem prob = builtin_problem(name);
        const Decomposition decomp = build_decomposition(prob);
        const Engine quad = Engine::quadrature(1, 7);
        SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.125);
        const ValueGrid grid = solve_grid(prob, decomp, cfg, quad, window1d(-2, 2, 33));
        double psi_sup = 0.0, ell_sup = 0.0;
        for (std::size_t flat = 0; flat < grid.nodes_per_layer(); ++flat) {
            const Vec x = grid.node(flat);
            psi_sup = std::max(psi_sup, std::abs(prob.terminal_reward(x)));
            for (int m = 0; m < prob.mode_count(); ++m)
                for (const Vec& u : prob.controls)
                    ell_sup = std::max(ell_sup, std::abs(prob.running_reward(m, x, u)));
        }
        for (int ti = 0; ti < static_cast<int>(grid.times().size()); ++ti) {
            const double remaining = prob.horizon - grid.times()[ti];
            double layer_sup = 0.0;
            for (std::size_t flat = 0; flat < grid.nodes_per_layer(); ++flat)
                layer_sup = std::max(layer_sup, std::abs(grid.at(ti, flat)));
            REQUIRE(layer_sup <= psi_sup + remaining * ell_sup + 1e-6);
        }
    }
}

TEST_CASE("doubling the padding barely moves the core window") {
    const ControlProblem prob = builtin_problem("lq1d");
    const Decomposition decomp = build_decomposition(prob);
    const Engine quad = Engine::quadrature(1, 7);
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.125);
    GridSpec narrow = window1d(-2, 2, 41);
    GridSpec wide = narrow;
    wide.pad_sigmas = 12.0;
    const ValueGrid a = solve_grid(prob, decomp, cfg, quad, narrow);
    const ValueGrid b = solve_grid(prob, decomp, cfg, quad, wide);
    for (double xv = -2.0; xv <= 2.0 + 1e-12; xv += 0.1)
        REQUIRE(std::abs(a.value(0.0, Vec::Constant(1, xv)) - b.value(0.0, Vec::Constant(1, xv))) <=
                1e-4);
}

TEST_CASE("convergence toward the oracle as h shrinks") {
    const ControlProblem prob = builtin_problem("lq1d");
    const Decomposition decomp = build_decomposition(prob);
    const Engine quad = Engine::quadrature(1, 7);
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.2);
    const ConvergenceStudy study =
        convergence_study(prob, decomp, cfg, quad, window1d(-2, 2, 21), {0.2, 0.1, 0.05});
    REQUIRE(study.rows.size() == 3);
    CHECK(study.rows[0].sup_error > study.rows[1].sup_error);
    CHECK(study.rows[1].sup_error > study.rows[2].sup_error);
    CHECK(study.order_fitted);
    CHECK(study.fitted_order > 0.0);
}

TEST_CASE("two dimensions: degenerate residual diffusion against the matrix oracle") {
    const ControlProblem prob = builtin_problem("degen2d");
    const Decomposition decomp = build_decomposition(prob);
    const Engine quad = Engine::quadrature(2, 7);
    const RiccatiSolution oracle = riccati_solve(prob, 0, 0.002);
    Vec x(2);
    x << 0.7, -0.4;
    CHECK(std::abs(riccati_residual(prob, 0, oracle, 250, x)) <= 10.0 * std::pow(0.002, 4) + 1e-8);

    auto sup_at = [&](double h) {
        SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, h);
        GridSpec spec;
        spec.lo = Vec::Constant(2, -1.5);
        spec.hi = Vec::Constant(2, 1.5);
        spec.points = {13, 13};
        spec.threads = 4;
        const ValueGrid grid = solve_grid(prob, decomp, cfg, quad, spec);
        double sup = 0.0;
        for (double a = -1.0; a <= 1.0 + 1e-9; a += 0.25)
            for (double b = -1.0; b <= 1.0 + 1e-9; b += 0.25) {
                Vec y(2);
                y << a, b;
                sup = std::max(sup, std::abs(grid.value(0.0, y) - oracle.value(0.0, y)));
            }
        return sup;
    };
    const double coarse = sup_at(0.25);
    const double fine = sup_at(0.125);
    CHECK(fine < coarse);
    CHECK(fine <= 1.0);  // regression guard at the sqrt(h) error scale
}

TEST_CASE("threaded layers match the sequential result exactly") {
    const ControlProblem prob = builtin_problem("lq1d");
    const Decomposition decomp = build_decomposition(prob);
    const Engine quad = Engine::quadrature(1, 7);
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.25);
    GridSpec seq = window1d(-2, 2, 33);
    GridSpec par = seq;
    par.threads = 4;
    const ValueGrid a = solve_grid(prob, decomp, cfg, quad, seq);
    const ValueGrid b = solve_grid(prob, decomp, cfg, quad, par);
    for (std::size_t flat = 0; flat < a.nodes_per_layer(); ++flat)
        REQUIRE(a.at(0, flat) == b.at(0, flat));
}
