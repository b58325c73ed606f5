#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hjb/quadrature.hpp"
#include "hjb/weights.hpp"

#include <cmath>
#include <random>

using namespace hjb;

TEST_CASE("moment coefficients match the Gaussian even moments") {
    auto [c0, d0] = poly2_coefficients(0);
    CHECK(c0 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d0 == doctest::Approx(0.5).epsilon(1e-15));
    auto [c1, d1] = poly2_coefficients(1);
    CHECK(c1 == doctest::Approx(1.0 / 90.0).epsilon(1e-15));
    CHECK(d1 == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    auto [c2, d2] = poly2_coefficients(2);
    CHECK(c2 == doctest::Approx(1.0 / 9450.0).epsilon(1e-15));
    CHECK(d2 == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(gaussian_even_moment(1) == 1.0);
    CHECK(gaussian_even_moment(3) == 15.0);
    CHECK(gaussian_even_moment(5) == 945.0);
    CHECK_NOTHROW(poly2_coefficients(7));
    CHECK_THROWS_AS(poly2_coefficients(8), Error);
    CHECK_THROWS_AS(poly2_coefficients(-1), Error);
}

TEST_CASE("second-order weight on unit column") {
    Mat Sigma(1, 1);
    Sigma << 1.0;
    Vec w(1);
    w << 1.0;
    CHECK(second_order_weight(Sigma, 0, w) == doctest::Approx(0.0).epsilon(1e-15));
    w << 0.0;
    CHECK(second_order_weight(Sigma, 0, w) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(second_order_weight(Mat::Zero(2, 2), 0, Vec::Zero(2)) == 0.0);
    // Zero-column convention: a zero column contributes nothing.
    Mat wide(2, 2);
    wide << 1.0, 0.0, 0.0, 0.0;
    Vec w2(2);
    w2 << 0.3, -0.7;
    Mat tall(2, 1);
    tall << 1.0, 0.0;
    CHECK(second_order_weight(wide, 1, w2) == doctest::Approx(second_order_weight(tall, 1, w2)));
}

TEST_CASE("upwind weight signs and closed-form mean") {
    Vec g(2), w(2);
    g << 1.0, -2.0;
    w << 3.0, -1.0;
    // 2 (g+.w+ + g-.w-) = 2 (1*3 + 2*1)
    CHECK(upwind_weight(g, w) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(upwind_weight(Vec::Zero(2), w) == 0.0);
    Vec g1(1), w1(1);
    g1 << 1.0;
    w1 << -5.0;
    CHECK(upwind_weight(g1, w1) == 0.0);

    const double h = 0.5;
    CHECK(upwind_weight_mean(g1, h) == doctest::Approx(std::sqrt(2.0 / (M_PI * h))).epsilon(1e-14));
}

TEST_CASE("upwind weight is nonnegative on random draws") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int trial = 0; trial < 100000; ++trial) {
        Vec g(3), w(3);
        for (int i = 0; i < 3; ++i) {
            g[i] = normal(rng);
            w[i] = normal(rng);
        }
        REQUIRE(upwind_weight(g, w) >= 0.0);
    }
}

TEST_CASE("second-order weight lower bound, attainable") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal(0.0, 1.5);
    std::uniform_int_distribution<int> kdist(0, 2);
    for (int trial = 0; trial < 100000; ++trial) {
        const int k = kdist(rng);
        Mat Sigma(2, 2);
        for (int i = 0; i < 4; ++i) Sigma(i / 2, i % 2) = normal(rng);
        Vec w(2);
        w << normal(rng), normal(rng);
        const double bound = -(Sigma * Sigma.transpose()).trace() / (4.0 * k + 2.0);
        REQUIRE(second_order_weight(Sigma, k, w) >= bound - 1e-12);
    }
    // Equality at w orthogonal to the columns.
    Mat Sigma(2, 1);
    Sigma << 1.0, 0.0;
    Vec w(2);
    w << 0.0, 4.0;
    CHECK(second_order_weight(Sigma, 1, w) ==
          doctest::Approx(-(Sigma * Sigma.transpose()).trace() / 6.0).epsilon(1e-15));
}

TEST_CASE("derivative weights, scalar formulas") {
    Mat s(1, 1);
    s << 1.0;
    Vec w(1);
    w << 0.5;
    const double h = 0.25;
    CHECK(gradient_weight(s, h, w)[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(hessian_weight(s, h, w)(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
    s << 2.0;
    w << 0.0;
    CHECK(hessian_weight(s, 0.1, w)(0, 0) == doctest::Approx(-1.0 / 0.4).epsilon(1e-13));
    Mat singular = Mat::Zero(2, 2);
    CHECK_THROWS_AS(gradient_weight(singular, h, Vec::Zero(2)), Error);
    CHECK_THROWS_AS(hessian_weight(singular, h, Vec::Zero(2)), Error);
}

TEST_CASE("composite weight lower bound and degenerate cases") {
    const double h = 0.3;
    Vec g(1);
    g << -0.7;
    Mat Sigma(1, 1);
    Sigma << std::sqrt(2.0);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 20000; ++trial) {
        Vec z(1);
        z << normal(rng);
        REQUIRE(composite_weight(g, Sigma, 0, h, z) >= -1e-12);  // tr = 2 = 4*0+2
    }
    CHECK(composite_weight(Vec::Zero(1), Mat::Zero(1, 1), 0, h, Vec::Zero(1)) == 1.0);
    // k = 1 with tr(Sigma Sigma') = 6: bound 0, attained when the increment
    // opposes the drift sign and is orthogonal to the columns.
    Mat S2(2, 2);
    S2 << std::sqrt(6.0), 0.0, 0.0, 0.0;
    Vec g2(2), z2(2);
    g2 << 1.0, 0.0;
    z2 << 0.0, 1.0;
    CHECK(composite_weight(g2, S2, 1, h, z2) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("gauss-hermite rule integrates Gaussian moments") {
    const GaussRule rule = gauss_hermite(8);
    for (int p = 0; p <= 15; ++p) {
        double acc = 0.0;
        for (int i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * std::pow(rule.nodes[i], p);
        const double expect = p % 2 == 1 ? 0.0 : gaussian_even_moment(p / 2);
        // Roundoff scales with E[|Z|^p], not with the (possibly zero) target.
        const double scale = std::max(1.0, 2.0 * half_normal_moment(p));
        CHECK(acc == doctest::Approx(expect).epsilon(1e-11).scale(scale));
    }
}

TEST_CASE("half-normal rule matches analytic half moments") {
    for (int n : {1, 2, 4, 8, 12, 16}) {
        const GaussRule rule = gauss_half_normal(n);
        double mass = 0.0;
        for (int i = 0; i < rule.nodes.size(); ++i) {
            REQUIRE(rule.nodes[i] > 0.0);
            mass += rule.weights[i];
        }
        CHECK(mass == doctest::Approx(0.5).epsilon(1e-12));
        for (int p = 0; p <= 2 * n - 1; ++p) {
            double acc = 0.0;
            for (int i = 0; i < rule.nodes.size(); ++i)
                acc += rule.weights[i] * std::pow(rule.nodes[i], p);
            const double expect = half_normal_moment(p);
            CHECK(acc == doctest::Approx(expect).epsilon(1e-9).scale(std::max(1.0, expect)));
        }
    }
}

TEST_CASE("split rule is exact for kinked polynomials") {
    const GaussRule rule = gauss_split_normal(6);
    // E[z_+] = 1/sqrt(2 pi), E[|z|^3] = 2 E[Z^3 1_{Z>0}]
    double pos_mean = 0.0, abs_cubed = 0.0, total = 0.0;
    for (int i = 0; i < rule.nodes.size(); ++i) {
        pos_mean += rule.weights[i] * std::max(rule.nodes[i], 0.0);
        abs_cubed += rule.weights[i] * std::pow(std::abs(rule.nodes[i]), 3);
        total += rule.weights[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pos_mean == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));
    CHECK(abs_cubed == doctest::Approx(2.0 * half_normal_moment(3)).epsilon(1e-12));
}
