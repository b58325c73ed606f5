// Acceptance suite: one check per criterion, one pass/fail line each.

#include "hjb/gridsolve.hpp"
#include "hjb/maxplus.hpp"
#include "hjb/riccati.hpp"
#include "hjb/weights.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hjb;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

Outcome weight_laws() {
    Outcome out;
    std::ostringstream os;
    // Zero mean of the second-order weight under the standard normal law,
    // by full-range quadrature, for k in {0,1,2} and 1..3 columns.
    double worst_mean = 0.0;
    for (int k : {0, 1, 2}) {
        for (int cols = 1; cols <= 3; ++cols) {
            Mat Sigma(3, cols);
            double v = 0.3;
            for (int i = 0; i < Sigma.size(); ++i) {
                Sigma(i % 3, i % cols) = std::cos(v) + 1.2;
                v += 0.9;
                Sigma(i / cols, i % cols) = std::sin(v) + 1.4;
            }
            const Engine quad = Engine::quadrature(3, 4 + 2 * k, false);
            const double mean =
                quad.expect(1.0, [&](const Vec& w) { return second_order_weight(Sigma, k, w); });
            worst_mean = std::max(worst_mean, std::abs(mean));
        }
    }
    if (worst_mean > 1e-10) out.pass = false;
    // Sign laws over 1e5 random draws.
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal(0.0, 1.5);
    std::uniform_int_distribution<int> kdist(0, 2);
    int violations = 0;
    for (int trial = 0; trial < 100000; ++trial) {
        Vec g(3), w(3);
        for (int i = 0; i < 3; ++i) {
            g[i] = normal(rng);
            w[i] = normal(rng);
        }
        if (upwind_weight(g, w) < 0.0) ++violations;
        Mat Sigma(3, 2);
        for (int i = 0; i < 6; ++i) Sigma(i / 2, i % 2) = normal(rng);
        const int k = kdist(rng);
        const double bound = -(Sigma * Sigma.transpose()).trace() / (4.0 * k + 2.0);
        if (second_order_weight(Sigma, k, w) < bound - 1e-12) ++violations;
    }
    if (violations > 0) out.pass = false;
    os << "worst |E P2| = " << worst_mean << ", sign violations " << violations << "/100000";
    out.detail = os.str();
    return out;
}

Outcome estimator_exactness() {
    Outcome out;
    std::ostringstream os;
    const Engine quad = Engine::quadrature(1, 10);
    Mat sb = Mat::Identity(1, 1);
    const EulerStepper stepper = EulerStepper::constant(sb, Vec::Zero(1));
    const TestFunction& vq = test_function("quad", 1);
    const TestFunction& vl = test_function("linear", 1);
    double worst2 = 0.0, worst1 = 0.0;
    Mat Sigma = Mat::Identity(1, 1);
    Vec g = Vec::Constant(1, 0.8);
    for (double h : {0.4, 0.1, 0.025}) {
        for (double xv : {-1.0, 0.0, 0.7}) {
            const Vec x = Vec::Constant(1, xv);
            SpaceFn phiq = [&](const Vec& y) { return vq.value(0.0, y); };
            const double est2 = estimate_d2_poly(quad, stepper, Sigma, 0, 0.0, x, h, phiq);
            const double tgt2 = 0.5 * (Sigma * Sigma.transpose() * vq.hess(0.0, x)).trace();
            worst2 = std::max(worst2, std::abs(est2 - tgt2));
            SpaceFn phil = [&](const Vec& y) { return vl.value(0.0, y); };
            const double est1 =
                estimate_d1_upwind(quad, stepper, g, 0.0, x, h, phil, vl.value(0.0, x));
            const double tgt1 = g.dot(vl.grad(0.0, x));
            worst1 = std::max(worst1, std::abs(est1 - tgt1));
        }
    }
    if (worst2 > 1e-10 || worst1 > 1e-10) out.pass = false;
    os << "second-order error " << worst2 << ", first-order error " << worst1;
    out.detail = os.str();
    return out;
}

Outcome consistency_orders() {
    Outcome out;
    std::ostringstream os;
    std::vector<double> hs;
    for (int i = 2; i <= 6; ++i) hs.push_back(0.4 * std::pow(2.0, -i));
    const Engine quad = Engine::quadrature(1, 12);
    ConsistencySetup setup;
    setup.stepper = EulerStepper::constant(Mat::Identity(1, 1), Vec::Constant(1, 0.5));
    setup.g = Vec::Ones(1);
    setup.Sigma = Mat::Identity(1, 1);
    const double p2 = consistency_study("d2", "sin_exp", hs, quad, setup).fitted_order;
    const double p1 = consistency_study("d1", "sin_exp", hs, quad, setup).fitted_order;

    // Full one-step residual against dv/dt + H with a nonzero residual drift.
    ControlProblem prob = builtin_problem("lq1d");
    prob.underlying_sigma = Mat::Identity(1, 1);
    const Decomposition decomp = build_decomposition(prob);
    const TestFunction& fn = test_function("sin_exp", 1);
    std::vector<double> errs;
    for (double h : hs) {
        SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, h);
        double worst = 0.0;
        for (const Vec& x : default_eval_panel(1)) {
            SpaceFn phi = [&](const Vec& y) { return fn.value(h, y); };
            const double residual = scheme_residual(cfg, prob, decomp, quad, 0.0, x, fn.value(0.0, x), phi);
            HamiltonianPoint pt(x, fn.value(0.0, x), fn.grad(0.0, x), fn.hess(0.0, x));
            worst = std::max(worst, std::abs(residual + fn.dt(0.0, x) + hamiltonian(prob, pt)));
        }
        errs.push_back(worst);
    }
    double pk = 0.0;
    const bool fitted = fit_order(hs, errs, pk);
    if (p2 < 0.8 || p1 < 0.4 || !fitted || pk < 0.4) out.pass = false;
    os << "p_hat: second-order " << p2 << " (>= 0.8), first-order " << p1
       << " (>= 0.4), one-step residual " << pk << " (>= 0.4)";
    out.detail = os.str();
    return out;
}

Outcome monotonicity() {
    Outcome out;
    std::ostringstream os;
    int total_trials = 0, total_violations = 0;
    const struct {
        const char* name;
        int k;
        int trials;
    } configs[] = {{"lq1d", 0, 4000}, {"degen2d", 0, 3000}, {"lq1d_wide", 1, 3000}};
    for (const auto& c : configs) {
        const ControlProblem prob = builtin_problem(c.name);
        const Decomposition decomp = build_decomposition(prob);
        if (decomp.a_bar > 4.0 * c.k + 2.0) {
            out.pass = false;
            os << c.name << ": a_bar outside the guaranteed window; ";
            continue;
        }
        SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, c.k, 0.1);
        const Engine engine = Engine::quadrature(prob.dim_x, 7);
        const MonotoneReport rep = check_monotone(cfg, prob, decomp, engine, c.trials, 515);
        total_trials += rep.trials;
        total_violations += rep.violations;
        if (rep.min_node_weight < -1e-12) out.pass = false;
    }
    if (total_violations != 0 || total_trials != 10000) out.pass = false;

    // The baseline scheme must be breakable past its weight condition.
    const ControlProblem wide = builtin_problem("lq1d_wide");
    const Decomposition wdec = build_decomposition(wide);
    SchemeConfig wcfg = SchemeConfig::make(wide, SchemeVariant::deriv_baseline, 0, 0.1);
    const MonotoneReport wrep =
        check_monotone(wcfg, wide, wdec, Engine::quadrature(1, 7), 200, 515);
    if (!wrep.constructed_violation || wrep.violations < 1) out.pass = false;
    os << total_violations << "/" << total_trials
       << " upwind violations; baseline violations " << wrep.violations
       << (wrep.constructed_violation ? " (constructed pair exhibited)" : " (no constructed pair)");
    out.detail = os.str();
    return out;
}

Outcome subhomogeneity() {
    Outcome out;
    std::ostringstream os;
    // Negative discount: alpha_h = 1 + 2 lambda h.
    ControlProblem neg = builtin_problem("lq1d");
    neg.modes[0].discount = -1.0;
    neg.bounds.discount_min = -1.0;
    const Decomposition ndec = build_decomposition(neg);
    SchemeConfig ncfg = SchemeConfig::make(neg, SchemeVariant::new_upwind, 0, 0.1);
    const SubhomogeneityReport nrep =
        check_subhomogeneous(ncfg, neg, ndec, Engine::quadrature(1, 7), 10000, 99);
    if (nrep.violations != 0 || std::abs(nrep.alpha_h - 1.2) > 1e-12) out.pass = false;

    // Nonnegative discount: exact pass-through (alpha = 1).
    const ControlProblem prob = builtin_problem("lq1d");
    const Decomposition decomp = build_decomposition(prob);
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.1);
    const SubhomogeneityReport rep =
        check_subhomogeneous(cfg, prob, decomp, Engine::quadrature(1, 7), 10000, 99);
    if (rep.violations != 0 || rep.alpha_h != 1.0) out.pass = false;
    os << "alpha 1.2: " << nrep.violations << "/10000, worst excess " << nrep.worst_excess
       << "; alpha 1: " << rep.violations << "/10000, worst excess " << rep.worst_excess;
    out.detail = os.str();
    return out;
}

Outcome scheme_equivalences() {
    Outcome out;
    std::ostringstream os;
    const Engine quad = Engine::quadrature(1, 8);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unit(-1.5, 1.5);

    // Upwind vs prior when the residual drift and discount vanish.
    ControlProblem diffuse = builtin_problem("diffuse1d");
    diffuse.modes[0].sigma = Mat::Constant(1, 1, std::sqrt(2.0));
    diffuse.bounds.sigma = 2.0;
    const Decomposition ddec = build_decomposition(diffuse);
    SchemeConfig up = SchemeConfig::make(diffuse, SchemeVariant::new_upwind, 1, 0.125);
    SchemeConfig prior = SchemeConfig::make(diffuse, SchemeVariant::prior_linear, 1, 0.125);
    double worst_a = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        RandomBumpField field = RandomBumpField::draw(1, 3, 2.0, 1.5, rng);
        SpaceFn phi = [&](const Vec& y) { return field(y); };
        const Vec x = Vec::Constant(1, unit(rng));
        worst_a = std::max(worst_a, std::abs(apply_step(up, diffuse, ddec, quad, 0.0, phi, x).value -
                                             apply_step(prior, diffuse, ddec, quad, 0.0, phi, x).value));
    }

    // Prior vs derivative-weight baseline at k = 0 with a shared generator.
    ControlProblem wide = builtin_problem("lq1d_wide");
    wide.modes[0].discount = 0.3;
    const Decomposition wdec = build_decomposition(wide);
    SchemeConfig p0 = SchemeConfig::make(wide, SchemeVariant::prior_linear, 0, 0.1);
    SchemeConfig baseline = SchemeConfig::make(wide, SchemeVariant::deriv_baseline, 0, 0.1);
    double worst_b = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double a2 = -std::abs(unit(rng)), a1 = unit(rng), a0 = unit(rng);
        SpaceFn phi = [&](const Vec& y) { return a2 * y[0] * y[0] + a1 * y[0] + a0; };
        const Vec x = Vec::Constant(1, unit(rng));
        worst_b = std::max(worst_b, std::abs(apply_step(p0, wide, wdec, quad, 0.0, phi, x).value -
                                             apply_step(baseline, wide, wdec, quad, 0.0, phi, x).value));
    }
    if (worst_a > 1e-12 || worst_b > 1e-10) out.pass = false;
    os << "upwind = prior gap " << worst_a << " (<= 1e-12); prior = baseline gap " << worst_b
       << " (<= 1e-10)";
    out.detail = os.str();
    return out;
}

Outcome kushner_equivalence() {
    Outcome out;
    std::ostringstream os;
    const Engine rademacher = Engine::two_point(1);
    const EulerStepper stepper = EulerStepper::constant(Mat::Identity(1, 1), Vec::Zero(1));
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double h = 0.02 + 0.5 * std::abs(unit(rng));
        const double gv = 2.5 * unit(rng);
        const double a2 = unit(rng), a1 = unit(rng), a0 = unit(rng), a3 = 0.4 * unit(rng);
        auto v = [&](double y) { return a3 * y * y * y + a2 * y * y + a1 * y + a0; };
        Vec x(1), g(1);
        x << 1.5 * unit(rng);
        g << gv;
        const double est = estimate_d1_upwind(rademacher, stepper, g, 0.0, x, h,
                                              [&](const Vec& y) { return v(y[0]); }, v(x[0]));
        const double sq = std::sqrt(h);
        const double gp = std::max(gv, 0.0), gm = -std::min(gv, 0.0);
        const double fd = gp * (v(x[0] + sq) - v(x[0])) / sq + gm * (v(x[0] - sq) - v(x[0])) / sq;
        worst = std::max(worst, std::abs(est - fd));
    }
    if (worst > 1e-14) out.pass = false;
    os << "worst |estimator - upwind difference| = " << worst << " (<= 1e-14)";
    out.detail = os.str();
    return out;
}

Outcome lq_convergence() {
    Outcome out;
    std::ostringstream os;
    const ControlProblem prob = builtin_problem("lq1d");
    const Decomposition decomp = build_decomposition(prob);
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, 0.2);
    GridSpec spec;
    spec.lo = Vec::Constant(1, -2.0);
    spec.hi = Vec::Constant(1, 2.0);
    spec.points = {33};
    const ConvergenceStudy study = convergence_study(prob, decomp, cfg, Engine::quadrature(1, 7), spec,
                                                     {0.2, 0.1, 0.05, 0.025});
    bool decreasing = true;
    for (std::size_t i = 1; i < study.rows.size(); ++i)
        if (study.rows[i].sup_error >= study.rows[i - 1].sup_error) decreasing = false;
    if (!decreasing || !study.order_fitted || study.fitted_order <= 0.0) out.pass = false;
    os << "sup errors";
    for (const auto& r : study.rows) os << " " << r.sup_error;
    os << "; fitted order " << study.fitted_order << " (> 0, recorded not pre-asserted)";
    out.detail = os.str();
    return out;
}

Outcome distributivity() {
    Outcome out;
    std::ostringstream os;
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    int brute = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n_w = 2 + trial % 3;            // 2..4 increments
        const int n_z = 2 + (trial / 3) % 3;      // 2..4 forms
        FiniteSampleOperator G;
        const int pieces = 1 + trial % 2;
        for (int p = 0; p < pieces; ++p) {
            FiniteSampleOperator::Piece piece;
            piece.weights = Vec(n_w);
            for (int i = 0; i < n_w; ++i) piece.weights[i] = unit(rng);
            piece.offset = unit(rng) - 0.5;
            piece.denom = 0.5 + unit(rng);
            G.pieces.push_back(piece);
        }
        Mat phi(n_w, n_z);
        for (int i = 0; i < phi.size(); ++i) phi(i / n_z, i % n_z) = 4.0 * unit(rng) - 2.0;
        const DistributivityReport rep = check_distributivity(G, phi);
        if (rep.brute_forced) ++brute;
        worst = std::max(worst, rep.abs_gap);
    }
    if (worst > 1e-12 || brute != 100) out.pass = false;
    os << "worst gap " << worst << " (<= 1e-12) over " << brute << " brute-forced instances";
    out.detail = os.str();
    return out;
}

Outcome maxplus_end_to_end() {
    Outcome out;
    std::ostringstream os;
    const ControlProblem prob = builtin_problem("lq1d");
    const Decomposition decomp = build_decomposition(prob);
    const double h = 0.1;
    SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, 0, h);
    const Engine engine = Engine::quadrature(1, 8);
    SamplePlan plan;
    plan.n_in = 500;
    plan.n_x = 25;
    plan.n_w = 25;
    plan.seed = 7001;
    plan.init_lo = Vec::Constant(1, -1.5);
    plan.init_hi = Vec::Constant(1, 1.5);

    const RiccatiSolution oracle = riccati_solve(prob, 0, 0.001);
    auto sup_error = [&](const MaxPlusValue& value) {
        double sup = 0.0;
        for (double xv = -1.0; xv <= 1.0 + 1e-9; xv += 0.05) {
            const Vec x = Vec::Constant(1, xv);
            sup = std::max(sup, std::abs(value.value(0.0, x) - oracle.value(0.0, x)));
        }
        return sup;
    };

    // Primary run plus five independent reruns for the bootstrap spread.
    std::vector<MaxPlusValue> runs;
    std::vector<double> errors;
    for (int r = 0; r < 6; ++r) {
        SamplePlan p = plan;
        p.seed = plan.seed + r;
        runs.push_back(solve_maxplus(prob, decomp, cfg, engine, p));
        errors.push_back(sup_error(runs.back()));
    }
    bool bounds_ok = true, nsd_ok = true;
    for (std::size_t ti = 0; ti < runs[0].layers.size(); ++ti) {
        if (runs[0].layers[ti].size() > static_cast<std::size_t>(plan.n_in)) bounds_ok = false;
        for (const QuadraticForm& z : runs[0].layers[ti])
            if (z.max_curvature() > 1e-9) nsd_ok = false;
    }

    double mean = 0.0;
    for (double e : errors) mean += e;
    mean /= static_cast<double>(errors.size());
    double var = 0.0;
    for (double e : errors) var += (e - mean) * (e - mean);
    const double se = std::sqrt(var / (errors.size() - 1.0));

    // Grid-solver reference error on the same window, same scheme and h.
    GridSpec spec;
    spec.lo = Vec::Constant(1, -2.0);
    spec.hi = Vec::Constant(1, 2.0);
    spec.points = {41};
    const ValueGrid grid = solve_grid(prob, decomp, cfg, Engine::quadrature(1, 7), spec);
    double grid_err = 0.0;
    for (double xv = -1.0; xv <= 1.0 + 1e-9; xv += 0.05) {
        const Vec x = Vec::Constant(1, xv);
        grid_err = std::max(grid_err, std::abs(grid.value(0.0, x) - oracle.value(0.0, x)));
    }

    // Reproducibility: the primary seed again, bit for bit.
    const MaxPlusValue again = solve_maxplus(prob, decomp, cfg, engine, plan);
    bool identical = again.layers.size() == runs[0].layers.size();
    for (std::size_t ti = 0; identical && ti < again.layers.size(); ++ti) {
        identical = again.layers[ti].size() == runs[0].layers[ti].size();
        for (std::size_t f = 0; identical && f < again.layers[ti].size(); ++f)
            identical = again.layers[ti][f].Q == runs[0].layers[ti][f].Q &&
                        again.layers[ti][f].b == runs[0].layers[ti][f].b &&
                        again.layers[ti][f].c == runs[0].layers[ti][f].c;
    }

    if (!bounds_ok || !nsd_ok || !identical || errors[0] > grid_err + 3.0 * se) out.pass = false;
    os << "sup error " << errors[0] << " vs grid " << grid_err << " + 3 se (se " << se
       << "); layer bound " << (bounds_ok ? "ok" : "VIOLATED") << "; curvature "
       << (nsd_ok ? "ok" : "VIOLATED") << "; reruns " << (identical ? "bit-identical" : "DIFFER");
    out.detail = os.str();
    return out;
}

}  // namespace

int main() {
    const struct {
        const char* name;
        std::function<Outcome()> run;
    } criteria[] = {
        {"1. weight laws (zero mean, sign, lower bound)", weight_laws},
        {"2. estimator exactness on quadratic / linear values", estimator_exactness},
        {"3. consistency orders on sin(x) e^-t", consistency_orders},
        {"4. monotonicity: upwind guaranteed, baseline breakable", monotonicity},
        {"5. additive subhomogeneity bounds", subhomogeneity},
        {"6. scheme equivalences in the degenerate limits", scheme_equivalences},
        {"7. Kushner upwind finite-difference equivalence", kushner_equivalence},
        {"8. LQ grid convergence against the Riccati oracle", lq_convergence},
        {"9. distributivity over finite selections", distributivity},
        {"10. max-plus end to end on the LQ problem", maxplus_end_to_end},
    };
    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %s  (%.1fs)  %s\n", outcome.pass ? "PASS" : "FAIL", criterion.name, secs,
                    outcome.detail.c_str());
        if (!outcome.pass) ++failures;
    }
    if (failures) std::printf("%d criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
