#include "hjb/schemes.hpp"

#include "hjb/weights.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hjb {

SchemeVariant scheme_variant_from_string(const std::string& name) {
    if (name == "new_upwind") return SchemeVariant::new_upwind;
    if (name == "prior_linear") return SchemeVariant::prior_linear;
    if (name == "deriv_baseline") return SchemeVariant::deriv_baseline;
    fail(ErrorKind::config, "unknown scheme variant '" + name + "'");
}

std::string to_string(SchemeVariant v) {
    switch (v) {
        case SchemeVariant::new_upwind: return "new_upwind";
        case SchemeVariant::prior_linear: return "prior_linear";
        case SchemeVariant::deriv_baseline: return "deriv_baseline";
    }
    return "?";
}

SchemeConfig SchemeConfig::make(const ControlProblem& prob, SchemeVariant variant, int k, double h,
                                DeltaMode delta_mode, double h0_user) {
    SchemeConfig cfg;
    cfg.variant = variant;
    cfg.k = k;
    cfg.h = h;
    cfg.h0_user = h0_user;
    cfg.delta_mode = delta_mode;
    cfg.lambda = std::max(0.0, -prob.discount_min());
    cfg.h0 = cfg.lambda > 0.0 ? std::min(1.0 / (2.0 * cfg.lambda), h0_user) : h0_user;
    if (k < 0) fail(ErrorKind::config, "scheme: k must be nonnegative");
    if (h <= 0.0) fail(ErrorKind::config, "scheme: h must be positive");
    if (delta_mode == DeltaMode::nonnegative && prob.discount_min() < 0.0)
        fail(ErrorKind::config, "scheme: nonnegative discount mode on a problem with negative discounts");
    return cfg;
}

namespace {

void require_step_valid(const SchemeConfig& cfg) {
    if (cfg.h > cfg.h0) {
        std::ostringstream os;
        os << "scheme: step size " << cfg.h << " exceeds the validity threshold h0 = " << cfg.h0
           << "; pick a smaller h";
        fail(ErrorKind::numeric, os.str());
    }
}

double delta_plus(double delta) { return std::max(delta, 0.0); }
double delta_minus(double delta) { return -std::min(delta, 0.0); }

// Payoff values phi(S^m(x, sqrt(h) z_i)) for every engine node, shared by
// all controls of the mode.
std::vector<double> payoff_at_nodes(const Engine& engine, const EulerStepper& stepper, const Vec& x,
                                    double h, const SpaceFn& phi_next) {
    const auto& nodes = engine.standardized_nodes();
    const double sqh = std::sqrt(h);
    std::vector<double> vals(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        vals[i] = phi_next(stepper.step(x, h, sqh * nodes[i]));
        if (!std::isfinite(vals[i]))
            fail(ErrorKind::domain, "scheme: non-finite payoff at a quadrature node");
    }
    return vals;
}

EulerStepper mode_stepper(const Decomposition& decomp, int m) {
    EulerStepper s;
    s.drift_linear = decomp.modes[m].drift_linear;
    s.drift_const = decomp.modes[m].drift_const;
    s.sigma = decomp.modes[m].sbar;
    return s;
}

// Upwind-variant numerator from precomputed payoff values.
double upwind_numerator(const SchemeConfig& cfg, const Engine& engine, const std::vector<double>& payoff,
                        const std::vector<double>& p2_at_nodes, const Vec& g, double delta, double ell,
                        double h) {
    const auto& nodes = engine.standardized_nodes();
    const auto& wts = engine.node_weights();
    const double sqh = std::sqrt(h);
    const double base =
        cfg.delta_mode == DeltaMode::general_sign ? 1.0 + h * delta_minus(delta) : 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        acc += wts[i] * payoff[i] * (base + sqh * upwind_weight(g, nodes[i]) + p2_at_nodes[i]);
    return acc + h * ell;
}

}  // namespace

double step_numerator(const SchemeConfig& cfg, const ControlProblem& prob, const Decomposition& decomp,
                      const Engine& engine, int m, const Vec& u, double t, const Vec& x,
                      const SpaceFn& phi_next) {
    (void)t;
    require_step_valid(cfg);
    const double h = cfg.h;
    const EulerStepper stepper = mode_stepper(decomp, m);
    const std::vector<double> payoff = payoff_at_nodes(engine, stepper, x, h, phi_next);
    const auto& nodes = engine.standardized_nodes();
    std::vector<double> p2(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        p2[i] = second_order_weight(decomp.modes[m].Sigma, cfg.k, nodes[i]);
    const Vec g = decomp.residual_drift(prob, m, x, u);
    return upwind_numerator(cfg, engine, payoff, p2, g, prob.discount(m, x, u),
                            prob.running_reward(m, x, u), h);
}

double step_denominator(const SchemeConfig& cfg, const ControlProblem& prob, const Decomposition& decomp,
                        int m, const Vec& u, const Vec& x) {
    require_step_valid(cfg);
    const double h = cfg.h;
    const double delta = prob.discount(m, x, u);
    const double d_eff = cfg.delta_mode == DeltaMode::general_sign ? delta_plus(delta) : delta;
    const Vec g = decomp.residual_drift(prob, m, x, u);
    const double value = 1.0 + h * d_eff + std::sqrt(2.0 * h / M_PI) * g.cwiseAbs().sum();
    if (value <= 0.0) {
        std::ostringstream os;
        os << "scheme: nonpositive denominator (" << value << ") at h = " << h
           << "; the step size must be reduced";
        fail(ErrorKind::numeric, os.str());
    }
    return value;
}

namespace {

struct BranchScan {
    // Evaluates every (m, u) branch of the chosen variant, feeding values to
    // a visitor; shares per-mode payoff and weight computations.
    template <typename Visit>
    static void run(const SchemeConfig& cfg, const ControlProblem& prob, const Decomposition& decomp,
                    const Engine& engine, double t, const SpaceFn& phi_next, const Vec& x, Visit&& visit) {
        (void)t;
        const double h = cfg.h;
        const double sqh = std::sqrt(h);
        const auto& nodes = engine.standardized_nodes();
        const auto& wts = engine.node_weights();
        for (int m = 0; m < prob.mode_count(); ++m) {
            const EulerStepper stepper = mode_stepper(decomp, m);
            const std::vector<double> payoff = payoff_at_nodes(engine, stepper, x, h, phi_next);

            if (cfg.variant == SchemeVariant::deriv_baseline) {
                // Baseline route: derivative-weight estimates of D^0, D^1, D^2
                // fed to the residual Hamiltonian with r = D^0.
                double d0 = 0.0;
                Vec d1 = Vec::Zero(prob.dim_x);
                Mat d2 = Mat::Zero(prob.dim_x, prob.dim_x);
                for (std::size_t i = 0; i < nodes.size(); ++i) {
                    const Vec w = sqh * nodes[i];
                    d0 += wts[i] * payoff[i];
                    d1 += wts[i] * payoff[i] * gradient_weight(stepper.sigma, h, w);
                    d2 += wts[i] * payoff[i] * hessian_weight(stepper.sigma, h, w);
                }
                for (int j = 0; j < prob.control_count(); ++j) {
                    const Vec& u = prob.controls[j];
                    const Vec g = decomp.residual_drift(prob, m, x, u);
                    const double resid = prob.running_reward(m, x, u) - prob.discount(m, x, u) * d0 +
                                         (decomp.modes[m].sbar * g).dot(d1) +
                                         residual_diffusion_term(decomp, m, d2);
                    visit(m, j, d0 + h * resid, 1.0);
                }
                continue;
            }

            std::vector<double> p2(nodes.size());
            for (std::size_t i = 0; i < nodes.size(); ++i)
                p2[i] = second_order_weight(decomp.modes[m].Sigma, cfg.k, nodes[i]);

            for (int j = 0; j < prob.control_count(); ++j) {
                const Vec& u = prob.controls[j];
                const Vec g = decomp.residual_drift(prob, m, x, u);
                const double delta = prob.discount(m, x, u);
                const double ell = prob.running_reward(m, x, u);
                if (cfg.variant == SchemeVariant::new_upwind) {
                    const double tn = upwind_numerator(cfg, engine, payoff, p2, g, delta, ell, h);
                    const double td = step_denominator(cfg, prob, decomp, m, u, x);
                    visit(m, j, tn, td);
                } else {
                    // Prior variant: linear first-order weight, discount on D^0.
                    double acc = 0.0;
                    for (std::size_t i = 0; i < nodes.size(); ++i)
                        acc += wts[i] * payoff[i] *
                               (1.0 - h * delta + sqh * g.dot(nodes[i]) + p2[i]);
                    visit(m, j, acc + h * ell, 1.0);
                }
            }
        }
    }
};

}  // namespace

StepResult apply_step(const SchemeConfig& cfg, const ControlProblem& prob, const Decomposition& decomp,
                      const Engine& engine, double t, const SpaceFn& phi_next, const Vec& x) {
    require_step_valid(cfg);
    if (prob.modes.empty() || prob.controls.empty())
        fail(ErrorKind::config, "scheme: empty mode or control grid");
    StepResult best;
    bool first = true;
    BranchScan::run(cfg, prob, decomp, engine, t, phi_next, x,
                    [&](int m, int j, double numerator, double denominator) {
                        const double value = numerator / denominator;
                        if (first || value > best.value) {
                            best = {value, m, j};
                            first = false;
                        }
                    });
    return best;
}

double scheme_residual(const SchemeConfig& cfg, const ControlProblem& prob, const Decomposition& decomp,
                       const Engine& engine, double t, const Vec& x, double r, const SpaceFn& phi_next) {
    require_step_valid(cfg);
    double worst = -std::numeric_limits<double>::infinity();
    BranchScan::run(cfg, prob, decomp, engine, t, phi_next, x,
                    [&](int, int, double numerator, double denominator) {
                        worst = std::max(worst, (numerator - denominator * r) / cfg.h);
                    });
    return -worst;
}

double RandomBumpField::operator()(const Vec& x) const {
    double acc = 0.0;
    for (const Bump& b : bumps) {
        const double q = (x - b.center).squaredNorm() / (b.radius * b.radius);
        if (q < 1.0) acc += b.height * (1.0 - q);
    }
    return acc;
}

RandomBumpField RandomBumpField::draw(int dim, int n_bumps, double box, double amplitude,
                                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RandomBumpField f;
    double total = 0.0;
    for (int i = 0; i < n_bumps; ++i) {
        Bump b;
        b.center = Vec(dim);
        for (int a = 0; a < dim; ++a) b.center[a] = box * (2.0 * unit(rng) - 1.0);
        b.radius = 0.3 + 1.2 * unit(rng);
        b.height = 2.0 * unit(rng) - 1.0;
        total += std::abs(b.height);
        f.bumps.push_back(std::move(b));
    }
    if (total > 0.0)
        for (Bump& b : f.bumps) b.height *= amplitude / total;
    return f;
}

namespace {

// Composite payoff weight of one branch at one standardized node, matching
// the algebra of BranchScan for each variant.
double node_weight(const SchemeConfig& cfg, const Decomposition& decomp, int m, const Vec& g, double delta,
                   const Vec& z) {
    const double h = cfg.h;
    const double sqh = std::sqrt(h);
    const Mat& Sigma = decomp.modes[m].Sigma;
    switch (cfg.variant) {
        case SchemeVariant::new_upwind: {
            const double base =
                cfg.delta_mode == DeltaMode::general_sign ? 1.0 + h * delta_minus(delta) : 1.0;
            return base + sqh * upwind_weight(g, z) + second_order_weight(Sigma, cfg.k, z);
        }
        case SchemeVariant::prior_linear:
            return 1.0 - h * delta + sqh * g.dot(z) + second_order_weight(Sigma, cfg.k, z);
        case SchemeVariant::deriv_baseline: {
            const double fro2 = Sigma.size() == 0 ? 0.0 : Sigma.squaredNorm();
            const double cross = Sigma.size() == 0 ? 0.0 : (Sigma.transpose() * z).squaredNorm();
            return 1.0 - h * delta + sqh * g.dot(z) + 0.5 * (cross - fro2);
        }
    }
    return 0.0;
}

struct WeightAudit {
    double min_weight = std::numeric_limits<double>::infinity();
    int mode = 0;
    int control = 0;
    std::size_t node = 0;
};

WeightAudit audit_node_weights(const SchemeConfig& cfg, const ControlProblem& prob,
                               const Decomposition& decomp, const Engine& engine, const Vec& x) {
    WeightAudit audit;
    const auto& nodes = engine.standardized_nodes();
    for (int m = 0; m < prob.mode_count(); ++m) {
        for (int j = 0; j < prob.control_count(); ++j) {
            const Vec g = decomp.residual_drift(prob, m, x, prob.controls[j]);
            const double delta = prob.discount(m, x, prob.controls[j]);
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                const double w = node_weight(cfg, decomp, m, g, delta, nodes[i]);
                if (w < audit.min_weight) audit = {w, m, j, i};
            }
        }
    }
    return audit;
}

}  // namespace

MonotoneReport check_monotone(const SchemeConfig& cfg, const ControlProblem& prob,
                              const Decomposition& decomp, const Engine& engine, int trials,
                              std::uint64_t seed) {
    require_step_valid(cfg);
    MonotoneReport report;
    report.trials = trials;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int d = prob.dim_x;
    const double box = 0.5 * (prob.audit.hi - prob.audit.lo).cwiseAbs().maxCoeff();

    const Vec x_audit = Vec::Zero(d);
    const WeightAudit audit = audit_node_weights(cfg, prob, decomp, engine, x_audit);
    report.min_node_weight = audit.min_weight;

    for (int trial = 0; trial < trials; ++trial) {
        const RandomBumpField lo = RandomBumpField::draw(d, 3, box, 1.0, rng);
        const RandomBumpField gap = RandomBumpField::draw(d, 2, box, unit(rng), rng);
        Vec x(d);
        for (int a = 0; a < d; ++a)
            x[a] = prob.audit.lo[a] + (prob.audit.hi[a] - prob.audit.lo[a]) * unit(rng);
        SpaceFn phi = [&](const Vec& y) { return lo(y); };
        SpaceFn psi = [&](const Vec& y) { return lo(y) + std::abs(gap(y)); };
        const double t_phi = apply_step(cfg, prob, decomp, engine, 0.0, phi, x).value;
        const double t_psi = apply_step(cfg, prob, decomp, engine, 0.0, psi, x).value;
        const double margin = t_psi - t_phi;
        if (margin < -1e-10) {
            ++report.violations;
            report.worst_margin = std::min(report.worst_margin, margin);
        }
    }

    // For a negative-weight branch, exhibit an explicit ordered pair that the
    // operator reverses: a small nonnegative bump covering only the image of
    // the offending node.
    if (audit.min_weight < -1e-9) {
        const EulerStepper stepper = mode_stepper(decomp, audit.mode);
        const auto& nodes = engine.standardized_nodes();
        const double sqh = std::sqrt(cfg.h);
        const Vec target = stepper.step(x_audit, cfg.h, sqh * nodes[audit.node]);
        double gap_dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (i == audit.node) continue;
            const Vec other = stepper.step(x_audit, cfg.h, sqh * nodes[i]);
            gap_dist = std::min(gap_dist, (other - target).norm());
        }
        const double radius = std::isfinite(gap_dist) ? 0.49 * gap_dist : 0.1;
        SpaceFn zero = [](const Vec&) { return 0.0; };
        for (double eps = 1e-2; eps >= 1e-7; eps *= 0.1) {
            SpaceFn bump = [&](const Vec& y) {
                const double q = (y - target).squaredNorm() / (radius * radius);
                return q < 1.0 ? eps * (1.0 - q) : 0.0;
            };
            const double t0 = apply_step(cfg, prob, decomp, engine, 0.0, zero, x_audit).value;
            const double t1 = apply_step(cfg, prob, decomp, engine, 0.0, bump, x_audit).value;
            if (t1 < t0 - 1e-13) {
                report.constructed_violation = true;
                ++report.violations;
                report.worst_margin = std::min(report.worst_margin, t1 - t0);
                std::ostringstream os;
                os << "constructed pair 0 <= bump at node " << audit.node << " of branch (m="
                   << prob.modes[audit.mode].id << ", u index " << audit.control
                   << ") with payoff weight " << audit.min_weight;
                report.note = os.str();
                break;
            }
        }
    }
    return report;
}

SubhomogeneityReport check_subhomogeneous(const SchemeConfig& cfg, const ControlProblem& prob,
                                          const Decomposition& decomp, const Engine& engine, int trials,
                                          std::uint64_t seed) {
    require_step_valid(cfg);
    SubhomogeneityReport report;
    report.trials = trials;
    report.alpha_h = 1.0 + 2.0 * cfg.lambda * cfg.h;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int d = prob.dim_x;
    const double box = 0.5 * (prob.audit.hi - prob.audit.lo).cwiseAbs().maxCoeff();

    for (int trial = 0; trial < trials; ++trial) {
        const RandomBumpField field = RandomBumpField::draw(d, 3, box, 2.0, rng);
        const double shift = trial == 0 ? 0.0 : 3.0 * unit(rng);
        Vec x(d);
        for (int a = 0; a < d; ++a)
            x[a] = prob.audit.lo[a] + (prob.audit.hi[a] - prob.audit.lo[a]) * unit(rng);
        SpaceFn phi = [&](const Vec& y) { return field(y); };
        SpaceFn phi_up = [&](const Vec& y) { return field(y) + shift; };
        const double t0 = apply_step(cfg, prob, decomp, engine, 0.0, phi, x).value;
        const double t1 = apply_step(cfg, prob, decomp, engine, 0.0, phi_up, x).value;
        const double excess = t1 - t0 - report.alpha_h * shift;
        report.worst_excess = std::max(report.worst_excess, excess);
        if (excess > 1e-10) ++report.violations;
    }
    return report;
}

}  // namespace hjb
