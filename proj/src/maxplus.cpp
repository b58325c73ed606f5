#include "hjb/maxplus.hpp"

#include "hjb/weights.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace hjb {

using nlohmann::json;

int MaxPlusValue::time_index(double t) const {
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(i);
    fail(ErrorKind::domain, "max-plus value: time " + std::to_string(t) + " is not a layer time");
}

double MaxPlusValue::value(double t, const Vec& x) const {
    return max_over_forms(layers[time_index(t)], x);
}

std::size_t MaxPlusValue::max_layer_size() const {
    std::size_t best = 0;
    for (const auto& layer : layers) best = std::max(best, layer.size());
    return best;
}

double FiniteSampleOperator::operator()(const Vec& values) const {
    if (pieces.empty()) fail(ErrorKind::state, "finite-sample operator: no pieces");
    double best = -std::numeric_limits<double>::infinity();
    for (const Piece& p : pieces) {
        if (p.denom <= 0.0) fail(ErrorKind::config, "finite-sample operator: nonpositive denominator");
        best = std::max(best, (p.weights.dot(values) + p.offset) / p.denom);
    }
    return best;
}

DistributivityReport check_distributivity(const FiniteSampleOperator& G, const Mat& phi_values) {
    const int n_w = static_cast<int>(phi_values.rows());
    const int n_z = static_cast<int>(phi_values.cols());
    if (n_w < 1 || n_z < 1) fail(ErrorKind::config, "distributivity: empty phi table");
    DistributivityReport report;

    Vec pointwise_max = phi_values.rowwise().maxCoeff();
    report.lhs = G(pointwise_max);

    double selections = std::pow(static_cast<double>(n_z), n_w);
    if (selections <= 1e4) {
        report.brute_forced = true;
        std::vector<int> pick(n_w, 0);
        Vec vals(n_w);
        double best = -std::numeric_limits<double>::infinity();
        std::size_t count = 0;
        while (true) {
            for (int i = 0; i < n_w; ++i) vals[i] = phi_values(i, pick[i]);
            best = std::max(best, G(vals));
            ++count;
            int a = n_w - 1;
            while (a >= 0 && ++pick[a] == n_z) pick[a--] = 0;
            if (a < 0) break;
        }
        report.best_rhs = best;
        report.selections_checked = count;
    } else {
        // Greedy pointwise argmax attains the sup for a monotone operator.
        Vec vals(n_w);
        for (int i = 0; i < n_w; ++i) {
            int arg = 0;
            for (int z = 1; z < n_z; ++z)
                if (phi_values(i, z) > phi_values(i, arg)) arg = z;
            vals[i] = phi_values(i, arg);
        }
        report.best_rhs = G(vals);
        report.selections_checked = 1;
    }
    report.abs_gap = std::abs(report.lhs - report.best_rhs);
    return report;
}

std::vector<int> select_forms(const std::vector<QuadraticForm>& forms, const std::vector<Vec>& successors) {
    if (forms.empty()) fail(ErrorKind::state, "select_forms: empty form set");
    std::vector<int> selection(successors.size());
    for (std::size_t j = 0; j < successors.size(); ++j) {
        selection[j] = argmax_form(forms, successors[j]);
        // Attainment is definitional for the argmax; guard against NaN.
        if (!std::isfinite(forms[selection[j]](successors[j])))
            fail(ErrorKind::domain, "select_forms: non-finite form value at a successor state");
    }
    return selection;
}

namespace {

int quadratic_basis_size(int d) { return 1 + d + d * (d + 1) / 2; }

Vec quadratic_basis(const Vec& x) {
    const int d = static_cast<int>(x.size());
    Vec row(quadratic_basis_size(d));
    int c = 0;
    row[c++] = 1.0;
    for (int i = 0; i < d; ++i) row[c++] = x[i];
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) row[c++] = x[i] * x[j];
    return row;
}

}  // namespace

RegressionResult regress_quadratic(const std::vector<Vec>& xs, const std::vector<double>& ys, int dim,
                                   const std::string& context) {
    const int nb = quadratic_basis_size(dim);
    const int n = static_cast<int>(xs.size());
    if (n != static_cast<int>(ys.size()) || n == 0)
        fail(ErrorKind::config, "regress_quadratic: empty or mismatched sample " + context);
    if (n < nb)
        fail(ErrorKind::config, "regress_quadratic: sample smaller than the basis " + context);
    Mat X(n, nb);
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        X.row(i) = quadratic_basis(xs[i]);
        y[i] = ys[i];
    }
    Eigen::ColPivHouseholderQR<Mat> qr(X);
    Vec beta;
    if (qr.rank() == nb) {
        beta = qr.solve(y);
    } else {
        const Mat xtx = X.transpose() * X;
        const double ridge = 1e-10 * std::max(1.0, xtx.diagonal().maxCoeff());
        beta = (xtx + ridge * Mat::Identity(nb, nb)).ldlt().solve(X.transpose() * y);
        if (!beta.allFinite())
            fail(ErrorKind::numeric, "regress_quadratic: rank-deficient design even after ridge " + context);
    }
    RegressionResult out;
    out.residual_rms = (X * beta - y).norm() / std::sqrt(static_cast<double>(n));

    Mat Q = Mat::Zero(dim, dim);
    int c = 1 + dim;
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) {
            if (i == j)
                Q(i, i) = 2.0 * beta[c];
            else
                Q(i, j) = Q(j, i) = beta[c];
            ++c;
        }
    out.form = QuadraticForm(project_nsd(Q), beta.segment(1, dim), beta[0]);
    return out;
}

double payoff_step(const SchemeConfig& cfg, const ControlProblem& prob, const Decomposition& decomp,
                   const Engine& engine, int mode, double t, const Vec& x, const IncrementFn& payoff) {
    (void)t;
    const double h = cfg.h;
    const double sqh = std::sqrt(h);
    const auto& nodes = engine.standardized_nodes();
    const auto& wts = engine.node_weights();
    std::vector<double> vals(nodes.size()), p2(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        vals[i] = payoff(sqh * nodes[i]);
        p2[i] = second_order_weight(decomp.modes[mode].Sigma, cfg.k, nodes[i]);
    }
    const double delta = prob.modes[mode].discount;
    const double base =
        cfg.delta_mode == DeltaMode::general_sign ? 1.0 + h * std::max(-delta, 0.0) : 1.0;
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < prob.control_count(); ++j) {
        const Vec& u = prob.controls[j];
        const Vec g = decomp.residual_drift(prob, mode, x, u);
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            acc += wts[i] * vals[i] * (base + sqh * upwind_weight(g, nodes[i]) + p2[i]);
        const double numer = acc + h * prob.running_reward(mode, x, u);
        const double denom = step_denominator(cfg, prob, decomp, mode, u, x);
        best = std::max(best, numer / denom);
    }
    return best;
}

namespace {

// Trajectory table X^c(t, omega) per projection class, driven by one shared
// Brownian sample per omega.
struct PathTable {
    std::vector<std::vector<std::vector<Vec>>> states;  // [class][time][omega]
    std::vector<std::vector<Vec>> increments;           // [time][omega]
};

PathTable simulate_paths(const ControlProblem& prob, const Decomposition& decomp,
                         const std::vector<int>& class_rep, const std::vector<int>& projection, double h,
                         int n_steps, const SamplePlan& plan) {
    const int d = prob.dim_x;
    std::mt19937_64 rng(plan.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    (void)projection;

    PathTable table;
    table.states.assign(class_rep.size(),
                        std::vector<std::vector<Vec>>(n_steps + 1, std::vector<Vec>(plan.n_in)));
    table.increments.assign(n_steps, std::vector<Vec>(plan.n_in));

    for (int w = 0; w < plan.n_in; ++w) {
        Vec x0(d);
        for (int a = 0; a < d; ++a)
            x0[a] = plan.init_lo[a] + (plan.init_hi[a] - plan.init_lo[a]) * unit(rng);
        for (std::size_t c = 0; c < class_rep.size(); ++c) table.states[c][0][w] = x0;
    }
    const double sqh = std::sqrt(h);
    for (int step = 0; step < n_steps; ++step) {
        for (int w = 0; w < plan.n_in; ++w) {
            Vec dw(d);
            for (int a = 0; a < d; ++a) dw[a] = sqh * normal(rng);
            table.increments[step][w] = dw;
            for (std::size_t c = 0; c < class_rep.size(); ++c) {
                const int m = class_rep[c];
                const Vec& x = table.states[c][step][w];
                table.states[c][step + 1][w] =
                    x + decomp.underlying_drift(m, x) * h + decomp.modes[m].sbar * dw;
            }
        }
    }
    return table;
}

std::vector<int> sample_without_replacement(int count, int from, std::mt19937_64& rng) {
    std::vector<int> pool(from);
    for (int i = 0; i < from; ++i) pool[i] = i;
    std::vector<int> out(count);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, from - 1);
        std::swap(pool[i], pool[pick(rng)]);
        out[i] = pool[i];
    }
    return out;
}

bool forms_equal(const QuadraticForm& a, const QuadraticForm& b) {
    return a.c == b.c && a.b == b.b && a.Q == b.Q;
}

}  // namespace

MaxPlusValue solve_maxplus(const ControlProblem& prob, const Decomposition& decomp, const SchemeConfig& cfg,
                           const Engine& engine, const SamplePlan& plan, const MaxPlusOptions& options) {
    const int d = prob.dim_x;
    const double h = cfg.h;
    const int n_steps = static_cast<int>(std::lround(prob.horizon / h));
    if (n_steps < 1 || std::abs(n_steps * h - prob.horizon) > 1e-9)
        fail(ErrorKind::config, "solve_maxplus: h must divide the horizon");
    if (plan.n_x > plan.n_in) fail(ErrorKind::config, "solve_maxplus: need N_x <= N_in");
    if (plan.n_x < 1 || plan.n_w < 1 || plan.n_in < 1)
        fail(ErrorKind::config, "solve_maxplus: sample sizes must be positive");
    if (prob.terminal_forms.empty()) fail(ErrorKind::state, "solve_maxplus: problem has no terminal forms");
    if (plan.init_lo.size() != d || plan.init_hi.size() != d)
        fail(ErrorKind::config, "solve_maxplus: initial-state sampler box has wrong dimension");

    std::vector<int> projection = plan.projection;
    if (projection.empty()) {
        projection.resize(prob.mode_count());
        for (int m = 0; m < prob.mode_count(); ++m) projection[m] = m;
    }
    if (static_cast<int>(projection.size()) != prob.mode_count())
        fail(ErrorKind::config, "solve_maxplus: projection size must match the mode count");

    MaxPlusValue out;

    // Shared-generator classes and one representative mode each.
    std::vector<int> class_rep;
    std::vector<int> class_of(prob.mode_count());
    for (int m = 0; m < prob.mode_count(); ++m) {
        const int key = projection[m];
        int found = -1;
        for (std::size_t c = 0; c < class_rep.size(); ++c)
            if (projection[class_rep[c]] == key) found = static_cast<int>(c);
        if (found < 0) {
            class_rep.push_back(m);
            found = static_cast<int>(class_rep.size()) - 1;
        }
        class_of[m] = found;
    }
    const std::size_t cardinality_cap = class_rep.size() * static_cast<std::size_t>(plan.n_in);
    if (prob.terminal_forms.size() > cardinality_cap)
        fail(ErrorKind::config, "solve_maxplus: terminal form set exceeds |Mbar| * N_in");

    // Representation hypotheses: constant sigma / delta and affine drift hold
    // by construction; concavity of the reward is checked here.
    for (int m = 0; m < prob.mode_count(); ++m) {
        const QuadraticReward& r = prob.modes[m].reward;
        const int p = prob.dim_u;
        Mat joint(d + p, d + p);
        joint.topLeftCorner(d, d) = 0.5 * (r.Rxx + r.Rxx.transpose());
        joint.topRightCorner(d, p) = r.Rxu;
        joint.bottomLeftCorner(p, d) = r.Rxu.transpose();
        joint.bottomRightCorner(p, p) = 0.5 * (r.Ruu + r.Ruu.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(joint, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().maxCoeff() > 1e-9)
            out.warnings.push_back("reward of mode " + prob.modes[m].id +
                                   " is not concave quadratic; the quadratic-form representation is only "
                                   "approximate");
    }

    const PathTable paths = simulate_paths(prob, decomp, class_rep, projection, h, n_steps, plan);

    out.times.resize(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i) out.times[i] = i * h;
    out.layers.assign(n_steps + 1, {});
    out.provenance.assign(n_steps + 1, {});
    out.max_regression_rms.assign(n_steps + 1, 0.0);
    out.layers[n_steps] = prob.terminal_forms;
    out.provenance[n_steps].assign(prob.terminal_forms.size(), FormProvenance{-1, -1, -1});

    const double sqh = std::sqrt(h);
    const auto& qnodes = engine.standardized_nodes();
    const auto& qwts = engine.node_weights();

    std::mt19937_64 resample_rng(plan.seed ^ 0x9e3779b97f4a7c15ull);

    for (int step = n_steps - 1; step >= 0; --step) {
        const std::vector<QuadraticForm>& next_layer = out.layers[step + 1];

        // Step (1): product resampling of states and increments.
        const std::vector<int> omega_x = sample_without_replacement(plan.n_x, plan.n_in, resample_rng);
        const std::vector<int> omega_w = sample_without_replacement(plan.n_w, plan.n_in, resample_rng);
        std::vector<Vec> w_samples(plan.n_w);
        for (int j = 0; j < plan.n_w; ++j) w_samples[j] = paths.increments[step][omega_w[j]];

        // Nearest sampled increment for each quadrature node (the measurable
        // extension of the selection off the sampled set).
        std::vector<int> nearest(qnodes.size(), 0);
        if (options.quadrature_targets) {
            for (std::size_t q = 0; q < qnodes.size(); ++q) {
                const Vec wq = sqh * qnodes[q];
                double best = std::numeric_limits<double>::infinity();
                for (int j = 0; j < plan.n_w; ++j) {
                    const double dist = (w_samples[j] - wq).squaredNorm();
                    if (dist < best) {
                        best = dist;
                        nearest[q] = j;
                    }
                }
            }
        }

        // Second-order node weights are control-independent: one set per mode.
        std::vector<std::vector<double>> p2_nodes(prob.mode_count());
        if (options.quadrature_targets) {
            for (int m = 0; m < prob.mode_count(); ++m) {
                p2_nodes[m].resize(qnodes.size());
                for (std::size_t q = 0; q < qnodes.size(); ++q)
                    p2_nodes[m][q] = second_order_weight(decomp.modes[m].Sigma, cfg.k, qnodes[q]);
            }
        }
        std::vector<std::vector<double>> p2_samples(prob.mode_count());
        if (!options.quadrature_targets) {
            for (int m = 0; m < prob.mode_count(); ++m) {
                p2_samples[m].resize(plan.n_w);
                for (int j = 0; j < plan.n_w; ++j)
                    p2_samples[m][j] =
                        second_order_weight(decomp.modes[m].Sigma, cfg.k, w_samples[j] / sqh);
            }
        }

        std::vector<QuadraticForm>& layer = out.layers[step];
        std::vector<FormProvenance>& prov = out.provenance[step];

        for (int omega = 0; omega < plan.n_in; ++omega) {
            for (std::size_t c = 0; c < class_rep.size(); ++c) {
                const int m_rep = class_rep[c];
                const Vec& x_t = paths.states[c][step][omega];

                // Step (2)(a): selection attaining the next layer at the
                // successors of x_t.
                std::vector<Vec> successors(plan.n_w);
                for (int j = 0; j < plan.n_w; ++j)
                    successors[j] = x_t + decomp.underlying_drift(m_rep, x_t) * h +
                                    decomp.modes[m_rep].sbar * w_samples[j];
                std::vector<int> selection;
                try {
                    selection = select_forms(next_layer, successors);
                } catch (const Error& e) {
                    std::ostringstream os;
                    os << e.what() << " (t = " << out.times[step] << ", omega = " << omega << ")";
                    fail(ErrorKind::state, os.str());
                }

                // Step (2)(b): one regression per mode of the class.
                QuadraticForm best_form;
                double best_at_x = -std::numeric_limits<double>::infinity();
                int best_mode = -1;
                for (int mbar = 0; mbar < prob.mode_count(); ++mbar) {
                    if (class_of[mbar] != static_cast<int>(c)) continue;
                    const double delta = prob.modes[mbar].discount;
                    const double base = cfg.delta_mode == DeltaMode::general_sign
                                            ? 1.0 + h * std::max(-delta, 0.0)
                                            : 1.0;
                    std::vector<Vec> xs;
                    std::vector<double> ys;
                    xs.reserve(static_cast<std::size_t>(plan.n_x) * plan.n_w);
                    ys.reserve(xs.capacity());
                    for (int i = 0; i < plan.n_x; ++i) {
                        const Vec& x_i = paths.states[c][step][omega_x[i]];
                        if (options.quadrature_targets) {
                            // Integrate the increment out at x_i; the target
                            // is the same for every paired increment sample.
                            std::vector<double> qvals(qnodes.size());
                            for (std::size_t q = 0; q < qnodes.size(); ++q) {
                                const Vec succ = x_i + decomp.underlying_drift(m_rep, x_i) * h +
                                                 decomp.modes[m_rep].sbar * (sqh * qnodes[q]);
                                qvals[q] = next_layer[selection[nearest[q]]](succ);
                            }
                            double y = -std::numeric_limits<double>::infinity();
                            for (int uj = 0; uj < prob.control_count(); ++uj) {
                                const Vec& u = prob.controls[uj];
                                const Vec g = decomp.residual_drift(prob, mbar, x_i, u);
                                double acc = 0.0;
                                for (std::size_t q = 0; q < qnodes.size(); ++q)
                                    acc += qwts[q] * qvals[q] *
                                           (base + sqh * upwind_weight(g, qnodes[q]) + p2_nodes[mbar][q]);
                                const double numer = acc + h * prob.running_reward(mbar, x_i, u);
                                const double denom = step_denominator(cfg, prob, decomp, mbar, u, x_i);
                                y = std::max(y, numer / denom);
                            }
                            for (int j = 0; j < plan.n_w; ++j) {
                                xs.push_back(x_i);
                                ys.push_back(y);
                            }
                        } else {
                            for (int j = 0; j < plan.n_w; ++j) {
                                const Vec succ = x_i + decomp.underlying_drift(m_rep, x_i) * h +
                                                 decomp.modes[m_rep].sbar * w_samples[j];
                                const double qval = next_layer[selection[j]](succ);
                                double y = -std::numeric_limits<double>::infinity();
                                for (int uj = 0; uj < prob.control_count(); ++uj) {
                                    const Vec& u = prob.controls[uj];
                                    const Vec g = decomp.residual_drift(prob, mbar, x_i, u);
                                    const double weight = base +
                                                          sqh * upwind_weight(g, w_samples[j] / sqh) +
                                                          p2_samples[mbar][j];
                                    const double numer =
                                        qval * weight + h * prob.running_reward(mbar, x_i, u);
                                    const double denom =
                                        step_denominator(cfg, prob, decomp, mbar, u, x_i);
                                    y = std::max(y, numer / denom);
                                }
                                xs.push_back(x_i);
                                ys.push_back(y);
                            }
                        }
                    }
                    std::ostringstream ctx;
                    ctx << "(t = " << out.times[step] << ", omega = " << omega
                        << ", mode = " << prob.modes[mbar].id << ")";
                    const RegressionResult reg = regress_quadratic(xs, ys, d, ctx.str());
                    out.max_regression_rms[step] = std::max(out.max_regression_rms[step], reg.residual_rms);

                    // Step (2)(c): keep the form that is best at x_t.
                    const double at_x = reg.form(x_t);
                    if (at_x > best_at_x) {
                        best_at_x = at_x;
                        best_form = reg.form;
                        best_mode = mbar;
                    }
                }

                bool duplicate = false;
                for (const QuadraticForm& z : layer)
                    if (forms_equal(z, best_form)) {
                        duplicate = true;
                        break;
                    }
                if (!duplicate) {
                    layer.push_back(best_form);
                    prov.push_back({omega, best_mode, static_cast<int>(c)});
                }
            }
        }
        if (layer.size() > cardinality_cap)
            fail(ErrorKind::state, "solve_maxplus: layer cardinality bound violated");
    }
    return out;
}

std::string maxplus_to_json(const MaxPlusValue& value, const ControlProblem& prob, const SchemeConfig& cfg,
                            const SamplePlan& plan) {
    json root;
    root["problem"] = prob.name;
    root["d"] = prob.dim_x;
    root["T"] = prob.horizon;
    root["h"] = cfg.h;
    root["k"] = cfg.k;
    root["variant"] = to_string(cfg.variant);
    root["seed"] = plan.seed;
    root["n_in"] = plan.n_in;
    root["n_x"] = plan.n_x;
    root["n_w"] = plan.n_w;
    root["warnings"] = value.warnings;
    root["layers"] = json::array();
    for (std::size_t i = 0; i < value.times.size(); ++i) {
        json layer;
        layer["t"] = value.times[i];
        layer["forms"] = json::array();
        for (std::size_t f = 0; f < value.layers[i].size(); ++f) {
            const QuadraticForm& z = value.layers[i][f];
            json jf;
            jf["Q"] = json::array();
            for (int r = 0; r < z.Q.rows(); ++r)
                for (int col = 0; col < z.Q.cols(); ++col) jf["Q"].push_back(z.Q(r, col));
            jf["b"] = json::array();
            for (int r = 0; r < z.b.size(); ++r) jf["b"].push_back(z.b[r]);
            jf["c"] = z.c;
            if (f < value.provenance[i].size()) {
                jf["omega"] = value.provenance[i][f].omega;
                jf["mode"] = value.provenance[i][f].mode;
            }
            layer["forms"].push_back(std::move(jf));
        }
        root["layers"].push_back(std::move(layer));
    }
    return root.dump(2);
}

MaxPlusValue maxplus_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorKind::config, std::string("forms file: parse error: ") + e.what());
    }
    MaxPlusValue out;
    try {
        const int d = root.at("d").get<int>();
        for (const json& layer : root.at("layers")) {
            out.times.push_back(layer.at("t").get<double>());
            std::vector<QuadraticForm> forms;
            std::vector<FormProvenance> prov;
            for (const json& jf : layer.at("forms")) {
                Mat Q(d, d);
                const json& jq = jf.at("Q");
                for (int r = 0; r < d; ++r)
                    for (int c = 0; c < d; ++c) Q(r, c) = jq.at(r * d + c).get<double>();
                Vec b(d);
                for (int r = 0; r < d; ++r) b[r] = jf.at("b").at(r).get<double>();
                forms.emplace_back(Q, b, jf.at("c").get<double>());
                prov.push_back({jf.value("omega", -1), jf.value("mode", -1), -1});
            }
            out.layers.push_back(std::move(forms));
            out.provenance.push_back(std::move(prov));
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::config, std::string("forms file: ") + e.what());
    }
    return out;
}

}  // namespace hjb
