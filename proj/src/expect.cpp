#include "hjb/expect.hpp"

#include "hjb/weights.hpp"

#include <cmath>
#include <map>
#include <random>

namespace hjb {

namespace {

std::vector<Vec> tensor_nodes(const std::vector<GaussRule>& axes, std::vector<double>& weights_out) {
    std::size_t total = 1;
    for (const auto& r : axes) total *= static_cast<std::size_t>(r.nodes.size());
    const int d = static_cast<int>(axes.size());
    std::vector<Vec> nodes;
    nodes.reserve(total);
    weights_out.clear();
    weights_out.reserve(total);
    std::vector<int> idx(d, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Vec z(d);
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
            z[a] = axes[a].nodes[idx[a]];
            w *= axes[a].weights[idx[a]];
        }
        nodes.push_back(std::move(z));
        weights_out.push_back(w);
        for (int a = d - 1; a >= 0; --a) {
            if (++idx[a] < axes[a].nodes.size()) break;
            idx[a] = 0;
        }
    }
    return nodes;
}

constexpr int kAnalyticOrder = 16;  // per side; exact for the polynomial families in use

}  // namespace

Engine Engine::monte_carlo(int dim, int n_samples, std::uint64_t seed) {
    if (dim < 1) fail(ErrorKind::config, "engine: dim must be positive");
    if (n_samples < 1) fail(ErrorKind::config, "engine: need at least one sample");
    Engine e(Kind::monte_carlo, dim);
    e.order_ = n_samples;
    e.seed_ = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    e.nodes_.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        Vec z(dim);
        for (int a = 0; a < dim; ++a) z[a] = normal(rng);
        e.nodes_.push_back(std::move(z));
    }
    e.weights_.assign(n_samples, 1.0 / n_samples);
    return e;
}

Engine Engine::quadrature(int dim, int nodes_per_dim, bool split) {
    if (dim < 1 || dim > 4) fail(ErrorKind::config, "engine: quadrature supports 1 <= dim <= 4");
    Engine e(Kind::quadrature, dim);
    e.order_ = nodes_per_dim;
    e.split_ = split;
    GaussRule axis = split ? gauss_split_normal(nodes_per_dim) : gauss_hermite(nodes_per_dim);
    std::vector<GaussRule> axes(dim, axis);
    e.nodes_ = tensor_nodes(axes, e.weights_);
    return e;
}

Engine Engine::analytic(int dim) {
    if (dim < 1 || dim > 4) fail(ErrorKind::config, "engine: analytic supports 1 <= dim <= 4");
    Engine e(Kind::analytic, dim);
    e.order_ = kAnalyticOrder;
    e.split_ = true;
    std::vector<GaussRule> axes(dim, gauss_split_normal(kAnalyticOrder));
    e.nodes_ = tensor_nodes(axes, e.weights_);
    return e;
}

Engine Engine::two_point(int dim) {
    if (dim < 1 || dim > 10) fail(ErrorKind::config, "engine: two_point supports 1 <= dim <= 10");
    Engine e(Kind::two_point, dim);
    GaussRule axis;
    axis.nodes = Vec(2);
    axis.nodes << -1.0, 1.0;
    axis.weights = Vec(2);
    axis.weights << 0.5, 0.5;
    std::vector<GaussRule> axes(dim, axis);
    e.nodes_ = tensor_nodes(axes, e.weights_);
    return e;
}

std::string Engine::describe() const {
    switch (kind_) {
        case Kind::monte_carlo:
            return "mc(N=" + std::to_string(order_) + ",seed=" + std::to_string(seed_) + ")";
        case Kind::quadrature:
            return std::string("quad(n=") + std::to_string(order_) + (split_ ? ",split" : ",full") + ")";
        case Kind::analytic:
            return "analytic";
        case Kind::two_point:
            return "two_point";
    }
    return "?";
}

double Engine::expect(double h, const IncrementFn& f) const {
    if (h <= 0.0) fail(ErrorKind::domain, "engine: need h > 0");
    const double sqh = std::sqrt(h);
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const double v = f(sqh * nodes_[i]);
        if (!std::isfinite(v))
            fail(ErrorKind::domain, "engine: non-finite integrand at node " + std::to_string(i));
        acc += weights_[i] * v;
    }
    return acc;
}

ExpectStats Engine::expect_stats(double h, const IncrementFn& f) const {
    const double sqh = std::sqrt(h);
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const double v = f(sqh * nodes_[i]);
        if (!std::isfinite(v))
            fail(ErrorKind::domain, "engine: non-finite integrand at node " + std::to_string(i));
        acc += weights_[i] * v;
        acc2 += weights_[i] * v * v;
    }
    ExpectStats s;
    s.value = acc;
    if (kind_ == Kind::monte_carlo && nodes_.size() > 1) {
        const double var = std::max(0.0, acc2 - acc * acc);
        s.std_error = std::sqrt(var / (static_cast<double>(nodes_.size()) - 1.0));
    }
    return s;
}

EulerStepper EulerStepper::constant(const Mat& sigma, const Vec& fbar_const) {
    EulerStepper s;
    const int d = static_cast<int>(fbar_const.size());
    s.drift_linear = Mat::Zero(d, d);
    s.drift_const = fbar_const;
    s.sigma = sigma;
    return s;
}

double estimate_d0(const Engine& engine, const EulerStepper& stepper, double t, const Vec& x, double h,
                   const SpaceFn& phi_next) {
    (void)t;
    return engine.expect(h, [&](const Vec& w) { return phi_next(stepper.step(x, h, w)); });
}

double estimate_d1_upwind(const Engine& engine, const EulerStepper& stepper, const Vec& g, double t,
                          const Vec& x, double h, const SpaceFn& phi_next, double anchor) {
    (void)t;
    return engine.expect(h, [&](const Vec& w) {
        return (phi_next(stepper.step(x, h, w)) - anchor) * upwind_weight(g, w / h);
    });
}

double estimate_d2_poly(const Engine& engine, const EulerStepper& stepper, const Mat& Sigma, int k, double t,
                        const Vec& x, double h, const SpaceFn& phi_next) {
    (void)t;
    const double sqh = std::sqrt(h);
    return engine.expect(h, [&](const Vec& w) {
               return phi_next(stepper.step(x, h, w)) * second_order_weight(Sigma, k, w / sqh);
           }) /
           h;
}

Vec estimate_gradient(const Engine& engine, const EulerStepper& stepper, double t, const Vec& x, double h,
                    const SpaceFn& phi_next) {
    (void)t;
    Vec acc = Vec::Zero(stepper.dim());
    const double sqh = std::sqrt(h);
    const auto& nodes = engine.standardized_nodes();
    const auto& wts = engine.node_weights();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Vec w = sqh * nodes[i];
        acc += wts[i] * phi_next(stepper.step(x, h, w)) * gradient_weight(stepper.sigma, h, w);
    }
    return acc;
}

Mat estimate_hessian(const Engine& engine, const EulerStepper& stepper, double t, const Vec& x, double h,
                    const SpaceFn& phi_next) {
    (void)t;
    Mat acc = Mat::Zero(stepper.dim(), stepper.dim());
    const double sqh = std::sqrt(h);
    const auto& nodes = engine.standardized_nodes();
    const auto& wts = engine.node_weights();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Vec w = sqh * nodes[i];
        acc += wts[i] * phi_next(stepper.step(x, h, w)) * hessian_weight(stepper.sigma, h, w);
    }
    return acc;
}

bool fit_order(const std::vector<double>& hs, const std::vector<double>& errs, double& slope, double floor) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        if (errs[i] > floor) {
            lx.push_back(std::log(hs[i]));
            ly.push_back(std::log(errs[i]));
        }
    }
    if (lx.size() < 2) return false;
    const double n = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return true;
}

std::vector<Vec> default_eval_panel(int dim) {
    std::vector<Vec> panel;
    for (int j = 0; j < 5; ++j) {
        Vec x(dim);
        for (int a = 0; a < dim; ++a) x[a] = -1.2 + 0.55 * j + 0.2 * a;
        panel.push_back(std::move(x));
    }
    return panel;
}

ConsistencyReport consistency_study(const std::string& estimator, const std::string& test_fn,
                                    const std::vector<double>& h_list, const Engine& engine,
                                    const ConsistencySetup& setup) {
    if (h_list.size() < 3) fail(ErrorKind::config, "consistency_study: need at least 3 step sizes");
    const int d = setup.stepper.dim();
    const TestFunction& fn = test_function(test_fn, d);
    const double t = setup.t;
    const std::vector<Vec> points = setup.eval_points.empty() ? default_eval_panel(d) : setup.eval_points;

    ConsistencyReport report;
    report.estimator = estimator;
    report.test_function = test_fn;
    report.engine = engine.describe();

    const Mat sbar = setup.stepper.sigma;
    for (double h : h_list) {
        SpaceFn phi_next = [&, h](const Vec& y) { return fn.value(t + h, y); };
        ConsistencyRow row{h, 0.0, 0.0, -1.0};
        for (const Vec& x : points) {
            double estimate = 0.0, target = 0.0, error = 0.0;
            if (estimator == "d0") {
                // Lemma-level zero-order consistency: h^-1 (D0 - v) -> dv/dt + L v.
                estimate = (estimate_d0(engine, setup.stepper, t, x, h, phi_next) - fn.value(t, x)) / h;
                const Mat a = sbar * sbar.transpose();
                target = fn.dt(t, x) + 0.5 * (a * fn.hess(t, x)).trace() +
                         setup.stepper.drift(x).dot(fn.grad(t, x));
                error = std::abs(estimate - target);
            } else if (estimator == "d1") {
                estimate =
                    estimate_d1_upwind(engine, setup.stepper, setup.g, t, x, h, phi_next, fn.value(t, x));
                target = (sbar * setup.g).dot(fn.grad(t, x));
                error = std::abs(estimate - target);
            } else if (estimator == "d2") {
                estimate = estimate_d2_poly(engine, setup.stepper, setup.Sigma, setup.k, t, x, h, phi_next);
                target =
                    0.5 *
                    (sbar * setup.Sigma * setup.Sigma.transpose() * sbar.transpose() * fn.hess(t, x)).trace();
                error = std::abs(estimate - target);
            } else if (estimator == "ftw1") {
                Vec est = estimate_gradient(engine, setup.stepper, t, x, h, phi_next);
                Vec tgt = fn.grad(t, x);
                estimate = est.norm();
                target = tgt.norm();
                error = (est - tgt).norm();
            } else if (estimator == "ftw2") {
                Mat est = estimate_hessian(engine, setup.stepper, t, x, h, phi_next);
                Mat tgt = fn.hess(t, x);
                estimate = est.norm();
                target = tgt.norm();
                error = (est - tgt).norm();
            } else {
                fail(ErrorKind::config, "consistency_study: unknown estimator '" + estimator + "'");
            }
            if (error > row.error) row = {h, estimate, target, error};
        }
        report.rows.push_back(row);
    }

    std::vector<double> hs, errs;
    for (const auto& r : report.rows) {
        hs.push_back(r.h);
        errs.push_back(r.error);
    }
    report.exact = !fit_order(hs, errs, report.fitted_order);
    return report;
}

namespace {

TestFunction make_sin_exp(int d) {
    TestFunction f;
    f.name = "sin_exp";
    auto s = [](const Vec& x) { return x.sum(); };
    f.value = [s](double t, const Vec& x) { return std::sin(s(x)) * std::exp(-t); };
    f.dt = [s](double t, const Vec& x) { return -std::sin(s(x)) * std::exp(-t); };
    f.grad = [s, d](double t, const Vec& x) {
        return Vec::Constant(d, std::cos(s(x)) * std::exp(-t)).eval();
    };
    f.hess = [s, d](double t, const Vec& x) {
        return (Mat::Constant(d, d, 1.0) * (-std::sin(s(x)) * std::exp(-t))).eval();
    };
    return f;
}

TestFunction make_gauss_exp(int d) {
    TestFunction f;
    f.name = "gauss_exp";
    f.value = [](double t, const Vec& x) { return std::exp(-0.5 * x.squaredNorm()) * std::exp(-0.5 * t); };
    f.dt = [](double t, const Vec& x) { return -0.5 * std::exp(-0.5 * x.squaredNorm() - 0.5 * t); };
    f.grad = [](double t, const Vec& x) {
        return (-std::exp(-0.5 * x.squaredNorm() - 0.5 * t) * x).eval();
    };
    f.hess = [d](double t, const Vec& x) {
        const double v = std::exp(-0.5 * x.squaredNorm() - 0.5 * t);
        return (v * (x * x.transpose() - Mat::Identity(d, d))).eval();
    };
    return f;
}

TestFunction make_linear(int d) {
    TestFunction f;
    f.name = "linear";
    Vec a(d);
    for (int i = 0; i < d; ++i) a[i] = 1.0 - 0.5 * i;
    f.value = [a](double, const Vec& x) { return a.dot(x) + 0.25; };
    f.dt = [](double, const Vec&) { return 0.0; };
    f.grad = [a](double, const Vec&) { return a; };
    f.hess = [d](double, const Vec&) { return Mat::Zero(d, d).eval(); };
    return f;
}

TestFunction make_quad(int d) {
    TestFunction f;
    f.name = "quad";
    Mat M = -Mat::Identity(d, d);
    for (int i = 0; i + 1 < d; ++i) {
        M(i, i + 1) = 0.25;
        M(i + 1, i) = 0.25;
    }
    Vec b(d);
    for (int i = 0; i < d; ++i) b[i] = 0.5 + 0.25 * i;
    f.value = [M, b](double, const Vec& x) { return 0.5 * x.dot(M * x) + b.dot(x) - 0.75; };
    f.dt = [](double, const Vec&) { return 0.0; };
    f.grad = [M, b](double, const Vec& x) { return (M * x + b).eval(); };
    f.hess = [M](double, const Vec&) { return M; };
    return f;
}

}  // namespace

const TestFunction& test_function(const std::string& name, int dim) {
    static std::map<std::pair<std::string, int>, TestFunction> cache;
    auto it = cache.find({name, dim});
    if (it != cache.end()) return it->second;
    TestFunction fn;
    if (name == "sin_exp")
        fn = make_sin_exp(dim);
    else if (name == "gauss_exp")
        fn = make_gauss_exp(dim);
    else if (name == "linear")
        fn = make_linear(dim);
    else if (name == "quad")
        fn = make_quad(dim);
    else
        fail(ErrorKind::config, "unknown test function '" + name + "'");
    return cache.emplace(std::make_pair(name, dim), std::move(fn)).first->second;
}

std::vector<std::string> test_function_names() { return {"sin_exp", "gauss_exp", "linear", "quad"}; }

}  // namespace hjb
