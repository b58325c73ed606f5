#pragma once

#include "hjb/quadrature.hpp"
#include "hjb/types.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hjb {

/// Scalar-valued integrand of the scaled increment: f(Z) with W_h = sqrt(h) Z.
using IncrementFn = std::function<double(const Vec&)>;

struct ExpectStats {
    double value = 0.0;
    double std_error = 0.0;  // zero for deterministic rules
};

/// Expectation engine over the Euler increment W_h ~ N(0, h I_d).
///
/// All engines expose the same node view: standardized nodes Z_i with
/// weights p_i so that E[f(W_h)] = sum_i p_i f(sqrt(h) Z_i). Monte Carlo
/// pre-draws its sample table at construction, so estimates depend only on
/// (seed, N) and never on evaluation order.
class Engine {
public:
    enum class Kind { monte_carlo, quadrature, analytic, two_point };

    static Engine monte_carlo(int dim, int n_samples, std::uint64_t seed);
    /// Tensor Gauss rule; `split` switches every axis to the two-sided
    /// half-normal rule, exact for integrands with a kink at zero per axis.
    static Engine quadrature(int dim, int nodes_per_dim, bool split = true);
    /// Exact Gaussian / half-Gaussian moment evaluation for the polynomial
    /// integrands of the estimators, realized as a high-order split rule.
    static Engine analytic(int dim);
    /// Increment discretized as +-sqrt(h) per axis with probability 1/2
    /// (the Markov-chain / upwind correspondence).
    static Engine two_point(int dim);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    std::size_t node_count() const { return weights_.size(); }
    const std::vector<Vec>& standardized_nodes() const { return nodes_; }
    const std::vector<double>& node_weights() const { return weights_; }
    std::string describe() const;

    /// E[f(W_h)] with W_h ~ N(0, h I).
    double expect(double h, const IncrementFn& f) const;
    ExpectStats expect_stats(double h, const IncrementFn& f) const;

private:
    Engine(Kind kind, int dim) : kind_(kind), dim_(dim) {}

    Kind kind_;
    int dim_;
    int order_ = 0;
    bool split_ = false;
    std::uint64_t seed_ = 0;
    std::vector<Vec> nodes_;
    std::vector<double> weights_;
};

/// Euler step of the uncontrolled diffusion:
///   S(x, W) = x + fbar(x) h + sbar(x) W,
/// with constant underlying factor sbar and affine underlying drift fbar.
struct EulerStepper {
    Mat drift_linear;  // fbar(x) = drift_linear x + drift_const
    Vec drift_const;
    Mat sigma;  // invertible d x d

    static EulerStepper constant(const Mat& sigma, const Vec& fbar_const);

    int dim() const { return static_cast<int>(drift_const.size()); }
    Vec drift(const Vec& x) const { return drift_linear * x + drift_const; }
    Vec step(const Vec& x, double h, const Vec& w) const { return x + drift(x) * h + sigma * w; }
};

/// Space-time test function with analytic derivatives, used to build exact
/// consistency targets without numerical differentiation.
struct TestFunction {
    std::string name;
    std::function<double(double, const Vec&)> value;
    std::function<double(double, const Vec&)> dt;
    std::function<Vec(double, const Vec&)> grad;
    std::function<Mat(double, const Vec&)> hess;
};

/// Registry of C^4-bounded test functions: sin_exp, gauss_exp, linear, quad.
const TestFunction& test_function(const std::string& name, int dim);
std::vector<std::string> test_function_names();

using SpaceFn = std::function<double(const Vec&)>;

/// E[phi(t+h, S(x, W_h))]: plain conditional expectation after one step.
double estimate_d0(const Engine& engine, const EulerStepper& stepper, double t, const Vec& x, double h,
                   const SpaceFn& phi_next);

/// E[(phi(t+h, S(x, W_h)) - anchor) P1_g(h^-1 W_h)]: upwind estimate of
/// (sbar g) . Dv. The scheme passes anchor = v(t,x) or 0.
double estimate_d1_upwind(const Engine& engine, const EulerStepper& stepper, const Vec& g, double t,
                          const Vec& x, double h, const SpaceFn& phi_next, double anchor);

/// h^-1 E[phi(t+h, S(x, W_h)) P2_{Sigma,k}(h^-1/2 W_h)]: estimate of
/// (1/2) tr(sbar Sigma Sigma' sbar' D^2 v).
double estimate_d2_poly(const Engine& engine, const EulerStepper& stepper, const Mat& Sigma, int k, double t,
                        const Vec& x, double h, const SpaceFn& phi_next);

/// Derivative-weight estimates of the gradient / Hessian of e^{hL} phi.
Vec estimate_gradient(const Engine& engine, const EulerStepper& stepper, double t, const Vec& x, double h,
                    const SpaceFn& phi_next);
Mat estimate_hessian(const Engine& engine, const EulerStepper& stepper, double t, const Vec& x, double h,
                    const SpaceFn& phi_next);

struct ConsistencyRow {
    double h;
    double estimate;
    double target;
    double error;
};

struct ConsistencyReport {
    std::string estimator;
    std::string test_function;
    std::string engine;
    std::vector<ConsistencyRow> rows;
    double fitted_order = 0.0;  // least-squares slope of log(error) vs log(h)
    bool exact = false;         // all errors at machine level; order fit skipped
};

struct ConsistencySetup {
    EulerStepper stepper;
    Vec g;
    Mat Sigma;
    int k = 0;
    double t = 0.0;
    /// Error per h is the sup over these states; a panel keeps an accidental
    /// cancellation of the leading error term at one point from spoiling the
    /// order fit. Empty means the default panel.
    std::vector<Vec> eval_points;
};

std::vector<Vec> default_eval_panel(int dim);

/// Measures estimator error against the analytic target on each h in the
/// list and fits the empirical order. Estimator ids: d0, d1, d2, ftw1, ftw2.
ConsistencyReport consistency_study(const std::string& estimator, const std::string& test_fn,
                                    const std::vector<double>& h_list, const Engine& engine,
                                    const ConsistencySetup& setup);

/// Least-squares slope of log(err) vs log(h); pairs with err below `floor`
/// are dropped. Returns false if fewer than 2 usable points remain.
bool fit_order(const std::vector<double>& hs, const std::vector<double>& errs, double& slope,
               double floor = 1e-14);

}  // namespace hjb
