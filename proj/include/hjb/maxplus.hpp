#pragma once

#include "hjb/quadratic_form.hpp"
#include "hjb/schemes.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hjb {

/// Sampling sizes of the backward max-plus sweep: N_in simulated paths,
/// N_x state and N_w increment subsamples per step (N_x <= N_in), a seed,
/// a mode projection onto shared-generator classes, and the law of X(0).
struct SamplePlan {
    int n_in = 500;
    int n_x = 25;
    int n_w = 25;
    std::uint64_t seed = 1;
    std::vector<int> projection;  // empty means identity
    Vec init_lo, init_hi;         // uniform box sampler for X(0)
};

struct FormProvenance {
    int omega = 0;
    int mode = 0;   // originating mode index (mbar)
    int klass = 0;  // projection class
};

/// Value function as max of concave quadratics per layer time.
struct MaxPlusValue {
    std::vector<double> times;
    std::vector<std::vector<QuadraticForm>> layers;
    std::vector<std::vector<FormProvenance>> provenance;
    std::vector<double> max_regression_rms;  // worst fit residual per layer
    std::vector<std::string> warnings;

    int time_index(double t) const;
    double value(double t, const Vec& x) const;
    std::size_t max_layer_size() const;
};

/// One backward step applied to an increment payoff at state x:
///   max over controls of (D0 + h {l + D1 + D2}) / denominator,
/// the D's being plain expectations of the payoff times the weight
/// polynomials over the increment distribution.
double payoff_step(const SchemeConfig& cfg, const ControlProblem& prob, const Decomposition& decomp,
                   const Engine& engine, int mode, double t, const Vec& x, const IncrementFn& payoff);

/// Monotone finite-sample operator for the distributivity check: max of
/// linear-fractional pieces with nonnegative weights and positive
/// denominators over values at the sampled increments.
struct FiniteSampleOperator {
    struct Piece {
        Vec weights;  // nonnegative, one per increment sample
        double offset = 0.0;
        double denom = 1.0;
    };
    std::vector<Piece> pieces;

    double operator()(const Vec& values) const;
};

struct DistributivityReport {
    double lhs = 0.0;       // G applied to the pointwise max
    double best_rhs = 0.0;  // best selection
    double abs_gap = 0.0;
    bool brute_forced = false;
    std::size_t selections_checked = 0;
};

/// Verifies G(max_z phi(., z)) = max over selections zbar of G(phi(., zbar)):
/// brute force over all |Z|^|W| selections when that count is <= 10^4,
/// otherwise the greedy pointwise-argmax selection, which attains the sup
/// for a monotone finite-sample operator.
DistributivityReport check_distributivity(const FiniteSampleOperator& G, const Mat& phi_values);

/// Argmax form index at each successor state; ties -> lowest index.
/// Post-checks that the selection attains the layer max everywhere.
std::vector<int> select_forms(const std::vector<QuadraticForm>& forms, const std::vector<Vec>& successors);

struct RegressionResult {
    QuadraticForm form;
    double residual_rms = 0.0;
};

/// Least squares on the monomial basis {1, x_i, x_i x_j (i<=j)}, with ridge
/// fallback on rank deficiency; the fitted curvature is symmetrized and
/// clamped to the negative semidefinite cone. `context` labels errors.
RegressionResult regress_quadratic(const std::vector<Vec>& xs, const std::vector<double>& ys, int dim,
                                   const std::string& context = {});

struct MaxPlusOptions {
    /// Per-sample targets: true integrates the increment out by quadrature
    /// (with the selection extended to off-sample nodes by nearest sampled
    /// increment); false uses the raw one-sample surrogate.
    bool quadrature_targets = true;
};

/// The backward max-plus sweep (terminal forms, product resampling,
/// selection, per-mode regression, per-class max) producing the quadratic
/// form sets Z_t for every layer time.
MaxPlusValue solve_maxplus(const ControlProblem& prob, const Decomposition& decomp, const SchemeConfig& cfg,
                           const Engine& engine, const SamplePlan& plan, const MaxPlusOptions& options = {});

std::string maxplus_to_json(const MaxPlusValue& value, const ControlProblem& prob, const SchemeConfig& cfg,
                            const SamplePlan& plan);
MaxPlusValue maxplus_from_json(const std::string& text);

}  // namespace hjb
