#pragma once

#include "hjb/schemes.hpp"

#include <vector>

namespace hjb {

/// Rectangular solve window; padding is added around it so that one Euler
/// step from any interior node stays within extrapolation reach at
/// `pad_sigmas` standard deviations of the increment.
struct GridSpec {
    Vec lo, hi;
    std::vector<int> points;  // per axis, on the core window
    double pad_sigmas = 6.0;
    int threads = 1;
};

/// Value layers v(t, x_grid) on the padded grid for t in {0, h, ..., T}.
/// Evaluation is multilinear inside the padded domain and continues the
/// boundary cell's linear model outside it.
class ValueGrid {
public:
    ValueGrid(Vec lo, Vec hi, std::vector<int> points, std::vector<double> times);

    int dim() const { return static_cast<int>(lo_.size()); }
    const std::vector<double>& times() const { return times_; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    const std::vector<int>& points() const { return points_; }
    std::size_t nodes_per_layer() const { return layer_size_; }

    double& at(int time_index, std::size_t flat) { return values_[time_index][flat]; }
    double at(int time_index, std::size_t flat) const { return values_[time_index][flat]; }
    Vec node(std::size_t flat) const;

    /// Interpolated / extrapolated value at grid time t (throws a time-index
    /// error if t is not a layer time).
    double value(double t, const Vec& x) const;
    double value_at_layer(int time_index, const Vec& x) const;

    int time_index(double t) const;

    /// Warnings recorded while solving (quadrature escapes etc.).
    std::vector<std::string> warnings;

private:
    Vec lo_, hi_;
    std::vector<int> points_;
    Vec dx_;
    std::vector<double> times_;
    std::size_t layer_size_;
    std::vector<std::vector<double>> values_;
};

/// Backward iteration of the one-step operator on the padded grid with the
/// terminal reward as data. h must divide the horizon.
ValueGrid solve_grid(const ControlProblem& prob, const Decomposition& decomp, const SchemeConfig& cfg,
                     const Engine& engine, const GridSpec& spec);

struct ConvergenceRow {
    double h;
    double sup_error;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    double fitted_order = 0.0;
    bool order_fitted = false;
};

/// Sup-node error of the grid solution at t = 0 against the Riccati closed
/// form, for each h in the list, on the core window.
ConvergenceStudy convergence_study(const ControlProblem& prob, const Decomposition& decomp,
                                   SchemeConfig cfg, const Engine& engine, GridSpec spec,
                                   const std::vector<double>& h_list, int riccati_mode = 0,
                                   double riccati_dt = 1e-3);

}  // namespace hjb
