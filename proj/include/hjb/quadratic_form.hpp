#pragma once

#include "hjb/types.hpp"

#include <vector>

namespace hjb {

/// Concave quadratic q(x) = 1/2 x'Qx + b.x + c with Q symmetric negative
/// semidefinite. These are the max-plus basis functions: a value function
/// layer is the pointwise max of a finite set of them.
struct QuadraticForm {
    Mat Q;
    Vec b;
    double c = 0.0;

    QuadraticForm() = default;
    QuadraticForm(Mat Q_, Vec b_, double c_);

    int dim() const { return static_cast<int>(b.size()); }
    double operator()(const Vec& x) const;

    Vec gradient(const Vec& x) const { return Q * x + b; }

    /// Largest eigenvalue of Q; must stay <= 1e-9 for a valid form.
    double max_curvature() const;
};

/// Symmetrize and clamp positive eigenvalues of Q to zero (minimal
/// Frobenius-distance projection onto the negative semidefinite cone).
Mat project_nsd(const Mat& Q);

/// Pointwise max over a set of forms; throws on an empty set.
double max_over_forms(const std::vector<QuadraticForm>& forms, const Vec& x);

/// Index of the first form attaining the max (ties -> lowest index).
int argmax_form(const std::vector<QuadraticForm>& forms, const Vec& x);

}  // namespace hjb
