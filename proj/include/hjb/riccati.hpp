#pragma once

#include "hjb/problem.hpp"
#include "hjb/types.hpp"

#include <vector>

namespace hjb {

/// Quadratic value closed form v(t,x) = 1/2 x'P(t)x + b(t).x + c(t) of a
/// single-mode LQ problem, integrated backward with classical RK4.
struct RiccatiSolution {
    std::vector<double> times;
    std::vector<Mat> P;
    std::vector<Vec> b;
    std::vector<double> c;

    double value(double t, const Vec& x) const;
    Vec gradient(double t, const Vec& x) const;
    const Mat& curvature(double t) const;

    int time_index(double t) const;
};

/// Backward integration of the Riccati system induced by pointwise
/// maximization over the continuum control. Requires an LQ mode: affine
/// drift, constant sigma and discount, jointly concave quadratic reward with
/// strictly concave control block. Throws hjb::Error otherwise, and reports
/// a blow-up (with time stamp) if P leaves the negative semidefinite cone.
RiccatiSolution riccati_solve(const ControlProblem& prob, int mode, double time_step);

/// HJB residual dv/dt + H(x, v, Dv, D^2v) of the Riccati path at an interior
/// node time, with space derivatives analytic in (P, b, c), the time
/// derivative from a fourth-order finite-difference stencil on the stored
/// path, and the Hamiltonian maximized in closed form over the continuum
/// control. O(time_step^4) for a correct integration.
double riccati_residual(const ControlProblem& prob, int mode, const RiccatiSolution& sol, int time_index,
                        const Vec& x);

/// Closed-form continuum-control Hamiltonian of an LQ mode.
double lq_hamiltonian(const ControlProblem& prob, int mode, const HamiltonianPoint& pt);

}  // namespace hjb
