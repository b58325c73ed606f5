#pragma once

#include "hjb/problem.hpp"
#include "hjb/types.hpp"

#include <vector>

namespace hjb {

/// Per-mode split of the Hamiltonian into the generator of an uncontrolled
/// diffusion plus a residual: underlying drift fbar and factor sbar with
/// a = sbar sbar', residual diffusion factor Sigma(x,u) (d x l, l <= d) with
///   sbar Sigma Sigma' sbar' + a = sigma sigma',
/// and residual drift g(x,u) with fbar + sbar g = f.
struct ModeDecomposition {
    Mat sbar;          // invertible d x d
    Mat sbar_inv;
    Mat drift_linear;  // fbar(x) = drift_linear x + drift_const
    Vec drift_const;
    Mat a;             // sbar sbar'
    Mat Sigma;         // d x l, zero columns eliminated
    int rank = 0;      // l
};

struct Decomposition {
    std::vector<ModeDecomposition> modes;
    std::vector<int> projection;  // mode -> shared-generator class (default identity)
    double a_bar = 0.0;           // 1.05 * max tr(Sigma Sigma') over the audit grid

    const ModeDecomposition& at(int m) const { return modes.at(m); }

    Vec underlying_drift(int m, const Vec& x) const {
        return modes[m].drift_linear * x + modes[m].drift_const;
    }
    /// Residual drift g(x,u) = sbar^-1 (f(x,u) - fbar(x)).
    Vec residual_drift(const ControlProblem& prob, int m, const Vec& x, const Vec& u) const;
};

/// Optional explicit underlying choice; empty fields mean the default rule
/// (sbar = eps I with the largest admissible eps shrunk by 1%, fbar = 0).
struct UnderlyingChoice {
    std::optional<Mat> sigma;
    std::optional<Vec> drift_const;
    std::optional<Mat> drift_linear;
};

/// Builds the decomposition, validating on the problem's audit grid that
/// a <= sigma sigma' in the Loewner order (smallest eigenvalue of the
/// difference >= -1e-10) and factoring the residual by Cholesky with zero
/// columns eliminated. The problem's own `underlying` override, when
/// present, wins over the default rule; `choice` wins over both.
Decomposition build_decomposition(const ControlProblem& prob, const UnderlyingChoice& choice = {});

/// Smallest k >= 0 with a_bar <= 4k+2 (the weight index that makes the
/// one-step operator monotone).
int min_k(const Decomposition& decomp);

/// Residual first-order term G1 = (sbar g).p at (m, x, u).
double residual_drift_term(const Decomposition& decomp, const ControlProblem& prob, int m, const Vec& x,
                           const Vec& p, const Vec& u);

/// Residual second-order term G2 = 1/2 tr(sbar Sigma Sigma' sbar' Gamma).
double residual_diffusion_term(const Decomposition& decomp, int m, const Mat& Gamma);

}  // namespace hjb
