#pragma once

#include "hjb/types.hpp"

namespace hjb {

/// Coefficients of the even-power replacement polynomial of index k:
///   c_k = 1 / ((4k+2) E[N^(4k+2)]),  d_k = 1 / (4k+2),
/// with N standard normal, so E[N^(4k+2)] = (4k+1)!!.
struct MomentCoeffs {
    double c;
    double d;
};

/// Supported for 0 <= k <= 7 (the double factorial stays in 64-bit range
/// and c_k keeps useful magnitude); larger k is a configuration error.
MomentCoeffs poly2_coefficients(int k);

/// Gaussian even moment E[N^(2m)] = (2m-1)!! as a double, m <= 15.
double gaussian_even_moment(int m);

/// Second-order replacement weight
///   P2_{Sigma,k}(w) = sum_j |Sigma_.j|^2 ( c_k ([Sigma'w]_j/|Sigma_.j|)^(4k+2) - d_k ),
/// with the convention that columns with |Sigma_.j| ~ 0 contribute zero.
/// Always >= -tr(Sigma Sigma') / (4k+2), and E[P2(N)] = 0 for N ~ N(0,I).
double second_order_weight(const Mat& Sigma, int k, const Vec& w);

/// Upwind first-order weight P1_g(w) = 2 (g+ . w+  +  g- . w-); nonnegative.
double upwind_weight(const Vec& g, const Vec& w);

/// Closed form E[P1_g(h^-1 W_h)] = sqrt(2/(pi h)) * sum_i |g_i| for W_h ~ N(0, hI).
double upwind_weight_mean(const Vec& g, double h);

/// Derivative weights of the plain probabilistic scheme, degree 1 and 2:
///   P1(w) = sigma'^-1 h^-1 w,
///   P2(w) = sigma'^-1 h^-2 (w w' - h I) sigma^-1,
/// where sigma is the (invertible) underlying diffusion factor at the point.
Vec gradient_weight(const Mat& sigma_underlying, double h, const Vec& w);
Mat hessian_weight(const Mat& sigma_underlying, double h, const Vec& w);

/// Total multiplier of the simulated payoff inside the one-step numerator:
///   1 + h P1_g(h^-1/2 w_scaled) + P2_{Sigma,k}(w_scaled),
/// with w_scaled = h^-1/2 (Brownian increment). Bounded below by
/// 1 - tr(Sigma Sigma')/(4k+2), hence nonnegative when that trace <= 4k+2.
double composite_weight(const Vec& g, const Mat& Sigma, int k, double h, const Vec& w_scaled);

}  // namespace hjb
