#pragma once

#include "hjb/types.hpp"

namespace hjb {

/// One-dimensional rule for E[f(Z)] with Z standard normal:
/// E[f(Z)] ~= sum_i weights[i] * f(nodes[i]).
struct GaussRule {
    Vec nodes;
    Vec weights;
};

/// Probabilists' Gauss-Hermite rule with n nodes; exact for polynomials of
/// degree <= 2n-1 against the standard normal density.
GaussRule gauss_hermite(int n);

/// Gauss rule for the half-line: integral_0^inf f(x) phi(x) dx with phi the
/// standard normal density, n positive nodes, weights summing to 1/2.
/// Exact for polynomials of degree <= 2n-1. Built from Hermite-modified
/// moments (well conditioned, unlike raw power moments).
GaussRule gauss_half_normal(int n);

/// Two-sided rule assembled from gauss_half_normal: 2n nodes symmetric about
/// zero, no node at the origin. Exact for piecewise polynomials of degree
/// <= 2n-1 with a single break at zero, which is what the upwind weight
/// requires.
GaussRule gauss_split_normal(int n);

/// Analytic half-normal moment E[Z^p 1_{Z>0}] for a standard normal Z.
double half_normal_moment(int p);

}  // namespace hjb
