#include "hjb/quadrature.hpp"

#include <cmath>
#include <vector>

namespace hjb {

namespace {

// Golub-Welsch: nodes/weights from the three-term recurrence coefficients
// (alpha_i, beta_i) of the orthogonal polynomials of the target measure.
// beta_0 holds the total mass of the measure.
GaussRule golub_welsch(const Vec& alpha, const Vec& beta) {
    const int n = static_cast<int>(alpha.size());
    Mat J = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        J(i, i) = alpha[i];
        if (i + 1 < n) {
            const double off = std::sqrt(beta[i + 1]);
            J(i, i + 1) = off;
            J(i + 1, i) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    GaussRule rule;
    rule.nodes = es.eigenvalues();
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = beta[0] * v0 * v0;
    }
    return rule;
}

// Gauss-Legendre rule on [-1, 1] (alpha_k = 0, beta_k = k^2/(4k^2-1)).
GaussRule gauss_legendre(int n) {
    Vec alpha = Vec::Zero(n);
    Vec beta(n);
    beta[0] = 2.0;
    for (int i = 1; i < n; ++i) beta[i] = i * i / (4.0 * i * i - 1.0);
    return golub_welsch(alpha, beta);
}

}  // namespace

GaussRule gauss_hermite(int n) {
    if (n < 1 || n > 80) fail(ErrorKind::config, "gauss_hermite: need 1 <= n <= 80");
    Vec alpha = Vec::Zero(n);
    Vec beta(n);
    beta[0] = 1.0;  // total mass of N(0,1)
    for (int i = 1; i < n; ++i) beta[i] = static_cast<double>(i);
    return golub_welsch(alpha, beta);
}

double half_normal_moment(int p) {
    if (p < 0) fail(ErrorKind::config, "half_normal_moment: need p >= 0");
    // E[Z^p 1_{Z>0}] = 2^(p/2 - 1) Gamma((p+1)/2) / sqrt(pi)
    return std::exp((0.5 * p - 1.0) * std::log(2.0) + std::lgamma(0.5 * (p + 1))) / std::sqrt(M_PI);
}

GaussRule gauss_half_normal(int n) {
    if (n < 1 || n > 40) fail(ErrorKind::config, "gauss_half_normal: need 1 <= n <= 40");
    // Discretized Stieltjes procedure: recurrence coefficients of the
    // orthogonal polynomials of the half-normal measure from inner products
    // on a dense composite Gauss-Legendre rule. The support is truncated at
    // 12 standard deviations (tail mass ~ 5e-32).
    constexpr int kPanels = 10;
    constexpr int kPerPanel = 32;
    constexpr double kCut = 12.0;
    const GaussRule leg = gauss_legendre(kPerPanel);
    const int m = kPanels * kPerPanel;
    Vec xs(m), ws(m);
    const double phi_norm = 1.0 / std::sqrt(2.0 * M_PI);
    for (int p = 0; p < kPanels; ++p) {
        const double a = kCut * p / kPanels, b = kCut * (p + 1) / kPanels;
        for (int i = 0; i < kPerPanel; ++i) {
            const int idx = p * kPerPanel + i;
            xs[idx] = 0.5 * (a + b) + 0.5 * (b - a) * leg.nodes[i];
            ws[idx] = 0.5 * (b - a) * leg.weights[i] * phi_norm * std::exp(-0.5 * xs[idx] * xs[idx]);
        }
    }
    Vec alpha(n), beta(n);
    Vec p_prev = Vec::Zero(m), p_cur = Vec::Ones(m);
    double norm_prev = 1.0;
    for (int k = 0; k < n; ++k) {
        const double norm_cur = ws.dot(p_cur.cwiseProduct(p_cur));
        alpha[k] = ws.dot(xs.cwiseProduct(p_cur).cwiseProduct(p_cur)) / norm_cur;
        beta[k] = k == 0 ? ws.sum() : norm_cur / norm_prev;
        Vec p_next = (xs.array() - alpha[k]).matrix().cwiseProduct(p_cur) -
                     (k == 0 ? 0.0 : beta[k]) * p_prev;
        p_prev = p_cur;
        p_cur = p_next;
        norm_prev = norm_cur;
    }
    GaussRule rule = golub_welsch(alpha, beta);
    for (int i = 0; i < n; ++i)
        if (!(rule.nodes[i] > 0.0))
            fail(ErrorKind::numeric, "gauss_half_normal: nonpositive node, rule size too large");
    return rule;
}

GaussRule gauss_split_normal(int n) {
    GaussRule half = gauss_half_normal(n);
    GaussRule rule;
    rule.nodes.resize(2 * n);
    rule.weights.resize(2 * n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = -half.nodes[n - 1 - i];
        rule.weights[i] = half.weights[n - 1 - i];
        rule.nodes[n + i] = half.nodes[i];
        rule.weights[n + i] = half.weights[i];
    }
    return rule;
}

}  // namespace hjb
