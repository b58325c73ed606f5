#include "hjb/weights.hpp"

#include <cmath>
#include <cstdint>

namespace hjb {

namespace {

// (2m-1)!! in exact integer arithmetic; m <= 15 keeps the product < 2^63.
std::uint64_t odd_double_factorial(int m) {
    std::uint64_t acc = 1;
    for (int j = 3; j <= 2 * m - 1; j += 2) acc *= static_cast<std::uint64_t>(j);
    return acc;
}

constexpr double kZeroColumn = 1e-300;

}  // namespace

double gaussian_even_moment(int m) {
    if (m < 0 || m > 15) fail(ErrorKind::config, "gaussian_even_moment: need 0 <= m <= 15");
    if (m == 0) return 1.0;
    return static_cast<double>(odd_double_factorial(m));
}

MomentCoeffs poly2_coefficients(int k) {
    if (k < 0 || k > 7) fail(ErrorKind::config, "poly2_coefficients: need 0 <= k <= 7");
    const double denom = 4.0 * k + 2.0;
    return {1.0 / (denom * gaussian_even_moment(2 * k + 1)), 1.0 / denom};
}

double second_order_weight(const Mat& Sigma, int k, const Vec& w) {
    if (Sigma.size() == 0) return 0.0;
    if (Sigma.rows() != w.size()) fail(ErrorKind::domain, "second_order_weight: Sigma/w dimension mismatch");
    const auto [ck, dk] = poly2_coefficients(k);
    const int power = 4 * k + 2;
    double acc = 0.0;
    for (int j = 0; j < Sigma.cols(); ++j) {
        const double nrm = Sigma.col(j).norm();
        if (nrm < kZeroColumn) continue;  // zero-column convention
        const double z = Sigma.col(j).dot(w) / nrm;
        acc += nrm * nrm * (ck * std::pow(z, power) - dk);
    }
    return acc;
}

double upwind_weight(const Vec& g, const Vec& w) {
    if (g.size() != w.size()) fail(ErrorKind::domain, "upwind_weight: g/w dimension mismatch");
    double acc = 0.0;
    for (int i = 0; i < g.size(); ++i) {
        const double gp = std::max(g[i], 0.0), gm = -std::min(g[i], 0.0);
        const double wp = std::max(w[i], 0.0), wm = -std::min(w[i], 0.0);
        acc += gp * wp + gm * wm;
    }
    return 2.0 * acc;
}

double upwind_weight_mean(const Vec& g, double h) {
    if (h <= 0.0) fail(ErrorKind::domain, "upwind_weight_mean: need h > 0");
    return std::sqrt(2.0 / (M_PI * h)) * g.cwiseAbs().sum();
}

Vec gradient_weight(const Mat& sigma_underlying, double h, const Vec& w) {
    Eigen::FullPivLU<Mat> lu(sigma_underlying.transpose());
    if (!lu.isInvertible()) fail(ErrorKind::numeric, "gradient_weight: singular underlying diffusion");
    return lu.solve(w) / h;
}

Mat hessian_weight(const Mat& sigma_underlying, double h, const Vec& w) {
    const int d = static_cast<int>(w.size());
    Eigen::FullPivLU<Mat> lu(sigma_underlying);
    if (!lu.isInvertible()) fail(ErrorKind::numeric, "hessian_weight: singular underlying diffusion");
    Mat inv = lu.inverse();
    Mat core = (w * w.transpose() - h * Mat::Identity(d, d)) / (h * h);
    return inv.transpose() * core * inv;
}

double composite_weight(const Vec& g, const Mat& Sigma, int k, double h, const Vec& w_scaled) {
    return 1.0 + h * upwind_weight(g, w_scaled / std::sqrt(h)) + second_order_weight(Sigma, k, w_scaled);
}

}  // namespace hjb
