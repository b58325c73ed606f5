#include "hjb/decomp.hpp"

#include <cmath>
#include <sstream>

namespace hjb {

namespace {

// Cholesky of a symmetric positive semidefinite matrix with zero columns
// eliminated: returns the d x l factor with LL' = R and l = numerical rank.
// Pivots below cutoff * (leading pivot) are treated as exact zeros.
Mat cholesky_eliminated(const Mat& R, double cutoff = 1e-12) {
    const int d = static_cast<int>(R.rows());
    Mat L = Mat::Zero(d, d);
    double lead = 0.0;
    std::vector<int> kept;
    for (int j = 0; j < d; ++j) {
        double pivot = R(j, j);
        for (int t = 0; t < j; ++t) pivot -= L(j, t) * L(j, t);
        if (j == 0) lead = std::max(pivot, 0.0);
        lead = std::max(lead, std::abs(pivot));
        if (pivot <= cutoff * lead) continue;  // zero column, eliminated
        const double ljj = std::sqrt(pivot);
        L(j, j) = ljj;
        for (int i = j + 1; i < d; ++i) {
            double s = R(i, j);
            for (int t = 0; t < j; ++t) s -= L(i, t) * L(j, t);
            L(i, j) = s / ljj;
        }
        kept.push_back(j);
    }
    Mat out(d, static_cast<int>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) out.col(c) = L.col(kept[c]);
    return out;
}

}  // namespace

Vec Decomposition::residual_drift(const ControlProblem& prob, int m, const Vec& x, const Vec& u) const {
    return modes[m].sbar_inv * (prob.drift(m, x, u) - underlying_drift(m, x));
}

Decomposition build_decomposition(const ControlProblem& prob, const UnderlyingChoice& choice) {
    const int d = prob.dim_x;
    Decomposition decomp;
    decomp.projection.resize(prob.mode_count());
    for (int m = 0; m < prob.mode_count(); ++m) decomp.projection[m] = m;

    double max_trace = 0.0;
    for (int m = 0; m < prob.mode_count(); ++m) {
        ModeDecomposition md;
        const Mat noise = prob.modes[m].sigma * prob.modes[m].sigma.transpose();

        if (choice.sigma)
            md.sbar = *choice.sigma;
        else if (prob.underlying_sigma)
            md.sbar = *prob.underlying_sigma;
        else {
            // Largest eps with eps^2 I <= sigma sigma', shrunk by 1%.
            Eigen::SelfAdjointEigenSolver<Mat> es(noise, Eigen::EigenvaluesOnly);
            const double lam_min = es.eigenvalues().minCoeff();
            if (lam_min <= 0.0)
                fail(ErrorKind::numeric,
                     "decomposition: sigma sigma' is singular on mode " + prob.modes[m].id +
                         "; no positive definite underlying diffusion fits below it");
            md.sbar = 0.99 * std::sqrt(lam_min) * Mat::Identity(d, d);
        }
        Eigen::FullPivLU<Mat> lu(md.sbar);
        if (!lu.isInvertible())
            fail(ErrorKind::numeric, "decomposition: underlying diffusion factor is singular");
        md.sbar_inv = lu.inverse();
        md.a = md.sbar * md.sbar.transpose();

        md.drift_linear = choice.drift_linear ? *choice.drift_linear : Mat::Zero(d, d);
        if (choice.drift_const)
            md.drift_const = *choice.drift_const;
        else if (prob.underlying_drift)
            md.drift_const = *prob.underlying_drift;
        else
            md.drift_const = Vec::Zero(d);

        const Mat diff = noise - md.a;
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (diff + diff.transpose()));
        const double lam = es.eigenvalues().minCoeff();
        if (lam < -1e-10) {
            std::ostringstream os;
            os << "decomposition: Loewner precondition violated on mode " << prob.modes[m].id
               << ": smallest eigenvalue of sigma sigma' - a is " << lam;
            fail(ErrorKind::numeric, os.str());
        }
        Mat reduced = md.sbar_inv * diff * md.sbar_inv.transpose();
        reduced = 0.5 * (reduced + reduced.transpose().eval());
        md.Sigma = cholesky_eliminated(reduced);
        md.rank = static_cast<int>(md.Sigma.cols());

        // Coefficients are constant in (x,u), so the audit-grid sup of
        // tr(Sigma Sigma') is a single evaluation per mode.
        max_trace = std::max(max_trace, (md.Sigma * md.Sigma.transpose()).trace());
        decomp.modes.push_back(std::move(md));
    }
    decomp.a_bar = 1.05 * max_trace;
    return decomp;
}

int min_k(const Decomposition& decomp) {
    if (!std::isfinite(decomp.a_bar)) fail(ErrorKind::numeric, "min_k: a_bar is not finite");
    int k = 0;
    while (4.0 * k + 2.0 < decomp.a_bar) ++k;
    return k;
}

double residual_drift_term(const Decomposition& decomp, const ControlProblem& prob, int m, const Vec& x,
                           const Vec& p, const Vec& u) {
    const Vec g = decomp.residual_drift(prob, m, x, u);
    return (decomp.modes[m].sbar * g).dot(p);
}

double residual_diffusion_term(const Decomposition& decomp, int m, const Mat& Gamma) {
    const ModeDecomposition& md = decomp.modes[m];
    if (md.rank == 0) return 0.0;
    if (Gamma.rows() != md.sbar.rows())
        fail(ErrorKind::domain, "residual_diffusion_term: Gamma dimension mismatch");
    return 0.5 * (md.sbar * md.Sigma * md.Sigma.transpose() * md.sbar.transpose() * Gamma).trace();
}

}  // namespace hjb
