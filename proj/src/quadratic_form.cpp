#include "hjb/quadratic_form.hpp"

#include <cmath>

namespace hjb {

QuadraticForm::QuadraticForm(Mat Q_, Vec b_, double c_) : Q(std::move(Q_)), b(std::move(b_)), c(c_) {
    if (Q.rows() != Q.cols() || Q.rows() != b.size())
        fail(ErrorKind::config, "quadratic form: Q must be d x d and b of length d");
    Q = 0.5 * (Q + Q.transpose().eval());
}

double QuadraticForm::operator()(const Vec& x) const {
    return 0.5 * x.dot(Q * x) + b.dot(x) + c;
}

double QuadraticForm::max_curvature() const {
    if (Q.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(Q, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

Mat project_nsd(const Mat& Q) {
    Mat S = 0.5 * (Q + Q.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    Vec ev = es.eigenvalues();
    if ((ev.array() <= 0.0).all()) return S;
    for (int i = 0; i < ev.size(); ++i) ev[i] = std::min(ev[i], 0.0);
    Mat out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose().eval());
}

double max_over_forms(const std::vector<QuadraticForm>& forms, const Vec& x) {
    if (forms.empty()) fail(ErrorKind::state, "max_over_forms: empty form set");
    double best = forms.front()(x);
    for (std::size_t i = 1; i < forms.size(); ++i) best = std::max(best, forms[i](x));
    return best;
}

int argmax_form(const std::vector<QuadraticForm>& forms, const Vec& x) {
    if (forms.empty()) fail(ErrorKind::state, "argmax_form: empty form set");
    int best = 0;
    double best_v = forms.front()(x);
    for (std::size_t i = 1; i < forms.size(); ++i) {
        double v = forms[i](x);
        if (v > best_v) {
            best_v = v;
            best = static_cast<int>(i);
        }
    }
    return best;
}

}  // namespace hjb
