#include "hjb/riccati.hpp"

#include <cmath>
#include <sstream>

namespace hjb {

namespace {

struct LqData {
    Mat A, B, Rxx, Rxu, Ruu_inv;
    Vec f0, rx, ru;
    double r0, delta;
    Mat noise;  // sigma sigma'
};

LqData extract_lq(const ControlProblem& prob, int mode) {
    if (mode < 0 || mode >= prob.mode_count()) fail(ErrorKind::config, "riccati: mode index out of range");
    const Mode& m = prob.modes[mode];
    LqData d;
    d.A = m.drift.A;
    d.B = m.drift.B;
    d.f0 = m.drift.f0;
    d.Rxx = 0.5 * (m.reward.Rxx + m.reward.Rxx.transpose());
    d.Rxu = m.reward.Rxu;
    d.rx = m.reward.rx;
    d.ru = m.reward.ru;
    d.r0 = m.reward.r0;
    d.delta = m.discount;
    d.noise = m.sigma * m.sigma.transpose();

    Mat Ruu = 0.5 * (m.reward.Ruu + m.reward.Ruu.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(Ruu);
    if (es.eigenvalues().maxCoeff() > -1e-12)
        fail(ErrorKind::config,
             "riccati: unsupported oracle, control block of the reward must be negative definite");
    const int p = static_cast<int>(Ruu.rows());
    const int dx = prob.dim_x;
    Mat joint(dx + p, dx + p);
    joint.topLeftCorner(dx, dx) = d.Rxx;
    joint.topRightCorner(dx, p) = d.Rxu;
    joint.bottomLeftCorner(p, dx) = d.Rxu.transpose();
    joint.bottomRightCorner(p, p) = Ruu;
    Eigen::SelfAdjointEigenSolver<Mat> js(joint);
    if (js.eigenvalues().maxCoeff() > 1e-9)
        fail(ErrorKind::config, "riccati: unsupported oracle, reward must be concave quadratic in (x,u)");
    d.Ruu_inv = Ruu.inverse();
    return d;
}

struct RiccatiState {
    Mat P;
    Vec b;
    double c;
};

// Right-hand side of d/dt (P, b, c) for the backward HJB written forward in
// t: dP/dt = -(A'P + PA - delta P + Rxx - (PB+Rxu) Ruu^-1 (B'P+Rxu')), etc.
RiccatiState rhs(const LqData& d, const RiccatiState& s) {
    const Mat K = s.P * d.B + d.Rxu;          // d x p
    const Vec ku = d.B.transpose() * s.b + d.ru;  // p
    RiccatiState out;
    Mat Pdot = d.A.transpose() * s.P + s.P * d.A - d.delta * s.P + d.Rxx - K * d.Ruu_inv * K.transpose();
    out.P = -0.5 * (Pdot + Pdot.transpose().eval());
    out.b = -(d.A.transpose() * s.b + s.P * d.f0 - d.delta * s.b + d.rx - K * d.Ruu_inv * ku);
    out.c = -(0.5 * (d.noise * s.P).trace() + d.f0.dot(s.b) - d.delta * s.c + d.r0 -
              0.5 * ku.dot(d.Ruu_inv * ku));
    return out;
}

RiccatiState axpy(const RiccatiState& s, double a, const RiccatiState& k) {
    return {s.P + a * k.P, s.b + a * k.b, s.c + a * k.c};
}

}  // namespace

int RiccatiSolution::time_index(double t) const {
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(i);
    fail(ErrorKind::domain, "riccati: time " + std::to_string(t) + " not on the solution grid");
}

double RiccatiSolution::value(double t, const Vec& x) const {
    const int i = time_index(t);
    return 0.5 * x.dot(P[i] * x) + b[i].dot(x) + c[i];
}

Vec RiccatiSolution::gradient(double t, const Vec& x) const {
    const int i = time_index(t);
    return P[i] * x + b[i];
}

const Mat& RiccatiSolution::curvature(double t) const { return P[time_index(t)]; }

RiccatiSolution riccati_solve(const ControlProblem& prob, int mode, double time_step) {
    if (time_step <= 0.0) fail(ErrorKind::config, "riccati: time step must be positive");
    const LqData d = extract_lq(prob, mode);
    const int n = static_cast<int>(std::lround(prob.horizon / time_step));
    if (n < 1 || std::abs(n * time_step - prob.horizon) > 1e-9)
        fail(ErrorKind::config, "riccati: time step must divide the horizon");

    // Terminal data from the single best quadratic at T. The oracle requires
    // a genuinely quadratic terminal reward.
    if (prob.terminal_forms.size() != 1)
        fail(ErrorKind::config, "riccati: unsupported oracle, terminal reward must be a single quadratic");
    RiccatiState s{prob.terminal_forms[0].Q, prob.terminal_forms[0].b, prob.terminal_forms[0].c};

    RiccatiSolution sol;
    sol.times.resize(n + 1);
    sol.P.resize(n + 1);
    sol.b.resize(n + 1);
    sol.c.resize(n + 1);
    for (int i = 0; i <= n; ++i) sol.times[i] = i * time_step;
    sol.P[n] = s.P;
    sol.b[n] = s.b;
    sol.c[n] = s.c;

    const double dt = -time_step;  // integrate backward
    for (int i = n; i > 0; --i) {
        const RiccatiState k1 = rhs(d, s);
        const RiccatiState k2 = rhs(d, axpy(s, 0.5 * dt, k1));
        const RiccatiState k3 = rhs(d, axpy(s, 0.5 * dt, k2));
        const RiccatiState k4 = rhs(d, axpy(s, dt, k3));
        s.P += (dt / 6.0) * (k1.P + 2.0 * k2.P + 2.0 * k3.P + k4.P);
        s.b += (dt / 6.0) * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b);
        s.c += (dt / 6.0) * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c);
        s.P = 0.5 * (s.P + s.P.transpose().eval());

        Eigen::SelfAdjointEigenSolver<Mat> es(s.P, Eigen::EigenvaluesOnly);
        const double top = es.eigenvalues().maxCoeff();
        if (top > 1e-7 || !s.P.allFinite()) {
            std::ostringstream os;
            os << "riccati: blow-up, P not negative semidefinite at t = " << sol.times[i - 1]
               << " (max eigenvalue " << top << ")";
            fail(ErrorKind::numeric, os.str());
        }
        sol.P[i - 1] = s.P;
        sol.b[i - 1] = s.b;
        sol.c[i - 1] = s.c;
    }
    return sol;
}

double lq_hamiltonian(const ControlProblem& prob, int mode, const HamiltonianPoint& pt) {
    const LqData d = extract_lq(prob, mode);
    const Vec su = d.B.transpose() * pt.p + d.Rxu.transpose() * pt.x + d.ru;
    const double ufree = 0.5 * (d.noise * pt.Gamma).trace() + (d.A * pt.x + d.f0).dot(pt.p) -
                         d.delta * pt.r + 0.5 * pt.x.dot(d.Rxx * pt.x) + d.rx.dot(pt.x) + d.r0;
    return ufree - 0.5 * su.dot(d.Ruu_inv * su);
}

double riccati_residual(const ControlProblem& prob, int mode, const RiccatiSolution& sol, int time_index,
                        const Vec& x) {
    const int n = static_cast<int>(sol.times.size());
    if (time_index < 2 || time_index > n - 3)
        fail(ErrorKind::domain, "riccati_residual: need an interior node (two nodes from each end)");
    const double dt = sol.times[1] - sol.times[0];
    auto fd4 = [&](auto&& path) {
        return (-path(time_index + 2) + 8.0 * path(time_index + 1) - 8.0 * path(time_index - 1) +
                path(time_index - 2)) /
               (12.0 * dt);
    };
    const Mat Pdot = fd4([&](int i) -> const Mat& { return sol.P[i]; });
    const Vec bdot = fd4([&](int i) -> const Vec& { return sol.b[i]; });
    const double cdot = fd4([&](int i) { return sol.c[i]; });

    const double t = sol.times[time_index];
    const double dvdt = 0.5 * x.dot(Pdot * x) + bdot.dot(x) + cdot;
    HamiltonianPoint pt(x, sol.value(t, x), sol.gradient(t, x), sol.curvature(t));
    return dvdt + lq_hamiltonian(prob, mode, pt);
}

}  // namespace hjb
