#include "hjb/problem.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace hjb {

using nlohmann::json;

std::vector<Vec> ControlGridSpec::enumerate() const {
    const int p = static_cast<int>(count.size());
    if (p == 0 || lo.size() != p || hi.size() != p)
        fail(ErrorKind::config, "control grid: lo/hi/count sizes disagree");
    std::size_t total = 1;
    for (int c : count) {
        if (c < 1) fail(ErrorKind::config, "control grid: count must be >= 1");
        total *= static_cast<std::size_t>(c);
    }
    std::vector<Vec> pts;
    pts.reserve(total);
    std::vector<int> idx(p, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Vec u(p);
        for (int a = 0; a < p; ++a)
            u[a] = count[a] == 1 ? lo[a] : lo[a] + (hi[a] - lo[a]) * idx[a] / (count[a] - 1);
        pts.push_back(std::move(u));
        for (int a = p - 1; a >= 0; --a) {
            if (++idx[a] < count[a]) break;
            idx[a] = 0;
        }
    }
    return pts;
}

std::vector<Vec> AuditSpec::points() const {
    const int d = static_cast<int>(lo.size());
    if (d == 0 || hi.size() != d) fail(ErrorKind::config, "audit spec: lo/hi sizes disagree");
    const int n = std::max(points_per_axis, 2);
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(n);
    std::vector<Vec> pts;
    pts.reserve(total);
    std::vector<int> idx(d, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Vec x(d);
        for (int a = 0; a < d; ++a) x[a] = lo[a] + (hi[a] - lo[a]) * idx[a] / (n - 1);
        pts.push_back(std::move(x));
        for (int a = d - 1; a >= 0; --a) {
            if (++idx[a] < n) break;
            idx[a] = 0;
        }
    }
    return pts;
}

Vec ControlProblem::drift(int m, const Vec& x, const Vec& u) const {
    const AffineDrift& f = modes[m].drift;
    return f.A * x + f.B * u + f.f0;
}

const Mat& ControlProblem::diffusion(int m, const Vec& x, const Vec& u) const {
    (void)x;
    (void)u;
    return modes[m].sigma;
}

double ControlProblem::discount(int m, const Vec& x, const Vec& u) const {
    (void)x;
    (void)u;
    return modes[m].discount;
}

double ControlProblem::running_reward(int m, const Vec& x, const Vec& u) const {
    const QuadraticReward& r = modes[m].reward;
    return 0.5 * x.dot(r.Rxx * x) + x.dot(r.Rxu * u) + 0.5 * u.dot(r.Ruu * u) + r.rx.dot(x) + r.ru.dot(u) +
           r.r0;
}

double ControlProblem::discount_min() const {
    double lo = 0.0;
    for (std::size_t m = 0; m < modes.size(); ++m)
        lo = m == 0 ? modes[m].discount : std::min(lo, modes[m].discount);
    return lo;
}

HamiltonianPoint::HamiltonianPoint(Vec x_, double r_, Vec p_, Mat Gamma_)
    : x(std::move(x_)), r(r_), p(std::move(p_)), Gamma(std::move(Gamma_)) {
    if (Gamma.rows() != Gamma.cols() || Gamma.rows() != x.size() || p.size() != x.size())
        fail(ErrorKind::config, "hamiltonian point: inconsistent dimensions");
    Gamma = 0.5 * (Gamma + Gamma.transpose().eval());
}

double mode_control_hamiltonian(const ControlProblem& prob, int m, const Vec& u,
                                const HamiltonianPoint& pt) {
    const Mat& sig = prob.diffusion(m, pt.x, u);
    const double second = 0.5 * (sig * sig.transpose() * pt.Gamma).trace();
    const double value = second + prob.drift(m, pt.x, u).dot(pt.p) - prob.discount(m, pt.x, u) * pt.r +
                         prob.running_reward(m, pt.x, u);
    if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "hamiltonian: non-finite coefficient evaluation at mode " << prob.modes[m].id << ", u = ["
           << u.transpose() << "], x = [" << pt.x.transpose() << "]";
        fail(ErrorKind::domain, os.str());
    }
    return value;
}

double mode_hamiltonian(const ControlProblem& prob, int m, const HamiltonianPoint& pt) {
    if (prob.controls.empty()) fail(ErrorKind::config, "hamiltonian: empty control grid");
    double best = mode_control_hamiltonian(prob, m, prob.controls[0], pt);
    for (std::size_t j = 1; j < prob.controls.size(); ++j)
        best = std::max(best, mode_control_hamiltonian(prob, m, prob.controls[j], pt));
    return best;
}

double hamiltonian(const ControlProblem& prob, const HamiltonianPoint& pt) {
    if (prob.modes.empty()) fail(ErrorKind::config, "hamiltonian: empty mode list");
    double best = mode_hamiltonian(prob, 0, pt);
    for (int m = 1; m < prob.mode_count(); ++m) best = std::max(best, mode_hamiltonian(prob, m, pt));
    return best;
}

std::vector<AuditIssue> audit_problem(const ControlProblem& prob) {
    std::vector<AuditIssue> issues;
    const auto xs = prob.audit.points();
    for (int m = 0; m < prob.mode_count(); ++m) {
        double worst_f = 0.0, worst_l = 0.0;
        for (const Vec& x : xs) {
            for (const Vec& u : prob.controls) {
                const Vec f = prob.drift(m, x, u);
                const double l = prob.running_reward(m, x, u);
                if (!f.allFinite() || !std::isfinite(l)) {
                    issues.push_back({"non-finite coefficients at mode " + prob.modes[m].id, 0.0});
                    return issues;
                }
                worst_f = std::max(worst_f, f.cwiseAbs().maxCoeff());
                worst_l = std::max(worst_l, std::abs(l));
            }
        }
        const double sig_norm = prob.modes[m].sigma.cwiseAbs().maxCoeff();
        if (worst_f > prob.bounds.drift)
            issues.push_back({"declared drift bound exceeded on mode " + prob.modes[m].id, worst_f});
        if (sig_norm > prob.bounds.sigma)
            issues.push_back({"declared diffusion bound exceeded on mode " + prob.modes[m].id, sig_norm});
        if (worst_l > prob.bounds.reward)
            issues.push_back({"declared reward bound exceeded on mode " + prob.modes[m].id, worst_l});
        if (prob.modes[m].discount < prob.bounds.discount_min - 1e-12)
            issues.push_back(
                {"discount below declared lower bound on mode " + prob.modes[m].id, prob.modes[m].discount});
    }
    for (const Vec& x : xs) {
        if (!std::isfinite(prob.terminal_reward(x))) {
            issues.push_back({"non-finite terminal reward", 0.0});
            break;
        }
    }
    for (const auto& z : prob.terminal_forms) {
        const double top = z.max_curvature();
        if (top > 1e-9) issues.push_back({"terminal form not negative semidefinite", top});
    }
    return issues;
}

namespace {

Mat mat_from_json(const json& a, int rows, int cols, const std::string& field) {
    if (!a.is_array() || static_cast<int>(a.size()) != rows * cols)
        fail(ErrorKind::config, "config: field '" + field + "' must be a row-major array of " +
                                    std::to_string(rows * cols) + " numbers");
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = a[i * cols + j].get<double>();
    return m;
}

Vec vec_from_json(const json& a, int n, const std::string& field) {
    if (!a.is_array() || static_cast<int>(a.size()) != n)
        fail(ErrorKind::config,
             "config: field '" + field + "' must be an array of " + std::to_string(n) + " numbers");
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = a[i].get<double>();
    return v;
}

json mat_to_json(const Mat& m) {
    json a = json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
    return a;
}

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

}  // namespace

ControlProblem problem_from_json(const std::string& text) {
    json cfg;
    try {
        cfg = json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorKind::config, std::string("config: parse error: ") + e.what());
    }
    ControlProblem prob;
    try {
        prob.name = cfg.at("name").get<std::string>();
        prob.dim_x = cfg.at("d").get<int>();
        prob.horizon = cfg.at("T").get<double>();
        if (prob.dim_x < 1) fail(ErrorKind::config, "config: d must be positive");
        if (prob.horizon <= 0) fail(ErrorKind::config, "config: T must be positive");
        const int d = prob.dim_x;

        const json& ctl = cfg.at("controls");
        const int p = static_cast<int>(ctl.at("count").size());
        prob.dim_u = p;
        prob.control_spec.lo = vec_from_json(ctl.at("min"), p, "controls.min");
        prob.control_spec.hi = vec_from_json(ctl.at("max"), p, "controls.max");
        prob.control_spec.count.assign(ctl.at("count").begin(), ctl.at("count").end());
        prob.controls = prob.control_spec.enumerate();

        for (const json& jm : cfg.at("modes")) {
            Mode m;
            m.id = jm.value("id", "m" + std::to_string(prob.modes.size()));
            m.drift.A = mat_from_json(jm.at("A"), d, d, "A");
            m.drift.B = mat_from_json(jm.at("B"), d, p, "B");
            m.drift.f0 = jm.contains("f0") ? vec_from_json(jm.at("f0"), d, "f0") : Vec::Zero(d).eval();
            m.sigma = mat_from_json(jm.at("sigma"), d, d, "sigma");
            m.discount = jm.at("delta").get<double>();
            const json& jl = jm.at("ell");
            m.reward.Rxx = jl.contains("Rxx") ? mat_from_json(jl.at("Rxx"), d, d, "ell.Rxx")
                                              : Mat::Zero(d, d).eval();
            m.reward.Rxu = jl.contains("Rxu") ? mat_from_json(jl.at("Rxu"), d, p, "ell.Rxu")
                                              : Mat::Zero(d, p).eval();
            m.reward.Ruu = jl.contains("Ruu") ? mat_from_json(jl.at("Ruu"), p, p, "ell.Ruu")
                                              : Mat::Zero(p, p).eval();
            m.reward.rx = jl.contains("rx") ? vec_from_json(jl.at("rx"), d, "ell.rx") : Vec::Zero(d).eval();
            m.reward.ru = jl.contains("ru") ? vec_from_json(jl.at("ru"), p, "ell.ru") : Vec::Zero(p).eval();
            m.reward.r0 = jl.value("r0", 0.0);
            prob.modes.push_back(std::move(m));
        }
        if (prob.modes.empty()) fail(ErrorKind::config, "config: need at least one mode");

        for (const json& jz : cfg.at("terminal_forms")) {
            QuadraticForm z(mat_from_json(jz.at("Q"), d, d, "terminal Q"),
                            vec_from_json(jz.at("b"), d, "terminal b"), jz.at("c").get<double>());
            prob.terminal_forms.push_back(std::move(z));
        }
        if (prob.terminal_forms.empty()) fail(ErrorKind::config, "config: need at least one terminal form");

        if (cfg.contains("audit")) {
            const json& ja = cfg.at("audit");
            prob.audit.lo = vec_from_json(ja.at("xmin"), d, "audit.xmin");
            prob.audit.hi = vec_from_json(ja.at("xmax"), d, "audit.xmax");
            prob.audit.points_per_axis = ja.value("n", 9);
        } else {
            prob.audit.lo = Vec::Constant(d, -3.0);
            prob.audit.hi = Vec::Constant(d, 3.0);
        }
        if (cfg.contains("bounds")) {
            const json& jb = cfg.at("bounds");
            prob.bounds.drift = jb.value("f", 0.0);
            prob.bounds.sigma = jb.value("sigma", 0.0);
            prob.bounds.reward = jb.value("ell", 0.0);
            prob.bounds.discount_min = jb.value("delta_min", 0.0);
        } else {
            // Declare bounds from the audit grid itself, with 10% headroom.
            prob.bounds.drift = 0.0;
            prob.bounds.sigma = 0.0;
            prob.bounds.reward = 0.0;
            prob.bounds.discount_min = prob.discount_min();
            for (const Vec& x : prob.audit.points())
                for (const Vec& u : prob.controls)
                    for (int m = 0; m < prob.mode_count(); ++m) {
                        prob.bounds.drift =
                            std::max(prob.bounds.drift, prob.drift(m, x, u).cwiseAbs().maxCoeff());
                        prob.bounds.reward =
                            std::max(prob.bounds.reward, std::abs(prob.running_reward(m, x, u)));
                    }
            for (const auto& m : prob.modes)
                prob.bounds.sigma = std::max(prob.bounds.sigma, m.sigma.cwiseAbs().maxCoeff());
            prob.bounds.drift *= 1.1;
            prob.bounds.sigma *= 1.1;
            prob.bounds.reward *= 1.1;
        }
        if (cfg.contains("underlying")) {
            const json& ju = cfg.at("underlying");
            if (ju.contains("sigma"))
                prob.underlying_sigma = mat_from_json(ju.at("sigma"), d, d, "underlying.sigma");
            if (ju.contains("f"))
                prob.underlying_drift = vec_from_json(ju.at("f"), d, "underlying.f");
        }
        prob.seed = cfg.value("seed", 20240);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::config, std::string("config: ") + e.what());
    }
    return prob;
}

std::string problem_to_json(const ControlProblem& prob) {
    json cfg;
    cfg["name"] = prob.name;
    cfg["d"] = prob.dim_x;
    cfg["T"] = prob.horizon;
    cfg["controls"] = {{"min", vec_to_json(prob.control_spec.lo)},
                       {"max", vec_to_json(prob.control_spec.hi)},
                       {"count", prob.control_spec.count}};
    cfg["modes"] = json::array();
    for (const Mode& m : prob.modes) {
        json jm;
        jm["id"] = m.id;
        jm["A"] = mat_to_json(m.drift.A);
        jm["B"] = mat_to_json(m.drift.B);
        jm["f0"] = vec_to_json(m.drift.f0);
        jm["sigma"] = mat_to_json(m.sigma);
        jm["delta"] = m.discount;
        jm["ell"] = {{"Rxx", mat_to_json(m.reward.Rxx)}, {"Rxu", mat_to_json(m.reward.Rxu)},
                     {"Ruu", mat_to_json(m.reward.Ruu)}, {"rx", vec_to_json(m.reward.rx)},
                     {"ru", vec_to_json(m.reward.ru)},   {"r0", m.reward.r0}};
        cfg["modes"].push_back(std::move(jm));
    }
    cfg["terminal_forms"] = json::array();
    for (const auto& z : prob.terminal_forms)
        cfg["terminal_forms"].push_back(
            {{"Q", mat_to_json(z.Q)}, {"b", vec_to_json(z.b)}, {"c", z.c}});
    cfg["audit"] = {{"xmin", vec_to_json(prob.audit.lo)},
                    {"xmax", vec_to_json(prob.audit.hi)},
                    {"n", prob.audit.points_per_axis}};
    cfg["bounds"] = {{"f", prob.bounds.drift},
                     {"sigma", prob.bounds.sigma},
                     {"ell", prob.bounds.reward},
                     {"delta_min", prob.bounds.discount_min}};
    if (prob.underlying_sigma) cfg["underlying"]["sigma"] = mat_to_json(*prob.underlying_sigma);
    if (prob.underlying_drift) cfg["underlying"]["f"] = vec_to_json(*prob.underlying_drift);
    cfg["seed"] = prob.seed;
    return cfg.dump(2);
}

namespace {

json lq_mode(const std::string& id, const Mat& A, const Mat& B, const Vec& f0, const Mat& sigma,
             double delta, const Mat& Rxx, const Mat& Ruu, double r0 = 0.0) {
    json jm;
    jm["id"] = id;
    jm["A"] = mat_to_json(A);
    jm["B"] = mat_to_json(B);
    jm["f0"] = vec_to_json(f0);
    jm["sigma"] = mat_to_json(sigma);
    jm["delta"] = delta;
    jm["ell"] = {{"Rxx", mat_to_json(Rxx)}, {"Ruu", mat_to_json(Ruu)}, {"r0", r0}};
    return jm;
}

json builtin_config(const std::string& name) {
    const Mat I1 = Mat::Identity(1, 1);
    const Mat Z1 = Mat::Zero(1, 1);
    const Vec z1 = Vec::Zero(1);
    json cfg;
    cfg["name"] = name;
    cfg["T"] = 1.0;
    if (name == "lq1d" || name == "lq1d_wide") {
        // dxi = u ds + sigma dW, l = -x^2 - u^2, psi = -x^2.
        const double sig = name == "lq1d" ? 1.0 : std::sqrt(5.0);
        cfg["d"] = 1;
        cfg["controls"] = {{"min", {-2.0}}, {"max", {2.0}}, {"count", {41}}};
        cfg["modes"] = json::array({lq_mode("m0", Z1, I1, z1, sig * I1, 0.0, -2.0 * I1, -2.0 * I1)});
        cfg["terminal_forms"] = json::array({{{"Q", {-2.0}}, {"b", {0.0}}, {"c", 0.0}}});
        cfg["audit"] = {{"xmin", {-3.0}}, {"xmax", {3.0}}, {"n", 13}};
        // The wide variant keeps the unit underlying diffusion, leaving a
        // residual trace of 4: past the baseline scheme's workable range but
        // inside the k = 1 monotonicity window.
        if (name == "lq1d_wide") cfg["underlying"] = {{"sigma", mat_to_json(I1)}};
    } else if (name == "lq2d") {
        cfg["d"] = 2;
        const Mat I2 = Mat::Identity(2, 2);
        Mat sig(2, 2);
        sig << 1.0, 0.0, 0.2, 1.1;
        cfg["controls"] = {{"min", {-2.0, -2.0}}, {"max", {2.0, 2.0}}, {"count", {9, 9}}};
        cfg["modes"] =
            json::array({lq_mode("m0", Mat::Zero(2, 2), I2, Vec::Zero(2), sig, 0.0, -2.0 * I2, -2.0 * I2)});
        cfg["terminal_forms"] =
            json::array({{{"Q", mat_to_json(-2.0 * I2)}, {"b", {0.0, 0.0}}, {"c", 0.0}}});
        cfg["audit"] = {{"xmin", {-3.0, -3.0}}, {"xmax", {3.0, 3.0}}, {"n", 7}};
    } else if (name == "switch2") {
        // Mode m1 dominates m0: same dynamics, running reward larger by 1.
        cfg["d"] = 1;
        cfg["controls"] = {{"min", {-2.0}}, {"max", {2.0}}, {"count", {41}}};
        cfg["modes"] = json::array({lq_mode("m0", Z1, I1, z1, I1, 0.0, -2.0 * I1, -2.0 * I1, 0.0),
                                    lq_mode("m1", Z1, I1, z1, I1, 0.0, -2.0 * I1, -2.0 * I1, 1.0)});
        cfg["terminal_forms"] = json::array({{{"Q", {-2.0}}, {"b", {0.0}}, {"c", 0.0}}});
        cfg["audit"] = {{"xmin", {-3.0}}, {"xmax", {3.0}}, {"n", 13}};
    } else if (name == "degen2d") {
        // Residual diffusion of rank one: sigma sigma' = diag(2, 1) versus
        // underlying identity, so the second-order correction acts on the
        // first axis only.
        cfg["d"] = 2;
        const Mat I2 = Mat::Identity(2, 2);
        Mat sig = I2;
        sig(0, 0) = std::sqrt(2.0);
        Mat B(2, 1);
        B << 1.0, 1.0;
        cfg["controls"] = {{"min", {-2.0}}, {"max", {2.0}}, {"count", {21}}};
        cfg["modes"] = json::array(
            {lq_mode("m0", Mat::Zero(2, 2), B, Vec::Zero(2), sig, 0.0, -2.0 * I2, -2.0 * Mat::Identity(1, 1))});
        cfg["terminal_forms"] =
            json::array({{{"Q", mat_to_json(-2.0 * I2)}, {"b", {0.0, 0.0}}, {"c", 0.0}}});
        cfg["audit"] = {{"xmin", {-3.0, -3.0}}, {"xmax", {3.0, 3.0}}, {"n", 7}};
        cfg["underlying"] = {{"sigma", mat_to_json(I2)}};
    } else if (name == "prop1d") {
        // Single fixed control; constant residual drift and diffusion, so one
        // backward step maps quadratics to quadratics exactly.
        cfg["d"] = 1;
        cfg["controls"] = {{"min", {1.0}}, {"max", {1.0}}, {"count", {1}}};
        cfg["modes"] = json::array({lq_mode("m0", Z1, I1, z1, std::sqrt(2.0) * I1, 0.1, -2.0 * I1, Z1)});
        cfg["terminal_forms"] = json::array({{{"Q", {-2.0}}, {"b", {0.2}}, {"c", 0.1}}});
        cfg["audit"] = {{"xmin", {-3.0}}, {"xmax", {3.0}}, {"n", 13}};
    } else if (name == "ou1d") {
        // Mean-reverting drift: the residual drift depends on x, which
        // exercises the quadratic-approximability envelope.
        cfg["d"] = 1;
        cfg["controls"] = {{"min", {-2.0}}, {"max", {2.0}}, {"count", {21}}};
        cfg["modes"] = json::array({lq_mode("m0", -0.5 * I1, I1, z1, I1, 0.0, -2.0 * I1, -2.0 * I1)});
        cfg["terminal_forms"] = json::array({{{"Q", {-2.0}}, {"b", {0.0}}, {"c", 0.0}}});
        cfg["audit"] = {{"xmin", {-3.0}}, {"xmax", {3.0}}, {"n", 13}};
    } else if (name == "diffuse1d") {
        // No control influence and no residual: pure diffusion propagation.
        cfg["d"] = 1;
        cfg["controls"] = {{"min", {0.0}}, {"max", {0.0}}, {"count", {1}}};
        cfg["modes"] = json::array({lq_mode("m0", Z1, Z1, z1, I1, 0.0, Z1, Z1)});
        cfg["terminal_forms"] = json::array({{{"Q", {-2.0}}, {"b", {0.0}}, {"c", 0.0}}});
        cfg["audit"] = {{"xmin", {-3.0}}, {"xmax", {3.0}}, {"n", 13}};
        cfg["underlying"] = {{"sigma", mat_to_json(I1)}};
    } else {
        fail(ErrorKind::config, "unknown built-in problem '" + name + "'");
    }
    cfg["seed"] = 20240;
    return cfg;
}

}  // namespace

std::vector<std::string> builtin_problem_names() {
    return {"lq1d", "lq2d", "switch2", "degen2d", "lq1d_wide", "prop1d", "ou1d", "diffuse1d"};
}

std::string builtin_problem_description(const std::string& name) {
    if (name == "lq1d") return "1-d LQ: dx = u ds + dW, l = -x^2-u^2, psi = -x^2";
    if (name == "lq2d") return "2-d LQ with non-diagonal diffusion";
    if (name == "switch2") return "two-mode switching LQ, mode m1 dominates by +1 reward";
    if (name == "degen2d") return "2-d LQ with rank-one residual diffusion (degenerate second order)";
    if (name == "lq1d_wide") return "1-d LQ with sigma = sqrt(5): breaks the baseline weight condition";
    if (name == "prop1d") return "single-control problem whose one-step image of a quadratic is quadratic";
    if (name == "ou1d") return "mean-reverting 1-d LQ (state-dependent residual drift)";
    if (name == "diffuse1d") return "uncontrolled diffusion, zero reward";
    fail(ErrorKind::config, "unknown built-in problem '" + name + "'");
}

ControlProblem builtin_problem(const std::string& name) {
    return problem_from_json(builtin_config(name).dump());
}

ControlProblem load_problem(const std::string& name_or_path) {
    for (const auto& n : builtin_problem_names())
        if (n == name_or_path) return builtin_problem(n);
    std::ifstream in(name_or_path);
    if (!in) fail(ErrorKind::config, "unknown problem '" + name_or_path + "' (not a built-in or a readable file)");
    std::ostringstream buf;
    buf << in.rdbuf();
    return problem_from_json(buf.str());
}

}  // namespace hjb
