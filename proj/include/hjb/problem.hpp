#pragma once

#include "hjb/quadratic_form.hpp"
#include "hjb/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hjb {

/// Affine drift f(x,u) = A x + B u + f0.
struct AffineDrift {
    Mat A;   // d x d
    Mat B;   // d x p
    Vec f0;  // d
};

/// Quadratic running reward
///   l(x,u) = 1/2 x'Rxx x + x'Rxu u + 1/2 u'Ruu u + rx.x + ru.u + r0.
struct QuadraticReward {
    Mat Rxx, Rxu, Ruu;
    Vec rx, ru;
    double r0 = 0.0;
};

struct Mode {
    std::string id;
    AffineDrift drift;
    Mat sigma;  // constant d x d diffusion
    double discount = 0.0;
    QuadraticReward reward;
};

/// Rectangular control grid: per control axis, [lo, hi] sampled at `count`
/// equally spaced points (count == 1 pins the single value lo).
struct ControlGridSpec {
    Vec lo, hi;
    std::vector<int> count;

    std::vector<Vec> enumerate() const;
};

/// Sampled box on which coefficient bounds and decomposition preconditions
/// are audited.
struct AuditSpec {
    Vec lo, hi;
    int points_per_axis = 9;

    std::vector<Vec> points() const;
};

/// Declared sup-norm bounds, checked on the audit grid rather than proven.
struct DeclaredBounds {
    double drift = 0.0;
    double sigma = 0.0;
    double reward = 0.0;
    double discount_min = 0.0;
};

/// A finite-mode diffusion control problem with numeric coefficients:
/// affine drifts, constant diffusions and discounts per mode, quadratic
/// rewards, and a terminal reward given as a max of concave quadratics.
struct ControlProblem {
    std::string name;
    int dim_x = 0;
    int dim_u = 0;
    double horizon = 0.0;
    std::vector<Mode> modes;
    ControlGridSpec control_spec;
    std::vector<Vec> controls;  // materialized grid
    std::vector<QuadraticForm> terminal_forms;
    AuditSpec audit;
    DeclaredBounds bounds;
    std::uint64_t seed = 0;

    /// Optional override of the underlying diffusion factor / drift used by
    /// the decomposition (shared by all modes). Absent means the default
    /// rule: sbar = eps I with the largest admissible eps shrunk by 1%.
    std::optional<Mat> underlying_sigma;
    std::optional<Vec> underlying_drift;

    int mode_count() const { return static_cast<int>(modes.size()); }
    int control_count() const { return static_cast<int>(controls.size()); }

    Vec drift(int m, const Vec& x, const Vec& u) const;
    const Mat& diffusion(int m, const Vec& x, const Vec& u) const;
    double discount(int m, const Vec& x, const Vec& u) const;
    double running_reward(int m, const Vec& x, const Vec& u) const;
    double terminal_reward(const Vec& x) const { return max_over_forms(terminal_forms, x); }

    double discount_min() const;  // exact for constant per-mode discounts
};

/// Evaluation point of the Hamiltonian: state, candidate value, gradient,
/// and symmetric curvature matrix (symmetrized on construction).
struct HamiltonianPoint {
    Vec x;
    double r = 0.0;
    Vec p;
    Mat Gamma;

    HamiltonianPoint(Vec x_, double r_, Vec p_, Mat Gamma_);
};

/// 1/2 tr(sigma sigma' Gamma) + f.p - delta r + l at fixed (mode, control).
double mode_control_hamiltonian(const ControlProblem& prob, int m, const Vec& u, const HamiltonianPoint& pt);

/// Max over the control grid at fixed mode; ties resolved by first index.
double mode_hamiltonian(const ControlProblem& prob, int m, const HamiltonianPoint& pt);

/// Max over modes and controls.
double hamiltonian(const ControlProblem& prob, const HamiltonianPoint& pt);

struct AuditIssue {
    std::string what;
    double magnitude;
};

/// Checks finiteness, declared bounds, and the terminal-form identity on the
/// audit grid; returns the list of violations (empty means clean).
std::vector<AuditIssue> audit_problem(const ControlProblem& prob);

/// Built-in problem registry.
std::vector<std::string> builtin_problem_names();
std::string builtin_problem_description(const std::string& name);
ControlProblem builtin_problem(const std::string& name);

/// JSON wire format (keys: name, d, T, modes[], controls, terminal_forms[]).
ControlProblem problem_from_json(const std::string& text);
std::string problem_to_json(const ControlProblem& prob);

/// Loads a problem from a registry name or a path to a JSON config file.
ControlProblem load_problem(const std::string& name_or_path);

}  // namespace hjb
