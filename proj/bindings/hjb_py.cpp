#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hjb/gridsolve.hpp"
#include "hjb/maxplus.hpp"
#include "hjb/riccati.hpp"
#include "hjb/weights.hpp"

namespace py = pybind11;
using namespace hjb;

namespace {

SchemeConfig make_config(const ControlProblem& prob, const std::string& variant, int k, double h,
                         const std::string& delta_mode) {
    DeltaMode dm = delta_mode == "nonnegative"    ? DeltaMode::nonnegative
                   : delta_mode == "general_sign" ? DeltaMode::general_sign
                                                  : DeltaMode::lower_bounded;
    return SchemeConfig::make(prob, scheme_variant_from_string(variant), k, h, dm);
}

int resolve_k(const Decomposition& decomp, int k) { return k < 0 ? min_k(decomp) : k; }

}  // namespace

PYBIND11_MODULE(_hjb, m) {
    m.doc() = "Monotone probabilistic schemes and the max-plus method for finite-horizon "
              "HJB equations with switching and continuum controls";
    m.attr("__version__") = kLibraryVersion;

    py::register_exception<Error>(m, "HjbError");

    py::class_<ControlProblem>(m, "Problem")
        .def_readonly("name", &ControlProblem::name)
        .def_readonly("dim_x", &ControlProblem::dim_x)
        .def_readonly("dim_u", &ControlProblem::dim_u)
        .def_readonly("horizon", &ControlProblem::horizon)
        .def_property_readonly("n_modes", &ControlProblem::mode_count)
        .def_property_readonly("n_controls", &ControlProblem::control_count)
        .def("drift", &ControlProblem::drift)
        .def("diffusion", &ControlProblem::diffusion)
        .def("discount", &ControlProblem::discount)
        .def("running_reward", &ControlProblem::running_reward)
        .def("terminal_reward", &ControlProblem::terminal_reward)
        .def("to_json", &problem_to_json)
        .def("__repr__", [](const ControlProblem& p) {
            return "<hjb.Problem '" + p.name + "' d=" + std::to_string(p.dim_x) + ">";
        });

    m.def("builtin_problems", &builtin_problem_names);
    m.def("load_problem", &load_problem, py::arg("name_or_path"));
    m.def("problem_from_json", &problem_from_json, py::arg("text"));

    py::class_<QuadraticForm>(m, "QuadraticForm")
        .def(py::init<Mat, Vec, double>(), py::arg("Q"), py::arg("b"), py::arg("c"))
        .def_readonly("Q", &QuadraticForm::Q)
        .def_readonly("b", &QuadraticForm::b)
        .def_readonly("c", &QuadraticForm::c)
        .def("__call__", &QuadraticForm::operator())
        .def("max_curvature", &QuadraticForm::max_curvature);

    // Weight polynomials.
    m.def("poly2_coefficients", [](int k) {
        const MomentCoeffs mc = poly2_coefficients(k);
        return py::make_tuple(mc.c, mc.d);
    });
    m.def("second_order_weight", &second_order_weight, py::arg("Sigma"), py::arg("k"), py::arg("w"));
    m.def("upwind_weight", &upwind_weight, py::arg("g"), py::arg("w"));
    m.def("upwind_weight_mean", &upwind_weight_mean, py::arg("g"), py::arg("h"));
    m.def("composite_weight", &composite_weight, py::arg("g"), py::arg("Sigma"), py::arg("k"),
          py::arg("h"), py::arg("w_scaled"));

    // Hamiltonians.
    m.def(
        "hamiltonian",
        [](const ControlProblem& prob, const Vec& x, double r, const Vec& p, const Mat& Gamma) {
            return hamiltonian(prob, HamiltonianPoint(x, r, p, Gamma));
        },
        py::arg("problem"), py::arg("x"), py::arg("r"), py::arg("p"), py::arg("Gamma"));
    m.def(
        "mode_hamiltonian",
        [](const ControlProblem& prob, int mode, const Vec& x, double r, const Vec& p,
           const Mat& Gamma) { return mode_hamiltonian(prob, mode, HamiltonianPoint(x, r, p, Gamma)); },
        py::arg("problem"), py::arg("mode"), py::arg("x"), py::arg("r"), py::arg("p"),
        py::arg("Gamma"));
    m.def(
        "mode_control_hamiltonian",
        [](const ControlProblem& prob, int mode, const Vec& u, const Vec& x, double r, const Vec& p,
           const Mat& Gamma) {
            return mode_control_hamiltonian(prob, mode, u, HamiltonianPoint(x, r, p, Gamma));
        },
        py::arg("problem"), py::arg("mode"), py::arg("u"), py::arg("x"), py::arg("r"), py::arg("p"),
        py::arg("Gamma"));

    // Decomposition summary.
    m.def(
        "decompose",
        [](const ControlProblem& prob) {
            const Decomposition decomp = build_decomposition(prob);
            py::list modes;
            for (std::size_t mi = 0; mi < decomp.modes.size(); ++mi) {
                py::dict d;
                d["mode"] = prob.modes[mi].id;
                d["rank"] = decomp.modes[mi].rank;
                d["Sigma"] = decomp.modes[mi].Sigma;
                d["sbar"] = decomp.modes[mi].sbar;
                d["trace"] = (decomp.modes[mi].Sigma * decomp.modes[mi].Sigma.transpose()).trace();
                modes.append(d);
            }
            py::dict out;
            out["modes"] = modes;
            out["a_bar"] = decomp.a_bar;
            out["min_k"] = min_k(decomp);
            return out;
        },
        py::arg("problem"));

    // Riccati oracle.
    py::class_<RiccatiSolution>(m, "RiccatiSolution")
        .def_readonly("times", &RiccatiSolution::times)
        .def("value", &RiccatiSolution::value)
        .def("gradient", &RiccatiSolution::gradient)
        .def("curvature", &RiccatiSolution::curvature, py::return_value_policy::copy);
    m.def("riccati_solve", &riccati_solve, py::arg("problem"), py::arg("mode") = 0,
          py::arg("time_step") = 1e-3);
    m.def("riccati_residual", &riccati_residual, py::arg("problem"), py::arg("mode"),
          py::arg("solution"), py::arg("time_index"), py::arg("x"));

    // One-step operator at a point.
    m.def(
        "apply_step",
        [](const ControlProblem& prob, const std::function<double(const Vec&)>& phi, const Vec& x,
           double h, int k, const std::string& variant, const std::string& delta_mode, int nodes) {
            const Decomposition decomp = build_decomposition(prob);
            SchemeConfig cfg = make_config(prob, variant, resolve_k(decomp, k), h, delta_mode);
            const Engine engine = Engine::quadrature(prob.dim_x, nodes);
            const StepResult res = apply_step(cfg, prob, decomp, engine, 0.0, phi, x);
            return py::make_tuple(res.value, res.mode, res.control);
        },
        py::arg("problem"), py::arg("phi"), py::arg("x"), py::arg("h"), py::arg("k") = -1,
        py::arg("variant") = "new_upwind", py::arg("delta_mode") = "lower_bounded",
        py::arg("nodes") = 8);

    // Grid solver.
    py::class_<ValueGrid>(m, "ValueGrid")
        .def_property_readonly("times", &ValueGrid::times)
        .def_readonly("warnings", &ValueGrid::warnings)
        .def("value", &ValueGrid::value, py::arg("t"), py::arg("x"));
    m.def(
        "solve_grid",
        [](const ControlProblem& prob, double h, double xmin, double xmax, int nx, int k,
           const std::string& variant, int nodes, int threads) {
            const Decomposition decomp = build_decomposition(prob);
            SchemeConfig cfg = make_config(prob, variant, resolve_k(decomp, k), h, "lower_bounded");
            const Engine engine = Engine::quadrature(prob.dim_x, nodes);
            GridSpec spec;
            spec.lo = Vec::Constant(prob.dim_x, xmin);
            spec.hi = Vec::Constant(prob.dim_x, xmax);
            spec.points.assign(prob.dim_x, nx);
            spec.threads = threads;
            return solve_grid(prob, decomp, cfg, engine, spec);
        },
        py::arg("problem"), py::arg("h"), py::arg("xmin") = -2.0, py::arg("xmax") = 2.0,
        py::arg("nx") = 41, py::arg("k") = -1, py::arg("variant") = "new_upwind",
        py::arg("nodes") = 7, py::arg("threads") = 1);

    // Max-plus solver.
    py::class_<MaxPlusValue>(m, "MaxPlusValue")
        .def_readonly("times", &MaxPlusValue::times)
        .def_readonly("layers", &MaxPlusValue::layers)
        .def_readonly("warnings", &MaxPlusValue::warnings)
        .def("value", &MaxPlusValue::value, py::arg("t"), py::arg("x"))
        .def("max_layer_size", &MaxPlusValue::max_layer_size);
    m.def(
        "solve_maxplus",
        [](const ControlProblem& prob, double h, int n_in, int n_x, int n_w, std::uint64_t seed,
           double init_lo, double init_hi, int k, bool quadrature_targets, int nodes) {
            const Decomposition decomp = build_decomposition(prob);
            SchemeConfig cfg =
                make_config(prob, "new_upwind", resolve_k(decomp, k), h, "lower_bounded");
            const Engine engine = Engine::quadrature(prob.dim_x, nodes);
            SamplePlan plan;
            plan.n_in = n_in;
            plan.n_x = n_x;
            plan.n_w = n_w;
            plan.seed = seed;
            plan.init_lo = Vec::Constant(prob.dim_x, init_lo);
            plan.init_hi = Vec::Constant(prob.dim_x, init_hi);
            MaxPlusOptions options;
            options.quadrature_targets = quadrature_targets;
            return solve_maxplus(prob, decomp, cfg, engine, plan, options);
        },
        py::arg("problem"), py::arg("h"), py::arg("n_in") = 500, py::arg("n_x") = 25,
        py::arg("n_w") = 25, py::arg("seed") = 1, py::arg("init_lo") = -1.5,
        py::arg("init_hi") = 1.5, py::arg("k") = -1, py::arg("quadrature_targets") = true,
        py::arg("nodes") = 8);

    // Checkers.
    m.def(
        "check_monotone",
        [](const ControlProblem& prob, const std::string& variant, int k, double h, int trials,
           std::uint64_t seed, int nodes) {
            const Decomposition decomp = build_decomposition(prob);
            SchemeConfig cfg = make_config(prob, variant, resolve_k(decomp, k), h, "lower_bounded");
            const Engine engine = Engine::quadrature(prob.dim_x, nodes);
            const MonotoneReport rep = check_monotone(cfg, prob, decomp, engine, trials, seed);
            py::dict out;
            out["trials"] = rep.trials;
            out["violations"] = rep.violations;
            out["worst_margin"] = rep.worst_margin;
            out["min_node_weight"] = rep.min_node_weight;
            out["constructed_violation"] = rep.constructed_violation;
            out["note"] = rep.note;
            return out;
        },
        py::arg("problem"), py::arg("variant") = "new_upwind", py::arg("k") = -1, py::arg("h") = 0.1,
        py::arg("trials") = 1000, py::arg("seed") = 1234, py::arg("nodes") = 7);
    m.def(
        "check_subhomogeneous",
        [](const ControlProblem& prob, int k, double h, int trials, std::uint64_t seed, int nodes) {
            const Decomposition decomp = build_decomposition(prob);
            SchemeConfig cfg =
                make_config(prob, "new_upwind", resolve_k(decomp, k), h, "lower_bounded");
            const Engine engine = Engine::quadrature(prob.dim_x, nodes);
            const SubhomogeneityReport rep =
                check_subhomogeneous(cfg, prob, decomp, engine, trials, seed);
            py::dict out;
            out["trials"] = rep.trials;
            out["violations"] = rep.violations;
            out["worst_excess"] = rep.worst_excess;
            out["alpha_h"] = rep.alpha_h;
            return out;
        },
        py::arg("problem"), py::arg("k") = -1, py::arg("h") = 0.1, py::arg("trials") = 1000,
        py::arg("seed") = 1234, py::arg("nodes") = 7);

    // Estimator consistency.
    m.def(
        "consistency_study",
        [](const std::string& estimator, const std::string& test_fn, const std::vector<double>& hs,
           int dim, double sbar, double fbar, double g, int k, const std::string& engine_kind,
           int nodes, int mc_n, std::uint64_t seed) {
            Engine engine = engine_kind == "mc"        ? Engine::monte_carlo(dim, mc_n, seed)
                            : engine_kind == "analytic" ? Engine::analytic(dim)
                                                        : Engine::quadrature(dim, nodes);
            ConsistencySetup setup;
            setup.stepper =
                EulerStepper::constant(sbar * Mat::Identity(dim, dim), Vec::Constant(dim, fbar));
            setup.g = Vec::Constant(dim, g);
            setup.Sigma = Mat::Identity(dim, dim);
            setup.k = k;
            const ConsistencyReport rep = consistency_study(estimator, test_fn, hs, engine, setup);
            py::list rows;
            for (const auto& r : rep.rows)
                rows.append(py::make_tuple(r.h, r.error, r.target, r.estimate));
            py::dict out;
            out["rows"] = rows;
            out["fitted_order"] = rep.fitted_order;
            out["exact"] = rep.exact;
            return out;
        },
        py::arg("estimator"), py::arg("test_fn"), py::arg("h_list"), py::arg("dim") = 1,
        py::arg("sbar") = 1.0, py::arg("fbar") = 0.5, py::arg("g") = 1.0, py::arg("k") = 0,
        py::arg("engine") = "quad", py::arg("nodes") = 12, py::arg("mc_n") = 200000,
        py::arg("seed") = 7);

    m.def("maxplus_to_json", [](const MaxPlusValue& value, const ControlProblem& prob, double h, int k,
                                std::uint64_t seed) {
        SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, std::max(k, 0), h);
        SamplePlan plan;
        plan.seed = seed;
        return maxplus_to_json(value, prob, cfg, plan);
    });
    m.def("maxplus_from_json", &maxplus_from_json, py::arg("text"));
}
