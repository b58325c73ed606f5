#include <CLI11.hpp>

#include "hjb/decomp.hpp"
#include "hjb/expect.hpp"
#include "hjb/gridsolve.hpp"
#include "hjb/maxplus.hpp"
#include "hjb/problem.hpp"
#include "hjb/riccati.hpp"
#include "hjb/schemes.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using namespace hjb;

constexpr int kExitValidation = 2;
constexpr int kExitInvariantViolation = 3;

std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::config, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::config, "cannot write '" + path + "'");
    out << content;
}

// Run metadata next to each produced artifact; reruns with identical inputs
// and seed reproduce identical output digests.
struct Manifest {
    std::string command_line;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;

    void write(const std::string& path, double wall_seconds) const {
        std::ostringstream os;
        os << "{\n  \"command\": \"" << command_line << "\",\n";
        os << "  \"config_hash\": \"" << std::hex << config_hash << std::dec << "\",\n";
        os << "  \"seed\": " << seed << ",\n";
        os << "  \"version\": \"" << kLibraryVersion << "\",\n";
        os << "  \"wall_time_s\": " << format17(wall_seconds) << ",\n";
        os << "  \"outputs\": {";
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            os << (i ? ", " : "") << "\"" << outputs[i] << "\": \"" << std::hex
               << fnv1a64(read_file(outputs[i])) << std::dec << "\"";
        }
        os << "}\n}\n";
        write_file(path, os.str());
    }
};

std::uint64_t effective_seed(std::uint64_t requested) {
    if (const char* env = std::getenv("HJB_SEED")) {
        char* end = nullptr;
        const unsigned long long parsed = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return parsed;
        fail(ErrorKind::config, "HJB_SEED must be an unsigned integer");
    }
    return requested;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) fail(ErrorKind::config, "empty numeric list");
    return out;
}

Vec parse_vec(const std::string& text) {
    const std::vector<double> vals = parse_list(text);
    Vec v(static_cast<int>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<int>(i)] = vals[i];
    return v;
}

Engine make_engine(const std::string& kind, int dim, int nodes, int mc_n, std::uint64_t seed) {
    if (kind == "quad") return Engine::quadrature(dim, nodes);
    if (kind == "mc") return Engine::monte_carlo(dim, mc_n, seed);
    if (kind == "analytic") return Engine::analytic(dim);
    fail(ErrorKind::config, "unknown engine '" + kind + "' (quad|mc|analytic)");
}

void maybe_gnuplot(const std::string& csv_path, bool emit, const std::string& xlabel,
                   const std::string& ylabel) {
    if (!emit) return;
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set logscale xy\n"
       << "set xlabel '" << xlabel << "'\n"
       << "set ylabel '" << ylabel << "'\n"
       << "plot '" << csv_path << "' using 1:2 with linespoints title '" << ylabel << "'\n";
    write_file(csv_path + ".gp", os.str());
}

struct CommonState {
    std::string command_line;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void finish(Manifest manifest, const std::string& out_path) const {
        if (out_path.empty()) return;
        manifest.command_line = command_line;
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        manifest.write(out_path + ".manifest.json", wall);
    }
};

int run_cli(int argc, char** argv) {
    CLI::App app{"hjb: monotone probabilistic schemes and the max-plus method for "
                 "finite-horizon HJB equations"};
    app.require_subcommand(1);
    // --h is a scheme parameter on several subcommands, so help is long-form only.
    app.set_help_flag("--help", "print help");

    CommonState state;
    {
        std::ostringstream os;
        for (int i = 0; i < argc; ++i) os << (i ? " " : "") << argv[i];
        state.command_line = os.str();
    }

    // ---- list-problems ----
    auto* list_cmd = app.add_subcommand("list-problems", "List built-in problems");
    list_cmd->callback([&] {
        for (const auto& name : builtin_problem_names())
            std::cout << name << "  -  " << builtin_problem_description(name) << "\n";
    });

    // ---- decompose ----
    auto* dec_cmd = app.add_subcommand("decompose", "Report the generator/residual decomposition");
    std::string dec_problem;
    bool dec_report = false;
    dec_cmd->add_option("--problem", dec_problem, "built-in name or config path")->required();
    dec_cmd->add_flag("--report", dec_report, "include reconstruction residuals");
    dec_cmd->callback([&] {
        const ControlProblem prob = load_problem(dec_problem);
        const Decomposition decomp = build_decomposition(prob);
        std::cout << "mode  rank  tr(Sigma Sigma')\n";
        for (int m = 0; m < prob.mode_count(); ++m) {
            const auto& md = decomp.modes[m];
            std::cout << prob.modes[m].id << "  " << md.rank << "  "
                      << format17((md.Sigma * md.Sigma.transpose()).trace()) << "\n";
            if (dec_report) {
                const Mat noise = prob.modes[m].sigma * prob.modes[m].sigma.transpose();
                const Mat rebuilt =
                    md.sbar * md.Sigma * md.Sigma.transpose() * md.sbar.transpose() + md.a;
                std::cout << "  reconstruction residual: "
                          << format17((rebuilt - noise).cwiseAbs().maxCoeff()) << "\n";
            }
        }
        std::cout << "a_bar " << format17(decomp.a_bar) << "\n";
        std::cout << "min_k " << min_k(decomp) << "\n";
    });

    // ---- consistency ----
    auto* con_cmd = app.add_subcommand("consistency", "Estimator consistency study");
    std::string con_est = "d2", con_fn = "sin_exp", con_engine = "quad", con_hlist = "0.1,0.05,0.025",
                con_out;
    int con_d = 1, con_nodes = 12, con_mc_n = 200000, con_k = 0;
    double con_sbar = 1.0, con_fbar = 0.5, con_g = 1.0;
    std::uint64_t con_seed = 7;
    bool con_gnuplot = false;
    con_cmd->add_option("--estimator", con_est, "d0|d1|d2|ftw1|ftw2");
    con_cmd->add_option("--testfn", con_fn, "sin_exp|gauss_exp|linear|quad");
    con_cmd->add_option("--h-list", con_hlist, "comma-separated step sizes");
    con_cmd->add_option("--engine", con_engine, "quad|mc|analytic");
    con_cmd->add_option("--out", con_out, "CSV path")->required();
    con_cmd->add_option("--d", con_d, "state dimension");
    con_cmd->add_option("--nodes", con_nodes, "quadrature nodes per side");
    con_cmd->add_option("--mc-n", con_mc_n, "Monte Carlo sample size");
    con_cmd->add_option("--k", con_k, "second-order weight index");
    con_cmd->add_option("--sbar", con_sbar, "underlying diffusion scale");
    con_cmd->add_option("--fbar", con_fbar, "underlying drift");
    con_cmd->add_option("--g", con_g, "residual drift component");
    con_cmd->add_option("--seed", con_seed, "Monte Carlo seed");
    con_cmd->add_flag("--emit-gnuplot", con_gnuplot, "write a plot script next to the CSV");
    con_cmd->callback([&] {
        const std::uint64_t seed = effective_seed(con_seed);
        const Engine engine = make_engine(con_engine, con_d, con_nodes, con_mc_n, seed);
        ConsistencySetup setup;
        setup.stepper = EulerStepper::constant(con_sbar * Mat::Identity(con_d, con_d),
                                               Vec::Constant(con_d, con_fbar));
        setup.g = Vec::Constant(con_d, con_g);
        setup.Sigma = Mat::Identity(con_d, con_d);
        setup.k = con_k;
        const ConsistencyReport report =
            consistency_study(con_est, con_fn, parse_list(con_hlist), engine, setup);
        std::ostringstream os;
        os << "h,error,target,estimate\n";
        for (const auto& row : report.rows)
            os << format17(row.h) << "," << format17(row.error) << "," << format17(row.target) << ","
               << format17(row.estimate) << "\n";
        os << "p_hat," << (report.exact ? "exact" : format17(report.fitted_order)) << ",,\n";
        write_file(con_out, os.str());
        std::cout << "estimator " << report.estimator << " on " << report.test_function << " ["
                  << report.engine << "]: "
                  << (report.exact ? "exact at machine precision"
                                   : "fitted order " + format17(report.fitted_order))
                  << "\n";
        maybe_gnuplot(con_out, con_gnuplot, "h", "error");
        Manifest manifest;
        manifest.seed = seed;
        manifest.config_hash = fnv1a64(con_est + "|" + con_fn + "|" + con_hlist);
        manifest.outputs = {con_out};
        state.finish(manifest, con_out);
    });

    // ---- check-monotone ----
    auto* mon_cmd = app.add_subcommand("check-monotone", "Randomized monotonicity audit");
    std::string mon_problem, mon_variant = "new_upwind", mon_delta = "lower_bounded";
    int mon_k = -1, mon_trials = 10000, mon_nodes = 7;
    double mon_h = 0.1;
    std::uint64_t mon_seed = 1234;
    mon_cmd->add_option("--problem", mon_problem)->required();
    mon_cmd->add_option("--variant", mon_variant, "new_upwind|prior_linear|deriv_baseline");
    mon_cmd->add_option("--k", mon_k, "weight index; -1 means the minimal admissible k");
    mon_cmd->add_option("--h", mon_h);
    mon_cmd->add_option("--trials", mon_trials);
    mon_cmd->add_option("--seed", mon_seed);
    mon_cmd->add_option("--delta-mode", mon_delta, "nonnegative|lower_bounded|general_sign");
    mon_cmd->add_option("--nodes", mon_nodes);
    mon_cmd->callback([&] {
        const ControlProblem prob = load_problem(mon_problem);
        const Decomposition decomp = build_decomposition(prob);
        const int k = mon_k < 0 ? min_k(decomp) : mon_k;
        DeltaMode dm = mon_delta == "nonnegative"  ? DeltaMode::nonnegative
                       : mon_delta == "general_sign" ? DeltaMode::general_sign
                                                     : DeltaMode::lower_bounded;
        const SchemeVariant variant = scheme_variant_from_string(mon_variant);
        SchemeConfig cfg = SchemeConfig::make(prob, variant, k, mon_h, dm);
        const Engine engine = Engine::quadrature(prob.dim_x, mon_nodes);
        const MonotoneReport report =
            check_monotone(cfg, prob, decomp, engine, mon_trials, effective_seed(mon_seed));
        std::cout << "variant " << mon_variant << ", k " << k << ", a_bar " << format17(decomp.a_bar)
                  << ", h " << format17(mon_h) << "\n";
        std::cout << report.violations << " violations in " << report.trials << " trials"
                  << (report.constructed_violation ? " (one constructed)" : "") << "\n";
        std::cout << "worst margin " << format17(report.worst_margin) << ", min node weight "
                  << format17(report.min_node_weight) << "\n";
        if (!report.note.empty()) std::cout << report.note << "\n";
        const bool guaranteed =
            variant == SchemeVariant::new_upwind && decomp.a_bar <= 4.0 * k + 2.0 && mon_h <= cfg.h0;
        if (guaranteed && report.violations > 0) std::exit(kExitInvariantViolation);
    });

    // ---- check-subhomogeneous ----
    auto* sub_cmd = app.add_subcommand("check-subhomogeneous", "Additive subhomogeneity audit");
    std::string sub_problem;
    int sub_k = -1, sub_trials = 10000, sub_nodes = 7;
    double sub_h = 0.1;
    std::uint64_t sub_seed = 1234;
    sub_cmd->add_option("--problem", sub_problem)->required();
    sub_cmd->add_option("--k", sub_k);
    sub_cmd->add_option("--h", sub_h);
    sub_cmd->add_option("--trials", sub_trials);
    sub_cmd->add_option("--seed", sub_seed);
    sub_cmd->add_option("--nodes", sub_nodes);
    sub_cmd->callback([&] {
        const ControlProblem prob = load_problem(sub_problem);
        const Decomposition decomp = build_decomposition(prob);
        const int k = sub_k < 0 ? min_k(decomp) : sub_k;
        SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, k, sub_h);
        const Engine engine = Engine::quadrature(prob.dim_x, sub_nodes);
        const SubhomogeneityReport report =
            check_subhomogeneous(cfg, prob, decomp, engine, sub_trials, effective_seed(sub_seed));
        std::cout << "alpha_h " << format17(report.alpha_h) << ": " << report.violations
                  << " violations in " << report.trials
                  << " trials, worst excess " << format17(report.worst_excess) << "\n";
        if (report.violations > 0) std::exit(kExitInvariantViolation);
    });

    // ---- solve-grid ----
    auto* grid_cmd = app.add_subcommand("solve-grid", "Deterministic reference solve on a grid");
    std::string grid_problem, grid_variant = "new_upwind", grid_out;
    int grid_k = -1, grid_nx = 41, grid_nodes = 7, grid_threads = 1;
    double grid_h = 0.1, grid_xmin = -2.0, grid_xmax = 2.0;
    bool grid_gnuplot = false;
    grid_cmd->add_option("--problem", grid_problem)->required();
    grid_cmd->add_option("--h", grid_h)->required();
    grid_cmd->add_option("--xmin", grid_xmin);
    grid_cmd->add_option("--xmax", grid_xmax);
    grid_cmd->add_option("--nx", grid_nx);
    grid_cmd->add_option("--k", grid_k);
    grid_cmd->add_option("--variant", grid_variant);
    grid_cmd->add_option("--out", grid_out, "CSV path")->required();
    bool grid_high_dim = false;
    grid_cmd->add_option("--threads", grid_threads);
    grid_cmd->add_option("--nodes", grid_nodes);
    grid_cmd->add_flag("--emit-gnuplot", grid_gnuplot);
    grid_cmd->add_flag("--allow-high-dim", grid_high_dim,
                       "lift the d <= 2 limit (cost grows exponentially with d)");
    grid_cmd->callback([&] {
        const ControlProblem prob = load_problem(grid_problem);
        if (prob.dim_x > 2 && !grid_high_dim)
            fail(ErrorKind::config, "grid solver is limited to d <= 2 by default; pass "
                                    "--allow-high-dim to override");
        const Decomposition decomp = build_decomposition(prob);
        const int k = grid_k < 0 ? min_k(decomp) : grid_k;
        SchemeConfig cfg =
            SchemeConfig::make(prob, scheme_variant_from_string(grid_variant), k, grid_h);
        const Engine engine = Engine::quadrature(prob.dim_x, grid_nodes);
        GridSpec spec;
        spec.lo = Vec::Constant(prob.dim_x, grid_xmin);
        spec.hi = Vec::Constant(prob.dim_x, grid_xmax);
        spec.points.assign(prob.dim_x, grid_nx);
        spec.threads = grid_threads;
        const ValueGrid grid = solve_grid(prob, decomp, cfg, engine, spec);
        std::ostringstream os;
        os << "t";
        for (int a = 0; a < prob.dim_x; ++a) os << ",x" << a;
        os << ",v\n";
        std::size_t rows = 0;
        for (std::size_t ti = 0; ti < grid.times().size(); ++ti)
            for (std::size_t flat = 0; flat < grid.nodes_per_layer(); ++flat) {
                const Vec x = grid.node(flat);
                bool core = true;
                for (int a = 0; a < prob.dim_x; ++a)
                    if (x[a] < grid_xmin - 1e-12 || x[a] > grid_xmax + 1e-12) core = false;
                if (!core) continue;  // keep the padding out of the artifact
                os << format17(grid.times()[ti]);
                for (int a = 0; a < prob.dim_x; ++a) os << "," << format17(x[a]);
                os << "," << format17(grid.at(static_cast<int>(ti), flat)) << "\n";
                ++rows;
            }
        write_file(grid_out, os.str());
        for (const auto& w : grid.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << "wrote " << grid_out << " (" << grid.times().size() << " layers, " << rows
                  << " rows on the core window)\n";
        maybe_gnuplot(grid_out, grid_gnuplot, "x", "v");
        Manifest manifest;
        manifest.config_hash = fnv1a64(problem_to_json(prob));
        manifest.seed = 0;
        manifest.outputs = {grid_out};
        state.finish(manifest, grid_out);
    });

    // ---- convergence ----
    auto* conv_cmd = app.add_subcommand("convergence", "Grid solver error against the Riccati oracle");
    std::string conv_problem, conv_hlist = "0.2,0.1,0.05,0.025", conv_oracle = "riccati", conv_out;
    int conv_k = -1, conv_nx = 33, conv_nodes = 7;
    double conv_xmin = -2.0, conv_xmax = 2.0;
    bool conv_gnuplot = false;
    conv_cmd->add_option("--problem", conv_problem)->required();
    conv_cmd->add_option("--h-list", conv_hlist);
    conv_cmd->add_option("--oracle", conv_oracle, "riccati");
    conv_cmd->add_option("--out", conv_out, "CSV path")->required();
    conv_cmd->add_option("--xmin", conv_xmin);
    conv_cmd->add_option("--xmax", conv_xmax);
    conv_cmd->add_option("--nx", conv_nx);
    conv_cmd->add_option("--k", conv_k);
    conv_cmd->add_option("--nodes", conv_nodes);
    conv_cmd->add_flag("--emit-gnuplot", conv_gnuplot);
    conv_cmd->callback([&] {
        if (conv_oracle != "riccati")
            fail(ErrorKind::config, "unknown oracle '" + conv_oracle + "' (riccati)");
        const ControlProblem prob = load_problem(conv_problem);
        const Decomposition decomp = build_decomposition(prob);
        const int k = conv_k < 0 ? min_k(decomp) : conv_k;
        const std::vector<double> hs = parse_list(conv_hlist);
        SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, k, hs.front());
        const Engine engine = Engine::quadrature(prob.dim_x, conv_nodes);
        GridSpec spec;
        spec.lo = Vec::Constant(prob.dim_x, conv_xmin);
        spec.hi = Vec::Constant(prob.dim_x, conv_xmax);
        spec.points.assign(prob.dim_x, conv_nx);
        const ConvergenceStudy study = convergence_study(prob, decomp, cfg, engine, spec, hs);
        std::ostringstream os;
        os << "h,sup_error\n";
        for (const auto& row : study.rows)
            os << format17(row.h) << "," << format17(row.sup_error) << "\n";
        os << "p_hat," << (study.order_fitted ? format17(study.fitted_order) : "exact") << "\n";
        write_file(conv_out, os.str());
        std::cout << "sup errors:";
        for (const auto& row : study.rows) std::cout << " " << format17(row.sup_error);
        std::cout << "\np_hat " << (study.order_fitted ? format17(study.fitted_order) : "exact")
                  << "\n";
        maybe_gnuplot(conv_out, conv_gnuplot, "h", "sup_error");
        Manifest manifest;
        manifest.config_hash = fnv1a64(problem_to_json(prob));
        manifest.outputs = {conv_out};
        state.finish(manifest, conv_out);
    });

    // ---- solve-maxplus ----
    auto* mp_cmd = app.add_subcommand("solve-maxplus", "Probabilistic max-plus solve");
    std::string mp_problem, mp_out, mp_targets = "quad";
    int mp_k = -1, mp_nin = 500, mp_nx = 25, mp_nw = 25, mp_nodes = 8;
    double mp_h = 0.1, mp_init_lo = -1.5, mp_init_hi = 1.5;
    std::uint64_t mp_seed = 1;
    mp_cmd->add_option("--problem", mp_problem)->required();
    mp_cmd->add_option("--h", mp_h)->required();
    mp_cmd->add_option("--k", mp_k);
    mp_cmd->add_option("--n-in", mp_nin);
    mp_cmd->add_option("--n-x", mp_nx);
    mp_cmd->add_option("--n-w", mp_nw);
    mp_cmd->add_option("--seed", mp_seed);
    mp_cmd->add_option("--out", mp_out, "forms JSON path")->required();
    mp_cmd->add_option("--targets", mp_targets, "quad|mc per-sample targets");
    mp_cmd->add_option("--init-lo", mp_init_lo, "initial-state box lower corner (all axes)");
    mp_cmd->add_option("--init-hi", mp_init_hi, "initial-state box upper corner (all axes)");
    mp_cmd->add_option("--nodes", mp_nodes);
    mp_cmd->callback([&] {
        const ControlProblem prob = load_problem(mp_problem);
        const Decomposition decomp = build_decomposition(prob);
        const int k = mp_k < 0 ? min_k(decomp) : mp_k;
        SchemeConfig cfg = SchemeConfig::make(prob, SchemeVariant::new_upwind, k, mp_h);
        const Engine engine = Engine::quadrature(prob.dim_x, mp_nodes);
        SamplePlan plan;
        plan.n_in = mp_nin;
        plan.n_x = mp_nx;
        plan.n_w = mp_nw;
        plan.seed = effective_seed(mp_seed);
        plan.init_lo = Vec::Constant(prob.dim_x, mp_init_lo);
        plan.init_hi = Vec::Constant(prob.dim_x, mp_init_hi);
        MaxPlusOptions options;
        options.quadrature_targets = mp_targets != "mc";
        const MaxPlusValue value = solve_maxplus(prob, decomp, cfg, engine, plan, options);
        write_file(mp_out, maxplus_to_json(value, prob, cfg, plan));
        for (const auto& w : value.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << "wrote " << mp_out << "; largest layer " << value.max_layer_size() << " forms\n";
        Manifest manifest;
        manifest.config_hash = fnv1a64(problem_to_json(prob));
        manifest.seed = plan.seed;
        manifest.outputs = {mp_out};
        state.finish(manifest, mp_out);
    });

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a stored max-plus value function");
    std::string eval_forms, eval_x;
    double eval_t = 0.0;
    eval_cmd->add_option("--forms", eval_forms, "forms JSON path")->required();
    eval_cmd->add_option("--t", eval_t)->required();
    eval_cmd->add_option("--x", eval_x, "comma-separated state")->required();
    eval_cmd->callback([&] {
        const MaxPlusValue value = maxplus_from_json(read_file(eval_forms));
        try {
            std::cout << format17(value.value(eval_t, parse_vec(eval_x))) << "\n";
        } catch (const Error& e) {
            fail(ErrorKind::config, e.what());  // bad --t / --x is a usage error
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const hjb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == hjb::ErrorKind::config ? kExitValidation : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
