#include "hjb/gridsolve.hpp"

#include "hjb/riccati.hpp"

#include <cmath>
#include <sstream>
#include <thread>

namespace hjb {

ValueGrid::ValueGrid(Vec lo, Vec hi, std::vector<int> points, std::vector<double> times)
    : lo_(std::move(lo)), hi_(std::move(hi)), points_(std::move(points)), times_(std::move(times)) {
    const int d = dim();
    if (static_cast<int>(points_.size()) != d) fail(ErrorKind::config, "value grid: points/lo mismatch");
    dx_.resize(d);
    layer_size_ = 1;
    for (int a = 0; a < d; ++a) {
        if (points_[a] < 2) fail(ErrorKind::config, "value grid: need at least 2 points per axis");
        dx_[a] = (hi_[a] - lo_[a]) / (points_[a] - 1);
        layer_size_ *= static_cast<std::size_t>(points_[a]);
    }
    values_.assign(times_.size(), std::vector<double>(layer_size_, 0.0));
}

Vec ValueGrid::node(std::size_t flat) const {
    const int d = dim();
    Vec x(d);
    for (int a = d - 1; a >= 0; --a) {
        const std::size_t n = static_cast<std::size_t>(points_[a]);
        x[a] = lo_[a] + dx_[a] * static_cast<double>(flat % n);
        flat /= n;
    }
    return x;
}

int ValueGrid::time_index(double t) const {
    for (std::size_t i = 0; i < times_.size(); ++i)
        if (std::abs(times_[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(i);
    fail(ErrorKind::domain, "value grid: time " + std::to_string(t) + " is not a layer time");
}

double ValueGrid::value_at_layer(int time_index, const Vec& x) const {
    const int d = dim();
    // Clamp to the boundary cell; leaving theta outside [0,1] continues the
    // cell's linear model, which is the extrapolation rule.
    std::vector<int> cell(d);
    std::vector<double> theta(d);
    for (int a = 0; a < d; ++a) {
        double pos = (x[a] - lo_[a]) / dx_[a];
        int i = static_cast<int>(std::floor(pos));
        i = std::max(0, std::min(i, points_[a] - 2));
        cell[a] = i;
        theta[a] = pos - i;
    }
    const std::vector<double>& layer = values_[time_index];
    double acc = 0.0;
    const int corners = 1 << d;
    for (int corner = 0; corner < corners; ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int a = 0; a < d; ++a) {
            const int bit = (corner >> a) & 1;
            w *= bit ? theta[a] : 1.0 - theta[a];
            flat = flat * static_cast<std::size_t>(points_[a]) + static_cast<std::size_t>(cell[a] + bit);
        }
        acc += w * layer[flat];
    }
    return acc;
}

double ValueGrid::value(double t, const Vec& x) const { return value_at_layer(time_index(t), x); }

ValueGrid solve_grid(const ControlProblem& prob, const Decomposition& decomp, const SchemeConfig& cfg,
                     const Engine& engine, const GridSpec& spec) {
    const int d = prob.dim_x;
    if (static_cast<int>(spec.points.size()) != d || spec.lo.size() != d || spec.hi.size() != d)
        fail(ErrorKind::config, "solve_grid: grid spec dimension mismatch");
    const double h = cfg.h;
    const double steps_real = prob.horizon / h;
    const int n_steps = static_cast<int>(std::lround(steps_real));
    if (n_steps < 1 || std::abs(n_steps * h - prob.horizon) > 1e-9)
        fail(ErrorKind::config, "solve_grid: h must divide the horizon");

    // Pad for the whole backward sweep: the core window is influenced by
    // values up to pad_sigmas standard deviations of the total diffusion
    // displacement away, and the boundary extrapolation zone must sit beyond
    // that. A single Euler step needs far less, so every step from the core
    // stays well inside.
    double reach = 0.0;
    const double horizon = prob.horizon;
    for (int m = 0; m < prob.mode_count(); ++m) {
        const ModeDecomposition& md = decomp.modes[m];
        const double sig_norm = md.sbar.cwiseAbs().rowwise().sum().maxCoeff();
        double drift_norm = md.drift_const.cwiseAbs().maxCoeff();
        for (std::size_t f = 0; f < 2; ++f) {
            const Vec corner = f == 0 ? spec.lo : spec.hi;
            drift_norm = std::max(drift_norm, decomp.underlying_drift(m, corner).cwiseAbs().maxCoeff());
        }
        reach = std::max(reach, drift_norm * horizon + spec.pad_sigmas * sig_norm * std::sqrt(horizon));
    }

    Vec lo(d), hi(d);
    std::vector<int> points(d);
    for (int a = 0; a < d; ++a) {
        const double core_dx = (spec.hi[a] - spec.lo[a]) / (spec.points[a] - 1);
        const int extra = static_cast<int>(std::ceil(reach / core_dx));
        lo[a] = spec.lo[a] - extra * core_dx;
        hi[a] = spec.hi[a] + extra * core_dx;
        points[a] = spec.points[a] + 2 * extra;
    }

    std::vector<double> times(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i) times[i] = i * h;

    ValueGrid grid(lo, hi, points, times);
    for (std::size_t flat = 0; flat < grid.nodes_per_layer(); ++flat)
        grid.at(n_steps, flat) = prob.terminal_reward(grid.node(flat));

    // Truncation check: how far quadrature nodes of a core-window state can
    // travel versus the padding, with one increment sigma of slack declared.
    double escape_margin = 0.0, node_reach = 0.0;
    double max_node = 0.0;
    for (const Vec& z : engine.standardized_nodes()) max_node = std::max(max_node, z.cwiseAbs().maxCoeff());
    for (int m = 0; m < prob.mode_count(); ++m) {
        const ModeDecomposition& md = decomp.modes[m];
        const double sig_norm = md.sbar.cwiseAbs().rowwise().sum().maxCoeff();
        escape_margin = std::max(escape_margin, sig_norm * std::sqrt(h));
        double drift_norm = md.drift_const.cwiseAbs().maxCoeff();
        for (std::size_t f = 0; f < 2; ++f) {
            const Vec corner = f == 0 ? spec.lo : spec.hi;
            drift_norm = std::max(drift_norm, decomp.underlying_drift(m, corner).cwiseAbs().maxCoeff());
        }
        node_reach = std::max(node_reach, drift_norm * h + max_node * sig_norm * std::sqrt(h));
    }
    if (node_reach > reach + escape_margin) {
        std::ostringstream os;
        os << "quadrature nodes reach " << node_reach << " from the core window, beyond the padding "
           << reach << " plus margin " << escape_margin << "; values near the boundary rely on extrapolation";
        grid.warnings.push_back(os.str());
    }

    const int n_threads = std::max(1, spec.threads);
    for (int step = n_steps - 1; step >= 0; --step) {
        const int next = step + 1;
        SpaceFn phi = [&grid, next](const Vec& y) { return grid.value_at_layer(next, y); };
        const double t = times[step];
        auto worker = [&](std::size_t begin, std::size_t end) {
            for (std::size_t flat = begin; flat < end; ++flat) {
                const Vec x = grid.node(flat);
                grid.at(step, flat) = apply_step(cfg, prob, decomp, engine, t, phi, x).value;
            }
        };
        if (n_threads == 1) {
            worker(0, grid.nodes_per_layer());
        } else {
            std::vector<std::thread> pool;
            const std::size_t chunk = (grid.nodes_per_layer() + n_threads - 1) / n_threads;
            for (int w = 0; w < n_threads; ++w) {
                const std::size_t begin = w * chunk;
                const std::size_t end = std::min(grid.nodes_per_layer(), begin + chunk);
                if (begin < end) pool.emplace_back(worker, begin, end);
            }
            for (auto& th : pool) th.join();
        }
    }
    return grid;
}

ConvergenceStudy convergence_study(const ControlProblem& prob, const Decomposition& decomp,
                                   SchemeConfig cfg, const Engine& engine, GridSpec spec,
                                   const std::vector<double>& h_list, int riccati_mode,
                                   double riccati_dt) {
    if (h_list.empty()) fail(ErrorKind::config, "convergence_study: empty h list");
    const RiccatiSolution oracle = riccati_solve(prob, riccati_mode, riccati_dt);
    ConvergenceStudy study;
    const std::vector<int> base_points = spec.points;
    const double base_h = h_list.front();
    for (double h : h_list) {
        cfg.h = h;
        // Grid spacing scales with sqrt(h), the natural coupling for these
        // schemes; the h-list front pins the base resolution.
        for (std::size_t a = 0; a < base_points.size(); ++a) {
            const double scale = std::sqrt(base_h / h);
            spec.points[a] = 1 + static_cast<int>(std::lround((base_points[a] - 1) * scale));
        }
        const ValueGrid grid = solve_grid(prob, decomp, cfg, engine, spec);
        double sup = 0.0;
        // Compare on core-window nodes only.
        for (std::size_t flat = 0; flat < grid.nodes_per_layer(); ++flat) {
            const Vec x = grid.node(flat);
            bool core = true;
            for (int a = 0; a < prob.dim_x; ++a)
                if (x[a] < spec.lo[a] - 1e-12 || x[a] > spec.hi[a] + 1e-12) core = false;
            if (!core) continue;
            sup = std::max(sup, std::abs(grid.at(0, flat) - oracle.value(0.0, x)));
        }
        study.rows.push_back({h, sup});
    }
    std::vector<double> hs, errs;
    for (const auto& r : study.rows) {
        hs.push_back(r.h);
        errs.push_back(r.sup_error);
    }
    study.order_fitted = fit_order(hs, errs, study.fitted_order);
    return study;
}

}  // namespace hjb
