#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bathtub.hpp"
#include "field.hpp"
#include "model.hpp"
#include "parabolic.hpp"

namespace paracontrol {

/// J from a computed state: trapezoid in time of the j1 quadrature plus the
/// terminal quadrature of j2.
inline double cost_of_state(const Problem& problem, const SpaceTimeField& u) {
    const Grid& grid = problem.grid;
    const TimeGrid& time = problem.time;
    const auto w = grid.weights();
    double running = 0.0;
    if (problem.cost.running.family() != CostTerm::Family::zero) {
        for (int m = 0; m < time.nodes(); ++m) {
            double s = 0.0;
            for (int j = 0; j < grid.size(); ++j) s += w[j] * problem.cost.running.value(u(m, j));
            running += time.weight(m) * s;
        }
    }
    double terminal = 0.0;
    for (int j = 0; j < grid.size(); ++j) terminal += w[j] * problem.cost.terminal.value(u(time.steps(), j));
    return running + terminal;
}

inline double eval_cost(const Problem& problem, const SpaceTimeField& y) {
    return cost_of_state(problem, solve_state(problem, y));
}

/// Gradient of J in the discrete space-time product (st_inner): the adjoint state.
inline SpaceTimeField eval_gradient(const Problem& problem, const SpaceTimeField& y) {
    return solve_adjoint(problem, solve_state(problem, y));
}

/// Quadratic form of the second derivative of J at y in direction h:
///   sum_t sum_x du^2 (p f_uu + j1_uu) + sum_x du(T)^2 j2_uu.
inline double second_variation(const Problem& problem, const SpaceTimeField& y, const SpaceTimeField& h) {
    const Grid& grid = problem.grid;
    const TimeGrid& time = problem.time;
    const SpaceTimeField u = solve_state(problem, y);
    const SpaceTimeField p = solve_adjoint(problem, u);
    const SpaceTimeField du = solve_linearized(problem, u, h);
    const auto w = grid.weights();
    double s = 0.0;
    for (int m = 0; m < time.nodes(); ++m) {
        double row = 0.0;
        for (int j = 0; j < grid.size(); ++j) {
            const double z = p(m, j) * problem.f.duu(m, j, u(m, j)) + problem.cost.running.duu(u(m, j));
            row += w[j] * du(m, j) * du(m, j) * z;
        }
        s += time.weight(m) * row;
    }
    const int nt = time.steps();
    for (int j = 0; j < grid.size(); ++j) {
        s += w[j] * du(nt, j) * du(nt, j) * problem.cost.terminal.duu(u(nt, j));
    }
    return s;
}

/// Per-node shift c(t) of the last projection and the resulting slice means.
struct ThresholdProfile {
    std::vector<double> c;
    std::vector<double> achieved_mean;
};

struct ProjectedControl {
    SpaceTimeField y;
    ThresholdProfile profile;
};

inline ProjectedControl project_control(const SpaceTimeField& z, const Constraints& cons, const Grid& grid,
                                        const TimeGrid& time) {
    check_shape(z, time, grid, "project_control");
    ProjectedControl out{SpaceTimeField::zeros(time, grid), {}};
    out.profile.c.resize(time.nodes());
    out.profile.achieved_mean.resize(time.nodes());
    for (int m = 0; m < time.nodes(); ++m) {
        auto slice = bathtub_project_slice(z.row(m), cons, grid);
        std::copy(slice.y.begin(), slice.y.end(), out.y.row(m).begin());
        out.profile.c[m] = slice.threshold;
        out.profile.achieved_mean[m] = mean(slice.y, grid);
    }
    return out;
}

/// Width of the level-set band exempted by first_order_residual.
inline double level_band(const SpaceTimeField& p) { return 1e-9 * p.max_abs(); }

/// Distance of y from the switching structure dictated by p: on each slice,
/// y should be kappa1 where p > c(t) and -kappa0 where p < c(t). Dofs with
/// |p - c(t)| <= band are exempt. Returns the time-integrated violation mass.
inline double first_order_residual(const SpaceTimeField& y, const SpaceTimeField& p, const Constraints& cons,
                                   const Grid& grid, const TimeGrid& time) {
    check_shape(y, time, grid, "first_order_residual control");
    check_shape(p, time, grid, "first_order_residual adjoint");
    const double band = level_band(p);
    const auto w = grid.weights();
    double total = 0.0;
    for (int m = 0; m < time.nodes(); ++m) {
        const double c = threshold_level(p.row(m), cons, grid).level;
        double s = 0.0;
        for (int j = 0; j < grid.size(); ++j) {
            const double d = p(m, j) - c;
            if (std::abs(d) <= band) continue;
            const double target = d > 0.0 ? cons.upper() : cons.lower();
            s += w[j] * std::abs(y(m, j) - target);
        }
        total += time.weight(m) * s;
    }
    return total;
}

/// Z_y = p f_uu(u) + j1_uu(u) for a given state/adjoint pair.
inline SpaceTimeField compute_Z(const Problem& problem, const SpaceTimeField& u, const SpaceTimeField& p) {
    SpaceTimeField z = SpaceTimeField::zeros(problem.time, problem.grid);
    for (int m = 0; m < z.nodes(); ++m) {
        for (int j = 0; j < z.dofs(); ++j) {
            z(m, j) = p(m, j) * problem.f.duu(m, j, u(m, j)) + problem.cost.running.duu(u(m, j));
        }
    }
    return z;
}

inline SpaceTimeField compute_Z(const Problem& problem, const SpaceTimeField& y) {
    const SpaceTimeField u = solve_state(problem, y);
    return compute_Z(problem, u, solve_adjoint(problem, u));
}

/// Space-time set where the control does not saturate the box.
struct SpaceTimeMask {
    int nodes = 0;
    int dofs = 0;
    std::vector<char> flags;
    double measure = 0.0;

    bool operator()(int m, int j) const { return flags[static_cast<std::size_t>(m) * dofs + j] != 0; }
};

inline double default_abnormal_tolerance(const Constraints& cons) { return 1e-6 * (cons.kappa0 + cons.kappa1); }

inline SpaceTimeMask abnormal_mask(const SpaceTimeField& y, const Constraints& cons, double tol, const Grid& grid,
                                   const TimeGrid& time) {
    check_shape(y, time, grid, "abnormal_mask");
    SpaceTimeMask mask{time.nodes(), grid.size(), std::vector<char>(y.values().size(), 0), 0.0};
    const auto w = grid.weights();
    for (int m = 0; m < time.nodes(); ++m) {
        for (int j = 0; j < grid.size(); ++j) {
            const double v = y(m, j);
            if (v > cons.lower() + tol && v < cons.upper() - tol) {
                mask.flags[static_cast<std::size_t>(m) * grid.size() + j] = 1;
                mask.measure += time.weight(m) * w[j];
            }
        }
    }
    return mask;
}

struct SliceDiagnostics {
    double t = 0.0;
    double c = 0.0;
    double bang_fraction = 0.0;
    double abnormal_mass = 0.0;
    double max_z_abnormal = -std::numeric_limits<double>::infinity();
    bool convex = false;
    bool bang_bang = false;
};

/// Second-order diagnostics at a (converged) control.
struct SecondOrderReport {
    double first_order_residual = 0.0;
    double abnormal_measure = 0.0;
    double total_measure = 0.0;
    double bang_fraction = 0.0;
    double z_sup = 0.0;  // max |Z| over all nodes
    double z_max_abnormal = -std::numeric_limits<double>::infinity();
    double z_p99_abnormal = -std::numeric_limits<double>::infinity();
    double eta = 0.0;
    bool sign_condition = true;      // 99th percentile of Z on the abnormal set <= eta
    bool sign_condition_max = true;  // max of Z on the abnormal set <= 5 eta
    int convex_slices = 0;
    int convex_slices_not_bang_bang = 0;
    std::vector<SliceDiagnostics> slices;
};

namespace detail {

/// f and j1 convex in u on a sample of the observed state range.
inline bool slice_is_convex(const Problem& problem, int m, double umin, double umax) {
    constexpr int samples = 33;
    for (int s = 0; s < samples; ++s) {
        const double u = umin + (umax - umin) * s / (samples - 1);
        if (problem.cost.running.duu(u) < -1e-10) return false;
        for (int j = 0; j < problem.grid.size(); ++j) {
            if (problem.f.duu(m, j, u) < -1e-10) return false;
        }
    }
    return true;
}

}  // namespace detail

inline SecondOrderReport second_order_report(const Problem& problem, const SpaceTimeField& y, double tol) {
    const Grid& grid = problem.grid;
    const TimeGrid& time = problem.time;
    const Constraints& cons = problem.constraints;
    const SpaceTimeField u = solve_state(problem, y);
    const SpaceTimeField p = solve_adjoint(problem, u);
    const SpaceTimeField z = compute_Z(problem, u, p);
    const SpaceTimeMask mask = abnormal_mask(y, cons, tol, grid, time);
    const auto w = grid.weights();

    SecondOrderReport rep;
    rep.first_order_residual = first_order_residual(y, p, cons, grid, time);
    rep.abnormal_measure = mask.measure;
    rep.total_measure = time.horizon() * grid.total_weight();
    rep.bang_fraction = 1.0 - mask.measure / rep.total_measure;
    rep.z_sup = z.max_abs();
    rep.eta = 1e-2 * std::max(1.0, rep.z_sup);

    const double umin = *std::min_element(u.values().begin(), u.values().end());
    const double umax = *std::max_element(u.values().begin(), u.values().end());
    double wmax = 0.0;
    for (double v : w) wmax = std::max(wmax, v);

    std::vector<double> zab;
    for (int m = 0; m < time.nodes(); ++m) {
        SliceDiagnostics sd;
        sd.t = time.t(m);
        sd.c = threshold_level(p.row(m), cons, grid).level;
        for (int j = 0; j < grid.size(); ++j) {
            if (mask(m, j)) {
                sd.abnormal_mass += w[j];
                sd.max_z_abnormal = std::max(sd.max_z_abnormal, z(m, j));
                zab.push_back(z(m, j));
            }
        }
        sd.bang_fraction = 1.0 - sd.abnormal_mass / grid.total_weight();
        // one partially filled dof is forced by the mean constraint
        sd.bang_bang = sd.abnormal_mass <= wmax * (1.0 + 1e-12);
        sd.convex = detail::slice_is_convex(problem, m, umin, umax);
        if (sd.convex) {
            ++rep.convex_slices;
            if (!sd.bang_bang) ++rep.convex_slices_not_bang_bang;
        }
        rep.slices.push_back(sd);
    }
    if (!zab.empty()) {
        std::sort(zab.begin(), zab.end());
        rep.z_max_abnormal = zab.back();
        const auto rank = static_cast<std::size_t>(std::ceil(0.99 * zab.size()));
        rep.z_p99_abnormal = zab[std::max<std::size_t>(rank, 1) - 1];
        rep.sign_condition = rep.z_p99_abnormal <= rep.eta;
        rep.sign_condition_max = rep.z_max_abnormal <= 5.0 * rep.eta;
    }
    return rep;
}

enum class AscentMode { projected_gradient, thresholding };

struct AscentOptions {
    int max_iters = 200;
    double tol = 1e-8;
    AscentMode mode = AscentMode::projected_gradient;
    double armijo = 1e-4;
    int max_backtracks = 30;
    double damping = 0.5;  // thresholding average weight
};

struct IterationRecord {
    int iter = 0;
    double cost = 0.0;
    double step = 0.0;
    double residual = 0.0;
};

struct OptimizationTrace {
    std::vector<IterationRecord> records;
    std::vector<std::string> warnings;
    SpaceTimeField y;
    SpaceTimeField adjoint;
    int iterations = 0;
    bool converged = false;

    double final_cost() const { return records.empty() ? 0.0 : records.back().cost; }
    double final_residual() const { return records.empty() ? 0.0 : records.back().residual; }
};

/// Ascent on J over the admissible set.
///
/// projected_gradient: y <- P(y + s p) with Armijo backtracking on the
/// predicted gain <p, y_new - y>; the trial step doubles after each accepted
/// step. thresholding: y <- P((1 - a) y + a T(p)) with T the slice-wise
/// threshold_step.
inline OptimizationTrace ascend(const Problem& problem, const SpaceTimeField& y0, const AscentOptions& opts = {}) {
    const Grid& grid = problem.grid;
    const TimeGrid& time = problem.time;
    const Constraints& cons = problem.constraints;
    problem.validate();

    OptimizationTrace trace;
    SpaceTimeField y = project_control(y0, cons, grid, time).y;
    SpaceTimeField u = solve_state(problem, y);
    double cost = cost_of_state(problem, u);
    double step = 0.0;
    double trial_step = 0.0;

    for (int k = 0;; ++k) {
        const SpaceTimeField p = solve_adjoint(problem, u);
        const double res = first_order_residual(y, p, cons, grid, time);
        trace.records.push_back({k, cost, step, res});
        trace.iterations = k;
        if (res <= opts.tol) {
            trace.converged = true;
            trace.y = y;
            trace.adjoint = p;
            break;
        }
        if (k >= opts.max_iters) {
            trace.y = y;
            trace.adjoint = p;
            break;
        }

        if (opts.mode == AscentMode::thresholding) {
            SpaceTimeField target = SpaceTimeField::zeros(time, grid);
            for (int m = 0; m < time.nodes(); ++m) {
                const auto t = threshold_step(p.row(m), cons, grid);
                std::copy(t.begin(), t.end(), target.row(m).begin());
            }
            SpaceTimeField mixed = (1.0 - opts.damping) * y + opts.damping * target;
            y = project_control(mixed, cons, grid, time).y;
            u = solve_state(problem, y);
            const double next = cost_of_state(problem, u);
            if (next < cost) {
                trace.warnings.push_back("iteration " + std::to_string(k + 1) + ": cost decreased by " +
                                         std::to_string(cost - next));
            }
            cost = next;
            step = opts.damping;
            continue;
        }

        const double pmax = p.max_abs();
        if (trial_step == 0.0) {
            trial_step = (cons.kappa0 + cons.kappa1) / std::max(pmax, 1e-300);
        }
        double s = trial_step;
        bool accepted = false;
        bool stalled = false;
        for (int b = 0; b <= opts.max_backtracks; ++b, s *= 0.5) {
            SpaceTimeField candidate = project_control(axpy(y, s, p), cons, grid, time).y;
            const double gain = st_inner(p, candidate - y, time, grid);
            if (!(gain > 0.0)) {
                stalled = true;
                break;
            }
            SpaceTimeField cu = solve_state(problem, candidate);
            const double next = cost_of_state(problem, cu);
            // cost differences below rounding are not evidence of a decrease
            const double noise = 8.0 * std::numeric_limits<double>::epsilon() * (std::abs(cost) + std::abs(next));
            if (next >= cost + opts.armijo * gain - noise) {
                y = std::move(candidate);
                u = std::move(cu);
                cost = next;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            trace.warnings.push_back(std::string("iteration ") + std::to_string(k + 1) +
                                     (stalled ? ": projected step has no predicted gain" : ": line search failed"));
            trace.y = y;
            trace.adjoint = p;
            break;
        }
        step = s;
        trial_step = 2.0 * s;
    }
    return trace;
}

}  // namespace paracontrol
