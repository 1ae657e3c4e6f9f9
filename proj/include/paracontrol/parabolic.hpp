#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "tridiag.hpp"

namespace paracontrol {

enum class Direction { forward, backward };

/// theta_t - Delta theta - q theta = g with a Cauchy datum imposed at node
/// `start` (default: 0 forward, nt backward). The solution is zero on the
/// nodes before (forward) or after (backward) the start node.
struct LinearParabolicInstance {
    SpaceTimeField potential;
    SpaceTimeField source;
    std::vector<double> initial;
    std::optional<int> start;
    Direction direction = Direction::forward;
};

namespace detail {

inline void require_finite(const SpaceTimeField& f, const char* what) {
    if (!f.all_finite()) throw std::invalid_argument(std::string(what) + " has non-finite entries");
}

inline void require_finite(std::span<const double> f, const char* what) {
    for (double v : f) {
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " has non-finite entries");
    }
}

inline double row_max_abs(std::span<const double> r) {
    double s = 0.0;
    for (double v : r) s = std::max(s, std::abs(v));
    return s;
}

/// Implicit CN operator I - dt/2 (Delta_h + diag(q_row)).
inline Tridiag implicit_operator(const Tridiag& base, std::span<const double> q_row, double dt) {
    Tridiag m = base;
    for (int j = 0; j < m.size(); ++j) m.diag[j] -= 0.5 * dt * q_row[j];
    return m;
}

inline Tridiag explicit_operator(const Tridiag& base, std::span<const double> q_row, double dt) {
    Tridiag m = base;
    for (int j = 0; j < m.size(); ++j) m.diag[j] += 0.5 * dt * q_row[j];
    return m;
}

/// Singular step matrices are excluded once dt * max(q) / 2 < 1.
inline void check_potential_step(std::span<const double> q_row, double dt, int m) {
    double qmax = 0.0;
    for (double v : q_row) qmax = std::max(qmax, v);
    if (!(0.5 * dt * qmax < 1.0)) {
        throw StepFailure("step matrix may be singular: dt * max(q) = " + std::to_string(dt * qmax) + " >= 2", m);
    }
}

}  // namespace detail

/// Crank-Nicolson solve of a linear parabolic problem with potential.
inline SpaceTimeField solve_linear(const LinearParabolicInstance& inst, const Grid& grid, const TimeGrid& time) {
    check_shape(inst.potential, time, grid, "solve_linear potential");
    check_shape(inst.source, time, grid, "solve_linear source");
    check_size(inst.initial, grid, "solve_linear initial datum");
    detail::require_finite(inst.potential, "potential");
    detail::require_finite(inst.source, "source");
    detail::require_finite(inst.initial, "initial datum");

    const int nt = time.steps();
    const bool fwd = inst.direction == Direction::forward;
    const int start = inst.start.value_or(fwd ? 0 : nt);
    if (start < 0 || start > nt) {
        throw std::invalid_argument("solve_linear: start index " + std::to_string(start) + " outside [0, nt]");
    }

    const double dt = time.dt();
    const int n = grid.size();
    const Tridiag lhs_base = shifted_laplacian(grid, -0.5 * dt);
    const Tridiag rhs_base = shifted_laplacian(grid, 0.5 * dt);

    SpaceTimeField theta = SpaceTimeField::zeros(time, grid);
    std::copy(inst.initial.begin(), inst.initial.end(), theta.row(start).begin());

    std::vector<double> rhs(n);
    const int step = fwd ? 1 : -1;
    for (int from = start; fwd ? from < nt : from > 0; from += step) {
        const int to = from + step;
        detail::check_potential_step(inst.potential.row(to), dt, to);
        const Tridiag lhs = detail::implicit_operator(lhs_base, inst.potential.row(to), dt);
        const Tridiag expl = detail::explicit_operator(rhs_base, inst.potential.row(from), dt);
        expl.multiply(theta.row(from), rhs);
        const auto g0 = inst.source.row(from);
        const auto g1 = inst.source.row(to);
        for (int j = 0; j < n; ++j) rhs[j] += 0.5 * dt * (g0[j] + g1[j]);
        if (!thomas_solve(lhs, rhs, theta.row(to))) {
            throw StepFailure("singular Crank-Nicolson step matrix", to);
        }
    }
    return theta;
}

struct NewtonOptions {
    double tolerance = 1e-11;
    int max_iterations = 50;
    double blowup = 1e8;
};

/// Semilinear state u_t - Delta u = f(t, x, u) + y, u(0) = u0.
///
/// Crank-Nicolson in the diffusion, trapezoidal in f + y; every step is a
/// damped Newton solve of
///   (I - dt/2 Delta) v - dt/2 f(t_{m+1}, v) = (I + dt/2 Delta) u_m + dt/2 (f(t_m, u_m) + y_m + y_{m+1}).
inline SpaceTimeField solve_state(const Problem& problem, const SpaceTimeField& y, const NewtonOptions& opts = {}) {
    const Grid& grid = problem.grid;
    const TimeGrid& time = problem.time;
    problem.validate();
    check_shape(y, time, grid, "solve_state control");
    detail::require_finite(y, "control");

    const int n = grid.size();
    const double dt = time.dt();
    const Tridiag lhs_base = shifted_laplacian(grid, -0.5 * dt);
    const Tridiag rhs_base = shifted_laplacian(grid, 0.5 * dt);
    const Nonlinearity& f = problem.f;

    SpaceTimeField u = SpaceTimeField::zeros(time, grid);
    std::copy(problem.u0.begin(), problem.u0.end(), u.row(0).begin());

    std::vector<double> rhs(n), residual(n), trial(n), trial_res(n), delta(n);

    for (int m = 0; m < time.steps(); ++m) {
        const auto um = u.row(m);
        rhs_base.multiply(um, rhs);
        for (int j = 0; j < n; ++j) {
            rhs[j] += 0.5 * dt * (f.f(m, j, um[j]) + y(m, j) + y(m + 1, j));
        }
        const double scale = std::max(1.0, detail::row_max_abs(rhs));

        auto eval_residual = [&](std::span<const double> v, std::span<double> r) {
            lhs_base.multiply(v, r);
            for (int j = 0; j < n; ++j) r[j] -= 0.5 * dt * f.f(m + 1, j, v[j]) + rhs[j];
            return detail::row_max_abs(r);
        };

        auto v = u.row(m + 1);
        std::copy(um.begin(), um.end(), v.begin());
        double rnorm = eval_residual(v, residual);
        int it = 0;
        while (rnorm > opts.tolerance * scale) {
            if (it++ >= opts.max_iterations) {
                throw StepFailure("Newton did not converge, residual " + std::to_string(rnorm), m + 1);
            }
            Tridiag jac = lhs_base;
            for (int j = 0; j < n; ++j) {
                jac.diag[j] -= 0.5 * dt * f.du(m + 1, j, v[j]);
                residual[j] = -residual[j];
            }
            if (!thomas_solve(jac, residual, delta)) {
                throw StepFailure("singular Newton matrix", m + 1);
            }
            double damping = 1.0;
            double tnorm = 0.0;
            for (int halvings = 0;; ++halvings) {
                for (int j = 0; j < n; ++j) trial[j] = v[j] + damping * delta[j];
                tnorm = eval_residual(trial, trial_res);
                if (std::isfinite(tnorm) && (tnorm < rnorm || halvings >= 30)) break;
                damping *= 0.5;
            }
            std::copy(trial.begin(), trial.end(), v.begin());
            std::copy(trial_res.begin(), trial_res.end(), residual.begin());
            rnorm = tnorm;
        }
        const double umax = detail::row_max_abs(v);
        if (!(umax <= opts.blowup)) {
            throw DivergenceError("state exceeded the blow-up guard, |u| = " + std::to_string(umax), m + 1);
        }
    }
    return u;
}

/// q = f_u(t, x, u) on every node, with the runtime guard dt * |q| < 1.
inline SpaceTimeField linearization_potential(const Problem& problem, const SpaceTimeField& u) {
    check_shape(u, problem.time, problem.grid, "linearization state");
    SpaceTimeField q = SpaceTimeField::zeros(problem.time, problem.grid);
    const double dt = problem.time.dt();
    for (int m = 0; m < q.nodes(); ++m) {
        for (int j = 0; j < q.dofs(); ++j) {
            q(m, j) = problem.f.du(m, j, u(m, j));
            if (!(dt * std::abs(q(m, j)) < 1.0)) {
                throw StepFailure("stability guard violated: dt * |f_u| = " + std::to_string(dt * std::abs(q(m, j))) +
                                      " >= 1; refine the time grid",
                                  m);
            }
        }
    }
    return q;
}

/// Transpose of the linearized CN stepper with potential q.
///
/// Returns the field p such that, for the forward solution theta of
/// solve_linear(q, g = h, theta(0) = 0),
///   st_inner(theta, density) + inner(theta(T), terminal) == st_inner(h, p)
/// holds exactly (up to rounding).
inline SpaceTimeField propagate_adjoint(const SpaceTimeField& potential, const SpaceTimeField& density,
                                        std::span<const double> terminal, const Grid& grid, const TimeGrid& time) {
    check_shape(potential, time, grid, "adjoint potential");
    check_shape(density, time, grid, "adjoint density");
    check_size(terminal, grid, "adjoint terminal density");
    detail::require_finite(potential, "potential");
    detail::require_finite(density, "adjoint density");
    detail::require_finite(terminal, "adjoint terminal density");

    const int nt = time.steps();
    const int n = grid.size();
    const double dt = time.dt();
    const Tridiag lhs_base = shifted_laplacian(grid, -0.5 * dt);
    const Tridiag rhs_base = shifted_laplacian(grid, 0.5 * dt);

    // multipliers of the step equations; lambda(m) belongs to step m-1 -> m
    SpaceTimeField lambda = SpaceTimeField::zeros(time, grid);
    std::vector<double> rhs(n);
    for (int j = 0; j < n; ++j) rhs[j] = time.weight(nt) * density(nt, j) + terminal[j];
    detail::check_potential_step(potential.row(nt), dt, nt);
    if (!thomas_solve(detail::implicit_operator(lhs_base, potential.row(nt), dt), rhs, lambda.row(nt))) {
        throw StepFailure("singular adjoint step matrix", nt);
    }
    for (int m = nt - 1; m >= 1; --m) {
        detail::check_potential_step(potential.row(m), dt, m);
        detail::explicit_operator(rhs_base, potential.row(m), dt).multiply(lambda.row(m + 1), rhs);
        for (int j = 0; j < n; ++j) rhs[j] += time.weight(m) * density(m, j);
        if (!thomas_solve(detail::implicit_operator(lhs_base, potential.row(m), dt), rhs, lambda.row(m))) {
            throw StepFailure("singular adjoint step matrix", m);
        }
    }

    SpaceTimeField p = SpaceTimeField::zeros(time, grid);
    for (int j = 0; j < n; ++j) {
        p(0, j) = lambda(1, j);
        p(nt, j) = lambda(nt, j);
    }
    for (int m = 1; m < nt; ++m) {
        for (int j = 0; j < n; ++j) p(m, j) = 0.5 * (lambda(m, j) + lambda(m + 1, j));
    }
    return p;
}

/// Adjoint state p_y around the trajectory u: the discrete adjoint of the
/// state scheme with running density j1_u(u) and terminal density j2_u(u(T)).
inline SpaceTimeField solve_adjoint(const Problem& problem, const SpaceTimeField& u) {
    const Grid& grid = problem.grid;
    const TimeGrid& time = problem.time;
    check_shape(u, time, grid, "solve_adjoint state");
    detail::require_finite(u, "state");
    const SpaceTimeField q = linearization_potential(problem, u);
    SpaceTimeField density = SpaceTimeField::zeros(time, grid);
    for (int m = 0; m < time.nodes(); ++m) {
        for (int j = 0; j < grid.size(); ++j) density(m, j) = problem.cost.running.du(u(m, j));
    }
    std::vector<double> terminal(grid.size());
    for (int j = 0; j < grid.size(); ++j) terminal[j] = problem.cost.terminal.du(u(time.steps(), j));
    return propagate_adjoint(q, density, terminal, grid, time);
}

/// Directional derivative of the control-to-state map: zero Cauchy datum,
/// potential f_u(u), source h.
inline SpaceTimeField solve_linearized(const Problem& problem, const SpaceTimeField& u, const SpaceTimeField& h) {
    check_shape(h, problem.time, problem.grid, "solve_linearized direction");
    LinearParabolicInstance inst{linearization_potential(problem, u), h,
                                 std::vector<double>(problem.grid.size(), 0.0), 0, Direction::forward};
    return solve_linear(inst, problem.grid, problem.time);
}

/// Homogeneous linearized equation started from h0 at node t0_index; zero before.
inline SpaceTimeField solve_cauchy_linearized(const Problem& problem, const SpaceTimeField& u, int t0_index,
                                              std::span<const double> h0) {
    if (t0_index < 0 || t0_index >= problem.time.steps()) {
        throw std::invalid_argument("solve_cauchy_linearized: t0 index " + std::to_string(t0_index) +
                                    " outside [0, nt)");
    }
    LinearParabolicInstance inst{linearization_potential(problem, u), SpaceTimeField::zeros(problem.time, problem.grid),
                                 std::vector<double>(h0.begin(), h0.end()), t0_index, Direction::forward};
    return solve_linear(inst, problem.grid, problem.time);
}

/// |<u'(h), w> + <u'(h)(T), terminal> - <h, p_w>| where u'(h) is the
/// linearized response to h and p_w the adjoint propagation of (w, terminal).
inline double duality_defect(const Problem& problem, const SpaceTimeField& u, const SpaceTimeField& h,
                             const SpaceTimeField& w, std::span<const double> terminal = {}) {
    const Grid& grid = problem.grid;
    const TimeGrid& time = problem.time;
    check_shape(w, time, grid, "duality_defect density");
    std::vector<double> term(terminal.begin(), terminal.end());
    if (term.empty()) term.assign(grid.size(), 0.0);
    const SpaceTimeField du = solve_linearized(problem, u, h);
    const SpaceTimeField pw = propagate_adjoint(linearization_potential(problem, u), w, term, grid, time);
    const double lhs = st_inner(du, w, time, grid) + inner(du.row(time.steps()), term, grid);
    const double rhs = st_inner(h, pw, time, grid);
    return std::abs(lhs - rhs);
}

}  // namespace paracontrol
