#pragma once

// Self-verification suite: exact identities, adjoint consistency,
// projection optimality and convergence checks, each with an independent
// oracle. Shared by the `selftest` command and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bathtub.hpp"
#include "benchmarks.hpp"
#include "control.hpp"
#include "oscillation.hpp"
#include "parabolic.hpp"

namespace paracontrol::verify {

struct Check {
    std::string name;
    double value = 0.0;      // measured quantity
    double threshold = 0.0;  // bound it is compared against
    bool pass = false;
    std::string detail;
};

inline Check make_check(std::string name, double value, double threshold, bool pass, std::string detail = {}) {
    return {std::move(name), value, threshold, pass, std::move(detail)};
}

// ---------------------------------------------------------------------------
// oracles

/// Adaptive Simpson quadrature with Richardson correction.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double a0, double b0, double fa, double fm, double fb, double whole, double eps, int depth) {
            const double m = 0.5 * (a0 + b0);
            const double lm = 0.5 * (a0 + m);
            const double rm = 0.5 * (m + b0);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = (m - a0) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b0 - m) / 6.0 * (fm + 4.0 * frm + fb);
            const double delta = left + right - whole;
            if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
            return rec(a0, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
                   rec(m, b0, fm, frm, fb, right, 0.5 * eps, depth - 1);
        };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50);
}

/// Weighted projection onto {lo <= y <= hi, mean = V0} by enumerating every
/// (lower, free, upper) assignment, solving the equality-constrained QP on
/// the free set and keeping the closest primal-feasible candidate.
inline std::vector<double> brute_force_projection(const std::vector<double>& z, const std::vector<double>& w,
                                                  const Constraints& cons) {
    const int n = static_cast<int>(z.size());
    double total = 0.0;
    for (double v : w) total += v;
    int combos = 1;
    for (int i = 0; i < n; ++i) combos *= 3;
    std::vector<double> best;
    double best_dist = std::numeric_limits<double>::infinity();
    std::vector<double> y(n);
    for (int code = 0; code < combos; ++code) {
        int c = code;
        double fixed = 0.0, free_w = 0.0, free_z = 0.0;
        std::vector<int> state(n);
        for (int i = 0; i < n; ++i) {
            state[i] = c % 3;
            c /= 3;
            if (state[i] == 0) fixed += w[i] * cons.lower();
            if (state[i] == 2) fixed += w[i] * cons.upper();
            if (state[i] == 1) {
                free_w += w[i];
                free_z += w[i] * z[i];
            }
        }
        if (free_w == 0.0) {
            if (std::abs(fixed - cons.mean * total) > 1e-12 * total) continue;
            for (int i = 0; i < n; ++i) y[i] = state[i] == 0 ? cons.lower() : cons.upper();
        } else {
            const double shift = (free_z + fixed - cons.mean * total) / free_w;
            bool ok = true;
            for (int i = 0; i < n; ++i) {
                if (state[i] == 1) {
                    y[i] = z[i] - shift;
                    if (y[i] < cons.lower() - 1e-14 || y[i] > cons.upper() + 1e-14) ok = false;
                } else {
                    y[i] = state[i] == 0 ? cons.lower() : cons.upper();
                }
            }
            if (!ok) continue;
        }
        double d = 0.0;
        for (int i = 0; i < n; ++i) d += w[i] * (y[i] - z[i]) * (y[i] - z[i]);
        if (d < best_dist) {
            best_dist = d;
            best = y;
        }
    }
    return best;
}

/// max <p, y> over the slice polytope, by enumerating its vertices: all
/// coordinates at a bound except at most one, which absorbs the mean.
inline double brute_force_linear_max(const std::vector<double>& p, const std::vector<double>& w,
                                     const Constraints& cons) {
    const int n = static_cast<int>(p.size());
    double total = 0.0;
    for (double v : w) total += v;
    double best = -std::numeric_limits<double>::infinity();
    for (int free = -1; free < n; ++free) {
        for (int bits = 0; bits < (1 << n); ++bits) {
            double fixed = 0.0, val = 0.0;
            for (int i = 0; i < n; ++i) {
                if (i == free) continue;
                const double b = (bits >> i) & 1 ? cons.upper() : cons.lower();
                fixed += w[i] * b;
                val += w[i] * p[i] * b;
            }
            if (free < 0) {
                if (std::abs(fixed - cons.mean * total) > 1e-12 * total) continue;
            } else {
                const double yf = (cons.mean * total - fixed) / w[free];
                if (yf < cons.lower() - 1e-12 || yf > cons.upper() + 1e-12) continue;
                val += w[free] * p[free] * yf;
            }
            best = std::max(best, val);
        }
    }
    return best;
}

/// Uniform random feasible slice: rejection-free by projecting a random box point.
inline std::vector<double> random_feasible_slice(std::mt19937_64& rng, const Grid& grid, const Constraints& cons) {
    std::uniform_real_distribution<double> box(cons.lower(), cons.upper());
    std::vector<double> z(grid.size());
    for (double& v : z) v = box(rng);
    return bathtub_project_slice(z, cons, grid).y;
}

inline SpaceTimeField random_field(std::mt19937_64& rng, const TimeGrid& time, const Grid& grid, double lo = -1.0,
                                   double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    SpaceTimeField f = SpaceTimeField::zeros(time, grid);
    for (double& v : f.values()) v = d(rng);
    return f;
}

inline double weighted_distance(std::span<const double> a, std::span<const double> b, const Grid& grid) {
    double s = 0.0;
    for (int j = 0; j < grid.size(); ++j) s += grid.weights()[j] * (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// exact identities

/// closed_norm of the free expansion against sum_{k,k'} a a' <phi, phi'>
/// (1 - e^{-(l + l') T}) / (l + l') built from the discrete Gram matrix.
inline Check free_expansion_identity() {
    const Grid grid = Grid::build(1.0, 64, Boundary::dirichlet);
    const TimeGrid time(0.25, 64);
    const SpectralBasis basis = discrete_eigenbasis(grid, grid.size());
    const Interval iv{0.2, 0.5};
    const RegionMask omega = region_mask(grid, std::span(&iv, 1));
    const OscillatingDatum d = build_oscillating_datum(basis, grid, omega, 8);
    const FreeExpansion fe = free_expansion(basis, d, grid, time);
    double oracle = 0.0;
    for (std::size_t i = 0; i < d.modes.size(); ++i) {
        for (std::size_t k = 0; k < d.modes.size(); ++k) {
            const Mode& a = basis.mode(d.modes[i]);
            const Mode& b = basis.mode(d.modes[k]);
            const double rate = a.lambda_discrete + b.lambda_discrete;
            oracle += d.coefficients[i] * d.coefficients[k] * inner(a.vector, b.vector, grid) *
                      (-std::expm1(-rate * time.horizon())) / rate;
        }
    }
    const double err = std::abs(fe.closed_norm - oracle) / std::abs(oracle);
    return make_check("free-expansion norm identity (rel)", err, 1e-12, err <= 1e-12);
}

inline Check laplace_moment_matrix() {
    double worst = 0.0;
    for (int m : {0, 1, 2, 3}) {
        for (double k : {1.0, 10.0, 100.0}) {
            for (double T : {0.5, 1.0, 2.0}) {
                const double exact = laplace_moment(m, k, T);
                // panels keep the sharp e^{-kt} peak from hiding between samples
                const int panels = 64;
                double quad = 0.0;
                for (int i = 0; i < panels; ++i) {
                    quad += adaptive_simpson([&](double t) { return std::pow(t, m) * std::exp(-k * t); },
                                             T * i / panels, T * (i + 1) / panels, 1e-15 * exact / panels);
                }
                worst = std::max(worst, std::abs(exact - quad) / std::abs(quad));
            }
        }
    }
    return make_check("Laplace moments vs adaptive quadrature (rel)", worst, 1e-9, worst <= 1e-9);
}

/// theta(t_m) = rho^m phi_1 for the Dirichlet heat equation.
inline Check cn_eigenmode_decay() {
    const Grid grid = Grid::build(1.0, 64, Boundary::dirichlet);
    const TimeGrid time(0.5, 100);
    const SpectralBasis basis = discrete_eigenbasis(grid, 1);
    const Mode& phi = basis.mode(1);
    LinearParabolicInstance inst{SpaceTimeField::zeros(time, grid), SpaceTimeField::zeros(time, grid), phi.vector, 0,
                                 Direction::forward};
    const SpaceTimeField theta = solve_linear(inst, grid, time);
    const double x = 0.5 * time.dt() * phi.lambda_discrete;
    const double rho = (1.0 - x) / (1.0 + x);
    double err = 0.0;
    for (int m = 0; m < time.nodes(); ++m) {
        const double amp = std::pow(rho, m);
        for (int j = 0; j < grid.size(); ++j) err = std::max(err, std::abs(theta(m, j) - amp * phi.vector[j]));
    }
    return make_check("CN eigenmode decay (max abs)", err, 1e-12, err <= 1e-12);
}

// ---------------------------------------------------------------------------
// adjoint consistency

inline Check duality_suite(const Problem& problem, const std::string& label, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const SpaceTimeField y = SpaceTimeField::constant(problem.time, problem.grid, problem.constraints.mean);
    const SpaceTimeField u = solve_state(problem, y);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const SpaceTimeField h = random_field(rng, problem.time, problem.grid);
        const SpaceTimeField w = random_field(rng, problem.time, problem.grid);
        const double scale = st_norm(h, problem.time, problem.grid) * st_norm(w, problem.time, problem.grid);
        worst = std::max(worst, duality_defect(problem, u, h, w) / scale);
    }
    return make_check("duality defect, " + label + " (rel)", worst, 1e-10, worst <= 1e-10);
}

inline Check gradient_suite(const Problem& problem, const std::string& label, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const SpaceTimeField y = SpaceTimeField::constant(problem.time, problem.grid, problem.constraints.mean);
    const SpaceTimeField p = eval_gradient(problem, y);
    const double eps = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const SpaceTimeField h = random_field(rng, problem.time, problem.grid);
        const double pairing = st_inner(p, h, problem.time, problem.grid);
        const double fd = (eval_cost(problem, axpy(y, eps, h)) - eval_cost(problem, axpy(y, -eps, h))) / (2.0 * eps);
        worst = std::max(worst, std::abs(pairing - fd) / (std::abs(pairing) + 1e-10 / 1e-6));
    }
    return make_check("gradient vs central differences, " + label + " (rel)", worst, 1e-6, worst <= 1e-6);
}

inline Check second_variation_suite(const Problem& problem, const std::string& label, double eps, double tol,
                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const SpaceTimeField y = SpaceTimeField::constant(problem.time, problem.grid, problem.constraints.mean);
    const double j0 = eval_cost(problem, y);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const SpaceTimeField h = random_field(rng, problem.time, problem.grid);
        const double q = second_variation(problem, y, h);
        const double fd =
            (eval_cost(problem, axpy(y, eps, h)) - 2.0 * j0 + eval_cost(problem, axpy(y, -eps, h))) / (eps * eps);
        worst = std::max(worst, std::abs(q - fd) / std::abs(q));
    }
    return make_check("second variation vs second differences, " + label + " (rel)", worst, tol, worst <= tol);
}

// ---------------------------------------------------------------------------
// projections

inline std::vector<Check> projection_suite(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> cells(4, 6);
    std::uniform_int_distribution<int> bcs(0, 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto random_problem = [&](Grid& grid, Constraints& cons) {
        const Boundary bc = bcs(rng) ? Boundary::neumann : Boundary::dirichlet;
        const int n = cells(rng) + (bc == Boundary::dirichlet ? 1 : 0);
        grid = Grid::build(0.5 + unit(rng), n, bc);
        cons.kappa0 = unit(rng) < 0.3 ? 0.0 : unit(rng);
        cons.kappa1 = 0.1 + unit(rng);
        cons.mean = -cons.kappa0 + unit(rng) * (cons.kappa0 + cons.kappa1);
    };
    Grid grid = Grid::build(1.0, 4, Boundary::neumann);
    Constraints cons;

    double proj_err = 0.0, idem = 0.0, expansion = 0.0, dominance = std::numeric_limits<double>::infinity();
    double lp_gap = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        random_problem(grid, cons);
        std::normal_distribution<double> g(cons.mean, 1.5);
        std::vector<double> z(grid.size()), z2(grid.size());
        for (double& v : z) v = g(rng);
        for (double& v : z2) v = g(rng);
        const auto y = bathtub_project_slice(z, cons, grid).y;
        const std::vector<double> w(grid.weights().begin(), grid.weights().end());
        const auto oracle = brute_force_projection(z, w, cons);
        proj_err = std::max(proj_err, weighted_distance(y, oracle, grid));
        const auto yy = bathtub_project_slice(y, cons, grid).y;
        idem = std::max(idem, weighted_distance(y, yy, grid));
        const auto y2 = bathtub_project_slice(z2, cons, grid).y;
        expansion = std::max(expansion, weighted_distance(y, y2, grid) - weighted_distance(z, z2, grid));

        // threshold_step against the vertex enumeration and random feasible slices
        const auto t = threshold_step(z, cons, grid);
        const double tv = inner(z, t, grid);
        lp_gap = std::max(lp_gap, std::abs(tv - brute_force_linear_max(z, w, cons)));
        if (trial < 100) {
            for (int s = 0; s < 100; ++s) {
                const auto f = random_feasible_slice(rng, grid, cons);
                dominance = std::min(dominance, tv - inner(z, f, grid));
            }
        }
    }
    return {
        make_check("bathtub projection vs brute-force QP (200 instances)", proj_err, 1e-9, proj_err <= 1e-9),
        make_check("bathtub projection idempotence", idem, 1e-12, idem <= 1e-12),
        make_check("bathtub projection non-expansive (excess)", expansion, 1e-12, expansion <= 1e-12),
        make_check("threshold step vs vertex enumeration", lp_gap, 1e-9, lp_gap <= 1e-9),
        make_check("threshold step dominates random feasible slices (min gap)", dominance, -1e-12,
                   dominance >= -1e-12),
    };
}

// ---------------------------------------------------------------------------
// convergence

/// Error of the logistic reduction at T against 1/(1 + e^{-T}) for two
/// resolutions (dt, dx) and (dt/2, dx/2); returns the observed order.
inline Check logistic_order() {
    auto error = [](int cells, int steps) {
        const Problem p = bench::logistic(cells, steps);
        const SpaceTimeField u = solve_state(p, SpaceTimeField::zeros(p.time, p.grid));
        const double exact = 1.0 / (1.0 + std::exp(-1.0));
        double e = 0.0;
        for (double v : u.row(p.time.steps())) e = std::max(e, std::abs(v - exact));
        return e;
    };
    const double e1 = error(8, 16);
    const double e2 = error(16, 32);
    const double order = std::log2(e1 / e2);
    return make_check("logistic reduction observed order", order, 2.0, order >= 1.9 && order <= 2.1,
                      "window [1.9, 2.1]");
}

/// Neumann diffusion with a mean-zero source conserves the discrete mass.
inline Check mass_conservation(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Problem p = bench::diffusion(64, 128, Boundary::neumann);
    SpaceTimeField y = random_field(rng, p.time, p.grid);
    for (int m = 0; m < p.time.nodes(); ++m) {
        const double avg = mean(y.row(m), p.grid);
        for (double& v : y.row(m)) v -= avg;
    }
    const SpaceTimeField u = solve_state(p, y);
    const double m0 = integrate(u.row(0), p.grid);
    double drift = 0.0;
    for (int m = 0; m < p.time.nodes(); ++m) drift = std::max(drift, std::abs(integrate(u.row(m), p.grid) - m0));
    double u0max = 0.0;
    for (double v : p.u0) u0max = std::max(u0max, std::abs(v));
    const double bound = 1e-10 * l2_norm(p.u0, p.grid) * p.grid.length();
    return make_check("mass conservation drift", drift, bound, drift <= bound);
}

/// sup_m |theta_m| <= e^{|q| T} (|theta_0| + sum_m dt |g_m|) on random instances.
inline Check energy_bound(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Boundary bc = trial % 2 ? Boundary::neumann : Boundary::dirichlet;
        const Grid grid = Grid::build(1.0, 32 + 8 * (trial % 4), bc);
        const TimeGrid time(0.5 + unit(rng), 64 + 16 * (trial % 3));
        const double qamp = 3.0 * unit(rng);
        LinearParabolicInstance inst{random_field(rng, time, grid, -qamp, qamp), random_field(rng, time, grid),
                                     std::vector<double>(grid.size()), 0, Direction::forward};
        for (double& v : inst.initial) v = 2.0 * unit(rng) - 1.0;
        const SpaceTimeField theta = solve_linear(inst, grid, time);
        double sup = 0.0, gsum = 0.0;
        for (int m = 0; m < time.nodes(); ++m) {
            sup = std::max(sup, l2_norm(theta.row(m), grid));
            gsum += time.dt() * l2_norm(inst.source.row(m), grid);
        }
        const double bound = std::exp(inst.potential.max_abs() * time.horizon()) * (l2_norm(inst.initial, grid) + gsum);
        worst = std::max(worst, sup / bound);
    }
    return make_check("parabolic energy bound (max sup/bound over 20)", worst, 1.0, worst <= 1.0);
}

// ---------------------------------------------------------------------------

inline std::vector<Check> exact_identity_checks() {
    return {free_expansion_identity(), laplace_moment_matrix(), cn_eigenmode_decay()};
}

inline std::vector<Check> adjoint_checks() {
    const Problem zero = bench::diffusion();
    const Problem mono = bench::monostable();
    const Problem bi = bench::bistable();
    std::vector<Check> out{
        duality_suite(zero, "zero f", 11),
        duality_suite(mono, "monostable", 12),
        duality_suite(bi, "bistable", 13),
        gradient_suite(zero, "zero f", 21),
        gradient_suite(mono, "monostable", 22),
        gradient_suite(bi, "bistable", 23),
        second_variation_suite(bi, "bistable", 1e-2, 1e-4, 31),
    };
    // f = 0 with j1 = u^2: J is exactly quadratic in y
    Problem quad = bench::diffusion();
    quad.cost = {CostTerm::Family::quadratic, CostTerm::Family::zero};
    out.push_back(second_variation_suite(quad, "quadratic", 4.0, 1e-10, 32));
    return out;
}

inline std::vector<Check> projection_checks() { return projection_suite(41); }

inline std::vector<Check> convergence_checks() { return {logistic_order(), mass_conservation(51), energy_bound(52)}; }

}  // namespace paracontrol::verify
