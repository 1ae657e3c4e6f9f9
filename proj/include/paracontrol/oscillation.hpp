#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "control.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "parabolic.hpp"

namespace paracontrol {

/// int_0^T t^m e^{-kt} dt = m!/k^{m+1} P(m+1, kT), with P the regularized
/// lower incomplete gamma function. For m = 0 this is (1 - e^{-kT})/k.
inline double laplace_moment(int m, double k, double horizon) {
    if (!(k > 0.0)) throw std::invalid_argument("laplace_moment: rate must be positive, got " + std::to_string(k));
    if (m < 0) throw std::invalid_argument("laplace_moment: order must be nonnegative");
    if (!(horizon > 0.0)) throw std::invalid_argument("laplace_moment: horizon must be positive");
    const double x = k * horizon;
    double fact = 1.0;
    for (int i = 2; i <= m; ++i) fact *= i;

    double p = 0.0;
    if (x < m + 1.0) {
        // P = e^{-x} sum_{i > m} x^i / i!
        double term = std::exp(-x);
        for (int i = 1; i <= m + 1; ++i) term *= x / i;
        for (int i = m + 2; term > 1e-18 * p || i < m + 4; ++i) {
            p += term;
            term *= x / i;
            if (i > m + 400) break;
        }
    } else {
        // P = 1 - e^{-x} sum_{i <= m} x^i / i!
        double term = 1.0;
        double s = 1.0;
        for (int i = 1; i <= m; ++i) {
            term *= x / i;
            s += term;
        }
        p = m == 0 ? -std::expm1(-x) : 1.0 - std::exp(-x) * s;
    }
    return fact / std::pow(k, m + 1) * p;
}

/// How a datum is chosen inside the null space of the support constraints.
enum class NullSelection {
    min_energy,   // minimizes sum_k lambda_k a_k^2 (the smoothest admissible datum)
    lowest_mode,  // maximizes |a_K|
};

struct OscillatingDatumOptions {
    std::optional<int> max_mode;  // last admitted mode index (default: all)
    bool mean_zero_on_omega = false;
    NullSelection selection = NullSelection::min_energy;
};

/// h_K = sum_{k >= K} a_k phi_k with sum a_k^2 = 1 and supp h_K inside omega.
struct OscillatingDatum {
    int K = 0;
    std::vector<int> modes;            // admitted mode indices
    std::vector<double> coefficients;  // a_k, aligned with modes
    std::vector<double> field;         // h_K on dofs
    double off_support_residual = 0.0;
    int null_dimension = 0;
};

inline std::vector<double> synthesize(const SpectralBasis& basis, std::span<const int> modes,
                                      std::span<const double> coefficients) {
    std::vector<double> h(basis.modes.front().vector.size(), 0.0);
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const auto& phi = basis.mode(modes[i]).vector;
        for (std::size_t j = 0; j < h.size(); ++j) h[j] += coefficients[i] * phi[j];
    }
    return h;
}

inline OscillatingDatum build_oscillating_datum(const SpectralBasis& basis, const Grid& grid, const RegionMask& omega,
                                                int K, const OscillatingDatumOptions& opts = {}) {
    if (K < 1) throw std::invalid_argument("oscillating datum: K must be positive");
    if (static_cast<int>(omega.flags.size()) != grid.size()) {
        throw std::invalid_argument("oscillating datum: mask does not match grid");
    }
    if (!(omega.measure > 0.0)) throw std::invalid_argument("oscillating datum: omega has zero measure");
    const int last = std::min(opts.max_mode.value_or(basis.size()), basis.size());

    OscillatingDatum d;
    d.K = K;
    for (int k = K; k <= last; ++k) {
        if (basis.mode(k).lambda_discrete > 0.0) d.modes.push_back(k);
    }
    std::vector<int> off;
    for (int j = 0; j < grid.size(); ++j) {
        if (!omega.contains(j)) off.push_back(j);
    }
    const int rows = static_cast<int>(off.size()) + (opts.mean_zero_on_omega ? 1 : 0);
    const int cols = static_cast<int>(d.modes.size());
    if (cols <= rows) {
        throw InfeasibleConstruction("oscillating datum for K = " + std::to_string(K) + ": " + std::to_string(cols) +
                                     " admitted modes against " + std::to_string(rows) +
                                     " support constraints, deficit " + std::to_string(rows - cols + 1));
    }

    Eigen::MatrixXd a(std::max(rows, 1), cols);
    a.setZero();
    const auto w = grid.weights();
    for (int c = 0; c < cols; ++c) {
        const auto& phi = basis.mode(d.modes[c]).vector;
        for (std::size_t r = 0; r < off.size(); ++r) a(static_cast<int>(r), c) = phi[off[r]];
        if (opts.mean_zero_on_omega) {
            double s = 0.0;
            for (int j = 0; j < grid.size(); ++j) {
                if (omega.contains(j)) s += w[j] * phi[j];
            }
            a(rows - 1, c) = s;
        }
    }

    Eigen::MatrixXd null;
    if (rows == 0) {
        null = Eigen::MatrixXd::Identity(cols, cols);
    } else {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double cut = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
        int rank = 0;
        for (int i = 0; i < sv.size(); ++i) {
            if (sv(i) > cut) ++rank;
        }
        if (rank >= cols) {
            throw InfeasibleConstruction("oscillating datum for K = " + std::to_string(K) +
                                         ": support constraints leave no null space, deficit 1");
        }
        null = svd.matrixV().rightCols(cols - rank);
    }
    d.null_dimension = static_cast<int>(null.cols());

    Eigen::VectorXd coef;
    if (opts.selection == NullSelection::min_energy) {
        Eigen::VectorXd lambda(cols);
        for (int c = 0; c < cols; ++c) lambda(c) = basis.mode(d.modes[c]).lambda_discrete;
        const Eigen::MatrixXd energy = null.transpose() * lambda.asDiagonal() * null;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(energy);
        coef = null * eig.eigenvectors().col(0);
    } else {
        // projection of e_K onto the null space maximizes |a_K| on the unit sphere
        coef = null * null.row(0).transpose();
        if (coef.norm() < 1e-12) coef = null.col(0);
    }
    coef.normalize();
    const double big = coef.cwiseAbs().maxCoeff();
    for (int c = 0; c < cols; ++c) {
        if (std::abs(coef(c)) > 1e-12 * big) {
            if (coef(c) < 0.0) coef = -coef;
            break;
        }
    }

    d.coefficients.assign(coef.data(), coef.data() + cols);
    d.field = synthesize(basis, d.modes, d.coefficients);
    for (int j : off) d.off_support_residual = std::max(d.off_support_residual, std::abs(d.field[j]));
    return d;
}

struct FreeExpansion {
    SpaceTimeField w;
    double closed_norm = 0.0;  // sum a_k^2 (1 - e^{-2 T lambda_k}) / (2 lambda_k)
};

/// Potential-free spectral evolution sum_k a_k phi_k e^{-lambda_k t} on the
/// time nodes, using the discrete eigenvalues.
inline FreeExpansion free_expansion(const SpectralBasis& basis, const OscillatingDatum& datum, const Grid& grid,
                                    const TimeGrid& time) {
    FreeExpansion out{SpaceTimeField::zeros(time, grid), 0.0};
    for (std::size_t i = 0; i < datum.modes.size(); ++i) {
        const Mode& mode = basis.mode(datum.modes[i]);
        const double lam = mode.lambda_discrete;
        if (!(lam > 0.0)) {
            throw std::invalid_argument("free_expansion: admitted mode " + std::to_string(mode.index) +
                                        " has a zero eigenvalue");
        }
        const double a = datum.coefficients[i];
        out.closed_norm += a * a * (-std::expm1(-2.0 * time.horizon() * lam)) / (2.0 * lam);
        for (int m = 0; m < time.nodes(); ++m) {
            const double amp = a * std::exp(-lam * time.t(m));
            if (amp == 0.0) break;
            auto row = out.w.row(m);
            for (int j = 0; j < grid.size(); ++j) row[j] += amp * mode.vector[j];
        }
    }
    return out;
}

/// nu = v^2 / int int v^2 on the nodes.
struct ConcentrationMeasure {
    SpaceTimeField density;
    double normalization = 0.0;
};

struct ConcentrationRow {
    int K = 0;
    double denominator = 0.0;  // D_K = sum a_k^2 / lambda_k
    double squared_norm = 0.0; // N_K = int int v_K^2
    double lemma7_ratio = 0.0; // N_K / D_K
    double time_tail_T8 = 0.0;
    double time_tail_T4 = 0.0;
    double space_tail_2dx = 0.0;
    double space_tail_4dx = 0.0;
    double rel_dev = 0.0;      // |v_K - w_0K| / |w_0K|
};

/// Distance of each dof from the mask, in cells times dx.
inline std::vector<double> distance_to_region(const Grid& grid, const RegionMask& omega) {
    const int n = grid.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    int last = -1;
    for (int j = 0; j < n; ++j) {
        if (omega.contains(j)) last = j;
        if (last >= 0) dist[j] = (j - last) * grid.dx();
    }
    last = -1;
    for (int j = n - 1; j >= 0; --j) {
        if (omega.contains(j)) last = j;
        if (last >= 0) dist[j] = std::min(dist[j], (last - j) * grid.dx());
    }
    return dist;
}

/// nu-mass on the nodes with t > eps.
inline double time_tail(const ConcentrationMeasure& nu, const Grid& grid, const TimeGrid& time, double eps) {
    double s = 0.0;
    for (int m = 0; m < time.nodes(); ++m) {
        if (time.t(m) > eps) s += time.weight(m) * integrate(nu.density.row(m), grid);
    }
    return s;
}

/// nu-mass on the dofs farther than delta from omega.
inline double space_tail(const ConcentrationMeasure& nu, const Grid& grid, const TimeGrid& time,
                         std::span<const double> distance, double delta) {
    const auto w = grid.weights();
    double s = 0.0;
    for (int m = 0; m < time.nodes(); ++m) {
        double row = 0.0;
        for (int j = 0; j < grid.size(); ++j) {
            if (distance[j] > delta * (1.0 + 1e-12)) row += w[j] * nu.density(m, j);
        }
        s += time.weight(m) * row;
    }
    return s;
}

struct ConcentrationRun {
    ConcentrationMeasure measure;
    ConcentrationRow row;
};

/// Solves v_t - Delta v = q v from the datum and measures where v^2 lives.
inline ConcentrationRun run_concentration(const SpaceTimeField& q, const SpectralBasis& basis,
                                          const OscillatingDatum& datum, const RegionMask& omega, const Grid& grid,
                                          const TimeGrid& time) {
    check_shape(q, time, grid, "run_concentration potential");
    LinearParabolicInstance inst{q, SpaceTimeField::zeros(time, grid), datum.field, 0, Direction::forward};
    SpaceTimeField v = solve_linear(inst, grid, time);

    ConcentrationRun run;
    const double n2 = st_inner(v, v, time, grid);
    run.measure.normalization = n2;
    run.measure.density = v;
    for (double& x : run.measure.density.values()) x = x * x / n2;

    ConcentrationRow& row = run.row;
    row.K = datum.K;
    for (std::size_t i = 0; i < datum.modes.size(); ++i) {
        const double a = datum.coefficients[i];
        row.denominator += a * a / basis.mode(datum.modes[i]).lambda_discrete;
    }
    row.squared_norm = n2;
    row.lemma7_ratio = n2 / row.denominator;
    const double T = time.horizon();
    row.time_tail_T8 = time_tail(run.measure, grid, time, T / 8.0);
    row.time_tail_T4 = time_tail(run.measure, grid, time, T / 4.0);
    const auto dist = distance_to_region(grid, omega);
    row.space_tail_2dx = space_tail(run.measure, grid, time, dist, 2.0 * grid.dx());
    row.space_tail_4dx = space_tail(run.measure, grid, time, dist, 4.0 * grid.dx());
    const FreeExpansion w0 = free_expansion(basis, datum, grid, time);
    row.rel_dev = st_norm(v - w0.w, time, grid) / st_norm(w0.w, time, grid);
    return run;
}

struct SweepThresholds {
    double time_tail = 0.1;
    double space_tail = 0.1;
    double slack = 0.1;        // relative growth tolerated between consecutive K
    double mass_floor = 1e-12; // masses below this are treated as zero
};

struct ConcentrationReport {
    std::vector<ConcentrationRow> rows;
    bool time_tails_monotone = true;
    bool space_tails_monotone = true;
    bool final_tails_small = true;
};

/// One concentration run per K (run concurrently), plus the monotone-decay
/// and final-threshold flags on time_tail(T/8) and space_tail(4 dx).
inline ConcentrationReport concentration_sweep(const SpaceTimeField& q, const RegionMask& omega,
                                               std::span<const int> K_list, const Grid& grid, const TimeGrid& time,
                                               const SweepThresholds& thr = {},
                                               const OscillatingDatumOptions& datum_opts = {}) {
    for (std::size_t i = 1; i < K_list.size(); ++i) {
        if (K_list[i] <= K_list[i - 1]) throw std::invalid_argument("concentration_sweep: K list must increase");
    }
    const SpectralBasis basis = discrete_eigenbasis(grid, grid.size());
    std::vector<std::future<ConcentrationRow>> jobs;
    for (int K : K_list) {
        jobs.push_back(std::async(std::launch::async, [&, K] {
            const OscillatingDatum d = build_oscillating_datum(basis, grid, omega, K, datum_opts);
            return run_concentration(q, basis, d, omega, grid, time).row;
        }));
    }
    ConcentrationReport rep;
    for (auto& j : jobs) rep.rows.push_back(j.get());

    auto nonincreasing = [&](double prev, double next) {
        return next <= (1.0 + thr.slack) * prev + thr.mass_floor;
    };
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        rep.time_tails_monotone =
            rep.time_tails_monotone && nonincreasing(rep.rows[i - 1].time_tail_T8, rep.rows[i].time_tail_T8);
        rep.space_tails_monotone =
            rep.space_tails_monotone && nonincreasing(rep.rows[i - 1].space_tail_4dx, rep.rows[i].space_tail_4dx);
    }
    if (!rep.rows.empty()) {
        rep.final_tails_small =
            rep.rows.back().time_tail_T8 < thr.time_tail && rep.rows.back().space_tail_4dx < thr.space_tail;
    }
    return rep;
}

/// Smooth bounded potential 2 + cos(pi x / L) cos(2 pi t / T); its x-derivative
/// vanishes at both ends.
inline SpaceTimeField benchmark_potential(const Grid& grid, const TimeGrid& time) {
    const double L = grid.length();
    const double T = time.horizon();
    return SpaceTimeField::sample(time, grid, [&](double t, double x) {
        return 2.0 + std::cos(std::numbers::pi * x / L) * std::cos(2.0 * std::numbers::pi * t / T);
    });
}

/// Time-regularized Dirac source at t0 built from h0:
///   h_eps(t, x) = s(eps) 1_{|t - t0| < eps} 1_omega(t, x) (h0 - mean_{omega_t} h0),
/// with s(eps) the reciprocal of the discrete window length, so that the
/// trapezoid time integral of h_eps is h0 minus the slice-mean correction.
inline SpaceTimeField dirac_perturbation(const SpaceTimeMask& omega, double t0, std::span<const double> h0, double eps,
                                         const Grid& grid, const TimeGrid& time) {
    check_size(h0, grid, "dirac_perturbation h0");
    if (omega.nodes != time.nodes() || omega.dofs != grid.size()) {
        throw std::invalid_argument("dirac_perturbation: mask does not match grids");
    }
    const double T = time.horizon();
    if (!(eps > 0.0 && eps < t0 && eps < T - t0)) {
        throw std::invalid_argument("dirac_perturbation: need 0 < eps < min(t0, T - t0), eps = " + std::to_string(eps));
    }
    const int m0 = static_cast<int>(std::lround(t0 / time.dt()));
    double hmax = 0.0;
    for (double v : h0) hmax = std::max(hmax, std::abs(v));
    for (int j = 0; j < grid.size(); ++j) {
        if (!omega(m0, j) && std::abs(h0[j]) > 1e-12 * std::max(hmax, 1e-300)) {
            throw std::invalid_argument("dirac_perturbation: h0 is not supported in the t0 slice of omega");
        }
    }

    std::vector<int> window;
    double length = 0.0;
    for (int m = 0; m < time.nodes(); ++m) {
        if (std::abs(time.t(m) - t0) < eps) {
            window.push_back(m);
            length += time.weight(m);
        }
    }
    if (window.empty()) throw DegenerateWindow("dirac_perturbation: no time node within eps of t0");

    const auto w = grid.weights();
    SpaceTimeField h = SpaceTimeField::zeros(time, grid);
    for (int m : window) {
        double mass = 0.0;
        double s = 0.0;
        for (int j = 0; j < grid.size(); ++j) {
            if (omega(m, j)) {
                mass += w[j];
                s += w[j] * h0[j];
            }
        }
        if (!(mass > 0.0)) {
            throw DegenerateWindow("dirac_perturbation: empty slice of omega at time index " + std::to_string(m));
        }
        const double avg = s / mass;
        for (int j = 0; j < grid.size(); ++j) {
            if (omega(m, j)) h(m, j) = (h0[j] - avg) / length;
        }
    }
    return h;
}

struct PerturbationRow {
    double eps = 0.0;
    double l2_error = 0.0;        // |u'_eps - v'|_{L2(L2)}
    double prop11_witness = 0.0;  // int int Z u'_eps^2
};

struct PerturbationReport {
    std::vector<PerturbationRow> rows;
    double cauchy_witness = 0.0;  // int int Z v'^2
    double ratio = 0.0;           // last / first error
    bool strictly_decreasing = true;
};

/// Linearized responses to h_eps versus the Cauchy response started from h0
/// at t0, for each eps; the support omega defaults to the abnormal set of y*.
inline PerturbationReport perturbation_convergence(const Problem& problem, const SpaceTimeField& y_star, double t0,
                                                   std::span<const double> h0, std::span<const double> eps_list,
                                                   std::optional<SpaceTimeMask> omega = std::nullopt) {
    for (std::size_t i = 1; i < eps_list.size(); ++i) {
        if (eps_list[i] >= eps_list[i - 1]) {
            throw std::invalid_argument("perturbation_convergence: eps list must be strictly decreasing");
        }
    }
    const Grid& grid = problem.grid;
    const TimeGrid& time = problem.time;
    if (!omega) {
        omega = abnormal_mask(y_star, problem.constraints, default_abnormal_tolerance(problem.constraints), grid, time);
    }
    const SpaceTimeField u = solve_state(problem, y_star);
    const SpaceTimeField p = solve_adjoint(problem, u);
    const SpaceTimeField z = compute_Z(problem, u, p);
    const int m0 = static_cast<int>(std::lround(t0 / time.dt()));
    const SpaceTimeField vdot = solve_cauchy_linearized(problem, u, m0, h0);

    auto witness = [&](const SpaceTimeField& f) {
        SpaceTimeField g = f;
        for (std::size_t i = 0; i < g.values().size(); ++i) g.values()[i] = z.values()[i] * f.values()[i] * f.values()[i];
        return st_integrate(g, time, grid);
    };

    PerturbationReport rep;
    rep.cauchy_witness = witness(vdot);
    for (double eps : eps_list) {
        const SpaceTimeField h = dirac_perturbation(*omega, t0, h0, eps, grid, time);
        const SpaceTimeField ud = solve_linearized(problem, u, h);
        rep.rows.push_back({eps, st_norm(ud - vdot, time, grid), witness(ud)});
    }
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        if (!(rep.rows[i].l2_error < rep.rows[i - 1].l2_error)) rep.strictly_decreasing = false;
    }
    if (!rep.rows.empty() && rep.rows.front().l2_error > 0.0) {
        rep.ratio = rep.rows.back().l2_error / rep.rows.front().l2_error;
    }
    return rep;
}

}  // namespace paracontrol
