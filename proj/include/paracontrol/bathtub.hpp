#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "grid.hpp"
#include "model.hpp"

namespace paracontrol {

struct SliceProjection {
    std::vector<double> y;
    double threshold = 0.0;  // the shift c in y = clamp(z - c)
};

/// Weighted Euclidean projection of z onto {lo <= y <= hi, mean(y) = V0}:
/// y = clamp(z - c, -kappa0, kappa1) with the scalar c located by bisection
/// on the nonincreasing map c -> mean(y(c)), then recomputed exactly from
/// the free set it identifies.
inline SliceProjection bathtub_project_slice(std::span<const double> z, const Constraints& cons, const Grid& grid) {
    cons.validate();
    check_size(z, grid, "bathtub_project_slice");
    const double lo = cons.lower();
    const double hi = cons.upper();
    const auto w = grid.weights();
    const double total = grid.total_weight();
    const int n = grid.size();

    auto clamp_mean = [&](double c) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += w[j] * std::clamp(z[j] - c, lo, hi);
        return s / total;
    };

    const auto [zmin_it, zmax_it] = std::minmax_element(z.begin(), z.end());
    double c_lo = *zmin_it - hi;  // mean(c_lo) = kappa1 >= V0
    double c_hi = *zmax_it - lo;  // mean(c_hi) = -kappa0 <= V0
    for (int it = 0; it < 200 && c_hi - c_lo > 0.0; ++it) {
        const double mid = 0.5 * (c_lo + c_hi);
        if (mid <= c_lo || mid >= c_hi) break;
        if (clamp_mean(mid) >= cons.mean) {
            c_lo = mid;
        } else {
            c_hi = mid;
        }
    }
    double c = 0.5 * (c_lo + c_hi);

    // exact level from the active set at c
    double free_weight = 0.0;
    double free_sum = 0.0;
    double fixed_sum = 0.0;
    for (int j = 0; j < n; ++j) {
        const double v = z[j] - c;
        if (v <= lo) {
            fixed_sum += w[j] * lo;
        } else if (v >= hi) {
            fixed_sum += w[j] * hi;
        } else {
            free_weight += w[j];
            free_sum += w[j] * z[j];
        }
    }
    if (free_weight > 0.0) {
        c = (free_sum + fixed_sum - cons.mean * total) / free_weight;
    }

    SliceProjection out;
    out.threshold = c;
    out.y.resize(n);
    for (int j = 0; j < n; ++j) out.y[j] = std::clamp(z[j] - c, lo, hi);
    return out;
}

struct ThresholdResult {
    std::vector<double> y;
    double level = 0.0;   // the threshold c on p
    int fractional = -1;  // dof filled partially, -1 if none
};

/// Maximizer of <p, y> over the admissible slice: kappa1 on the dofs with
/// the largest p, -kappa0 on the rest, one dof filled fractionally so the
/// mean is met. Ties are broken by dof index; a constant p returns y = V0.
inline ThresholdResult threshold_level(std::span<const double> p, const Constraints& cons, const Grid& grid) {
    cons.validate();
    check_size(p, grid, "threshold_step");
    const int n = grid.size();
    const auto w = grid.weights();
    const double lo = cons.lower();
    const double hi = cons.upper();

    ThresholdResult out;
    const auto [pmin_it, pmax_it] = std::minmax_element(p.begin(), p.end());
    if (*pmin_it == *pmax_it) {
        out.y.assign(n, cons.mean);
        out.level = *pmin_it;
        return out;
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });

    out.y.assign(n, lo);
    double budget = (cons.mean - lo) * grid.total_weight();
    int filled = 0;
    for (int idx : order) {
        if (budget <= 0.0) break;
        const double cap = (hi - lo) * w[idx];
        if (budget >= cap) {
            out.y[idx] = hi;
            budget -= cap;
            ++filled;
        } else {
            out.y[idx] = lo + budget / w[idx];
            out.fractional = idx;
            budget = 0.0;
            break;
        }
    }
    if (out.fractional >= 0) {
        out.level = p[out.fractional];
    } else if (filled == 0) {
        out.level = *pmax_it;
    } else if (filled == n) {
        out.level = *pmin_it;
    } else {
        out.level = 0.5 * (p[order[filled - 1]] + p[order[filled]]);
    }
    return out;
}

inline std::vector<double> threshold_step(std::span<const double> p, const Constraints& cons, const Grid& grid) {
    return threshold_level(p, cons, grid).y;
}

}  // namespace paracontrol
