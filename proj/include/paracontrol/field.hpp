#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"

namespace paracontrol {

/// Uniform time nodes t_m = m dt, m = 0..nt.
class TimeGrid {
public:
    TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw std::invalid_argument("time horizon must be positive, got " + std::to_string(horizon));
        }
        if (steps < 1) {
            throw std::invalid_argument("time grid needs at least one step, got " + std::to_string(steps));
        }
    }

    double horizon() const noexcept { return horizon_; }
    int steps() const noexcept { return steps_; }
    int nodes() const noexcept { return steps_ + 1; }
    double dt() const noexcept { return horizon_ / steps_; }
    double t(int m) const noexcept { return m * dt(); }

    /// Trapezoid weight of node m.
    double weight(int m) const noexcept { return (m == 0 || m == steps_) ? 0.5 * dt() : dt(); }

    bool operator==(const TimeGrid& other) const = default;

private:
    double horizon_;
    int steps_;
};

/// Values on (time node) x (dof), row-major over m.
class SpaceTimeField {
public:
    SpaceTimeField() = default;
    SpaceTimeField(int nodes, int dofs, double value = 0.0)
        : nodes_(nodes), dofs_(dofs), values_(static_cast<std::size_t>(nodes) * dofs, value) {}

    static SpaceTimeField zeros(const TimeGrid& time, const Grid& grid) {
        return SpaceTimeField(time.nodes(), grid.size());
    }

    static SpaceTimeField constant(const TimeGrid& time, const Grid& grid, double value) {
        return SpaceTimeField(time.nodes(), grid.size(), value);
    }

    /// Samples fn(t, x) on every node.
    static SpaceTimeField sample(const TimeGrid& time, const Grid& grid,
                                 const std::function<double(double, double)>& fn) {
        SpaceTimeField out = zeros(time, grid);
        const auto x = grid.positions();
        for (int m = 0; m < time.nodes(); ++m) {
            for (int j = 0; j < grid.size(); ++j) {
                out(m, j) = fn(time.t(m), x[j]);
            }
        }
        return out;
    }

    int nodes() const noexcept { return nodes_; }
    int dofs() const noexcept { return dofs_; }

    double& operator()(int m, int j) { return values_[static_cast<std::size_t>(m) * dofs_ + j]; }
    double operator()(int m, int j) const { return values_[static_cast<std::size_t>(m) * dofs_ + j]; }

    std::span<double> row(int m) { return {values_.data() + static_cast<std::size_t>(m) * dofs_, static_cast<std::size_t>(dofs_)}; }
    std::span<const double> row(int m) const {
        return {values_.data() + static_cast<std::size_t>(m) * dofs_, static_cast<std::size_t>(dofs_)};
    }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool all_finite() const {
        for (double v : values_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    double max_abs() const {
        double s = 0.0;
        for (double v : values_) s = std::max(s, std::abs(v));
        return s;
    }

    bool matches(const TimeGrid& time, const Grid& grid) const {
        return nodes_ == time.nodes() && dofs_ == grid.size();
    }

    SpaceTimeField& operator+=(const SpaceTimeField& o) {
        same_shape(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    SpaceTimeField& operator-=(const SpaceTimeField& o) {
        same_shape(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    SpaceTimeField& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }

    friend SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b) { return a += b; }
    friend SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b) { return a -= b; }
    friend SpaceTimeField operator*(double s, SpaceTimeField a) { return a *= s; }

    /// a + s * b
    friend SpaceTimeField axpy(const SpaceTimeField& a, double s, const SpaceTimeField& b) {
        SpaceTimeField out = a;
        out.same_shape(b);
        for (std::size_t i = 0; i < out.values_.size(); ++i) out.values_[i] += s * b.values_[i];
        return out;
    }

private:
    void same_shape(const SpaceTimeField& o) const {
        if (o.nodes_ != nodes_ || o.dofs_ != dofs_) {
            throw std::invalid_argument("space-time fields have different shapes");
        }
    }

    int nodes_ = 0;
    int dofs_ = 0;
    std::vector<double> values_;
};

inline void check_shape(const SpaceTimeField& f, const TimeGrid& time, const Grid& grid, const char* what) {
    if (!f.matches(time, grid)) {
        throw std::invalid_argument(std::string(what) + ": field shape " + std::to_string(f.nodes()) + "x" +
                                    std::to_string(f.dofs()) + " does not match grids " +
                                    std::to_string(time.nodes()) + "x" + std::to_string(grid.size()));
    }
}

/// Discrete space-time product: trapezoid in time, grid quadrature in space.
inline double st_inner(const SpaceTimeField& a, const SpaceTimeField& b, const TimeGrid& time, const Grid& grid) {
    check_shape(a, time, grid, "st_inner");
    check_shape(b, time, grid, "st_inner");
    double s = 0.0;
    for (int m = 0; m < time.nodes(); ++m) {
        s += time.weight(m) * inner(a.row(m), b.row(m), grid);
    }
    return s;
}

inline double st_norm(const SpaceTimeField& a, const TimeGrid& time, const Grid& grid) {
    return std::sqrt(st_inner(a, a, time, grid));
}

/// Discrete space-time integral of a field.
inline double st_integrate(const SpaceTimeField& a, const TimeGrid& time, const Grid& grid) {
    check_shape(a, time, grid, "st_integrate");
    double s = 0.0;
    for (int m = 0; m < time.nodes(); ++m) {
        s += time.weight(m) * integrate(a.row(m), grid);
    }
    return s;
}

}  // namespace paracontrol
