#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "field.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace paracontrol::bench {

inline std::vector<double> cosine_profile(const Grid& grid, double base, double amplitude) {
    std::vector<double> v(grid.size());
    for (int j = 0; j < grid.size(); ++j) {
        v[j] = base + amplitude * std::cos(std::numbers::pi * grid.positions()[j] / grid.length());
    }
    return v;
}

inline SpaceTimeField cosine_field(const Grid& grid, const TimeGrid& time, double base, double amplitude) {
    const double L = grid.length();
    return SpaceTimeField::sample(time, grid, [=](double, double x) {
        return base + amplitude * std::cos(std::numbers::pi * x / L);
    });
}

/// Allee-type reaction with heterogeneous threshold 0.3 + 0.1 cos(pi x),
/// u0 = 0.5 + 0.3 cos(pi x), J = int u(T), 0 <= y <= 1, mean 0.3.
inline Problem bistable(int cells = 64, int steps = 128, Boundary bc = Boundary::neumann, double horizon = 1.0) {
    const Grid grid = Grid::build(1.0, cells, bc);
    const TimeGrid time(horizon, steps);
    return Problem{grid,
                   time,
                   Nonlinearity::bistable(cosine_field(grid, time, 0.3, 0.1)),
                   {CostTerm::Family::zero, CostTerm::Family::linear},
                   cosine_profile(grid, 0.5, 0.3),
                   {0.0, 1.0, 0.3}};
}

/// Logistic reaction u (m - u) with m = 1 + 0.5 cos(pi x).
inline Problem monostable(int cells = 64, int steps = 128, Boundary bc = Boundary::neumann) {
    const Grid grid = Grid::build(1.0, cells, bc);
    const TimeGrid time(1.0, steps);
    return Problem{grid,
                   time,
                   Nonlinearity::monostable(cosine_field(grid, time, 1.0, 0.5)),
                   {CostTerm::Family::quadratic, CostTerm::Family::negsquare},
                   cosine_profile(grid, 0.4, 0.2),
                   {0.0, 1.0, 0.3}};
}

/// Pure diffusion with a quadratic running cost.
inline Problem diffusion(int cells = 64, int steps = 128, Boundary bc = Boundary::neumann) {
    const Grid grid = Grid::build(1.0, cells, bc);
    const TimeGrid time(1.0, steps);
    return Problem{grid,
                   time,
                   Nonlinearity::zero(),
                   {CostTerm::Family::quadratic, CostTerm::Family::linear},
                   cosine_profile(grid, 0.5, 0.3),
                   {0.0, 1.0, 0.3}};
}

/// f = -u, j1 = u^2, j2 = u: J is convex in y.
inline Problem convex(int cells = 128, int steps = 128) {
    const Grid grid = Grid::build(1.0, cells, Boundary::neumann);
    const TimeGrid time(1.0, steps);
    return Problem{grid,
                   time,
                   Nonlinearity::linear(-1.0),
                   {CostTerm::Family::quadratic, CostTerm::Family::linear},
                   cosine_profile(grid, 0.5, 0.3),
                   {0.0, 1.0, 0.3}};
}

/// Allee-type reaction run entirely in its concave range u > (1 + theta)/3:
/// u0 = 0.8, theta = 0.3 + 0.1 cos(2 pi t / T), J = int u(T).
inline Problem concave(int cells = 64, int steps = 128) {
    const Grid grid = Grid::build(1.0, cells, Boundary::neumann);
    const TimeGrid time(1.0, steps);
    const double T = time.horizon();
    return Problem{grid,
                   time,
                   Nonlinearity::bistable(SpaceTimeField::sample(
                       time, grid, [=](double t, double) { return 0.3 + 0.1 * std::cos(2.0 * std::numbers::pi * t / T); })),
                   {CostTerm::Family::zero, CostTerm::Family::linear},
                   std::vector<double>(grid.size(), 0.8),
                   {0.0, 1.0, 0.3}};
}

/// Spatially constant logistic ODE u' = u (1 - u), u(0) = 1/2.
inline Problem logistic(int cells, int steps, double horizon = 1.0) {
    const Grid grid = Grid::build(1.0, cells, Boundary::neumann);
    const TimeGrid time(horizon, steps);
    return Problem{grid,
                   time,
                   Nonlinearity::monostable(SpaceTimeField::constant(time, grid, 1.0)),
                   {CostTerm::Family::zero, CostTerm::Family::linear},
                   std::vector<double>(grid.size(), 0.5),
                   {0.0, 1.0, 0.3}};
}

/// Concentration experiment: n = 256 Neumann cells on (0, 1), nt = 1024,
/// omega = [0.2, 0.5]. The horizon keeps dt * lambda_32 below 0.1.
struct ConcentrationSetup {
    static constexpr int cells = 256;
    static constexpr int steps = 1024;
    static constexpr double horizon = 0.01;
    static constexpr double omega_a = 0.2;
    static constexpr double omega_b = 0.5;
};

}  // namespace paracontrol::bench
