#include <gtest/gtest.h>

#include <paracontrol/benchmarks.hpp>
#include <paracontrol/control.hpp>

#include <cmath>
#include <random>

using namespace paracontrol;

namespace {

Problem plain(CostSpec cost, double u0 = 0.0, Constraints cons = {0.0, 1.0, 0.4}) {
    const Grid g = Grid::build(1.0, 16, Boundary::neumann);
    const TimeGrid t(1.0, 32);
    return Problem{g, t, Nonlinearity::zero(), cost, std::vector<double>(g.size(), u0), cons};
}

SpaceTimeField slices_from(const TimeGrid& t, const Grid& g, const std::vector<double>& row) {
    SpaceTimeField f = SpaceTimeField::zeros(t, g);
    for (int m = 0; m < t.nodes(); ++m) std::copy(row.begin(), row.end(), f.row(m).begin());
    return f;
}

}  // namespace

TEST(EvalCost, TerminalLinearConstantControl) {
    const Problem p = plain({CostTerm::Family::zero, CostTerm::Family::linear});
    EXPECT_NEAR(eval_cost(p, SpaceTimeField::zeros(p.time, p.grid)), 0.0, 1e-15);
    EXPECT_NEAR(eval_cost(p, SpaceTimeField::constant(p.time, p.grid, 0.4)), 0.4, 1e-13);
}

TEST(EvalGradient, LinearRunningCostIsTimeToGo) {
    const Problem p = plain({CostTerm::Family::linear, CostTerm::Family::zero});
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    SpaceTimeField y = SpaceTimeField::zeros(p.time, p.grid);
    for (double& v : y.values()) v = d(rng);
    const SpaceTimeField g = eval_gradient(p, y);
    for (int m = 1; m < p.time.steps(); ++m) {
        for (double v : g.row(m)) EXPECT_NEAR(v, 1.0 - p.time.t(m), 1e-12);
    }
}

TEST(SecondVariation, ZeroDirection) {
    const Problem p = bench::bistable(16, 32);
    const SpaceTimeField y = SpaceTimeField::constant(p.time, p.grid, 0.3);
    EXPECT_EQ(second_variation(p, y, SpaceTimeField::zeros(p.time, p.grid)), 0.0);
}

TEST(SecondVariation, QuadraticInstanceIsExact) {
    const Problem p = plain({CostTerm::Family::quadratic, CostTerm::Family::zero}, 0.3);
    const SpaceTimeField y = SpaceTimeField::constant(p.time, p.grid, 0.4);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    SpaceTimeField h = SpaceTimeField::zeros(p.time, p.grid);
    for (double& v : h.values()) v = d(rng);
    const double fd = eval_cost(p, y + h) - 2.0 * eval_cost(p, y) + eval_cost(p, y - h);
    EXPECT_NEAR(second_variation(p, y, h), fd, 1e-10 * std::abs(fd));
}

TEST(Bathtub, Examples) {
    const Grid g = Grid::build(1.0, 4, Boundary::neumann);
    const Constraints c{0.0, 1.0, 0.4};
    const auto a = bathtub_project_slice(std::vector<double>(4, 0.4), c, g);
    for (double v : a.y) EXPECT_NEAR(v, 0.4, 1e-15);
    EXPECT_NEAR(a.threshold, 0.0, 1e-12);

    const auto b = bathtub_project_slice(std::vector<double>(4, 2.0), c, g);
    for (double v : b.y) EXPECT_NEAR(v, 0.4, 1e-15);
    EXPECT_NEAR(b.threshold, 1.6, 1e-12);

    const auto e = bathtub_project_slice(std::vector<double>{1, 0, 0, 1}, {0.0, 0.5, 0.25}, g);
    const double expected[] = {0.5, 0, 0, 0.5};
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(e.y[j], expected[j], 1e-12);
}

TEST(Bathtub, RejectsInfeasibleConstraints) {
    const Grid g = Grid::build(1.0, 4, Boundary::neumann);
    EXPECT_THROW(bathtub_project_slice(std::vector<double>(4, 0.0), {0.0, 1.0, 2.0}, g), std::invalid_argument);
}

TEST(ThresholdStep, MonotoneAndConstantSlices) {
    const Grid g = Grid::build(1.0, 8, Boundary::neumann);
    const Constraints c{0.5, 1.0, 0.1};
    std::vector<double> p(8);
    for (int j = 0; j < 8; ++j) p[j] = j;
    const auto y = threshold_step(p, c, g);
    int fractional = 0;
    for (int j = 0; j < 8; ++j) {
        if (y[j] != c.upper() && y[j] != c.lower()) ++fractional;
        if (j > 0) {
            EXPECT_GE(y[j], y[j - 1]);
        }
    }
    EXPECT_LE(fractional, 1);
    EXPECT_NEAR(mean(y, g), 0.1, 1e-14);

    for (double v : threshold_step(std::vector<double>(8, 2.0), c, g)) EXPECT_EQ(v, 0.1);
}

TEST(FirstOrderResidual, Examples) {
    const Grid g = Grid::build(1.0, 4, Boundary::neumann);
    const TimeGrid t(2.0, 4);
    const Constraints c{0.0, 1.0, 0.375};
    const SpaceTimeField p = slices_from(t, g, {0.0, 1.0, 2.0, 3.0});

    SpaceTimeField thr = SpaceTimeField::zeros(t, g);
    for (int m = 0; m < t.nodes(); ++m) {
        const auto y = threshold_step(p.row(m), c, g);
        std::copy(y.begin(), y.end(), thr.row(m).begin());
    }
    EXPECT_LE(first_order_residual(thr, p, c, g, t), 1e-12);

    // dof 2 carries the fractional level and is exempt; the rest must move
    const SpaceTimeField flat = SpaceTimeField::constant(t, g, 0.375);
    const double transport = 0.25 * (0.375 + 0.375 + 0.625) * t.horizon();
    EXPECT_NEAR(first_order_residual(flat, p, c, g, t), transport, 1e-14);

    EXPECT_EQ(first_order_residual(flat, SpaceTimeField::constant(t, g, 5.0), c, g, t), 0.0);
}

TEST(ComputeZ, ReactionFreeCosts) {
    const Problem q = plain({CostTerm::Family::quadratic, CostTerm::Family::linear});
    for (double v : compute_Z(q, SpaceTimeField::constant(q.time, q.grid, 0.4)).values()) EXPECT_EQ(v, 2.0);
    const Problem z = plain({CostTerm::Family::zero, CostTerm::Family::linear});
    for (double v : compute_Z(z, SpaceTimeField::constant(z.time, z.grid, 0.4)).values()) EXPECT_EQ(v, 0.0);
}

TEST(AbnormalMask, BangBangAndInterior) {
    const Problem p = plain({});
    const Constraints& c = p.constraints;
    const double tol = default_abnormal_tolerance(c);
    SpaceTimeField bang = SpaceTimeField::zeros(p.time, p.grid);
    for (int m = 0; m < p.time.nodes(); ++m) {
        for (int j = 0; j < p.grid.size(); ++j) bang(m, j) = j % 2 ? c.upper() : c.lower();
    }
    EXPECT_EQ(abnormal_mask(bang, c, tol, p.grid, p.time).measure, 0.0);
    const auto full = abnormal_mask(SpaceTimeField::constant(p.time, p.grid, 0.4), c, tol, p.grid, p.time);
    EXPECT_NEAR(full.measure, p.grid.length() * p.time.horizon(), 1e-14);

    const Problem b = bench::convex(16, 16);
    const SecondOrderReport rep = second_order_report(b, [&] {
        SpaceTimeField y = SpaceTimeField::zeros(b.time, b.grid);
        for (int m = 0; m < b.time.nodes(); ++m) {
            for (int j = 0; j < b.grid.size(); ++j) y(m, j) = j < 16 * 0.3 ? 1.0 : 0.0;
        }
        return y;
    }(), tol);
    EXPECT_NEAR(rep.abnormal_measure, 0.0, 1e-15);
    EXPECT_TRUE(rep.sign_condition);
    EXPECT_TRUE(rep.sign_condition_max);
}

TEST(Ascend, OptimalStartStopsImmediately) {
    // J = int u(T) with f = 0 is linear in y and indifferent to where mass goes
    const Problem p = plain({CostTerm::Family::zero, CostTerm::Family::linear});
    const OptimizationTrace tr = ascend(p, SpaceTimeField::constant(p.time, p.grid, 0.4));
    ASSERT_TRUE(tr.converged);
    EXPECT_EQ(tr.iterations, 0);
    EXPECT_LE(tr.final_residual(), 1e-8);
}

TEST(Ascend, ConvexInstanceIsBangBang) {
    const Problem p = bench::convex(64, 64);
    const OptimizationTrace tr = ascend(p, SpaceTimeField::constant(p.time, p.grid, 0.3));
    ASSERT_TRUE(tr.converged) << tr.final_residual();
    // iterates stay admissible
    for (double v : tr.y.values()) {
        EXPECT_GE(v, p.constraints.lower());
        EXPECT_LE(v, p.constraints.upper());
    }
    for (int m = 0; m < p.time.nodes(); ++m) EXPECT_NEAR(mean(tr.y.row(m), p.grid), 0.3, 1e-12);
    for (std::size_t k = 1; k < tr.records.size(); ++k) EXPECT_GE(tr.records[k].cost, tr.records[k - 1].cost - 1e-12);
    const SecondOrderReport rep = second_order_report(p, tr.y, default_abnormal_tolerance(p.constraints));
    EXPECT_GE(rep.bang_fraction, 0.98);
    EXPECT_EQ(rep.convex_slices_not_bang_bang, 0);
}

TEST(Ascend, ThresholdingModeConverges) {
    const Problem p = bench::convex(32, 32);
    AscentOptions o;
    o.mode = AscentMode::thresholding;
    const OptimizationTrace tr = ascend(p, SpaceTimeField::constant(p.time, p.grid, 0.3), o);
    EXPECT_TRUE(tr.converged) << tr.final_residual();
}

TEST(Ascend, ConcaveBenchmarkKeepsAbnormalSet) {
    const Problem p = bench::concave();
    const OptimizationTrace tr = ascend(p, SpaceTimeField::constant(p.time, p.grid, 0.3));
    ASSERT_TRUE(tr.converged);
    const SecondOrderReport rep = second_order_report(p, tr.y, default_abnormal_tolerance(p.constraints));
    EXPECT_GE(rep.abnormal_measure, 0.05 * p.grid.length() * p.time.horizon());
    EXPECT_TRUE(rep.sign_condition);
    EXPECT_TRUE(rep.sign_condition_max);
}
