#include <gtest/gtest.h>

#include <paracontrol/grid.hpp>
#include <paracontrol/field.hpp>
#include <paracontrol/tridiag.hpp>

#include <cmath>
#include <random>

using namespace paracontrol;

TEST(Grid, DirichletLayout) {
    const Grid g = Grid::build(1.0, 4, Boundary::dirichlet);
    ASSERT_EQ(g.size(), 3);
    EXPECT_DOUBLE_EQ(g.positions()[0], 0.25);
    EXPECT_DOUBLE_EQ(g.positions()[1], 0.5);
    EXPECT_DOUBLE_EQ(g.positions()[2], 0.75);
}

TEST(Grid, NeumannLayout) {
    const Grid g = Grid::build(1.0, 4, Boundary::neumann);
    ASSERT_EQ(g.size(), 4);
    const double expected[] = {0.125, 0.375, 0.625, 0.875};
    for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(g.positions()[j], expected[j]);
}

TEST(Grid, RejectsBadArguments) {
    EXPECT_THROW(Grid::build(1.0, 3, Boundary::neumann), std::invalid_argument);
    EXPECT_THROW(Grid::build(0.0, 8, Boundary::neumann), std::invalid_argument);
    EXPECT_THROW(Grid::build(-1.0, 8, Boundary::dirichlet), std::invalid_argument);
}

TEST(Grid, IntegrateConstantsAndLinear) {
    const Grid g = Grid::build(2.0, 8, Boundary::neumann);
    EXPECT_DOUBLE_EQ(integrate(std::vector<double>(8, 1.0), g), 2.0);
    EXPECT_EQ(integrate(std::vector<double>(8, 0.0), g), 0.0);

    const Grid h = Grid::build(1.0, 64, Boundary::neumann);
    std::vector<double> x(h.positions().begin(), h.positions().end());
    EXPECT_NEAR(integrate(x, h), 0.5, 1e-15);
    EXPECT_THROW(integrate(std::vector<double>(3, 1.0), h), std::invalid_argument);
}

TEST(Grid, IntegrateIsLinear) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d;
    const Grid g = Grid::build(1.3, 37, Boundary::dirichlet);
    std::vector<double> f(g.size()), h(g.size()), c(g.size());
    for (int j = 0; j < g.size(); ++j) {
        f[j] = d(rng);
        h[j] = d(rng);
        c[j] = 2.5 * f[j] - 0.75 * h[j];
    }
    const double lhs = integrate(c, g);
    const double rhs = 2.5 * integrate(f, g) - 0.75 * integrate(h, g);
    EXPECT_LE(std::abs(lhs - rhs), 1e-13 * std::max(1.0, std::abs(rhs)));
}

class EigenbasisTest : public ::testing::TestWithParam<std::tuple<Boundary, int>> {};

TEST_P(EigenbasisTest, OrthonormalAndResidual) {
    const auto [bc, n] = GetParam();
    const Grid g = Grid::build(1.0, n, bc);
    const SpectralBasis b = discrete_eigenbasis(g, g.size());
    std::vector<double> lap(g.size());
    for (int k = 1; k <= b.size(); ++k) {
        const Mode& mk = b.mode(k);
        for (int l = k; l <= b.size(); ++l) {
            EXPECT_NEAR(inner(mk.vector, b.mode(l).vector, g), k == l ? 1.0 : 0.0, 1e-12);
        }
        apply_laplacian(g, mk.vector, lap);
        double res = 0.0;
        for (int j = 0; j < g.size(); ++j) res = std::max(res, std::abs(lap[j] + mk.lambda_discrete * mk.vector[j]));
        EXPECT_LE(res, 1e-9 * std::max(1.0, mk.lambda_discrete));
        EXPECT_LE(mk.lambda_discrete, mk.lambda_continuum * (1.0 + 1e-14) + 1e-12);
        if (k > 1) {
            EXPECT_GE(mk.lambda_discrete, b.mode(k - 1).lambda_discrete);
        }
    }
}

INSTANTIATE_TEST_SUITE_P(AllSizes, EigenbasisTest,
                         ::testing::Combine(::testing::Values(Boundary::dirichlet, Boundary::neumann),
                                            ::testing::Values(8, 64, 256)));

TEST(Grid, EigenbasisCountChecked) {
    const Grid g = Grid::build(1.0, 8, Boundary::dirichlet);
    EXPECT_THROW(discrete_eigenbasis(g, 8), std::invalid_argument);
    EXPECT_NO_THROW(discrete_eigenbasis(g, 7));
    EXPECT_THROW(discrete_eigenbasis(g, 0), std::invalid_argument);
}

TEST(Grid, NeumannFirstModeIsConstant) {
    const Grid g = Grid::build(2.0, 16, Boundary::neumann);
    const SpectralBasis b = discrete_eigenbasis(g, 2);
    EXPECT_EQ(b.mode(1).lambda_discrete, 0.0);
    for (double v : b.mode(1).vector) EXPECT_NEAR(v, 1.0 / std::sqrt(2.0), 1e-14);
}

TEST(Grid, RegionMask) {
    const Grid g = Grid::build(1.0, 10, Boundary::neumann);
    const Interval iv{0.2, 0.5};
    const RegionMask m = region_mask(g, std::span(&iv, 1));
    EXPECT_EQ(m.count(), 3);
    EXPECT_TRUE(m.contains(2));
    EXPECT_TRUE(m.contains(3));
    EXPECT_TRUE(m.contains(4));
    EXPECT_NEAR(m.measure, 0.3, 1e-15);

    const Interval all{0.0, 1.0};
    EXPECT_NEAR(region_mask(g, std::span(&all, 1)).measure, 1.0, 1e-15);
    EXPECT_EQ(region_mask(g, {}).measure, 0.0);
}

TEST(TimeGrid, TrapezoidWeights) {
    const TimeGrid t(2.0, 8);
    EXPECT_EQ(t.nodes(), 9);
    EXPECT_DOUBLE_EQ(t.dt(), 0.25);
    double s = 0.0;
    for (int m = 0; m < t.nodes(); ++m) s += t.weight(m);
    EXPECT_DOUBLE_EQ(s, 2.0);
    EXPECT_DOUBLE_EQ(t.weight(0), 0.125);
}

TEST(SpaceTimeField, ArithmeticAndShape) {
    const Grid g = Grid::build(1.0, 8, Boundary::neumann);
    const TimeGrid t(1.0, 4);
    SpaceTimeField a = SpaceTimeField::constant(t, g, 2.0);
    SpaceTimeField b = SpaceTimeField::constant(t, g, 0.5);
    const SpaceTimeField c = a - 3.0 * b;
    EXPECT_DOUBLE_EQ(c(2, 3), 0.5);
    EXPECT_DOUBLE_EQ(st_integrate(a, t, g), 2.0);
    EXPECT_DOUBLE_EQ(st_inner(a, b, t, g), 1.0);
    const SpaceTimeField other = SpaceTimeField::zeros(TimeGrid(1.0, 5), g);
    EXPECT_THROW(st_inner(a, other, t, g), std::invalid_argument);
}

TEST(Tridiag, ThomasSolvesShiftedLaplacian) {
    const Grid g = Grid::build(1.0, 32, Boundary::neumann);
    const Tridiag a = shifted_laplacian(g, -0.01);
    std::vector<double> x(g.size()), rhs(g.size()), sol(g.size());
    for (int j = 0; j < g.size(); ++j) x[j] = std::sin(0.3 * j) + 0.1 * j;
    a.multiply(x, rhs);
    ASSERT_TRUE(thomas_solve(a, rhs, sol));
    for (int j = 0; j < g.size(); ++j) EXPECT_NEAR(sol[j], x[j], 1e-13);
}
