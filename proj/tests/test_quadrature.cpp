#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <ptw/quadrature.hpp>

using ptw::integrate;

TEST(GaussKronrod, PolynomialsExactOnOnePanel) {
    // G7 is exact through degree 13, so K15 - G7 vanishes.
    const auto r = integrate([](double x) { return std::pow(x, 12); }, -1.0, 1.0);
    EXPECT_NEAR(r.value, 2.0 / 13.0, 1e-15);
    EXPECT_EQ(r.panels, 1u);
    EXPECT_TRUE(r.converged);
}

TEST(GaussKronrod, SmoothTranscendental) {
    const auto r = integrate([](double x) { return std::exp(-x) * std::cos(3 * x); }, 0.0, 20.0);
    const double exact = (1.0 - std::exp(-20.0) * (std::cos(60.0) - 3 * std::sin(60.0))) / 10.0;
    EXPECT_NEAR(r.value, exact, 1e-13);
    EXPECT_LE(std::abs(r.value - exact), r.abs_error + 1e-15);
}

TEST(GaussKronrod, PeakedIntegrandRefinesLocally) {
    const auto r = integrate([](double x) { return 1.0 / (1e-4 + x * x); }, -1.0, 1.0, {0.0, 1e-10, 2000});
    const double exact = 2.0 / 1e-2 * std::atan(1.0 / 1e-2);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value / exact, 1.0, 1e-10);
    EXPECT_GT(r.panels, 4u);
}

TEST(GaussKronrod, GeometricSplitResolvesFeatureNearOrigin) {
    // A unit-width bump at the origin on top of a slowly decaying tail.
    auto f = [](double x) { return std::exp(-1e-4 * x) + 1e-3 * std::exp(-x * x); };
    const double exact = 1e4 * (1.0 - std::exp(-30.0)) + 1e-3 * std::sqrt(std::numbers::pi) / 2.0;
    const auto r = ptw::integrate_geometric(f, 0.0, 3e5);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value / exact, 1.0, 1e-12);
}

TEST(GaussKronrod, GeometricSplitFirstWidthFindsNarrowPeak) {
    // Nodes of a unit panel all miss a peak of width 1e-8 at the origin.
    auto f = [](double x) { return std::exp(-0.5 * (x * 1e8) * (x * 1e8)); };
    const double exact = 1e-8 * std::sqrt(std::numbers::pi / 2.0);
    EXPECT_LT(ptw::integrate_geometric(f, 0.0, 2.0).value, 0.5 * exact);
    const auto r = ptw::integrate_geometric(f, 0.0, 2.0, {}, 1e-8);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value / exact, 1.0, 1e-12);
}

TEST(GaussKronrod, EmptyIntervalAndBadBounds) {
    EXPECT_EQ(integrate([](double) { return 1.0; }, 2.0, 2.0).value, 0.0);
    EXPECT_THROW(integrate([](double) { return 1.0; }, 0.0, INFINITY), std::invalid_argument);
}

TEST(GaussKronrod, ReportsNonConvergence) {
    ptw::QuadratureOptions opt;
    opt.rel_tol = 1e-15;
    opt.max_panels = 3;
    auto wild = [](double x) { return std::sin(1.0 / (x + 1e-3)); };
    EXPECT_FALSE(integrate(wild, 0.0, 1.0, opt).converged);
    EXPECT_THROW(ptw::integrate_or_throw(wild, 0.0, 1.0, opt, "wild"), ptw::NumericalError);
}
