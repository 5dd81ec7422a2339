#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include <ptw/analytics.hpp>
#include <ptw/rng.hpp>

#include "oracles.hpp"

using namespace ptw;
using ptw::test::incomplete_gamma_by_quadrature;
using ptw::test::tanh_sinh;

namespace {

// 40-digit reference values of int_0^inf exp(-a^2 (-1 + s + e^-s)) ds (mpmath quad).
struct ReferenceD {
    double alpha;
    double value;
};
const std::vector<ReferenceD> kReferenceD = {
    {0.1, 100.99504128151635913}, {0.5, 4.8961486542127503539}, {1.0, 1.7182818284590452354},
    {2.0, 0.72495664140181810339}, {5.0, 0.26488027505122039095}, {0.01, 10000.999950004166278},
    {100.0, 0.012566579446061731290}, {1e3, 0.0012536475751213123394}, {1e8, 1.2533141406488335950e-8},
};

double round_sig(double x, int digits) {
    const double scale = std::pow(10.0, digits - 1 - std::floor(std::log10(std::abs(x))));
    return std::round(x * scale) / scale;
}

} // namespace

// ---------------------------------------------------------------- incomplete gamma

TEST(LowerIncompleteGamma, ClosedFormCases) {
    EXPECT_NEAR(lower_incomplete_gamma(1.0, 1.0), 1.0 - std::exp(-1.0), 1e-15);
    EXPECT_NEAR(lower_incomplete_gamma(4.0, 4.0) / 3.3991792777997463983, 1.0, 1e-13);
    EXPECT_NEAR(lower_incomplete_gamma(2.0, std::numeric_limits<double>::infinity()), 1.0, 1e-14);
    EXPECT_NEAR(lower_incomplete_gamma(2.0, 200.0), 1.0, 1e-14);
    EXPECT_EQ(lower_incomplete_gamma(3.0, 0.0), 0.0);
}

TEST(LowerIncompleteGamma, RejectsBadArguments) {
    EXPECT_THROW(lower_incomplete_gamma(0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(lower_incomplete_gamma(-1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(lower_incomplete_gamma(1.0, -1.0), std::invalid_argument);
}

TEST(LowerIncompleteGamma, BothBranchesMatchQuadratureOracle) {
    for (double z : {0.3, 1.7, 6.0}) {
        for (double u : {0.5 * z, z + 0.999, z + 1.001, 3.0 * z + 2.0}) {
            const long double ref = incomplete_gamma_by_quadrature(z, u);
            EXPECT_NEAR(lower_incomplete_gamma(z, u) / static_cast<double>(ref), 1.0, 1e-12) << z << ' ' << u;
        }
    }
}

// ---------------------------------------------------------------- diffusion coefficient

TEST(DiffusionCoefficient, AlphaOneIsEMinusOne) {
    for (auto m : {DiffusionMethod::closed_form, DiffusionMethod::series, DiffusionMethod::quadrature}) {
        const auto r = diffusion_coefficient(1.0, m);
        EXPECT_NEAR(r.value, std::numbers::e - 1.0, 1e-12 * r.value) << to_string(m);
        EXPECT_EQ(r.method, m);
    }
}

TEST(DiffusionCoefficient, MatchesHighPrecisionReference) {
    for (const auto &ref : kReferenceD)
        for (auto m : {DiffusionMethod::closed_form, DiffusionMethod::series, DiffusionMethod::quadrature}) {
            const auto r = diffusion_coefficient(ref.alpha, m);
            EXPECT_NEAR(r.value / ref.value, 1.0, 1e-11) << "alpha=" << ref.alpha << ' ' << to_string(m);
            EXPECT_GE(r.est_error, 0.0);
            EXPECT_LE(std::abs(r.value - ref.value), std::max(r.est_error, 1e-14 * ref.value))
                << "error bound violated, alpha=" << ref.alpha << ' ' << to_string(m);
        }
}

TEST(DiffusionCoefficient, ThreeSignificantFigures) {
    EXPECT_EQ(round_sig(diffusion_coefficient(0.1).value, 3), 101.0);
    EXPECT_EQ(round_sig(diffusion_coefficient(2.0).value, 3), 0.725);
}

TEST(DiffusionCoefficient, SmallAlphaAsymptote) {
    const double a = 1e-2;
    EXPECT_NEAR(a * a * diffusion_coefficient(a, DiffusionMethod::quadrature).value, 1.0, 0.02);
}

TEST(DiffusionCoefficient, ThreeWayAgreement) {
    for (double a : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const double closed = diffusion_coefficient(a, DiffusionMethod::closed_form).value;
        const double quad = diffusion_coefficient(a, DiffusionMethod::quadrature).value;
        const double series = diffusion_coefficient(a, DiffusionMethod::series).value;
        EXPECT_LT(std::abs(quad - closed), 1e-9 * closed) << a;
        EXPECT_LT(std::abs(series - closed), 1e-9 * closed) << a;
    }
}

TEST(DiffusionCoefficient, SeriesDelegatesAboveCancellationLimit) {
    const auto below = diffusion_coefficient(std::sqrt(29.0), DiffusionMethod::series);
    const auto above = diffusion_coefficient(6.0, DiffusionMethod::series);
    EXPECT_EQ(below.method, DiffusionMethod::series);
    EXPECT_EQ(above.method, DiffusionMethod::closed_form);
    const double quad = diffusion_coefficient(6.0, DiffusionMethod::quadrature).value;
    EXPECT_NEAR(above.value / quad, 1.0, 1e-10);
}

TEST(DiffusionCoefficient, StrictlyDecreasingInAlpha) {
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 50; ++i) {
        const double a = 0.05 * std::pow(200.0, i / 49.0); // 0.05 .. 10
        const double d = diffusion_coefficient(a).value;
        EXPECT_GT(d, 0.0);
        EXPECT_LT(d, prev) << a;
        prev = d;
    }
}

TEST(DiffusionCoefficient, RejectsBadAlpha) {
    EXPECT_THROW(diffusion_coefficient(0.0), std::invalid_argument);
    EXPECT_THROW(diffusion_coefficient(-1.0, DiffusionMethod::series), std::invalid_argument);
    EXPECT_THROW(parse_diffusion_method("simpson"), std::invalid_argument);
    EXPECT_EQ(parse_diffusion_method("closed-form"), DiffusionMethod::closed_form);
}

// ---------------------------------------------------------------- variance law

TEST(VarianceLaw, Origin) { EXPECT_EQ(variance_law(0.0, 1.0), 0.0); }

TEST(VarianceLaw, SmallTimeIsBallistic) {
    const double v = variance_law(1e-3, 1.0);
    EXPECT_NEAR(v / 1e-6, 1.0, 1e-3);
    EXPECT_NEAR(v / 9.9999991668333888532e-7, 1.0, 1e-10);
}

TEST(VarianceLaw, HighPrecisionReference) {
    EXPECT_NEAR(variance_law(5.0, 1.0) / 12.88862351908748535, 1.0, 1e-10);
    EXPECT_NEAR(variance_law(10.0, 1.0) / 30.035118955333835391, 1.0, 1e-10);
    EXPECT_NEAR(variance_law(120.0, 2.0) / 173.27957429980647393, 1.0, 1e-10);
}

TEST(VarianceLaw, OffsetFromLinearGrowthStaysBounded) {
    const double a = 2.0, z = a * a;
    const double d = diffusion_coefficient(a).value;
    std::vector<double> offsets;
    for (double t : {300.0, 600.0, 1200.0}) {
        const double offset = variance_law(t, a) - 2.0 * d * t;
        const double bound = 2.0 * std::exp(z) / (z * z) + 2.0 * t * std::exp(z) * std::exp(-z * t) / z;
        EXPECT_LE(std::abs(offset), bound) << t;
        offsets.push_back(offset);
    }
    // Converged: -2 int_0^inf s exp(...) ds, identical at all three times.
    EXPECT_NEAR(offsets[0], offsets[2], 1e-7 * std::abs(offsets[0]));
}

TEST(VarianceLaw, SlopeApproachesTwiceD) {
    const double slope = variance_law(201.0, 1.0) - variance_law(200.0, 1.0);
    const double d = diffusion_coefficient(1.0).value;
    EXPECT_NEAR(slope / (2.0 * d), 1.0, 1e-6);
}

TEST(VarianceLaw, RejectsBadArguments) {
    EXPECT_THROW(variance_law(-1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(variance_law(1.0, 0.0), std::invalid_argument);
}

// ---------------------------------------------------------------- theta variance

TEST(ThetaVariance, ReferenceValues) {
    EXPECT_EQ(theta_variance(0.0, 1.0), 0.0);
    EXPECT_NEAR(theta_variance(1.0, 1.0), 2.0 / std::numbers::e, 1e-15);
    EXPECT_NEAR(theta_variance(1e3, 0.7) / (2 * 0.7 * 0.7 * 1e3), 1.0, 1e-3 + 1e-12);
    EXPECT_THROW(theta_variance(-1.0, 1.0), std::invalid_argument);
}

TEST(ThetaVariance, TaylorBranchContinuousAtSwitch) {
    const double t = 1e-4;
    const double below = theta_variance(std::nextafter(t, 0.0), 1.0);
    const double at = theta_variance(t, 1.0);
    EXPECT_NEAR(below / at, 1.0, 1e-12);
    // Exact: 2 (t^2/2 - t^3/6 + t^4/24 - ...) at t = 1e-4.
    const long double tl = 1e-4L;
    const long double exact = 2.0L * (tl * tl / 2 - tl * tl * tl / 6 + tl * tl * tl * tl / 24);
    EXPECT_NEAR(at / static_cast<double>(exact), 1.0, 1e-12);
}

TEST(ThetaVariance, SecondDerivativeIsExponential) {
    const double a = 1.3, h = 1e-3;
    for (double t : {0.1, 1.0, 10.0}) {
        auto f = [&](double s) { return theta_variance(s, a) / (2 * a * a); };
        const double d2 = (f(t + h) - 2 * f(t) + f(t - h)) / (h * h);
        EXPECT_NEAR(d2, std::exp(-t), 1e-6) << t;
    }
}

// ---------------------------------------------------------------- cos identity, M, heat kernel

TEST(GaussianCos, ReferenceValues) {
    EXPECT_EQ(gaussian_cos_expectation(0.0), 1.0);
    EXPECT_NEAR(gaussian_cos_expectation(std::sqrt(theta_variance(1.0, 1.0))), 0.69220062755534635, 1e-15);
    EXPECT_NEAR(gaussian_cos_expectation(1e3), 0.0, 1e-300);
    EXPECT_THROW(gaussian_cos_expectation(-1.0), std::invalid_argument);
}

TEST(GaussianCos, MonteCarloOracle) {
    const double sigma = std::sqrt(theta_variance(1.0, 1.0));
    const int n = 400000;
    double s = 0, s2 = 0;
    RngStream rng(11, 0);
    for (int i = 0; i < n; ++i) {
        const double c = std::cos(sigma * rng.normal());
        s += c;
        s2 += c * c;
    }
    const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
    EXPECT_NEAR(mean, gaussian_cos_expectation(sigma), 4 * sd / std::sqrt(n));
}

TEST(EquilibriumM, NormalizedWithVarianceAlphaSquared) {
    for (double a : {0.1, 1.0, 2.5}) {
        auto m = [a](long double k) { return static_cast<long double>(equilibrium_m(static_cast<double>(k), a)); };
        const long double mass = tanh_sinh(m, -10.0L * a, 10.0L * a);
        const long double second = tanh_sinh([&](long double k) { return k * k * m(k); }, -10.0L * a, 10.0L * a);
        EXPECT_NEAR(static_cast<double>(mass), 1.0, 1e-10) << a;
        EXPECT_NEAR(static_cast<double>(second) / (a * a), 1.0, 1e-10) << a;
    }
    EXPECT_NEAR(equilibrium_m(0.0, 1.0), 0.39894228040143267794, 1e-16);
}

TEST(HeatKernel, MassSecondMomentAndPeak) {
    const HeatKernelParams hk = HeatKernelParams::for_alpha(1.0, 1.0);
    EXPECT_NEAR(hk.d_scalar, 0.5 * (std::numbers::e - 1.0), 1e-15);
    const long double r_max = 40.0L;
    auto radial = [&](long double r) {
        return 2.0L * std::numbers::pi_v<long double> * r * heat_kernel_density(static_cast<double>(r), 0.0, hk);
    };
    const long double mass = tanh_sinh(radial, 0.0L, r_max);
    const long double m2 = tanh_sinh([&](long double r) { return r * r * radial(r); }, 0.0L, r_max);
    EXPECT_NEAR(static_cast<double>(mass), 1.0, 1e-8);
    EXPECT_NEAR(static_cast<double>(m2) / (4.0 * hk.d_scalar * hk.t), 1.0, 1e-8);
    EXPECT_NEAR(static_cast<double>(m2) / (2.0 * diffusion_coefficient(1.0).value), 1.0, 1e-8);
    EXPECT_NEAR(heat_kernel_density(0.0, 0.0, hk), 0.092624469662596300409, 1e-15);
    EXPECT_THROW(heat_kernel_density(0.0, 0.0, {1.0, 0.0}), std::invalid_argument);
}
