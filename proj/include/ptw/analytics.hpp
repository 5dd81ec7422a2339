// Closed-form and quadrature evaluation of the analytic quantities of the
// scaled PTW process: the large-scale diffusion coefficient, the exact
// position variance, the angular variance, the equilibrium curvature law and
// the heat kernel of the limiting diffusion equation.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include "double_double.hpp"
#include "quadrature.hpp"

namespace ptw {

namespace detail {

inline void require_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw std::invalid_argument("alpha must be positive and finite");
}

/// log of the lower incomplete gamma function. Series for u <= z + 1,
/// continued fraction for the upper function otherwise.
inline double log_lower_incomplete_gamma(double z, double u) {
    if (std::isinf(u)) return std::lgamma(z);
    if (u <= z + 1.0) {
        // gamma(z,u) = u^z e^-u sum_n u^n / (z (z+1) ... (z+n))
        double term = 1.0 / z;
        double sum = term;
        for (int n = 1; n < 100000; ++n) {
            term *= u / (z + n);
            sum += term;
            if (term < sum * 1e-17) return z * std::log(u) - u + std::log(sum);
        }
        throw NumericalError("lower_incomplete_gamma: series did not converge");
    }
    // Modified Lentz evaluation of Gamma(z,u) e^u u^-z.
    constexpr double tiny = 1e-300;
    double b = u + 1.0 - z;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - z);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-17) {
            const double log_gz = std::lgamma(z);
            const double q = std::exp(z * std::log(u) - u - log_gz) * h;
            return log_gz + std::log1p(-q);
        }
    }
    throw NumericalError("lower_incomplete_gamma: continued fraction did not converge");
}

/// -1 + t + e^-t without cancellation near t = 0.
inline double shifted_exp_residual(double t) {
    constexpr double kTaylorSwitch = 1e-4;
    if (t < kTaylorSwitch) {
        const double t2 = t * t;
        return t2 * (0.5 - t * (1.0 / 6.0 - t * (1.0 / 24.0 - t / 120.0)));
    }
    const long double tl = t;
    return static_cast<double>(tl + std::expm1(-tl));
}

} // namespace detail

/// gamma(z, u) = integral_0^u e^-t t^(z-1) dt.
inline double lower_incomplete_gamma(double z, double u) {
    if (!(z > 0.0) || !std::isfinite(z)) throw std::invalid_argument("lower_incomplete_gamma: z must be > 0");
    if (!(u >= 0.0)) throw std::invalid_argument("lower_incomplete_gamma: u must be >= 0");
    if (u == 0.0) return 0.0;
    return std::exp(detail::log_lower_incomplete_gamma(z, u));
}

/// Variance of the integrated curvature over [0, t]: 2 alpha^2 (-1 + t + e^-t).
inline double theta_variance(double t, double alpha) {
    detail::require_alpha(alpha);
    if (!(t >= 0.0)) throw std::invalid_argument("theta_variance: t must be >= 0");
    return 2.0 * alpha * alpha * detail::shifted_exp_residual(t);
}

/// E[cos Z] for Z ~ N(0, sigma^2).
inline double gaussian_cos_expectation(double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_cos_expectation: sigma must be >= 0");
    return std::exp(-0.5 * sigma * sigma);
}

/// Stationary curvature density, normal with mean 0 and variance alpha^2.
inline double equilibrium_m(double kappa, double alpha) {
    detail::require_alpha(alpha);
    const double r = kappa / alpha;
    return std::exp(-0.5 * r * r) / (std::sqrt(2.0 * std::numbers::pi) * alpha);
}

/// Velocity autocorrelation integrand exp(-alpha^2 (-1 + s + e^-s)).
inline double velocity_correlation(double s, double alpha_sq) {
    return std::exp(-alpha_sq * detail::shifted_exp_residual(s));
}

enum class DiffusionMethod { quadrature, closed_form, series };

inline std::string_view to_string(DiffusionMethod m) {
    switch (m) {
    case DiffusionMethod::quadrature: return "quadrature";
    case DiffusionMethod::closed_form: return "closed_form";
    case DiffusionMethod::series: return "series";
    }
    return "unknown";
}

inline DiffusionMethod parse_diffusion_method(std::string_view s) {
    if (s == "quadrature") return DiffusionMethod::quadrature;
    if (s == "closed_form" || s == "closed-form") return DiffusionMethod::closed_form;
    if (s == "series") return DiffusionMethod::series;
    throw std::invalid_argument("unknown diffusion method '" + std::string(s) + "'");
}

struct DiffusionResult {
    double value;
    DiffusionMethod method; ///< route that actually produced the value
    double est_error;       ///< absolute error bound of the evaluation
};

/// Above this alpha^2 the alternating series is handed to the closed form.
inline constexpr double kSeriesCancellationLimit = 30.0;

/// Above this alpha^2 the closed form switches to its large-alpha expansion.
inline constexpr double kClosedFormAsymptoticLimit = 1e4;

namespace detail {

inline DiffusionResult diffusion_closed_form(double z) {
    // (e/z)^z gamma(z, z). Inserting the power series of gamma(z, z) cancels the
    // prefactor exactly: D = sum_n z^n / (z (z+1) ... (z+n)), all terms positive.
    const double eps = std::numeric_limits<double>::epsilon();
    if (z > kClosedFormAsymptoticLimit) {
        // Laplace expansion about s = 0: D = sum_k c_k z^-(k+1)/2.
        constexpr double r = 1.2533141373155002512; // sqrt(pi / 2)
        constexpr std::array<double, 9> c{r,           1.0 / 3.0,     r / 12.0,
                                          4.0 / 135.0, r / 288.0,     -8.0 / 2835.0,
                                          -139.0 * r / 51840.0, -16.0 / 8505.0, -571.0 * r / 2488320.0};
        const double h = 1.0 / std::sqrt(z);
        double value = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) value = (value + c[k]) * h;
        return {value, DiffusionMethod::closed_form, value * eps * 4.0 + std::abs(c.back()) * std::pow(h, 10.0)};
    }
    const double max_terms = 1000.0 + 50.0 * std::sqrt(z);
    double term = 1.0 / z;
    double sum = term;
    for (double n = 1.0; n < max_terms; n += 1.0) {
        term *= z / (z + n);
        sum += term;
        if (term < sum * 1e-17) {
            return {sum, DiffusionMethod::closed_form, sum * eps * (4.0 + 2.0 * std::sqrt(n))};
        }
    }
    throw NumericalError("diffusion_coefficient: closed-form series did not converge");
}

inline DiffusionResult diffusion_series(double z) {
    // e^z sum_n (-1)^n z^n / (n! (n + z)), summed in double-double: the terms
    // peak near n = z at roughly e^z / z while the sum is ~ e^-z.
    DoubleDouble power(1.0); // z^n / n!
    DoubleDouble sum = DoubleDouble(1.0) / DoubleDouble(z);
    double max_term = std::abs(sum.hi);
    int n = 1;
    double last = max_term;
    for (; n < 100000; ++n) {
        power = power * z / static_cast<double>(n);
        const DoubleDouble term = power / detail::two_sum(static_cast<double>(n), z);
        sum = (n % 2 == 0) ? sum + term : sum - term;
        last = std::abs(term.hi);
        max_term = std::max(max_term, last);
        if (n > z && last < 1e-15 * std::abs(sum.hi)) break;
    }
    if (n >= 100000) throw NumericalError("diffusion_coefficient: series did not converge");
    const double scale = std::exp(z);
    const double value = sum.to_double() * scale;
    const double eps = std::numeric_limits<double>::epsilon();
    const double rounding = static_cast<double>(n) * 0x1.0p-104 * max_term * scale;
    return {value, DiffusionMethod::series, rounding + last * scale + 4.0 * eps * value};
}

inline DiffusionResult diffusion_quadrature(double z) {
    constexpr double kTailFraction = 1e-13;
    // The integrand is bounded below by exp(-z s^2 / 2) and exp(-z s), giving a
    // lower bound on the value; the tail beyond S is at most e^z e^(-z S) / z.
    const double lower = std::max(std::sqrt(std::numbers::pi / (2.0 * z)), 1.0 / z);
    const double target = kTailFraction * lower;
    const double cutoff = std::max(1.0, 1.0 + std::log(1.0 / (z * target)) / z);
    const double tail = std::exp(z * (1.0 - cutoff)) / z;

    QuadratureOptions opt;
    opt.rel_tol = 1e-13;
    opt.max_panels = 20000;
    auto integrand = [z](double s) { return velocity_correlation(s, z); };
    const QuadratureResult q = integrate_geometric(integrand, 0.0, cutoff, opt, std::min(1.0, 1.0 / std::sqrt(z)));
    if (q.abs_error > 1e-10 * std::abs(q.value))
        throw NumericalError("diffusion_coefficient: quadrature missed its error target");
    return {q.value, DiffusionMethod::quadrature, q.abs_error + tail};
}

} // namespace detail

/// Large-scale diffusion coefficient D with Var{x(t)} ~ 2 D t.
inline DiffusionResult diffusion_coefficient(double alpha, DiffusionMethod method = DiffusionMethod::closed_form) {
    detail::require_alpha(alpha);
    const double z = alpha * alpha;
    switch (method) {
    case DiffusionMethod::quadrature: return detail::diffusion_quadrature(z);
    case DiffusionMethod::closed_form: return detail::diffusion_closed_form(z);
    case DiffusionMethod::series:
        if (z > kSeriesCancellationLimit) return detail::diffusion_closed_form(z);
        return detail::diffusion_series(z);
    }
    throw std::invalid_argument("diffusion_coefficient: unknown method");
}

/// Exact position variance E|x(t)|^2 = 2 int_0^t (t - s) exp(-alpha^2 (-1 + s + e^-s)) ds.
inline double variance_law(double t, double alpha) {
    detail::require_alpha(alpha);
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("variance_law: t must be >= 0");
    if (t == 0.0) return 0.0;
    const double z = alpha * alpha;
    QuadratureOptions opt;
    opt.rel_tol = 1e-13;
    opt.max_panels = 20000;
    auto integrand = [t, z](double s) { return (t - s) * velocity_correlation(s, z); };
    const QuadratureResult q = integrate_geometric(integrand, 0.0, t, opt, std::min(1.0, 1.0 / alpha));
    if (q.abs_error > 1e-10 * std::abs(q.value))
        throw NumericalError("variance_law: quadrature missed its error target");
    return 2.0 * q.value;
}

struct HeatKernelParams {
    double d_scalar; ///< scalar diffusivity, D/2 for the PTW limit
    double t;        ///< elapsed time > 0

    static HeatKernelParams for_alpha(double alpha, double t) {
        return {0.5 * diffusion_coefficient(alpha).value, t};
    }
};

/// Fundamental solution of dn/dt = d Laplacian(n) in the plane, unit point mass at the origin.
inline double heat_kernel_density(double x1, double x2, const HeatKernelParams &hk) {
    if (!(hk.t > 0.0)) throw std::invalid_argument("heat_kernel_density: t must be > 0");
    if (!(hk.d_scalar > 0.0)) throw std::invalid_argument("heat_kernel_density: diffusivity must be > 0");
    const double four_dt = 4.0 * hk.d_scalar * hk.t;
    return std::exp(-(x1 * x1 + x2 * x2) / four_dt) / (std::numbers::pi * four_dt);
}

} // namespace ptw
