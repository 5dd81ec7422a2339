// Model parameters of the Persistent Turning Walker and the conversion from
// dimensional (a, b, c) to the single dimensionless noise strength alpha.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ptw {

/// Parameters of the unscaled model
///   dx/dt = c tau(theta),  dtheta/dt = c kappa,  dkappa = -a kappa dt + b dB.
struct DimensionalParams {
    double a; ///< relaxation frequency [1/T]
    double b; ///< curvature noise intensity [1/(L sqrt(T))]
    double c; ///< speed [L/T]
};

/// Dimensionless parameterization. Only alpha survives the rescaling.
class ScaledParams {
public:
    explicit ScaledParams(double alpha) : alpha_(alpha), alpha_sq_(alpha * alpha) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw std::invalid_argument("alpha must be positive and finite, got " +
                                        std::to_string(alpha));
    }

    double alpha() const noexcept { return alpha_; }
    double alpha_sq() const noexcept { return alpha_sq_; }

    friend bool operator==(const ScaledParams &, const ScaledParams &) = default;

private:
    double alpha_;
    double alpha_sq_;
};

/// Time and length units used by the scaled model: t0 = 1/a, x0 = c/a.
struct UnitFactors {
    double t0;
    double x0;

    double time_to_dimensional(double t) const noexcept { return t * t0; }
    double length_to_dimensional(double x) const noexcept { return x * x0; }
    /// A scaled diffusivity carries units x0^2 / t0.
    double diffusivity_to_dimensional(double d) const noexcept { return d * x0 * x0 / t0; }
};

struct Nondimensionalized {
    ScaledParams scaled;
    UnitFactors units;
};

inline void validate(const DimensionalParams &p) {
    auto check = [](double v, const char *name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(name) + " must be positive and finite");
    };
    check(p.a, "a");
    check(p.b, "b");
    check(p.c, "c");
}

/// alpha^2 = b^2 c^2 / (2 a^3).
inline Nondimensionalized nondimensionalize(const DimensionalParams &p) {
    validate(p);
    const double alpha = std::sqrt(p.b * p.b * p.c * p.c / (2.0 * p.a * p.a * p.a));
    return {ScaledParams(alpha), UnitFactors{1.0 / p.a, p.c / p.a}};
}

} // namespace ptw
