// Exact-in-law simulation of the scaled PTW process
//
//   dx = tau(theta) dt,  dtheta = kappa dt,  dkappa = -kappa dt + sqrt(2) alpha dB.
//
// Over one step of length dt the pair (G, dB), with G the OU innovation and dB
// the Brownian increment, is jointly Gaussian with covariance
//
//   C = [ alpha^2 (1 - e^{-2dt})        sqrt(2) alpha (1 - e^{-dt}) ]
//       [ sqrt(2) alpha (1 - e^{-dt})   dt                          ]
//
// and the update
//
//   kappa' = e^{-dt} kappa + G
//   theta' = theta + (kappa - kappa') + sqrt(2) alpha dB
//
// reproduces the law of (kappa, theta) at grid times for any dt. Positions use
// the trapezoidal rule on cos/sin theta and are O(dt^2) accurate.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "params.hpp"
#include "rng.hpp"

namespace ptw {

/// Row-major 2x2 matrix.
struct Matrix2 {
    double m11 = 0.0, m12 = 0.0;
    double m21 = 0.0, m22 = 0.0;

    Matrix2 transposed() const noexcept { return {m11, m21, m12, m22}; }
    double determinant() const noexcept { return m11 * m22 - m12 * m21; }

    friend Matrix2 operator*(const Matrix2 &a, const Matrix2 &b) noexcept {
        return {a.m11 * b.m11 + a.m12 * b.m21, a.m11 * b.m12 + a.m12 * b.m22,
                a.m21 * b.m11 + a.m22 * b.m21, a.m21 * b.m12 + a.m22 * b.m22};
    }
    friend Matrix2 operator-(const Matrix2 &a, const Matrix2 &b) noexcept {
        return {a.m11 - b.m11, a.m12 - b.m12, a.m21 - b.m21, a.m22 - b.m22};
    }
    double max_abs() const noexcept {
        return std::max(std::max(std::abs(m11), std::abs(m12)), std::max(std::abs(m21), std::abs(m22)));
    }
};

inline void require_positive_step(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive and finite");
}

/// Covariance of (G, dB) over one step.
inline Matrix2 step_covariance(double alpha, double dt) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive and finite");
    require_positive_step(dt);
    const double c11 = -alpha * alpha * std::expm1(-2.0 * dt);
    const double c12 = -std::numbers::sqrt2 * alpha * std::expm1(-dt);
    return {c11, c12, c12, dt};
}

/// Lower Cholesky factor of a symmetric positive-definite 2x2 matrix.
inline Matrix2 cholesky_2x2(const Matrix2 &c) {
    if (!(c.m11 > 0.0)) throw std::domain_error("cholesky_2x2: matrix is not positive definite (C11 <= 0)");
    const double l11 = std::sqrt(c.m11);
    const double l21 = c.m21 / l11;
    const double schur = c.m22 - l21 * l21;
    if (!(schur > 0.0)) throw std::domain_error("cholesky_2x2: matrix is not positive definite");
    return {l11, 0.0, l21, std::sqrt(schur)};
}

/// Per-dt constants of the recursion. Immutable after construction.
class StepKernel {
public:
    StepKernel(const ScaledParams &params, double dt)
        : alpha_(params.alpha()), dt_(dt), gamma_(std::exp(-dt)), cov_(step_covariance(params.alpha(), dt)) {
        chol_ = factor(dt, cov_);
    }

    double alpha() const noexcept { return alpha_; }
    double dt() const noexcept { return dt_; }
    double gamma() const noexcept { return gamma_; }
    const Matrix2 &cov() const noexcept { return cov_; }
    const Matrix2 &chol() const noexcept { return chol_; }

private:
    // Same factor as cholesky_2x2, but the Schur complement dt - 2 tanh(dt/2)
    // is formed without cancellation for small dt.
    static Matrix2 factor(double dt, const Matrix2 &cov) {
        if (dt >= 0.05) return cholesky_2x2(cov);
        const double x = 0.5 * dt;
        const double x2 = x * x;
        const double schur =
            2.0 * x * x2 *
            (1.0 / 3.0 - x2 * (2.0 / 15.0 - x2 * (17.0 / 315.0 - x2 * (62.0 / 2835.0 - x2 * 1382.0 / 155925.0))));
        const double l11 = std::sqrt(cov.m11);
        return {l11, 0.0, cov.m21 / l11, std::sqrt(schur)};
    }

    double alpha_;
    double dt_;
    double gamma_;
    Matrix2 cov_;
    Matrix2 chol_;
};

/// Instantaneous state of one walker, scaled units. theta is not wrapped.
struct PtwState {
    double t = 0.0;
    double x1 = 0.0;
    double x2 = 0.0;
    double theta = 0.0;
    double kappa = 0.0;
    double b_accum = 0.0;
};

/// Joint innovation (G, dB) of one step.
struct StepNoise {
    double g = 0.0;
    double db = 0.0;
};

/// Substream layout of a trajectory stream.
inline constexpr std::uint32_t kThetaSubstream = 0;
inline constexpr std::uint32_t kKappaSubstream = 1;
inline constexpr std::uint32_t kDynamicsSubstream = 2;

/// Initial law: x = 0, theta ~ U[0, 2pi), kappa ~ N(0, alpha^2), independent.
inline PtwState sample_initial(const ScaledParams &params, const RngStream &stream) {
    RngStream theta_rng = stream.substream(kThetaSubstream);
    RngStream kappa_rng = stream.substream(kKappaSubstream);
    PtwState s;
    s.theta = 2.0 * std::numbers::pi * theta_rng.uniform();
    s.kappa = params.alpha() * kappa_rng.normal();
    return s;
}

inline StepNoise draw_noise(const StepKernel &k, RngStream &rng) {
    const auto [z1, z2] = rng.normal_pair();
    const Matrix2 &l = k.chol();
    return {l.m11 * z1, l.m21 * z1 + l.m22 * z2};
}

/// Deterministic part of the update for a given innovation.
inline PtwState advance(const PtwState &s, const StepKernel &k, const StepNoise &noise) noexcept {
    PtwState n;
    n.t = s.t + k.dt();
    n.kappa = k.gamma() * s.kappa + noise.g;
    n.b_accum = s.b_accum + noise.db;
    n.theta = s.theta + (s.kappa - n.kappa) + std::numbers::sqrt2 * k.alpha() * noise.db;
    const double half = 0.5 * k.dt();
    n.x1 = s.x1 + half * (std::cos(s.theta) + std::cos(n.theta));
    n.x2 = s.x2 + half * (std::sin(s.theta) + std::sin(n.theta));
    return n;
}

inline PtwState step(const PtwState &s, const StepKernel &k, RngStream &rng) {
    return advance(s, k, draw_noise(k, rng));
}

/// Streams n_steps + 1 states (initial included) to visit(state).
template <typename Visitor>
void simulate(const ScaledParams &params, double dt, std::size_t n_steps, const RngStream &stream,
              Visitor &&visit) {
    const StepKernel kernel(params, dt);
    RngStream dyn = stream.substream(kDynamicsSubstream);
    PtwState s = sample_initial(params, stream);
    visit(static_cast<const PtwState &>(s));
    for (std::size_t i = 0; i < n_steps; ++i) {
        s = step(s, kernel, dyn);
        visit(static_cast<const PtwState &>(s));
    }
}

inline std::vector<PtwState> simulate_path(const ScaledParams &params, double dt, std::size_t n_steps,
                                           const RngStream &stream) {
    require_positive_step(dt);
    if (n_steps < 1) throw std::invalid_argument("simulate_path: n_steps must be >= 1");
    std::vector<PtwState> path;
    path.reserve(n_steps + 1);
    simulate(params, dt, n_steps, stream, [&](const PtwState &s) { path.push_back(s); });
    return path;
}

/// Total path length over net displacement; >> 1 for tightly wound paths.
inline double tortuosity(const std::vector<PtwState> &path) {
    if (path.size() < 2) return 1.0;
    double length = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i)
        length += std::hypot(path[i].x1 - path[i - 1].x1, path[i].x2 - path[i - 1].x2);
    const double net = std::hypot(path.back().x1 - path.front().x1, path.back().x2 - path.front().x2);
    return length / net;
}

} // namespace ptw
