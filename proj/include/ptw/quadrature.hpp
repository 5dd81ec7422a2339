// Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptw {

/// Thrown when an evaluation cannot reach its own accuracy target.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QuadratureResult {
    double value = 0.0;
    double abs_error = 0.0; ///< sum of per-panel |K15 - G7|
    std::size_t evaluations = 0;
    std::size_t panels = 0;
    bool converged = false;
};

struct QuadratureOptions {
    double abs_tol = 0.0;
    double rel_tol = 1e-12;
    std::size_t max_panels = 4000;
};

namespace detail {

// Kronrod abscissae on [0,1] of the symmetric 15-point rule; odd indices are the Gauss nodes.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel &o) const noexcept { return error < o.error; }
};

template <typename F>
Panel kronrod15(F &f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double fsum = f(center - dx) + f(center + dx);
        kronrod += kWgk[j] * fsum;
        if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
    }
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

} // namespace detail

/// Integrates f over [a, b] until the summed error estimate drops below
/// max(abs_tol, rel_tol * |value|). Returns converged = false rather than
/// throwing when the panel budget runs out.
template <typename F>
QuadratureResult integrate(F &&f, double a, double b, const QuadratureOptions &opt = {}) {
    if (!std::isfinite(a) || !std::isfinite(b))
        throw std::invalid_argument("integrate: bounds must be finite");
    QuadratureResult out;
    if (a == b) {
        out.converged = true;
        return out;
    }
    std::priority_queue<detail::Panel> heap;
    heap.push(detail::kronrod15(f, a, b));
    out.evaluations = 15;
    double value = heap.top().value;
    double error = heap.top().error;

    auto target = [&] { return std::max(opt.abs_tol, opt.rel_tol * std::abs(value)); };
    while (error > target() && heap.size() < opt.max_panels) {
        const detail::Panel worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        // Panel no longer splittable in double precision.
        if (mid <= worst.a || mid >= worst.b) break;
        heap.pop();
        const detail::Panel left = detail::kronrod15(f, worst.a, mid);
        const detail::Panel right = detail::kronrod15(f, mid, worst.b);
        out.evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum from the panels to drop the drift of the running updates.
    value = 0.0;
    error = 0.0;
    out.panels = heap.size();
    std::vector<detail::Panel> panels;
    panels.reserve(heap.size());
    while (!heap.empty()) {
        panels.push_back(heap.top());
        heap.pop();
    }
    std::sort(panels.begin(), panels.end(), [](const auto &l, const auto &r) { return l.a < r.a; });
    for (const auto &p : panels) {
        value += p.value;
        error += p.error;
    }
    out.value = value;
    out.abs_error = error;
    out.converged = error <= target();
    return out;
}

/// Integrates over [a, b] in consecutive pieces of width w, 2w, 4w, ...
/// (w = first_width) so that features near a are resolved even when b - a is
/// large. Each piece gets the relative target; the absolute target is shared.
template <typename F>
QuadratureResult integrate_geometric(F &&f, double a, double b, const QuadratureOptions &opt = {},
                                     double first_width = 1.0) {
    QuadratureResult total;
    total.converged = true;
    double lo = a, width = first_width;
    while (lo < b) {
        const double hi = std::min(b, lo + width);
        const QuadratureResult piece = integrate(f, lo, hi, opt);
        total.value += piece.value;
        total.abs_error += piece.abs_error;
        total.evaluations += piece.evaluations;
        total.panels += piece.panels;
        lo = hi;
        width *= 2.0;
    }
    total.converged = total.abs_error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total.value));
    return total;
}

/// As integrate(), but throws NumericalError when the target is missed.
template <typename F>
QuadratureResult integrate_or_throw(F &&f, double a, double b, const QuadratureOptions &opt,
                                    const char *what) {
    QuadratureResult r = integrate(std::forward<F>(f), a, b, opt);
    if (!r.converged)
        throw NumericalError(std::string(what) + ": quadrature missed its error target (estimate " +
                             std::to_string(r.abs_error) + ")");
    return r;
}

} // namespace ptw
