// Minimal double-double arithmetic (about 106 significand bits) built on
// error-free transformations. Only the operations the alternating series for
// the diffusion coefficient needs.
#pragma once

#include <cmath>

namespace ptw {

struct DoubleDouble {
    double hi = 0.0;
    double lo = 0.0;

    constexpr DoubleDouble() = default;
    constexpr DoubleDouble(double h) : hi(h), lo(0.0) {}
    constexpr DoubleDouble(double h, double l) : hi(h), lo(l) {}

    double to_double() const noexcept { return hi + lo; }
};

namespace detail {

inline DoubleDouble two_sum(double a, double b) noexcept {
    const double s = a + b;
    const double bb = s - a;
    const double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

inline DoubleDouble quick_two_sum(double a, double b) noexcept {
    const double s = a + b;
    return {s, b - (s - a)};
}

inline DoubleDouble two_prod(double a, double b) noexcept {
    const double p = a * b;
    return {p, std::fma(a, b, -p)};
}

} // namespace detail

inline DoubleDouble operator-(const DoubleDouble &a) noexcept { return {-a.hi, -a.lo}; }

inline DoubleDouble operator+(const DoubleDouble &a, const DoubleDouble &b) noexcept {
    DoubleDouble s = detail::two_sum(a.hi, b.hi);
    const DoubleDouble t = detail::two_sum(a.lo, b.lo);
    s.lo += t.hi;
    s = detail::quick_two_sum(s.hi, s.lo);
    s.lo += t.lo;
    return detail::quick_two_sum(s.hi, s.lo);
}

inline DoubleDouble operator-(const DoubleDouble &a, const DoubleDouble &b) noexcept { return a + (-b); }

inline DoubleDouble operator*(const DoubleDouble &a, double b) noexcept {
    DoubleDouble p = detail::two_prod(a.hi, b);
    p.lo += a.lo * b;
    return detail::quick_two_sum(p.hi, p.lo);
}

inline DoubleDouble operator*(const DoubleDouble &a, const DoubleDouble &b) noexcept {
    DoubleDouble p = detail::two_prod(a.hi, b.hi);
    p.lo += a.hi * b.lo + a.lo * b.hi;
    return detail::quick_two_sum(p.hi, p.lo);
}

inline DoubleDouble operator/(const DoubleDouble &a, const DoubleDouble &b) noexcept {
    // Long division: two quotient digits plus a correction.
    const double q1 = a.hi / b.hi;
    DoubleDouble r = a - b * q1;
    const double q2 = r.hi / b.hi;
    r = r - b * q2;
    const double q3 = r.hi / b.hi;
    DoubleDouble q = detail::quick_two_sum(q1, q2);
    return q + DoubleDouble(q3);
}

inline DoubleDouble operator/(const DoubleDouble &a, double b) noexcept { return a / DoubleDouble(b); }

inline DoubleDouble abs(const DoubleDouble &a) noexcept { return a.hi < 0.0 ? -a : a; }

} // namespace ptw
