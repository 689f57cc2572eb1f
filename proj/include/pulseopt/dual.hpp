#pragma once

#include <array>
#include <cmath>

namespace pulseopt {

/// Forward-mode dual number with K derivative lanes.
///
/// Arithmetic propagates all K partial derivatives alongside the value, so a
/// single evaluation of a K-seeded expression yields the value and K exact
/// partials of the realized floating-point computation. Comparisons and
/// branches look only at the value part, which keeps control flow identical
/// to a plain-double evaluation of the same expression.
template <int K>
struct Dual {
    double v{};
    std::array<double, K> d{};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit by design

    /// Constant `value` with derivative 1 in lane `lane`.
    static Dual seeded(double value, int lane) {
        Dual x(value);
        x.d[lane] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < K; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < K; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < K; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.v;
        const double q = v * inv;
        for (int i = 0; i < K; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
        v = q;
        return *this;
    }
    Dual& operator+=(double c) { v += c; return *this; }
    Dual& operator-=(double c) { v -= c; return *this; }
    Dual& operator*=(double c) {
        v *= c;
        for (int i = 0; i < K; ++i) d[i] *= c;
        return *this;
    }
    Dual& operator/=(double c) { return (*this) *= (1.0 / c); }

    Dual operator-() const {
        Dual r;
        r.v = -v;
        for (int i = 0; i < K; ++i) r.d[i] = -d[i];
        return r;
    }
};

template <int K> inline Dual<K> operator+(Dual<K> a, const Dual<K>& b) { return a += b; }
template <int K> inline Dual<K> operator-(Dual<K> a, const Dual<K>& b) { return a -= b; }
template <int K> inline Dual<K> operator*(Dual<K> a, const Dual<K>& b) { return a *= b; }
template <int K> inline Dual<K> operator/(Dual<K> a, const Dual<K>& b) { return a /= b; }

template <int K> inline Dual<K> operator+(Dual<K> a, double c) { return a += c; }
template <int K> inline Dual<K> operator+(double c, Dual<K> a) { return a += c; }
template <int K> inline Dual<K> operator-(Dual<K> a, double c) { return a -= c; }
template <int K> inline Dual<K> operator-(double c, const Dual<K>& a) { return (-a) += c; }
template <int K> inline Dual<K> operator*(Dual<K> a, double c) { return a *= c; }
template <int K> inline Dual<K> operator*(double c, Dual<K> a) { return a *= c; }
template <int K> inline Dual<K> operator/(Dual<K> a, double c) { return a /= c; }
template <int K> inline Dual<K> operator/(double c, const Dual<K>& a) {
    Dual<K> r(c);
    return r /= a;
}

template <int K> inline bool operator<(const Dual<K>& a, const Dual<K>& b) { return a.v < b.v; }
template <int K> inline bool operator>(const Dual<K>& a, const Dual<K>& b) { return a.v > b.v; }
template <int K> inline bool operator<=(const Dual<K>& a, const Dual<K>& b) { return a.v <= b.v; }
template <int K> inline bool operator>=(const Dual<K>& a, const Dual<K>& b) { return a.v >= b.v; }
template <int K> inline bool operator<(const Dual<K>& a, double b) { return a.v < b; }
template <int K> inline bool operator>(const Dual<K>& a, double b) { return a.v > b; }
template <int K> inline bool operator<=(const Dual<K>& a, double b) { return a.v <= b; }
template <int K> inline bool operator>=(const Dual<K>& a, double b) { return a.v >= b; }
template <int K> inline bool operator<(double a, const Dual<K>& b) { return a < b.v; }
template <int K> inline bool operator>(double a, const Dual<K>& b) { return a > b.v; }

/// Apply f with derivative df to every lane: chain rule for unary functions.
template <int K, class F>
inline Dual<K> dual_unary(const Dual<K>& x, double fv, double dfv) {
    Dual<K> r;
    r.v = fv;
    for (int i = 0; i < K; ++i) r.d[i] = dfv * x.d[i];
    return r;
}

template <int K> inline Dual<K> exp(const Dual<K>& x) {
    const double e = std::exp(x.v);
    return dual_unary<K, void>(x, e, e);
}
template <int K> inline Dual<K> log(const Dual<K>& x) {
    return dual_unary<K, void>(x, std::log(x.v), 1.0 / x.v);
}
template <int K> inline Dual<K> log1p(const Dual<K>& x) {
    return dual_unary<K, void>(x, std::log1p(x.v), 1.0 / (1.0 + x.v));
}
template <int K> inline Dual<K> sqrt(const Dual<K>& x) {
    const double s = std::sqrt(x.v);
    return dual_unary<K, void>(x, s, 0.5 / s);
}
template <int K> inline Dual<K> sin(const Dual<K>& x) {
    return dual_unary<K, void>(x, std::sin(x.v), std::cos(x.v));
}
template <int K> inline Dual<K> cos(const Dual<K>& x) {
    return dual_unary<K, void>(x, std::cos(x.v), -std::sin(x.v));
}
template <int K> inline Dual<K> tanh(const Dual<K>& x) {
    const double t = std::tanh(x.v);
    return dual_unary<K, void>(x, t, 1.0 - t * t);
}
template <int K> inline Dual<K> abs(const Dual<K>& x) {
    return x.v < 0.0 ? -x : x;
}

/// Value part of a scalar; the identity for plain doubles. Lets generic code
/// make step-size and branching decisions on values only.
inline double value_of(double x) { return x; }
template <int K> inline double value_of(const Dual<K>& x) { return x.v; }

inline bool all_finite(double x) { return std::isfinite(x); }
template <int K> inline bool all_finite(const Dual<K>& x) {
    if (!std::isfinite(x.v)) return false;
    for (int i = 0; i < K; ++i)
        if (!std::isfinite(x.d[i])) return false;
    return true;
}

/// Derivative lane width used for gradients of the pulse-design loss.
/// Wider parameter vectors are handled in chunks of this many seeds.
inline constexpr int kGradLanes = 16;
using DualG = Dual<kGradLanes>;

}  // namespace pulseopt
