#pragma once

#include <cassert>
#include <cmath>
#include <type_traits>
#include <vector>

#include "pulseopt/dual.hpp"

namespace pulseopt {

/// Minimal complex type over a generic real scalar (double or Dual).
/// std::complex is specified only for the builtin floating-point types, so
/// the differentiable pipeline carries its own pair type.
template <class S>
struct Cx {
    S re{};
    S im{};

    Cx() = default;
    Cx(S r) : re(std::move(r)) {}  // NOLINT: implicit real -> complex
    Cx(S r, S i) : re(std::move(r)), im(std::move(i)) {}

    Cx& operator+=(const Cx& o) { re += o.re; im += o.im; return *this; }
    Cx& operator-=(const Cx& o) { re -= o.re; im -= o.im; return *this; }
};

template <class S> inline Cx<S> operator+(Cx<S> a, const Cx<S>& b) { return a += b; }
template <class S> inline Cx<S> operator-(Cx<S> a, const Cx<S>& b) { return a -= b; }
template <class S> inline Cx<S> operator-(const Cx<S>& a) { return {-a.re, -a.im}; }

template <class S>
inline Cx<S> operator*(const Cx<S>& a, const Cx<S>& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
template <class S>
    requires(!std::is_same_v<S, double>)
inline Cx<S> operator*(const S& c, const Cx<S>& a) { return {c * a.re, c * a.im}; }
template <class S>
    requires(!std::is_same_v<S, double>)
inline Cx<S> operator*(const Cx<S>& a, const S& c) { return {a.re * c, a.im * c}; }
template <class S> inline Cx<S> operator*(double c, const Cx<S>& a) { return {a.re * c, a.im * c}; }
template <class S> inline Cx<S> operator*(const Cx<S>& a, double c) { return {a.re * c, a.im * c}; }

template <class S> inline Cx<S> conj(const Cx<S>& a) { return {a.re, -a.im}; }

/// i * a
template <class S> inline Cx<S> mul_i(const Cx<S>& a) { return {-a.im, a.re}; }
/// -i * a
template <class S> inline Cx<S> mul_neg_i(const Cx<S>& a) { return {a.im, -a.re}; }

/// exp(i*theta)
template <class S>
inline Cx<S> expi(const S& theta) {
    using std::cos;
    using std::sin;
    return {cos(theta), sin(theta)};
}

template <class S> inline S norm_sq(const Cx<S>& a) { return a.re * a.re + a.im * a.im; }

/// Dense row-major N x N complex matrix over a generic scalar.
template <class S>
struct CxMatrix {
    int n = 0;
    std::vector<Cx<S>> a;

    CxMatrix() = default;
    explicit CxMatrix(int dim) : n(dim), a(static_cast<size_t>(dim) * dim) {}

    Cx<S>& operator()(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
    const Cx<S>& operator()(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }

    void set_zero() {
        for (auto& e : a) e = Cx<S>{};
    }
};

/// Hamiltonians are plain complex matrices; the alias marks intent at call
/// sites. Invariants (Hermitian, zero diagonal, chain sparsity) are
/// established by the builder and checked in tests.
using HamiltonianMatrix = CxMatrix<double>;

template <class S>
inline S trace_re(const CxMatrix<S>& m) {
    S t{};
    for (int i = 0; i < m.n; ++i) t += m(i, i).re;
    return t;
}

}  // namespace pulseopt
