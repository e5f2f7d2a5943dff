#pragma once

// Forward-mode dual numbers over an arbitrary scalar type. With T = Var the
// tangent is itself taped, which gives reverse-over-forward derivatives:
// weight gradients of expressions containing d/dt of a network output.

#include <cmath>
#include <concepts>
#include <type_traits>
#include <utility>

#include "solis/autodiff.hpp"
#include "solis/error.hpp"

namespace solis::ad {

template <class T>
struct Dual {
    T primal{};
    T tangent{};

    Dual() = default;
    Dual(T p, T t) : primal(std::move(p)), tangent(std::move(t)) {}
    template <class S>
        requires std::convertible_to<S, T>
    Dual(const S& p) : primal(p), tangent(0.0) {}  // NOLINT: constants lift implicitly
};

template <class>
inline constexpr bool is_dual_v = false;
template <class T>
inline constexpr bool is_dual_v<Dual<T>> = true;

template <class S, class T>
concept ScalarOf = !is_dual_v<S> && std::convertible_to<S, T>;

template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
    return {a.primal + b.primal, a.tangent + b.tangent};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
    return {a.primal - b.primal, a.tangent - b.tangent};
}
template <class T>
Dual<T> operator-(const Dual<T>& a) {
    return {-a.primal, -a.tangent};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
    return {a.primal * b.primal, a.tangent * b.primal + a.primal * b.tangent};
}
template <class T>
Dual<T> reciprocal(const Dual<T>& a) {
    T p = reciprocal(a.primal);
    return {p, -(a.tangent * (p * p))};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
    return a * reciprocal(b);
}

template <class T, ScalarOf<T> S>
Dual<T> operator+(const Dual<T>& a, const S& s) {
    return {a.primal + s, a.tangent};
}
template <class T, ScalarOf<T> S>
Dual<T> operator+(const S& s, const Dual<T>& a) {
    return {s + a.primal, a.tangent};
}
template <class T, ScalarOf<T> S>
Dual<T> operator-(const Dual<T>& a, const S& s) {
    return {a.primal - s, a.tangent};
}
template <class T, ScalarOf<T> S>
Dual<T> operator-(const S& s, const Dual<T>& a) {
    return {s - a.primal, -a.tangent};
}
template <class T, ScalarOf<T> S>
Dual<T> operator*(const Dual<T>& a, const S& s) {
    return {a.primal * s, a.tangent * s};
}
template <class T, ScalarOf<T> S>
Dual<T> operator*(const S& s, const Dual<T>& a) {
    return {s * a.primal, s * a.tangent};
}

template <class T, class U>
Dual<T>& operator+=(Dual<T>& a, const U& b) {
    return a = a + b;
}
template <class T, class U>
Dual<T>& operator-=(Dual<T>& a, const U& b) {
    return a = a - b;
}
template <class T, class U>
Dual<T>& operator*=(Dual<T>& a, const U& b) {
    return a = a * b;
}

template <class T>
Dual<T> tanh(const Dual<T>& a) {
    T p = tanh(a.primal);
    return {p, a.tangent * (1.0 - p * p)};
}
template <class T>
Dual<T> exp(const Dual<T>& a) {
    T p = exp(a.primal);
    return {p, a.tangent * p};
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
    T p = sqrt(a.primal);
    return {p, a.tangent * reciprocal(p) * 0.5};
}
template <class T>
Dual<T> softplus(const Dual<T>& a) {
    T p = softplus(a.primal);
    // d/dx softplus(x) = sigmoid(x) = 1 - exp(-softplus(x))
    return {p, a.tangent * (1.0 - exp(-p))};
}
template <class T>
Dual<T> abs(const Dual<T>& a) {
    const double x = value_of(a.primal);
    const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    return {abs(a.primal), a.tangent * s};
}
template <class T>
Dual<T> max(const Dual<T>& a, const Dual<T>& b) {
    return value_of(a.primal) >= value_of(b.primal) ? a : b;
}

template <class T>
double value_of(const Dual<T>& x) {
    return value_of(x.primal);
}

// Strips any dual layers down to the innermost primal value.
template <class T>
double primal_value(const T& x) {
    if constexpr (is_dual_v<T>)
        return primal_value(x.primal);
    else
        return value_of(x);
}

template <class T>
struct TimeDerivative {
    T value;
    T d_dt;
};

// Evaluates fn at t with a unit tangent seeded on t, returning fn(t) and
// d fn / dt. fn maps Dual<T> -> Dual<T>. With T = Var both results stay on
// the tape, so gradients of d_dt with respect to weights are available.
template <class T, class F>
TimeDerivative<T> time_derivative(F&& fn, double t) {
    Dual<T> seed{T(t), T(1.0)};
    Dual<T> out = std::forward<F>(fn)(seed);
    if (!std::isfinite(value_of(out.tangent)) || !std::isfinite(value_of(out.primal)))
        throw NumericError("non-finite time derivative at t = " + std::to_string(t));
    return {out.primal, out.tangent};
}

}  // namespace solis::ad
