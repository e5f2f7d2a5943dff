#pragma once

// Quasi-LPV second-order surrogate:
//   y' = v
//   v' = -k(x) y - d(x) v + g(x) u

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "solis/autodiff.hpp"
#include "solis/error.hpp"

namespace solis {

template <class T>
struct StateT {
    T y{};
    T v{};
};
using State = StateT<double>;

template <class T>
struct CoefficientsT {
    T k{};  // stiffness, 1/s^2
    T d{};  // damping, 1/s
    T g{};  // input gain
};
using SurrogateCoefficients = CoefficientsT<double>;

struct CanonicalParams {
    double omega_n = 0.0;  // rad/s
    double zeta = 0.0;
    double gain = 0.0;     // DC gain K
};

// Raised when a rollout or simulation produces a non-finite stage or leaves
// the blow-up bound.
class IntegrationError : public NumericError {
  public:
    IntegrationError(const std::string& what, double time, std::size_t step)
        : NumericError(what + " (t = " + std::to_string(time) + ", step " + std::to_string(step) + ")"),
          time_(time),
          step_(step) {}
    double time() const { return time_; }
    std::size_t step() const { return step_; }

  private:
    double time_;
    std::size_t step_;
};

class DivergenceError : public IntegrationError {
  public:
    using IntegrationError::IntegrationError;
};

template <class T>
StateT<T> surrogate_rhs(const StateT<T>& x, double u, const CoefficientsT<T>& theta) {
    return {x.v, theta.g * u - theta.k * x.y - theta.d * x.v};
}

// omega_n = sqrt(k), zeta = d / (2 sqrt(k)), K = g / k; requires k > 0.
CanonicalParams canonical_params(const SurrogateCoefficients& theta);
CanonicalParams canonical_params(const SurrogateCoefficients& theta, const State& at);
SurrogateCoefficients coefficients_from_canonical(const CanonicalParams& c);

// Piecewise-linear input u(t) through stored samples, held constant outside.
class InputSignal {
  public:
    InputSignal() = default;
    InputSignal(std::vector<double> times, std::vector<double> values);
    static InputSignal constant(double value);

    double operator()(double t) const;
    bool empty() const { return times_.empty(); }
    std::span<const double> times() const { return times_; }
    std::span<const double> values() const { return values_; }

  private:
    std::vector<double> times_;
    std::vector<double> values_;
};

template <class T>
bool is_finite(const StateT<T>& x) {
    return std::isfinite(ad::value_of(x.y)) && std::isfinite(ad::value_of(x.v));
}

// Classical RK4 step of x' = rhs(x, u) with u sampled at t, t + h/2, t + h.
template <class T, class Rhs, class Input>
StateT<T> rk4_step(Rhs&& rhs, const StateT<T>& x, const Input& u_of_t, double t, double h, std::size_t step = 0) {
    if (!(h > 0.0)) throw UsageError("RK4 step size must be positive");
    const double u0 = u_of_t(t);
    const double um = u_of_t(t + 0.5 * h);
    const double u1 = u_of_t(t + h);
    auto check = [&](const StateT<T>& s, int stage) {
        if (!is_finite(s)) throw IntegrationError("non-finite RK4 stage " + std::to_string(stage), t, step);
    };
    const StateT<T> k1 = rhs(x, u0);
    check(k1, 1);
    const StateT<T> k2 = rhs(StateT<T>{x.y + k1.y * (0.5 * h), x.v + k1.v * (0.5 * h)}, um);
    check(k2, 2);
    const StateT<T> k3 = rhs(StateT<T>{x.y + k2.y * (0.5 * h), x.v + k2.v * (0.5 * h)}, um);
    check(k3, 3);
    const StateT<T> k4 = rhs(StateT<T>{x.y + k3.y * h, x.v + k3.v * h}, u1);
    check(k4, 4);
    const double w = h / 6.0;
    StateT<T> next{x.y + (k1.y + k2.y * 2.0 + k3.y * 2.0 + k4.y) * w,
                   x.v + (k1.v + k2.v * 2.0 + k3.v * 2.0 + k4.v) * w};
    check(next, 5);
    return next;
}

// Surrogate vector field with coefficients re-evaluated at every stage state.
template <class T, class ParamNet>
auto quasi_lpv_field(const ParamNet& param_net) {
    return [&param_net](const StateT<T>& s, double u) {
        const CoefficientsT<T> theta = param_net(s, u);
        return surrogate_rhs(s, u, theta);
    };
}

inline constexpr double kDefaultBlowUpBound = 1e6;

// Open-loop integration of the surrogate over `grid` starting at x0.
// Returns one state per grid point (the first is x0). Throws DivergenceError
// when |y| or |v| exceeds `blow_up`.
template <class ParamNet, class Input>
std::vector<State> rollout(const ParamNet& param_net, const State& x0, const Input& u_of_t, std::span<const double> grid,
                           double blow_up = kDefaultBlowUpBound) {
    if (grid.empty()) throw UsageError("rollout grid is empty");
    std::vector<State> out;
    out.reserve(grid.size());
    out.push_back(x0);
    auto field = quasi_lpv_field<double>(param_net);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double h = grid[i + 1] - grid[i];
        if (!(h > 0.0)) throw UsageError("rollout grid must be strictly increasing");
        State next = rk4_step<double>(field, out.back(), u_of_t, grid[i], h, i);
        if (std::fabs(next.y) > blow_up || std::fabs(next.v) > blow_up)
            throw DivergenceError("rollout exceeded blow-up bound", grid[i + 1], i + 1);
        out.push_back(next);
    }
    return out;
}

}  // namespace solis
