#include "doctest.h"

#include <cmath>
#include <vector>

#include "solis/surrogate.hpp"

using namespace solis;

namespace {

struct ConstantNet {
    SurrogateCoefficients theta;
    SurrogateCoefficients operator()(const State&, double) const { return theta; }
};

std::vector<double> uniform_grid(double t0, double t1, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

double harmonic_error(double h, double horizon) {
    const ConstantNet net{{1.0, 0.0, 0.0}};
    const auto steps = static_cast<std::size_t>(std::lround(horizon / h));
    const auto traj = rollout(net, State{1.0, 0.0}, InputSignal::constant(0.0), uniform_grid(0.0, horizon, steps + 1));
    return std::abs(traj.back().y - std::cos(horizon));
}

}  // namespace

TEST_CASE("surrogate_rhs examples") {
    auto a = surrogate_rhs(State{0.7, -1.2}, 3.0, SurrogateCoefficients{0, 0, 0});
    CHECK(a.y == -1.2);
    CHECK(a.v == 0.0);
    auto b = surrogate_rhs(State{1.0, 0.0}, 0.0, SurrogateCoefficients{1, 0, 0});
    CHECK(b.y == 0.0);
    CHECK(b.v == -1.0);
    auto c = surrogate_rhs(State{0.0, 0.0}, 2.0, SurrogateCoefficients{1, 1, 3});
    CHECK(c.y == 0.0);
    CHECK(c.v == 6.0);
}

TEST_CASE("canonical_params examples and domain") {
    auto a = canonical_params({4, 4, 8});
    CHECK(a.omega_n == 2.0);
    CHECK(a.zeta == 1.0);
    CHECK(a.gain == 2.0);
    auto b = canonical_params({1, 0, 1});
    CHECK(b.omega_n == 1.0);
    CHECK(b.zeta == 0.0);
    CHECK(b.gain == 1.0);
    auto c = canonical_params({9, 3, 0});
    CHECK(c.omega_n == 3.0);
    CHECK(c.zeta == 0.5);
    CHECK(c.gain == 0.0);
    CHECK_THROWS_AS(canonical_params({0.0, 1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(canonical_params({-1.0, 1.0, 1.0}, State{2.0, 0.5}), DomainError);
}

TEST_CASE("canonical parameters round-trip") {
    for (double wn : {0.3, 1.0, 2.7})
        for (double z : {-0.4, 0.0, 0.2, 1.5})
            for (double K : {-2.0, 0.5, 3.0}) {
                const auto back = canonical_params(coefficients_from_canonical({wn, z, K}));
                CHECK(back.omega_n == doctest::Approx(wn).epsilon(1e-12));
                CHECK(std::abs(back.zeta - z) < 1e-12);
                CHECK(back.gain == doctest::Approx(K).epsilon(1e-12));
            }
}

TEST_CASE("rk4_step examples") {
    auto zero = [](const State&, double) { return State{0.0, 0.0}; };
    const auto same = rk4_step<double>(zero, State{0.3, -0.1}, InputSignal::constant(0.0), 0.0, 0.1);
    CHECK(same.y == 0.3);
    CHECK(same.v == -0.1);

    auto drift = [](const State&, double) { return State{1.0, 0.0}; };
    const auto moved = rk4_step<double>(drift, State{0.0, 0.0}, InputSignal::constant(0.0), 0.0, 0.1);
    CHECK(moved.y == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(moved.v == 0.0);

    CHECK(harmonic_error(0.01, 1.0) < 1e-8);
    CHECK_THROWS_AS(rk4_step<double>(zero, State{}, InputSignal::constant(0.0), 0.0, 0.0), UsageError);

    auto bad = [](const State& s, double) { return State{s.v, std::log(-1.0 - s.y * s.y)}; };
    CHECK_THROWS_AS(rk4_step<double>(bad, State{}, InputSignal::constant(0.0), 0.0, 0.1, 7), IntegrationError);
}

TEST_CASE("rk4 samples the input at t, t+h/2 and t+h") {
    std::vector<double> seen;
    auto rhs = [&](const State&, double u) {
        seen.push_back(u);
        return State{u, 0.0};
    };
    const InputSignal ramp({0.0, 1.0}, {0.0, 1.0});
    const auto x = rk4_step<double>(rhs, State{}, ramp, 0.2, 0.4);
    CHECK(seen == std::vector<double>{0.2, 0.4, 0.4, 0.6000000000000001});
    CHECK(x.y == doctest::Approx(0.4 * 0.4).epsilon(1e-14));  // integral of t over [0.2, 0.6]
}

TEST_CASE("rk4 global error order on the harmonic oscillator") {
    const double e1 = harmonic_error(0.1, 10.0);
    const double e2 = harmonic_error(0.05, 10.0);
    const double ratio = e1 / e2;
    CHECK(ratio >= 12.0);
    CHECK(ratio <= 20.0);
}

TEST_CASE("rollout examples") {
    const ConstantNet spring{{1.0, 0.0, 0.0}};
    const double period = 2 * M_PI;
    const auto n = static_cast<std::size_t>(std::lround(period / 0.01));
    const auto traj = rollout(spring, State{1.0, 0.0}, InputSignal::constant(0.0), uniform_grid(0.0, period, n + 1));
    CHECK(traj.size() == n + 1);
    CHECK(std::abs(traj.back().y - 1.0) < 1e-6);
    CHECK(std::abs(traj.back().v) < 1e-6);

    const ConstantNet gain_only{{0.0, 0.0, 5.0}};
    for (const auto& s : rollout(gain_only, State{0.0, 0.0}, InputSignal::constant(0.0), uniform_grid(0, 3, 31))) {
        CHECK(s.y == 0.0);
        CHECK(s.v == 0.0);
    }

    const std::vector<double> one{0.0};
    const auto single = rollout(spring, State{0.4, 0.1}, InputSignal::constant(0.0), one);
    REQUIRE(single.size() == 1);
    CHECK(single[0].y == 0.4);
}

TEST_CASE("rollout divergence and grid checks") {
    const ConstantNet unstable{{-25.0, 0.0, 0.0}};
    CHECK_THROWS_AS(rollout(unstable, State{1.0, 0.0}, InputSignal::constant(0.0), uniform_grid(0, 20, 2001)),
                    DivergenceError);
    const std::vector<double> backwards{0.0, 0.5, 0.4};
    CHECK_THROWS_AS(rollout(unstable, State{}, InputSignal::constant(0.0), backwards), UsageError);
}

TEST_CASE("constant-coefficient rollout matches a fine-step reference") {
    const ConstantNet lti{{2.0, 0.6, 1.5}};
    const InputSignal u({0.0, 1.0, 2.5, 4.0}, {0.0, 1.0, -0.5, 0.3});
    const auto coarse = rollout(lti, State{0.2, -0.3}, u, uniform_grid(0.0, 4.0, 81));
    const auto fine = rollout(lti, State{0.2, -0.3}, u, uniform_grid(0.0, 4.0, 8001));
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        CHECK(std::abs(coarse[i].y - fine[i * 100].y) < 1e-5);
        CHECK(std::abs(coarse[i].v - fine[i * 100].v) < 1e-5);
    }

    // Free response against the closed form of an underdamped oscillator.
    const ConstantNet free{{4.0, 0.4, 0.0}};
    const auto grid = uniform_grid(0.0, 5.0, 501);
    const auto x = rollout(free, State{1.0, 0.0}, InputSignal::constant(0.0), grid);
    const double s = 0.2, wd = std::sqrt(4.0 - s * s);
    for (std::size_t i = 0; i < grid.size(); i += 50) {
        const double t = grid[i];
        const double y = std::exp(-s * t) * (std::cos(wd * t) + s / wd * std::sin(wd * t));
        CHECK(std::abs(x[i].y - y) < 1e-8);
    }
}

TEST_CASE("coefficients are re-evaluated at every stage state") {
    int calls = 0;
    auto net = [&](const State& s, double) {
        ++calls;
        return SurrogateCoefficients{1.0 + s.y * s.y, 0.0, 0.0};
    };
    const auto traj = rollout(net, State{1.0, 0.0}, InputSignal::constant(0.0), uniform_grid(0, 1, 11));
    CHECK(calls == 40);
    CHECK(traj.size() == 11);
}

TEST_CASE("input signal interpolates linearly and holds at the ends") {
    const InputSignal u({0.0, 1.0, 3.0}, {1.0, 3.0, -1.0});
    CHECK(u(-1.0) == 1.0);
    CHECK(u(0.5) == 2.0);
    CHECK(u(2.0) == 1.0);
    CHECK(u(9.0) == -1.0);
}
