#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "solis/autodiff.hpp"
#include "solis/dual.hpp"
#include "solis/nn.hpp"

using namespace solis;
using ad::Dual;
using ad::Graph;
using ad::Var;

using solis::testing::rel_err;
using solis::testing::run_recipe;


TEST_CASE("evaluate examples") {
    Graph g;
    Var x = g.input("x");
    Var e = x * x + 2.0;
    CHECK(g.evaluate({{"x", 3.0}}, e) == 11.0);

    Graph g2;
    Var z = g2.input("z");
    Var th = ad::tanh(z);
    CHECK(g2.evaluate({{"z", 0.0}}, th) == 0.0);

    Graph g3;
    Var k = g3.input("k");
    Var s = ad::sqrt(k);
    CHECK(g3.evaluate({{"k", 4.0}}, s) == 2.0);
}

TEST_CASE("evaluate errors") {
    Graph g;
    Var x = g.input("x");
    Var y = x * 2.0;
    CHECK_THROWS_AS(g.evaluate({}, y), ConfigError);

    Graph h;
    Var k = h.input("k");
    Var r = ad::sqrt(k);
    CHECK_THROWS_AS(h.evaluate({{"k", -1.0}}, r), NumericError);

    Graph other;
    Var p = other.parameter(0, 1.0);
    CHECK_THROWS_AS((void)g.backward(p), UsageError);
}

TEST_CASE("backward examples") {
    Graph g;
    Var x = g.parameter(0, 3.0);
    CHECK(g.backward(x * x)[0] == doctest::Approx(6.0));

    Graph h;
    Var z = h.parameter(0, 0.0);
    CHECK(h.backward(ad::tanh(z))[0] == doctest::Approx(1.0));

    Graph u;
    Var a = u.parameter(0, 1.0);
    u.parameter(1, 5.0);
    auto gm = u.backward(a * 2.0);
    CHECK(gm[1] == 0.0);
    CHECK(gm[7] == 0.0);
}

TEST_CASE("backward matches central differences on 100 random graphs") {
    CHECK(solis::testing::random_graph_fd_error(100, 2024) < 1e-5);
}

TEST_CASE("re-evaluation is deterministic and refreshes primals") {
    Graph g;
    Var x = g.input("x", 0.3);
    Var y = ad::exp(ad::tanh(x * x)) + ad::softplus(x);
    const double a = g.evaluate({{"x", 0.7}}, y);
    const double b = g.evaluate({{"x", 0.7}}, y);
    CHECK(a == b);
    const double expect = std::exp(std::tanh(0.49)) + std::log1p(std::exp(0.7));
    CHECK(a == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("backward_into accumulates") {
    Graph g;
    Var a = g.parameter(0, 2.0);
    Var b = g.parameter(1, -1.0);
    std::vector<double> grad(2, 0.0);
    g.backward_into(a * b, grad);
    g.backward_into(a * b, grad);
    CHECK(grad[0] == doctest::Approx(-2.0));
    CHECK(grad[1] == doctest::Approx(4.0));
}

TEST_CASE("time_derivative examples") {
    auto id = ad::time_derivative<double>([](Dual<double> t) { return t; }, 1.7);
    CHECK(id.value == 1.7);
    CHECK(id.d_dt == 1.0);

    const double b = 1.0;
    auto cosf = ad::time_derivative<double>(
        [&](Dual<double> t) {
            const double w = 2 * M_PI * b;
            return Dual<double>{std::cos(w * t.primal), -w * std::sin(w * t.primal) * t.tangent};
        },
        0.0);
    CHECK(cosf.d_dt == doctest::Approx(0.0));

    auto neuron = ad::time_derivative<double>([](Dual<double> t) { return ad::tanh(t * 2.0); }, 0.5);
    const double th = std::tanh(1.0);
    CHECK(neuron.d_dt == doctest::Approx(2.0 * (1.0 - th * th)).epsilon(1e-14));

    CHECK_THROWS_AS(ad::time_derivative<double>([](Dual<double> t) { return ad::sqrt(t - 1.0); }, 0.0),
                    NumericError);
}

TEST_CASE("time_derivative through an MLP matches finite differences") {
    nn::MlpSpec spec{1, {8, 8}, 2, nn::Activation::Tanh};
    std::vector<double> w(spec.parameter_count());
    std::mt19937_64 rng(7);
    nn::init_mlp(spec, w, rng);
    auto f = [&](auto t, std::size_t ch) {
        using T = decltype(t);
        const T in[1] = {t};
        return nn::mlp_forward<T, double>(spec, w, std::span<const T>(in, 1))[ch];
    };
    for (double t : {-0.8, 0.1, 0.9}) {
        for (std::size_t ch = 0; ch < 2; ++ch) {
            auto td = ad::time_derivative<double>([&](Dual<double> x) { return f(x, ch); }, t);
            const double h = 1e-6;
            const double fd = (f(t + h, ch) - f(t - h, ch)) / (2 * h);
            CHECK(rel_err(td.d_dt, fd) < 1e-5);
        }
    }
}

TEST_CASE("reverse-over-forward gradients of d/dt match finite differences") {
    std::mt19937_64 rng(11);
    nn::MlpSpec spec{1, {6}, 1, nn::Activation::Tanh};
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> w(spec.parameter_count());
        nn::init_mlp(spec, w, rng);
        for (auto& x : w) x += 0.1;  // nonzero biases
        const double t0 = 0.3 + 0.1 * trial;

        auto dt_of = [&](const std::vector<double>& ws) {
            return ad::time_derivative<double>(
                       [&](Dual<double> t) {
                           const Dual<double> in[1] = {t};
                           return nn::mlp_forward<Dual<double>, double>(spec, ws,
                                                                        std::span<const Dual<double>>(in, 1))[0];
                       },
                       t0)
                .d_dt;
        };

        Graph g;
        auto wv = g.parameters(w);
        auto td = ad::time_derivative<Var>(
            [&](Dual<Var> t) {
                const Dual<Var> in[1] = {t};
                return nn::mlp_forward<Dual<Var>, Var>(spec, wv, std::span<const Dual<Var>>(in, 1))[0];
            },
            t0);
        CHECK(td.d_dt.value() == doctest::Approx(dt_of(w)).epsilon(1e-12));
        const auto grad = g.backward(td.d_dt);
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double h = 1e-6;
            auto wp = w, wm = w;
            wp[i] += h;
            wm[i] -= h;
            const double fd = (dt_of(wp) - dt_of(wm)) / (2 * h);
            worst = std::max(worst, rel_err(grad[i], fd));
        }
    }
    CHECK(worst < 1e-4);
}
