#pragma once

// Network building blocks. Every forward pass is templated on the activation
// scalar A and the weight scalar W so the same code serves plain evaluation
// (double/double), forward-mode time derivatives (Dual<double>), training with
// trainable weights (Var or Dual<Var> over Var) and frozen networks inside a
// taped loss (Var over double).

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "solis/autodiff.hpp"
#include "solis/dual.hpp"
#include "solis/error.hpp"

namespace solis::nn {

enum class Activation { Tanh, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpSpec {
    std::size_t input = 1;
    std::vector<std::size_t> hidden;
    std::size_t output = 1;
    Activation activation = Activation::Tanh;

    std::size_t layer_count() const { return hidden.size() + 1; }
    std::size_t layer_input(std::size_t layer) const { return layer == 0 ? input : hidden[layer - 1]; }
    std::size_t layer_output(std::size_t layer) const { return layer < hidden.size() ? hidden[layer] : output; }
    // Sum over layers of (fan_in + 1) * fan_out.
    std::size_t parameter_count() const;
    void validate() const;
};

// Per-hidden-layer scale and shift applied to pre-activations.
template <class G>
struct FilmParams {
    std::vector<std::vector<G>> gamma;
    std::vector<std::vector<G>> beta;
};

template <class A, class G>
std::vector<A> film_modulate(std::span<const A> z, std::span<const G> gamma, std::span<const G> beta) {
    if (z.size() != gamma.size() || z.size() != beta.size())
        throw UsageError("FiLM width mismatch: " + std::to_string(z.size()) + " activations vs " +
                         std::to_string(gamma.size()) + "/" + std::to_string(beta.size()) + " modulation");
    std::vector<A> out;
    out.reserve(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out.push_back(z[i] * gamma[i] + beta[i]);
    return out;
}

namespace detail {

template <class A, class W>
A affine_row(const W* row, const W& bias, std::span<const A> x) {
    A acc = x[0] * row[0];
    for (std::size_t i = 1; i < x.size(); ++i) acc += x[i] * row[i];
    return acc + bias;
}

template <class A>
A activate(const A& z, Activation act) {
    using ad::tanh;
    return act == Activation::Tanh ? A(tanh(z)) : z;
}

}  // namespace detail

// Affine + activation stack with a linear final layer. When `film` is given,
// hidden layer l's pre-activation is modulated by (gamma[l], beta[l]).
template <class A, class W, class G = W>
std::vector<A> mlp_forward(const MlpSpec& spec, std::span<const W> params, std::span<const A> input,
                           const FilmParams<G>* film = nullptr) {
    if (input.size() != spec.input)
        throw UsageError("MLP input width " + std::to_string(input.size()) + " != spec " +
                         std::to_string(spec.input));
    if (params.size() < spec.parameter_count()) throw UsageError("MLP parameter span too short");
    std::vector<A> x(input.begin(), input.end());
    const W* p = params.data();
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t fan_in = spec.layer_input(l);
        const std::size_t fan_out = spec.layer_output(l);
        const W* bias = p + fan_in * fan_out;
        std::vector<A> z;
        z.reserve(fan_out);
        for (std::size_t o = 0; o < fan_out; ++o)
            z.push_back(detail::affine_row<A, W>(p + o * fan_in, bias[o], std::span<const A>(x)));
        p = bias + fan_out;
        const bool last = l + 1 == spec.layer_count();
        if (last) return z;
        if (film != nullptr)
            z = film_modulate<A, G>(z, film->gamma[l], film->beta[l]);
        for (auto& v : z) v = detail::activate(v, spec.activation);
        x = std::move(z);
    }
    return x;
}

// --- GRU context encoder ----------------------------------------------------

struct GruSpec {
    std::size_t input = 1;
    std::size_t hidden = 16;
    // W_i (3H x I), W_h (3H x H), b_i (3H), b_h (3H); gate order r, z, n.
    std::size_t parameter_count() const { return 3 * hidden * (input + hidden + 2); }
};

namespace detail {
template <class T>
T sigmoid(const T& x) {
    using ad::tanh;
    // sigma(x) = (1 + tanh(x/2)) / 2
    return T(tanh(x * 0.5)) * 0.5 + 0.5;
}
}  // namespace detail

// One recurrence step h' = (1 - z) * n + z * h with
//   r = sig(W_ir x + b_ir + W_hr h + b_hr)
//   z = sig(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn)).
template <class T, class W>
std::vector<T> gru_step(const GruSpec& spec, std::span<const W> params, std::span<const T> x,
                        std::span<const T> h) {
    using ad::tanh;
    const std::size_t H = spec.hidden;
    const std::size_t I = spec.input;
    const W* wi = params.data();
    const W* wh = wi + 3 * H * I;
    const W* bi = wh + 3 * H * H;
    const W* bh = bi + 3 * H;
    auto gate_input = [&](std::size_t row) {
        T acc = T(bi[row]);
        for (std::size_t k = 0; k < I; ++k) acc += x[k] * wi[row * I + k];
        return acc;
    };
    auto gate_hidden = [&](std::size_t row) {
        T acc = T(bh[row]);
        for (std::size_t k = 0; k < H; ++k) acc += h[k] * wh[row * H + k];
        return acc;
    };
    std::vector<T> out;
    out.reserve(H);
    for (std::size_t j = 0; j < H; ++j) {
        T r = detail::sigmoid(T(gate_input(j) + gate_hidden(j)));
        T z = detail::sigmoid(T(gate_input(H + j) + gate_hidden(H + j)));
        T n = tanh(T(gate_input(2 * H + j) + r * gate_hidden(2 * H + j)));
        out.push_back(n + z * (h[j] - n));
    }
    return out;
}

// Final hidden state of the GRU run over a scalar sequence from h0 = 0.
template <class T, class W>
std::vector<T> gru_encode(const GruSpec& spec, std::span<const W> params, std::span<const double> sequence) {
    if (sequence.empty()) throw UsageError("GRU input sequence is empty");
    if (spec.input != 1) throw UsageError("gru_encode expects a scalar input sequence");
    if (params.size() < spec.parameter_count()) throw UsageError("GRU parameter span too short");
    std::vector<T> h(spec.hidden, T(0.0));
    for (double u : sequence) {
        const T x[1] = {T(u)};
        h = gru_step<T, W>(spec, params, std::span<const T>(x, 1), std::span<const T>(h));
    }
    return h;
}

// --- Random Fourier time features --------------------------------------------

struct RffSpec {
    double sigma = 1.0;
    std::vector<double> frequencies;  // fixed after sampling

    std::size_t output_dim() const { return 2 * frequencies.size(); }
    static RffSpec sample(std::size_t count, double sigma, std::uint64_t seed);
};

// [cos(2 pi B t), sin(2 pi B t)]
std::vector<double> rff_encode(double t, const RffSpec& spec);
// Element-wise d/dt of rff_encode.
std::vector<double> rff_encode_dt(double t, const RffSpec& spec);

// --- Mixture of experts -------------------------------------------------------

// Softmax gate weights; the max logit is subtracted as a constant.
template <class T>
std::vector<T> softmax(std::span<const T> logits) {
    using ad::exp;
    if (logits.empty()) throw ConfigError("softmax over zero logits");
    double shift = ad::primal_value(logits[0]);
    for (const auto& l : logits) shift = std::max(shift, ad::primal_value(l));
    std::vector<T> e;
    e.reserve(logits.size());
    T total = T(0.0);
    for (const auto& l : logits) {
        e.push_back(T(exp(l - shift)));
        total += e.back();
    }
    T inv = T(1.0) / total;
    for (auto& v : e) v = v * inv;
    return e;
}

// sum_j softmax(logits)_j * expert_j, expert outputs are rows of width 3.
template <class T>
std::array<T, 3> moe_combine(std::span<const T> gate_logits, std::span<const std::array<T, 3>> experts) {
    if (experts.empty()) throw ConfigError("mixture of experts needs at least one expert");
    if (gate_logits.size() != experts.size()) throw UsageError("gate logit count != expert count");
    if (experts.size() == 1) return experts[0];
    auto alpha = softmax<T>(gate_logits);
    std::array<T, 3> out{T(0.0), T(0.0), T(0.0)};
    for (std::size_t j = 0; j < experts.size(); ++j)
        for (std::size_t c = 0; c < 3; ++c) out[c] += alpha[j] * experts[j][c];
    return out;
}

// --- State feature augmentation --------------------------------------------

inline constexpr std::size_t kAugmentedWidth = 9;

// [y, v, u, y^2, y^3, v^2, |y|, |v|, y*v]; order is part of the file contract.
template <class T>
std::array<T, kAugmentedWidth> augment_state(const T& y, const T& v, const T& u) {
    using ad::abs;
    T y2 = y * y;
    return {y, v, u, y2, y2 * y, v * v, T(abs(y)), T(abs(v)), y * v};
}

// --- Initialization -----------------------------------------------------------

// Xavier-uniform weights, zero biases, for the MLP layout used by mlp_forward.
void init_mlp(const MlpSpec& spec, std::span<double> params, std::mt19937_64& rng);
void init_gru(const GruSpec& spec, std::span<double> params, std::mt19937_64& rng);

}  // namespace solis::nn
