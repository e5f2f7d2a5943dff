#include "solis/nn.hpp"

namespace solis::nn {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + s + "'");
}

std::size_t MlpSpec::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layer_count(); ++l) n += (layer_input(l) + 1) * layer_output(l);
    return n;
}

void MlpSpec::validate() const {
    if (input == 0 || output == 0) throw ConfigError("MLP widths must be >= 1");
    for (auto h : hidden)
        if (h == 0) throw ConfigError("MLP hidden widths must be >= 1");
}

RffSpec RffSpec::sample(std::size_t count, double sigma, std::uint64_t seed) {
    RffSpec spec;
    spec.sigma = sigma;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    spec.frequencies.reserve(count);
    for (std::size_t i = 0; i < count; ++i) spec.frequencies.push_back(dist(rng));
    return spec;
}

std::vector<double> rff_encode(double t, const RffSpec& spec) {
    const std::size_t n = spec.frequencies.size();
    std::vector<double> out(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double phase = 2.0 * std::numbers::pi * spec.frequencies[i] * t;
        out[i] = std::cos(phase);
        out[n + i] = std::sin(phase);
    }
    return out;
}

std::vector<double> rff_encode_dt(double t, const RffSpec& spec) {
    const std::size_t n = spec.frequencies.size();
    std::vector<double> out(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 2.0 * std::numbers::pi * spec.frequencies[i];
        const double phase = w * t;
        out[i] = -w * std::sin(phase);
        out[n + i] = w * std::cos(phase);
    }
    return out;
}

namespace {

void xavier_block(std::span<double> w, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& x : w) x = dist(rng);
}

}  // namespace

void init_mlp(const MlpSpec& spec, std::span<double> params, std::mt19937_64& rng) {
    spec.validate();
    if (params.size() < spec.parameter_count()) throw UsageError("MLP parameter span too short");
    std::size_t offset = 0;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t fan_in = spec.layer_input(l);
        const std::size_t fan_out = spec.layer_output(l);
        xavier_block(params.subspan(offset, fan_in * fan_out), fan_in, fan_out, rng);
        offset += fan_in * fan_out;
        for (std::size_t o = 0; o < fan_out; ++o) params[offset + o] = 0.0;
        offset += fan_out;
    }
}

void init_gru(const GruSpec& spec, std::span<double> params, std::mt19937_64& rng) {
    if (params.size() < spec.parameter_count()) throw UsageError("GRU parameter span too short");
    const std::size_t H = spec.hidden;
    const std::size_t I = spec.input;
    std::size_t offset = 0;
    for (int gate = 0; gate < 3; ++gate) {
        xavier_block(params.subspan(offset, H * I), I, H, rng);
        offset += H * I;
    }
    for (int gate = 0; gate < 3; ++gate) {
        xavier_block(params.subspan(offset, H * H), H, H, rng);
        offset += H * H;
    }
    for (std::size_t i = 0; i < 6 * H; ++i) params[offset + i] = 0.0;
}

}  // namespace solis::nn
