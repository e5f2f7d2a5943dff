#pragma once

// The two networks of the identification scheme:
//  * SolutionNetwork: t -> (y_hat, v_hat), conditioned per trajectory on a GRU
//    embedding of the input profile through FiLM modulation of the hidden layers.
//  * ParameterNetwork: (y, v, u) -> (k, d, g), plain MLP or mixture of experts,
//    optionally on augmented state features.
// Both work in normalized coordinates internally and expose physical units.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "solis/dataset.hpp"
#include "solis/nn.hpp"
#include "solis/surrogate.hpp"

namespace solis {

struct SolutionNetSpec {
    std::vector<std::size_t> hidden{32, 32};
    bool use_rff = false;
    std::size_t rff_features = 16;
    double rff_sigma = 1.0;
    bool use_context = true;
    std::size_t context_dim = 16;       // GRU hidden size
    std::size_t context_samples = 64;   // max GRU sequence length

    void validate() const;
};

nlohmann::json to_json(const SolutionNetSpec& s);
SolutionNetSpec solution_spec_from_json(const nlohmann::json& j);

struct ParamNetSpec {
    std::vector<std::size_t> hidden{16, 16};
    bool augment = false;
    bool use_moe = false;
    std::size_t experts = 4;
    // Three global trainable scalars instead of a network (inverse-PINN baselines).
    bool constant = false;
    std::array<double, 3> initial{1.0, 0.0, 1.0};

    void validate() const;
};

nlohmann::json to_json(const ParamNetSpec& s);
ParamNetSpec param_spec_from_json(const nlohmann::json& j);

namespace detail {
template <class A>
struct inner_scalar {
    using type = A;
};
template <class T>
struct inner_scalar<ad::Dual<T>> {
    using type = T;
};
}  // namespace detail

class SolutionNetwork {
  public:
    SolutionNetwork() = default;
    // Frequencies for the optional Fourier features are drawn from `seed`.
    SolutionNetwork(SolutionNetSpec spec, Normalization norm, std::uint64_t seed);
    SolutionNetwork(SolutionNetSpec spec, Normalization norm, nn::RffSpec rff);

    const SolutionNetSpec& spec() const { return spec_; }
    const Normalization& normalization() const { return norm_; }
    const nn::RffSpec& rff() const { return rff_; }
    const nn::MlpSpec& trunk() const { return trunk_; }
    const nn::GruSpec& gru() const { return gru_; }

    std::size_t parameter_count() const { return film_offset_ + film_count_; }
    std::vector<double> init_params(std::uint64_t seed) const;

    // Normalized input samples at the collocation times, strided down to at
    // most spec.context_samples entries.
    std::vector<double> context_sequence(const Trajectory& tr) const;

    template <class W>
    std::vector<W> context(std::span<const W> params, std::span<const double> sequence) const {
        return nn::gru_encode<W, W>(gru_, params.subspan(gru_offset_, gru_.parameter_count()), sequence);
    }

    // gamma_l = 1 + G_l c + b_l, beta_l = B_l c + e_l per hidden layer.
    template <class W>
    nn::FilmParams<W> film(std::span<const W> params, std::span<const W> ctx) const {
        nn::FilmParams<W> out;
        if (!spec_.use_context) return out;
        const W* p = params.data() + film_offset_;
        const std::size_t C = spec_.context_dim;
        for (std::size_t width : spec_.hidden) {
            std::vector<W> gamma, beta;
            gamma.reserve(width);
            beta.reserve(width);
            for (int which = 0; which < 2; ++which) {
                const W* w = p;
                const W* b = p + width * C;
                for (std::size_t i = 0; i < width; ++i) {
                    W acc = b[i];
                    for (std::size_t k = 0; k < C; ++k) acc += w[i * C + k] * ctx[k];
                    if (which == 0)
                        gamma.push_back(acc + 1.0);
                    else
                        beta.push_back(acc);
                }
                p = b + width;
            }
            out.gamma.push_back(std::move(gamma));
            out.beta.push_back(std::move(beta));
        }
        return out;
    }

    template <class W>
    nn::FilmParams<W> conditioning(std::span<const W> params, std::span<const double> sequence) const {
        if (!spec_.use_context) return {};
        const auto c = context<W>(params, sequence);
        return film<W>(params, std::span<const W>(c));
    }

    // Physical (y_hat, v_hat) at time t (seconds). When A is a dual number the
    // tangents are d/dt in physical time units.
    template <class A, class W>
    StateT<A> forward(std::span<const W> params, const nn::FilmParams<W>& film, double t) const {
        using Inner = typename detail::inner_scalar<A>::type;
        const double tau = norm_.t.normalize(t);
        const double dtau_dt = 1.0 / norm_.t.scale;
        std::vector<A> input;
        if (spec_.use_rff) {
            const auto e = nn::rff_encode(tau, rff_);
            input.reserve(e.size());
            if constexpr (ad::is_dual_v<A>) {
                const auto de = nn::rff_encode_dt(tau, rff_);
                for (std::size_t i = 0; i < e.size(); ++i) input.push_back(A{Inner(e[i]), Inner(de[i] * dtau_dt)});
            } else {
                for (double x : e) input.push_back(A(x));
            }
        } else {
            if constexpr (ad::is_dual_v<A>)
                input.push_back(A{Inner(tau), Inner(dtau_dt)});
            else
                input.push_back(A(tau));
        }
        const auto trunk_params = params.subspan(0, trunk_.parameter_count());
        const auto out = film.gamma.empty()
                             ? nn::mlp_forward<A, W, W>(trunk_, trunk_params, std::span<const A>(input))
                             : nn::mlp_forward<A, W, W>(trunk_, trunk_params, std::span<const A>(input), &film);
        return {out[0] * norm_.y.scale + norm_.y.offset, out[1] * norm_.v.scale + norm_.v.offset};
    }

    nlohmann::json descriptor() const;
    static SolutionNetwork from_descriptor(const nlohmann::json& j);

  private:
    void layout();

    SolutionNetSpec spec_;
    Normalization norm_;
    nn::RffSpec rff_;
    nn::MlpSpec trunk_;
    nn::GruSpec gru_;
    std::size_t gru_offset_ = 0;
    std::size_t film_offset_ = 0;
    std::size_t film_count_ = 0;
};

class ParameterNetwork {
  public:
    ParameterNetwork() = default;
    ParameterNetwork(ParamNetSpec spec, Normalization norm);

    const ParamNetSpec& spec() const { return spec_; }
    const Normalization& normalization() const { return norm_; }
    std::size_t feature_width() const { return spec_.augment ? nn::kAugmentedWidth : 3; }
    std::size_t parameter_count() const {
        if (spec_.constant) return 3;
        return gate_offset_ + gate_.parameter_count() * (spec_.use_moe ? 1 : 0);
    }
    std::vector<double> init_params(std::uint64_t seed) const;

    template <class T, class W>
    CoefficientsT<T> forward(std::span<const W> params, const T& y, const T& v, double u) const {
        if (spec_.constant) return {T(params[0]), T(params[1]), T(params[2])};
        const T yn = (y - norm_.y.offset) * (1.0 / norm_.y.scale);
        const T vn = (v - norm_.v.offset) * (1.0 / norm_.v.scale);
        const T un = T(norm_.u.normalize(u));
        std::vector<T> features;
        if (spec_.augment) {
            const auto a = nn::augment_state<T>(yn, vn, un);
            features.assign(a.begin(), a.end());
        } else {
            features = {yn, vn, un};
        }
        const std::span<const T> f(features);
        if (!spec_.use_moe) {
            const auto out = nn::mlp_forward<T, W>(body_, params.subspan(0, body_.parameter_count()), f);
            return {out[0], out[1], out[2]};
        }
        std::vector<std::array<T, 3>> experts;
        experts.reserve(spec_.experts);
        for (std::size_t j = 0; j < spec_.experts; ++j) {
            const auto out =
                nn::mlp_forward<T, W>(body_, params.subspan(j * body_.parameter_count(), body_.parameter_count()), f);
            experts.push_back({out[0], out[1], out[2]});
        }
        const auto logits = nn::mlp_forward<T, W>(gate_, params.subspan(gate_offset_, gate_.parameter_count()), f);
        const auto mixed = nn::moe_combine<T>(std::span<const T>(logits), std::span<const std::array<T, 3>>(experts));
        return {mixed[0], mixed[1], mixed[2]};
    }

    // Convenience for rollouts: (state, u) -> coefficients with fixed weights.
    auto bind(std::span<const double> params) const {
        return [this, params](const State& s, double u) { return forward<double, double>(params, s.y, s.v, u); };
    }

    nlohmann::json descriptor() const;
    static ParameterNetwork from_descriptor(const nlohmann::json& j);

  private:
    ParamNetSpec spec_;
    Normalization norm_;
    nn::MlpSpec body_;
    nn::MlpSpec gate_;
    std::size_t gate_offset_ = 0;
};

}  // namespace solis
