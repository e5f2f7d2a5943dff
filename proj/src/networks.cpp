#include "solis/networks.hpp"

#include <random>

namespace solis {

using nlohmann::json;

void SolutionNetSpec::validate() const {
    if (hidden.empty()) throw ConfigError("solution network needs at least one hidden layer");
    for (auto h : hidden)
        if (h == 0) throw ConfigError("solution network hidden width must be positive");
    if (use_rff && rff_features == 0) throw ConfigError("rff_features must be positive when RFF is enabled");
    if (use_rff && !(rff_sigma > 0.0)) throw ConfigError("rff_sigma must be positive");
    if (use_context && context_dim == 0) throw ConfigError("context_dim must be positive");
    if (use_context && context_samples == 0) throw ConfigError("context_samples must be positive");
}

json to_json(const SolutionNetSpec& s) {
    return json{{"hidden", s.hidden},         {"use_rff", s.use_rff},         {"rff_features", s.rff_features},
                {"rff_sigma", s.rff_sigma},   {"use_context", s.use_context}, {"context_dim", s.context_dim},
                {"context_samples", s.context_samples}};
}

SolutionNetSpec solution_spec_from_json(const json& j) {
    SolutionNetSpec s;
    s.hidden = j.value("hidden", s.hidden);
    s.use_rff = j.value("use_rff", s.use_rff);
    s.rff_features = j.value("rff_features", s.rff_features);
    s.rff_sigma = j.value("rff_sigma", s.rff_sigma);
    s.use_context = j.value("use_context", s.use_context);
    s.context_dim = j.value("context_dim", s.context_dim);
    s.context_samples = j.value("context_samples", s.context_samples);
    s.validate();
    return s;
}

void ParamNetSpec::validate() const {
    if (hidden.empty()) throw ConfigError("parameter network needs at least one hidden layer");
    for (auto h : hidden)
        if (h == 0) throw ConfigError("parameter network hidden width must be positive");
    if (use_moe && experts == 0) throw ConfigError("mixture of experts needs at least one expert");
}

json to_json(const ParamNetSpec& s) {
    return json{{"hidden", s.hidden},     {"augment", s.augment},   {"use_moe", s.use_moe},
                {"experts", s.experts},   {"constant", s.constant}, {"initial", s.initial}};
}

ParamNetSpec param_spec_from_json(const json& j) {
    ParamNetSpec s;
    s.hidden = j.value("hidden", s.hidden);
    s.augment = j.value("augment", s.augment);
    s.use_moe = j.value("use_moe", s.use_moe);
    s.experts = j.value("experts", s.experts);
    s.constant = j.value("constant", s.constant);
    s.initial = j.value("initial", s.initial);
    s.validate();
    return s;
}

// --- SolutionNetwork ----------------------------------------------------------

SolutionNetwork::SolutionNetwork(SolutionNetSpec spec, Normalization norm, std::uint64_t seed)
    : spec_(std::move(spec)), norm_(norm) {
    spec_.validate();
    if (spec_.use_rff) rff_ = nn::RffSpec::sample(spec_.rff_features, spec_.rff_sigma, seed);
    layout();
}

SolutionNetwork::SolutionNetwork(SolutionNetSpec spec, Normalization norm, nn::RffSpec rff)
    : spec_(std::move(spec)), norm_(norm), rff_(std::move(rff)) {
    spec_.validate();
    if (spec_.use_rff && rff_.frequencies.size() != spec_.rff_features)
        throw ConfigError("RFF frequency count does not match rff_features");
    layout();
}

void SolutionNetwork::layout() {
    trunk_.input = spec_.use_rff ? rff_.output_dim() : 1;
    trunk_.hidden = spec_.hidden;
    trunk_.output = 2;
    trunk_.activation = nn::Activation::Tanh;
    trunk_.validate();
    gru_.input = 1;
    gru_.hidden = spec_.use_context ? spec_.context_dim : 0;
    gru_offset_ = trunk_.parameter_count();
    film_offset_ = gru_offset_ + (spec_.use_context ? gru_.parameter_count() : 0);
    film_count_ = 0;
    if (spec_.use_context)
        for (auto h : spec_.hidden) film_count_ += 2 * h * (spec_.context_dim + 1);
}

std::vector<double> SolutionNetwork::init_params(std::uint64_t seed) const {
    std::vector<double> p(parameter_count(), 0.0);
    std::mt19937_64 rng(seed);
    nn::init_mlp(trunk_, std::span<double>(p).subspan(0, trunk_.parameter_count()), rng);
    if (spec_.use_context) nn::init_gru(gru_, std::span<double>(p).subspan(gru_offset_, gru_.parameter_count()), rng);
    // FiLM generators start at zero: gamma = 1, beta = 0.
    return p;
}

std::vector<double> SolutionNetwork::context_sequence(const Trajectory& tr) const {
    const auto& u = tr.colloc_u;
    if (u.empty()) throw UsageError("trajectory " + std::to_string(tr.id) + " has no collocation inputs");
    const std::size_t cap = std::max<std::size_t>(1, spec_.context_samples);
    const std::size_t stride = (u.size() + cap - 1) / cap;
    std::vector<double> seq;
    seq.reserve(cap);
    for (std::size_t i = 0; i < u.size(); i += stride) seq.push_back(norm_.u.normalize(u[i]));
    return seq;
}

json SolutionNetwork::descriptor() const {
    return json{{"spec", to_json(spec_)},
                {"normalization", to_json(norm_)},
                {"rff_sigma", rff_.sigma},
                {"rff_frequencies", rff_.frequencies}};
}

SolutionNetwork SolutionNetwork::from_descriptor(const json& j) {
    nn::RffSpec rff;
    rff.sigma = j.value("rff_sigma", 1.0);
    rff.frequencies = j.value("rff_frequencies", std::vector<double>{});
    return SolutionNetwork(solution_spec_from_json(j.at("spec")), normalization_from_json(j.at("normalization")),
                           std::move(rff));
}

// --- ParameterNetwork ---------------------------------------------------------

ParameterNetwork::ParameterNetwork(ParamNetSpec spec, Normalization norm) : spec_(std::move(spec)), norm_(norm) {
    spec_.validate();
    body_.input = feature_width();
    body_.hidden = spec_.hidden;
    body_.output = 3;
    body_.activation = nn::Activation::Tanh;
    body_.validate();
    gate_.input = feature_width();
    gate_.hidden = {};
    gate_.output = spec_.use_moe ? spec_.experts : 1;
    gate_.activation = nn::Activation::Identity;
    gate_offset_ = body_.parameter_count() * (spec_.use_moe ? spec_.experts : 1);
}

std::vector<double> ParameterNetwork::init_params(std::uint64_t seed) const {
    if (spec_.constant) return {spec_.initial.begin(), spec_.initial.end()};
    std::vector<double> p(parameter_count(), 0.0);
    std::mt19937_64 rng(seed);
    const std::size_t n = body_.parameter_count();
    const std::size_t copies = spec_.use_moe ? spec_.experts : 1;
    for (std::size_t j = 0; j < copies; ++j) nn::init_mlp(body_, std::span<double>(p).subspan(j * n, n), rng);
    if (spec_.use_moe)
        nn::init_mlp(gate_, std::span<double>(p).subspan(gate_offset_, gate_.parameter_count()), rng);
    return p;
}

json ParameterNetwork::descriptor() const {
    return json{{"spec", to_json(spec_)}, {"normalization", to_json(norm_)}};
}

ParameterNetwork ParameterNetwork::from_descriptor(const json& j) {
    return ParameterNetwork(param_spec_from_json(j.at("spec")), normalization_from_json(j.at("normalization")));
}

}  // namespace solis
