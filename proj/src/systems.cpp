#include "solis/systems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "solis/hash.hpp"

namespace solis {

using nlohmann::json;

std::string to_string(SystemKind k) {
    switch (k) {
        case SystemKind::Duffing: return "duffing";
        case SystemKind::VanDerPol: return "vanderpol";
        case SystemKind::TwoTank: return "twotank";
    }
    return "?";
}

SystemKind system_kind_from_string(const std::string& s) {
    if (s == "duffing") return SystemKind::Duffing;
    if (s == "vanderpol") return SystemKind::VanDerPol;
    if (s == "twotank") return SystemKind::TwoTank;
    throw ConfigError("system.kind: unknown system '" + s + "'");
}

std::string to_string(SignalKind k) {
    switch (k) {
        case SignalKind::Multisine: return "multisine";
        case SignalKind::StepTrain: return "step-train";
        case SignalKind::Chirp: return "chirp";
        case SignalKind::Zero: return "zero";
    }
    return "?";
}

SignalKind signal_kind_from_string(const std::string& s) {
    if (s == "multisine") return SignalKind::Multisine;
    if (s == "step-train") return SignalKind::StepTrain;
    if (s == "chirp") return SignalKind::Chirp;
    if (s == "zero") return SignalKind::Zero;
    throw ConfigError("system.input.kind: unknown signal '" + s + "'");
}

// --- input signals ------------------------------------------------------------

double InputRealization::operator()(double t) const {
    switch (kind) {
        case SignalKind::Zero: return offset;
        case SignalKind::Multisine: {
            double u = offset;
            for (std::size_t i = 0; i < frequencies.size(); ++i)
                u += amplitudes[i] * std::sin(2.0 * std::numbers::pi * frequencies[i] * t + phases[i]);
            return u;
        }
        case SignalKind::StepTrain: {
            if (levels.empty()) return offset;
            auto idx = static_cast<std::size_t>(std::max(0.0, std::floor(t / step_period)));
            return offset + levels[std::min(idx, levels.size() - 1)];
        }
        case SignalKind::Chirp: {
            const double rate = (chirp_f1 - chirp_f0) / horizon;
            const double a = amplitudes.empty() ? 1.0 : amplitudes[0];
            const double phase = phases.empty() ? 0.0 : phases[0];
            return offset + a * std::sin(2.0 * std::numbers::pi * (chirp_f0 * t + 0.5 * rate * t * t) + phase);
        }
    }
    return 0.0;
}

InputRealization InputRealization::zero() { return {}; }

InputRealization InputRealization::draw(const SignalSpec& spec, double horizon, std::mt19937_64& rng) {
    InputRealization r;
    r.kind = spec.kind;
    r.offset = spec.offset;
    r.horizon = horizon;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (spec.kind) {
        case SignalKind::Zero: break;
        case SignalKind::Multisine: {
            const double lo = std::log(spec.f_min);
            const double hi = std::log(spec.f_max);
            for (std::size_t i = 0; i < spec.components; ++i) {
                r.frequencies.push_back(std::exp(lo + (hi - lo) * unit(rng)));
                r.amplitudes.push_back(spec.amplitude / static_cast<double>(spec.components));
                r.phases.push_back(2.0 * std::numbers::pi * unit(rng));
            }
            break;
        }
        case SignalKind::StepTrain: {
            r.step_period = spec.step_period;
            const auto n = static_cast<std::size_t>(std::ceil(horizon / spec.step_period)) + 1;
            for (std::size_t i = 0; i < n; ++i)
                r.levels.push_back(spec.level_min + (spec.level_max - spec.level_min) * unit(rng));
            break;
        }
        case SignalKind::Chirp: {
            r.chirp_f0 = spec.f_min;
            r.chirp_f1 = spec.f_max;
            r.amplitudes.push_back(spec.amplitude);
            r.phases.push_back(2.0 * std::numbers::pi * unit(rng));
            break;
        }
    }
    return r;
}

// --- system spec ----------------------------------------------------------------

void SystemSpec::validate() const {
    if (!(horizon > 0.0)) throw ConfigError("system.horizon must be positive");
    if (!(truth_step > 0.0)) throw ConfigError("system.truth_step must be positive");
    if (truth_step > 1e-3 * horizon + 1e-15) throw ConfigError("system.truth_step must be <= 1e-3 * horizon");
    if (x0_first_min > x0_first_max || x0_second_min > x0_second_max)
        throw ConfigError("system initial-condition box is empty");
    switch (kind) {
        case SystemKind::Duffing:
            if (!(duffing.alpha > 0.0)) throw ConfigError("system.duffing.alpha must be positive");
            break;
        case SystemKind::VanDerPol:
            if (!(vdp.mu > 0.0)) throw ConfigError("system.vdp.mu must be positive");
            break;
        case SystemKind::TwoTank:
            if (!(tank.area1 > 0.0 && tank.area2 > 0.0 && tank.c1 > 0.0 && tank.c2 > 0.0 && tank.pump_gain > 0.0))
                throw ConfigError("system.tank parameters must be positive");
            if (x0_first_min < 0.0 || x0_second_min < 0.0) throw ConfigError("tank levels must be non-negative");
            break;
    }
    if (input.kind == SignalKind::Multisine || input.kind == SignalKind::Chirp) {
        if (!(input.f_min > 0.0 && input.f_max >= input.f_min))
            throw ConfigError("system.input frequency band must satisfy 0 < f_min <= f_max");
        if (input.kind == SignalKind::Multisine && input.components == 0)
            throw ConfigError("system.input.components must be >= 1");
    }
    if (input.kind == SignalKind::StepTrain && !(input.step_period > 0.0))
        throw ConfigError("system.input.step_period must be positive");
}

SystemSpec SystemSpec::defaults(SystemKind kind) {
    SystemSpec s;
    s.kind = kind;
    switch (kind) {
        case SystemKind::Duffing:
            s.horizon = 10.0;
            s.truth_step = 0.005;
            s.x0_first_min = -1.5;
            s.x0_first_max = 1.5;
            s.x0_second_min = -1.0;
            s.x0_second_max = 1.0;
            break;
        case SystemKind::VanDerPol:
            s.horizon = 10.0;
            s.truth_step = 0.005;
            s.x0_first_min = -2.0;
            s.x0_first_max = 2.0;
            s.x0_second_min = -2.0;
            s.x0_second_max = 2.0;
            break;
        case SystemKind::TwoTank:
            s.horizon = 40.0;
            s.truth_step = 0.02;
            s.x0_first_min = 0.5;
            s.x0_first_max = 1.5;
            s.x0_second_min = 0.5;
            s.x0_second_max = 1.5;
            s.input.offset = 0.5;
            s.input.amplitude = 0.4;
            s.input.f_min = 0.01;
            s.input.f_max = 0.1;
            break;
    }
    return s;
}

json to_json(const SystemSpec& s) {
    json j;
    j["kind"] = to_string(s.kind);
    j["duffing"] = {{"alpha", s.duffing.alpha}, {"beta", s.duffing.beta}, {"delta", s.duffing.delta},
                    {"gain", s.duffing.gain}};
    j["vdp"] = {{"mu", s.vdp.mu}, {"gain", s.vdp.gain}};
    j["tank"] = {{"area1", s.tank.area1}, {"area2", s.tank.area2}, {"c1", s.tank.c1},
                 {"c2", s.tank.c2},       {"pump_gain", s.tank.pump_gain}};
    j["input"] = {{"kind", to_string(s.input.kind)}, {"components", s.input.components},
                  {"f_min", s.input.f_min},          {"f_max", s.input.f_max},
                  {"amplitude", s.input.amplitude},  {"offset", s.input.offset},
                  {"step_period", s.input.step_period}, {"level_min", s.input.level_min},
                  {"level_max", s.input.level_max}};
    j["horizon"] = s.horizon;
    j["truth_step"] = s.truth_step;
    j["x0_box"] = {{"first", {s.x0_first_min, s.x0_first_max}}, {"second", {s.x0_second_min, s.x0_second_max}}};
    return j;
}

SystemSpec system_spec_from_json(const json& j) {
    SystemSpec s = SystemSpec::defaults(system_kind_from_string(j.at("kind").get<std::string>()));
    auto read = [](const json& obj, const char* key, auto& field) {
        if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("duffing")) {
        const auto& d = j.at("duffing");
        read(d, "alpha", s.duffing.alpha);
        read(d, "beta", s.duffing.beta);
        read(d, "delta", s.duffing.delta);
        read(d, "gain", s.duffing.gain);
    }
    if (j.contains("vdp")) {
        read(j.at("vdp"), "mu", s.vdp.mu);
        read(j.at("vdp"), "gain", s.vdp.gain);
    }
    if (j.contains("tank")) {
        const auto& t = j.at("tank");
        read(t, "area1", s.tank.area1);
        read(t, "area2", s.tank.area2);
        read(t, "c1", s.tank.c1);
        read(t, "c2", s.tank.c2);
        read(t, "pump_gain", s.tank.pump_gain);
    }
    if (j.contains("input")) {
        const auto& in = j.at("input");
        if (in.contains("kind")) s.input.kind = signal_kind_from_string(in.at("kind").get<std::string>());
        read(in, "components", s.input.components);
        read(in, "f_min", s.input.f_min);
        read(in, "f_max", s.input.f_max);
        read(in, "amplitude", s.input.amplitude);
        read(in, "offset", s.input.offset);
        read(in, "step_period", s.input.step_period);
        read(in, "level_min", s.input.level_min);
        read(in, "level_max", s.input.level_max);
    }
    read(j, "horizon", s.horizon);
    read(j, "truth_step", s.truth_step);
    if (j.contains("x0_box")) {
        const auto& b = j.at("x0_box");
        s.x0_first_min = b.at("first").at(0).get<double>();
        s.x0_first_max = b.at("first").at(1).get<double>();
        s.x0_second_min = b.at("second").at(0).get<double>();
        s.x0_second_max = b.at("second").at(1).get<double>();
    }
    s.validate();
    return s;
}

// --- dynamics -------------------------------------------------------------------

StateT<double> duffing_rhs(const State& x, double u, const DuffingParams& p) {
    return {x.v, -(p.alpha + p.beta * x.y * x.y) * x.y - p.delta * x.v + p.gain * u};
}

StateT<double> vdp_rhs(const State& x, double u, const VanDerPolParams& p) {
    return {x.v, -x.y - p.mu * (x.y * x.y - 1.0) * x.v + p.gain * u};
}

StateT<double> twotank_rhs(const State& levels, double u, const TwoTankParams& p) {
    const double h1 = std::max(levels.y, 0.0);
    const double h2 = std::max(levels.v, 0.0);
    const double q_in = p.pump_gain * std::max(u, 0.0);
    const double q12 = p.c1 * std::sqrt(h1);
    const double q2 = p.c2 * std::sqrt(h2);
    return {(q_in - q12) / p.area1, (q12 - q2) / p.area2};
}

SurrogateCoefficients true_coefficients(const SystemSpec& spec, const State& x) {
    switch (spec.kind) {
        case SystemKind::Duffing:
            return {spec.duffing.alpha + spec.duffing.beta * x.y * x.y, spec.duffing.delta, spec.duffing.gain};
        case SystemKind::VanDerPol: return {1.0, spec.vdp.mu * (x.y * x.y - 1.0), spec.vdp.gain};
        case SystemKind::TwoTank: {
            // Exact rewrite of h2'' in surrogate form (valid for y > 0).
            const auto& p = spec.tank;
            const double y = std::max(x.y, 1e-12);
            const double sqrt_h1 = std::max((p.area2 * x.v + p.c2 * std::sqrt(y)) / p.c1, 1e-12);
            const double k = p.c1 * p.c1 / (2.0 * p.area1 * p.area2 * y);
            const double d = p.c2 / (2.0 * p.area2 * std::sqrt(y));
            const double g = p.c1 * p.pump_gain / (2.0 * p.area1 * p.area2 * sqrt_h1);
            return {k, d, g};
        }
    }
    return {};
}

State true_output_field(const SystemSpec& spec, const State& x, double u) {
    switch (spec.kind) {
        case SystemKind::Duffing: return duffing_rhs(x, u, spec.duffing);
        case SystemKind::VanDerPol: return vdp_rhs(x, u, spec.vdp);
        case SystemKind::TwoTank: {
            const auto& p = spec.tank;
            const double h2 = std::max(x.y, 0.0);
            const double sqrt_h1 = std::max((p.area2 * x.v + p.c2 * std::sqrt(h2)) / p.c1, 0.0);
            const double h1_dot = (p.pump_gain * std::max(u, 0.0) - p.c1 * sqrt_h1) / p.area1;
            double accel = 0.0;
            if (sqrt_h1 > 0.0) accel += p.c1 / (2.0 * sqrt_h1) * h1_dot;
            if (h2 > 0.0) accel -= p.c2 / (2.0 * std::sqrt(h2)) * x.v;
            return {x.v, accel / p.area2};
        }
    }
    return {};
}

State output_state(const SystemSpec& spec, const State& native) {
    if (spec.kind != SystemKind::TwoTank) return native;
    const auto rate = twotank_rhs(native, 0.0, spec.tank);
    return {std::max(native.v, 0.0), rate.v};
}

namespace {

StateT<double> native_rhs(const SystemSpec& spec, const State& x, double u) {
    switch (spec.kind) {
        case SystemKind::Duffing: return duffing_rhs(x, u, spec.duffing);
        case SystemKind::VanDerPol: return vdp_rhs(x, u, spec.vdp);
        case SystemKind::TwoTank: return twotank_rhs(x, u, spec.tank);
    }
    return {};
}

}  // namespace

TruthTrajectory simulate_truth(const SystemSpec& spec, const State& x0, const InputRealization& input,
                               const std::vector<double>& times, double blow_up) {
    spec.validate();
    TruthTrajectory out;
    out.t = times;
    out.x.reserve(times.size());
    out.u.reserve(times.size());
    auto rhs = [&](const State& s, double u) { return native_rhs(spec, s, u); };
    State x = x0;
    double t = 0.0;
    std::size_t step = 0;
    for (double target : times) {
        if (target < t - 1e-12) throw UsageError("simulate_truth: requested times must be non-decreasing and >= 0");
        while (target - t > 1e-12) {
            const double h = std::min(spec.truth_step, target - t);
            x = rk4_step<double>(rhs, x, input, t, h, step++);
            if (spec.kind == SystemKind::TwoTank) {
                x.y = std::max(x.y, 0.0);
                x.v = std::max(x.v, 0.0);
            }
            if (std::fabs(x.y) > blow_up || std::fabs(x.v) > blow_up)
                throw DivergenceError("ground-truth simulation exceeded blow-up bound", t + h, step);
            // Snap to the target to avoid accumulating round-off in t.
            t = (target - (t + h) < 1e-12) ? target : t + h;
        }
        out.x.push_back(output_state(spec, x));
        const double u = input(target);
        out.u.push_back(u);
    }
    return out;
}

TruthTrajectory simulate_truth(const SystemSpec& spec, const State& x0, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const InputRealization input = InputRealization::draw(spec.input, spec.horizon, rng);
    const auto n = static_cast<std::size_t>(std::llround(spec.horizon / spec.truth_step));
    std::vector<double> times(n + 1);
    for (std::size_t i = 0; i <= n; ++i) times[i] = spec.horizon * static_cast<double>(i) / static_cast<double>(n);
    return simulate_truth(spec, x0, input, times);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 over the combined value
    std::uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Dataset generate_dataset(const SystemSpec& spec, const DatasetParams& params, std::uint64_t seed,
                         const std::string& split, const std::optional<Normalization>& normalization) {
    spec.validate();
    if (split != "train" && split != "test") throw ConfigError("dataset split must be 'train' or 'test'");
    if (params.trajectories == 0) throw ConfigError("dataset.trajectories must be >= 1");
    if (params.measurements < 2) throw ConfigError("dataset.measurements must be >= 2");
    if (params.collocation < 4 * params.measurements)
        throw ConfigError("dataset.collocation must be >= 4 * dataset.measurements");
    if (params.noise_sigma < 0.0) throw ConfigError("dataset.noise_sigma must be >= 0");

    Dataset ds;
    ds.split = split;
    ds.noise_sigma = params.noise_sigma;
    ds.velocity_measured = params.velocity_measured;
    ds.seed = seed;
    ds.system = to_json(spec);
    const json ident{{"system", ds.system},
                     {"measurements", params.measurements},
                     {"collocation", params.collocation},
                     {"noise_sigma", params.noise_sigma},
                     {"velocity_measured", params.velocity_measured},
                     {"seed", seed}};
    ds.dataset_hash = hash_hex(ident.dump());

    const std::uint64_t split_stream = split == "train" ? 0x7261696eULL : 0x74657374ULL;
    const double T = spec.horizon;
    const double dt_meas = T / static_cast<double>(params.measurements);
    for (std::size_t j = 0; j < params.trajectories; ++j) {
        std::mt19937_64 rng(derive_seed(derive_seed(seed, split_stream), j));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const State native{spec.x0_first_min + (spec.x0_first_max - spec.x0_first_min) * unit(rng),
                           spec.x0_second_min + (spec.x0_second_max - spec.x0_second_min) * unit(rng)};
        const InputRealization input = InputRealization::draw(spec.input, T, rng);

        std::vector<double> meas_t(params.measurements);
        meas_t[0] = 0.0;
        for (std::size_t i = 1; i < params.measurements; ++i)
            meas_t[i] = (static_cast<double>(i) + 0.8 * (unit(rng) - 0.5)) * dt_meas;
        std::vector<double> colloc_t(params.collocation);
        for (std::size_t k = 0; k < params.collocation; ++k)
            colloc_t[k] = T * static_cast<double>(k) / static_cast<double>(params.collocation - 1);

        std::vector<double> all = meas_t;
        all.insert(all.end(), colloc_t.begin(), colloc_t.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        const TruthTrajectory truth = simulate_truth(spec, native, input, all);
        auto at = [&](double t) {
            const auto idx = static_cast<std::size_t>(std::lower_bound(all.begin(), all.end(), t) - all.begin());
            return truth.x[idx];
        };

        Trajectory tr;
        tr.id = static_cast<int>(j);
        tr.x0 = output_state(spec, native);
        std::normal_distribution<double> noise(0.0, 1.0);
        for (double t : meas_t) {
            const State x = at(t);
            Measurement m;
            m.t = t;
            m.u = input(t);
            m.y = x.y + params.noise_sigma * noise(rng);
            const double v_noise = params.noise_sigma * noise(rng);
            if (params.velocity_measured) m.v = x.v + v_noise;
            tr.measurements.push_back(m);
        }
        tr.colloc_t = colloc_t;
        for (double t : colloc_t) tr.colloc_u.push_back(input(t));
        ds.trajectories.push_back(std::move(tr));
    }
    ds.normalization = normalization ? *normalization : fit_normalization(ds.trajectories);
    ds.validate();
    return ds;
}

}  // namespace solis
