#include "solis/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <thread>

#include "solis/json_util.hpp"
#include "solis/systems.hpp"

namespace solis {

using nlohmann::json;
using ad::Dual;
using ad::Var;

Phase phase_of(std::size_t epoch, std::size_t k1, std::size_t k2) {
    if (k1 == 0 || k2 == 0) throw ConfigError("phase lengths must be >= 1");
    return epoch % (k1 + k2) < k1 ? Phase::One : Phase::Two;
}

std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::Solis: return "solis";
        case TrainMode::Ipinn: return "ipinn";
        case TrainMode::IpinnM: return "ipinn-m";
    }
    return "solis";
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "solis") return TrainMode::Solis;
    if (s == "ipinn") return TrainMode::Ipinn;
    if (s == "ipinn-m" || s == "ipinn_m") return TrainMode::IpinnM;
    throw ConfigError("unknown training mode '" + s + "' (expected solis, ipinn or ipinn-m)");
}

// --- configuration -------------------------------------------------------------

void TrainConfig::validate() const {
    if (k1 == 0 || k2 == 0) throw ConfigError("train.k1 and train.k2 must be >= 1");
    if (!(hint_decay > 0.0 && hint_decay <= 1.0)) throw ConfigError("train.hint_decay must lie in (0, 1]");
    if (!(lambda_h0 >= 0.0)) throw ConfigError("train.lambda_h0 must be non-negative");
    if (!(baseline_lambda_p >= 0.0)) throw ConfigError("train.baseline_lambda_p must be non-negative");
    solis::validate(phase1);
    solis::validate(phase2);
    if (!(ridge.lambda0 >= 0.0)) throw ConfigError("train.ridge_lambda0 must be non-negative");
    if (ridge.window_cap != 0 && ridge.window_cap < 5) throw ConfigError("train.ridge_window_cap must be 0 or >= 5");
    if (rollout_horizon == 0) throw ConfigError("train.rollout_horizon must be >= 1");
    if (colloc_batch != 0 && colloc_batch < 5) throw ConfigError("train.colloc_batch must be 0 or >= 5");
    if (!(lr_sol > 0.0) || !(lr_param > 0.0)) throw ConfigError("train learning rates must be positive");
}

json to_json(const TrainConfig& c) {
    return json{{"epochs", c.epochs},
                {"k1", c.k1},
                {"k2", c.k2},
                {"hint_decay", c.hint_decay},
                {"lambda_h0", c.lambda_h0},
                {"lambda_d", c.phase1.data},
                {"lambda_ic", c.phase1.ic},
                {"lambda_p1", c.phase1.phys},
                {"lambda_p2", c.phase2.phys},
                {"lambda_reg", c.phase2.reg},
                {"lambda_roll", c.phase2.roll},
                {"baseline_lambda_p", c.baseline_lambda_p},
                {"ridge_lambda0", c.ridge.lambda0},
                {"ridge_adaptive", c.ridge.adaptive},
                {"ridge_window_cap", c.ridge.window_cap},
                {"rollout_horizon", c.rollout_horizon},
                {"rollout_anchors", c.rollout_anchors},
                {"colloc_batch", c.colloc_batch},
                {"lr_sol", c.lr_sol},
                {"lr_param", c.lr_param},
                {"kinematic_residual", c.kinematic_residual},
                {"warm_start", c.warm_start},
                {"checkpoint_every", c.checkpoint_every},
                {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
    static constexpr std::string_view path = "train";
    check_keys(j,
               {"epochs", "k1", "k2", "hint_decay", "lambda_h0", "lambda_d", "lambda_ic", "lambda_p1", "lambda_p2",
                "lambda_reg", "lambda_roll", "baseline_lambda_p", "ridge_lambda0", "ridge_adaptive",
                "ridge_window_cap", "rollout_horizon", "rollout_anchors", "colloc_batch", "lr_sol", "lr_param",
                "kinematic_residual", "warm_start", "checkpoint_every", "seed"},
               path);
    TrainConfig c;
    c.epochs = read_field(j, "epochs", c.epochs, path);
    c.k1 = read_field(j, "k1", c.k1, path);
    c.k2 = read_field(j, "k2", c.k2, path);
    c.hint_decay = read_field(j, "hint_decay", c.hint_decay, path);
    c.lambda_h0 = read_field(j, "lambda_h0", c.lambda_h0, path);
    c.phase1.data = read_field(j, "lambda_d", c.phase1.data, path);
    c.phase1.ic = read_field(j, "lambda_ic", c.phase1.ic, path);
    c.phase1.phys = read_field(j, "lambda_p1", c.phase1.phys, path);
    c.phase2.phys = read_field(j, "lambda_p2", c.phase2.phys, path);
    c.phase2.reg = read_field(j, "lambda_reg", c.phase2.reg, path);
    c.phase2.roll = read_field(j, "lambda_roll", c.phase2.roll, path);
    c.baseline_lambda_p = read_field(j, "baseline_lambda_p", c.baseline_lambda_p, path);
    c.ridge.lambda0 = read_field(j, "ridge_lambda0", c.ridge.lambda0, path);
    c.ridge.adaptive = read_field(j, "ridge_adaptive", c.ridge.adaptive, path);
    c.ridge.window_cap = read_field(j, "ridge_window_cap", c.ridge.window_cap, path);
    c.rollout_horizon = read_field(j, "rollout_horizon", c.rollout_horizon, path);
    c.rollout_anchors = read_field(j, "rollout_anchors", c.rollout_anchors, path);
    c.colloc_batch = read_field(j, "colloc_batch", c.colloc_batch, path);
    c.lr_sol = read_field(j, "lr_sol", c.lr_sol, path);
    c.lr_param = read_field(j, "lr_param", c.lr_param, path);
    c.kinematic_residual = read_field(j, "kinematic_residual", c.kinematic_residual, path);
    c.warm_start = read_field(j, "warm_start", c.warm_start, path);
    c.checkpoint_every = read_field(j, "checkpoint_every", c.checkpoint_every, path);
    c.seed = read_field(j, "seed", c.seed, path);
    c.phase2.hint = c.lambda_h0;
    c.validate();
    return c;
}

// --- Adam ------------------------------------------------------------------------

void Adam::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m.size() || grad.size() != m.size())
        throw UsageError("Adam: parameter/gradient size differs from the moment buffers");
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
}

json to_json(const Adam& a) {
    return json{{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps},
                {"m", a.m},   {"v", a.v},         {"t", a.t}};
}

Adam adam_from_json(const json& j) {
    Adam a;
    a.lr = j.at("lr").get<double>();
    a.beta1 = j.at("beta1").get<double>();
    a.beta2 = j.at("beta2").get<double>();
    a.eps = j.at("eps").get<double>();
    a.m = j.at("m").get<std::vector<double>>();
    a.v = j.at("v").get<std::vector<double>>();
    a.t = j.at("t").get<std::uint64_t>();
    return a;
}

// --- model -----------------------------------------------------------------------

json Model::descriptor() const {
    return json{{"mode", to_string(mode)},
                {"solution", sol.descriptor()},
                {"parameter", param.descriptor()},
                {"trajectory", trajectory}};
}

Model Model::from_descriptor(const json& j) {
    Model m;
    m.mode = train_mode_from_string(j.at("mode").get<std::string>());
    m.sol = SolutionNetwork::from_descriptor(j.at("solution"));
    m.param = ParameterNetwork::from_descriptor(j.at("parameter"));
    m.trajectory = j.value("trajectory", -1);
    return m;
}

Model make_model(TrainMode mode, const SolutionNetSpec& sol, const ParamNetSpec& param, const Dataset& train,
                 std::uint64_t seed) {
    if (train.trajectories.empty()) throw ConfigError("training dataset has no trajectories");
    Model m;
    m.mode = mode;
    SolutionNetSpec s = sol;
    ParamNetSpec p = param;
    if (mode != TrainMode::Solis) p.constant = true;
    if (mode == TrainMode::Ipinn) {
        s.use_context = false;
        m.trajectory = train.trajectories.front().id;
    }
    m.sol = SolutionNetwork(s, train.normalization, derive_seed(seed, 11));
    m.param = ParameterNetwork(p, train.normalization);
    return m;
}

// --- state serialization ------------------------------------------------------

json to_json(const TrainState& s) {
    std::ostringstream rng;
    rng << s.rng;
    return json{{"epoch", s.epoch},
                {"phase2_epochs", s.phase2_epochs},
                {"lambda_h", s.lambda_h},
                {"sol", s.sol},
                {"param", s.param},
                {"sol_opt", to_json(s.sol_opt)},
                {"param_opt", to_json(s.param_opt)},
                {"rng", rng.str()},
                {"best_data", std::isfinite(s.best_data) ? json(s.best_data) : json(nullptr)},
                {"best_epoch", s.best_epoch}};
}

TrainState train_state_from_json(const json& j) {
    TrainState s;
    try {
        s.epoch = j.at("epoch").get<std::size_t>();
        s.phase2_epochs = j.at("phase2_epochs").get<std::size_t>();
        s.lambda_h = j.at("lambda_h").get<double>();
        s.sol = j.at("sol").get<std::vector<double>>();
        s.param = j.at("param").get<std::vector<double>>();
        s.sol_opt = adam_from_json(j.at("sol_opt"));
        s.param_opt = adam_from_json(j.at("param_opt"));
        std::istringstream rng(j.at("rng").get<std::string>());
        rng >> s.rng;
        if (!rng) throw ParseError("checkpoint RNG state is malformed");
        s.best_data = j.at("best_data").is_null() ? std::numeric_limits<double>::infinity()
                                                   : j.at("best_data").get<double>();
        s.best_epoch = j.at("best_epoch").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint state: ") + e.what());
    }
    return s;
}

// --- trainer ---------------------------------------------------------------------

std::size_t configured_threads() {
    if (const char* env = std::getenv("SOLIS_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n < 1) throw ConfigError("SOLIS_THREADS must be a positive integer");
        return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs fn(item, worker) for item in [0, n); worker k handles k, k + T, ...
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t k = 0; k < threads; ++k) {
        pool.emplace_back([&, k] {
            try {
                for (std::size_t i = k; i < n; i += threads) fn(i, k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Trainer::Trainer(Model model, TrainConfig config, const Dataset& data)
    : model_(std::move(model)), config_(std::move(config)), data_(&data) {
    config_.validate();
    state_.sol = model_.sol.init_params(derive_seed(config_.seed, 1));
    state_.param = model_.param.init_params(derive_seed(config_.seed, 2));
    state_.sol_opt = Adam(state_.sol.size(), config_.lr_sol);
    state_.param_opt = Adam(state_.param.size(), config_.lr_param);
    state_.rng.seed(derive_seed(config_.seed, 3));
    state_.lambda_h = config_.lambda_h0;
    prepare();
}

Trainer::Trainer(Model model, TrainConfig config, const Dataset& data, TrainState resume)
    : model_(std::move(model)), config_(std::move(config)), data_(&data), state_(std::move(resume)) {
    config_.validate();
    if (state_.sol.size() != model_.sol.parameter_count() || state_.param.size() != model_.param.parameter_count())
        throw ArtifactMismatchError("checkpoint weights do not match the network architecture");
    prepare();
}

void Trainer::prepare() {
    data_->validate();
    trajs_.clear();
    for (const auto& tr : data_->trajectories) {
        if (model_.mode == TrainMode::Ipinn && tr.id != model_.trajectory) continue;
        TrajData td;
        td.tr = &tr;
        if (model_.sol.spec().use_context) td.context = model_.sol.context_sequence(tr);
        trajs_.push_back(std::move(td));
    }
    if (trajs_.empty()) throw ConfigError("no training trajectory matches the model");
    for (const auto& td : trajs_)
        if (td.tr->colloc_t.size() < 5) throw ConfigError("trajectories need at least 5 collocation points");
    threads_ = std::min(configured_threads(), trajs_.size());
    graphs_ = std::vector<ad::Graph>(threads_);
    recon_valid_ = false;
}

std::size_t Trainer::steps_per_epoch() const {
    std::size_t n = trajs_.front().tr->colloc_t.size();
    for (const auto& td : trajs_) n = std::min(n, td.tr->colloc_t.size());
    const std::size_t b = config_.colloc_batch == 0 ? n : std::min(config_.colloc_batch, n);
    return (n + b - 1) / b;
}

std::vector<std::vector<std::size_t>> Trainer::draw_chunks(std::size_t steps) {
    // chunks[j * steps + s]: sorted collocation indices of trajectory j at step s.
    std::vector<std::vector<std::size_t>> out;
    out.reserve(trajs_.size() * steps);
    for (const auto& td : trajs_) {
        const std::size_t n = td.tr->colloc_t.size();
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), state_.rng);
        const std::size_t b = (n + steps - 1) / steps;
        for (std::size_t s = 0; s < steps; ++s) {
            const std::size_t lo = std::min(n, s * b);
            const std::size_t hi = std::min(n, lo + b);
            std::vector<std::size_t> chunk(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                                           perm.begin() + static_cast<std::ptrdiff_t>(hi));
            std::sort(chunk.begin(), chunk.end());
            out.push_back(std::move(chunk));
        }
    }
    return out;
}

LossSettings loss_settings(const TrainConfig& config, const Dataset& data) {
    const auto& norm = data.normalization;
    LossSettings s;
    s.scales = {norm.y.scale, norm.v.scale};
    s.physics = {config.kinematic_residual, norm.v.scale};
    s.use_v = data.velocity_measured;
    s.ridge = config.ridge;
    s.horizon = config.rollout_horizon;
    return s;
}

Phase1Loss phase1_loss(ad::Graph& g, const Model& model, const Trajectory& tr, std::span<const double> context,
                       std::span<const double> sol, std::span<const double> param, bool param_trainable,
                       std::span<const std::size_t> colloc, const Phase1Weights& w, const LossSettings& s) {
    const auto wsol = g.parameters(sol, 0);
    const std::vector<Var> wpar = param_trainable ? g.parameters(param, sol.size()) : std::vector<Var>{};
    const std::span<const Var> ws(wsol);
    const std::span<const Var> wp(wpar);
    const auto film = model.sol.conditioning<Var>(ws, context);

    std::vector<StateT<Var>> preds;
    preds.reserve(tr.measurements.size());
    for (const auto& m : tr.measurements) preds.push_back(model.sol.forward<Var, Var>(ws, film, m.t));
    Phase1Loss out;
    out.data = data_loss<Var>(preds, tr.measurements, s.use_v, s.scales);
    out.ic = ic_loss<Var>(model.sol.forward<Var, Var>(ws, film, tr.colloc_t.front()), tr.x0, s.scales);
    out.phys = 0.0;
    if (w.phys > 0.0) {
        std::vector<CollocationPoint<Var>> pts;
        pts.reserve(colloc.size());
        for (std::size_t i : colloc) {
            const double t = tr.colloc_t[i];
            const double u = tr.colloc_u[i];
            const auto x = model.sol.forward<Dual<Var>, Var>(ws, film, t);
            const auto theta = param_trainable
                                   ? model.param.forward<Var, Var>(wp, x.y.primal, x.v.primal, u)
                                   : model.param.forward<Var, double>(param, x.y.primal, x.v.primal, u);
            pts.push_back({x.y.primal, x.v.primal, x.y.tangent, x.v.tangent, u, theta});
        }
        out.phys = physics_loss<Var>(pts, s.physics);
    }
    out.total = phase1_total<Var>(out.data, out.ic, out.phys, w);
    return out;
}

FrozenReconstruction reconstruct(const Model& model, std::span<const double> sol, const Trajectory& tr,
                                 std::span<const double> context) {
    const auto film = model.sol.conditioning<double>(sol, context);
    const std::size_t n = tr.colloc_t.size();
    FrozenReconstruction r;
    r.samples.resize(n);
    r.dy.resize(n);
    r.states.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = tr.colloc_t[i];
        const auto x = model.sol.forward<Dual<double>, double>(sol, film, t);
        r.samples[i] = {t, x.y.primal, x.v.primal, x.v.tangent, tr.colloc_u[i]};
        r.dy[i] = x.y.tangent;
        r.states[i] = {x.y.primal, x.v.primal};
    }
    return r;
}

Phase2Loss phase2_loss(ad::Graph& g, const Model& model, const Trajectory& tr, const FrozenReconstruction& recon,
                       std::span<const double> param, std::span<const std::size_t> colloc, std::size_t window,
                       std::span<const std::size_t> anchors, const Phase2Weights& w, const LossSettings& s) {
    const auto wpar = g.parameters(param, 0);
    const std::span<const Var> wp(wpar);

    std::vector<CollocationPoint<Var>> pts;
    std::vector<CoefficientsT<Var>> thetas;
    std::vector<HintSample> samples;
    pts.reserve(colloc.size());
    thetas.reserve(colloc.size());
    samples.reserve(colloc.size());
    for (std::size_t i : colloc) {
        const HintSample& r = recon.samples[i];
        const auto theta = model.param.forward<Var, Var>(wp, Var(r.y), Var(r.v), r.u);
        pts.push_back({Var(r.y), Var(r.v), Var(recon.dy[i]), Var(r.dv), r.u, theta});
        thetas.push_back(theta);
        samples.push_back(r);
    }
    Phase2Loss out;
    out.phys = physics_loss<Var>(pts, s.physics);
    const auto hints = compute_hints_with_window(samples, window, s.ridge);
    out.hint = hint_loss<Var>(thetas, hints);
    out.tv = tv_loss<Var>(thetas);
    out.roll = 0.0;
    if (!anchors.empty()) {
        const InputSignal input = tr.input();
        auto net = [&](const StateT<Var>& x, double u) { return model.param.forward<Var, Var>(wp, x.y, x.v, u); };
        out.roll = rollout_loss<Var>(tr.colloc_t, recon.states, net, input, s.horizon, anchors, s.scales);
    }
    out.total = phase2_total<Var>(out.phys, out.hint, out.roll, out.tv, w);
    return out;
}

LossReport Trainer::fit_solution_epoch(bool joint, const Phase1Weights& w) {
    const std::size_t steps = steps_per_epoch();
    const auto chunks = draw_chunks(steps);
    const std::size_t J = trajs_.size();
    const std::size_t ns = state_.sol.size();
    const std::size_t np = joint ? state_.param.size() : 0;
    const LossSettings settings = loss_settings(config_, *data_);
    const double inv_j = 1.0 / static_cast<double>(J);

    LossReport rep;
    rep.phase = 1;
    std::vector<std::vector<double>> grads(J, std::vector<double>(ns + np));
    std::vector<std::array<double, 4>> terms(J);
    for (std::size_t s = 0; s < steps; ++s) {
        parallel_for(J, threads_, [&](std::size_t j, std::size_t worker) {
            ad::Graph& g = graphs_[worker];
            g.clear();
            const TrajData& td = trajs_[j];
            const auto loss = phase1_loss(g, model_, *td.tr, td.context, state_.sol, state_.param, joint,
                                          chunks[j * steps + s], w, settings);
            auto& gr = grads[j];
            std::fill(gr.begin(), gr.end(), 0.0);
            if (!loss.total.is_constant()) g.backward_into(loss.total * inv_j, gr);
            terms[j] = {loss.data.value(), loss.ic.value(), loss.phys.value(), loss.total.value()};
        });

        std::vector<double> grad(ns + np, 0.0);
        std::array<double, 4> mean{};
        for (std::size_t j = 0; j < J; ++j) {
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += grads[j][i];
            for (std::size_t k = 0; k < 4; ++k) mean[k] += terms[j][k] * inv_j;
        }
        if (!std::isfinite(mean[3]) || !all_finite(grad))
            throw NumericError("non-finite loss or gradient in epoch " + std::to_string(state_.epoch));
        state_.sol_opt.step(state_.sol, std::span<const double>(grad).subspan(0, ns));
        if (joint) state_.param_opt.step(state_.param, std::span<const double>(grad).subspan(ns, np));
        rep.data += mean[0] / static_cast<double>(steps);
        rep.ic += mean[1] / static_cast<double>(steps);
        rep.phys += mean[2] / static_cast<double>(steps);
        rep.total += mean[3] / static_cast<double>(steps);
    }
    return rep;
}

void Trainer::refresh_reconstruction() {
    for (auto& td : trajs_) td.recon = reconstruct(model_, state_.sol, *td.tr, td.context);
    recon_valid_ = true;
}

LossReport Trainer::fit_parameter_epoch() {
    if (!recon_valid_) refresh_reconstruction();
    const std::size_t steps = steps_per_epoch();
    const auto chunks = draw_chunks(steps);
    const std::size_t J = trajs_.size();
    const std::size_t np = state_.param.size();
    const LossSettings settings = loss_settings(config_, *data_);
    const double inv_j = 1.0 / static_cast<double>(J);
    const std::size_t H = config_.rollout_horizon;
    const std::size_t per_traj = (config_.rollout_anchors + J - 1) / J;
    const Phase2Weights w{config_.phase2.phys, state_.lambda_h, config_.phase2.reg, config_.phase2.roll};

    LossReport rep;
    rep.phase = 2;
    rep.lambda_h = state_.lambda_h;
    std::vector<std::vector<double>> grads(J, std::vector<double>(np));
    std::vector<std::array<double, 5>> terms(J);
    for (std::size_t s = 0; s < steps; ++s) {
        std::size_t smallest = chunks[s].size();
        for (std::size_t j = 0; j < J; ++j) smallest = std::min(smallest, chunks[j * steps + s].size());
        const std::size_t wlen = sample_window_length(state_.rng, smallest, config_.ridge.window_cap);
        std::vector<std::vector<std::size_t>> anchors(J);
        for (std::size_t j = 0; j < J; ++j) {
            const std::size_t n = trajs_[j].tr->colloc_t.size();
            if (n <= H) continue;
            std::uniform_int_distribution<std::size_t> pick(0, n - H - 1);
            for (std::size_t a = 0; a < per_traj; ++a) anchors[j].push_back(pick(state_.rng));
        }

        parallel_for(J, threads_, [&](std::size_t j, std::size_t worker) {
            ad::Graph& g = graphs_[worker];
            g.clear();
            const TrajData& td = trajs_[j];
            const auto loss = phase2_loss(g, model_, *td.tr, td.recon, state_.param, chunks[j * steps + s], wlen,
                                          anchors[j], w, settings);
            auto& gr = grads[j];
            std::fill(gr.begin(), gr.end(), 0.0);
            if (!loss.total.is_constant()) g.backward_into(loss.total * inv_j, gr);
            terms[j] = {loss.phys.value(), loss.hint.value(), loss.tv.value(), loss.roll.value(),
                        loss.total.value()};
        });

        std::vector<double> grad(np, 0.0);
        std::array<double, 5> mean{};
        for (std::size_t j = 0; j < J; ++j) {
            for (std::size_t i = 0; i < np; ++i) grad[i] += grads[j][i];
            for (std::size_t k = 0; k < 5; ++k) mean[k] += terms[j][k] * inv_j;
        }
        if (!std::isfinite(mean[4]) || !all_finite(grad))
            throw NumericError("non-finite loss or gradient in epoch " + std::to_string(state_.epoch));
        state_.param_opt.step(state_.param, grad);
        const double f = 1.0 / static_cast<double>(steps);
        rep.phys += mean[0] * f;
        rep.hint += mean[1] * f;
        rep.tv += mean[2] * f;
        rep.roll += mean[3] * f;
        rep.total += mean[4] * f;
    }
    state_.lambda_h *= config_.hint_decay;
    ++state_.phase2_epochs;
    return rep;
}

LossReport Trainer::run_epoch() {
    if (done()) throw UsageError("training already completed");
    TrainState snapshot = state_;
    const std::size_t epoch = state_.epoch;
    const bool warm = config_.warm_start && epoch < config_.k1 / 2;
    LossReport rep;
    try {
        if (model_.mode != TrainMode::Solis) {
            Phase1Weights w{config_.phase1.data, config_.phase1.ic, warm ? 0.0 : config_.baseline_lambda_p};
            rep = fit_solution_epoch(true, w);
            rep.lambda_h = 0.0;
        } else if (phase_of(epoch, config_.k1, config_.k2) == Phase::One) {
            Phase1Weights w = config_.phase1;
            if (warm) w.phys = 0.0;
            rep = fit_solution_epoch(false, w);
            rep.lambda_h = state_.lambda_h;
            recon_valid_ = false;
        } else {
            rep = fit_parameter_epoch();
        }
    } catch (const NumericError& e) {
        state_ = std::move(snapshot);
        recon_valid_ = false;
        throw TrainingAborted(e.what(), state_);
    }
    rep.epoch = epoch;
    ++state_.epoch;
    if (rep.phase == 1 && rep.data < state_.best_data) {
        state_.best_data = rep.data;
        state_.best_epoch = epoch;
    }
    return rep;
}

namespace {

FitResult drive(Trainer& trainer, const FitHooks& hooks) {
    FitResult out;
    out.best = trainer.state();
    while (!trainer.done()) {
        const double best_before = trainer.state().best_data;
        const LossReport rep = trainer.run_epoch();
        out.log.push_back(rep);
        if (hooks.on_epoch) hooks.on_epoch(rep);
        const TrainState& st = trainer.state();
        if (st.best_data < best_before) {
            out.best = st;
            if (hooks.on_checkpoint) hooks.on_checkpoint("best", st);
        }
        const std::size_t every = trainer.config().checkpoint_every;
        if (every != 0 && st.epoch % every == 0 && hooks.on_checkpoint) hooks.on_checkpoint("periodic", st);
    }
    out.model = trainer.model();
    out.state = trainer.state();
    return out;
}

}  // namespace

FitResult fit(const Model& model, const TrainConfig& config, const Dataset& data, const FitHooks& hooks) {
    Trainer trainer(model, config, data);
    return drive(trainer, hooks);
}

FitResult resume_fit(const Model& model, const TrainConfig& config, const Dataset& data, TrainState state,
                     const FitHooks& hooks) {
    Trainer trainer(model, config, data, std::move(state));
    return drive(trainer, hooks);
}

}  // namespace solis
