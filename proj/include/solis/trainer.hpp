#pragma once

// Cyclic two-phase training. Phase 1 fits the solution network with the
// parameter network frozen; Phase 2 fits the parameter network against the
// frozen reconstruction with ridge hints, rollout and TV regularization.
// The inverse-PINN baselines reuse the same machinery with a joint step.

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "solis/dataset.hpp"
#include "solis/losses.hpp"
#include "solis/networks.hpp"
#include "solis/ridge.hpp"

namespace solis {

enum class Phase { One = 1, Two = 2 };

// Phase 1 iff epoch mod (k1 + k2) < k1.
Phase phase_of(std::size_t epoch, std::size_t k1, std::size_t k2);

enum class TrainMode { Solis, Ipinn, IpinnM };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
    std::size_t epochs = 4000;
    std::size_t k1 = 200;
    std::size_t k2 = 200;
    double hint_decay = 0.995;
    double lambda_h0 = 1.0;
    Phase1Weights phase1{1.0, 1.0, 0.1};
    Phase2Weights phase2{1.0, 1.0, 0.01, 0.0};
    double baseline_lambda_p = 1.0;
    RidgeOptions ridge;
    std::size_t rollout_horizon = 5;
    std::size_t rollout_anchors = 32;
    std::size_t colloc_batch = 256;  // per trajectory and step; 0 = all
    double lr_sol = 1e-3;
    double lr_param = 1e-3;
    bool kinematic_residual = true;
    bool warm_start = true;
    std::size_t checkpoint_every = 0;  // 0 = only final and best
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

class Adam {
  public:
    Adam() = default;
    Adam(std::size_t n, double lr) : lr(lr), m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad);

    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
};

nlohmann::json to_json(const Adam& a);
Adam adam_from_json(const nlohmann::json& j);

struct Model {
    TrainMode mode = TrainMode::Solis;
    SolutionNetwork sol;
    ParameterNetwork param;
    int trajectory = -1;  // IPINN: id of the single training trajectory

    nlohmann::json descriptor() const;
    static Model from_descriptor(const nlohmann::json& j);
};

// Builds the networks for a dataset: SOLIS and IPINN-M share the solution
// architecture; IPINN drops the context encoder and trains on the first
// trajectory only.
Model make_model(TrainMode mode, const SolutionNetSpec& sol, const ParamNetSpec& param, const Dataset& train,
                 std::uint64_t seed);

// --- per-trajectory objectives ----------------------------------------------

struct LossSettings {
    ChannelScales scales;
    PhysicsOptions physics;
    bool use_v = true;
    RidgeOptions ridge;
    std::size_t horizon = 5;
};

LossSettings loss_settings(const TrainConfig& config, const Dataset& data);

struct Phase1Loss {
    ad::Var data;
    ad::Var ic;
    ad::Var phys;
    ad::Var total;
};

// Phase-1 objective of one trajectory, recorded on `g`. Solution weights are
// taped at indices [0, sol.size()); with `param_trainable` the parameter
// network weights follow at [sol.size(), sol.size() + param.size()),
// otherwise they enter as constants. The physics term covers the collocation
// indices in `colloc` and is skipped when its weight is zero.
Phase1Loss phase1_loss(ad::Graph& g, const Model& model, const Trajectory& tr, std::span<const double> context,
                       std::span<const double> sol, std::span<const double> param, bool param_trainable,
                       std::span<const std::size_t> colloc, const Phase1Weights& w, const LossSettings& s);

// Frozen solution-network outputs at every collocation point of `tr`.
struct FrozenReconstruction {
    std::vector<HintSample> samples;
    std::vector<double> dy;
    std::vector<State> states;
};

FrozenReconstruction reconstruct(const Model& model, std::span<const double> sol, const Trajectory& tr,
                                 std::span<const double> context);

struct Phase2Loss {
    ad::Var phys;
    ad::Var hint;
    ad::Var tv;
    ad::Var roll;
    ad::Var total;
};

// Phase-2 objective of one trajectory with the parameter weights taped at
// [0, param.size()). Hints use windows of length `window` over the samples
// in `colloc`; rollouts start at `anchors` (none = no rollout term).
Phase2Loss phase2_loss(ad::Graph& g, const Model& model, const Trajectory& tr, const FrozenReconstruction& recon,
                       std::span<const double> param, std::span<const std::size_t> colloc, std::size_t window,
                       std::span<const std::size_t> anchors, const Phase2Weights& w, const LossSettings& s);

struct TrainState {
    std::size_t epoch = 0;           // next epoch to run
    std::size_t phase2_epochs = 0;   // Phase-2 epochs completed
    double lambda_h = 1.0;
    std::vector<double> sol;
    std::vector<double> param;
    Adam sol_opt;
    Adam param_opt;
    std::mt19937_64 rng;
    double best_data = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
};

nlohmann::json to_json(const TrainState& s);
TrainState train_state_from_json(const nlohmann::json& j);

// Raised when a loss or gradient turns non-finite; carries the state at the
// start of the failing epoch.
class TrainingAborted : public NumericError {
  public:
    TrainingAborted(const std::string& what, TrainState last_good)
        : NumericError(what), last_good_(std::move(last_good)) {}
    const TrainState& last_good() const { return last_good_; }

  private:
    TrainState last_good_;
};

class Trainer {
  public:
    Trainer(Model model, TrainConfig config, const Dataset& data);
    Trainer(Model model, TrainConfig config, const Dataset& data, TrainState resume);

    LossReport run_epoch();
    bool done() const { return state_.epoch >= config_.epochs; }

    const TrainState& state() const { return state_; }
    const Model& model() const { return model_; }
    const TrainConfig& config() const { return config_; }
    std::size_t threads() const { return threads_; }

  private:
    struct TrajData {
        const Trajectory* tr = nullptr;
        std::vector<double> context;
        FrozenReconstruction recon;  // Phase 2 cache
    };

    void prepare();
    std::size_t steps_per_epoch() const;
    std::vector<std::vector<std::size_t>> draw_chunks(std::size_t steps);
    LossReport fit_solution_epoch(bool joint, const Phase1Weights& w);
    LossReport fit_parameter_epoch();
    void refresh_reconstruction();

    Model model_;
    TrainConfig config_;
    const Dataset* data_;
    TrainState state_;
    std::vector<TrajData> trajs_;
    bool recon_valid_ = false;
    std::size_t threads_ = 1;
    std::vector<ad::Graph> graphs_;
};

// Number of worker threads for per-trajectory work: SOLIS_THREADS when set,
// otherwise the hardware concurrency.
std::size_t configured_threads();

struct FitHooks {
    std::function<void(const LossReport&)> on_epoch;
    // Called with a tag ("periodic", "best") and the state after the epoch.
    std::function<void(const std::string&, const TrainState&)> on_checkpoint;
};

struct FitResult {
    Model model;
    TrainState state;
    TrainState best;
    std::vector<LossReport> log;
};

FitResult fit(const Model& model, const TrainConfig& config, const Dataset& data, const FitHooks& hooks = {});
FitResult resume_fit(const Model& model, const TrainConfig& config, const Dataset& data, TrainState state,
                     const FitHooks& hooks = {});

}  // namespace solis
