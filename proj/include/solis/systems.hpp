#pragma once

// Ground-truth benchmark systems and synthetic dataset generation.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "solis/dataset.hpp"
#include "solis/surrogate.hpp"

namespace solis {

enum class SystemKind { Duffing, VanDerPol, TwoTank };

std::string to_string(SystemKind k);
SystemKind system_kind_from_string(const std::string& s);

// y'' = -(alpha + beta y^2) y - delta y' + gain u
struct DuffingParams {
    double alpha = 1.0;
    double beta = 1.0;
    double delta = 0.3;
    double gain = 1.0;
};

// y'' = -y - mu (y^2 - 1) y' + gain u
struct VanDerPolParams {
    double mu = 1.0;
    double gain = 1.0;
};

// Gravity-drained cascade; the state is the pair of levels (h1, h2) and the
// observed output is y = h2, v = h2'.
struct TwoTankParams {
    double area1 = 1.0;
    double area2 = 1.0;
    double c1 = 0.5;
    double c2 = 0.5;
    double pump_gain = 1.0;
};

enum class SignalKind { Multisine, StepTrain, Chirp, Zero };

std::string to_string(SignalKind k);
SignalKind signal_kind_from_string(const std::string& s);

struct SignalSpec {
    SignalKind kind = SignalKind::Multisine;
    std::size_t components = 5;  // multisine tones
    double f_min = 0.1;          // Hz
    double f_max = 2.0;          // Hz
    double amplitude = 1.0;      // multisine: sum of tone amplitudes; chirp: amplitude
    double offset = 0.0;
    double step_period = 5.0;    // s, step-train hold time
    double level_min = -1.0;     // step-train levels
    double level_max = 1.0;
};

// One concrete input realization u(t), drawn from a SignalSpec.
struct InputRealization {
    SignalKind kind = SignalKind::Zero;
    double offset = 0.0;
    std::vector<double> frequencies;  // Hz
    std::vector<double> amplitudes;
    std::vector<double> phases;
    double step_period = 1.0;
    std::vector<double> levels;
    double chirp_f0 = 0.0;
    double chirp_f1 = 0.0;
    double horizon = 1.0;

    double operator()(double t) const;
    static InputRealization draw(const SignalSpec& spec, double horizon, std::mt19937_64& rng);
    static InputRealization zero();
};

struct SystemSpec {
    SystemKind kind = SystemKind::Duffing;
    DuffingParams duffing;
    VanDerPolParams vdp;
    TwoTankParams tank;
    SignalSpec input;
    double horizon = 10.0;       // s
    double truth_step = 0.005;   // s
    // Initial conditions are drawn uniformly from these boxes (physical
    // state: (y, v) for the oscillators, (h1, h2) for the tanks).
    double x0_first_min = -1.5;
    double x0_first_max = 1.5;
    double x0_second_min = -1.0;
    double x0_second_max = 1.0;

    void validate() const;
    static SystemSpec defaults(SystemKind kind);
};

nlohmann::json to_json(const SystemSpec& s);
SystemSpec system_spec_from_json(const nlohmann::json& j);

StateT<double> duffing_rhs(const State& x, double u, const DuffingParams& p);
StateT<double> vdp_rhs(const State& x, double u, const VanDerPolParams& p);
// (h1', h2') for levels (h1, h2); negative levels and inputs are clamped to 0.
StateT<double> twotank_rhs(const State& levels, double u, const TwoTankParams& p);

// Coefficient fields of the true systems written in surrogate form, where
// they exist (Duffing: k = alpha + beta y^2, d = delta, g = gain; VdP:
// k = 1, d = mu (y^2 - 1), g = gain).
SurrogateCoefficients true_coefficients(const SystemSpec& spec, const State& x);

// Output-space vector field (y', v') of the true system. For the two-tank
// system the hidden level h1 is recovered from (y, v).
State true_output_field(const SystemSpec& spec, const State& x, double u);

struct TruthTrajectory {
    std::vector<double> t;
    std::vector<State> x;  // output-space state (y, v)
    std::vector<double> u;
};

// Integrates the system with RK4 at spec.truth_step, landing exactly on each
// requested time. `x0` is the native state of the system.
TruthTrajectory simulate_truth(const SystemSpec& spec, const State& x0, const InputRealization& input,
                               const std::vector<double>& times, double blow_up = kDefaultBlowUpBound);
// Dense record on the uniform truth grid over [0, horizon], input drawn from `seed`.
TruthTrajectory simulate_truth(const SystemSpec& spec, const State& x0, std::uint64_t seed);

// Output-space state (y, v) of a native system state.
State output_state(const SystemSpec& spec, const State& native);

struct DatasetParams {
    std::size_t trajectories = 6;
    std::size_t measurements = 40;   // N_d per trajectory
    std::size_t collocation = 200;   // N_c per trajectory
    double noise_sigma = 0.0;
    bool velocity_measured = true;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Synthetic split. The normalization is fitted when `normalization` is empty
// (train split) and reused verbatim otherwise.
Dataset generate_dataset(const SystemSpec& spec, const DatasetParams& params, std::uint64_t seed,
                         const std::string& split, const std::optional<Normalization>& normalization = std::nullopt);

}  // namespace solis
