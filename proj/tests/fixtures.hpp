#pragma once

#include "solis/experiment.hpp"
#include "solis/systems.hpp"

namespace solis::testing {

// A few short noiseless Duffing trajectories; small enough for
// finite-difference checks and smoke-scale training.
inline Dataset tiny_dataset(std::size_t trajectories = 2, std::size_t measurements = 6, std::size_t colloc = 24,
                            std::uint64_t seed = 5) {
    SystemSpec spec = SystemSpec::defaults(SystemKind::Duffing);
    spec.horizon = 3.0;
    spec.truth_step = 0.002;
    DatasetParams p;
    p.trajectories = trajectories;
    p.measurements = measurements;
    p.collocation = colloc;
    return generate_dataset(spec, p, seed, "train");
}

inline SolutionNetSpec tiny_solution_spec() {
    SolutionNetSpec s;
    s.hidden = {4, 4};
    s.context_dim = 3;
    s.context_samples = 8;
    return s;
}

inline ParamNetSpec tiny_param_spec() {
    ParamNetSpec s;
    s.hidden = {4};
    return s;
}

// Smoke-scale experiment: a handful of epochs over both phases.
inline ExperimentConfig smoke_config(std::uint64_t seed = 3) {
    ExperimentConfig c;
    c.system = SystemSpec::defaults(SystemKind::Duffing);
    c.system.horizon = 4.0;
    c.system.truth_step = 0.002;
    c.dataset.measurements = 8;
    c.dataset.collocation = 32;
    c.dataset.noise_sigma = 0.01;
    c.splits = {2, 1};
    c.train.epochs = 10;
    c.train.k1 = 3;
    c.train.k2 = 2;
    c.train.colloc_batch = 12;
    c.train.rollout_anchors = 4;
    c.train.ridge.window_cap = 11;
    c.solution = tiny_solution_spec();
    c.parameter = tiny_param_spec();
    c.set_seed(seed);
    return c;
}

}  // namespace solis::testing
