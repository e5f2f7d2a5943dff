#pragma once

// Finite-difference checks of the full per-trajectory phase objectives on
// tiny networks.

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "solis/trainer.hpp"

namespace solis::testing {

inline TrainConfig tiny_train_config(std::uint64_t seed = 4) {
    TrainConfig c;
    c.epochs = 8;
    c.k1 = 2;
    c.k2 = 2;
    c.colloc_batch = 6;
    c.rollout_anchors = 4;
    c.ridge.window_cap = 7;
    c.hint_decay = 0.9;
    c.seed = seed;
    return c;
}

struct Phase1Check {
    double sol_error = 0.0;
    double param_error = 0.0;        // joint only
    bool frozen_grad_zero = true;    // frozen only
};

inline Phase1Check phase1_gradcheck(bool joint) {
    const Dataset data = tiny_dataset();
    const Model model = make_model(TrainMode::Solis, tiny_solution_spec(), tiny_param_spec(), data, 1);
    const LossSettings s = loss_settings(tiny_train_config(), data);
    const Trajectory& tr = data.trajectories[0];
    const auto ctx = model.sol.context_sequence(tr);
    auto sol = model.sol.init_params(3);
    for (std::size_t i = 0; i < sol.size(); ++i) sol[i] += 0.05 * std::sin(1.0 + static_cast<double>(i));
    const auto param = model.param.init_params(4);
    const std::vector<std::size_t> colloc{1, 5, 9};
    const Phase1Weights w{1.0, 1.0, 0.5};

    ad::Graph g;
    const auto loss = phase1_loss(g, model, tr, ctx, sol, param, joint, colloc, w, s);
    std::vector<double> grad(sol.size() + param.size(), 0.0);
    g.backward_into(loss.total, grad);

    Phase1Check out;
    auto at_sol = [&](const std::vector<double>& x) {
        ad::Graph h;
        return phase1_loss(h, model, tr, ctx, x, param, joint, colloc, w, s).total.value();
    };
    out.sol_error = worst_fd_error(sol, std::span<const double>(grad).subspan(0, sol.size()), at_sol);
    if (joint) {
        auto at_param = [&](const std::vector<double>& x) {
            ad::Graph h;
            return phase1_loss(h, model, tr, ctx, sol, x, true, colloc, w, s).total.value();
        };
        out.param_error = worst_fd_error(param, std::span<const double>(grad).subspan(sol.size()), at_param);
    } else {
        for (std::size_t i = sol.size(); i < grad.size(); ++i) out.frozen_grad_zero = out.frozen_grad_zero && grad[i] == 0.0;
    }
    return out;
}

struct Phase2Check {
    double error = 0.0;
    double roll = 0.0;
    double tv = 0.0;
};

inline Phase2Check phase2_gradcheck(bool moe) {
    const Dataset data = tiny_dataset();
    ParamNetSpec ps = tiny_param_spec();
    ps.use_moe = moe;
    ps.augment = moe;
    ps.experts = 2;
    const Model model = make_model(TrainMode::Solis, tiny_solution_spec(), ps, data, 1);
    const LossSettings s = loss_settings(tiny_train_config(), data);
    const Trajectory& tr = data.trajectories[1];
    const auto ctx = model.sol.context_sequence(tr);
    const auto recon = reconstruct(model, model.sol.init_params(3), tr, ctx);
    auto param = model.param.init_params(4);
    for (std::size_t i = 0; i < param.size(); ++i) param[i] += 0.1 * std::cos(static_cast<double>(i));
    const std::vector<std::size_t> colloc{0, 2, 3, 6, 7, 8, 11};
    const std::vector<std::size_t> anchors{1, 4};
    const Phase2Weights w{1.0, 0.7, 0.3, 0.2};

    ad::Graph g;
    const auto loss = phase2_loss(g, model, tr, recon, param, colloc, 5, anchors, w, s);
    std::vector<double> grad(param.size(), 0.0);
    g.backward_into(loss.total, grad);
    auto at = [&](const std::vector<double>& x) {
        ad::Graph h;
        return phase2_loss(h, model, tr, recon, x, colloc, 5, anchors, w, s).total.value();
    };
    return {worst_fd_error(param, grad, at), loss.roll.value(), loss.tv.value()};
}

}  // namespace solis::testing
