#pragma once

// Loss terms and the two phase composites. Terms are templated on the scalar
// so the same code runs on plain doubles and on taped variables.

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "solis/dataset.hpp"
#include "solis/ridge.hpp"
#include "solis/surrogate.hpp"

namespace solis {

template <class T>
struct CollocationPoint {
    T y{};
    T v{};
    T dy{};  // dy_hat/dt
    T dv{};  // dv_hat/dt
    double u = 0.0;
    CoefficientsT<T> theta;
};

struct PhysicsOptions {
    bool kinematic = true;   // also penalize dy_hat/dt - v_hat
    double scale = 1.0;      // residuals are divided by this
};

// mean_t [ (dv + k y + d v - g u)^2 + (dy - v)^2 ] / scale^2
template <class T>
T physics_loss(std::span<const CollocationPoint<T>> batch, const PhysicsOptions& opt = {}) {
    if (batch.empty()) return T(0.0);
    T total = T(0.0);
    const double inv = 1.0 / opt.scale;
    for (const auto& p : batch) {
        T r = (p.dv + p.theta.k * p.y + p.theta.d * p.v - p.theta.g * p.u) * inv;
        total += r * r;
        if (opt.kinematic) {
            T q = (p.dy - p.v) * inv;
            total += q * q;
        }
    }
    return total * (1.0 / static_cast<double>(batch.size()));
}

struct ChannelScales {
    double y = 1.0;
    double v = 1.0;
};

// Mean squared error over the measured entries. A measurement without v, or
// use_v == false, contributes only its y entry.
template <class T>
T data_loss(std::span<const StateT<T>> predictions, std::span<const Measurement> measurements, bool use_v,
            const ChannelScales& scales = {}) {
    if (measurements.empty()) throw UsageError("data loss over an empty measurement set");
    if (predictions.size() != measurements.size()) throw UsageError("prediction and measurement counts differ");
    T total = T(0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        T ey = (predictions[i].y - measurements[i].y) * (1.0 / scales.y);
        total += ey * ey;
        ++count;
        if (use_v && measurements[i].v) {
            T ev = (predictions[i].v - *measurements[i].v) * (1.0 / scales.v);
            total += ev * ev;
            ++count;
        }
    }
    return total * (1.0 / static_cast<double>(count));
}

template <class T>
T ic_loss(const StateT<T>& estimate, const State& x0, const ChannelScales& scales = {}) {
    T ey = (estimate.y - x0.y) * (1.0 / scales.y);
    T ev = (estimate.v - x0.v) * (1.0 / scales.v);
    return ey * ey + ev * ev;
}

// (1/N) sum_t w_t |theta_hat(t) - theta*(t)|^2
template <class T>
T hint_loss(std::span<const CoefficientsT<T>> theta, std::span<const RidgeHint> hints) {
    if (theta.size() != hints.size()) throw UsageError("hint count differs from coefficient count");
    if (theta.empty()) return T(0.0);
    T total = T(0.0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const auto& h = hints[i];
        if (h.weight == 0.0) continue;
        T dk = theta[i].k - h.theta.k;
        T dd = theta[i].d - h.theta.d;
        T dg = theta[i].g - h.theta.g;
        total += (dk * dk + dd * dd + dg * dg) * h.weight;
    }
    return total * (1.0 / static_cast<double>(theta.size()));
}

// Mean over points of the l1 norm of consecutive coefficient differences
// along one time-ordered sequence.
template <class T>
T tv_loss(std::span<const CoefficientsT<T>> theta) {
    using ad::abs;
    if (theta.size() < 2) return T(0.0);
    T total = T(0.0);
    for (std::size_t i = 1; i < theta.size(); ++i) {
        total += T(abs(T(theta[i].k - theta[i - 1].k)));
        total += T(abs(T(theta[i].d - theta[i - 1].d)));
        total += T(abs(T(theta[i].g - theta[i - 1].g)));
    }
    return total * (1.0 / static_cast<double>(theta.size()));
}

// H-step RK4 rollouts of the surrogate from frozen reconstructed states on a
// uniform grid, compared with the reconstruction H steps ahead. Anchors whose
// window runs past the end are skipped.
template <class T, class ParamNet, class Input>
T rollout_loss(std::span<const double> grid, std::span<const State> states, const ParamNet& param_net,
               const Input& u_of_t, std::size_t horizon, std::span<const std::size_t> anchors,
               const ChannelScales& scales = {}) {
    if (horizon == 0) throw UsageError("rollout horizon must be >= 1");
    if (grid.size() != states.size()) throw UsageError("rollout grid and state counts differ");
    auto field = quasi_lpv_field<T>(param_net);
    T total = T(0.0);
    std::size_t used = 0;
    for (std::size_t a : anchors) {
        if (a + horizon >= grid.size()) continue;
        StateT<T> x{T(states[a].y), T(states[a].v)};
        T err = T(0.0);
        for (std::size_t h = 1; h <= horizon; ++h) {
            const std::size_t i = a + h - 1;
            x = rk4_step<T>(field, x, u_of_t, grid[i], grid[i + 1] - grid[i], i);
            T ey = (x.y - states[a + h].y) * (1.0 / scales.y);
            T ev = (x.v - states[a + h].v) * (1.0 / scales.v);
            err += ey * ey + ev * ev;
        }
        total += err * (1.0 / static_cast<double>(horizon));
        ++used;
    }
    if (used == 0) throw UsageError("every rollout anchor runs past the end of the trajectory");
    return total * (1.0 / static_cast<double>(used));
}

struct Phase1Weights {
    double data = 1.0;
    double ic = 1.0;
    double phys = 0.1;
};

struct Phase2Weights {
    double phys = 1.0;
    double hint = 1.0;
    double reg = 0.01;
    double roll = 0.0;  // extra rollout weight on top of the regularization slot
};

void validate(const Phase1Weights& w);
void validate(const Phase2Weights& w);

// lambda_d L_data + lambda_ic L_ic + lambda_p L_phys
template <class T>
T phase1_total(const T& data, const T& ic, const T& phys, const Phase1Weights& w) {
    validate(w);
    return data * w.data + ic * w.ic + phys * w.phys;
}

// lambda_p L_phys + lambda_h L_hint + lambda_reg (L_roll + L_TV) + lambda_roll L_roll
template <class T>
T phase2_total(const T& phys, const T& hint, const T& roll, const T& tv, const Phase2Weights& w) {
    validate(w);
    return phys * w.phys + hint * w.hint + (roll + tv) * w.reg + roll * w.roll;
}

struct LossReport {
    std::size_t epoch = 0;
    int phase = 1;
    double data = 0.0;
    double ic = 0.0;
    double phys = 0.0;
    double hint = 0.0;
    double tv = 0.0;
    double roll = 0.0;
    double total = 0.0;
    double lambda_h = 0.0;
};

class LossLog {
  public:
    explicit LossLog(const std::filesystem::path& path, bool append = false);
    void write(const LossReport& r);

  private:
    std::ofstream out_;
};

std::string format_report(const LossReport& r);

}  // namespace solis
