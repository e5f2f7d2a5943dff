#pragma once

// Local physics hints: windowed ridge regression of v' on (-y, -v, u) over the
// reconstructed trajectory, giving closed-form coefficient anchors with a
// conditioning-based reliability weight.

#include <Eigen/Dense>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "solis/surrogate.hpp"

namespace solis {

using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct RidgeOptions {
    double lambda0 = 1e-3;
    bool adaptive = true;          // lambda_r = lambda0 * trace(Phi^T Phi) / (3 w); else lambda_r = lambda0
    std::size_t window_cap = 129;  // 0 = uncapped
};

// One frozen reconstruction sample at a collocation time.
struct HintSample {
    double t = 0.0;
    double y = 0.0;
    double v = 0.0;
    double dv = 0.0;  // dv_hat/dt from autodiff
    double u = 0.0;
};

struct RegressionWindow {
    double t = 0.0;         // center time
    std::size_t first = 0;  // index of the first sample
    std::size_t length = 0;
    DesignMatrix phi;       // rows [-y, -v, u]
    Eigen::VectorXd target; // dv/dt
};

struct RidgeHint {
    SurrogateCoefficients theta;
    double weight = 0.0;   // reliability in [0, 1]
    double lambda = 0.0;   // regularization actually used
    std::size_t window = 0;
};

// Uniform over odd integers in [5, min(n, cap)].
std::size_t sample_window_length(std::mt19937_64& rng, std::size_t n_colloc, std::size_t cap = 129);

// Index of the first sample of the length-w window centred on `center`,
// shifted inward near the ends.
std::size_t window_start(std::size_t center, std::size_t w, std::size_t n);

std::vector<RegressionWindow> build_windows(std::span<const HintSample> samples, std::size_t w);

// (Phi^T Phi + lambda I)^{-1} Phi^T Y by a direct 3x3 solve.
Eigen::Vector3d ridge_solve(const DesignMatrix& phi, const Eigen::VectorXd& target, double lambda);

// lambda_min / lambda_max of the Gram matrix; 0 when it vanishes.
double reliability_weight(const Eigen::Matrix3d& gram);

double adaptive_ridge(const DesignMatrix& phi, double lambda0);

// One hint per sample. The window length is drawn once from `rng`.
std::vector<RidgeHint> compute_hints(std::span<const HintSample> samples, std::mt19937_64& rng,
                                     const RidgeOptions& options);
// Same, with the window length given.
std::vector<RidgeHint> compute_hints_with_window(std::span<const HintSample> samples, std::size_t w,
                                                 const RidgeOptions& options);

// (t, k*, d*, g*, w_t, w, lambda_r)
void write_hint_csv(const std::filesystem::path& path, std::span<const HintSample> samples,
                    std::span<const RidgeHint> hints);

}  // namespace solis
