#include "solis/ridge.hpp"

#include <algorithm>
#include <fstream>

namespace solis {

std::size_t sample_window_length(std::mt19937_64& rng, std::size_t n_colloc, std::size_t cap) {
    if (n_colloc < 5) throw UsageError("ridge windows need at least 5 collocation points, got " +
                                       std::to_string(n_colloc));
    std::size_t hi = cap == 0 ? n_colloc : std::min(n_colloc, cap);
    if (hi < 5) throw UsageError("ridge window cap must be at least 5");
    if (hi % 2 == 0) --hi;
    const std::size_t choices = (hi - 5) / 2 + 1;
    std::uniform_int_distribution<std::size_t> pick(0, choices - 1);
    return 5 + 2 * pick(rng);
}

std::size_t window_start(std::size_t center, std::size_t w, std::size_t n) {
    const std::size_t half = (w - 1) / 2;
    const std::size_t start = center > half ? center - half : 0;
    return std::min(start, n - w);
}

namespace {

void fill_window(std::span<const HintSample> s, std::size_t first, std::size_t w, DesignMatrix& phi,
                 Eigen::VectorXd& y) {
    phi.resize(static_cast<Eigen::Index>(w), 3);
    y.resize(static_cast<Eigen::Index>(w));
    for (std::size_t r = 0; r < w; ++r) {
        const auto& p = s[first + r];
        const auto i = static_cast<Eigen::Index>(r);
        phi(i, 0) = -p.y;
        phi(i, 1) = -p.v;
        phi(i, 2) = p.u;
        y(i) = p.dv;
    }
}

void check_window(std::size_t n, std::size_t w) {
    if (w < 5 || w % 2 == 0) throw UsageError("ridge window length must be odd and >= 5, got " + std::to_string(w));
    if (n < w)
        throw UsageError("trajectory has " + std::to_string(n) + " collocation points, fewer than window " +
                         std::to_string(w));
}

}  // namespace

std::vector<RegressionWindow> build_windows(std::span<const HintSample> samples, std::size_t w) {
    check_window(samples.size(), w);
    std::vector<RegressionWindow> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        RegressionWindow win;
        win.t = samples[i].t;
        win.first = window_start(i, w, samples.size());
        win.length = w;
        fill_window(samples, win.first, w, win.phi, win.target);
        out.push_back(std::move(win));
    }
    return out;
}

Eigen::Vector3d ridge_solve(const DesignMatrix& phi, const Eigen::VectorXd& target, double lambda) {
    if (!(lambda >= 0.0)) throw UsageError("ridge lambda must be non-negative");
    if (phi.rows() != target.rows()) throw UsageError("ridge design and target row counts differ");
    Eigen::Matrix3d a = phi.transpose() * phi;
    a.diagonal().array() += lambda;
    const Eigen::Vector3d b = phi.transpose() * target;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
    if (!lu.isInvertible()) throw RankDeficiencyError("ridge system is singular (rank " + std::to_string(lu.rank()) + ")");
    return lu.solve(b);
}

double reliability_weight(const Eigen::Matrix3d& gram) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(gram, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double hi = ev(2);
    if (!(hi > 0.0)) return 0.0;
    return std::clamp(ev(0) / hi, 0.0, 1.0);
}

double adaptive_ridge(const DesignMatrix& phi, double lambda0) {
    if (!(lambda0 >= 0.0)) throw UsageError("lambda0 must be non-negative");
    if (phi.rows() == 0) return 0.0;
    return lambda0 * phi.squaredNorm() / (3.0 * static_cast<double>(phi.rows()));
}

std::vector<RidgeHint> compute_hints_with_window(std::span<const HintSample> samples, std::size_t w,
                                                 const RidgeOptions& options) {
    const std::size_t n = samples.size();
    check_window(n, w);
    // Clamped windows repeat near the ends; solve each distinct start once.
    std::vector<RidgeHint> by_start(n - w + 1);
    std::vector<char> done(n - w + 1, 0);
    DesignMatrix phi;
    Eigen::VectorXd target;
    std::vector<RidgeHint> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t first = window_start(i, w, n);
        if (!done[first]) {
            fill_window(samples, first, w, phi, target);
            RidgeHint h;
            h.window = w;
            h.lambda = options.adaptive ? adaptive_ridge(phi, options.lambda0) : options.lambda0;
            const Eigen::Matrix3d gram = phi.transpose() * phi;
            h.weight = reliability_weight(gram);
            try {
                const Eigen::Vector3d th = ridge_solve(phi, target, h.lambda);
                h.theta = {th(0), th(1), th(2)};
                if (!std::isfinite(th(0)) || !std::isfinite(th(1)) || !std::isfinite(th(2))) {
                    h.theta = {};
                    h.weight = 0.0;
                }
            } catch (const RankDeficiencyError&) {
                h.theta = {};
                h.weight = 0.0;
            }
            by_start[first] = h;
            done[first] = 1;
        }
        out.push_back(by_start[first]);
    }
    return out;
}

std::vector<RidgeHint> compute_hints(std::span<const HintSample> samples, std::mt19937_64& rng,
                                     const RidgeOptions& options) {
    const std::size_t w = sample_window_length(rng, samples.size(), options.window_cap);
    return compute_hints_with_window(samples, w, options);
}

void write_hint_csv(const std::filesystem::path& path, std::span<const HintSample> samples,
                    std::span<const RidgeHint> hints) {
    if (samples.size() != hints.size()) throw UsageError("hint CSV: sample and hint counts differ");
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "t,k,d,g,weight,window,lambda\n";
    for (std::size_t i = 0; i < hints.size(); ++i) {
        const auto& h = hints[i];
        out << samples[i].t << ',' << h.theta.k << ',' << h.theta.d << ',' << h.theta.g << ',' << h.weight << ','
            << h.window << ',' << h.lambda << '\n';
    }
}

}  // namespace solis
