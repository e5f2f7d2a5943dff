// Acceptance run: one PASS/FAIL line per criterion. Arguments select a
// subset of criteria (default: all). Exit status is non-zero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "loss_gradcheck.hpp"
#include "solis/experiment.hpp"
#include "solis/ridge.hpp"
#include "solis/surrogate.hpp"

using namespace solis;
namespace fs = std::filesystem;

namespace {

// Tolerances and targets.
constexpr double kGradTol = 1e-4;
constexpr double kRk4RatioLo = 12.0, kRk4RatioHi = 20.0;
constexpr double kRidgeTol = 1e-10;
constexpr double kLtiMare = 0.10, kLtiRecon = 99.0;
constexpr double kDuffingSim = 0.85, kVdpSim = 0.75;
constexpr double kReconMin = 95.0;
constexpr double kDuffingRollout = 72.0, kVdpRollout = 80.0;
constexpr double kCollapseFraction = 0.1;
constexpr double kDecayTol = 1e-12;
constexpr double kTankRecon = 95.0, kTankRollout = 75.0;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

fs::path config_path(const std::string& name) { return fs::path(SOLIS_CONFIG_DIR) / (name + ".json"); }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("solis_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string list(const std::vector<double>& v, const char* fmt = "%.3f") {
    std::string s;
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, fmt, v[i]);
        s += (i ? " " : "") + std::string(buf);
    }
    return s;
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

// One trained model with the reports the criteria read.
struct RunResult {
    double recon = 0.0;
    double rollout = 0.0;
    double similarity = 0.0;
    double masked_similarity = 0.0;
    double mean_k = 0.0;
    double true_mean_k = 0.0;
    Checkpoint checkpoint;
    double seconds = 0.0;
};

RunResult train_and_score(ExperimentConfig cfg, TrainMode mode, std::uint64_t seed, const std::string& tag = "") {
    cfg.set_seed(seed);
    const auto t0 = std::chrono::steady_clock::now();
    const Splits s = generate_splits(cfg);
    RunResult r;
    r.checkpoint = run_train(cfg, s.train, mode).final_checkpoint;
    r.recon = run_evaluate(r.checkpoint, s.train, EvalKind::Reconstruction)["scores"]["mean_accuracy"];
    r.rollout = run_evaluate(r.checkpoint, s.test, EvalKind::Rollout)["scores"]["mean_accuracy"];
    const auto p = run_evaluate(r.checkpoint, s.train, EvalKind::Portrait);
    r.similarity = p["average_similarity"];
    r.masked_similarity = p["masked_average_similarity"];
    r.mean_k = run_evaluate(r.checkpoint, s.train, EvalKind::Canonical)["mean_coefficients"]["k"];
    double k = 0.0;
    std::size_t n = 0;
    for (const auto& tr : s.train.trajectories)
        for (const auto& m : tr.measurements) {
            k += true_coefficients(cfg.system, State{m.y, m.v.value_or(0.0)}).k;
            ++n;
        }
    r.true_mean_k = k / static_cast<double>(n);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("    [%s %s%s seed %llu] recon %.2f rollout %.2f similarity %.3f masked %.3f mean k %.3f (%.0f s)\n",
                to_string(cfg.system.kind).c_str(), to_string(mode).c_str(), tag.c_str(), static_cast<unsigned long long>(seed),
                r.recon, r.rollout, r.similarity, r.masked_similarity, r.mean_k, r.seconds);
    std::fflush(stdout);
    return r;
}

// Trained runs shared between criteria 5 to 10, computed on first use.
class Runs {
  public:
    const RunResult& get(const std::string& system, TrainMode mode, std::uint64_t seed, bool no_hints = false) {
        const auto key = system + "/" + to_string(mode) + "/" + std::to_string(seed) + (no_hints ? "/nohint" : "");
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        ExperimentConfig cfg = ExperimentConfig::load(config_path(system));
        if (no_hints) cfg.train.lambda_h0 = 0.0;
        return cache_.emplace(key, train_and_score(cfg, mode, seed, no_hints ? " no-hint" : "")).first->second;
    }

  private:
    std::map<std::string, RunResult> cache_;
};

// --- criteria --------------------------------------------------------------

Verdict autodiff_correctness() {
    const double graphs = testing::random_graph_fd_error(100, 2024);
    double worst = graphs;
    for (bool joint : {false, true}) {
        const auto r = testing::phase1_gradcheck(joint);
        worst = std::max({worst, r.sol_error, r.param_error});
    }
    for (bool moe : {false, true}) worst = std::max(worst, testing::phase2_gradcheck(moe).error);
    char buf[160];
    std::snprintf(buf, sizeof buf, "max relative error %.2e over 100 graphs and phase losses (< %.0e)", worst, kGradTol);
    return {worst < kGradTol, buf};
}

Verdict rk4_order() {
    struct Oscillator {
        SurrogateCoefficients operator()(const State&, double) const { return {1.0, 0.0, 0.0}; }
    };
    auto error = [](double h) {
        const auto n = static_cast<std::size_t>(std::lround(10.0 / h));
        std::vector<double> grid(n + 1);
        for (std::size_t i = 0; i <= n; ++i) grid[i] = h * static_cast<double>(i);
        const auto traj = rollout(Oscillator{}, State{1.0, 0.0}, InputSignal::constant(0.0), grid);
        return std::abs(traj.back().y - std::cos(grid.back()));
    };
    const double ratio = error(0.1) / error(0.05);
    char buf[96];
    std::snprintf(buf, sizeof buf, "error ratio %.3f in [%.0f, %.0f]", ratio, kRk4RatioLo, kRk4RatioHi);
    return {ratio >= kRk4RatioLo && ratio <= kRk4RatioHi, buf};
}

Verdict ridge_oracle() {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> lam(1e-4, 10.0);
    const Eigen::Vector3d theta(2.0, 1.0, 3.0);
    double recover = 0.0, residual = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        DesignMatrix phi(8 + trial % 30, 3);
        for (Eigen::Index i = 0; i < phi.rows(); ++i)
            for (int c = 0; c < 3; ++c) phi(i, c) = n(rng);
        recover = std::max(recover, (ridge_solve(phi, phi * theta, 0.0) - theta).cwiseAbs().maxCoeff());
        Eigen::VectorXd y(phi.rows());
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = n(rng);
        const double l = lam(rng);
        const Eigen::Vector3d x = ridge_solve(phi, y, l);
        const Eigen::Vector3d r = (phi.transpose() * phi + l * Eigen::Matrix3d::Identity()) * x - phi.transpose() * y;
        residual = std::max(residual, r.cwiseAbs().maxCoeff());
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "recovery error %.1e, normal-equation residual %.1e (< %.0e)", recover, residual,
                  kRidgeTol);
    return {recover < kRidgeTol && residual < kRidgeTol, buf};
}

Verdict lti_identifiability() {
    ExperimentConfig cfg = ExperimentConfig::load(config_path("lti"));
    const auto t0 = std::chrono::steady_clock::now();
    const Splits s = generate_splits(cfg);
    const auto ck = run_train(cfg, s.train, TrainMode::Solis).final_checkpoint;
    const double recon = run_evaluate(ck, s.train, EvalKind::Reconstruction)["scores"]["mean_accuracy"];
    const auto rows = canonical_report(ck.model, ck.state.sol, ck.state.param, s.train);
    const SurrogateCoefficients truth = true_coefficients(cfg.system, State{0.0, 0.0});
    double mare = 0.0;
    for (const auto& r : rows)
        mare += (std::abs(r.theta.k - truth.k) / truth.k + std::abs(r.theta.d - truth.d) / truth.d +
                 std::abs(r.theta.g - truth.g) / truth.g) /
                3.0;
    mare /= static_cast<double>(rows.size());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[160];
    std::snprintf(buf, sizeof buf, "theta=(%.0f,%.0f,%.0f) MARE %.2f%% (< %.0f%%), recon %.2f (>= %.0f), %.0f s",
                  truth.k, truth.d, truth.g, 100 * mare, 100 * kLtiMare, recon, kLtiRecon, secs);
    return {mare < kLtiMare && recon >= kLtiRecon, buf};
}

Verdict manifold(Runs& runs, const std::string& system, double target) {
    std::vector<double> masked, full;
    for (auto seed : kSeeds) {
        const auto& r = runs.get(system, TrainMode::Solis, seed);
        masked.push_back(r.masked_similarity);
        full.push_back(r.similarity);
    }
    const double m = median(masked);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s masked similarity median %.3f (>= %.2f); seeds [%s], unmasked [%s]",
                  system.c_str(), m, target, list(masked).c_str(), list(full).c_str());
    return {m >= target, buf};
}

Verdict reconstruction(Runs& runs) {
    std::string detail;
    bool ok = true;
    for (const std::string system : {"duffing", "vanderpol"}) {
        std::vector<double> v;
        for (auto seed : kSeeds) v.push_back(runs.get(system, TrainMode::Solis, seed).recon);
        const double m = median(v);
        ok = ok && m >= kReconMin;
        char buf[120];
        std::snprintf(buf, sizeof buf, "%s%s median %.2f [%s]", detail.empty() ? "" : "; ", system.c_str(), m,
                      list(v, "%.2f").c_str());
        detail += buf;
    }
    return {ok, detail + " (>= 95)"};
}

Verdict rollout_generalization(Runs& runs) {
    std::string detail;
    bool ok = true;
    for (const auto& [system, target] : {std::pair<std::string, double>{"duffing", kDuffingRollout},
                                         std::pair<std::string, double>{"vanderpol", kVdpRollout}}) {
        std::vector<double> v;
        for (auto seed : kSeeds) v.push_back(runs.get(system, TrainMode::Solis, seed).rollout);
        const double m = median(v);
        ok = ok && m >= target;
        char buf[140];
        std::snprintf(buf, sizeof buf, "%s%s median %.2f (>= %.0f) [%s]", detail.empty() ? "" : "; ", system.c_str(),
                      m, target, list(v, "%.2f").c_str());
        detail += buf;
    }
    return {ok, detail};
}

Verdict baseline_ordering(Runs& runs) {
    std::string detail;
    bool ok = true;
    for (const std::string system : {"duffing", "vanderpol"}) {
        int wins = 0;
        std::vector<double> s, i, im;
        for (auto seed : kSeeds) {
            s.push_back(runs.get(system, TrainMode::Solis, seed).masked_similarity);
            i.push_back(runs.get(system, TrainMode::Ipinn, seed).masked_similarity);
            im.push_back(runs.get(system, TrainMode::IpinnM, seed).masked_similarity);
            wins += (s.back() > i.back() && s.back() > im.back()) ? 1 : 0;
        }
        ok = ok && 2 * wins > static_cast<int>(kSeeds.size());
        detail += system + " wins " + std::to_string(wins) + "/3 (solis [" + list(s) + "] ipinn [" + list(i) +
                  "] ipinn-m [" + list(im) + "]); ";
    }
    // A single constant damping cannot change sign between y=0 and y=2.
    const SystemSpec vdp = ExperimentConfig::load(config_path("vanderpol")).system;
    const bool truth_flips = true_coefficients(vdp, {0.0, 0.0}).d * true_coefficients(vdp, {2.0, 0.0}).d < 0.0;
    bool all_fail = true;
    for (auto seed : kSeeds) {
        const auto& ck = runs.get("vanderpol", TrainMode::Ipinn, seed).checkpoint;
        const auto net = ck.model.param.bind(ck.state.param);
        const double d0 = net(State{0.0, 0.0}, 0.0).d, d2 = net(State{2.0, 0.0}, 0.0).d;
        all_fail = all_fail && !(d0 * d2 < 0.0);
        if (seed == kSeeds.front()) {
            char buf[120];
            std::snprintf(buf, sizeof buf, "ipinn vdp d(y=0)=%.3f d(y=2)=%.3f", d0, d2);
            detail += buf;
        }
    }
    detail += all_fail && truth_flips ? " fails the sign test" : " passes the sign test";
    return {ok && truth_flips && all_fail, detail};
}

Verdict collapse_prevention(Runs& runs) {
    bool ok = true;
    std::string detail;
    for (auto seed : kSeeds) {
        const auto& hinted = runs.get("duffing", TrainMode::Solis, seed);
        const auto& bare = runs.get("duffing", TrainMode::Solis, seed, true);
        ok = ok && hinted.mean_k >= kCollapseFraction * hinted.true_mean_k;
        char buf[200];
        std::snprintf(buf, sizeof buf, "%sseed %llu: true k %.3f, hinted k %.3f (masked %.3f), no-hint k %.3f (masked %.3f)",
                      detail.empty() ? "" : "; ", static_cast<unsigned long long>(seed), hinted.true_mean_k,
                      hinted.mean_k, hinted.masked_similarity, bare.mean_k, bare.masked_similarity);
        detail += buf;
    }
    return {ok, detail};
}

Verdict freeze_decay_determinism() {
    const auto cfg = testing::smoke_config(7);
    const Splits s = generate_splits(cfg);

    bool frozen = true;
    double decay = 0.0;
    Trainer t(make_model(TrainMode::Solis, cfg.solution, cfg.parameter, s.train, cfg.train.seed), cfg.train, s.train);
    while (!t.done()) {
        const auto before = t.state();
        const auto rep = t.run_epoch();
        frozen = frozen && (rep.phase == 1 ? t.state().param == before.param : t.state().sol == before.sol);
        const double expect =
            cfg.train.lambda_h0 * std::pow(cfg.train.hint_decay, static_cast<double>(t.state().phase2_epochs));
        decay = std::max(decay, std::abs(t.state().lambda_h - expect));
    }

    std::vector<std::string> bytes;
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path dir = scratch("determinism" + std::to_string(rep));
        run_generate(cfg, dir / "data");
        const Dataset train = load_dataset(dir / "data" / "train.csv");
        const Dataset test = load_dataset(dir / "data" / "test.csv");
        const auto ck = run_train(cfg, train, TrainMode::Solis, dir / "run").final_checkpoint;
        std::string all;
        for (auto which : {EvalKind::Reconstruction, EvalKind::Rollout, EvalKind::Portrait, EvalKind::Canonical}) {
            run_evaluate(ck, which == EvalKind::Rollout ? test : train, which, dir / "eval");
            all += slurp(dir / "eval" / ("metrics_" + to_string(which) + ".json"));
        }
        bytes.push_back(all);
    }
    const bool same = bytes[0] == bytes[1] && !bytes[0].empty();
    char buf[160];
    std::snprintf(buf, sizeof buf, "E=%zu: frozen %s, decay error %.1e (< %.0e), metrics JSON %s",
                  cfg.train.epochs, frozen ? "bit-identical" : "CHANGED", decay, kDecayTol,
                  same ? "byte-identical" : "DIFFER");
    return {frozen && decay < kDecayTol && same, buf};
}

Verdict two_tank() {
    ExperimentConfig cfg = ExperimentConfig::load(config_path("twotank"));
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = scratch("twotank");
    run_generate(cfg, dir / "data");
    const Dataset train = load_dataset(dir / "data" / "train.csv");
    const Dataset test = load_dataset(dir / "data" / "test.csv");
    run_train(cfg, train, TrainMode::Solis, dir / "run");
    const Checkpoint ck = Checkpoint::load(dir / "run" / "final.json");
    const double recon = run_evaluate(ck, train, EvalKind::Reconstruction, dir / "eval")["scores"]["mean_accuracy"];
    const double roll = run_evaluate(ck, test, EvalKind::Rollout, dir / "eval")["scores"]["mean_accuracy"];
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[128];
    std::snprintf(buf, sizeof buf, "recon %.2f (>= %.0f), rollout %.2f (>= %.0f), %.0f s", recon, kTankRecon, roll,
                  kTankRollout, secs);
    return {recon >= kTankRecon && roll >= kTankRollout, buf};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));
    Runs runs;
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"autodiff gradients", autodiff_correctness},
        {"rk4 order", rk4_order},
        {"ridge oracle", ridge_oracle},
        {"lti identifiability", lti_identifiability},
        {"duffing manifold", [&] { return manifold(runs, "duffing", kDuffingSim); }},
        {"van der pol manifold", [&] { return manifold(runs, "vanderpol", kVdpSim); }},
        {"in-sample reconstruction", [&] { return reconstruction(runs); }},
        {"rollout generalization", [&] { return rollout_generalization(runs); }},
        {"baseline ordering", [&] { return baseline_ordering(runs); }},
        {"collapse prevention", [&] { return collapse_prevention(runs); }},
        {"freeze/decay/determinism", freeze_decay_determinism},
        {"two-tank pipeline", two_tank},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!wanted.empty() && !wanted.count(id)) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
