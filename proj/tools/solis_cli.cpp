// solis: generate datasets, train models and evaluate them.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric abort,
// 4 dataset/checkpoint mismatch, 1 anything else.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "solis/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitMismatch = 4;

}  // namespace

int main(int argc, char** argv) {
    using namespace solis;
    CLI::App app{"Physics-informed quasi-LPV system identification"};
    app.require_subcommand(1);

    std::string config_path, dataset_path, out_path, checkpoint_path, baseline, which, resume_path;
    std::optional<std::uint64_t> seed;

    auto* gen = app.add_subcommand("generate", "simulate a benchmark system and write train/test datasets");
    gen->add_option("--config", config_path, "experiment config JSON")->required();
    gen->add_option("--out", out_path, "output directory")->required();
    gen->add_option("--seed", seed, "override the experiment seed");

    auto* train = app.add_subcommand("train", "train SOLIS or a baseline on a dataset");
    train->add_option("--config", config_path, "experiment config JSON")->required();
    train->add_option("--dataset", dataset_path, "training CSV (sidecar JSON alongside)")->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--seed", seed, "override the experiment seed");
    train->add_option("--baseline", baseline, "train a baseline instead")
        ->check(CLI::IsMember({"ipinn", "ipinn-m"}));
    train->add_option("--resume", resume_path, "continue from a checkpoint");

    auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
    eval->add_option("--dataset", dataset_path, "dataset CSV")->required();
    eval->add_option("--out", out_path, "output directory")->required();
    eval->add_option("--which", which, "report to produce")
        ->required()
        ->check(CLI::IsMember({"reconstruction", "rollout", "portrait", "canonical"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*gen) {
            auto cfg = ExperimentConfig::load(config_path);
            if (seed) cfg.set_seed(*seed);
            run_generate(cfg, out_path);
            std::printf("wrote %s/train.csv and %s/test.csv (config %s)\n", out_path.c_str(), out_path.c_str(),
                        cfg.hash().c_str());
        } else if (*train) {
            auto cfg = ExperimentConfig::load(config_path);
            if (seed) cfg.set_seed(*seed);
            const Dataset data = load_dataset(dataset_path);
            const TrainMode mode = baseline.empty() ? TrainMode::Solis : train_mode_from_string(baseline);
            std::optional<Checkpoint> resume;
            if (!resume_path.empty()) resume = Checkpoint::load(resume_path);
            const auto outcome = run_train(cfg, data, mode, std::filesystem::path(out_path), resume);
            const auto& last = outcome.log.empty() ? LossReport{} : outcome.log.back();
            std::printf("trained %s for %zu epochs; final total loss %.6g\n", to_string(mode).c_str(),
                        outcome.final_checkpoint.state.epoch, last.total);
        } else if (*eval) {
            const Checkpoint ck = Checkpoint::load(checkpoint_path);
            const Dataset data = load_dataset(dataset_path);
            const auto m = run_evaluate(ck, data, eval_kind_from_string(which), std::filesystem::path(out_path));
            std::printf("%s\n", m.dump(2).c_str());
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ArtifactMismatchError& e) {
        std::cerr << "artifact mismatch: " << e.what() << '\n';
        return kExitMismatch;
    } catch (const TrainingAborted& e) {
        std::cerr << "numeric abort: " << e.what() << " (last good state written to aborted.json)\n";
        return kExitNumeric;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
