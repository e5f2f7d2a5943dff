#pragma once

// Experiment configuration, checkpoints and the generate / train / evaluate
// pipeline used by the command-line tool.

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "solis/evaluation.hpp"
#include "solis/networks.hpp"
#include "solis/systems.hpp"
#include "solis/trainer.hpp"

namespace solis {

struct SplitSizes {
    std::size_t train = 6;
    std::size_t test = 3;
};

struct ExperimentConfig {
    SystemSpec system;
    DatasetParams dataset;
    SplitSizes splits;
    TrainConfig train;
    SolutionNetSpec solution;
    ParamNetSpec parameter;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    // Canonical serialization; the hash covers everything but output_dir.
    nlohmann::json to_json() const;
    std::string hash() const;
    void set_seed(std::uint64_t s);

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
};

struct Checkpoint {
    Model model;
    TrainConfig train;
    TrainState state;
    std::string config_hash;
    std::string dataset_hash;
    std::string tag;  // final | best | periodic | aborted

    nlohmann::json to_json() const;
    static Checkpoint from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

struct Splits {
    Dataset train;
    Dataset test;
};

Splits generate_splits(const ExperimentConfig& config);

// Writes train.csv / test.csv with their sidecars into `out_dir`.
void run_generate(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct TrainOutcome {
    Checkpoint final_checkpoint;
    Checkpoint best_checkpoint;
    std::vector<LossReport> log;
};

// Trains on an in-memory dataset. When `out_dir` is given, writes final.json,
// best.json, periodic checkpoints and log.csv there; on a numeric abort the
// last good state is written to aborted.json before the error propagates.
TrainOutcome run_train(const ExperimentConfig& config, const Dataset& train, TrainMode mode,
                       const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                       const std::optional<Checkpoint>& resume = std::nullopt);

enum class EvalKind { Reconstruction, Rollout, Portrait, Canonical };

EvalKind eval_kind_from_string(const std::string& s);
std::string to_string(EvalKind k);

// Computes the requested report and, when `out_dir` is given, writes
// metrics_<which>.json and the accompanying CSVs. Throws
// ArtifactMismatchError when the dataset was not produced by the
// checkpoint's generating configuration.
nlohmann::json run_evaluate(const Checkpoint& checkpoint, const Dataset& data, EvalKind which,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace solis
