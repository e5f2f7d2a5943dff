#include "solis/experiment.hpp"

#include <fstream>

#include "solis/hash.hpp"
#include "solis/json_util.hpp"

namespace solis {

using nlohmann::json;

namespace {

template <class Fn>
auto section(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(name, 0) == 0) throw;
        throw ConfigError(std::string(name) + ": " + what);
    }
}

json dataset_params_json(const DatasetParams& d, const SplitSizes& s) {
    return json{{"train_trajectories", s.train},   {"test_trajectories", s.test},
                {"measurements", d.measurements},  {"collocation", d.collocation},
                {"noise_sigma", d.noise_sigma},    {"velocity_measured", d.velocity_measured}};
}

}  // namespace

json ExperimentConfig::to_json() const {
    return json{{"system", solis::to_json(system)},
                {"dataset", dataset_params_json(dataset, splits)},
                {"train", solis::to_json(train)},
                {"solution_net", solis::to_json(solution)},
                {"parameter_net", solis::to_json(parameter)},
                {"output_dir", output_dir},
                {"seed", seed}};
}

std::string ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("output_dir");
    return hash_hex(j.dump());
}

void ExperimentConfig::set_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    check_keys(j, {"system", "dataset", "train", "solution_net", "parameter_net", "output_dir", "seed"}, "config");
    ExperimentConfig c;
    c.seed = read_field<std::uint64_t>(j, "seed", 0, "config");
    c.output_dir = read_field<std::string>(j, "output_dir", c.output_dir, "config");
    if (!j.contains("system")) throw ConfigError("config.system: required field missing");
    c.system = section("system", [&] { return system_spec_from_json(j.at("system")); });
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        check_keys(d,
                   {"train_trajectories", "test_trajectories", "measurements", "collocation", "noise_sigma",
                    "velocity_measured"},
                   "dataset");
        c.splits.train = read_field(d, "train_trajectories", c.splits.train, "dataset");
        c.splits.test = read_field(d, "test_trajectories", c.splits.test, "dataset");
        c.dataset.measurements = read_field(d, "measurements", c.dataset.measurements, "dataset");
        c.dataset.collocation = read_field(d, "collocation", c.dataset.collocation, "dataset");
        c.dataset.noise_sigma = read_field(d, "noise_sigma", c.dataset.noise_sigma, "dataset");
        c.dataset.velocity_measured = read_field(d, "velocity_measured", c.dataset.velocity_measured, "dataset");
    }
    if (c.splits.train == 0) throw ConfigError("dataset.train_trajectories must be >= 1");
    if (c.dataset.measurements < 2) throw ConfigError("dataset.measurements must be >= 2");
    if (c.dataset.collocation < 4 * c.dataset.measurements)
        throw ConfigError("dataset.collocation must be at least 4 * dataset.measurements");
    if (!(c.dataset.noise_sigma >= 0.0)) throw ConfigError("dataset.noise_sigma must be non-negative");
    json train = j.value("train", json::object());
    if (!train.contains("seed")) train["seed"] = c.seed;
    c.train = section("train", [&] { return train_config_from_json(train); });
    c.solution = section("solution_net", [&] { return solution_spec_from_json(j.value("solution_net", json::object())); });
    c.parameter = section("parameter_net", [&] { return param_spec_from_json(j.value("parameter_net", json::object())); });
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

// --- checkpoints -----------------------------------------------------------------

json Checkpoint::to_json() const {
    return json{{"format", "solis-checkpoint/1"},
                {"tag", tag},
                {"config_hash", config_hash},
                {"dataset_hash", dataset_hash},
                {"model", model.descriptor()},
                {"train", solis::to_json(train)},
                {"state", solis::to_json(state)}};
}

Checkpoint Checkpoint::from_json(const json& j) {
    Checkpoint c;
    try {
        if (j.at("format").get<std::string>() != "solis-checkpoint/1") throw ParseError("unsupported checkpoint format");
        c.tag = j.value("tag", std::string());
        c.config_hash = j.at("config_hash").get<std::string>();
        c.dataset_hash = j.at("dataset_hash").get<std::string>();
        c.model = Model::from_descriptor(j.at("model"));
        c.train = train_config_from_json(j.at("train"));
        c.state = train_state_from_json(j.at("state"));
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    return c;
}

void write_json(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void Checkpoint::save(const std::filesystem::path& path) const { write_json(path, to_json()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read checkpoint " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

// --- pipeline ----------------------------------------------------------------------

Splits generate_splits(const ExperimentConfig& config) {
    DatasetParams p = config.dataset;
    p.trajectories = config.splits.train;
    Splits s;
    s.train = generate_dataset(config.system, p, config.seed, "train");
    s.train.config_hash = config.hash();
    if (config.splits.test > 0) {
        p.trajectories = config.splits.test;
        s.test = generate_dataset(config.system, p, config.seed, "test", s.train.normalization);
        s.test.config_hash = s.train.config_hash;
    }
    return s;
}

void run_generate(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    const Splits s = generate_splits(config);
    std::filesystem::create_directories(out_dir);
    save_dataset(s.train, out_dir / "train.csv");
    if (config.splits.test > 0) save_dataset(s.test, out_dir / "test.csv");
}

TrainOutcome run_train(const ExperimentConfig& config, const Dataset& train, TrainMode mode,
                       const std::optional<std::filesystem::path>& out_dir, const std::optional<Checkpoint>& resume) {
    if (train.split != "train") throw ConfigError("training requires a train split, got '" + train.split + "'");
    const std::string chash = config.hash();
    Model model = resume ? resume->model
                         : make_model(mode, config.solution, config.parameter, train, config.train.seed);
    if (resume && resume->dataset_hash != train.dataset_hash)
        throw ArtifactMismatchError("checkpoint was trained on a different dataset");

    auto make_checkpoint = [&](const TrainState& st, const std::string& tag) {
        Checkpoint c;
        c.model = model;
        c.train = config.train;
        c.state = st;
        c.config_hash = chash;
        c.dataset_hash = train.dataset_hash;
        c.tag = tag;
        return c;
    };

    std::optional<LossLog> log;
    FitHooks hooks;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        log.emplace(*out_dir / "log.csv", resume.has_value());
        hooks.on_epoch = [&](const LossReport& r) { log->write(r); };
        hooks.on_checkpoint = [&](const std::string& tag, const TrainState& st) {
            if (tag == "periodic")
                make_checkpoint(st, tag).save(*out_dir / ("checkpoint_" + std::to_string(st.epoch) + ".json"));
        };
    }

    FitResult result;
    try {
        result = resume ? resume_fit(model, config.train, train, resume->state, hooks)
                        : fit(model, config.train, train, hooks);
    } catch (const TrainingAborted& e) {
        if (out_dir) make_checkpoint(e.last_good(), "aborted").save(*out_dir / "aborted.json");
        throw;
    }
    TrainOutcome out;
    out.final_checkpoint = make_checkpoint(result.state, "final");
    out.best_checkpoint = make_checkpoint(result.best, "best");
    out.log = std::move(result.log);
    if (out_dir) {
        out.final_checkpoint.save(*out_dir / "final.json");
        out.best_checkpoint.save(*out_dir / "best.json");
    }
    return out;
}

EvalKind eval_kind_from_string(const std::string& s) {
    if (s == "reconstruction") return EvalKind::Reconstruction;
    if (s == "rollout") return EvalKind::Rollout;
    if (s == "portrait") return EvalKind::Portrait;
    if (s == "canonical") return EvalKind::Canonical;
    throw ConfigError("unknown evaluation '" + s + "' (expected reconstruction, rollout, portrait or canonical)");
}

std::string to_string(EvalKind k) {
    switch (k) {
        case EvalKind::Reconstruction: return "reconstruction";
        case EvalKind::Rollout: return "rollout";
        case EvalKind::Portrait: return "portrait";
        case EvalKind::Canonical: return "canonical";
    }
    return "reconstruction";
}

json run_evaluate(const Checkpoint& ck, const Dataset& data, EvalKind which,
                  const std::optional<std::filesystem::path>& out_dir) {
    if (ck.dataset_hash != data.dataset_hash)
        throw ArtifactMismatchError("dataset " + data.dataset_hash + " does not match checkpoint dataset " +
                                    ck.dataset_hash);
    if (out_dir) std::filesystem::create_directories(*out_dir);
    const auto& sol = ck.state.sol;
    const auto& param = ck.state.param;
    json m{{"which", to_string(which)},
           {"mode", to_string(ck.model.mode)},
           {"config_hash", ck.config_hash},
           {"dataset_hash", ck.dataset_hash},
           {"split", data.split},
           {"epoch", ck.state.epoch}};
    switch (which) {
        case EvalKind::Reconstruction:
            m["scores"] = to_json(reconstruction_accuracy(ck.model, sol, data));
            break;
        case EvalKind::Rollout: {
            std::vector<RolloutTrace> traces;
            m["scores"] = to_json(evaluate_rollout(ck.model, param, data, &traces));
            if (out_dir)
                for (const auto& t : traces)
                    if (!t.diverged) write_rollout_csv(*out_dir / ("rollout_" + std::to_string(t.trajectory) + ".csv"), t);
            break;
        }
        case EvalKind::Portrait: {
            if (data.system.is_null()) throw ConfigError("portrait needs a dataset with a generating system spec");
            const SystemSpec truth = system_spec_from_json(data.system);
            const auto r = evaluate_portrait(ck.model, param, data, truth);
            m["average_similarity"] = r.map.average;
            m["masked_average_similarity"] = r.map.masked_average;
            m["valid_cells"] = r.map.valid;
            m["masked_cells"] = r.map.masked_valid;
            m["grid"] = json{{"y", {r.map.grid.y_min, r.map.grid.y_max}},
                             {"v", {r.map.grid.v_min, r.map.grid.v_max}},
                             {"resolution", {r.map.grid.ny, r.map.grid.nv}}};
            if (out_dir) write_portrait_csv(*out_dir / "portrait.csv", r);
            break;
        }
        case EvalKind::Canonical: {
            const auto rows = canonical_report(ck.model, sol, param, data);
            std::size_t valid = 0;
            double k = 0.0, d = 0.0, g = 0.0;
            for (const auto& r : rows) {
                valid += r.valid ? 1 : 0;
                k += r.theta.k;
                d += r.theta.d;
                g += r.theta.g;
            }
            const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
            m["rows"] = rows.size();
            m["valid_rows"] = valid;
            m["mean_coefficients"] = json{{"k", k / n}, {"d", d / n}, {"g", g / n}};
            if (out_dir) write_canonical_csv(*out_dir / "canonical.csv", rows);
            break;
        }
    }
    if (out_dir) write_json(*out_dir / ("metrics_" + to_string(which) + ".json"), m);
    return m;
}

}  // namespace solis
