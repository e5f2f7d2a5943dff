#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "solis/experiment.hpp"

using namespace solis;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("solis_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SOLIS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config round-trip and hash") {
    const ExperimentConfig c = testing::smoke_config();
    const auto j = c.to_json();
    const ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.hash() == c.hash());
    CHECK(c.hash().size() == 16);

    ExperimentConfig moved = c;
    moved.output_dir = "elsewhere";
    CHECK(moved.hash() == c.hash());
    ExperimentConfig other = c;
    other.set_seed(4);
    CHECK(other.hash() != c.hash());

    auto bad = j;
    bad["train"]["epochz"] = 3;
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
    auto neg = j;
    neg["dataset"]["noise_sigma"] = -1.0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(neg), ConfigError);
}

TEST_CASE("shipped configs load") {
    for (const char* name : {"defaults", "lti", "duffing", "vanderpol", "twotank"}) {
        CAPTURE(name);
        const auto c = ExperimentConfig::load(fs::path(SOLIS_CONFIG_DIR) / (std::string(name) + ".json"));
        CHECK(ExperimentConfig::from_json(c.to_json()).hash() == c.hash());
    }
}

TEST_CASE("splits share a dataset hash and carry the config hash") {
    const auto c = testing::smoke_config();
    const Splits s = generate_splits(c);
    CHECK(s.train.trajectories.size() == 2);
    CHECK(s.test.trajectories.size() == 1);
    CHECK(s.train.dataset_hash == s.test.dataset_hash);
    CHECK(s.train.config_hash == c.hash());
    CHECK(s.test.config_hash == c.hash());
}

TEST_CASE("checkpoint save/load round-trip") {
    const auto c = testing::smoke_config();
    const Splits s = generate_splits(c);
    const auto out = run_train(c, s.train, TrainMode::Solis);
    const fs::path dir = scratch("ckpt");
    out.final_checkpoint.save(dir / "a.json");
    const Checkpoint back = Checkpoint::load(dir / "a.json");
    back.save(dir / "b.json");
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(back.state.sol == out.final_checkpoint.state.sol);
    CHECK(back.state.param == out.final_checkpoint.state.param);
    CHECK(back.config_hash == c.hash());

    const auto m1 = run_evaluate(out.final_checkpoint, s.test, EvalKind::Rollout);
    const auto m2 = run_evaluate(back, s.test, EvalKind::Rollout);
    CHECK(m1.dump() == m2.dump());

    ExperimentConfig other = c;
    other.set_seed(11);
    const Splits foreign = generate_splits(other);
    CHECK_THROWS_AS(run_evaluate(back, foreign.test, EvalKind::Reconstruction), ArtifactMismatchError);
}

TEST_CASE("pipeline is deterministic to the byte") {
    const auto c = testing::smoke_config(8);
    std::vector<std::string> metrics;
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path dir = scratch("det" + std::to_string(rep));
        run_generate(c, dir / "data");
        const Dataset train = load_dataset(dir / "data" / "train.csv");
        const Dataset test = load_dataset(dir / "data" / "test.csv");
        const auto out = run_train(c, train, TrainMode::Solis, dir / "run");
        std::string all;
        for (auto which : {EvalKind::Reconstruction, EvalKind::Rollout, EvalKind::Portrait, EvalKind::Canonical}) {
            const Dataset& d = which == EvalKind::Rollout ? test : train;
            run_evaluate(out.final_checkpoint, d, which, dir / "eval");
            all += slurp(dir / "eval" / ("metrics_" + to_string(which) + ".json"));
        }
        all += slurp(dir / "data" / "train.csv") + slurp(dir / "run" / "final.json");
        metrics.push_back(all);
    }
    CHECK(metrics[0] == metrics[1]);
}

TEST_CASE("resume reproduces the uninterrupted run") {
    auto c = testing::smoke_config(6);
    c.train.checkpoint_every = 4;
    const Splits s = generate_splits(c);
    const fs::path full = scratch("resume_full"), part = scratch("resume_part");
    const auto a = run_train(c, s.train, TrainMode::Solis, full);
    REQUIRE(fs::exists(full / "checkpoint_4.json"));
    const auto b = run_train(c, s.train, TrainMode::Solis, part, Checkpoint::load(full / "checkpoint_4.json"));

    CHECK(a.final_checkpoint.to_json().dump() == b.final_checkpoint.to_json().dump());
    const auto la = lines(slurp(full / "log.csv"));
    const auto lb = lines(slurp(part / "log.csv"));
    REQUIRE(la.size() == 11);  // header + 10 epochs
    REQUIRE(lb.size() == 6);   // epochs 5..10 appended without a header
    for (std::size_t i = 0; i < lb.size(); ++i) CHECK(lb[i] == la[5 + i]);
}

TEST_CASE("evaluate writes the documented artifacts") {
    const auto c = testing::smoke_config();
    const Splits s = generate_splits(c);
    const auto out = run_train(c, s.train, TrainMode::Solis);
    const fs::path dir = scratch("artifacts");

    const auto roll = run_evaluate(out.final_checkpoint, s.test, EvalKind::Rollout, dir);
    CHECK(fs::exists(dir / "metrics_rollout.json"));
    for (const auto& t : roll["scores"]["trajectories"])
        if (!t["diverged"].get<bool>())
            CHECK(fs::exists(dir / ("rollout_" + std::to_string(t["trajectory"].get<std::size_t>()) + ".csv")));
    CHECK(roll["config_hash"] == c.hash());

    const auto por = run_evaluate(out.final_checkpoint, s.train, EvalKind::Portrait, dir);
    CHECK(fs::exists(dir / "portrait.csv"));
    CHECK(por.contains("average_similarity"));
    CHECK(por.contains("masked_average_similarity"));

    const auto can = run_evaluate(out.final_checkpoint, s.train, EvalKind::Canonical, dir);
    const auto rows = lines(slurp(dir / "canonical.csv"));
    REQUIRE(rows.size() == s.train.measurement_count() + 1);
    std::size_t valid = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const bool ok = rows[i].ends_with(",true");
        valid += ok ? 1 : 0;
        if (!ok) CHECK(rows[i].ends_with(",,,,false"));
    }
    CHECK(can["valid_rows"].get<std::size_t>() == valid);
}

TEST_CASE("canonical rows with k <= 0 are flagged") {
    std::vector<CanonicalRow> rows(2);
    rows[0].theta = {4.0, 2.0, 8.0};
    rows[0].valid = true;
    rows[0].canonical = canonical_params(rows[0].theta);
    rows[1].theta = {-1.0, 2.0, 8.0};
    rows[1].valid = false;
    const fs::path dir = scratch("canon");
    write_canonical_csv(dir / "c.csv", rows);
    const auto l = lines(slurp(dir / "c.csv"));
    REQUIRE(l.size() == 3);
    CHECK(l[1].ends_with(",2,0.5,2,true"));
    CHECK(l[2].ends_with(",,,,false"));
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("cli");
    const auto c = testing::smoke_config();
    write_json(dir / "cfg.json", c.to_json());

    CHECK(run_cli("generate --config " + (dir / "cfg.json").string() + " --out " + (dir / "new/nested").string()) == 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "new/nested")) files += e.is_regular_file() ? 1 : 0;
    CHECK(files == 4);
    CHECK(fs::exists(dir / "new/nested/train.json"));
    CHECK(fs::exists(dir / "new/nested/test.json"));
    const std::string first = slurp(dir / "new/nested/train.csv");
    CHECK(run_cli("generate --config " + (dir / "cfg.json").string() + " --out " + (dir / "new/nested").string()) == 0);
    CHECK(slurp(dir / "new/nested/train.csv") == first);

    auto bad = c.to_json();
    bad["train"]["epochs"] = "many";
    write_json(dir / "bad.json", bad);
    CHECK(run_cli("generate --config " + (dir / "bad.json").string() + " --out " + (dir / "x").string()) == 2);
    CHECK(run_cli("generate --out " + (dir / "x").string()) == 2);
    CHECK(run_cli("evaluate --checkpoint a --dataset b --out c --which everything") == 2);

    const std::string data = (dir / "new/nested/train.csv").string();
    CHECK(run_cli("train --config " + (dir / "cfg.json").string() + " --dataset " + data + " --out " +
                  (dir / "run").string()) == 0);
    CHECK(fs::exists(dir / "run/final.json"));
    CHECK(fs::exists(dir / "run/best.json"));
    CHECK(fs::exists(dir / "run/log.csv"));
    CHECK(run_cli("train --config " + (dir / "cfg.json").string() + " --dataset " + data + " --out " +
                  (dir / "ipinn").string() + " --baseline ipinn") == 0);
    CHECK(Checkpoint::load(dir / "ipinn/final.json").model.mode == TrainMode::Ipinn);

    CHECK(run_cli("evaluate --checkpoint " + (dir / "run/final.json").string() + " --dataset " +
                  (dir / "new/nested/test.csv").string() + " --out " + (dir / "eval").string() +
                  " --which rollout") == 0);

    ExperimentConfig other = c;
    other.set_seed(21);
    run_generate(other, dir / "foreign");
    CHECK(run_cli("evaluate --checkpoint " + (dir / "run/final.json").string() + " --dataset " +
                  (dir / "foreign/test.csv").string() + " --out " + (dir / "eval").string() +
                  " --which rollout") == 4);

    auto blow = c.to_json();
    blow["train"]["lr_sol"] = 1e12;
    blow["train"]["lr_param"] = 1e12;
    write_json(dir / "blow.json", blow);
    CHECK(run_cli("train --config " + (dir / "blow.json").string() + " --dataset " + data + " --out " +
                  (dir / "blow").string()) == 3);
    CHECK(fs::exists(dir / "blow/aborted.json"));
}
