#pragma once

// Accuracy, phase-portrait similarity and open-loop rollout scoring.

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "solis/dataset.hpp"
#include "solis/systems.hpp"
#include "solis/trainer.hpp"

namespace solis {

struct AccuracyScore {
    double nrmse = 0.0;
    double accuracy = 0.0;  // (1 - nrmse) * 100
    std::string channel;
    int trajectory = -1;
};

// NRMSE normalized by the peak-to-peak range of `truth`.
AccuracyScore accuracy(std::span<const double> pred, std::span<const double> truth, std::string channel = {},
                       int trajectory = -1);

// Cell-centred grid over [y_min, y_max] x [v_min, v_max].
struct PortraitGrid {
    double y_min = -1.0;
    double y_max = 1.0;
    double v_min = -1.0;
    double v_max = 1.0;
    std::size_t ny = 41;
    std::size_t nv = 41;

    std::size_t size() const { return ny * nv; }
    // Cell index = iv * ny + iy.
    State center(std::size_t index) const;
};

// Bounding box of the training measurement states, widened by `inflate`
// times its extent (half on each side).
PortraitGrid portrait_grid(const Dataset& train, std::size_t resolution = 41, double inflate = 0.2);

struct FieldSample {
    double y = 0.0;
    double v = 0.0;
    double fy = 0.0;
    double fv = 0.0;
};

template <class Field>
std::vector<FieldSample> phase_portrait(const Field& field, const PortraitGrid& grid) {
    if (grid.ny < 2 || grid.nv < 2) throw UsageError("portrait grid must be at least 2x2");
    std::vector<FieldSample> out;
    out.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const State x = grid.center(i);
        const State f = field(x);
        out.push_back({x.y, x.v, f.y, f.v});
    }
    return out;
}

// Cells whose centre lies within `radius_cells` cell widths (in the grid's
// unit-box metric) of the piecewise-linear path through each training
// trajectory's measured states.
std::vector<char> near_data_mask(const PortraitGrid& grid, const Dataset& train, double radius_cells = 2.0);

struct SimilarityMap {
    PortraitGrid grid;
    std::vector<double> cosine;  // NaN where excluded
    std::vector<char> mask;      // near-data cells (empty = none given)
    double average = 0.0;        // over all valid cells
    double masked_average = 0.0; // over valid cells inside the mask
    std::size_t valid = 0;
    std::size_t masked_valid = 0;
};

inline constexpr double kDegenerateNorm = 1e-9;

SimilarityMap cosine_similarity_map(std::span<const FieldSample> surrogate, std::span<const FieldSample> truth,
                                    const PortraitGrid& grid, std::vector<char> mask = {});

// --- model-level protocols -----------------------------------------------------

SurrogateCoefficients model_coefficients(const Model& model, std::span<const double> param, const State& x,
                                         double u);

struct TrajectoryScores {
    int trajectory = -1;
    std::vector<AccuracyScore> channels;
    double accuracy = 0.0;  // mean over channels
    bool diverged = false;
};

struct ScoreTable {
    std::vector<TrajectoryScores> trajectories;
    double mean_accuracy = 0.0;
};

nlohmann::json to_json(const ScoreTable& t);

// In-sample reconstruction at the measurement times of the trajectories the
// model was trained on.
ScoreTable reconstruction_accuracy(const Model& model, std::span<const double> sol, const Dataset& data);

struct RolloutTrace {
    int trajectory = -1;
    std::vector<double> t;  // measurement times
    std::vector<State> predicted;
    std::vector<double> u;
    bool diverged = false;
};

// Open-loop integration from each trajectory's x0 under its input, on the
// collocation grid refined with the measurement times; scored at the
// measurement times. Divergent trajectories score 0.
ScoreTable evaluate_rollout(const Model& model, std::span<const double> param, const Dataset& data,
                            std::vector<RolloutTrace>* traces = nullptr, double blow_up = kDefaultBlowUpBound);

using CoefficientField = std::function<SurrogateCoefficients(const State&, double)>;

// Same protocol for an arbitrary coefficient field.
ScoreTable evaluate_rollout(const CoefficientField& net, const Dataset& data,
                            std::vector<RolloutTrace>* traces = nullptr, double blow_up = kDefaultBlowUpBound);

struct PortraitReport {
    SimilarityMap map;
    std::vector<FieldSample> surrogate;
    std::vector<FieldSample> truth;
};

// Unforced (u = 0) learned field vs the true output-space field.
PortraitReport evaluate_portrait(const Model& model, std::span<const double> param, const Dataset& train,
                                 const SystemSpec& truth, std::size_t resolution = 41);

struct CanonicalRow {
    int trajectory = -1;
    double t = 0.0;
    double y = 0.0;
    double v = 0.0;
    double u = 0.0;
    SurrogateCoefficients theta;
    bool valid = false;
    CanonicalParams canonical;
};

// Coefficient and canonical-parameter fields along each trajectory at its
// measurement times; v comes from the solution network when not measured.
std::vector<CanonicalRow> canonical_report(const Model& model, std::span<const double> sol,
                                           std::span<const double> param, const Dataset& data);

void write_portrait_csv(const std::filesystem::path& path, const PortraitReport& report);
void write_rollout_csv(const std::filesystem::path& path, const RolloutTrace& trace);
void write_canonical_csv(const std::filesystem::path& path, std::span<const CanonicalRow> rows);

}  // namespace solis
