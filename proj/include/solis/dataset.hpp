#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "solis/surrogate.hpp"

namespace solis {

// normalized = (x - offset) / scale
struct ChannelScale {
    double offset = 0.0;
    double scale = 1.0;

    double normalize(double x) const { return (x - offset) / scale; }
    double denormalize(double x) const { return offset + scale * x; }
    bool operator==(const ChannelScale&) const = default;
};

struct Normalization {
    ChannelScale t;
    ChannelScale y;
    ChannelScale v;
    ChannelScale u;
    bool operator==(const Normalization&) const = default;
};

struct Measurement {
    double t = 0.0;
    double y = 0.0;
    std::optional<double> v;  // empty when velocity is latent
    double u = 0.0;
};

struct Trajectory {
    int id = 0;
    State x0;
    std::vector<Measurement> measurements;
    std::vector<double> colloc_t;  // uniform grid
    std::vector<double> colloc_u;

    InputSignal input() const { return InputSignal(colloc_t, colloc_u); }
    double horizon() const { return colloc_t.empty() ? 0.0 : colloc_t.back(); }
    double colloc_spacing() const;
};

class ValidationError : public ParseError {
  public:
    using ParseError::ParseError;
};

struct Dataset {
    std::vector<Trajectory> trajectories;
    Normalization normalization;
    std::string split = "train";  // train | test
    double noise_sigma = 0.0;
    bool velocity_measured = true;
    std::uint64_t seed = 0;
    std::string dataset_hash;     // identifies the generating configuration
    std::string config_hash;      // experiment config that produced the file, if any
    nlohmann::json system;        // generating system spec, when synthetic

    std::size_t measurement_count() const;
    std::size_t collocation_count() const;
    void validate() const;
};

// Midrange offset and half-range scale per channel, so every channel of the
// fitted split maps into [-1, 1].
Normalization fit_normalization(const std::vector<Trajectory>& trajectories);

nlohmann::json to_json(const Normalization& n);
Normalization normalization_from_json(const nlohmann::json& j);

// CSV `traj_id,kind,t,y,v,u` plus a JSON sidecar next to it (same stem, .json).
void save_dataset(const Dataset& dataset, const std::filesystem::path& csv_path);
Dataset load_dataset(const std::filesystem::path& csv_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace solis
