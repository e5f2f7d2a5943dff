#include "solis/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace solis {

using nlohmann::json;

double Trajectory::colloc_spacing() const {
    if (colloc_t.size() < 2) throw UsageError("trajectory has fewer than two collocation points");
    return (colloc_t.back() - colloc_t.front()) / static_cast<double>(colloc_t.size() - 1);
}

std::size_t Dataset::measurement_count() const {
    std::size_t n = 0;
    for (const auto& tr : trajectories) n += tr.measurements.size();
    return n;
}

std::size_t Dataset::collocation_count() const {
    std::size_t n = 0;
    for (const auto& tr : trajectories) n += tr.colloc_t.size();
    return n;
}

void Dataset::validate() const {
    if (trajectories.empty()) throw ValidationError("dataset has no trajectories");
    if (split != "train" && split != "test") throw ValidationError("unknown split tag '" + split + "'");
    for (const auto& tr : trajectories) {
        const std::string where = "trajectory " + std::to_string(tr.id);
        if (tr.measurements.empty()) throw ValidationError(where + " has no measurements");
        if (tr.colloc_t.size() < 2) throw ValidationError(where + " has fewer than two collocation points");
        if (tr.colloc_t.size() != tr.colloc_u.size()) throw ValidationError(where + " collocation columns differ");
        for (std::size_t i = 1; i < tr.measurements.size(); ++i)
            if (!(tr.measurements[i].t > tr.measurements[i - 1].t))
                throw ValidationError(where + " measurement times not strictly increasing");
        for (std::size_t i = 1; i < tr.colloc_t.size(); ++i)
            if (!(tr.colloc_t[i] > tr.colloc_t[i - 1]))
                throw ValidationError(where + " collocation times not strictly increasing");
    }
}

namespace {

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double x) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    ChannelScale scale() const {
        if (!(hi >= lo)) return {};
        const double half = 0.5 * (hi - lo);
        return {0.5 * (hi + lo), half > 0.0 ? half : 1.0};
    }
};

}  // namespace

Normalization fit_normalization(const std::vector<Trajectory>& trajectories) {
    Range t, y, v, u;
    for (const auto& tr : trajectories) {
        for (const auto& m : tr.measurements) {
            t.add(m.t);
            y.add(m.y);
            if (m.v) v.add(*m.v);
            u.add(m.u);
        }
        for (std::size_t i = 0; i < tr.colloc_t.size(); ++i) {
            t.add(tr.colloc_t[i]);
            u.add(tr.colloc_u[i]);
        }
        y.add(tr.x0.y);
        v.add(tr.x0.v);
    }
    return {t.scale(), y.scale(), v.scale(), u.scale()};
}

json to_json(const Normalization& n) {
    auto ch = [](const ChannelScale& c) { return json{{"offset", c.offset}, {"scale", c.scale}}; };
    return json{{"t", ch(n.t)}, {"y", ch(n.y)}, {"v", ch(n.v)}, {"u", ch(n.u)}};
}

Normalization normalization_from_json(const json& j) {
    auto ch = [&](const char* key) {
        const auto& c = j.at(key);
        return ChannelScale{c.at("offset").get<double>(), c.at("scale").get<double>()};
    };
    return {ch("t"), ch("y"), ch("v"), ch("u")};
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".json");
    return p;
}

namespace {

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::size_t line, const char* column) {
    double out = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(line) + ": bad number in column '" + column + "'");
    return out;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& csv_path) {
    dataset.validate();
    if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
    std::ofstream csv(csv_path);
    if (!csv) throw Error("cannot write " + csv_path.string());
    csv << "traj_id,kind,t,y,v,u\n";
    for (const auto& tr : dataset.trajectories) {
        for (const auto& m : tr.measurements) {
            csv << tr.id << ",m," << format_double(m.t) << ',' << format_double(m.y) << ','
                << (m.v ? format_double(*m.v) : std::string()) << ',' << format_double(m.u) << '\n';
        }
        for (std::size_t i = 0; i < tr.colloc_t.size(); ++i)
            csv << tr.id << ",c," << format_double(tr.colloc_t[i]) << ",,," << format_double(tr.colloc_u[i]) << '\n';
    }

    json side;
    side["split"] = dataset.split;
    side["noise_sigma"] = dataset.noise_sigma;
    side["velocity_measured"] = dataset.velocity_measured;
    side["seed"] = dataset.seed;
    side["dataset_hash"] = dataset.dataset_hash;
    if (!dataset.config_hash.empty()) side["config_hash"] = dataset.config_hash;
    side["system"] = dataset.system;
    side["normalization"] = to_json(dataset.normalization);
    json trs = json::array();
    for (const auto& tr : dataset.trajectories)
        trs.push_back(json{{"id", tr.id}, {"x0", {tr.x0.y, tr.x0.v}}, {"normalization", to_json(dataset.normalization)}});
    side["trajectories"] = trs;
    std::ofstream js(sidecar_path(csv_path));
    if (!js) throw Error("cannot write " + sidecar_path(csv_path).string());
    js << side.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
    std::ifstream js(sidecar_path(csv_path));
    if (!js) throw ParseError("missing dataset sidecar " + sidecar_path(csv_path).string());
    json side;
    try {
        side = json::parse(js);
    } catch (const json::exception& e) {
        throw ParseError(sidecar_path(csv_path).string() + ": " + e.what());
    }

    Dataset ds;
    std::map<int, Trajectory> by_id;
    std::vector<int> order;
    try {
        ds.split = side.at("split").get<std::string>();
        ds.noise_sigma = side.at("noise_sigma").get<double>();
        ds.velocity_measured = side.at("velocity_measured").get<bool>();
        ds.seed = side.at("seed").get<std::uint64_t>();
        ds.dataset_hash = side.at("dataset_hash").get<std::string>();
        ds.config_hash = side.value("config_hash", std::string());
        ds.system = side.value("system", json());
        ds.normalization = normalization_from_json(side.at("normalization"));
        for (const auto& t : side.at("trajectories")) {
            Trajectory tr;
            tr.id = t.at("id").get<int>();
            tr.x0 = {t.at("x0").at(0).get<double>(), t.at("x0").at(1).get<double>()};
            if (t.contains("normalization") && normalization_from_json(t.at("normalization")) != ds.normalization)
                throw ValidationError("mixed normalization: trajectory " + std::to_string(tr.id) +
                                      " differs from the dataset normalization");
            order.push_back(tr.id);
            by_id.emplace(tr.id, std::move(tr));
        }
    } catch (const json::exception& e) {
        throw ParseError(sidecar_path(csv_path).string() + ": " + e.what());
    }

    std::ifstream csv(csv_path);
    if (!csv) throw ParseError("cannot read " + csv_path.string());
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(csv, line)) throw ParseError("line 1: empty dataset file");
    ++lineno;
    const auto header = split_csv(line);
    std::map<std::string, std::size_t, std::less<>> col;
    for (std::size_t i = 0; i < header.size(); ++i) col.emplace(std::string(header[i]), i);
    for (const char* required : {"traj_id", "kind", "t", "y", "v", "u"})
        if (!col.contains(required))
            throw ParseError("line 1: missing column '" + std::string(required) + "'");

    while (std::getline(csv, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != header.size())
            throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(f.size()));
        int id = 0;
        const auto idf = f[col.at("traj_id")];
        if (std::from_chars(idf.data(), idf.data() + idf.size(), id).ec != std::errc())
            throw ParseError("line " + std::to_string(lineno) + ": bad traj_id");
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw ParseError("line " + std::to_string(lineno) + ": trajectory " + std::to_string(id) +
                             " not declared in sidecar");
        Trajectory& tr = it->second;
        const auto kind = f[col.at("kind")];
        const double t = parse_double(f[col.at("t")], lineno, "t");
        const double u = parse_double(f[col.at("u")], lineno, "u");
        if (kind == "m") {
            Measurement m;
            m.t = t;
            m.u = u;
            m.y = parse_double(f[col.at("y")], lineno, "y");
            const auto vf = f[col.at("v")];
            if (!vf.empty()) m.v = parse_double(vf, lineno, "v");
            tr.measurements.push_back(m);
        } else if (kind == "c") {
            tr.colloc_t.push_back(t);
            tr.colloc_u.push_back(u);
        } else {
            throw ParseError("line " + std::to_string(lineno) + ": unknown kind '" + std::string(kind) + "'");
        }
    }
    for (int id : order) ds.trajectories.push_back(std::move(by_id.at(id)));
    ds.validate();
    return ds;
}

}  // namespace solis
