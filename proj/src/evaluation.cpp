#include "solis/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace solis {

using nlohmann::json;

AccuracyScore accuracy(std::span<const double> pred, std::span<const double> truth, std::string channel,
                       int trajectory) {
    if (pred.size() != truth.size()) throw UsageError("accuracy: prediction and truth lengths differ");
    if (truth.size() < 2) throw UsageError("accuracy needs at least two samples");
    const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
    const double ptp = *hi - *lo;
    if (!(ptp > 0.0)) throw DomainError("accuracy undefined: true signal is flat");
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sq += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    AccuracyScore s;
    s.nrmse = std::sqrt(sq / static_cast<double>(truth.size())) / ptp;
    s.accuracy = (1.0 - s.nrmse) * 100.0;
    s.channel = std::move(channel);
    s.trajectory = trajectory;
    return s;
}

State PortraitGrid::center(std::size_t index) const {
    const std::size_t iy = index % ny;
    const std::size_t iv = index / ny;
    return {y_min + (static_cast<double>(iy) + 0.5) * (y_max - y_min) / static_cast<double>(ny),
            v_min + (static_cast<double>(iv) + 0.5) * (v_max - v_min) / static_cast<double>(nv)};
}

namespace {

std::vector<State> measured_states(const Trajectory& tr) {
    std::vector<State> out;
    for (const auto& m : tr.measurements)
        if (m.v) out.push_back({m.y, *m.v});
    return out;
}

}  // namespace

PortraitGrid portrait_grid(const Dataset& train, std::size_t resolution, double inflate) {
    double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo, vlo = ylo, vhi = -ylo;
    for (const auto& tr : train.trajectories) {
        auto add = [&](double y, double v) {
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
            vlo = std::min(vlo, v);
            vhi = std::max(vhi, v);
        };
        add(tr.x0.y, tr.x0.v);
        for (const auto& s : measured_states(tr)) add(s.y, s.v);
    }
    if (!(yhi > ylo) || !(vhi > vlo)) throw UsageError("portrait grid: training states span no area");
    const double py = 0.5 * inflate * (yhi - ylo);
    const double pv = 0.5 * inflate * (vhi - vlo);
    return {ylo - py, yhi + py, vlo - pv, vhi + pv, resolution, resolution};
}

std::vector<char> near_data_mask(const PortraitGrid& grid, const Dataset& train, double radius_cells) {
    std::vector<char> mask(grid.size(), 0);
    const double sy = static_cast<double>(grid.ny) / (grid.y_max - grid.y_min);
    const double sv = static_cast<double>(grid.nv) / (grid.v_max - grid.v_min);
    auto to_cells = [&](const State& s) { return State{(s.y - grid.y_min) * sy, (s.v - grid.v_min) * sv}; };
    std::vector<std::pair<State, State>> segments;
    for (const auto& tr : train.trajectories) {
        auto pts = measured_states(tr);
        if (pts.empty()) continue;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) segments.emplace_back(to_cells(pts[i]), to_cells(pts[i + 1]));
        segments.emplace_back(to_cells(pts.back()), to_cells(pts.back()));
    }
    if (segments.empty()) {
        std::fill(mask.begin(), mask.end(), 1);
        return mask;
    }
    const double r2 = radius_cells * radius_cells;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const State c = to_cells(grid.center(i));
        for (const auto& [a, b] : segments) {
            const double dy = b.y - a.y, dv = b.v - a.v;
            const double len2 = dy * dy + dv * dv;
            double s = len2 > 0.0 ? ((c.y - a.y) * dy + (c.v - a.v) * dv) / len2 : 0.0;
            s = std::clamp(s, 0.0, 1.0);
            const double ey = a.y + s * dy - c.y, ev = a.v + s * dv - c.v;
            if (ey * ey + ev * ev <= r2) {
                mask[i] = 1;
                break;
            }
        }
    }
    return mask;
}

SimilarityMap cosine_similarity_map(std::span<const FieldSample> surrogate, std::span<const FieldSample> truth,
                                    const PortraitGrid& grid, std::vector<char> mask) {
    if (surrogate.size() != truth.size() || truth.size() != grid.size())
        throw UsageError("similarity map: field samples do not match the grid");
    if (!mask.empty() && mask.size() != grid.size()) throw UsageError("similarity map: mask size mismatch");
    SimilarityMap m;
    m.grid = grid;
    m.mask = std::move(mask);
    m.cosine.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0, msum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& a = surrogate[i];
        const auto& b = truth[i];
        const double na = std::hypot(a.fy, a.fv);
        const double nb = std::hypot(b.fy, b.fv);
        if (na < kDegenerateNorm || nb < kDegenerateNorm || !std::isfinite(na) || !std::isfinite(nb)) continue;
        const double c = std::clamp((a.fy * b.fy + a.fv * b.fv) / (na * nb), -1.0, 1.0);
        m.cosine[i] = c;
        sum += c;
        ++m.valid;
        if (!m.mask.empty() && m.mask[i]) {
            msum += c;
            ++m.masked_valid;
        }
    }
    if (m.valid == 0) throw UsageError("similarity map: every cell is degenerate");
    m.average = sum / static_cast<double>(m.valid);
    m.masked_average = m.masked_valid > 0 ? msum / static_cast<double>(m.masked_valid) : m.average;
    return m;
}

SurrogateCoefficients model_coefficients(const Model& model, std::span<const double> param, const State& x,
                                         double u) {
    return model.param.forward<double, double>(param, x.y, x.v, u);
}

json to_json(const ScoreTable& t) {
    json trs = json::array();
    for (const auto& tr : t.trajectories) {
        json ch = json::object();
        for (const auto& c : tr.channels) ch[c.channel] = json{{"accuracy", c.accuracy}, {"nrmse", c.nrmse}};
        trs.push_back(json{{"trajectory", tr.trajectory},
                           {"accuracy", tr.accuracy},
                           {"diverged", tr.diverged},
                           {"channels", ch}});
    }
    return json{{"mean_accuracy", t.mean_accuracy}, {"trajectories", trs}};
}

namespace {

bool in_scope(const Model& model, const Trajectory& tr) {
    return model.mode != TrainMode::Ipinn || model.trajectory == tr.id;
}

TrajectoryScores score_channels(int id, const std::vector<Measurement>& ms, const std::vector<State>& pred,
                                bool use_v) {
    TrajectoryScores s;
    s.trajectory = id;
    std::vector<double> py, ty, pv, tv;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        py.push_back(pred[i].y);
        ty.push_back(ms[i].y);
        if (use_v && ms[i].v) {
            pv.push_back(pred[i].v);
            tv.push_back(*ms[i].v);
        }
    }
    s.channels.push_back(accuracy(py, ty, "y", id));
    if (!tv.empty() && tv.size() == ms.size()) s.channels.push_back(accuracy(pv, tv, "v", id));
    double sum = 0.0;
    for (const auto& c : s.channels) sum += c.accuracy;
    s.accuracy = sum / static_cast<double>(s.channels.size());
    return s;
}

void finish(ScoreTable& t) {
    if (t.trajectories.empty()) throw UsageError("no trajectory was scored");
    double sum = 0.0;
    for (const auto& tr : t.trajectories) sum += tr.accuracy;
    t.mean_accuracy = sum / static_cast<double>(t.trajectories.size());
}

}  // namespace

ScoreTable reconstruction_accuracy(const Model& model, std::span<const double> sol, const Dataset& data) {
    ScoreTable table;
    for (const auto& tr : data.trajectories) {
        if (!in_scope(model, tr)) continue;
        std::vector<double> ctx;
        if (model.sol.spec().use_context) ctx = model.sol.context_sequence(tr);
        const auto film = model.sol.conditioning<double>(sol, ctx);
        std::vector<State> pred;
        for (const auto& m : tr.measurements) pred.push_back(model.sol.forward<double, double>(sol, film, m.t));
        table.trajectories.push_back(score_channels(tr.id, tr.measurements, pred, data.velocity_measured));
    }
    finish(table);
    return table;
}

ScoreTable evaluate_rollout(const Model& model, std::span<const double> param, const Dataset& data,
                            std::vector<RolloutTrace>* traces, double blow_up) {
    return evaluate_rollout([&](const State& x, double u) { return model_coefficients(model, param, x, u); },
                            data, traces, blow_up);
}

ScoreTable evaluate_rollout(const CoefficientField& net, const Dataset& data, std::vector<RolloutTrace>* traces,
                            double blow_up) {
    ScoreTable table;
    for (const auto& tr : data.trajectories) {
        std::vector<double> grid(tr.colloc_t);
        for (const auto& m : tr.measurements) grid.push_back(m.t);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        const InputSignal input = tr.input();

        RolloutTrace trace;
        trace.trajectory = tr.id;
        for (const auto& m : tr.measurements) {
            trace.t.push_back(m.t);
            trace.u.push_back(m.u);
        }
        // The rollout starts at the first grid time from the stored x0.
        std::vector<State> states;
        try {
            states = rollout(net, tr.x0, input, grid, blow_up);
        } catch (const IntegrationError&) {
            trace.diverged = true;
        } catch (const DomainError&) {
            trace.diverged = true;
        }
        TrajectoryScores s;
        if (trace.diverged) {
            s.trajectory = tr.id;
            s.diverged = true;
            s.accuracy = 0.0;
            s.channels.push_back({std::numeric_limits<double>::infinity(), 0.0, "y", tr.id});
            if (data.velocity_measured)
                s.channels.push_back({std::numeric_limits<double>::infinity(), 0.0, "v", tr.id});
        } else {
            for (const auto& m : tr.measurements) {
                const auto it = std::lower_bound(grid.begin(), grid.end(), m.t);
                trace.predicted.push_back(states[static_cast<std::size_t>(it - grid.begin())]);
            }
            s = score_channels(tr.id, tr.measurements, trace.predicted, data.velocity_measured);
        }
        table.trajectories.push_back(std::move(s));
        if (traces) traces->push_back(std::move(trace));
    }
    finish(table);
    return table;
}

PortraitReport evaluate_portrait(const Model& model, std::span<const double> param, const Dataset& train,
                                 const SystemSpec& truth, std::size_t resolution) {
    PortraitReport r;
    const PortraitGrid grid = portrait_grid(train, resolution);
    r.surrogate = phase_portrait(
        [&](const State& x) { return surrogate_rhs(x, 0.0, model_coefficients(model, param, x, 0.0)); }, grid);
    r.truth = phase_portrait([&](const State& x) { return true_output_field(truth, x, 0.0); }, grid);
    r.map = cosine_similarity_map(r.surrogate, r.truth, grid, near_data_mask(grid, train));
    return r;
}

std::vector<CanonicalRow> canonical_report(const Model& model, std::span<const double> sol,
                                           std::span<const double> param, const Dataset& data) {
    std::vector<CanonicalRow> rows;
    for (const auto& tr : data.trajectories) {
        std::vector<double> ctx;
        if (model.sol.spec().use_context) ctx = model.sol.context_sequence(tr);
        const auto film = model.sol.conditioning<double>(sol, ctx);
        for (const auto& m : tr.measurements) {
            CanonicalRow row;
            row.trajectory = tr.id;
            row.t = m.t;
            row.y = m.y;
            row.v = m.v ? *m.v : model.sol.forward<double, double>(sol, film, m.t).v;
            row.u = m.u;
            row.theta = model_coefficients(model, param, {row.y, row.v}, m.u);
            row.valid = row.theta.k > 0.0;
            if (row.valid) row.canonical = canonical_params(row.theta);
            rows.push_back(row);
        }
    }
    return rows;
}

void write_portrait_csv(const std::filesystem::path& path, const PortraitReport& r) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "y,v,fy_hat,fv_hat,fy_true,fv_true,cos,near_data\n";
    for (std::size_t i = 0; i < r.surrogate.size(); ++i) {
        const auto& a = r.surrogate[i];
        const auto& b = r.truth[i];
        out << a.y << ',' << a.v << ',' << a.fy << ',' << a.fv << ',' << b.fy << ',' << b.fv << ',';
        if (std::isfinite(r.map.cosine[i])) out << r.map.cosine[i];
        out << ',' << (r.map.mask.empty() ? 0 : static_cast<int>(r.map.mask[i])) << '\n';
    }
}

void write_rollout_csv(const std::filesystem::path& path, const RolloutTrace& trace) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "t,y,v,u\n";
    for (std::size_t i = 0; i < trace.predicted.size(); ++i)
        out << trace.t[i] << ',' << trace.predicted[i].y << ',' << trace.predicted[i].v << ',' << trace.u[i] << '\n';
}

void write_canonical_csv(const std::filesystem::path& path, std::span<const CanonicalRow> rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "trajectory,t,y,v,u,k,d,g,omega_n,zeta,K,valid\n";
    for (const auto& r : rows) {
        out << r.trajectory << ',' << r.t << ',' << r.y << ',' << r.v << ',' << r.u << ',' << r.theta.k << ','
            << r.theta.d << ',' << r.theta.g << ',';
        if (r.valid)
            out << r.canonical.omega_n << ',' << r.canonical.zeta << ',' << r.canonical.gain;
        else
            out << ",,";
        out << ',' << (r.valid ? "true" : "false") << '\n';
    }
}

}  // namespace solis
