#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adaptrl/core.hpp"
#include "adaptrl/eval.hpp"

namespace adaptrl {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

namespace detail {

/// Shortest round-trippable decimal; fixed format keeps reruns byte-identical.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = std::strtod(buf, nullptr);
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[64];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == back) return shorter;
    }
    return buf;
}

inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cell);
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    out.push_back(cell);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset CSV
// ---------------------------------------------------------------------------

/// One row per stage: traj_id, t, state_0..state_{p-1}, action, reward
/// (empty = missing), behavior_prob (empty = unknown), available. Comment
/// lines starting with '#' may precede the mandatory header.
inline void write_dataset_csv(std::ostream& os, const Dataset& data,
                              const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << "\n";
    const Eigen::Index p =
        data.trajectories.empty() ? 0 : data.trajectories.front().stages.front().state.size();
    os << "traj_id,t";
    for (Eigen::Index j = 0; j < p; ++j) os << ",state_" << j;
    os << ",action,reward,behavior_prob,available\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& traj = data.trajectories[i];
        for (std::size_t t = 0; t < traj.length(); ++t) {
            const auto& rec = traj.stages[t];
            os << i << "," << t;
            for (Eigen::Index j = 0; j < p; ++j)
                os << "," << detail::format_double(rec.state[j]);
            os << "," << rec.action.index << ",";
            if (rec.reward) os << detail::format_double(*rec.reward);
            os << ",";
            if (rec.behavior_prob) os << detail::format_double(*rec.behavior_prob);
            os << "," << (rec.available ? 1 : 0) << "\n";
        }
    }
}

inline void write_dataset_csv(const std::string& path, const Dataset& data,
                              const std::vector<std::string>& comments = {}) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open for writing: " + path);
    write_dataset_csv(os, data, comments);
}

inline Dataset read_dataset_csv(std::istream& is) {
    std::string line;
    // skip comments, then the header
    while (std::getline(is, line) && !line.empty() && line[0] == '#') {
    }
    if (line.empty() || line.rfind("traj_id,t", 0) != 0)
        throw ConfigInvalid("dataset CSV: missing header row");
    const auto header = detail::split_csv_line(line);
    int p = 0;
    for (const auto& h : header)
        if (h.rfind("state_", 0) == 0) ++p;
    const std::size_t ncols = header.size();

    Dataset data;
    std::vector<std::pair<long, StageRecord>> rows;  // (traj_id, record)
    long row_no = 1;
    while (std::getline(is, line)) {
        ++row_no;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != ncols)
            throw ConfigInvalid("dataset CSV row " + std::to_string(row_no) +
                                ": wrong column count");
        StageRecord rec;
        rec.state = Vector(p);
        for (int j = 0; j < p; ++j) rec.state[j] = std::stod(cells[2 + j]);
        rec.action = ActionId{std::stoi(cells[2 + p])};
        if (!cells[3 + p].empty()) rec.reward = std::stod(cells[3 + p]);
        if (!cells[4 + p].empty()) rec.behavior_prob = std::stod(cells[4 + p]);
        rec.available = cells[5 + p] != "0";
        rows.emplace_back(std::stol(cells[0]), std::move(rec));
    }
    long current = -1;
    for (auto& [tid, rec] : rows) {
        if (tid != current) {
            data.trajectories.emplace_back();
            current = tid;
        }
        data.trajectories.back().stages.push_back(std::move(rec));
    }
    return data;
}

inline Dataset read_dataset_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open for reading: " + path);
    return read_dataset_csv(is);
}

// ---------------------------------------------------------------------------
// Regime JSON
// ---------------------------------------------------------------------------

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j) {
    const auto rows = j.size();
    const auto cols = rows == 0 ? 0 : j.at(0).size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = 0; k < cols; ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                j.at(i).at(k).get<double>();
    return m;
}

inline std::string feature_kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::Linear: return "linear";
        case FeatureKind::LinearWithActionInteraction: return "linear_with_action_interaction";
        case FeatureKind::Polynomial: return "polynomial";
        case FeatureKind::OneHotActionCross: return "one_hot_action_cross";
    }
    throw Error("unknown feature kind");
}

inline FeatureKind feature_kind_from_name(const std::string& s) {
    if (s == "linear") return FeatureKind::Linear;
    if (s == "linear_with_action_interaction")
        return FeatureKind::LinearWithActionInteraction;
    if (s == "polynomial") return FeatureKind::Polynomial;
    if (s == "one_hot_action_cross") return FeatureKind::OneHotActionCross;
    throw ConfigInvalid("unknown feature map kind: " + s);
}

inline Json feature_map_to_json(const FeatureMap& m) {
    return Json{{"kind", feature_kind_name(m.kind)},
                {"main_columns", m.main_columns},
                {"tailoring_columns", m.tailoring_columns},
                {"include_intercept", m.include_intercept},
                {"poly_degree", m.poly_degree}};
}

inline FeatureMap feature_map_from_json(const Json& j) {
    FeatureMap m;
    m.kind = feature_kind_from_name(j.at("kind").get<std::string>());
    m.main_columns = j.at("main_columns").get<std::vector<int>>();
    m.tailoring_columns = j.at("tailoring_columns").get<std::vector<int>>();
    m.include_intercept = j.at("include_intercept").get<bool>();
    m.poly_degree = j.at("poly_degree").get<int>();
    return m;
}

inline Json rule_to_json(const DecisionRule& r, const FeatureMap& map);

inline Json rule_to_json_impl(const DeterministicRule& r, const FeatureMap& map) {
    return Json{{"kind", "deterministic"},
                {"theta", matrix_to_json(r.theta)},
                {"threshold", r.threshold},
                {"feature_map", feature_map_to_json(map)}};
}

inline Json rule_to_json_impl(const SoftmaxRule& r, const FeatureMap& map) {
    return Json{{"kind", "softmax"},
                {"theta", matrix_to_json(r.theta)},
                {"temperature", r.temperature},
                {"feature_map", feature_map_to_json(map)}};
}

inline Json rule_to_json_impl(const ClippedRule& r, const FeatureMap& map) {
    return Json{{"kind", "clipped"},
                {"pi_min", r.pi_min},
                {"pi_max", r.pi_max},
                {"base", rule_to_json(*r.base, map)},
                {"feature_map", feature_map_to_json(map)}};
}

inline Json rule_to_json(const DecisionRule& r, const FeatureMap& map) {
    return std::visit([&](const auto& v) { return rule_to_json_impl(v, map); }, r.rule);
}

inline DecisionRule rule_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "deterministic") {
        DeterministicRule r;
        r.theta = matrix_from_json(j.at("theta"));
        r.threshold = j.at("threshold").get<double>();
        return DecisionRule{r};
    }
    if (kind == "softmax") {
        SoftmaxRule r;
        r.theta = matrix_from_json(j.at("theta"));
        r.temperature = j.at("temperature").get<double>();
        return DecisionRule{r};
    }
    if (kind == "clipped") {
        ClippedRule r;
        r.pi_min = j.at("pi_min").get<double>();
        r.pi_max = j.at("pi_max").get<double>();
        r.base = std::make_shared<DecisionRule>(rule_from_json(j.at("base")));
        return DecisionRule{r};
    }
    throw ConfigInvalid("unknown rule kind: " + kind);
}

}  // namespace detail

struct RegimeProvenance {
    std::uint64_t seed = 0;
    std::string method;
    Json hyperparams = Json::object();
};

inline Json regime_to_json(const Regime& regime, const RegimeProvenance& prov) {
    Json stages = Json::array();
    for (std::size_t t = 0; t < regime.rules.size(); ++t)
        stages.push_back(detail::rule_to_json(regime.rules[t], regime.map_at(t)));
    return Json{{"stages", stages},
                {"provenance", Json{{"seed", prov.seed},
                                    {"method", prov.method},
                                    {"hyperparams", prov.hyperparams}}}};
}

inline Regime regime_from_json(const Json& j) {
    Regime regime;
    std::vector<FeatureMap> maps;
    for (const auto& stage : j.at("stages")) {
        regime.rules.push_back(detail::rule_from_json(stage));
        maps.push_back(detail::feature_map_from_json(stage.at("feature_map")));
    }
    regime.maps = StageMaps{maps};
    return regime;
}

// ---------------------------------------------------------------------------
// Interaction log CSV
// ---------------------------------------------------------------------------

struct InteractionRecord {
    int t = 0;
    std::vector<Vector> arm_features;
    int action = 0;
    Vector selection_probs;
    std::optional<double> reward;
    bool available = true;
};

/// Columns: t, features (per-arm vectors, JSON), arm, selection_probs (full
/// distribution, JSON), reward (empty = missing), available.
inline void write_interaction_log(std::ostream& os,
                                  const std::vector<InteractionRecord>& log,
                                  const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << "\n";
    os << "t,features,arm,selection_probs,reward,available\n";
    for (const auto& rec : log) {
        Json feats = Json::array();
        for (const auto& f : rec.arm_features) {
            Json arm = Json::array();
            for (Eigen::Index j = 0; j < f.size(); ++j) arm.push_back(f[j]);
            feats.push_back(arm);
        }
        Json probs = Json::array();
        for (Eigen::Index j = 0; j < rec.selection_probs.size(); ++j)
            probs.push_back(rec.selection_probs[j]);
        os << rec.t << ",\"" << feats.dump() << "\"," << rec.action << ",\"" << probs.dump()
           << "\",";
        if (rec.reward) os << detail::format_double(*rec.reward);
        os << "," << (rec.available ? 1 : 0) << "\n";
    }
}

inline std::vector<InteractionRecord> read_interaction_log(std::istream& is) {
    std::string line;
    while (std::getline(is, line) && !line.empty() && line[0] == '#') {
    }
    if (line.rfind("t,features", 0) != 0)
        throw ConfigInvalid("interaction log: missing header row");
    std::vector<InteractionRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 6) throw ConfigInvalid("interaction log: wrong column count");
        InteractionRecord rec;
        rec.t = std::stoi(cells[0]);
        for (const auto& arm : Json::parse(cells[1])) {
            Vector f(arm.size());
            for (std::size_t j = 0; j < arm.size(); ++j)
                f[static_cast<Eigen::Index>(j)] = arm.at(j).get<double>();
            rec.arm_features.push_back(std::move(f));
        }
        rec.action = std::stoi(cells[2]);
        Json probs = Json::parse(cells[3]);
        rec.selection_probs = Vector(probs.size());
        for (std::size_t j = 0; j < probs.size(); ++j)
            rec.selection_probs[static_cast<Eigen::Index>(j)] = probs.at(j).get<double>();
        if (!cells[4].empty()) rec.reward = std::stod(cells[4]);
        rec.available = cells[5] != "0";
        out.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline Json report_to_json(const ExperimentReport& report) {
    Json metrics = Json::object();
    for (const auto& [k, v] : report.metrics) metrics[k] = v;
    return Json{{"config_hash", detail::hash_hex(report.config_hash)},
                {"config", report.config_echo},
                {"seeds", report.seeds},
                {"metrics", metrics}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open for writing: " + path);
    os << content;
}

/// Per-seed regret CSV: one row per (seed, step) sample on a thinned grid.
inline void write_regret_csv(std::ostream& os, const RegretCurve& curve, int stride,
                             const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << "\n";
    os << "seed,t,cumulative_regret\n";
    const Eigen::Index T = curve.per_seed.cols();
    for (Eigen::Index s = 0; s < curve.per_seed.rows(); ++s)
        for (Eigen::Index t = stride - 1; t < T; t += stride)
            os << curve.seeds[static_cast<std::size_t>(s)] << "," << t + 1 << ","
               << detail::format_double(curve.per_seed(s, t)) << "\n";
}

}  // namespace adaptrl
