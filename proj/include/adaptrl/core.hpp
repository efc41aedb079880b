#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "adaptrl/errors.hpp"

namespace adaptrl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Deterministic pseudo-randomness
// ---------------------------------------------------------------------------

/// Seed plus stream id; one independent stream per replicate/agent.
/// Identical (seed, stream_id) yields bit-identical draws.
struct RngSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    RngSpec with_stream(std::uint64_t s) const { return {seed, s}; }
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

using Rng = std::mt19937_64;

inline Rng make_rng(const RngSpec& spec) {
    std::uint64_t s = spec.seed;
    std::uint64_t a = detail::splitmix64(s);
    s ^= spec.stream_id * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
    std::uint64_t b = detail::splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return Rng(seq);
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Environment state; dimension 0 encodes the context-free case.
using StateVector = Vector;

/// Action index in [0, K). The signed code maps {0,1} to {-1,+1} for binary
/// problems; it is derived, never stored separately.
struct ActionId {
    int index = 0;

    int signed_code() const { return index == 0 ? -1 : +1; }
    friend bool operator==(const ActionId&, const ActionId&) = default;
};

struct StageRecord {
    StateVector state;
    ActionId action;
    std::optional<double> reward;          // missing rewards stay missing, never 0
    std::optional<double> behavior_prob;   // in (0,1] when present
    bool available = true;
};

struct Trajectory {
    std::vector<StageRecord> stages;
    std::optional<StateVector> terminal_state;  // absent = absorbed / censored end
    bool censored = false;

    std::size_t length() const { return stages.size(); }
};

enum class HorizonKind { Finite, Indefinite };

struct Dataset {
    std::vector<Trajectory> trajectories;
    HorizonKind horizon = HorizonKind::Finite;
    std::vector<int> action_counts;  // actions per stage (Finite) or single entry

    std::size_t size() const { return trajectories.size(); }

    int actions_at(std::size_t t) const {
        if (action_counts.empty()) return 2;
        return action_counts[std::min(t, action_counts.size() - 1)];
    }

    void validate() const {
        for (const auto& traj : trajectories) {
            if (traj.stages.empty()) throw EmptyInput("empty trajectory");
            const auto dim = traj.stages.front().state.size();
            for (const auto& rec : traj.stages) {
                if (rec.state.size() != dim)
                    throw DimensionMismatch("state dimension varies within trajectory");
                if (!rec.state.allFinite()) throw NonFiniteInput("non-finite state");
                if (rec.behavior_prob &&
                    (*rec.behavior_prob <= 0.0 || *rec.behavior_prob > 1.0))
                    throw PositivityViolation("behavior_prob outside (0,1]");
            }
        }
        if (horizon == HorizonKind::Finite && !trajectories.empty()) {
            const auto len = trajectories.front().length();
            for (const auto& traj : trajectories)
                if (traj.length() != len)
                    throw DimensionMismatch("finite-horizon trajectories must share length");
        }
    }
};

// ---------------------------------------------------------------------------
// Feature maps
// ---------------------------------------------------------------------------

enum class FeatureKind { Linear, LinearWithActionInteraction, Polynomial, OneHotActionCross };

/// Pair of history summaries: main-effect block and tailoring block.
struct HistorySummary {
    Vector h0;  // main effect of history
    Vector h1;  // treatment (tailoring) effect of history
};

/// Declarative basis mapping a (history-summary, action) pair to features.
struct FeatureMap {
    FeatureKind kind = FeatureKind::LinearWithActionInteraction;
    std::vector<int> main_columns;       // indices into the state vector
    std::vector<int> tailoring_columns;  // indices into the state vector
    bool include_intercept = true;
    int poly_degree = 2;

    /// Dimension of a combined design row for the given state dimension.
    int output_dim(int state_dim) const {
        return static_cast<int>(main_dim(state_dim) + tailoring_dim(state_dim));
    }

    int main_dim(int state_dim) const {
        int base = main_columns.empty() ? state_dim : static_cast<int>(main_columns.size());
        if (kind == FeatureKind::Polynomial) base *= poly_degree;
        return base + (include_intercept ? 1 : 0);
    }

    int tailoring_dim(int state_dim) const {
        int base = tailoring_columns.empty() ? state_dim
                                             : static_cast<int>(tailoring_columns.size());
        return base + (include_intercept ? 1 : 0);
    }

    HistorySummary summarize(const StateVector& x) const {
        HistorySummary s;
        s.h0 = expand(select(x, main_columns), true);
        s.h1 = expand(select(x, tailoring_columns), false);
        return s;
    }

private:
    Vector select(const StateVector& x, const std::vector<int>& cols) const {
        if (cols.empty()) return x;
        Vector out(cols.size());
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (cols[i] < 0 || cols[i] >= x.size())
                throw IndexOutOfRange("feature column out of range");
            out[static_cast<Eigen::Index>(i)] = x[cols[i]];
        }
        return out;
    }

    Vector expand(const Vector& base, bool main_block) const {
        const bool poly = main_block && kind == FeatureKind::Polynomial;
        const int reps = poly ? poly_degree : 1;
        const int off = include_intercept ? 1 : 0;
        Vector out(off + base.size() * reps);
        if (include_intercept) out[0] = 1.0;
        for (int r = 0; r < reps; ++r)
            for (Eigen::Index j = 0; j < base.size(); ++j)
                out[off + r * base.size() + j] = std::pow(base[j], r + 1);
        return out;
    }
};

/// Per-stage feature maps; a single map is reused across stages, otherwise
/// the last map is reused past the end (mirrors terminal-stage conventions).
struct StageMaps {
    std::vector<FeatureMap> maps;

    StageMaps() : maps{FeatureMap{}} {}
    StageMaps(FeatureMap m) : maps{std::move(m)} {}  // NOLINT(google-explicit-constructor)
    StageMaps(std::vector<FeatureMap> v) : maps(std::move(v)) {  // NOLINT
        if (maps.empty()) maps.push_back(FeatureMap{});
    }

    const FeatureMap& at(std::size_t t) const { return maps[std::min(t, maps.size() - 1)]; }
};

/// Design row (H_t0, H_t1 * a) for the linear-with-interaction Q model.
inline Vector design_row(const HistorySummary& s, const ActionId& a) {
    Vector row(s.h0.size() + s.h1.size());
    row << s.h0, s.h1 * static_cast<double>(a.index);
    return row;
}

/// One-hot action cross features f(x, a) for bandit agents: the state block
/// is placed in the slot of arm a, so arms share no coefficients.
inline Vector action_cross_features(const StateVector& x, const ActionId& a, int K,
                                    bool include_intercept = true) {
    const int block = static_cast<int>(x.size()) + (include_intercept ? 1 : 0);
    Vector out = Vector::Zero(static_cast<Eigen::Index>(block) * K);
    if (a.index < 0 || a.index >= K) throw IndexOutOfRange("arm index out of range");
    int off = block * a.index;
    if (include_intercept) out[off++] = 1.0;
    out.segment(off, x.size()) = x;
    return out;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline int argmax_tiebreak(const std::vector<double>& scores) {
    if (scores.empty()) throw EmptyInput("argmax of empty score list");
    int best = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw NonFiniteInput("non-finite score");
        if (scores[i] > scores[best]) best = static_cast<int>(i);
    }
    return best;
}

inline int argmax_tiebreak(const Vector& scores) {
    return argmax_tiebreak(std::vector<double>(scores.data(), scores.data() + scores.size()));
}

inline double discounted_return(const std::vector<double>& rewards, double gamma,
                                HorizonKind horizon = HorizonKind::Finite) {
    if (horizon == HorizonKind::Indefinite && gamma >= 1.0)
        throw DivergentReturn("gamma = 1 on an indefinite stream");
    double sum = 0.0, g = 1.0;
    for (double r : rewards) {
        if (!std::isfinite(r)) throw NonFiniteInput("non-finite reward");
        sum += g * r;
        g *= gamma;
    }
    return sum;
}

/// History summary at stage t; uses only records with index <= t.
inline HistorySummary history_summary(const Trajectory& traj, std::size_t t,
                                      const FeatureMap& map) {
    if (t >= traj.stages.size()) throw StageOutOfRange("stage index past trajectory end");
    return map.summarize(traj.stages[t].state);
}

// ---------------------------------------------------------------------------
// Regimes / policies
// ---------------------------------------------------------------------------

/// Per-action linear scores with lowest-index tie-breaking.  For binary
/// problems an optional soft-threshold is applied to the action-1 contrast.
struct DeterministicRule {
    Matrix theta;  // K x d, score_a = theta.row(a) . phi
    double threshold = 0.0;

    Vector scores(const Vector& phi) const {
        if (theta.cols() != phi.size())
            throw DimensionMismatch("rule/feature dimension mismatch");
        Vector s = theta * phi;
        if (threshold > 0.0 && s.size() == 2) {
            double c = s[1] - s[0];
            double shrunk = (c > 0 ? 1.0 : (c < 0 ? -1.0 : 0.0)) *
                            std::max(std::abs(c) - threshold, 0.0);
            s[1] = s[0] + shrunk;
        }
        return s;
    }
};

struct SoftmaxRule {
    Matrix theta;  // K x d
    double temperature = 1.0;

    Vector probs(const Vector& phi) const {
        Vector s = theta * phi / temperature;
        double m = s.maxCoeff();
        Vector e = (s.array() - m).exp();
        return e / e.sum();
    }
};

struct DecisionRule;

/// Clipped stochastic rule: the probability of the designated action (index 1
/// by convention) is clamped into [pi_min, pi_max].
struct ClippedRule {
    std::shared_ptr<DecisionRule> base;
    double pi_min = 0.1;
    double pi_max = 0.9;
};

struct DecisionRule {
    std::variant<DeterministicRule, SoftmaxRule, ClippedRule> rule;
};

inline Vector rule_probs(const DecisionRule& r, const Vector& phi, int K);

inline Vector rule_probs_impl(const DeterministicRule& r, const Vector& phi, int K) {
    Vector p = Vector::Zero(K);
    p[argmax_tiebreak(r.scores(phi))] = 1.0;
    return p;
}

inline Vector rule_probs_impl(const SoftmaxRule& r, const Vector& phi, int /*K*/) {
    return r.probs(phi);
}

inline Vector rule_probs_impl(const ClippedRule& r, const Vector& phi, int K) {
    if (K != 2) throw NotBinaryAction("clipped rules require binary actions");
    Vector p = rule_probs(*r.base, phi, K);
    p[1] = std::clamp(p[1], r.pi_min, r.pi_max);
    p[0] = 1.0 - p[1];
    return p;
}

inline Vector rule_probs(const DecisionRule& r, const Vector& phi, int K) {
    return std::visit([&](const auto& v) { return rule_probs_impl(v, phi, K); }, r.rule);
}

/// Per-stage decision rules over the stacked (H_t0, H_t1) summary.
struct Regime {
    std::vector<DecisionRule> rules;  // one per stage; last rule reused past the end
    StageMaps maps;

    const DecisionRule& rule_at(std::size_t t) const {
        if (rules.empty()) throw EmptyInput("regime has no rules");
        return rules[std::min(t, rules.size() - 1)];
    }

    const FeatureMap& map_at(std::size_t t) const { return maps.at(t); }

    Vector action_probs(std::size_t t, const HistorySummary& s, int K) const {
        Vector phi(s.h0.size() + s.h1.size());
        phi << s.h0, s.h1;
        return rule_probs(rule_at(t), phi, K);
    }

    Vector action_probs(std::size_t t, const StateVector& x, int K) const {
        return action_probs(t, map_at(t).summarize(x), K);
    }

    ActionId decide(std::size_t t, const HistorySummary& s, int K) const {
        return ActionId{argmax_tiebreak(action_probs(t, s, K))};
    }

    ActionId decide(std::size_t t, const StateVector& x, int K) const {
        return decide(t, map_at(t).summarize(x), K);
    }

    ActionId sample(std::size_t t, const StateVector& x, int K, Rng& rng) const {
        Vector p = action_probs(t, x, K);
        std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
        return ActionId{dist(rng)};
    }
};

inline double policy_prob(const Regime& regime, std::size_t t, const HistorySummary& s,
                          const ActionId& a, int K) {
    if (a.index < 0 || a.index >= K) throw IndexOutOfRange("action outside stage space");
    return regime.action_probs(t, s, K)[a.index];
}

}  // namespace adaptrl
