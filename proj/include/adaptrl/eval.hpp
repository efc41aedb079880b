#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "adaptrl/bandits.hpp"
#include "adaptrl/core.hpp"
#include "adaptrl/envs.hpp"
#include "adaptrl/offline_dtr.hpp"

namespace adaptrl {

namespace detail {

/// Runs fn(i) for i in [0, n) on up to n_threads workers. Each index writes
/// only its own output slot, so the aggregation stays deterministic.
inline void parallel_for(std::size_t n, int n_threads, const std::function<void(std::size_t)>& fn) {
    if (n_threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::size_t chunk = (n + n_threads - 1) / static_cast<std::size_t>(n_threads);
    for (int w = 0; w < n_threads; ++w) {
        std::size_t lo = static_cast<std::size_t>(w) * chunk, hi = std::min(lo + chunk, n);
        if (lo >= hi) break;
        workers.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : workers) t.join();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Online bandit agent handle
// ---------------------------------------------------------------------------

/// Type-erased sequential agent: step sees the current arm features, absorb
/// feeds back the realized reward. A factory builds a fresh agent per seed.
struct BanditAgent {
    std::function<StepResult(const ArmFeatures&, int t, Rng&)> step;
    std::function<void(const ArmFeatures&, const StepResult&, double reward, Rng&)> absorb;
    std::string label;
};

using BanditAgentFactory = std::function<BanditAgent()>;

inline BanditAgentFactory linucb_factory(int d, double alpha, double lambda = 1.0) {
    return [=]() {
        auto agent = std::make_shared<LinUcbAgent>(d, alpha, lambda);
        BanditAgent h;
        h.label = "linucb";
        h.step = [agent](const ArmFeatures& arms, int, Rng& rng) { return agent->step(arms, rng); };
        h.absorb = [agent](const ArmFeatures& arms, const StepResult& r, double y, Rng&) {
            agent->absorb(arms, r.action, y);
        };
        return h;
    };
}

inline BanditAgentFactory lints_factory(int d, double nu, double lambda = 1.0) {
    return [=]() {
        auto agent = std::make_shared<LinTsAgent>(d, nu, lambda);
        BanditAgent h;
        h.label = "lints";
        h.step = [agent](const ArmFeatures& arms, int, Rng& rng) { return agent->step(arms, rng); };
        h.absorb = [agent](const ArmFeatures& arms, const StepResult& r, double y, Rng&) {
            agent->absorb(arms, r.action, y);
        };
        return h;
    };
}

inline BanditAgentFactory bts_factory(int d, int replicates, double lambda = 1.0) {
    return [=]() {
        auto agent = std::make_shared<BtsAgent>(d, replicates, lambda);
        BanditAgent h;
        h.label = "bts";
        h.step = [agent](const ArmFeatures& arms, int, Rng& rng) { return agent->step(arms, rng); };
        h.absorb = [agent](const ArmFeatures& arms, const StepResult& r, double y, Rng& rng) {
            agent->absorb(arms, r.action, y, rng);
        };
        return h;
    };
}

inline BanditAgentFactory acts_factory(int d, const ActsOptions& opt = {}) {
    return [=]() {
        auto agent = std::make_shared<ActsAgent>(d, opt);
        BanditAgent h;
        h.label = "acts";
        h.step = [agent](const ArmFeatures& arms, int, Rng& rng) { return agent->step(arms, rng); };
        h.absorb = [agent](const ArmFeatures& arms, const StepResult& r, double y, Rng&) {
            agent->absorb(arms, r, y);
        };
        return h;
    };
}

inline BanditAgentFactory uniform_random_factory() {
    return []() {
        BanditAgent h;
        h.label = "uniform";
        h.step = [](const ArmFeatures& arms, int, Rng& rng) {
            arms.check();
            std::vector<int> avail;
            for (int a = 0; a < arms.arms(); ++a)
                if (arms.is_available(a)) avail.push_back(a);
            std::uniform_int_distribution<std::size_t> pick(0, avail.size() - 1);
            StepResult r;
            r.action = ActionId{avail[pick(rng)]};
            r.selection_probs = Vector::Zero(arms.arms());
            for (int a : avail)
                r.selection_probs[a] = 1.0 / static_cast<double>(avail.size());
            return r;
        };
        h.absorb = [](const ArmFeatures&, const StepResult&, double, Rng&) {};
        return h;
    };
}

/// Plays argmax of the environment's true mean effects; its regret is zero.
inline BanditAgentFactory oracle_factory(const BanditEnvSpec& spec) {
    Vector eff = spec.effect_vector();
    int control = spec.control_arm;
    return [eff, control]() {
        BanditAgent h;
        h.label = "oracle";
        h.step = [eff, control](const ArmFeatures& arms, int, Rng&) {
            arms.check();
            Vector scores(arms.arms());
            for (int a = 0; a < arms.arms(); ++a)
                scores[a] = a == control ? 0.0 : arms.f[a].dot(eff);
            StepResult r;
            r.action = ActionId{detail::masked_argmax(scores, arms)};
            r.selection_probs = Vector::Zero(arms.arms());
            r.selection_probs[r.action.index] = 1.0;
            return r;
        };
        h.absorb = [](const ArmFeatures&, const StepResult&, double, Rng&) {};
        return h;
    };
}

inline BanditAgentFactory epsilon_greedy_factory(int d, double epsilon, double lambda = 1.0) {
    return [=]() {
        auto stats = std::make_shared<SuffStats>(d, lambda);
        BanditAgent h;
        h.label = "epsilon-greedy";
        h.step = [stats, epsilon](const ArmFeatures& arms, int, Rng& rng) {
            arms.check();
            Vector mu = stats->solve();
            Vector scores(arms.arms());
            for (int a = 0; a < arms.arms(); ++a) scores[a] = arms.f[a].dot(mu);
            BaselineStep b = epsilon_greedy_step(scores, epsilon, rng);
            StepResult r;
            r.action = b.action;
            r.selection_probs = b.selection_probs;
            return r;
        };
        h.absorb = [stats](const ArmFeatures& arms, const StepResult& r, double y, Rng&) {
            stats->update(arms.f[r.action.index], y);
        };
        return h;
    };
}

// ---------------------------------------------------------------------------
// Regret curves
// ---------------------------------------------------------------------------

struct RegretCurve {
    Vector mean;      // per step, cumulative regret averaged over seeds
    Vector std_error;
    Matrix per_seed;  // seeds x T cumulative regret
    std::vector<std::uint64_t> seeds;
    std::string agent_label;
    std::string env_label;
};

struct RegretRunLog {
    std::vector<int> actions;
    std::vector<double> send_probs;        // ACTS clipped probability per step
    std::vector<Vector> selection_probs;   // committed distribution per step
};

struct RegretOptions {
    int n_threads = 1;
    bool keep_logs = false;  // retain per-step action/probability logs
};

struct RegretResult {
    RegretCurve curve;
    std::vector<RegretRunLog> logs;  // one per seed when keep_logs is set
};

/// Per-step regret is exact: Delta = max_a E[Y | f, a] - E[Y | f, A_t], taken
/// from the env's conditional-mean vector, never from noisy rewards.
inline RegretResult regret_curve(const BanditAgentFactory& factory, const BanditEnvSpec& spec,
                                 int T, const std::vector<std::uint64_t>& seeds,
                                 const RegretOptions& opt = {}) {
    spec.validate();
    if (T < 1 || seeds.empty()) throw EmptyInput("regret_curve: empty horizon or seed list");

    RegretResult out;
    out.curve.per_seed = Matrix::Zero(static_cast<Eigen::Index>(seeds.size()), T);
    out.curve.seeds = seeds;
    out.curve.env_label = "linear-gaussian-bandit";
    if (opt.keep_logs) out.logs.resize(seeds.size());

    detail::parallel_for(seeds.size(), opt.n_threads, [&](std::size_t si) {
        Rng env_rng = make_rng(RngSpec{seeds[si], 0});
        Rng agent_rng = make_rng(RngSpec{seeds[si], 1});
        BanditAgent agent = factory();
        BanditEnvState st;
        bandit_env_reset(spec, st, env_rng);
        double cum = 0.0;
        for (int t = 0; t < T; ++t) {
            ArmFeatures arms;
            arms.f = st.arm_features;
            StepResult r = agent.step(arms, t, agent_rng);
            BanditStep step = bandit_env_step(spec, t, r.action.index, st, env_rng);
            cum += step.conditional_means.maxCoeff() - step.conditional_means[r.action.index];
            out.curve.per_seed(static_cast<Eigen::Index>(si), t) = cum;
            if (step.reward) agent.absorb(arms, r, *step.reward, agent_rng);
            if (opt.keep_logs) {
                auto& log = out.logs[si];
                log.actions.push_back(r.action.index);
                log.send_probs.push_back(r.send_prob);
                log.selection_probs.push_back(r.selection_probs);
            }
        }
    });

    const auto S = static_cast<double>(seeds.size());
    out.curve.agent_label = factory().label;
    out.curve.mean = out.curve.per_seed.colwise().mean();
    out.curve.std_error = Vector::Zero(T);
    if (seeds.size() > 1) {
        for (int t = 0; t < T; ++t) {
            double var = (out.curve.per_seed.col(t).array() - out.curve.mean[t])
                             .square()
                             .sum() /
                         (S - 1.0);
            out.curve.std_error[t] = std::sqrt(var / S);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo policy values
// ---------------------------------------------------------------------------

namespace detail {

inline ValueEstimate mean_and_se(const std::vector<double>& returns) {
    if (returns.empty()) throw EmptyInput("mc_policy_value: no rollouts");
    ValueEstimate est;
    double mean = 0.0;
    for (double r : returns) mean += r;
    est.point = mean / static_cast<double>(returns.size());
    if (returns.size() > 1) {
        double var = 0.0;
        for (double r : returns) var += (r - est.point) * (r - est.point);
        var /= static_cast<double>(returns.size() - 1);
        est.std_error = std::sqrt(var / static_cast<double>(returns.size()));
    }
    return est;
}

}  // namespace detail

/// Rolls the regime through the two-stage trial generator.
inline ValueEstimate mc_policy_value(const SmartSpec& spec, const Regime& regime,
                                     std::size_t n_rollouts, Rng& rng) {
    spec.validate();
    std::bernoulli_distribution ctx(spec.context_prob);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> returns;
    returns.reserve(n_rollouts);
    for (std::size_t i = 0; i < n_rollouts; ++i) {
        const int x0 = ctx(rng) ? 1 : 0;
        Vector s0(3);
        s0 << x0, 0.0, 0.0;
        const int a0 = regime.sample(0, s0, 2, rng).index;
        const double y0 = spec.stage0_mean(x0, a0) + spec.sigma * normal(rng);
        const double latent =
            spec.resp_coef[0] + spec.resp_coef[1] * x0 + spec.resp_coef[2] * a0 + normal(rng);
        const int r = latent > spec.resp_threshold ? 1 : 0;
        Vector s1(3);
        s1 << x0, a0, r;
        const int a1 = regime.sample(1, s1, 2, rng).index;
        const double y1 = spec.stage1_mean(x0, a0, r, a1) + spec.sigma * normal(rng);
        returns.push_back(y0 + spec.gamma * y1);
    }
    return detail::mean_and_se(returns);
}

/// Discounted-return Monte Carlo on the finite MDP.
inline ValueEstimate mc_policy_value(const MdpSpec& spec, const MdpPolicy& policy,
                                     std::size_t n_rollouts, Rng& rng,
                                     const MdpRolloutOptions& opt = {}) {
    Dataset data = mdp_env_rollout(spec, policy, n_rollouts, rng, opt);
    std::vector<double> returns;
    returns.reserve(n_rollouts);
    for (const auto& traj : data.trajectories) {
        double sum = 0.0, g = 1.0;
        for (const auto& rec : traj.stages) {
            sum += g * *rec.reward;
            g *= spec.gamma;
        }
        returns.push_back(sum);
    }
    return detail::mean_and_se(returns);
}

// ---------------------------------------------------------------------------
// Regime agreement
// ---------------------------------------------------------------------------

struct StageContext {
    std::size_t stage = 0;
    StateVector state;
};

/// All (stage, state) pairs recorded in the dataset.
inline std::vector<StageContext> dataset_contexts(const Dataset& data) {
    std::vector<StageContext> out;
    for (const auto& traj : data.trajectories)
        for (std::size_t t = 0; t < traj.length(); ++t)
            out.push_back({t, traj.stages[t].state});
    return out;
}

inline double regime_agreement(const Regime& regime, const Regime& oracle,
                               const std::vector<StageContext>& contexts, int K) {
    if (contexts.empty()) throw EmptyInput("regime_agreement: no contexts");
    std::size_t match = 0;
    for (const auto& c : contexts)
        if (regime.decide(c.stage, c.state, K) == oracle.decide(c.stage, c.state, K)) ++match;
    return static_cast<double>(match) / static_cast<double>(contexts.size());
}

// ---------------------------------------------------------------------------
// Double-robustness misspecification grid
// ---------------------------------------------------------------------------

enum class DrEstimator { Aiptw, GEstimation };

struct DrCell {
    bool outcome_correct = true;
    bool propensity_correct = true;
    double mean_bias = 0.0;      // mean(estimate) - truth
    double mean_abs_error = 0.0; // mean |estimate - truth|
};

struct DrTable {
    DrEstimator estimator = DrEstimator::Aiptw;
    double truth = 0.0;
    int replications = 0;
    std::size_t sample_size = 0;
    std::vector<DrCell> cells;          // order: (T,T), (T,F), (F,T), (F,F)
    double plugin_bias_correct = 0.0;   // plug-in comparator, correct outcome model
    double plugin_bias_wrong = 0.0;     // plug-in comparator, wrong outcome model
};

struct DrOptions {
    std::size_t n = 10000;
    int replications = 200;
    RngSpec rng;
    int n_threads = 1;
};

namespace detail {

inline FeatureMap dr_correct_map() {
    FeatureMap m;
    m.kind = FeatureKind::Polynomial;  // h0 = (1, x, x^2), h1 = (1, x)
    m.poly_degree = 2;
    return m;
}

inline FeatureMap dr_wrong_map() {
    return FeatureMap{};  // h0 = (1, x), h1 = (1, x)
}

inline Regime treat_all_regime() {
    Regime r;
    DeterministicRule rule;
    rule.theta = Matrix::Zero(2, 4);
    rule.theta(1, 0) = 1.0;  // constant positive score for action 1
    r.rules.push_back(DecisionRule{rule});
    return r;
}

}  // namespace detail

/// Bias of AIPTW / G-estimation over the 2x2 {outcome, propensity} x
/// {correct, wrong} working-model grid, plus the plug-in comparator. The
/// AIPTW target is the value of the treat-everyone regime; the G-estimation
/// target is the contrast intercept.
inline DrTable dr_experiment(const SingleStageSpec& spec, DrEstimator estimator,
                             const DrOptions& opt = {}) {
    spec.validate();
    DrTable table;
    table.estimator = estimator;
    table.replications = opt.replications;
    table.sample_size = opt.n;
    table.truth =
        estimator == DrEstimator::Aiptw ? spec.treat_all_value() : spec.outcome_psi[0];

    const FeatureMap correct = detail::dr_correct_map();
    const FeatureMap wrong = detail::dr_wrong_map();
    const Regime target = detail::treat_all_regime();
    const bool grid[4][2] = {{true, true}, {true, false}, {false, true}, {false, false}};

    Matrix cell_est(opt.replications, 4);
    Matrix plug_est(opt.replications, 2);
    detail::parallel_for(
        static_cast<std::size_t>(opt.replications), opt.n_threads, [&](std::size_t rep) {
            Rng rng = make_rng(opt.rng.with_stream(opt.rng.stream_id + rep));
            Dataset data = single_stage_generate(spec, opt.n, rng);
            for (int c = 0; c < 4; ++c) {
                const FeatureMap& omap = grid[c][0] ? correct : wrong;
                const FeatureMap& pmap = grid[c][1] ? correct : wrong;
                double est = 0.0;
                if (estimator == DrEstimator::Aiptw) {
                    AiptwOptions ao;
                    ao.use_recorded_propensity = false;
                    ao.outcome_map = omap;
                    ao.propensity_map = pmap;
                    est = value_aiptw(data, target, ao).point;
                } else {
                    GEstimationOptions go;
                    go.use_recorded_propensity = false;
                    go.adjunct_maps = omap;
                    go.propensity_maps = pmap;
                    GEstimationFit fit = g_estimation_fit(data, StageMaps{wrong}, go);
                    est = fit.model.psi[0][0];  // contrast intercept
                }
                cell_est(static_cast<Eigen::Index>(rep), c) = est;
            }
            plug_est(static_cast<Eigen::Index>(rep), 0) =
                value_plugin(data, target, correct).point;
            plug_est(static_cast<Eigen::Index>(rep), 1) =
                value_plugin(data, target, wrong).point;
        });

    for (int c = 0; c < 4; ++c) {
        DrCell cell;
        cell.outcome_correct = grid[c][0];
        cell.propensity_correct = grid[c][1];
        cell.mean_bias = cell_est.col(c).mean() - table.truth;
        cell.mean_abs_error = (cell_est.col(c).array() - table.truth).abs().mean();
        table.cells.push_back(cell);
    }
    const double plug_truth = spec.treat_all_value();
    table.plugin_bias_correct = plug_est.col(0).mean() - plug_truth;
    table.plugin_bias_wrong = plug_est.col(1).mean() - plug_truth;
    return table;
}

// ---------------------------------------------------------------------------
// Experiment report
// ---------------------------------------------------------------------------

/// Flat record persisted beside every experiment's outputs. Wall-clock fields
/// are deliberately absent so reruns stay byte-identical.
struct ExperimentReport {
    std::string config_echo;
    std::uint64_t config_hash = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<std::string, double>> metrics;
};

}  // namespace adaptrl
