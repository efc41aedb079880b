#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "adaptrl/core.hpp"

namespace adaptrl {

// ---------------------------------------------------------------------------
// Two-stage trial with responder-tailored second stage
// ---------------------------------------------------------------------------

/// Generative spec for a two-stage randomized trial. Stage-0 context is a
/// binary covariate x0; non/responder status R after stage 0 feeds the
/// stage-1 rule. Both stage mean outcomes are linear with action
/// interactions, so the optimal regime is available in closed form.
///
/// Recorded state layout (constant dimension 3 across stages):
///   stage 0: (x0, 0, 0)     stage 1: (x0, a0, R)
struct SmartSpec {
    std::vector<double> rand_prob = {0.5, 0.5};  // P(a_t = 1)
    double context_prob = 0.5;                   // P(x0 = 1)

    // Stage-0 mean reward: beta0.(1,x0) + psi0.(1,x0) * a0, a0 in {0,1}.
    Vector beta0 = (Vector(2) << 0.2, 0.1).finished();
    Vector psi0 = (Vector(2) << 0.5, -1.0).finished();

    // Responder rule: R = 1{resp_coef.(1,x0,a0) + e > resp_threshold}, e ~ N(0,1).
    Vector resp_coef = (Vector(3) << 0.0, 0.4, 0.8).finished();
    double resp_threshold = 0.0;

    // Stage-1 mean reward: beta1.(1,x0,a0,R) + psi1.(1,x0,a0,R) * a1.
    Vector beta1 = (Vector(4) << 1.0, 0.3, 0.2, 0.5).finished();
    Vector psi1 = (Vector(4) << 0.8, -0.6, -0.5, -1.0).finished();

    double sigma = 1.0;  // outcome noise sd (both stages)
    double gamma = 1.0;  // discount between stages

    void validate() const {
        if (rand_prob.size() != 2) throw Error("SmartSpec: two stages expected");
        for (double p : rand_prob)
            if (p <= 0.0 || p >= 1.0)
                throw PositivityViolation("SmartSpec: randomization prob outside (0,1)");
        if (context_prob < 0.0 || context_prob > 1.0)
            throw Error("SmartSpec: context_prob outside [0,1]");
        if (sigma < 0.0) throw Error("SmartSpec: negative noise sd");
    }

    double stage0_mean(int x0, int a0) const {
        Vector h(2);
        h << 1.0, static_cast<double>(x0);
        return beta0.dot(h) + psi0.dot(h) * a0;
    }

    double responder_prob(int x0, int a0) const {
        const double z = resp_coef[0] + resp_coef[1] * x0 + resp_coef[2] * a0;
        // P(z + e > thr) with e ~ N(0,1)
        return 0.5 * std::erfc((resp_threshold - z) / std::sqrt(2.0));
    }

    double stage1_mean(int x0, int a0, int r, int a1) const {
        Vector h(4);
        h << 1.0, static_cast<double>(x0), static_cast<double>(a0), static_cast<double>(r);
        return beta1.dot(h) + psi1.dot(h) * a1;
    }

    /// Feature maps matching the recorded state layout: stage 0 uses only x0,
    /// stage 1 uses the full (x0, a0, R) state.
    StageMaps stage_maps() const {
        FeatureMap m0;
        m0.main_columns = {0};
        m0.tailoring_columns = {0};
        FeatureMap m1;  // all columns
        return StageMaps{std::vector<FeatureMap>{m0, m1}};
    }
};

/// Exact backward-induction solution of a SmartSpec.
struct SmartOracle {
    Regime regime;
    std::vector<double> stage_values;  // expected value-to-go per stage under the oracle
    Matrix q0;  // 2x2: Q0(x0, a0)
    Matrix q1;  // 8x2: rows index (x0, a0, r) as x0*4 + a0*2 + r
};

inline SmartOracle smart_oracle(const SmartSpec& spec) {
    spec.validate();
    SmartOracle o;
    o.q1 = Matrix::Zero(8, 2);
    for (int x0 = 0; x0 < 2; ++x0)
        for (int a0 = 0; a0 < 2; ++a0)
            for (int r = 0; r < 2; ++r)
                for (int a1 = 0; a1 < 2; ++a1)
                    o.q1(x0 * 4 + a0 * 2 + r, a1) = spec.stage1_mean(x0, a0, r, a1);

    o.q0 = Matrix::Zero(2, 2);
    for (int x0 = 0; x0 < 2; ++x0)
        for (int a0 = 0; a0 < 2; ++a0) {
            const double q = spec.responder_prob(x0, a0);
            double future = 0.0;
            for (int r = 0; r < 2; ++r)
                future += (r == 1 ? q : 1.0 - q) * o.q1.row(x0 * 4 + a0 * 2 + r).maxCoeff();
            o.q0(x0, a0) = spec.stage0_mean(x0, a0) + spec.gamma * future;
        }

    // Stage-0 rule over phi = (1, x0, 1, x0): fit the 2x2 Q0 table exactly.
    DeterministicRule rule0;
    rule0.theta = Matrix::Zero(2, 4);
    rule0.theta(0, 0) = o.q0(0, 0);
    rule0.theta(0, 1) = o.q0(1, 0) - o.q0(0, 0);
    rule0.theta(1, 0) = o.q0(0, 1);
    rule0.theta(1, 1) = o.q0(1, 1) - o.q0(0, 1);

    // Stage-1 rule over phi = (1, x0, a0, r, 1, x0, a0, r): the truth is linear.
    DeterministicRule rule1;
    rule1.theta = Matrix::Zero(2, 8);
    rule1.theta.row(0).head(4) = spec.beta1.transpose();
    rule1.theta.row(1).head(4) = spec.beta1.transpose();
    rule1.theta.row(1).tail(4) = spec.psi1.transpose();

    o.regime.rules = {DecisionRule{rule0}, DecisionRule{rule1}};
    o.regime.maps = spec.stage_maps();

    // Expected values under the oracle from the start and from stage 1.
    double v0 = 0.0, v1 = 0.0;
    for (int x0 = 0; x0 < 2; ++x0) {
        const double px = x0 == 1 ? spec.context_prob : 1.0 - spec.context_prob;
        Eigen::Index a0;
        o.q0.row(x0).maxCoeff(&a0);
        if (o.q0(x0, 0) >= o.q0(x0, 1)) a0 = 0;  // lowest-index tie-break
        v0 += px * o.q0(x0, a0);
        const double q = spec.responder_prob(x0, static_cast<int>(a0));
        for (int r = 0; r < 2; ++r)
            v1 += px * (r == 1 ? q : 1.0 - q) *
                  o.q1.row(x0 * 4 + static_cast<int>(a0) * 2 + r).maxCoeff();
    }
    o.stage_values = {v0, v1};
    return o;
}

struct SmartSample {
    Dataset data;
    SmartOracle oracle;
};

/// Draws N trajectories; randomization probabilities are recorded so IPTW and
/// weighted-classification fits can run without a propensity model.
inline SmartSample smart_generate(const SmartSpec& spec, std::size_t N, Rng& rng) {
    spec.validate();
    SmartSample out;
    out.oracle = smart_oracle(spec);
    out.data.horizon = HorizonKind::Finite;
    out.data.action_counts = {2, 2};
    out.data.trajectories.reserve(N);

    std::bernoulli_distribution ctx(spec.context_prob);
    std::bernoulli_distribution arm0(spec.rand_prob[0]);
    std::bernoulli_distribution arm1(spec.rand_prob[1]);
    std::normal_distribution<double> normal(0.0, 1.0);

    for (std::size_t i = 0; i < N; ++i) {
        const int x0 = ctx(rng) ? 1 : 0;
        const int a0 = arm0(rng) ? 1 : 0;
        const double y0 = spec.stage0_mean(x0, a0) + spec.sigma * normal(rng);
        const double latent =
            spec.resp_coef[0] + spec.resp_coef[1] * x0 + spec.resp_coef[2] * a0 + normal(rng);
        const int r = latent > spec.resp_threshold ? 1 : 0;
        const int a1 = arm1(rng) ? 1 : 0;
        const double y1 = spec.stage1_mean(x0, a0, r, a1) + spec.sigma * normal(rng);

        Trajectory traj;
        StageRecord s0;
        s0.state = (Vector(3) << x0, 0.0, 0.0).finished();
        s0.action = ActionId{a0};
        s0.reward = y0;
        s0.behavior_prob = a0 == 1 ? spec.rand_prob[0] : 1.0 - spec.rand_prob[0];
        StageRecord s1;
        s1.state = (Vector(3) << x0, a0, r).finished();
        s1.action = ActionId{a1};
        s1.reward = y1;
        s1.behavior_prob = a1 == 1 ? spec.rand_prob[1] : 1.0 - spec.rand_prob[1];
        traj.stages = {std::move(s0), std::move(s1)};
        out.data.trajectories.push_back(std::move(traj));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear contextual bandit environment
// ---------------------------------------------------------------------------

enum class BaselineKind { Zero, Sinusoidal, HistoryDrift };

/// Linear-Gaussian bandit: reward = f_a . mu * 1{a != control} + g_t + noise.
/// Per-arm feature vectors f_a are fresh standard Gaussians each round; the
/// context handed to agents is their concatenation. Optional habituation
/// appends a days-since-arm-last-sent covariate (capped at 7, scaled to
/// [0,1]) with its own effect coefficient.
struct BanditEnvSpec {
    int K = 5;
    int p = 5;           // per-arm feature dimension (without habituation)
    Vector mu;           // shared effect vector, dim p (defaults to ones)
    double noise = 1.0;  // reward noise sd
    bool stationary = true;
    BaselineKind baseline = BaselineKind::Zero;
    double baseline_amp = 0.0;
    double baseline_period = 500.0;
    double drift_step = 0.0;  // bounded random walk increment for HistoryDrift
    bool habituation = false;
    double habituation_coef = 0.0;  // positive = effect recovers with time since send
    double missing_prob = 0.0;
    int control_arm = -1;  // -1 = no control arm (all arms carry effects)
    bool intercept_feature = false;  // pin each arm's first feature entry to 1

    int feature_dim() const { return p + (habituation ? 1 : 0); }

    Vector effect_vector() const {
        Vector m = mu.size() == p ? mu : Vector::Ones(p);
        if (!habituation) return m;
        Vector out(p + 1);
        out << m, habituation_coef;
        return out;
    }

    void validate() const {
        if (K < 1 || p < 1) throw Error("BanditEnvSpec: K and p must be positive");
        if (mu.size() != 0 && mu.size() != p)
            throw DimensionMismatch("BanditEnvSpec: mu dimension");
        if (missing_prob < 0.0 || missing_prob > 1.0)
            throw Error("BanditEnvSpec: missing_prob outside [0,1]");
        if (control_arm >= K) throw IndexOutOfRange("BanditEnvSpec: control arm");
    }
};

/// Mutable rollout state: the current round's per-arm features plus the
/// nonstationary-baseline and habituation bookkeeping.
struct BanditEnvState {
    std::vector<Vector> arm_features;  // K entries, dim feature_dim()
    Vector days_since;                 // per arm, capped at 7
    double drift = 0.0;
};

inline Vector detail_bandit_means(const BanditEnvSpec& spec, const BanditEnvState& st,
                                  double g) {
    const Vector eff = spec.effect_vector();
    Vector means(spec.K);
    for (int a = 0; a < spec.K; ++a)
        means[a] = (a == spec.control_arm ? 0.0 : st.arm_features[a].dot(eff)) + g;
    return means;
}

/// Draws the per-arm features for one round into `st`.
inline void bandit_env_reset(const BanditEnvSpec& spec, BanditEnvState& st, Rng& rng) {
    spec.validate();
    std::normal_distribution<double> normal(0.0, 1.0);
    st.arm_features.assign(spec.K, Vector::Zero(spec.feature_dim()));
    st.days_since = Vector::Constant(spec.K, 7.0);
    st.drift = 0.0;
    for (int a = 0; a < spec.K; ++a) {
        for (int j = 0; j < spec.p; ++j)
            st.arm_features[a][j] = spec.intercept_feature && j == 0 ? 1.0 : normal(rng);
        if (spec.habituation) st.arm_features[a][spec.p] = st.days_since[a] / 7.0;
    }
}

struct BanditStep {
    std::optional<double> reward;  // empty when masked missing
    Vector conditional_means;     // exact E[reward | features, arm], all arms
    double baseline = 0.0;        // the g_t used this round
};

/// Plays `arm` in round t, returns the realized reward together with the
/// exact conditional-mean vector, then redraws the context for round t+1.
inline BanditStep bandit_env_step(const BanditEnvSpec& spec, int t, int arm,
                                  BanditEnvState& st, Rng& rng) {
    spec.validate();
    if (arm < 0 || arm >= spec.K) throw IndexOutOfRange("bandit_env_step: arm");
    if (static_cast<int>(st.arm_features.size()) != spec.K)
        throw DimensionMismatch("bandit_env_step: call bandit_env_reset first");

    double g = 0.0;
    if (!spec.stationary) {
        if (spec.baseline == BaselineKind::Sinusoidal)
            g = spec.baseline_amp * std::sin(2.0 * std::numbers::pi *
                                             static_cast<double>(t) / spec.baseline_period);
        else if (spec.baseline == BaselineKind::HistoryDrift)
            g = st.drift;
    }

    BanditStep out;
    out.baseline = g;
    out.conditional_means = detail_bandit_means(spec, st, g);

    std::normal_distribution<double> normal(0.0, 1.0);
    const double y = out.conditional_means[arm] + spec.noise * normal(rng);
    if (spec.missing_prob > 0.0 &&
        std::bernoulli_distribution(spec.missing_prob)(rng))
        out.reward = std::nullopt;
    else
        out.reward = y;

    // Advance to the next round's context.
    if (!spec.stationary && spec.baseline == BaselineKind::HistoryDrift) {
        std::uniform_real_distribution<double> u(-spec.drift_step, spec.drift_step);
        st.drift = std::clamp(st.drift + u(rng), -spec.baseline_amp, spec.baseline_amp);
    }
    for (int a = 0; a < spec.K; ++a)
        st.days_since[a] = a == arm ? 0.0 : std::min(st.days_since[a] + 1.0, 7.0);
    for (int a = 0; a < spec.K; ++a) {
        for (int j = 0; j < spec.p; ++j)
            st.arm_features[a][j] = spec.intercept_feature && j == 0 ? 1.0 : normal(rng);
        if (spec.habituation) st.arm_features[a][spec.p] = st.days_since[a] / 7.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Single-stage observational design (misspecification experiments)
// ---------------------------------------------------------------------------

/// One decision, scalar context x ~ N(0,1), binary treatment with a quadratic
/// confounded assignment. Working models built on (1, x) miss the x^2 terms
/// in both the outcome and the propensity, which is the point.
struct SingleStageSpec {
    Vector outcome_beta = (Vector(3) << 1.0, 0.5, 1.0).finished();  // over (1, x, x^2)
    Vector outcome_psi = (Vector(2) << 0.5, 0.3).finished();        // over (1, x), times a
    Vector prop_coef = (Vector(3) << 0.0, 0.3, 0.3).finished();     // logistic, (1, x, x^2)
    double sigma = 1.0;

    void validate() const {
        if (outcome_beta.size() != 3 || outcome_psi.size() != 2 || prop_coef.size() != 3)
            throw DimensionMismatch("SingleStageSpec: coefficient dimensions");
        if (sigma < 0.0) throw Error("SingleStageSpec: negative noise sd");
    }

    double propensity(double x) const {
        const double z = prop_coef[0] + prop_coef[1] * x + prop_coef[2] * x * x;
        return 1.0 / (1.0 + std::exp(-z));
    }

    double outcome_mean(double x, int a) const {
        return outcome_beta[0] + outcome_beta[1] * x + outcome_beta[2] * x * x +
               (outcome_psi[0] + outcome_psi[1] * x) * a;
    }

    /// E[Y(1)] under x ~ N(0,1): E[x] = 0, E[x^2] = 1.
    double treat_all_value() const {
        return outcome_beta[0] + outcome_beta[2] + outcome_psi[0];
    }
};

inline Dataset single_stage_generate(const SingleStageSpec& spec, std::size_t N, Rng& rng) {
    spec.validate();
    Dataset data;
    data.horizon = HorizonKind::Finite;
    data.action_counts = {2};
    data.trajectories.reserve(N);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double x = normal(rng);
        const double p1 = spec.propensity(x);
        const int a = u(rng) < p1 ? 1 : 0;
        StageRecord rec;
        rec.state = Vector::Constant(1, x);
        rec.action = ActionId{a};
        rec.reward = spec.outcome_mean(x, a) + spec.sigma * normal(rng);
        rec.behavior_prob = a == 1 ? p1 : 1.0 - p1;
        Trajectory traj;
        traj.stages.push_back(std::move(rec));
        data.trajectories.push_back(std::move(traj));
    }
    return data;
}

// ---------------------------------------------------------------------------
// Finite MDP with an absorbing state
// ---------------------------------------------------------------------------

/// Time-homogeneous finite MDP. State `absorbing` self-loops with reward 0.
struct MdpSpec {
    int n_states = 0;
    int n_actions = 0;
    int absorbing = -1;        // -1 = no absorbing state
    std::vector<Matrix> P;     // per action: n_states x n_states row-stochastic
    Matrix R;                  // n_states x n_actions expected reward
    double gamma = 0.9;

    void validate() const {
        if (n_states < 1 || n_actions < 1) throw Error("MdpSpec: empty state/action space");
        if (static_cast<int>(P.size()) != n_actions)
            throw DimensionMismatch("MdpSpec: one transition matrix per action");
        if (R.rows() != n_states || R.cols() != n_actions)
            throw DimensionMismatch("MdpSpec: reward tensor shape");
        for (const Matrix& Pa : P) {
            if (Pa.rows() != n_states || Pa.cols() != n_states)
                throw DimensionMismatch("MdpSpec: transition matrix shape");
            for (int s = 0; s < n_states; ++s) {
                if (std::abs(Pa.row(s).sum() - 1.0) > 1e-9 || Pa.row(s).minCoeff() < -1e-12)
                    throw Error("MdpSpec: transition rows must be probability vectors");
            }
        }
        if (absorbing >= 0) {
            if (absorbing >= n_states) throw IndexOutOfRange("MdpSpec: absorbing index");
            for (int a = 0; a < n_actions; ++a) {
                if (std::abs(P[a](absorbing, absorbing) - 1.0) > 1e-12)
                    throw Error("MdpSpec: absorbing state must self-loop");
                if (R(absorbing, a) != 0.0)
                    throw Error("MdpSpec: absorbing state must have zero reward");
            }
        }
    }
};

/// Stationary stochastic policy over MDP states; row s = action distribution.
using MdpPolicy = Matrix;

inline MdpPolicy mdp_deterministic_policy(const std::vector<int>& actions, int n_actions) {
    MdpPolicy pi = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions)
            throw IndexOutOfRange("mdp_deterministic_policy: action");
        pi(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    }
    return pi;
}

struct MdpRolloutOptions {
    std::size_t max_steps = 1000;  // hard cap; paths hitting it are censored
    int start_state = -1;          // -1 = uniform over non-absorbing states
};

/// Rolls out n_paths trajectories under the policy. Terminal bookkeeping
/// follows the indefinite-horizon convention: absorbed paths leave
/// terminal_state empty, capped paths carry the final state and censored=true.
inline Dataset mdp_env_rollout(const MdpSpec& spec, const MdpPolicy& policy,
                               std::size_t n_paths, Rng& rng,
                               const MdpRolloutOptions& opt = {}) {
    spec.validate();
    if (policy.rows() != spec.n_states || policy.cols() != spec.n_actions)
        throw DimensionMismatch("mdp_env_rollout: policy shape");

    std::vector<int> starts;
    for (int s = 0; s < spec.n_states; ++s)
        if (s != spec.absorbing) starts.push_back(s);

    Dataset data;
    data.horizon = HorizonKind::Indefinite;
    data.action_counts = {spec.n_actions};
    data.trajectories.reserve(n_paths);
    std::uniform_int_distribution<std::size_t> start_dist(0, starts.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    for (std::size_t i = 0; i < n_paths; ++i) {
        int s = opt.start_state >= 0 ? opt.start_state : starts[start_dist(rng)];
        Trajectory traj;
        while (s != spec.absorbing && traj.stages.size() < opt.max_steps) {
            // Inverse-CDF draws keep the action/transition sampling portable.
            double ua = u(rng);
            int a = 0;
            for (double acc = 0.0; a < spec.n_actions - 1; ++a) {
                acc += policy(s, a);
                if (ua < acc) break;
            }
            StageRecord rec;
            rec.state = Vector::Constant(1, static_cast<double>(s));
            rec.action = ActionId{a};
            rec.reward = spec.R(s, a);
            rec.behavior_prob = policy(s, a);
            traj.stages.push_back(std::move(rec));

            double us = u(rng);
            int nx = 0;
            for (double acc = 0.0; nx < spec.n_states - 1; ++nx) {
                acc += spec.P[a](s, nx);
                if (us < acc) break;
            }
            s = nx;
        }
        if (traj.stages.empty()) {
            // started absorbed: keep the empty decision path out of the dataset
            // invariants by recording a single absorbing marker-free trajectory
            traj.censored = false;
            traj.terminal_state = std::nullopt;
            data.trajectories.push_back(std::move(traj));
            continue;
        }
        if (s == spec.absorbing) {
            traj.terminal_state = std::nullopt;
        } else {
            traj.terminal_state = Vector::Constant(1, static_cast<double>(s));
            traj.censored = true;
        }
        data.trajectories.push_back(std::move(traj));
    }
    return data;
}

// ---------------------------------------------------------------------------
// Exact dynamic-programming oracles
// ---------------------------------------------------------------------------

struct DpSolution {
    Matrix Q;                  // n_states x n_actions
    Vector V;                  // n_states
    std::vector<int> policy;   // greedy, lowest-index ties
    int iterations = 0;
};

inline DpSolution value_iteration(const MdpSpec& spec, double tol = 1e-12,
                                  int max_iters = 100000) {
    spec.validate();
    DpSolution sol;
    sol.Q = Matrix::Zero(spec.n_states, spec.n_actions);
    for (; sol.iterations < max_iters; ++sol.iterations) {
        Vector V = sol.Q.rowwise().maxCoeff();
        Matrix Qn(spec.n_states, spec.n_actions);
        for (int a = 0; a < spec.n_actions; ++a)
            Qn.col(a) = spec.R.col(a) + spec.gamma * spec.P[a] * V;
        const double delta = (Qn - sol.Q).cwiseAbs().maxCoeff();
        sol.Q = Qn;
        if (delta < tol) break;
    }
    sol.V = sol.Q.rowwise().maxCoeff();
    sol.policy.resize(spec.n_states);
    for (int s = 0; s < spec.n_states; ++s) {
        int best = 0;
        for (int a = 1; a < spec.n_actions; ++a)
            if (sol.Q(s, a) > sol.Q(s, best)) best = a;
        sol.policy[s] = best;
    }
    return sol;
}

/// Exact policy evaluation: solves (I - gamma * P_pi) V = r_pi.
inline Vector mdp_policy_evaluation(const MdpSpec& spec, const MdpPolicy& policy) {
    spec.validate();
    if (policy.rows() != spec.n_states || policy.cols() != spec.n_actions)
        throw DimensionMismatch("mdp_policy_evaluation: policy shape");
    Matrix Ppi = Matrix::Zero(spec.n_states, spec.n_states);
    Vector rpi = Vector::Zero(spec.n_states);
    for (int a = 0; a < spec.n_actions; ++a) {
        Ppi += policy.col(a).asDiagonal() * spec.P[a];
        rpi += policy.col(a).cwiseProduct(spec.R.col(a));
    }
    Matrix A = Matrix::Identity(spec.n_states, spec.n_states) - spec.gamma * Ppi;
    return A.partialPivLu().solve(rpi);
}

// ---------------------------------------------------------------------------
// Missing-reward imputation
// ---------------------------------------------------------------------------

struct LocfResult {
    Dataset data;
    std::vector<std::vector<bool>> imputed;  // per trajectory, per stage
    bool had_leading_missing = false;        // some leading value defaulted to 0
};

/// Last observation carried forward; leading missing rewards become 0 and are
/// flagged. The imputation mask marks every filled-in stage.
inline LocfResult apply_locf(const Dataset& dataset) {
    LocfResult out;
    out.data = dataset;
    out.imputed.resize(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        auto& traj = out.data.trajectories[i];
        out.imputed[i].assign(traj.stages.size(), false);
        std::optional<double> last;
        for (std::size_t t = 0; t < traj.stages.size(); ++t) {
            auto& rec = traj.stages[t];
            if (rec.reward) {
                last = rec.reward;
            } else {
                out.imputed[i][t] = true;
                if (last) {
                    rec.reward = last;
                } else {
                    rec.reward = 0.0;
                    out.had_leading_missing = true;
                }
            }
        }
    }
    return out;
}

}  // namespace adaptrl
