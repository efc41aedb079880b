#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "adaptrl/core.hpp"
#include "adaptrl/optim.hpp"
#include "adaptrl/regression.hpp"

namespace adaptrl {

// ---------------------------------------------------------------------------
// Markov feature specs
// ---------------------------------------------------------------------------

/// State-action feature psi(x, a) of dimension q with an absorbing marker c
/// where psi(c, .) = 0 is enforced.
struct MarkovFeature {
    int q = 0;
    int num_actions = 2;
    std::function<Vector(const StateVector&, int)> raw;
    std::function<bool(const StateVector&)> is_absorbing;

    Vector psi(const StateVector& x, int a) const {
        if (is_absorbing && is_absorbing(x)) return Vector::Zero(q);
        Vector v = raw(x, a);
        if (v.size() != q) throw DimensionMismatch("MarkovFeature: wrong psi dimension");
        return v;
    }

    /// Saturated one-hot (state, action) indicators over integer-coded states,
    /// with the absorbing index mapped to the zero vector.
    static MarkovFeature saturated(int n_states, int n_actions, int absorbing_index) {
        MarkovFeature f;
        f.num_actions = n_actions;
        std::vector<int> slot(n_states, -1);
        int next = 0;
        for (int s = 0; s < n_states; ++s)
            if (s != absorbing_index) slot[s] = next++;
        f.q = next * n_actions;
        f.raw = [slot, n_actions, q = f.q](const StateVector& x, int a) {
            Vector v = Vector::Zero(q);
            int s = static_cast<int>(std::lround(x[0]));
            if (s < 0 || s >= static_cast<int>(slot.size()))
                throw IndexOutOfRange("saturated feature: state index");
            if (slot[s] >= 0) v[slot[s] * n_actions + a] = 1.0;
            return v;
        };
        f.is_absorbing = [absorbing_index](const StateVector& x) {
            return static_cast<int>(std::lround(x[0])) == absorbing_index;
        };
        return f;
    }
};

/// State-only feature psi(x) for value models, zero at the absorbing state.
struct MarkovStateFeature {
    int q = 0;
    std::function<Vector(const StateVector&)> raw;
    std::function<bool(const StateVector&)> is_absorbing;

    Vector psi(const StateVector& x) const {
        if (is_absorbing && is_absorbing(x)) return Vector::Zero(q);
        Vector v = raw(x);
        if (v.size() != q) throw DimensionMismatch("MarkovStateFeature: wrong dimension");
        return v;
    }

    static MarkovStateFeature saturated(int n_states, int absorbing_index) {
        MarkovStateFeature f;
        std::vector<int> slot(n_states, -1);
        int next = 0;
        for (int s = 0; s < n_states; ++s)
            if (s != absorbing_index) slot[s] = next++;
        f.q = next;
        f.raw = [slot, q = f.q](const StateVector& x) {
            Vector v = Vector::Zero(q);
            int s = static_cast<int>(std::lround(x[0]));
            if (s < 0 || s >= static_cast<int>(slot.size()))
                throw IndexOutOfRange("saturated state feature: state index");
            if (slot[s] >= 0) v[slot[s]] = 1.0;
            return v;
        };
        f.is_absorbing = [absorbing_index](const StateVector& x) {
            return static_cast<int>(std::lround(x[0])) == absorbing_index;
        };
        return f;
    }
};

// ---------------------------------------------------------------------------
// GGQ
// ---------------------------------------------------------------------------

struct GgqSolution {
    Vector theta;
    double objective_value = 0.0;
    int restarts = 0;
    int iterations = 0;
    bool converged = true;
    bool unique_minimum = true;  // false when several multi-starts tie within 1e-6
    double gamma = 0.0;
    MarkovFeature feature;

    double q_value(const StateVector& x, int a) const { return theta.dot(feature.psi(x, a)); }

    int greedy_action(const StateVector& x) const {
        std::vector<double> scores(feature.num_actions);
        for (int a = 0; a < feature.num_actions; ++a) scores[a] = q_value(x, a);
        return argmax_tiebreak(scores);
    }
};

struct GgqOptions {
    int restarts = 10;
    NelderMeadOptions nm;
    RngSpec rng;
};

namespace detail {

/// Next state of transition t, or nullptr when the path is absorbed there.
inline const StateVector* next_state(const Trajectory& traj, std::size_t t) {
    if (t + 1 < traj.stages.size()) return &traj.stages[t + 1].state;
    if (traj.terminal_state) return &*traj.terminal_state;
    return nullptr;
}

}  // namespace detail

/// Minimizes Dhat(theta)' What^{-1} Dhat(theta) where Dhat stacks the Bellman
/// residual moments and What is the empirical second moment of the features.
/// The objective is piecewise quadratic and non-smooth, so the search is
/// derivative-free with random multi-starts.
inline GgqSolution ggq_fit(const Dataset& data, const MarkovFeature& feat, double gamma,
                           const GgqOptions& opt = {}) {
    data.validate();
    if (gamma < 0.0 || gamma >= 1.0) throw Error("ggq_fit: gamma must be in [0,1)");
    const std::size_t N = data.size();
    if (N == 0) throw EmptyInput("ggq_fit: empty dataset");

    // Precompute features; trajectories may differ in length.
    struct Transition {
        Vector psi;           // psi(x_t, a_t)
        double reward;
        std::vector<Vector> next_psi;  // psi(x_{t+1}, a') per action; empty = absorbed
    };
    std::vector<std::vector<Transition>> trans(N);
    Matrix W = Matrix::Zero(feat.q, feat.q);
    for (std::size_t i = 0; i < N; ++i) {
        const auto& traj = data.trajectories[i];
        for (std::size_t t = 0; t < traj.length(); ++t) {
            const auto& rec = traj.stages[t];
            if (!rec.reward) throw MissingReward("ggq_fit");
            Transition tr;
            tr.psi = feat.psi(rec.state, rec.action.index);
            tr.reward = *rec.reward;
            if (const StateVector* nx = detail::next_state(traj, t)) {
                if (!(feat.is_absorbing && feat.is_absorbing(*nx)))
                    for (int a = 0; a < feat.num_actions; ++a)
                        tr.next_psi.push_back(feat.psi(*nx, a));
            }
            W.noalias() += tr.psi * tr.psi.transpose();
            trans[i].push_back(std::move(tr));
        }
    }
    W /= static_cast<double>(N);
    Eigen::LLT<Matrix> lltW(W);
    if (lltW.info() != Eigen::Success)
        throw SingularW("ggq_fit: feature second moment is singular");

    auto objective = [&](const Vector& theta) {
        Vector D = Vector::Zero(feat.q);
        for (const auto& path : trans) {
            for (const auto& tr : path) {
                double future = 0.0;
                if (!tr.next_psi.empty()) {
                    future = tr.next_psi[0].dot(theta);
                    for (std::size_t a = 1; a < tr.next_psi.size(); ++a)
                        future = std::max(future, tr.next_psi[a].dot(theta));
                }
                D.noalias() += (tr.reward + gamma * future - tr.psi.dot(theta)) * tr.psi;
            }
        }
        D /= static_cast<double>(N);
        return D.dot(lltW.solve(D));
    };

    Rng rng = make_rng(opt.rng);
    MultiStartResult ms = nelder_mead_multistart(objective, Vector::Zero(feat.q),
                                                 opt.restarts, rng, opt.nm);

    GgqSolution sol;
    sol.theta = ms.best.x;
    sol.objective_value = ms.best.value;
    sol.restarts = opt.restarts;
    sol.iterations = ms.best.iterations;
    sol.converged = ms.best.converged;
    sol.unique_minimum = ms.unique_minimum;
    sol.gamma = gamma;
    sol.feature = feat;
    return sol;
}

// ---------------------------------------------------------------------------
// V-learning
// ---------------------------------------------------------------------------

/// Candidate policy over states; probs(x) returns the action distribution.
struct CandidatePolicy {
    std::function<Vector(const StateVector&)> probs;
    std::string label;
};

struct VlearnSolution {
    Vector theta;
    double objective_value = 0.0;
    double fitted_value = 0.0;  // average V(x_0; theta) over initial states
    int selected_candidate = -1;
    double gamma = 0.0;
    MarkovStateFeature feature;
    CandidatePolicy policy;
    std::vector<double> candidate_values;
    std::vector<double> ratios;  // importance ratios of the selected candidate

    double value(const StateVector& x) const { return theta.dot(feature.psi(x)); }
};

struct VlearnOptions {
    double lambda = 0.01;            // squared-norm penalty weight
    Matrix W;                        // positive definite; empty = identity
};

/// For each candidate policy, fits theta by minimizing the penalized quadratic
/// form Lambda' W^{-1} Lambda + lambda ||theta||^2 (exact solve: Lambda is
/// affine in theta for linear value models), then returns the candidate with
/// the highest fitted value averaged over initial states.
inline VlearnSolution vlearning_fit(const Dataset& data,
                                    const std::vector<CandidatePolicy>& candidates,
                                    const MarkovStateFeature& feat, double gamma,
                                    const VlearnOptions& opt = {}) {
    data.validate();
    if (candidates.empty()) throw EmptyInput("vlearning_fit: no candidate policies");
    const std::size_t N = data.size();
    if (N == 0) throw EmptyInput("vlearning_fit: empty dataset");

    Matrix W = opt.W.size() > 0 ? opt.W : Matrix::Identity(feat.q, feat.q);
    Eigen::LLT<Matrix> lltW(W);
    if (lltW.info() != Eigen::Success) throw SingularW("vlearning_fit: W not SPD");

    VlearnSolution best;
    best.gamma = gamma;
    best.feature = feat;

    for (std::size_t c = 0; c < candidates.size(); ++c) {
        Vector cvec = Vector::Zero(feat.q);
        Matrix G = Matrix::Zero(feat.q, feat.q);
        std::vector<double> ratios;
        for (std::size_t i = 0; i < N; ++i) {
            const auto& traj = data.trajectories[i];
            for (std::size_t t = 0; t < traj.length(); ++t) {
                const auto& rec = traj.stages[t];
                if (!rec.reward) throw MissingReward("vlearning_fit");
                Vector p = candidates[c].probs(rec.state);
                if (!rec.behavior_prob || *rec.behavior_prob <= 0.0) {
                    if (p[rec.action.index] > 0.0)
                        throw PositivityViolation(
                            "vlearning_fit: candidate mass on unsupported action");
                    continue;
                }
                const double rho = p[rec.action.index] / *rec.behavior_prob;
                ratios.push_back(rho);
                Vector psi_x = feat.psi(rec.state);
                Vector psi_next = Vector::Zero(feat.q);
                if (const StateVector* nx = detail::next_state(traj, t))
                    psi_next = feat.psi(*nx);
                cvec.noalias() += rho * *rec.reward * psi_x;
                G.noalias() += rho * psi_x * (gamma * psi_next - psi_x).transpose();
            }
        }
        cvec /= static_cast<double>(N);
        G /= static_cast<double>(N);

        // min_theta (c + G theta)' W^{-1} (c + G theta) + lambda theta' theta
        Matrix WinvG = lltW.solve(G);
        Matrix A = G.transpose() * WinvG + opt.lambda * Matrix::Identity(feat.q, feat.q);
        Vector rhs = -G.transpose() * lltW.solve(cvec);
        Vector theta = detail::chol_solve(A, rhs);
        Vector lam = cvec + G * theta;
        const double obj = lam.dot(lltW.solve(lam)) + opt.lambda * theta.squaredNorm();

        double value = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            value += theta.dot(feat.psi(data.trajectories[i].stages.front().state));
        value /= static_cast<double>(N);
        best.candidate_values.push_back(value);

        if (best.selected_candidate < 0 || value > best.fitted_value) {
            best.selected_candidate = static_cast<int>(c);
            best.theta = theta;
            best.objective_value = obj;
            best.fitted_value = value;
            best.policy = candidates[c];
            best.ratios = std::move(ratios);
        }
    }
    return best;
}

/// Greedy policy of a fitted GGQ solution as a candidate-policy handle, so it
/// can be rolled out or fed to V-learning.
inline CandidatePolicy ggq_greedy_policy(const GgqSolution& sol) {
    CandidatePolicy pol;
    pol.label = "ggq-greedy";
    pol.probs = [sol](const StateVector& x) {
        Vector p = Vector::Zero(sol.feature.num_actions);
        p[sol.greedy_action(x)] = 1.0;
        return p;
    };
    return pol;
}

/// Softmax policy grid plus all deterministic policies for small discrete
/// state spaces; convenience candidate builder for saturated problems.
inline std::vector<CandidatePolicy> deterministic_policy_grid(int n_states, int n_actions,
                                                              int absorbing_index) {
    std::vector<CandidatePolicy> out;
    std::vector<int> live;
    for (int s = 0; s < n_states; ++s)
        if (s != absorbing_index) live.push_back(s);
    const int combos = static_cast<int>(std::pow(n_actions, live.size()));
    for (int k = 0; k < combos; ++k) {
        std::vector<int> choice(n_states, 0);
        int rem = k;
        for (int s : live) {
            choice[s] = rem % n_actions;
            rem /= n_actions;
        }
        CandidatePolicy pol;
        pol.label = "det-" + std::to_string(k);
        pol.probs = [choice, n_actions](const StateVector& x) {
            Vector p = Vector::Zero(n_actions);
            int s = static_cast<int>(std::lround(x[0]));
            p[s >= 0 && s < static_cast<int>(choice.size()) ? choice[s] : 0] = 1.0;
            return p;
        };
        out.push_back(std::move(pol));
    }
    return out;
}

}  // namespace adaptrl
