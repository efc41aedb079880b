#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "adaptrl/core.hpp"
#include "adaptrl/offline_dtr.hpp"
#include "adaptrl/regression.hpp"

namespace adaptrl {

// ---------------------------------------------------------------------------
// Agent contract
// ---------------------------------------------------------------------------

/// Per-arm feature vectors for one decision point, with an availability mask.
struct ArmFeatures {
    std::vector<Vector> f;
    std::vector<bool> available;  // empty = all available

    int arms() const { return static_cast<int>(f.size()); }

    bool is_available(int a) const { return available.empty() || available[a]; }

    void check() const {
        bool any = false;
        for (int a = 0; a < arms(); ++a) any = any || is_available(a);
        if (!any) throw NoAvailableArm();
        for (const auto& v : f)
            if (v.size() != f.front().size())
                throw DimensionMismatch("arm feature dimensions differ");
    }
};

/// Outcome of an agent step: chosen arm and the selection distribution the
/// agent committed to (a point mass for deterministic selectors).
struct StepResult {
    ActionId action;
    Vector selection_probs;
    int preferred_arm = -1;   // ACTS: the posterior-preferred non-control arm
    double send_prob = 0.0;   // ACTS: clipped non-control probability
};

namespace detail {

inline int masked_argmax(const Vector& scores, const ArmFeatures& arms) {
    int best = -1;
    for (int a = 0; a < arms.arms(); ++a) {
        if (!arms.is_available(a)) continue;
        if (best < 0 || scores[a] > scores[best]) best = a;
    }
    if (best < 0) throw NoAvailableArm();
    return best;
}

/// Draw from N(mu, scale^2 * B^{-1}) given the Cholesky factor of B.
inline Vector gaussian_precision_sample(const Vector& mu, const Matrix& B, double scale,
                                        Rng& rng) {
    if (scale == 0.0) return mu;
    Eigen::LLT<Matrix> llt(B);
    if (llt.info() != Eigen::Success) throw SingularDesign("posterior sample: B not SPD");
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(mu.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    // w = L^{-T} z has covariance B^{-1}.
    Matrix L = llt.matrixL();
    Vector w = L.transpose().triangularView<Eigen::Upper>().solve(z);
    return mu + scale * w;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// LinUCB
// ---------------------------------------------------------------------------

class LinUcbAgent {
public:
    LinUcbAgent(int d, double alpha, double lambda = 1.0)
        : stats_(d, lambda), alpha_(alpha) {}

    StepResult step(const ArmFeatures& arms, Rng& /*rng*/) const {
        arms.check();
        Vector ucb(arms.arms());
        Vector mu = stats_.solve();
        for (int a = 0; a < arms.arms(); ++a) {
            const Vector& fa = arms.f[a];
            ucb[a] = fa.dot(mu) + alpha_ * std::sqrt(fa.dot(stats_.solve(fa)));
        }
        StepResult r;
        r.action = ActionId{detail::masked_argmax(ucb, arms)};
        r.selection_probs = Vector::Zero(arms.arms());
        r.selection_probs[r.action.index] = 1.0;
        return r;
    }

    void absorb(const ArmFeatures& arms, const ActionId& action, double reward) {
        stats_.update(arms.f[action.index], reward);
    }

    const SuffStats& stats() const { return stats_; }

private:
    SuffStats stats_;
    double alpha_;
};

// ---------------------------------------------------------------------------
// LinTS (Gaussian or NIG posterior)
// ---------------------------------------------------------------------------

class LinTsAgent {
public:
    LinTsAgent(int d, double nu, double lambda = 1.0) : stats_(d, lambda), nu_(nu) {}

    /// NIG-posterior variant: the noise scale is drawn from the posterior
    /// rather than fixed at nu.
    static LinTsAgent with_nig_prior(const NigPosterior& prior) {
        LinTsAgent agent(static_cast<int>(prior.mu.size()), 0.0);
        agent.nig_ = prior;
        return agent;
    }

    StepResult step(const ArmFeatures& arms, Rng& rng) const {
        arms.check();
        Vector draw = nig_ ? nig_sample(*nig_, rng).beta
                           : detail::gaussian_precision_sample(stats_.solve(), stats_.B, nu_, rng);
        Vector scores(arms.arms());
        for (int a = 0; a < arms.arms(); ++a) scores[a] = arms.f[a].dot(draw);
        StepResult r;
        r.action = ActionId{detail::masked_argmax(scores, arms)};
        r.selection_probs = Vector::Zero(arms.arms());
        r.selection_probs[r.action.index] = 1.0;
        return r;
    }

    void absorb(const ArmFeatures& arms, const ActionId& action, double reward) {
        stats_.update(arms.f[action.index], reward);
        if (nig_) {
            Matrix X(1, arms.f[action.index].size());
            X.row(0) = arms.f[action.index].transpose();
            Vector y(1);
            y[0] = reward;
            nig_ = nig_update(*nig_, X, y);
        }
    }

    const SuffStats& stats() const { return stats_; }
    const std::optional<NigPosterior>& posterior() const { return nig_; }

private:
    SuffStats stats_;
    double nu_;
    std::optional<NigPosterior> nig_;
};

// ---------------------------------------------------------------------------
// Bootstrap Thompson sampling
// ---------------------------------------------------------------------------

class BtsAgent {
public:
    BtsAgent(int d, int replicates, double lambda = 1.0) {
        if (replicates < 2) throw Error("BTS requires at least 2 bootstrap replicates");
        reps_.assign(replicates, SuffStats(d, lambda));
    }

    StepResult step(const ArmFeatures& arms, Rng& rng) const {
        arms.check();
        std::uniform_int_distribution<int> pick(0, static_cast<int>(reps_.size()) - 1);
        Vector mu = reps_[pick(rng)].solve();
        Vector scores(arms.arms());
        for (int a = 0; a < arms.arms(); ++a) scores[a] = arms.f[a].dot(mu);
        StepResult r;
        r.action = ActionId{detail::masked_argmax(scores, arms)};
        r.selection_probs = Vector::Zero(arms.arms());
        r.selection_probs[r.action.index] = 1.0;
        return r;
    }

    /// Each replicate absorbs the observation with an independent
    /// double-or-nothing weight (0 or 2, probability 1/2 each).
    void absorb(const ArmFeatures& arms, const ActionId& action, double reward, Rng& rng) {
        std::bernoulli_distribution coin(0.5);
        for (auto& rep : reps_)
            if (coin(rng)) rep.update(arms.f[action.index], reward, 2.0);
    }

    const std::vector<SuffStats>& replicates() const { return reps_; }

private:
    std::vector<SuffStats> reps_;
};

// ---------------------------------------------------------------------------
// Action-centered Thompson sampling
// ---------------------------------------------------------------------------

struct ActsOptions {
    double pi_min = 0.2;
    double pi_max = 0.8;
    double nu = 1.0;
    double lambda = 1.0;
    int posterior_draws = 200;  // estimator of P(f' mu_tilde > 0)
    bool uniform_random_arm = false;  // pick the non-control arm uniformly instead
};

/// Two-step hierarchical selector: pick the posterior-preferred non-control
/// arm, then send it (vs the control arm 0) with a clipped probability.
/// Statistics live on the differential reward with centered features.
class ActsAgent {
public:
    ActsAgent(int d, const ActsOptions& opt = {}) : stats_(d, opt.lambda), opt_(opt) {
        if (!(opt.pi_min > 0.0 && opt.pi_min <= opt.pi_max && opt.pi_max < 1.0))
            throw ClipBoundsInvalid("ACTS clip bounds must satisfy 0 < min <= max < 1");
    }

    StepResult step(const ArmFeatures& arms, Rng& rng) const {
        arms.check();
        if (arms.arms() < 2) throw NoAvailableArm("ACTS needs a non-control arm");

        int abar = -1;
        if (opt_.uniform_random_arm) {
            std::vector<int> avail;
            for (int a = 1; a < arms.arms(); ++a)
                if (arms.is_available(a)) avail.push_back(a);
            if (avail.empty()) throw NoAvailableArm();
            std::uniform_int_distribution<std::size_t> pick(0, avail.size() - 1);
            abar = avail[pick(rng)];
        } else {
            Vector draw =
                detail::gaussian_precision_sample(stats_.solve(), stats_.B, opt_.nu, rng);
            for (int a = 1; a < arms.arms(); ++a) {
                if (!arms.is_available(a)) continue;
                if (abar < 0 || arms.f[a].dot(draw) > arms.f[abar].dot(draw)) abar = a;
            }
            if (abar < 0) throw NoAvailableArm();
        }

        int positive = 0;
        Vector mu = stats_.solve();
        for (int m = 0; m < opt_.posterior_draws; ++m) {
            Vector d = detail::gaussian_precision_sample(mu, stats_.B, opt_.nu, rng);
            if (arms.f[abar].dot(d) > 0.0) ++positive;
        }
        const double mass = static_cast<double>(positive) / opt_.posterior_draws;
        const double pi_t = std::clamp(mass, opt_.pi_min, opt_.pi_max);

        StepResult r;
        r.preferred_arm = abar;
        r.send_prob = pi_t;
        std::bernoulli_distribution send(pi_t);
        r.action = ActionId{send(rng) ? abar : 0};
        r.selection_probs = Vector::Zero(arms.arms());
        r.selection_probs[abar] = pi_t;
        r.selection_probs[0] += 1.0 - pi_t;
        return r;
    }

    void absorb(const ArmFeatures& arms, const StepResult& step, double reward) {
        const double sent = step.action.index != 0 ? 1.0 : 0.0;
        Vector centered = arms.f[step.preferred_arm] * (sent - step.send_prob);
        stats_.update(centered, reward);
    }

    const SuffStats& stats() const { return stats_; }

private:
    SuffStats stats_;
    ActsOptions opt_;
};

// ---------------------------------------------------------------------------
// Semiparametric centered estimators
// ---------------------------------------------------------------------------

enum class CenteredVariant { RealizedGram, ExpectedGram };

struct CenteredLogEntry {
    ArmFeatures arms;
    Vector selection_probs;  // distribution the action was drawn from
    int action = 0;
    double reward = 0.0;
};

/// Centered ridge estimators robust to an action-independent baseline reward.
/// The centering fbar = f(X,A) - E[f(X,A) | H] uses the logged selection
/// distribution; deterministic logs center to zero and yield mu = 0.
inline Vector centered_estimate(const std::vector<CenteredLogEntry>& log,
                                CenteredVariant variant, double lambda = 1.0) {
    if (log.empty()) throw EmptyInput("centered_estimate: empty log");
    const Eigen::Index d = log.front().arms.f.front().size();
    Matrix G = Matrix::Zero(d, d);
    Matrix Gexp = Matrix::Zero(d, d);
    Vector rhs = Vector::Zero(d);
    for (const auto& e : log) {
        if (e.selection_probs.size() != e.arms.arms() ||
            std::abs(e.selection_probs.sum() - 1.0) > 1e-8)
            throw MissingSelectionDistribution("centered_estimate: bad selection distribution");
        Vector mean = Vector::Zero(d);
        for (int a = 0; a < e.arms.arms(); ++a) mean += e.selection_probs[a] * e.arms.f[a];
        Vector fbar = e.arms.f[e.action] - mean;
        G.noalias() += fbar * fbar.transpose();
        rhs.noalias() += fbar * e.reward;
        if (variant == CenteredVariant::ExpectedGram) {
            for (int a = 0; a < e.arms.arms(); ++a) {
                Vector fa = e.arms.f[a] - mean;
                Gexp.noalias() += e.selection_probs[a] * fa * fa.transpose();
            }
        }
    }
    if (variant == CenteredVariant::RealizedGram)
        return detail::chol_solve(G + lambda * Matrix::Identity(d, d), rhs);
    return detail::chol_solve(Matrix::Identity(d, d) + G + Gexp, 2.0 * rhs);
}

// ---------------------------------------------------------------------------
// Actor-critic contextual bandit
// ---------------------------------------------------------------------------

struct AcOptions {
    double lambda = 0.1;        // stochasticity penalty weight
    double critic_lambda = 1.0; // ridge penalty of the critic
    int actor_steps = 50;
    double actor_step_size = 0.5;
};

/// Binary-action stochastic policy pi(1|x) = expit(g(x)' theta) with a ridge
/// critic; the actor re-maximizes the penalized Monte-Carlo value after each
/// absorption, warm-started from the previous theta.
class AcBanditAgent {
public:
    AcBanditAgent(int feature_dim, int policy_dim, const AcOptions& opt = {})
        : critic_(feature_dim, opt.critic_lambda),
          theta_(Vector::Zero(policy_dim)),
          opt_(opt) {}

    StepResult step(const Vector& g_x, Rng& rng) const {
        const double p1 = expit(g_x.dot(theta_));
        StepResult r;
        std::bernoulli_distribution coin(p1);
        r.action = ActionId{coin(rng) ? 1 : 0};
        r.selection_probs = Vector(2);
        r.selection_probs << 1.0 - p1, p1;
        return r;
    }

    void absorb(const Vector& g_x, const Vector& f_x0, const Vector& f_x1,
                const ActionId& action, double reward) {
        if (action.index > 1) throw NonBinaryAction("AC bandit: binary actions only");
        critic_.update(action.index == 1 ? f_x1 : f_x0, reward);
        history_.push_back({g_x, f_x0, f_x1});

        Vector mu = critic_.solve();
        const double t = static_cast<double>(history_.size());
        for (int it = 0; it < opt_.actor_steps; ++it) {
            Vector grad = Vector::Zero(theta_.size());
            for (const auto& h : history_) {
                const double y0 = h.f0.dot(mu), y1 = h.f1.dot(mu);
                const double p = expit(h.g.dot(theta_));
                grad += (y1 - y0) * p * (1.0 - p) * h.g;
                grad -= 2.0 * opt_.lambda * h.g * (h.g.dot(theta_));
            }
            grad /= t;
            theta_ += opt_.actor_step_size * grad;
            if (grad.norm() < 1e-10) break;
        }
    }

    const Vector& theta() const { return theta_; }
    const SuffStats& critic() const { return critic_; }

private:
    struct Context {
        Vector g, f0, f1;
    };
    SuffStats critic_;
    Vector theta_;
    AcOptions opt_;
    std::vector<Context> history_;
};

// ---------------------------------------------------------------------------
// EXP3
// ---------------------------------------------------------------------------

/// Context-free exponential weights with eta-uniform exploration; rewards
/// must be pre-scaled to [0,1].
class Exp3Agent {
public:
    Exp3Agent(int K, double eta) : weights_(Vector::Ones(K)), eta_(eta) {}

    Vector probs() const {
        Vector p = (1.0 - eta_) * weights_ / weights_.sum();
        p.array() += eta_ / static_cast<double>(weights_.size());
        return p;
    }

    StepResult step(Rng& rng) const {
        Vector p = probs();
        std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
        StepResult r;
        r.action = ActionId{dist(rng)};
        r.selection_probs = p;
        return r;
    }

    void absorb(const ActionId& action, double reward) {
        if (reward < 0.0 || reward > 1.0)
            throw RewardOutOfRange("EXP3 rewards must lie in [0,1]");
        const double p = probs()[action.index];
        const double estimate = reward / p;
        weights_[action.index] *=
            std::exp(eta_ * estimate / static_cast<double>(weights_.size()));
        // Rescale to keep weights bounded; selection probabilities are invariant.
        weights_ /= weights_.maxCoeff();
    }

private:
    Vector weights_;
    double eta_;
};

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct BaselineStep {
    ActionId action;
    Vector selection_probs;
};

inline BaselineStep epsilon_greedy_step(const Vector& scores, double epsilon, Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) throw Error("epsilon outside [0,1]");
    const int K = static_cast<int>(scores.size());
    const int greedy = argmax_tiebreak(scores);
    Vector p = Vector::Constant(K, epsilon / K);
    p[greedy] += 1.0 - epsilon;
    BaselineStep r;
    r.selection_probs = p;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < epsilon) {
        std::uniform_int_distribution<int> pick(0, K - 1);
        r.action = ActionId{pick(rng)};
    } else {
        r.action = ActionId{greedy};
    }
    return r;
}

inline BaselineStep boltzmann_step(const Vector& scores, double temperature, Rng& rng) {
    if (temperature <= 0.0) throw Error("Boltzmann temperature must be positive");
    Vector s = scores / temperature;
    Vector e = (s.array() - s.maxCoeff()).exp();
    Vector p = e / e.sum();
    std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
    BaselineStep r;
    r.selection_probs = p;
    r.action = ActionId{dist(rng)};
    return r;
}

}  // namespace adaptrl
