#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "adaptrl/core.hpp"
#include "adaptrl/regression.hpp"

namespace adaptrl {

// ---------------------------------------------------------------------------
// Shared small fits
// ---------------------------------------------------------------------------

/// Ridge-penalized logistic regression via Newton/IRLS.
inline Vector logistic_fit(const Matrix& X, const Vector& y, double lambda = 1e-8,
                           int max_iters = 50) {
    Vector beta = Vector::Zero(X.cols());
    for (int it = 0; it < max_iters; ++it) {
        Vector eta = X * beta;
        Vector p = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
        Vector w = (p.array() * (1.0 - p.array())).cwiseMax(1e-10).matrix();
        Matrix H = X.transpose() * w.asDiagonal() * X +
                   lambda * Matrix::Identity(X.cols(), X.cols());
        Vector g = X.transpose() * (y - p) - lambda * beta;
        Vector step = detail::chol_solve(H, g);
        beta += step;
        if (step.norm() < 1e-10) break;
    }
    return beta;
}

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Q-learning with linear function approximation
// ---------------------------------------------------------------------------

/// Per-stage linear Q coefficients: Q_t(h, a) = beta' H_t0 + (psi' H_t1) a.
struct QModel {
    std::vector<Vector> beta;  // main-effect coefficients per stage
    std::vector<Vector> psi;   // treatment-interaction coefficients per stage
    StageMaps maps;
    double gamma = 1.0;

    std::size_t stages() const { return beta.size(); }

    double q_value(std::size_t t, const HistorySummary& s, const ActionId& a) const {
        return beta[t].dot(s.h0) + psi[t].dot(s.h1) * static_cast<double>(a.index);
    }

    /// Greedy regime with optional soft-thresholding of the binary contrast.
    Regime regime(double threshold = 0.0) const {
        Regime r;
        r.maps = maps;
        for (std::size_t t = 0; t < stages(); ++t) {
            DeterministicRule rule;
            const auto d0 = beta[t].size(), d1 = psi[t].size();
            rule.theta = Matrix::Zero(2, d0 + d1);
            rule.theta.row(0).head(d0) = beta[t].transpose();
            rule.theta.row(1).head(d0) = beta[t].transpose();
            rule.theta.row(1).tail(d1) = psi[t].transpose();
            rule.threshold = threshold;
            r.rules.push_back(DecisionRule{rule});
        }
        return r;
    }
};

struct QLearningOptions {
    double ridge_lambda = 0.0;        // 0 = OLS (the default fit)
    std::optional<Vector> weights;    // per-trajectory WLS weights
};

struct QLearningFit {
    QModel model;
    Regime regime;
};

/// Backward-recursive Q-learning: at each stage the pseudo-outcome is
/// Y_{t+1} + gamma * max_a Qhat_{t+1}, fitted by OLS/WLS on (H_t0, H_t1 * a).
inline QLearningFit q_learning_fit(const Dataset& data, const StageMaps& maps, double gamma,
                                   const QLearningOptions& opt = {}) {
    data.validate();
    if (data.trajectories.empty()) throw EmptyInput("q_learning_fit: empty dataset");
    const std::size_t T1 = data.trajectories.front().length();  // T+1 stages
    const std::size_t N = data.size();

    QModel model;
    model.maps = maps;
    model.gamma = gamma;
    model.beta.resize(T1);
    model.psi.resize(T1);

    Vector next_value = Vector::Zero(static_cast<Eigen::Index>(N));
    for (std::size_t t = T1; t-- > 0;) {
        const FeatureMap& map = maps.at(t);
        const std::size_t d0 = map.main_dim(
            static_cast<int>(data.trajectories.front().stages[t].state.size()));
        const std::size_t d1 = map.tailoring_dim(
            static_cast<int>(data.trajectories.front().stages[t].state.size()));
        Matrix X(N, d0 + d1);
        Vector y(N);
        for (std::size_t i = 0; i < N; ++i) {
            const auto& rec = data.trajectories[i].stages[t];
            if (!rec.reward) throw MissingReward("q_learning_fit: impute rewards first");
            HistorySummary s = history_summary(data.trajectories[i], t, map);
            X.row(static_cast<Eigen::Index>(i)) = design_row(s, rec.action).transpose();
            y[static_cast<Eigen::Index>(i)] =
                *rec.reward + gamma * next_value[static_cast<Eigen::Index>(i)];
        }
        Vector coef = opt.weights ? wls_fit(X, y, *opt.weights, opt.ridge_lambda)
                                  : ridge_fit(X, y, opt.ridge_lambda);
        model.beta[t] = coef.head(static_cast<Eigen::Index>(d0));
        model.psi[t] = coef.tail(static_cast<Eigen::Index>(d1));

        for (std::size_t i = 0; i < N; ++i) {
            HistorySummary s = history_summary(data.trajectories[i], t, map);
            double q0 = model.q_value(t, s, ActionId{0});
            double q1 = model.q_value(t, s, ActionId{1});
            next_value[static_cast<Eigen::Index>(i)] = std::max(q0, q1);
        }
    }
    return {model, model.regime(0.0)};
}

inline Regime soft_threshold_regime(const QModel& model, double threshold) {
    if (threshold < 0.0) throw Error("soft_threshold_regime: negative threshold");
    return model.regime(threshold);
}

// ---------------------------------------------------------------------------
// Tabular Q-learning
// ---------------------------------------------------------------------------

/// Q(x,a) += alpha * (y + gamma * max_a' Q(x',a') - Q(x,a)).
/// x_next < 0 marks a terminal transition (future value 0).
inline void tabular_q_update(Matrix& table, int x, int a, double y, int x_next, double alpha,
                             double gamma) {
    if (x < 0 || x >= table.rows() || a < 0 || a >= table.cols())
        throw IndexOutOfRange("tabular_q_update: state/action index");
    if (x_next >= table.rows()) throw IndexOutOfRange("tabular_q_update: next-state index");
    const double future = x_next < 0 ? 0.0 : table.row(x_next).maxCoeff();
    table(x, a) += alpha * (y + gamma * future - table(x, a));
}

// ---------------------------------------------------------------------------
// Contrast-based A-learning (G-estimation)
// ---------------------------------------------------------------------------

struct ContrastModel {
    std::vector<Vector> psi;              // contrast coefficients over H_t1, per stage
    std::vector<Vector> propensity_coef;  // logistic coefficients over H_t0 (empty = recorded)
    std::vector<Vector> adjunct_coef;     // theta(H) coefficients over adjunct H_t0
    StageMaps contrast_maps;
    double gamma = 1.0;
};

struct GEstimationOptions {
    bool use_recorded_propensity = true;
    StageMaps propensity_maps;  // used when fitting propensities
    StageMaps adjunct_maps;     // theta(H) working model features (H0 block)
    double gamma = 1.0;
};

struct GEstimationFit {
    ContrastModel model;
    Regime regime;
};

namespace detail {

/// Builds the greedy regime 1{psi' H_t1 > 0} as a deterministic rule over the
/// stacked (H0, H1) summary.
inline Regime contrast_regime(const std::vector<Vector>& psi, const StageMaps& maps,
                              const std::vector<Eigen::Index>& d0) {
    Regime r;
    r.maps = maps;
    for (std::size_t t = 0; t < psi.size(); ++t) {
        DeterministicRule rule;
        rule.theta = Matrix::Zero(2, d0[t] + psi[t].size());
        rule.theta.row(1).tail(psi[t].size()) = psi[t].transpose();
        r.rules.push_back(DecisionRule{rule});
    }
    return r;
}

}  // namespace detail

/// Backward G-estimation for the linear contrast C_t(h, a; psi) = (psi' H_t1) a,
/// reference treatment 0.  Stage-t estimating equations (lambda = H_t1):
///   sum_i H0_i                  (Ytil_i - A_i psi'H1_i - phi'H0adj_i) = 0
///   sum_i H1_i (A_i - pihat_i)  (Ytil_i - A_i psi'H1_i - phi'H0adj_i) = 0
inline GEstimationFit g_estimation_fit(const Dataset& data, const StageMaps& contrast_maps,
                                       const GEstimationOptions& opt = {}) {
    data.validate();
    if (data.trajectories.empty()) throw EmptyInput("g_estimation_fit: empty dataset");
    const std::size_t T1 = data.trajectories.front().length();
    const std::size_t N = data.size();

    ContrastModel model;
    model.contrast_maps = contrast_maps;
    model.gamma = opt.gamma;
    model.psi.resize(T1);
    model.propensity_coef.resize(T1);
    model.adjunct_coef.resize(T1);

    Vector pseudo = Vector::Zero(static_cast<Eigen::Index>(N));  // future adjusted value
    std::vector<Eigen::Index> contrast_d0(T1, 0);

    for (std::size_t t = T1; t-- > 0;) {
        std::vector<HistorySummary> cs(N), as_(N), ps(N);
        Vector ytil(N), act(N), prop(N);
        for (std::size_t i = 0; i < N; ++i) {
            const auto& rec = data.trajectories[i].stages[t];
            if (!rec.reward) throw MissingReward("g_estimation_fit: impute rewards first");
            if (data.actions_at(t) != 2 || rec.action.index > 1)
                throw NotBinaryAction("g_estimation_fit requires binary actions");
            cs[i] = history_summary(data.trajectories[i], t, contrast_maps.at(t));
            as_[i] = history_summary(data.trajectories[i], t, opt.adjunct_maps.at(t));
            ps[i] = history_summary(data.trajectories[i], t, opt.propensity_maps.at(t));
            act[static_cast<Eigen::Index>(i)] = rec.action.index;
            ytil[static_cast<Eigen::Index>(i)] =
                *rec.reward + opt.gamma * pseudo[static_cast<Eigen::Index>(i)];
        }
        contrast_d0[t] = cs[0].h0.size();

        if (opt.use_recorded_propensity) {
            for (std::size_t i = 0; i < N; ++i) {
                const auto& rec = data.trajectories[i].stages[t];
                if (!rec.behavior_prob)
                    throw PropensityOutOfRange("no recorded behavior probability");
                // Recorded value is P(A_t = a_t | H_t); convert to P(A_t = 1 | H_t).
                double p1 = rec.action.index == 1 ? *rec.behavior_prob
                                                  : 1.0 - *rec.behavior_prob;
                prop[static_cast<Eigen::Index>(i)] = p1;
            }
        } else {
            Matrix Xp(N, ps[0].h0.size());
            for (std::size_t i = 0; i < N; ++i)
                Xp.row(static_cast<Eigen::Index>(i)) = ps[i].h0.transpose();
            model.propensity_coef[t] = logistic_fit(Xp, act);
            prop = (1.0 / (1.0 + (-(Xp * model.propensity_coef[t])).array().exp())).matrix();
        }
        for (Eigen::Index i = 0; i < prop.size(); ++i)
            if (prop[i] <= 0.0 || prop[i] >= 1.0)
                throw PropensityOutOfRange("propensity outside (0,1)");

        const Eigen::Index q0 = as_[0].h0.size();
        const Eigen::Index q1 = cs[0].h1.size();
        Matrix M = Matrix::Zero(q0 + q1, q0 + q1);
        Vector rhs = Vector::Zero(q0 + q1);
        for (std::size_t i = 0; i < N; ++i) {
            const Eigen::Index ii = static_cast<Eigen::Index>(i);
            const double A = act[ii], res = act[ii] - prop[ii];
            M.block(0, 0, q0, q0).noalias() += as_[i].h0 * as_[i].h0.transpose();
            M.block(0, q0, q0, q1).noalias() += A * as_[i].h0 * cs[i].h1.transpose();
            M.block(q0, 0, q1, q0).noalias() += res * cs[i].h1 * as_[i].h0.transpose();
            M.block(q0, q0, q1, q1).noalias() += A * res * cs[i].h1 * cs[i].h1.transpose();
            rhs.head(q0).noalias() += as_[i].h0 * ytil[ii];
            rhs.tail(q1).noalias() += cs[i].h1 * (res * ytil[ii]);
        }
        Eigen::FullPivLU<Matrix> lu(M);
        if (!lu.isInvertible()) throw SingularSystem("g_estimation_fit: singular system");
        Vector sol = lu.solve(rhs);
        model.adjunct_coef[t] = sol.head(q0);
        model.psi[t] = sol.tail(q1);

        for (std::size_t i = 0; i < N; ++i) {
            const Eigen::Index ii = static_cast<Eigen::Index>(i);
            double c = model.psi[t].dot(cs[i].h1);
            pseudo[ii] = ytil[ii] + std::max(0.0, c) - act[ii] * c;
        }
    }

    GEstimationFit fit;
    fit.regime = detail::contrast_regime(model.psi, contrast_maps, contrast_d0);
    fit.model = std::move(model);
    return fit;
}

// ---------------------------------------------------------------------------
// IPTW / AIPTW value estimation
// ---------------------------------------------------------------------------

struct ValueEstimate {
    double point = 0.0;
    double std_error = 0.0;
    double effective_sample_fraction = 1.0;
    int bootstrap_resamples = 0;
    RngSpec bootstrap_seed;
    std::vector<std::string> warnings;
};

struct IptwOptions {
    double gamma = 1.0;  // discounting applied to per-stage rewards
    int bootstrap = 200;
    RngSpec rng;
};

namespace detail {

inline double trajectory_return(const Trajectory& traj, double gamma) {
    double sum = 0.0, g = 1.0;
    for (const auto& rec : traj.stages) {
        if (!rec.reward) throw MissingReward("return over missing rewards");
        sum += g * *rec.reward;
        g *= gamma;
    }
    return sum;
}

inline double ratio_estimate(const std::vector<double>& w, const std::vector<double>& wy,
                             const std::vector<std::size_t>& idx) {
    double sw = 0.0, swy = 0.0;
    for (std::size_t i : idx) {
        sw += w[i];
        swy += wy[i];
    }
    if (sw == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return swy / sw;
}

}  // namespace detail

/// Normalized IPTW estimator of the regime's value from behavior data.
inline ValueEstimate value_iptw(const Dataset& data, const Regime& regime,
                                const IptwOptions& opt = {}) {
    data.validate();
    const std::size_t N = data.size();
    if (N == 0) throw EmptyInput("value_iptw: empty dataset");

    std::vector<double> w(N), wy(N);
    for (std::size_t i = 0; i < N; ++i) {
        const auto& traj = data.trajectories[i];
        double weight = 1.0;
        for (std::size_t t = 0; t < traj.length(); ++t) {
            const auto& rec = traj.stages[t];
            if (!rec.behavior_prob)
                throw PropensityOutOfRange("value_iptw: behavior probability missing");
            ActionId d = regime.decide(t, rec.state, data.actions_at(t));
            if (d.index != rec.action.index) {
                weight = 0.0;
                break;
            }
            if (*rec.behavior_prob <= 0.0)
                throw PositivityViolation("value_iptw: zero behavior probability on match");
            weight /= *rec.behavior_prob;
        }
        w[i] = weight;
        wy[i] = weight == 0.0 ? 0.0 : weight * detail::trajectory_return(traj, opt.gamma);
    }

    double sw = 0.0, sw2 = 0.0;
    for (double wi : w) {
        sw += wi;
        sw2 += wi * wi;
    }
    if (sw == 0.0) throw NoMatchedTrajectories("value_iptw: no trajectory matches the regime");

    ValueEstimate est;
    std::vector<std::size_t> all(N);
    for (std::size_t i = 0; i < N; ++i) all[i] = i;
    est.point = detail::ratio_estimate(w, wy, all);
    est.effective_sample_fraction = (sw * sw) / (static_cast<double>(N) * sw2);
    if (est.effective_sample_fraction < 0.01)
        est.warnings.push_back("degenerate IPTW weights: effective sample fraction < 0.01");

    est.bootstrap_resamples = opt.bootstrap;
    est.bootstrap_seed = opt.rng;
    if (opt.bootstrap > 1) {
        Rng rng = make_rng(opt.rng);
        std::uniform_int_distribution<std::size_t> pick(0, N - 1);
        std::vector<double> reps;
        reps.reserve(opt.bootstrap);
        std::vector<std::size_t> idx(N);
        for (int b = 0; b < opt.bootstrap; ++b) {
            for (std::size_t i = 0; i < N; ++i) idx[i] = pick(rng);
            double v = detail::ratio_estimate(w, wy, idx);
            if (std::isfinite(v)) reps.push_back(v);
        }
        if (reps.size() > 1) {
            double mean = 0.0;
            for (double v : reps) mean += v;
            mean /= static_cast<double>(reps.size());
            double var = 0.0;
            for (double v : reps) var += (v - mean) * (v - mean);
            est.std_error = std::sqrt(var / static_cast<double>(reps.size() - 1));
        }
    }
    return est;
}

struct AiptwOptions {
    bool use_recorded_propensity = true;
    FeatureMap propensity_map;  // logistic model features when fitting
    FeatureMap outcome_map;     // outcome working model (H0 main, H1 interaction)
    int bootstrap = 200;
    RngSpec rng;
};

/// Single-stage doubly robust value estimator with plug-in propensity and
/// outcome models.
inline ValueEstimate value_aiptw(const Dataset& data, const Regime& regime,
                                 const AiptwOptions& opt = {}) {
    data.validate();
    const std::size_t N = data.size();
    if (N == 0) throw EmptyInput("value_aiptw: empty dataset");
    if (data.trajectories.front().length() != 1)
        throw Error("value_aiptw: single-stage estimator");

    Matrix Xout(N, 0);
    Vector y(N), act(N);
    std::vector<HistorySummary> os(N), ps(N);
    for (std::size_t i = 0; i < N; ++i) {
        const auto& rec = data.trajectories[i].stages[0];
        if (!rec.reward) throw MissingReward("value_aiptw");
        if (rec.action.index > 1) throw NotBinaryAction("value_aiptw: binary actions only");
        os[i] = history_summary(data.trajectories[i], 0, opt.outcome_map);
        ps[i] = history_summary(data.trajectories[i], 0, opt.propensity_map);
        y[static_cast<Eigen::Index>(i)] = *rec.reward;
        act[static_cast<Eigen::Index>(i)] = rec.action.index;
    }

    // Outcome working model on (H0, H1 * a).
    Xout.resize(N, os[0].h0.size() + os[0].h1.size());
    for (std::size_t i = 0; i < N; ++i)
        Xout.row(static_cast<Eigen::Index>(i)) =
            design_row(os[i], data.trajectories[i].stages[0].action).transpose();
    Vector ocoef = ridge_fit(Xout, y, 1e-8);
    const Eigen::Index d0 = os[0].h0.size();

    Vector prop1(N);
    if (opt.use_recorded_propensity) {
        for (std::size_t i = 0; i < N; ++i) {
            const auto& rec = data.trajectories[i].stages[0];
            if (!rec.behavior_prob) throw PropensityOutOfRange("value_aiptw: no propensity");
            prop1[static_cast<Eigen::Index>(i)] =
                rec.action.index == 1 ? *rec.behavior_prob : 1.0 - *rec.behavior_prob;
        }
    } else {
        Matrix Xp(N, ps[0].h0.size());
        for (std::size_t i = 0; i < N; ++i)
            Xp.row(static_cast<Eigen::Index>(i)) = ps[i].h0.transpose();
        Vector pcoef = logistic_fit(Xp, act);
        prop1 = (1.0 / (1.0 + (-(Xp * pcoef)).array().exp())).matrix();
    }

    std::vector<double> contrib(N);
    for (std::size_t i = 0; i < N; ++i) {
        const Eigen::Index ii = static_cast<Eigen::Index>(i);
        if (prop1[ii] <= 0.0 || prop1[ii] >= 1.0)
            throw PropensityOutOfRange("value_aiptw: propensity outside (0,1)");
        ActionId d = regime.decide(0, data.trajectories[i].stages[0].state, 2);
        const double pi_d = d.index == 1 ? prop1[ii] : 1.0 - prop1[ii];
        const double mu_d = ocoef.head(d0).dot(os[i].h0) +
                            ocoef.tail(os[i].h1.size()).dot(os[i].h1) * d.index;
        const double match = act[ii] == d.index ? 1.0 : 0.0;
        contrib[i] = match * y[ii] / pi_d - (match - pi_d) / pi_d * mu_d;
    }

    ValueEstimate est;
    double mean = 0.0;
    for (double c : contrib) mean += c;
    est.point = mean / static_cast<double>(N);
    double var = 0.0;
    for (double c : contrib) var += (c - est.point) * (c - est.point);
    est.std_error = std::sqrt(var / static_cast<double>(N - 1) / static_cast<double>(N));
    est.bootstrap_resamples = 0;
    return est;
}

/// Plug-in outcome-model value: P_N[ muhat(d(H), H) ].  Not doubly robust;
/// used as the comparison arm in misspecification experiments.
inline ValueEstimate value_plugin(const Dataset& data, const Regime& regime,
                                  const FeatureMap& outcome_map) {
    data.validate();
    const std::size_t N = data.size();
    if (N == 0) throw EmptyInput("value_plugin: empty dataset");
    Matrix X(N, 0);
    Vector y(N);
    std::vector<HistorySummary> os(N);
    for (std::size_t i = 0; i < N; ++i) {
        const auto& rec = data.trajectories[i].stages[0];
        if (!rec.reward) throw MissingReward("value_plugin");
        os[i] = history_summary(data.trajectories[i], 0, outcome_map);
        y[static_cast<Eigen::Index>(i)] = *rec.reward;
    }
    X.resize(N, os[0].h0.size() + os[0].h1.size());
    for (std::size_t i = 0; i < N; ++i)
        X.row(static_cast<Eigen::Index>(i)) =
            design_row(os[i], data.trajectories[i].stages[0].action).transpose();
    Vector coef = ridge_fit(X, y, 1e-8);
    const Eigen::Index d0 = os[0].h0.size();

    ValueEstimate est;
    double mean = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        ActionId d = regime.decide(0, data.trajectories[i].stages[0].state, 2);
        mean += coef.head(d0).dot(os[i].h0) +
                coef.tail(os[i].h1.size()).dot(os[i].h1) * d.index;
    }
    est.point = mean / static_cast<double>(N);
    return est;
}

// ---------------------------------------------------------------------------
// Outcome weighted learning (OWL / BOWL)
// ---------------------------------------------------------------------------

struct OwlOptions {
    double lambda = 0.01;
    int max_iters = 2000;
    double step_scale = 1.0;     // step k is step_scale / sqrt(k)
    double projection_radius = 1e3;
};

struct OwlFit {
    Vector f;              // linear rule over H_0 features
    double objective = 0.0;
    bool degenerate = false;  // ||f|| <= 1e-3
    Regime regime;
};

namespace detail {

struct OwlSample {
    Vector phi;     // classifier features
    double signed_a;  // action coded -1/+1
    double weight;    // Y / prod(pi), >= 0
};

inline OwlFit owl_solve(const std::vector<OwlSample>& samples, Eigen::Index h1_dim,
                        const FeatureMap& map, const OwlOptions& opt) {
    if (samples.empty()) throw EmptyStageSample("owl: no usable samples");
    const Eigen::Index d = samples[0].phi.size();
    const double n = static_cast<double>(samples.size());

    auto objective = [&](const Vector& w) {
        double obj = 0.0;
        for (const auto& s : samples)
            obj += s.weight * std::max(1.0 - s.signed_a * w.dot(s.phi), 0.0);
        return obj / n + opt.lambda * w.squaredNorm();
    };

    Vector w = Vector::Zero(d), best = w;
    double best_obj = objective(w);
    for (int k = 1; k <= opt.max_iters; ++k) {
        Vector g = 2.0 * opt.lambda * w;
        for (const auto& s : samples)
            if (s.signed_a * w.dot(s.phi) < 1.0) g -= (s.weight / n) * s.signed_a * s.phi;
        w -= (opt.step_scale / std::sqrt(static_cast<double>(k))) * g;
        if (w.norm() > opt.projection_radius) w *= opt.projection_radius / w.norm();
        double obj = objective(w);
        if (obj < best_obj) {
            best_obj = obj;
            best = w;
        }
    }

    OwlFit fit;
    fit.f = best;
    fit.objective = best_obj;
    fit.degenerate = best.norm() <= 1e-3;
    fit.regime.maps = map;
    DeterministicRule rule;
    rule.theta = Matrix::Zero(2, d + h1_dim);
    rule.theta.row(1).head(d) = best.transpose();
    fit.regime.rules.push_back(DecisionRule{rule});
    return fit;
}

}  // namespace detail

/// Single-stage OWL: hinge-surrogate weighted classification solved by
/// projected subgradient descent.  Requires non-negative rewards and binary
/// actions; the rule is sign(f' H_0).
inline OwlFit owl_fit(const Dataset& data, const FeatureMap& map, const OwlOptions& opt = {}) {
    data.validate();
    if (data.trajectories.empty()) throw EmptyInput("owl_fit: empty dataset");
    if (data.trajectories.front().length() != 1) throw Error("owl_fit: single-stage only");

    std::vector<detail::OwlSample> samples;
    Eigen::Index h1_dim = 0;
    for (const auto& traj : data.trajectories) {
        const auto& rec = traj.stages[0];
        if (!rec.reward) throw MissingReward("owl_fit");
        if (*rec.reward < 0.0) throw NegativeReward("owl_fit: rewards must be non-negative");
        if (rec.action.index > 1) throw NotBinaryAction("owl_fit");
        if (!rec.behavior_prob) throw PropensityOutOfRange("owl_fit: no behavior probability");
        HistorySummary s = history_summary(traj, 0, map);
        h1_dim = s.h1.size();
        samples.push_back({s.h0, static_cast<double>(rec.action.signed_code()),
                           *rec.reward / *rec.behavior_prob});
    }
    return detail::owl_solve(samples, h1_dim, map, opt);
}

/// Backward OWL over T+1 stages: stage-t weights multiply the return by the
/// indicator of concordance with the later fitted rules, divided by the
/// product of behavior probabilities from stage t onward.
inline std::vector<OwlFit> bowl_fit(const Dataset& data, const FeatureMap& map,
                                    const std::vector<OwlOptions>& stage_opts = {}) {
    data.validate();
    if (data.trajectories.empty()) throw EmptyInput("bowl_fit: empty dataset");
    const std::size_t T1 = data.trajectories.front().length();
    const std::size_t N = data.size();

    std::vector<double> total(N);
    for (std::size_t i = 0; i < N; ++i) {
        total[i] = detail::trajectory_return(data.trajectories[i], 1.0);
        if (total[i] < 0.0) throw NegativeReward("bowl_fit: negative return");
    }

    std::vector<OwlFit> fits(T1);
    std::vector<double> concordant(N, 1.0);   // prod_{tau > t} 1{A_tau = dhat_tau}
    std::vector<double> prob_prod(N, 1.0);    // prod_{tau >= t} pi_tau

    for (std::size_t t = T1; t-- > 0;) {
        std::vector<detail::OwlSample> samples;
        Eigen::Index h1_dim = 0;
        std::vector<HistorySummary> summaries(N);
        bool any_weight = false;
        for (std::size_t i = 0; i < N; ++i) {
            const auto& rec = data.trajectories[i].stages[t];
            if (!rec.reward) throw MissingReward("bowl_fit");
            if (rec.action.index > 1) throw NotBinaryAction("bowl_fit");
            if (!rec.behavior_prob)
                throw PropensityOutOfRange("bowl_fit: no behavior probability");
            prob_prod[i] *= *rec.behavior_prob;
            summaries[i] = history_summary(data.trajectories[i], t, map);
            h1_dim = summaries[i].h1.size();
            const double weight = total[i] * concordant[i] / prob_prod[i];
            if (weight > 0.0) any_weight = true;
            samples.push_back({summaries[i].h0,
                               static_cast<double>(rec.action.signed_code()), weight});
        }
        if (!any_weight) throw EmptyStageSample("bowl_fit: all stage weights vanish");

        const OwlOptions opt = t < stage_opts.size() ? stage_opts[t] : OwlOptions{};
        fits[t] = detail::owl_solve(samples, h1_dim, map, opt);

        for (std::size_t i = 0; i < N; ++i) {
            const auto& rec = data.trajectories[i].stages[t];
            const int d = fits[t].f.dot(summaries[i].h0) > 0.0 ? 1 : 0;
            if (d != rec.action.index) concordant[i] = 0.0;
        }
    }
    return fits;
}

// ---------------------------------------------------------------------------
// Marginal structural model weights
// ---------------------------------------------------------------------------

/// w_t = 1 / prod_{tau <= t} pi_tau(A_tau | H_tau), from recorded probabilities.
inline std::vector<double> msm_weights(const Trajectory& traj) {
    std::vector<double> w;
    double prod = 1.0;
    for (const auto& rec : traj.stages) {
        if (!rec.behavior_prob || *rec.behavior_prob <= 0.0)
            throw PositivityViolation("msm_weights: missing or zero behavior probability");
        prod *= *rec.behavior_prob;
        w.push_back(1.0 / prod);
    }
    return w;
}

}  // namespace adaptrl
