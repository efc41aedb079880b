#include <doctest.h>

#include "adaptrl/envs.hpp"

using namespace adaptrl;

namespace {

MdpSpec chain3(double gamma) {
    MdpSpec spec;
    spec.n_states = 3;
    spec.n_actions = 2;
    spec.absorbing = 2;
    spec.gamma = gamma;
    Matrix P0 = Matrix::Zero(3, 3), P1 = Matrix::Zero(3, 3);
    P0(0, 1) = 1.0;
    P0(1, 2) = 1.0;
    P0(2, 2) = 1.0;
    P1(0, 2) = 1.0;
    P1(1, 2) = 1.0;
    P1(2, 2) = 1.0;
    spec.P = {P0, P1};
    spec.R = (Matrix(3, 2) << 1.0, 2.0, 3.0, 0.5, 0.0, 0.0).finished();
    return spec;
}

Vector smart_state(int x0, int a0, int r) {
    return (Vector(3) << x0, a0, r).finished();
}

}  // namespace

TEST_CASE("smart oracle defaults to action 0 when there is no contrast") {
    SmartSpec spec;
    spec.psi0.setZero();
    spec.psi1.setZero();
    spec.beta1[2] = 0.0;     // no stage-0 carry-over into the stage-1 mean
    spec.resp_coef[2] = 0.0; // no stage-0 effect on responder status
    SmartOracle oracle = smart_oracle(spec);
    for (int x0 = 0; x0 < 2; ++x0)
        CHECK(oracle.regime.decide(0, smart_state(x0, 0, 0), 2).index == 0);
    for (int x0 = 0; x0 < 2; ++x0)
        for (int a0 = 0; a0 < 2; ++a0)
            for (int r = 0; r < 2; ++r)
                CHECK(oracle.regime.decide(1, smart_state(x0, a0, r), 2).index == 0);
}

TEST_CASE("smart oracle decisions maximize the Q tables") {
    SmartSpec spec;
    SmartOracle oracle = smart_oracle(spec);
    for (int x0 = 0; x0 < 2; ++x0) {
        const int d0 = oracle.regime.decide(0, smart_state(x0, 0, 0), 2).index;
        CHECK(oracle.q0(x0, d0) == doctest::Approx(oracle.q0.row(x0).maxCoeff()));
        for (int a0 = 0; a0 < 2; ++a0)
            for (int r = 0; r < 2; ++r) {
                const int row = x0 * 4 + a0 * 2 + r;
                const int d1 = oracle.regime.decide(1, smart_state(x0, a0, r), 2).index;
                CHECK(oracle.q1(row, d1) == doctest::Approx(oracle.q1.row(row).maxCoeff()));
                CHECK(oracle.q1(row, d1) ==
                      doctest::Approx(spec.stage1_mean(x0, a0, r, d1)));
            }
    }
}

TEST_CASE("smart oracle value dominates every static regime") {
    SmartSpec spec;
    SmartOracle oracle = smart_oracle(spec);
    for (int a0 = 0; a0 < 2; ++a0) {
        for (int a1 = 0; a1 < 2; ++a1) {
            double v = 0.0;
            for (int x0 = 0; x0 < 2; ++x0) {
                const double px = x0 == 1 ? spec.context_prob : 1.0 - spec.context_prob;
                const double q = spec.responder_prob(x0, a0);
                double stage1 = 0.0;
                for (int r = 0; r < 2; ++r)
                    stage1 += (r == 1 ? q : 1.0 - q) * spec.stage1_mean(x0, a0, r, a1);
                v += px * (spec.stage0_mean(x0, a0) + spec.gamma * stage1);
            }
            CHECK(oracle.stage_values[0] >= v - 1e-12);
        }
    }
}

TEST_CASE("smart generation is exact with zero noise") {
    SmartSpec spec;
    spec.sigma = 0.0;
    Rng rng = make_rng({111, 0});
    Dataset data = smart_generate(spec, 50, rng).data;
    data.validate();
    for (const auto& traj : data.trajectories) {
        const int x0 = static_cast<int>(traj.stages[0].state[0]);
        const int a0 = traj.stages[0].action.index;
        CHECK(*traj.stages[0].reward == doctest::Approx(spec.stage0_mean(x0, a0)));
        const int r = static_cast<int>(traj.stages[1].state[2]);
        const int a1 = traj.stages[1].action.index;
        CHECK(*traj.stages[1].reward ==
              doctest::Approx(spec.stage1_mean(x0, a0, r, a1)));
        CHECK(*traj.stages[0].behavior_prob == doctest::Approx(0.5));
    }
}

TEST_CASE("smart generation is deterministic per seed") {
    SmartSpec spec;
    Rng a = make_rng({112, 0});
    Rng b = make_rng({112, 0});
    Dataset da = smart_generate(spec, 30, a).data;
    Dataset db = smart_generate(spec, 30, b).data;
    for (std::size_t i = 0; i < da.size(); ++i)
        for (int t = 0; t < 2; ++t) {
            CHECK(*da.trajectories[i].stages[t].reward ==
                  *db.trajectories[i].stages[t].reward);
            CHECK(da.trajectories[i].stages[t].action.index ==
                  db.trajectories[i].stages[t].action.index);
        }
}

TEST_CASE("responder frequencies match the closed-form probability") {
    SmartSpec spec;
    Rng rng = make_rng({113, 0});
    Dataset data = smart_generate(spec, 20000, rng).data;
    int counts[2][2] = {{0, 0}, {0, 0}};
    int responders[2][2] = {{0, 0}, {0, 0}};
    for (const auto& traj : data.trajectories) {
        const int x0 = static_cast<int>(traj.stages[0].state[0]);
        const int a0 = traj.stages[0].action.index;
        ++counts[x0][a0];
        responders[x0][a0] += static_cast<int>(traj.stages[1].state[2]);
    }
    for (int x0 = 0; x0 < 2; ++x0)
        for (int a0 = 0; a0 < 2; ++a0) {
            const double p = spec.responder_prob(x0, a0);
            const double freq =
                static_cast<double>(responders[x0][a0]) / counts[x0][a0];
            const double se = std::sqrt(p * (1.0 - p) / counts[x0][a0]);
            CHECK(std::abs(freq - p) < 4.0 * se);
        }
}

TEST_CASE("bandit control arm has zero conditional effect") {
    BanditEnvSpec spec;
    spec.K = 3;
    spec.p = 2;
    spec.control_arm = 0;
    spec.noise = 0.0;
    Rng rng = make_rng({114, 0});
    BanditEnvState st;
    bandit_env_reset(spec, st, rng);
    for (int t = 0; t < 20; ++t) {
        std::vector<Vector> before = st.arm_features;
        BanditStep step = bandit_env_step(spec, t, t % 3, st, rng);
        CHECK(step.conditional_means[0] == 0.0);
        for (int a = 1; a < 3; ++a)
            CHECK(step.conditional_means[a] ==
                  doctest::Approx(before[a].dot(spec.effect_vector())));
        CHECK(*step.reward == doctest::Approx(step.conditional_means[t % 3]));
    }
}

TEST_CASE("bandit sinusoidal baseline shifts every arm") {
    BanditEnvSpec spec;
    spec.K = 2;
    spec.p = 1;
    spec.control_arm = 0;
    spec.stationary = false;
    spec.baseline = BaselineKind::Sinusoidal;
    spec.baseline_amp = 2.0;
    spec.baseline_period = 8.0;
    spec.noise = 0.0;
    Rng rng = make_rng({115, 0});
    BanditEnvState st;
    bandit_env_reset(spec, st, rng);
    bandit_env_step(spec, 0, 0, st, rng);
    BanditStep step = bandit_env_step(spec, 2, 0, st, rng);  // quarter period
    CHECK(step.baseline == doctest::Approx(2.0));
    CHECK(step.conditional_means[0] == doctest::Approx(2.0));
}

TEST_CASE("bandit habituation tracks days since each send") {
    BanditEnvSpec spec;
    spec.K = 2;
    spec.p = 1;
    spec.habituation = true;
    spec.habituation_coef = 0.5;
    Rng rng = make_rng({116, 0});
    BanditEnvState st;
    bandit_env_reset(spec, st, rng);
    CHECK(st.arm_features[0].size() == 2);
    CHECK(st.arm_features[0][1] == doctest::Approx(1.0));  // starts at the 7-day cap
    bandit_env_step(spec, 0, 0, st, rng);
    CHECK(st.days_since[0] == 0.0);
    CHECK(st.arm_features[0][1] == doctest::Approx(0.0));
    CHECK(st.arm_features[1][1] == doctest::Approx(1.0));  // still capped
    bandit_env_step(spec, 1, 1, st, rng);
    CHECK(st.arm_features[0][1] == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("bandit missing responses and intercept pinning") {
    BanditEnvSpec spec;
    spec.K = 2;
    spec.p = 2;
    spec.missing_prob = 1.0;
    spec.intercept_feature = true;
    Rng rng = make_rng({117, 0});
    BanditEnvState st;
    bandit_env_reset(spec, st, rng);
    for (int t = 0; t < 10; ++t) {
        CHECK(st.arm_features[0][0] == 1.0);
        CHECK(st.arm_features[1][0] == 1.0);
        BanditStep step = bandit_env_step(spec, t, 0, st, rng);
        CHECK(!step.reward.has_value());
    }
}

TEST_CASE("single-stage design records the true propensity") {
    SingleStageSpec spec;
    CHECK(spec.treat_all_value() == doctest::Approx(2.5));
    Rng rng = make_rng({118, 0});
    Dataset data = single_stage_generate(spec, 500, rng);
    data.validate();
    for (const auto& traj : data.trajectories) {
        const auto& rec = traj.stages[0];
        const double p1 = spec.propensity(rec.state[0]);
        const double expected = rec.action.index == 1 ? p1 : 1.0 - p1;
        CHECK(*rec.behavior_prob == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("single-stage outcomes are exact with zero noise") {
    SingleStageSpec spec;
    spec.sigma = 0.0;
    Rng rng = make_rng({119, 0});
    Dataset data = single_stage_generate(spec, 100, rng);
    for (const auto& traj : data.trajectories) {
        const auto& rec = traj.stages[0];
        CHECK(*rec.reward ==
              doctest::Approx(spec.outcome_mean(rec.state[0], rec.action.index)));
    }
}

TEST_CASE("mdp rollout terminal bookkeeping") {
    MdpSpec spec = chain3(0.9);
    Rng rng = make_rng({120, 0});
    MdpPolicy walk = mdp_deterministic_policy({0, 0, 0}, 2);

    MdpRolloutOptions opt;
    opt.start_state = 0;
    Dataset data = mdp_env_rollout(spec, walk, 1, rng, opt);
    REQUIRE(data.trajectories.size() == 1);
    const Trajectory& traj = data.trajectories[0];
    REQUIRE(traj.stages.size() == 2);  // 0 -> 1 -> absorbed
    CHECK(traj.stages[0].state[0] == 0.0);
    CHECK(traj.stages[1].state[0] == 1.0);
    CHECK(*traj.stages[0].reward == 1.0);
    CHECK(*traj.stages[1].reward == 3.0);
    CHECK(!traj.censored);
    CHECK(!traj.terminal_state.has_value());

    opt.max_steps = 1;
    Dataset capped = mdp_env_rollout(spec, walk, 1, rng, opt);
    const Trajectory& cut = capped.trajectories[0];
    REQUIRE(cut.stages.size() == 1);
    CHECK(cut.censored);
    REQUIRE(cut.terminal_state.has_value());
    CHECK((*cut.terminal_state)[0] == 1.0);

    opt.max_steps = 1000;
    opt.start_state = 2;  // absorbing from the outset
    Dataset absorbed = mdp_env_rollout(spec, walk, 1, rng, opt);
    CHECK(absorbed.trajectories[0].stages.empty());
}

TEST_CASE("value_iteration solves the chain in closed form") {
    DpSolution dp = value_iteration(chain3(0.9));
    CHECK(dp.Q(0, 0) == doctest::Approx(3.7).epsilon(1e-10));
    CHECK(dp.Q(0, 1) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(dp.Q(1, 0) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(dp.Q(1, 1) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(dp.policy[0] == 0);
    CHECK(dp.policy[1] == 0);
    CHECK(dp.V[2] == doctest::Approx(0.0));
}

TEST_CASE("rollout returns agree with exact policy evaluation") {
    MdpSpec spec = chain3(0.9);
    MdpPolicy uniform = Matrix::Constant(3, 2, 0.5);
    Vector exact = mdp_policy_evaluation(spec, uniform);

    Rng rng = make_rng({121, 0});
    MdpRolloutOptions opt;
    opt.start_state = 0;
    Dataset data = mdp_env_rollout(spec, uniform, 20000, rng, opt);
    double sum = 0.0, sumsq = 0.0;
    for (const auto& traj : data.trajectories) {
        std::vector<double> rewards;
        for (const auto& rec : traj.stages) rewards.push_back(*rec.reward);
        const double g = discounted_return(rewards, spec.gamma);
        sum += g;
        sumsq += g * g;
    }
    const double n = static_cast<double>(data.size());
    const double mean = sum / n;
    const double se = std::sqrt((sumsq / n - mean * mean) / n);
    CHECK(std::abs(mean - exact[0]) < 4.0 * se);
}

TEST_CASE("mdp spec validation") {
    MdpSpec spec = chain3(0.9);
    MdpSpec missing = spec;
    missing.P.pop_back();
    CHECK_THROWS_AS(missing.validate(), DimensionMismatch);
    MdpSpec bad_r = spec;
    bad_r.R = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(bad_r.validate(), DimensionMismatch);
    MdpSpec bad_p = spec;
    bad_p.P[0](0, 1) = 0.4;  // row no longer sums to one
    CHECK_THROWS_AS(bad_p.validate(), Error);
}

TEST_CASE("apply_locf carries the last reward forward") {
    Dataset data;
    Trajectory traj;
    for (int t = 0; t < 3; ++t) {
        StageRecord rec;
        rec.state = Vector::Zero(1);
        rec.action = ActionId{0};
        traj.stages.push_back(rec);
    }
    traj.stages[0].reward = 5.0;
    data.trajectories.push_back(traj);

    LocfResult out = apply_locf(data);
    CHECK(!out.had_leading_missing);
    const auto& filled = out.data.trajectories[0];
    CHECK(*filled.stages[0].reward == 5.0);
    CHECK(*filled.stages[1].reward == 5.0);
    CHECK(*filled.stages[2].reward == 5.0);
    CHECK(out.imputed[0] == std::vector<bool>{false, true, true});

    // fully observed data passes through untouched
    Dataset full = out.data;
    LocfResult same = apply_locf(full);
    CHECK(!same.had_leading_missing);
    for (const auto& mask : same.imputed)
        for (bool m : mask) CHECK(!m);

    // leading missing defaults to zero and raises the flag
    Dataset leading;
    Trajectory lead = traj;
    lead.stages[0].reward = std::nullopt;
    lead.stages[1].reward = 3.0;
    leading.trajectories.push_back(lead);
    LocfResult fixed = apply_locf(leading);
    CHECK(fixed.had_leading_missing);
    CHECK(*fixed.data.trajectories[0].stages[0].reward == 0.0);
    CHECK(*fixed.data.trajectories[0].stages[1].reward == 3.0);
    CHECK(fixed.imputed[0][0]);
}
