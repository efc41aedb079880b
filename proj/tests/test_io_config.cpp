#include <doctest.h>

#include <random>
#include <sstream>

#include "adaptrl/config.hpp"
#include "adaptrl/envs.hpp"
#include "adaptrl/io.hpp"

using namespace adaptrl;

TEST_CASE("dataset csv round trip preserves every field") {
    SmartSpec spec;
    Rng rng = make_rng({141, 0});
    Dataset data = smart_generate(spec, 25, rng).data;
    data.trajectories[3].stages[0].reward = std::nullopt;
    data.trajectories[5].stages[1].behavior_prob = std::nullopt;
    data.trajectories[7].stages[0].available = false;

    std::ostringstream os;
    write_dataset_csv(os, data, {"round trip fixture"});
    std::istringstream is(os.str());
    Dataset back = read_dataset_csv(is);

    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        REQUIRE(back.trajectories[i].stages.size() == 2);
        for (int t = 0; t < 2; ++t) {
            const auto& a = data.trajectories[i].stages[t];
            const auto& b = back.trajectories[i].stages[t];
            CHECK(a.state == b.state);
            CHECK(a.action.index == b.action.index);
            CHECK(a.reward == b.reward);
            CHECK(a.behavior_prob == b.behavior_prob);
            CHECK(a.available == b.available);
        }
    }
}

TEST_CASE("dataset csv requires the header row") {
    std::istringstream is("0,0,1.5,1,0.5,0.5,1\n");
    CHECK_THROWS_AS(read_dataset_csv(is), ConfigInvalid);
    std::istringstream bad_cols("traj_id,t,state_0,action,reward,behavior_prob,available\n0,0,1.5,1\n");
    CHECK_THROWS_AS(read_dataset_csv(bad_cols), ConfigInvalid);
}

TEST_CASE("regime json round trip keeps decisions intact") {
    SmartSpec spec;
    SmartOracle oracle = smart_oracle(spec);
    RegimeProvenance prov;
    prov.seed = 99;
    prov.method = "backward-induction";
    prov.hyperparams = Json{{"gamma", 1.0}};
    Json j = regime_to_json(oracle.regime, prov);
    CHECK(j.at("provenance").at("seed") == 99);
    CHECK(j.at("provenance").at("method") == "backward-induction");

    Regime back = regime_from_json(Json::parse(j.dump()));
    for (int x0 = 0; x0 < 2; ++x0) {
        Vector s0 = (Vector(3) << x0, 0.0, 0.0).finished();
        CHECK(back.decide(0, s0, 2).index == oracle.regime.decide(0, s0, 2).index);
        for (int a0 = 0; a0 < 2; ++a0)
            for (int r = 0; r < 2; ++r) {
                Vector s1 = (Vector(3) << x0, a0, r).finished();
                CHECK(back.decide(1, s1, 2).index ==
                      oracle.regime.decide(1, s1, 2).index);
            }
    }
}

TEST_CASE("regime json round trips softmax and clipped rules") {
    SoftmaxRule sm;
    sm.theta = (Matrix(2, 4) << 0.2, -0.1, 0.3, 0.0, -0.4, 0.5, 0.0, 0.1).finished();
    sm.temperature = 0.7;
    ClippedRule clip;
    clip.base = std::make_shared<DecisionRule>(DecisionRule{sm});
    clip.pi_min = 0.15;
    clip.pi_max = 0.85;
    Regime regime;
    regime.rules = {DecisionRule{clip}};

    Regime back = regime_from_json(regime_to_json(regime, {}));
    Rng rng = make_rng({142, 0});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        Vector s = Vector::Constant(1, normal(rng));
        Vector pa = regime.action_probs(0, s, 2);
        Vector pb = back.action_probs(0, s, 2);
        CHECK((pa - pb).norm() < 1e-15);
        CHECK(pa[1] >= 0.15);
        CHECK(pa[1] <= 0.85);
    }
    CHECK_THROWS_AS(regime_from_json(Json{{"stages", Json::array({Json{{"kind", "mystery"}}})}}),
                    ConfigInvalid);
}

TEST_CASE("interaction log round trip") {
    std::vector<InteractionRecord> log;
    Rng rng = make_rng({143, 0});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        InteractionRecord rec;
        rec.t = t;
        rec.arm_features = {(Vector(2) << normal(rng), normal(rng)).finished(),
                            (Vector(2) << normal(rng), normal(rng)).finished()};
        rec.action = t % 2;
        rec.selection_probs = (Vector(2) << 0.3, 0.7).finished();
        if (t != 4) rec.reward = normal(rng);
        rec.available = t != 7;
        log.push_back(std::move(rec));
    }
    std::ostringstream os;
    write_interaction_log(os, log, {"fixture"});
    std::istringstream is(os.str());
    std::vector<InteractionRecord> back = read_interaction_log(is);
    REQUIRE(back.size() == log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
        CHECK(back[i].t == log[i].t);
        CHECK(back[i].action == log[i].action);
        CHECK(back[i].available == log[i].available);
        CHECK(back[i].reward == log[i].reward);
        REQUIRE(back[i].arm_features.size() == 2);
        for (int a = 0; a < 2; ++a)
            CHECK(back[i].arm_features[a] == log[i].arm_features[a]);
        CHECK(back[i].selection_probs == log[i].selection_probs);
    }
}

TEST_CASE("format_double round trips random doubles") {
    Rng rng = make_rng({144, 0});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> scale(-30.0, 30.0);
    for (int i = 0; i < 500; ++i) {
        const double v = normal(rng) * std::pow(10.0, scale(rng));
        const std::string s = detail::format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(detail::format_double(0.5) == "0.5");
    CHECK(detail::format_double(1.0) == "1");
}

TEST_CASE("fnv1a hash constants") {
    CHECK(detail::fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(detail::fnv1a("a") != detail::fnv1a("b"));
    CHECK(detail::hash_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
    CHECK(detail::hash_hex(0) == "0000000000000000");
}

TEST_CASE("config typed getters and consumption tracking") {
    const std::string text =
        "# comment\n"
        "[sim]\n"
        "n = 100\n"
        "sigma = 0.25\n"
        "flag = true\n"
        "label = smart\n"
        "probs = 0.5, 0.25, 0.25\n";
    Config cfg = Config::parse(text);
    CHECK(cfg.has_section("sim"));
    CHECK(!cfg.has_section("env"));
    CHECK(cfg.get_int("sim", "n") == 100);
    CHECK(cfg.get_double("sim", "sigma") == 0.25);
    CHECK(cfg.get_bool("sim", "flag", false));
    CHECK(cfg.get_string("sim", "label") == "smart");
    CHECK(cfg.get_doubles("sim", "probs") == std::vector<double>{0.5, 0.25, 0.25});
    CHECK(cfg.get_double("sim", "absent", 9.5) == 9.5);
    CHECK_NOTHROW(cfg.ensure_all_consumed());
    CHECK(cfg.text() == text);
}

TEST_CASE("config rejects unconsumed keys with their line number") {
    Config cfg = Config::parse("[sim]\nn = 100\ntypo_key = 3\n");
    CHECK(cfg.get_int("sim", "n") == 100);
    try {
        cfg.ensure_all_consumed();
        FAIL("expected ConfigInvalid");
    } catch (const ConfigInvalid& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("typo_key") != std::string::npos);
        CHECK(msg.find("[sim]") != std::string::npos);
    }
}

TEST_CASE("config parse errors") {
    CHECK_THROWS_AS(Config::parse("[sim\nn = 1\n"), ConfigInvalid);
    CHECK_THROWS_AS(Config::parse("[sim]\njust a line\n"), ConfigInvalid);
    CHECK_THROWS_AS(Config::parse("[sim]\nn = 1\nn = 2\n"), ConfigInvalid);
    CHECK_THROWS_AS(Config::parse("[]\n"), ConfigInvalid);
    Config bad_num = Config::parse("[sim]\nn = many\n");
    CHECK_THROWS_AS(bad_num.get_int("sim", "n"), ConfigInvalid);
    Config bad_bool = Config::parse("[sim]\nflag = maybe\n");
    CHECK_THROWS_AS(bad_bool.get_bool("sim", "flag", false), ConfigInvalid);
    Config missing = Config::parse("[sim]\n");
    CHECK_THROWS_AS(missing.get_string("sim", "n"), ConfigInvalid);
}

TEST_CASE("regret csv thinning") {
    RegretCurve curve;
    curve.per_seed = Matrix::Zero(2, 10);
    for (int t = 0; t < 10; ++t) {
        curve.per_seed(0, t) = t + 1;
        curve.per_seed(1, t) = 2 * (t + 1);
    }
    curve.seeds = {11, 12};
    std::ostringstream os;
    write_regret_csv(os, curve, 5);
    CHECK(os.str() ==
          "seed,t,cumulative_regret\n"
          "11,5,5\n11,10,1e+01\n12,5,1e+01\n12,10,2e+01\n");
}

TEST_CASE("report json embeds the config hash") {
    ExperimentReport report;
    report.config_echo = "[sim]\nn = 1\n";
    report.config_hash = detail::fnv1a(report.config_echo);
    report.seeds = {1, 2};
    report.metrics = {{"value", 1.5}, {"agreement", 0.98}};
    Json j = report_to_json(report);
    CHECK(j.at("config_hash") == detail::hash_hex(report.config_hash));
    CHECK(j.at("config") == report.config_echo);
    CHECK(j.at("metrics").at("value") == 1.5);
    CHECK(j.at("seeds").size() == 2);
}
