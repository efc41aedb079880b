// Config-driven experiment runner: simulate / fit / evaluate / regret / dr.
// Exit codes: 0 success, 2 config validation error, 3 runtime error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "adaptrl/config.hpp"
#include "adaptrl/envs.hpp"
#include "adaptrl/eval.hpp"
#include "adaptrl/indefinite_dtr.hpp"
#include "adaptrl/io.hpp"
#include "adaptrl/offline_dtr.hpp"

namespace fs = std::filesystem;
using namespace adaptrl;

namespace {

struct RunContext {
    Config cfg;
    std::uint64_t seed = 0;
    int threads = 1;
    fs::path out;
    std::string hash_hex;  // of the config text

    fs::path path(const std::string& stem, const std::string& ext) const {
        return out / (stem + "-" + hash_hex + ext);
    }

    std::string hash_comment() const { return "config_hash=" + hash_hex; }

    void write_config_echo() const {
        write_text_file((out / ("config-" + hash_hex + ".ini")).string(), cfg.text());
    }
};

Vector vec_from(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

SmartSpec parse_smart(Config& cfg) {
    SmartSpec spec;
    spec.sigma = cfg.get_double("env", "sigma", spec.sigma);
    spec.gamma = cfg.get_double("env", "gamma", spec.gamma);
    spec.context_prob = cfg.get_double("env", "context_prob", spec.context_prob);
    spec.rand_prob[0] = cfg.get_double("env", "rand_prob0", spec.rand_prob[0]);
    spec.rand_prob[1] = cfg.get_double("env", "rand_prob1", spec.rand_prob[1]);
    spec.resp_threshold = cfg.get_double("env", "resp_threshold", spec.resp_threshold);
    if (cfg.has("env", "beta0")) spec.beta0 = vec_from(cfg.get_doubles("env", "beta0"));
    if (cfg.has("env", "psi0")) spec.psi0 = vec_from(cfg.get_doubles("env", "psi0"));
    if (cfg.has("env", "beta1")) spec.beta1 = vec_from(cfg.get_doubles("env", "beta1"));
    if (cfg.has("env", "psi1")) spec.psi1 = vec_from(cfg.get_doubles("env", "psi1"));
    if (cfg.has("env", "resp_coef"))
        spec.resp_coef = vec_from(cfg.get_doubles("env", "resp_coef"));
    spec.validate();
    return spec;
}

SingleStageSpec parse_single_stage(Config& cfg) {
    SingleStageSpec spec;
    spec.sigma = cfg.get_double("env", "sigma", spec.sigma);
    if (cfg.has("env", "outcome_beta"))
        spec.outcome_beta = vec_from(cfg.get_doubles("env", "outcome_beta"));
    if (cfg.has("env", "outcome_psi"))
        spec.outcome_psi = vec_from(cfg.get_doubles("env", "outcome_psi"));
    if (cfg.has("env", "prop_coef"))
        spec.prop_coef = vec_from(cfg.get_doubles("env", "prop_coef"));
    spec.validate();
    return spec;
}

BanditEnvSpec parse_bandit(Config& cfg) {
    BanditEnvSpec spec;
    spec.K = static_cast<int>(cfg.get_int("env", "arms", spec.K));
    spec.p = static_cast<int>(cfg.get_int("env", "feature_dim", spec.p));
    if (cfg.has("env", "mu")) spec.mu = vec_from(cfg.get_doubles("env", "mu"));
    spec.noise = cfg.get_double("env", "noise", spec.noise);
    spec.stationary = cfg.get_bool("env", "stationary", spec.stationary);
    const std::string baseline = cfg.get_string("env", "baseline", "zero");
    if (baseline == "zero")
        spec.baseline = BaselineKind::Zero;
    else if (baseline == "sinusoidal")
        spec.baseline = BaselineKind::Sinusoidal;
    else if (baseline == "history_drift")
        spec.baseline = BaselineKind::HistoryDrift;
    else
        throw ConfigInvalid("unknown baseline kind: " + baseline);
    spec.baseline_amp = cfg.get_double("env", "baseline_amp", spec.baseline_amp);
    spec.baseline_period = cfg.get_double("env", "baseline_period", spec.baseline_period);
    spec.drift_step = cfg.get_double("env", "drift_step", spec.drift_step);
    spec.habituation = cfg.get_bool("env", "habituation", spec.habituation);
    spec.habituation_coef = cfg.get_double("env", "habituation_coef", spec.habituation_coef);
    spec.missing_prob = cfg.get_double("env", "missing_prob", spec.missing_prob);
    spec.control_arm = static_cast<int>(cfg.get_int("env", "control_arm", spec.control_arm));
    spec.intercept_feature =
        cfg.get_bool("env", "intercept_feature", spec.intercept_feature);
    spec.validate();
    return spec;
}

// Deterministic 3-state / 2-action chain with an absorbing terminal state.
MdpSpec mdp_chain3(double gamma) {
    MdpSpec m;
    m.n_states = 3;
    m.n_actions = 2;
    m.absorbing = 2;
    m.gamma = gamma;
    Matrix P0 = Matrix::Zero(3, 3), P1 = Matrix::Zero(3, 3);
    P0(0, 1) = 1;
    P0(1, 2) = 1;
    P0(2, 2) = 1;
    P1(0, 2) = 1;
    P1(1, 2) = 1;
    P1(2, 2) = 1;
    m.P = {P0, P1};
    m.R = Matrix::Zero(3, 2);
    m.R(0, 0) = 1;
    m.R(0, 1) = 2;
    m.R(1, 0) = 3;
    m.R(1, 1) = 0.5;
    m.validate();
    return m;
}

int run_simulate(RunContext& ctx) {
    const std::string kind = ctx.cfg.get_string("env", "kind");
    const long n = ctx.cfg.get_int("sim", "n");
    if (n < 1) throw ConfigInvalid("[sim] n must be >= 1");

    Dataset data;
    if (kind == "smart") {
        SmartSpec spec = parse_smart(ctx.cfg);
        Rng rng = make_rng({ctx.seed, 0});
        data = smart_generate(spec, static_cast<std::size_t>(n), rng).data;
    } else if (kind == "single_stage") {
        SingleStageSpec spec = parse_single_stage(ctx.cfg);
        Rng rng = make_rng({ctx.seed, 0});
        data = single_stage_generate(spec, static_cast<std::size_t>(n), rng);
    } else if (kind == "mdp") {
        const std::string preset = ctx.cfg.get_string("env", "preset", "chain3");
        if (preset != "chain3") throw ConfigInvalid("unknown MDP preset: " + preset);
        MdpSpec spec = mdp_chain3(ctx.cfg.get_double("env", "gamma", 0.9));
        MdpPolicy uniform = Matrix::Constant(spec.n_states, spec.n_actions,
                                             1.0 / static_cast<double>(spec.n_actions));
        Rng rng = make_rng({ctx.seed, 0});
        data = mdp_env_rollout(spec, uniform, static_cast<std::size_t>(n), rng);
    } else {
        throw ConfigInvalid("unknown env kind for simulate: " + kind);
    }
    ctx.cfg.ensure_all_consumed();

    write_dataset_csv(ctx.path("dataset", ".csv").string(), data,
                      {ctx.hash_comment(), "seed=" + std::to_string(ctx.seed)});
    ctx.write_config_echo();
    return 0;
}

int run_fit(RunContext& ctx) {
    const std::string file = ctx.cfg.get_string("data", "file");
    const std::string method = ctx.cfg.get_string("fit", "method");
    SmartSpec spec = parse_smart(ctx.cfg);  // generating design: maps + oracle

    Dataset data = read_dataset_csv(file);
    data.action_counts = {2, 2};
    data.validate();

    Regime regime;
    RegimeProvenance prov;
    prov.seed = ctx.seed;
    prov.method = method;
    if (method == "qlearning") {
        QLearningOptions opt;
        opt.ridge_lambda = ctx.cfg.get_double("fit", "ridge_lambda", 0.0);
        const double threshold = ctx.cfg.get_double("fit", "threshold", 0.0);
        QLearningFit fit = q_learning_fit(data, spec.stage_maps(), spec.gamma, opt);
        regime = threshold > 0.0 ? soft_threshold_regime(fit.model, threshold) : fit.regime;
        prov.hyperparams = Json{{"ridge_lambda", opt.ridge_lambda}, {"threshold", threshold}};
    } else if (method == "gestimation") {
        GEstimationOptions opt;
        opt.gamma = spec.gamma;
        opt.adjunct_maps = spec.stage_maps();
        opt.propensity_maps = spec.stage_maps();
        opt.use_recorded_propensity =
            ctx.cfg.get_bool("fit", "use_recorded_propensity", true);
        regime = g_estimation_fit(data, spec.stage_maps(), opt).regime;
        prov.hyperparams = Json{{"use_recorded_propensity", opt.use_recorded_propensity}};
    } else if (method == "bowl") {
        const double shift = ctx.cfg.get_double("fit", "reward_shift", 0.0);
        Dataset shifted = data;
        for (auto& traj : shifted.trajectories)
            for (auto& rec : traj.stages)
                if (rec.reward) rec.reward = std::max(*rec.reward + shift, 0.0);
        FeatureMap full;
        auto fits = bowl_fit(shifted, full);
        regime.maps = StageMaps{full};
        for (auto& f : fits) regime.rules.push_back(f.regime.rules.front());
        prov.hyperparams = Json{{"reward_shift", shift}};
    } else {
        throw ConfigInvalid("unknown fit method: " + method);
    }
    ctx.cfg.ensure_all_consumed();

    SmartOracle oracle = smart_oracle(spec);
    const double agreement =
        regime_agreement(regime, oracle.regime, dataset_contexts(data), 2);

    Json regime_json = regime_to_json(regime, prov);
    write_text_file(ctx.path("regime", ".json").string(), regime_json.dump(2) + "\n");

    ExperimentReport report;
    report.config_echo = ctx.cfg.text();
    report.config_hash = detail::fnv1a(ctx.cfg.text());
    report.seeds = {ctx.seed};
    report.metrics = {{"oracle_agreement", agreement},
                      {"oracle_value", oracle.stage_values[0]},
                      {"n_trajectories", static_cast<double>(data.size())}};
    write_text_file(ctx.path("fit-report", ".json").string(),
                    report_to_json(report).dump(2) + "\n");
    ctx.write_config_echo();
    return 0;
}

int run_evaluate(RunContext& ctx) {
    const std::string data_file = ctx.cfg.get_string("data", "file");
    const std::string regime_file = ctx.cfg.get_string("regime", "file");
    const double gamma = ctx.cfg.get_double("evaluate", "gamma", 1.0);
    const int bootstrap = static_cast<int>(ctx.cfg.get_int("evaluate", "bootstrap", 200));
    ctx.cfg.ensure_all_consumed();

    Dataset data = read_dataset_csv(data_file);
    data.validate();
    std::ifstream rf(regime_file);
    if (!rf) throw Error("cannot open regime file: " + regime_file);
    Regime regime = regime_from_json(Json::parse(rf));

    IptwOptions opt;
    opt.gamma = gamma;
    opt.bootstrap = bootstrap;
    opt.rng = {ctx.seed, 1};
    ValueEstimate est = value_iptw(data, regime, opt);

    ExperimentReport report;
    report.config_echo = ctx.cfg.text();
    report.config_hash = detail::fnv1a(ctx.cfg.text());
    report.seeds = {ctx.seed};
    report.metrics = {{"value_iptw", est.point},
                      {"std_error", est.std_error},
                      {"effective_sample_fraction", est.effective_sample_fraction},
                      {"bootstrap_resamples", static_cast<double>(est.bootstrap_resamples)}};
    write_text_file(ctx.path("value-report", ".json").string(),
                    report_to_json(report).dump(2) + "\n");
    ctx.write_config_echo();
    return 0;
}

BanditAgentFactory parse_agent(Config& cfg, const BanditEnvSpec& env) {
    const std::string algo = cfg.get_string("agent", "algorithm");
    const int d = env.feature_dim();
    if (algo == "linucb")
        return linucb_factory(d, cfg.get_double("agent", "alpha", 1.0),
                              cfg.get_double("agent", "lambda", 1.0));
    if (algo == "lints")
        return lints_factory(d, cfg.get_double("agent", "nu", 0.5),
                             cfg.get_double("agent", "lambda", 1.0));
    if (algo == "bts")
        return bts_factory(d, static_cast<int>(cfg.get_int("agent", "replicates", 10)),
                           cfg.get_double("agent", "lambda", 1.0));
    if (algo == "acts") {
        ActsOptions opt;
        opt.pi_min = cfg.get_double("agent", "pi_min", opt.pi_min);
        opt.pi_max = cfg.get_double("agent", "pi_max", opt.pi_max);
        opt.nu = cfg.get_double("agent", "nu", opt.nu);
        opt.lambda = cfg.get_double("agent", "lambda", opt.lambda);
        return acts_factory(d, opt);
    }
    if (algo == "epsilon_greedy")
        return epsilon_greedy_factory(d, cfg.get_double("agent", "epsilon", 0.1),
                                      cfg.get_double("agent", "lambda", 1.0));
    if (algo == "uniform") return uniform_random_factory();
    if (algo == "oracle") return oracle_factory(env);
    throw ConfigInvalid("unknown agent algorithm: " + algo);
}

int run_regret(RunContext& ctx) {
    const std::string kind = ctx.cfg.get_string("env", "kind");
    if (kind != "bandit") throw ConfigInvalid("regret requires [env] kind = bandit");
    BanditEnvSpec env = parse_bandit(ctx.cfg);
    BanditAgentFactory factory = parse_agent(ctx.cfg, env);
    const int T = static_cast<int>(ctx.cfg.get_int("eval", "horizon"));
    const long n_seeds = ctx.cfg.get_int("eval", "seeds", 20);
    const int stride = static_cast<int>(ctx.cfg.get_int("eval", "csv_stride", 100));
    if (T < 1 || n_seeds < 1 || stride < 1)
        throw ConfigInvalid("[eval] horizon, seeds and csv_stride must be >= 1");
    ctx.cfg.ensure_all_consumed();

    std::vector<std::uint64_t> seeds;
    for (long s = 0; s < n_seeds; ++s) seeds.push_back(ctx.seed + static_cast<std::uint64_t>(s));
    RegretOptions opt;
    opt.n_threads = ctx.threads;
    RegretResult res = regret_curve(factory, env, T, seeds, opt);

    std::ostringstream csv;
    write_regret_csv(csv, res.curve, stride, {ctx.hash_comment()});
    write_text_file(ctx.path("regret", ".csv").string(), csv.str());

    ExperimentReport report;
    report.config_echo = ctx.cfg.text();
    report.config_hash = detail::fnv1a(ctx.cfg.text());
    report.seeds = seeds;
    report.metrics = {{"final_mean_regret", res.curve.mean[T - 1]},
                      {"final_std_error", res.curve.std_error[T - 1]},
                      {"horizon", static_cast<double>(T)}};
    write_text_file(ctx.path("regret", ".json").string(),
                    report_to_json(report).dump(2) + "\n");
    ctx.write_config_echo();
    return 0;
}

int run_dr(RunContext& ctx) {
    const std::string kind = ctx.cfg.get_string("env", "kind");
    if (kind != "single_stage") throw ConfigInvalid("dr requires [env] kind = single_stage");
    SingleStageSpec spec = parse_single_stage(ctx.cfg);
    const std::string estimator = ctx.cfg.get_string("dr", "estimator");
    DrOptions opt;
    opt.n = static_cast<std::size_t>(ctx.cfg.get_int("dr", "n", 10000));
    opt.replications = static_cast<int>(ctx.cfg.get_int("dr", "replications", 200));
    opt.rng = {ctx.seed, 0};
    opt.n_threads = ctx.threads;
    if (opt.n < 1 || opt.replications < 1)
        throw ConfigInvalid("[dr] n and replications must be >= 1");
    DrEstimator est;
    if (estimator == "aiptw")
        est = DrEstimator::Aiptw;
    else if (estimator == "gestimation")
        est = DrEstimator::GEstimation;
    else
        throw ConfigInvalid("unknown dr estimator: " + estimator);
    ctx.cfg.ensure_all_consumed();

    DrTable table = dr_experiment(spec, est, opt);

    std::ostringstream csv;
    csv << "# " << ctx.hash_comment() << "\n";
    csv << "outcome_correct,propensity_correct,mean_bias,mean_abs_error\n";
    for (const auto& cell : table.cells)
        csv << (cell.outcome_correct ? 1 : 0) << "," << (cell.propensity_correct ? 1 : 0)
            << "," << detail::format_double(cell.mean_bias) << ","
            << detail::format_double(cell.mean_abs_error) << "\n";
    write_text_file(ctx.path("dr", ".csv").string(), csv.str());

    ExperimentReport report;
    report.config_echo = ctx.cfg.text();
    report.config_hash = detail::fnv1a(ctx.cfg.text());
    report.seeds = {ctx.seed};
    report.metrics = {{"truth", table.truth},
                      {"plugin_bias_correct", table.plugin_bias_correct},
                      {"plugin_bias_wrong", table.plugin_bias_wrong},
                      {"replications", static_cast<double>(table.replications)}};
    for (const auto& cell : table.cells) {
        std::string tag = std::string("bias_o") + (cell.outcome_correct ? "1" : "0") + "_p" +
                          (cell.propensity_correct ? "1" : "0");
        report.metrics.emplace_back(tag, cell.mean_bias);
    }
    write_text_file(ctx.path("dr", ".json").string(),
                    report_to_json(report).dump(2) + "\n");
    ctx.write_config_echo();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive-intervention experiment runner"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::uint64_t seed = 0;
    int threads = 1;
    for (const auto& name : {"simulate", "fit", "evaluate", "regret", "dr"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("config", config_path, "configuration file")->required();
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker threads");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        RunContext ctx{Config::load(config_path), seed, std::max(threads, 1),
                       fs::path(out_dir), ""};
        ctx.hash_hex = detail::hash_hex(detail::fnv1a(ctx.cfg.text()));
        fs::create_directories(ctx.out);
        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "simulate") return run_simulate(ctx);
        if (sub == "fit") return run_fit(ctx);
        if (sub == "evaluate") return run_evaluate(ctx);
        if (sub == "regret") return run_regret(ctx);
        return run_dr(ctx);
    } catch (const ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
