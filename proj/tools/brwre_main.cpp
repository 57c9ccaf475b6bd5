// brwre: simulation and exact-oracle workbench for branching random walks in
// time-space i.i.d. random environment on Z^d.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <brwre/env.hpp>
#include <brwre/io.hpp>
#include <brwre/kernels.hpp>
#include <brwre/oracle.hpp>
#include <brwre/sim.hpp>
#include <brwre/stats.hpp>

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::vector<std::vector<int>> parse_multi_indices(const std::string& text, int d) {
    // "2,0,0;4,0,0" -> {{2,0,0},{4,0,0}}
    std::vector<std::vector<int>> out;
    if (text.empty()) return out;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        if (group.empty()) continue;
        std::vector<int> n;
        std::stringstream parts(group);
        std::string part;
        while (std::getline(parts, part, ',')) n.push_back(std::stoi(part));
        if (static_cast<int>(n.size()) != d)
            throw brwre::ConfigError("multi-index '" + group + "' does not have " +
                                     std::to_string(d) + " entries");
        out.push_back(std::move(n));
    }
    return out;
}

std::vector<long> parse_times(const std::string& text) {
    std::vector<long> out;
    if (text.empty()) return out;
    std::stringstream parts(text);
    std::string part;
    while (std::getline(parts, part, ','))
        if (!part.empty()) out.push_back(std::stol(part));
    return out;
}

// Option values shared by the simulation-flavored subcommands.
struct SimOptions {
    std::string env = "env-b";
    int dim = 3;
    long horizon = 0;
    uint64_t env_seed = 1;
    uint64_t particle_seed = 2;
    std::string mode = "aggregate";
    long replicas = 1;
    int threads = 0;
    std::string moments;
    std::string y_stats;
    std::string record_times;
    uint64_t gaussian_min = 1000000;
    uint64_t per_particle_max = 32;
    uint64_t genealogy_cap = 100000;
    std::string out_dir = "out";
    std::string config_path;

    CLI::App* attach(CLI::App* cmd, bool with_replicas, bool with_out) {
        cmd->add_option("--env", env, "environment preset or JSON spec file");
        cmd->add_option("--dim", dim, "lattice dimension d");
        cmd->add_option("--horizon", horizon, "time horizon T");
        cmd->add_option("--env-seed", env_seed, "environment field seed");
        cmd->add_option("--particle-seed", particle_seed, "particle randomness seed");
        cmd->add_option("--mode", mode, "aggregate | genealogy");
        if (with_replicas) {
            cmd->add_option("--replicas", replicas, "independent replicas");
            cmd->add_option("--threads", threads, "worker threads (0 = auto)");
        }
        cmd->add_option("--moments", moments, "moment multi-indices, e.g. '2,0,0;4,0,0'");
        cmd->add_option("--y", y_stats, "Y-statistic multi-indices");
        cmd->add_option("--record-times", record_times, "comma list of record times");
        cmd->add_option("--gaussian-min", gaussian_min,
                        "multinomial counts at or above this use the normal approximation");
        cmd->add_option("--per-particle-max", per_particle_max,
                        "site counts up to this sample particle by particle");
        cmd->add_option("--genealogy-cap", genealogy_cap, "genealogy population cap");
        if (with_out) cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--config", config_path, "JSON config file (flags override)");
        return cmd;
    }

    void merge_config(const CLI::App* cmd) {
        if (config_path.empty()) return;
        std::ifstream in(config_path);
        if (!in) throw brwre::ConfigError("cannot open config file '" + config_path + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const std::exception& e) {
            throw brwre::ConfigError(std::string("bad config JSON: ") + e.what());
        }
        auto take = [&](const char* flag, const char* key, auto& slot) {
            const CLI::Option* opt = cmd->get_option_no_throw(flag);
            if (opt && opt->count() > 0) return;  // CLI flag wins
            if (j.contains(key)) slot = j[key].get<std::decay_t<decltype(slot)>>();
        };
        take("--env", "env", env);
        take("--dim", "dim", dim);
        take("--horizon", "horizon", horizon);
        take("--env-seed", "env_seed", env_seed);
        take("--particle-seed", "particle_seed", particle_seed);
        take("--mode", "mode", mode);
        take("--replicas", "replicas", replicas);
        take("--threads", "threads", threads);
        take("--moments", "moments", moments);
        take("--y", "y", y_stats);
        take("--record-times", "record_times", record_times);
        take("--gaussian-min", "gaussian_min", gaussian_min);
        take("--per-particle-max", "per_particle_max", per_particle_max);
        take("--genealogy-cap", "genealogy_cap", genealogy_cap);
        take("--out", "out", out_dir);
    }

    brwre::RunConfig to_run_config() const {
        brwre::RunConfig cfg;
        cfg.d = dim;
        cfg.horizon = horizon;
        cfg.env = brwre::resolve_environment(env);
        cfg.env_name = env;
        cfg.env_seed = env_seed;
        cfg.particle_seed = particle_seed;
        if (mode == "aggregate")
            cfg.mode = brwre::SimMode::Aggregate;
        else if (mode == "genealogy")
            cfg.mode = brwre::SimMode::Genealogy;
        else
            throw brwre::ConfigError("mode must be 'aggregate' or 'genealogy'");
        cfg.moment_indices = parse_multi_indices(moments, dim);
        cfg.y_indices = parse_multi_indices(y_stats, dim);
        cfg.record_times = parse_times(record_times);
        cfg.thresholds.gaussian_multinomial_min = gaussian_min;
        cfg.thresholds.per_particle_max = per_particle_max;
        cfg.thresholds.genealogy_cap = genealogy_cap;
        cfg.validate();
        return cfg;
    }

    std::string echo_json(const char* command) const {
        json j;
        j["command"] = command;
        j["env"] = env;
        j["dim"] = dim;
        j["horizon"] = horizon;
        j["env_seed"] = env_seed;
        j["particle_seed"] = particle_seed;
        j["mode"] = mode;
        j["replicas"] = replicas;
        j["moments"] = moments;
        j["y"] = y_stats;
        j["record_times"] = record_times;
        j["gaussian_min"] = gaussian_min;
        j["per_particle_max"] = per_particle_max;
        j["genealogy_cap"] = genealogy_cap;
        return j.dump();
    }
};

// Numeric aborts (overflow, caps) still leave a manifest recording the abort.
template <typename Fn>
auto with_abort_manifest(const char* command, const SimOptions& opt, Fn&& body) {
    try {
        return body();
    } catch (const brwre::NumericError& e) {
        brwre::Manifest man;
        man.command = command;
        man.config_json = opt.echo_json(command);
        man.status = std::string("aborted: ") + e.what();
        brwre::write_outputs(opt.out_dir, {}, man);
        throw;
    }
}

int cmd_simulate(const SimOptions& opt) {
    brwre::RunConfig cfg = opt.to_run_config();
    brwre::TrajectoryResult res =
        with_abort_manifest("simulate", opt, [&] { return brwre::run_trajectory(cfg); });
    brwre::Manifest man;
    man.command = "simulate";
    man.config_json = opt.echo_json("simulate");
    man.approx_sampling = res.approx_sampling;
    man.status = res.status == brwre::RunStatus::Extinct ? "extinct" : "alive";
    brwre::write_outputs(opt.out_dir, {{"trajectory.csv", brwre::trajectory_csv(res, cfg)}},
                         man);
    std::cout << "wrote " << opt.out_dir << "/trajectory.csv (status " << man.status
              << ", final t " << res.final_t << ")\n";
    return kExitOk;
}

int cmd_ensemble(const SimOptions& opt) {
    brwre::RunConfig cfg = opt.to_run_config();
    if (opt.replicas < 1) throw brwre::ConfigError("replicas must be >= 1");
    brwre::EnsembleSummary sum = with_abort_manifest(
        "ensemble", opt, [&] { return brwre::run_ensemble(cfg, opt.replicas, opt.threads); });
    brwre::Manifest man;
    man.command = "ensemble";
    man.config_json = opt.echo_json("ensemble");
    man.approx_sampling = sum.approx_sampling;
    man.status = sum.failed == 0 ? "ok" : "partial";
    man.extra["failed_replicas"] = std::to_string(sum.failed);
    brwre::write_outputs(opt.out_dir, {{"ensemble.json", brwre::ensemble_summary_json(sum)}},
                         man);
    std::cout << "wrote " << opt.out_dir << "/ensemble.json (replicas " << sum.replicas
              << ", failed " << sum.failed << ")\n";
    return kExitOk;
}

int cmd_clt_moments(const SimOptions& opt_in) {
    SimOptions opt = opt_in;
    if (opt.moments.empty()) {
        auto axis_index = [&](int order) {
            std::string s = std::to_string(order);
            for (int i = 1; i < opt.dim; ++i) s += ",0";
            return s;
        };
        opt.moments = axis_index(1) + ";" + axis_index(2) + ";" + axis_index(4);
    }
    if (opt.record_times.empty()) opt.record_times = std::to_string(opt.horizon);
    brwre::RunConfig cfg = opt.to_run_config();
    brwre::EnsembleSummary sum = brwre::run_ensemble(cfg, opt.replicas, opt.threads);

    json report;
    report["replicas"] = sum.replicas;
    report["times"] = sum.times;
    report["survivors"] = sum.survivors;
    json moments = json::object();
    for (size_t i = 0; i < sum.stat_names.size(); ++i) {
        const auto& name = sum.stat_names[i];
        if (name.rfind("rhomom_", 0) != 0) continue;
        json entry;
        entry["mean_surv"] = sum.stats[i].mean_surv;
        entry["se_surv"] = sum.stats[i].se_surv;
        moments[name] = std::move(entry);
    }
    report["density_moments"] = std::move(moments);

    brwre::Manifest man;
    man.command = "clt-moments";
    man.config_json = opt.echo_json("clt-moments");
    man.approx_sampling = sum.approx_sampling;
    man.status = sum.failed == 0 ? "ok" : "partial";
    brwre::write_outputs(opt.out_dir,
                         {{"ensemble.json", brwre::ensemble_summary_json(sum)},
                          {"clt_moments.json", report.dump(2) + "\n"}},
                         man);
    std::cout << report.dump(2) << "\n";
    return kExitOk;
}

int cmd_oracle_second_moment(const SimOptions& opt, long radius_cap, double trunc_tol) {
    brwre::EnvironmentModel model = brwre::resolve_environment(opt.env);
    brwre::TwoWalkSeries series =
        brwre::two_walk_series(model, opt.dim, opt.horizon, radius_cap, trunc_tol);
    brwre::Manifest man;
    man.command = "oracle second-moment";
    man.config_json = opt.echo_json("oracle second-moment");
    man.extra["radius_used"] = std::to_string(series.radius_used);
    man.extra["truncated_mass"] = brwre::format_g17(series.truncated_mass);
    brwre::write_outputs(opt.out_dir, {{"second_moment.csv", brwre::two_walk_csv(series)}},
                         man);
    std::cout << "wrote " << opt.out_dir << "/second_moment.csv (T=" << opt.horizon
              << ", radius " << series.radius_used << ")\n";
    return kExitOk;
}

int cmd_oracle_quenched_mean(const SimOptions& opt) {
    brwre::EnvironmentModel model = brwre::resolve_environment(opt.env);
    brwre::EnvironmentField field{model, opt.env_seed};
    brwre::QuenchedMeanField qm = brwre::quenched_mean(field, opt.dim, opt.horizon);
    brwre::Manifest man;
    man.command = "oracle quenched-mean";
    man.config_json = opt.echo_json("oracle quenched-mean");
    brwre::write_outputs(opt.out_dir, {{"quenched_mean.csv", brwre::quenched_mean_csv(qm)}},
                         man);
    json z;
    z["zbar"] = qm.zbar;
    std::cout << z.dump(2) << "\n";
    return kExitOk;
}

int cmd_check_condition(const std::string& env, int dim, long budget) {
    brwre::EnvironmentModel model = brwre::resolve_environment(env);
    brwre::ReturnProbEstimate pi = brwre::return_probability(dim, budget);
    brwre::ConditionReport rep = brwre::check_regular_growth(model, dim, pi.value);
    json j;
    j["env"] = env;
    j["dim"] = dim;
    j["m"] = rep.m;
    j["m2"] = rep.m2;
    j["alpha"] = rep.alpha;
    j["pi_d"] = rep.pi_d;
    j["product"] = rep.product;
    j["verdict"] = rep.verdict == brwre::ConditionReport::Verdict::Regular ? "Regular" : "Fails";
    j["reasons"] = rep.reasons;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_pi_d(int dim, long budget, const std::string& method, long walks, long horizon,
             uint64_t seed, int threads) {
    brwre::ReturnProbEstimate est =
        method == "mc" ? brwre::return_probability_mc(dim, walks, horizon, seed, threads)
                       : brwre::return_probability(dim, budget);
    json j;
    j["dim"] = est.d;
    j["value"] = est.value;
    j["half_width"] = est.half_width;
    j["method"] = brwre::method_name(est.method);
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_verify_ze(const std::string& env, int dim, long horizon, long seeds,
                  uint64_t env_seed, uint64_t particle_seed, uint64_t cap, double tol) {
    brwre::EnvironmentModel model = brwre::resolve_environment(env);
    double max_error = 0.0;
    long failed = 0;
    for (long s = 0; s < seeds; ++s) {
        brwre::EnvironmentField field{model,
                                      brwre::prf_hash(env_seed, {static_cast<uint64_t>(s)})};
        auto res = brwre::verify_zeta_identity(
            field, brwre::prf_hash(particle_seed, {static_cast<uint64_t>(s)}), dim, horizon,
            cap);
        double err = std::max(res.max_error, res.max_error_aggregated);
        max_error = std::max(max_error, err);
        if (err >= tol) ++failed;
    }
    json j;
    j["env"] = env;
    j["dim"] = dim;
    j["horizon"] = horizon;
    j["seeds"] = seeds;
    j["tolerance"] = tol;
    j["max_error"] = max_error;
    j["seeds_failed"] = failed;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"branching random walks in time-space i.i.d. random environment"};
    app.require_subcommand(1);

    SimOptions sim_opt, ens_opt, clt_opt, sm_opt, qm_opt;

    CLI::App* simulate = sim_opt.attach(
        app.add_subcommand("simulate", "run one trajectory, write CSV + manifest"), false,
        true);
    CLI::App* ensemble = ens_opt.attach(
        app.add_subcommand("ensemble", "run replicas, write summary JSON + manifest"), true,
        true);
    CLI::App* clt = clt_opt.attach(
        app.add_subcommand("clt-moments", "survival-conditioned density moments"), true, true);

    CLI::App* oracle = app.add_subcommand("oracle", "exact simulation-free computations");
    oracle->require_subcommand(1);
    CLI::App* second = sm_opt.attach(
        oracle->add_subcommand("second-moment",
                               "annealed two-walk series (u, E[Nbar^2], overlap)"),
        false, true);
    long radius_cap = 160;
    double trunc_tol = 1e-12;
    second->add_option("--radius-cap", radius_cap, "difference-walk DP radius cap");
    second->add_option("--trunc-tol", trunc_tol, "allowed truncated mass");
    CLI::App* quenched = qm_opt.attach(
        oracle->add_subcommand("quenched-mean",
                               "quenched mean transfer (DPRE partition function)"),
        false, true);

    std::string cc_env = "env-b";
    int cc_dim = 3;
    long cc_budget = 10000;
    CLI::App* check = app.add_subcommand("check-condition", "regular-growth condition report");
    check->add_option("--env", cc_env, "environment preset or spec file");
    check->add_option("--dim", cc_dim, "dimension");
    check->add_option("--budget", cc_budget, "return-probability truncation horizon");

    int pi_dim = 3;
    long pi_budget = 10000;
    std::string pi_method = "green";
    long pi_walks = 1000000, pi_horizon = 10000;
    uint64_t pi_seed = 1;
    int pi_threads = 0;
    CLI::App* pid = app.add_subcommand("pi-d", "simple-walk return probability");
    pid->add_option("--dim", pi_dim, "dimension");
    pid->add_option("--budget", pi_budget, "truncation horizon (green method)");
    pid->add_option("--method", pi_method, "green | mc");
    pid->add_option("--walks", pi_walks, "Monte Carlo walks");
    pid->add_option("--mc-horizon", pi_horizon, "Monte Carlo walk length");
    pid->add_option("--seed", pi_seed, "Monte Carlo seed");
    pid->add_option("--threads", pi_threads, "worker threads (0 = auto)");

    std::string ze_env = "env-b";
    int ze_dim = 3;
    long ze_horizon = 3, ze_seeds = 100;
    uint64_t ze_env_seed = 1, ze_particle_seed = 2, ze_cap = 10000000;
    double ze_tol = 1e-12;
    CLI::App* verify = app.add_subcommand("verify", "identity checks");
    verify->require_subcommand(1);
    CLI::App* ze = verify->add_subcommand("ze", "pathwise zeta representation check");
    ze->add_option("--env", ze_env, "environment preset or spec file");
    ze->add_option("--dim", ze_dim, "dimension");
    ze->add_option("--horizon", ze_horizon,
                   "horizon T (chain enumeration grows as (2d k_max)^T)");
    ze->add_option("--seeds", ze_seeds, "number of seed pairs");
    ze->add_option("--env-seed", ze_env_seed, "base environment seed");
    ze->add_option("--particle-seed", ze_particle_seed, "base particle seed");
    ze->add_option("--cap", ze_cap, "chain path cap");
    ze->add_option("--tolerance", ze_tol, "per-seed failure threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n"
                  << "subcommands: simulate, ensemble, clt-moments, oracle second-moment,\n"
                  << "             oracle quenched-mean, check-condition, pi-d, verify ze\n";
        return kExitConfig;
    }

    try {
        if (simulate->parsed()) {
            sim_opt.merge_config(simulate);
            return cmd_simulate(sim_opt);
        }
        if (ensemble->parsed()) {
            ens_opt.merge_config(ensemble);
            return cmd_ensemble(ens_opt);
        }
        if (clt->parsed()) {
            clt_opt.merge_config(clt);
            return cmd_clt_moments(clt_opt);
        }
        if (oracle->parsed() && second->parsed()) {
            sm_opt.merge_config(second);
            return cmd_oracle_second_moment(sm_opt, radius_cap, trunc_tol);
        }
        if (oracle->parsed() && quenched->parsed()) {
            qm_opt.merge_config(quenched);
            return cmd_oracle_quenched_mean(qm_opt);
        }
        if (check->parsed()) return cmd_check_condition(cc_env, cc_dim, cc_budget);
        if (pid->parsed())
            return cmd_pi_d(pi_dim, pi_budget, pi_method, pi_walks, pi_horizon, pi_seed,
                            pi_threads);
        if (verify->parsed() && ze->parsed())
            return cmd_verify_ze(ze_env, ze_dim, ze_horizon, ze_seeds, ze_env_seed,
                                 ze_particle_seed, ze_cap, ze_tol);
        std::cerr << "no subcommand\n";
        return kExitConfig;
    } catch (const brwre::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const brwre::NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}
