#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kaas/config.hpp"
#include "kaas/errors.hpp"
#include "kaas/ioutil.hpp"
#include "kaas/kb.hpp"
#include "kaas/learning.hpp"
#include "kaas/rewards.hpp"
#include "kaas/rng.hpp"
#include "kaas/scheduler.hpp"
#include "kaas/transitions.hpp"
#include "kaas/workload.hpp"

namespace {

using namespace kaas;

// Per-stage seed salts, shared with provision() so `train` reproduces the
// bootstrap's artifacts bit for bit from the same table and seed.
std::uint64_t online_env_seed(const ExperimentConfig& c, const std::string& name) {
    if (name == "pi_R_hi") return mix_seed(c.seed, 2);
    return mix_seed(c.seed, 30 + name.size());
}

std::uint64_t online_action_seed(const ExperimentConfig& c, const std::string& name) {
    if (name == "pi_R_hi") return mix_seed(c.seed, 3);
    return mix_seed(c.seed, 40 + name.size());
}

std::uint64_t offline_seed(const ExperimentConfig& c, const std::string& name) {
    if (name == "pi_P_hi") return mix_seed(c.seed, 4);
    if (name == "pi_R_lo") return mix_seed(c.seed, 5);
    if (name == "pi_P_lo") return mix_seed(c.seed, 6);
    return mix_seed(c.seed, 50);
}

void ensure_out_dir(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
}

std::string fmt3(double v) { return fmt_fixed(v, 3); }

TransitionTable load_table_or_die(const ExperimentConfig& cfg) {
    const std::string sig = table_signature(cfg.space, cfg.ladder, cfg.env);
    if (!std::filesystem::exists(cfg.table_path()))
        throw InvalidInputError("no transition table at " + cfg.table_path() +
                                "; run `kaas explore` or `kaas provision` first");
    return TransitionTable::load(cfg.table_path(), sig);
}

KnowledgeBase load_kb_or_die(const ExperimentConfig& cfg) {
    if (!std::filesystem::exists(cfg.kb_path()))
        throw KnowledgeMissError("no knowledge base at " + cfg.kb_path() +
                                 "; run `kaas provision` first");
    return KnowledgeBase::load(cfg.kb_path(), cfg.space, cfg.ladder, cfg.env);
}

void print_coverage(const CoverageReport& cov) {
    std::cout << "visited_states=" << cov.visited_states
              << " explored_pairs=" << cov.explored_pairs
              << " satisfied_pairs=" << cov.satisfied_pairs << " min_visits=" << cov.min_visits
              << " transitions=" << cov.recorded_transitions
              << " complete=" << (cov.complete ? "yes" : "no") << "\n";
}

int cmd_explore(const ExperimentConfig& cfg) {
    ensure_out_dir(cfg);
    TrainingEnv env(training_profiles(), cfg.ladder, cfg.env, cfg.start_knobs,
                    mix_seed(cfg.seed, 1));
    ExploreResult res = explore(env, cfg.space, static_cast<int>(cfg.min_visits),
                                cfg.explore_budget, cfg.seed);
    res.table.save(cfg.table_path());
    std::cout << "wrote " << cfg.table_path() << "\n";
    print_coverage(res.coverage);
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& name, bool offline) {
    ensure_out_dir(cfg);
    RewardRecipe recipe = recipe_by_name(name);
    Policy policy;
    if (offline) {
        TransitionTable table = load_table_or_die(cfg);
        policy = train_offline(table, recipe, cfg.hyper, offline_seed(cfg, name), {},
                               cfg.min_explored_fraction);
    } else {
        TrainingEnv env(training_profiles(), cfg.ladder, cfg.env, cfg.start_knobs,
                        online_env_seed(cfg, name));
        policy = train_online(env, recipe, cfg.space, cfg.hyper, online_action_seed(cfg, name));
    }
    policy.save(cfg.policy_path(name));
    std::cout << "wrote " << cfg.policy_path(name) << "\n";
    std::cout << "policy=" << policy.name << " trained_with=" << policy.trained_with
              << " decisions=" << cfg.hyper.decisions()
              << " env_interactions=" << policy.env_interactions << "\n";
    return 0;
}

int cmd_provision(const ExperimentConfig& cfg) {
    ensure_out_dir(cfg);
    // Reuse a compatible saved table so repeated provisioning is cheap.
    std::optional<TransitionTable> existing;
    if (std::filesystem::exists(cfg.table_path())) {
        try {
            existing = TransitionTable::load(cfg.table_path(),
                                             table_signature(cfg.space, cfg.ladder, cfg.env));
        } catch (const Error&) {
            existing.reset();  // stale or unreadable: rebuild from scratch
        }
    }
    ProvisionResult res = provision(cfg.provision_options(), existing ? &*existing : nullptr);
    res.table.save(cfg.table_path());
    res.kb.save(cfg.kb_path());
    for (const std::string& name : res.kb.names())
        res.kb.entry(name).policy.save(cfg.policy_path(name));
    std::cout << "wrote " << cfg.table_path() << "\n";
    print_coverage(res.coverage);
    std::cout << "wrote " << cfg.kb_path() << "\n";
    for (const std::string& name : res.kb.names()) {
        const KbEntry& e = res.kb.entry(name);
        std::cout << "policy=" << name << " trained_with=" << e.policy.trained_with
                  << " env_interactions=" << e.policy.env_interactions
                  << " avg_cores=" << fmt3(e.avg_cores) << " avg_quality=" << fmt3(e.avg_quality)
                  << "\n";
    }
    return 0;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& strategy, double interval,
                 double fraction, int clients, std::uint64_t seed, bool trace) {
    ensure_out_dir(cfg);
    KnowledgeBase kb = load_kb_or_die(cfg);
    WorkloadSpec w;
    w.arrival_interval_s = interval;
    w.premium_fraction = fraction;
    w.n_clients = clients;
    w.profile_pool = cfg.sweep.profile_pool;
    w.seed = seed;
    ExperimentResult res =
        run_experiment(kb, strategy_from_name(strategy), w, cfg.experiment_options(trace));
    write_text_file(cfg.out_dir + "/report.csv", report_csv(res.report));
    write_text_file(cfg.out_dir + "/clients.csv", clients_csv(res.report));
    write_text_file(cfg.out_dir + "/events.csv", events_csv(res.events));
    if (trace) write_text_file(cfg.out_dir + "/trace.csv", trace_csv(res.trace));
    std::cout << "wrote " << cfg.out_dir << "/report.csv " << cfg.out_dir << "/clients.csv "
              << cfg.out_dir << "/events.csv";
    if (trace) std::cout << " " << cfg.out_dir << "/trace.csv";
    std::cout << "\n";
    const MetricsReport& m = res.report;
    std::cout << "strategy=" << strategy_name(m.strategy) << " completed=" << m.completed << "/"
              << m.clients << " users_per_minute=" << fmt3(m.users_per_minute)
              << " delta_violation_pct=" << fmt3(m.delta_violation_pct)
              << " total_seconds=" << m.total_seconds << "\n";
    std::cout << "avg_psnr_regular=" << (m.avg_psnr_regular ? fmt3(*m.avg_psnr_regular) : "-")
              << " avg_psnr_premium=" << (m.avg_psnr_premium ? fmt3(*m.avg_psnr_premium) : "-")
              << " tier_pct=" << fmt3(m.tier_time_pct[0]) << "/" << fmt3(m.tier_time_pct[1])
              << "/" << fmt3(m.tier_time_pct[2]) << "\n";
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::vector<double>& intervals,
              const std::vector<double>& fractions, const std::vector<std::string>& strategies,
              int repeats) {
    ensure_out_dir(cfg);
    KnowledgeBase kb = load_kb_or_die(cfg);
    SweepSpec spec = cfg.sweep;
    if (!intervals.empty()) spec.intervals = intervals;
    if (!fractions.empty()) spec.fractions = fractions;
    if (!strategies.empty()) {
        spec.strategies.clear();
        for (const std::string& s : strategies) spec.strategies.push_back(strategy_from_name(s));
    }
    if (repeats > 0) spec.repeats = repeats;
    SweepResult res = run_sweep(kb, spec, cfg.experiment_options(false));
    write_text_file(cfg.out_dir + "/sweep.csv", sweep_csv(res.rows));
    std::string runs = report_csv(res.runs.empty() ? MetricsReport{} : res.runs.front());
    runs.resize(runs.find('\n') + 1);  // header only
    for (const MetricsReport& m : res.runs) {
        std::string one = report_csv(m);
        runs += one.substr(one.find('\n') + 1);
    }
    write_text_file(cfg.out_dir + "/sweep_runs.csv", runs);
    write_text_file(cfg.out_dir + "/plot_users_per_minute.csv", plot_users_csv(res.rows));
    write_text_file(cfg.out_dir + "/plot_premium_psnr.csv", plot_premium_psnr_csv(res.rows));
    write_text_file(cfg.out_dir + "/plot_s2_time.csv", plot_s2_time_csv(res.rows));
    std::cout << "wrote " << cfg.out_dir << "/sweep.csv (" << res.rows.size() << " rows), "
              << cfg.out_dir << "/sweep_runs.csv (" << res.runs.size() << " runs), "
              << cfg.out_dir << "/plot_users_per_minute.csv, " << cfg.out_dir
              << "/plot_premium_psnr.csv, " << cfg.out_dir << "/plot_s2_time.csv\n";
    return 0;
}

int cmd_reward_sweep(const ExperimentConfig& cfg, const std::string& name, double threshold) {
    ensure_out_dir(cfg);
    RewardRecipe recipe = recipe_by_name(name);
    std::vector<LandscapeRow> rows = reward_landscape(recipe, cfg.space, threshold);
    std::string csv = "state_idx,fps_bin,psnr_bin,power_bin,reward,is_goal\n";
    std::size_t goals = 0;
    for (const LandscapeRow& r : rows) {
        csv += std::to_string(state_index(r.s, cfg.space)) + ',' + std::to_string(r.s.fps_bin) +
               ',' + std::to_string(r.s.psnr_bin) + ',' + std::to_string(r.s.power_bin) + ',' +
               fmt_double(r.reward) + ',' + (r.is_goal ? "1" : "0") + '\n';
        if (r.is_goal) ++goals;
    }
    write_text_file(cfg.out_dir + "/landscape.csv", csv);
    std::cout << "wrote " << cfg.out_dir << "/landscape.csv (" << rows.size() << " states, "
              << goals << " goal states at threshold " << fmt_double(threshold) << ")\n";
    return 0;
}

int cmd_kb_inspect(const ExperimentConfig& cfg) {
    KnowledgeBase kb = load_kb_or_die(cfg);
    std::cout << "knowledge base " << cfg.kb_path() << "\n";
    for (const std::string& name : kb.names()) {
        const KbEntry& e = kb.entry(name);
        std::cout << "policy=" << name << " trained_with=" << e.policy.trained_with
                  << " seed=" << e.policy.seed << " env_interactions=" << e.policy.env_interactions
                  << " avg_cores=" << fmt3(e.avg_cores) << " avg_quality=" << fmt3(e.avg_quality)
                  << " measured_on=";
        for (std::size_t i = 0; i < e.measured_on.size(); ++i) {
            if (i) std::cout << "+";
            std::cout << e.measured_on[i];
        }
        std::cout << "\n";
    }
    std::vector<std::string> missing = kb.missing_names();
    if (missing.empty()) {
        std::cout << "provisioned: yes\n";
    } else {
        std::cout << "provisioned: no, missing";
        for (const std::string& m : missing) std::cout << " " << m;
        std::cout << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-as-a-Service transcoding lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed, "master seed (overrides config)")
        ->each([&](const std::string&) { seed_set = true; });

    CLI::App* c_explore = app.add_subcommand("explore", "build and save the transition table");
    std::uint64_t min_visits = 0;
    std::uint64_t budget = 0;
    c_explore->add_option("--min-visits", min_visits, "per-(state,action) visit target");
    c_explore->add_option("--budget", budget, "exploration decision budget");

    CLI::App* c_train = app.add_subcommand("train", "train one policy");
    std::string policy_name;
    bool offline = false;
    c_train->add_option("--policy", policy_name, "pi_R_hi, pi_P_hi, pi_R_lo or pi_P_lo")
        ->required();
    c_train->add_flag("--offline", offline, "train from the saved transition table");

    CLI::App* c_prov = app.add_subcommand("provision", "bootstrap the knowledge base");

    CLI::App* c_sim = app.add_subcommand("simulate", "run one serving experiment");
    std::string strategy = "3tier";
    double interval = 10.0;
    double fraction = 0.5;
    int clients = 0;
    int cores = 0;
    bool no_trace = false;
    c_sim->add_option("--strategy", strategy, "3tier, 2pol or 1pol");
    c_sim->add_option("--interval", interval, "arrival interval, seconds");
    c_sim->add_option("--premium", fraction, "premium user fraction");
    c_sim->add_option("--clients", clients, "number of clients");
    c_sim->add_option("--cores", cores, "physical cores of the serving machine");
    c_sim->add_flag("--no-trace", no_trace, "skip the per-interval trace file");

    CLI::App* c_sweep = app.add_subcommand("sweep", "run the experiment matrix");
    std::vector<double> sw_intervals;
    std::vector<double> sw_fractions;
    std::vector<std::string> sw_strategies;
    int repeats = 0;
    c_sweep->add_option("--interval", sw_intervals, "arrival interval(s), seconds");
    c_sweep->add_option("--fraction", sw_fractions, "premium fraction(s)");
    c_sweep->add_option("--strategy", sw_strategies, "strategies to include");
    c_sweep->add_option("--repeats", repeats, "runs per cell");
    c_sweep->add_option("--cores", cores, "physical cores of the serving machine");

    CLI::App* c_land = app.add_subcommand("reward-sweep", "dump the reward landscape");
    std::string land_policy = "pi_R_hi";
    double threshold = 0.75;
    c_land->add_option("--policy", land_policy, "recipe to evaluate");
    c_land->add_option("--threshold", threshold, "goal-state reward threshold");

    CLI::App* c_kb = app.add_subcommand("kb", "knowledge base utilities");
    c_kb->require_subcommand(1);
    CLI::App* c_kb_inspect = c_kb->add_subcommand("inspect", "list stored policies");

    // Let the shared --config/--out/--seed flags appear after the
    // subcommand name as well as before it.
    for (CLI::App* s : {c_explore, c_train, c_prov, c_sim, c_sweep, c_land, c_kb, c_kb_inspect})
        s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg =
            config_path.empty() ? kaas::default_config() : kaas::load_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_set) {
            cfg.seed = seed;
            cfg.sweep.base_seed = seed;
        }
        if (min_visits > 0) cfg.min_visits = min_visits;
        if (budget > 0) cfg.explore_budget = budget;
        if (cores > 0) cfg.env.physical_cores = cores;
        if (clients <= 0) clients = cfg.sweep.n_clients;
        cfg.validate();

        if (*c_explore) return cmd_explore(cfg);
        if (*c_train) return cmd_train(cfg, policy_name, offline);
        if (*c_prov) return cmd_provision(cfg);
        if (*c_sim)
            return cmd_simulate(cfg, strategy, interval, fraction, clients, cfg.seed, !no_trace);
        if (*c_sweep) return cmd_sweep(cfg, sw_intervals, sw_fractions, sw_strategies, repeats);
        if (*c_land) return cmd_reward_sweep(cfg, land_policy, threshold);
        if (*c_kb_inspect) return cmd_kb_inspect(cfg);
        throw InvalidInputError("no subcommand selected");
    } catch (const kaas::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
