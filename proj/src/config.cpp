#include "kaas/config.hpp"

#include <cmath>
#include <cstdlib>

#include <json.hpp>

#include "kaas/errors.hpp"
#include "kaas/ioutil.hpp"
#include "kaas/scheduler.hpp"

namespace kaas {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
    if (!j.is_object()) throw InvalidInputError(context + " must be a JSON object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) ok = true;
        if (!ok) throw InvalidInputError("unknown key \"" + item.key() + "\" in " + context);
    }
}

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

int index_of_int(const std::vector<int>& ladder, int value, const char* what) {
    for (std::size_t i = 0; i < ladder.size(); ++i)
        if (ladder[i] == value) return static_cast<int>(i);
    throw InvalidInputError(std::string("start_knobs.") + what + " is not a ladder rung");
}

int index_of_real(const std::vector<double>& ladder, double value, const char* what) {
    for (std::size_t i = 0; i < ladder.size(); ++i)
        if (std::fabs(ladder[i] - value) < 1e-9) return static_cast<int>(i);
    throw InvalidInputError(std::string("start_knobs.") + what + " is not a ladder rung");
}

} // namespace

void ExperimentConfig::validate() const {
    space.validate();
    ladder.validate();
    env.validate();
    hyper.validate();
    if (!valid_for(start_knobs, ladder))
        throw InvalidInputError("start knobs fall outside the ladder");
    if (min_visits < 1) throw InvalidInputError("min_visits must be at least 1");
    if (explore_budget < 1) throw InvalidInputError("explore budget must be at least 1");
    if (!(min_explored_fraction > 0.0 && min_explored_fraction <= 1.0))
        throw InvalidInputError("min_explored_fraction must lie in (0, 1]");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
        throw InvalidInputError("noise_scale must be a finite non-negative number");
    if (out_dir.empty()) throw InvalidInputError("out_dir must not be empty");
    if (sweep.repeats < 1) throw InvalidInputError("workload.repeats must be at least 1");
    if (sweep.n_clients < 1) throw InvalidInputError("workload.n_clients must be at least 1");
    if (sweep.strategies.empty() || sweep.intervals.empty() || sweep.fractions.empty())
        throw InvalidInputError("workload matrix must not be empty");
    for (double i : sweep.intervals)
        if (!(i > 0.0) || !std::isfinite(i))
            throw InvalidInputError("workload intervals must be positive");
    for (double f : sweep.fractions)
        if (!(f >= 0.0 && f <= 1.0))
            throw InvalidInputError("workload fractions must lie in [0, 1]");
    for (const std::string& id : sweep.profile_pool) (void)profile_by_id(id);
}

ProvisionOptions ExperimentConfig::provision_options() const {
    ProvisionOptions opt;
    opt.space = space;
    opt.ladder = ladder;
    opt.env = env;
    opt.hyper = hyper;
    opt.start_knobs = start_knobs;
    opt.min_visits = min_visits;
    opt.explore_budget = explore_budget;
    opt.min_explored_fraction = min_explored_fraction;
    opt.seed = seed;
    return opt;
}

ExperimentOptions ExperimentConfig::experiment_options(bool record_trace) const {
    ExperimentOptions opt;
    opt.physical_cores = env.physical_cores;
    opt.start_knobs = start_knobs;
    opt.noise_scale = noise_scale;
    opt.record_trace = record_trace;
    return opt;
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidInputError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    try {
        check_keys(j,
                   {"bins", "ladders", "env", "hyperparams", "start_knobs", "explore", "workload",
                    "noise_scale", "seed", "out_dir"},
                   "config");
        if (j.contains("bins")) {
            const json& b = j.at("bins");
            check_keys(b, {"fps_edges", "psnr_edges", "power_edges"}, "bins");
            get_to_if(b, "fps_edges", c.space.fps.bin_edges);
            get_to_if(b, "psnr_edges", c.space.psnr.bin_edges);
            get_to_if(b, "power_edges", c.space.power.bin_edges);
        }
        if (j.contains("ladders")) {
            const json& l = j.at("ladders");
            check_keys(l, {"threads", "freq_ghz", "qp"}, "ladders");
            get_to_if(l, "threads", c.ladder.threads);
            get_to_if(l, "freq_ghz", c.ladder.freq);
            get_to_if(l, "qp", c.ladder.qp);
        }
        if (j.contains("env")) {
            const json& e = j.at("env");
            check_keys(e,
                       {"power_alpha", "power_beta", "power_gamma", "fps_gain", "thread_exp",
                        "qp_speedup", "qp_ref", "psnr_base", "psnr_slope", "physical_cores"},
                       "env");
            get_to_if(e, "power_alpha", c.env.power.alpha);
            get_to_if(e, "power_beta", c.env.power.beta);
            get_to_if(e, "power_gamma", c.env.power.gamma);
            get_to_if(e, "fps_gain", c.env.fps_gain);
            get_to_if(e, "thread_exp", c.env.thread_exp);
            get_to_if(e, "qp_speedup", c.env.qp_speedup);
            get_to_if(e, "qp_ref", c.env.qp_ref);
            get_to_if(e, "psnr_base", c.env.psnr_base);
            get_to_if(e, "psnr_slope", c.env.psnr_slope);
            get_to_if(e, "physical_cores", c.env.physical_cores);
        }
        if (j.contains("hyperparams")) {
            const json& h = j.at("hyperparams");
            check_keys(h,
                       {"learning_rate", "discount", "epsilon_start", "epsilon_end",
                        "epsilon_decay_steps", "training_frames", "offline_horizon"},
                       "hyperparams");
            get_to_if(h, "learning_rate", c.hyper.learning_rate);
            get_to_if(h, "discount", c.hyper.discount);
            get_to_if(h, "epsilon_start", c.hyper.epsilon_start);
            get_to_if(h, "epsilon_end", c.hyper.epsilon_end);
            get_to_if(h, "epsilon_decay_steps", c.hyper.epsilon_decay_steps);
            get_to_if(h, "training_frames", c.hyper.training_frames);
            get_to_if(h, "offline_horizon", c.hyper.offline_horizon);
        }
        if (j.contains("explore")) {
            const json& e = j.at("explore");
            check_keys(e, {"min_visits", "budget_decisions", "min_explored_fraction"}, "explore");
            get_to_if(e, "min_visits", c.min_visits);
            get_to_if(e, "budget_decisions", c.explore_budget);
            get_to_if(e, "min_explored_fraction", c.min_explored_fraction);
        }
        if (j.contains("workload")) {
            const json& w = j.at("workload");
            check_keys(
                w, {"strategies", "intervals_s", "fractions", "repeats", "n_clients", "profiles"},
                "workload");
            if (w.contains("strategies")) {
                c.sweep.strategies.clear();
                for (const auto& s : w.at("strategies"))
                    c.sweep.strategies.push_back(strategy_from_name(s.get<std::string>()));
            }
            get_to_if(w, "intervals_s", c.sweep.intervals);
            get_to_if(w, "fractions", c.sweep.fractions);
            get_to_if(w, "repeats", c.sweep.repeats);
            get_to_if(w, "n_clients", c.sweep.n_clients);
            get_to_if(w, "profiles", c.sweep.profile_pool);
        }
        get_to_if(j, "noise_scale", c.noise_scale);
        get_to_if(j, "seed", c.seed);
        get_to_if(j, "out_dir", c.out_dir);
        c.ladder.validate();
        if (j.contains("start_knobs")) {
            const json& k = j.at("start_knobs");
            check_keys(k, {"threads", "freq_ghz", "qp"}, "start_knobs");
            if (k.contains("threads"))
                c.start_knobs.threads_idx =
                    index_of_int(c.ladder.threads, k.at("threads").get<int>(), "threads");
            if (k.contains("freq_ghz"))
                c.start_knobs.freq_idx =
                    index_of_real(c.ladder.freq, k.at("freq_ghz").get<double>(), "freq_ghz");
            if (k.contains("qp"))
                c.start_knobs.qp_idx = index_of_int(c.ladder.qp, k.at("qp").get<int>(), "qp");
        } else if (!valid_for(c.start_knobs, c.ladder)) {
            // Custom ladder without explicit start knobs: start mid-ladder.
            c.start_knobs.threads_idx = static_cast<int>(c.ladder.threads.size() / 2);
            c.start_knobs.freq_idx = static_cast<int>(c.ladder.freq.size() / 2);
            c.start_knobs.qp_idx = static_cast<int>(c.ladder.qp.size() / 2);
        }
    } catch (const json::exception& e) {
        throw InvalidInputError(std::string("malformed config: ") + e.what());
    }
    c.sweep.base_seed = c.seed;
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_json_text(read_text_file(path));
}

std::string config_to_json_text(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["bins"]["fps_edges"] = c.space.fps.bin_edges;
    j["bins"]["psnr_edges"] = c.space.psnr.bin_edges;
    j["bins"]["power_edges"] = c.space.power.bin_edges;
    j["ladders"]["threads"] = c.ladder.threads;
    j["ladders"]["freq_ghz"] = c.ladder.freq;
    j["ladders"]["qp"] = c.ladder.qp;
    j["env"]["power_alpha"] = c.env.power.alpha;
    j["env"]["power_beta"] = c.env.power.beta;
    j["env"]["power_gamma"] = c.env.power.gamma;
    j["env"]["fps_gain"] = c.env.fps_gain;
    j["env"]["thread_exp"] = c.env.thread_exp;
    j["env"]["qp_speedup"] = c.env.qp_speedup;
    j["env"]["qp_ref"] = c.env.qp_ref;
    j["env"]["psnr_base"] = c.env.psnr_base;
    j["env"]["psnr_slope"] = c.env.psnr_slope;
    j["env"]["physical_cores"] = c.env.physical_cores;
    j["hyperparams"]["learning_rate"] = c.hyper.learning_rate;
    j["hyperparams"]["discount"] = c.hyper.discount;
    j["hyperparams"]["epsilon_start"] = c.hyper.epsilon_start;
    j["hyperparams"]["epsilon_end"] = c.hyper.epsilon_end;
    j["hyperparams"]["epsilon_decay_steps"] = c.hyper.epsilon_decay_steps;
    j["hyperparams"]["training_frames"] = c.hyper.training_frames;
    j["hyperparams"]["offline_horizon"] = c.hyper.offline_horizon;
    j["start_knobs"]["threads"] = c.ladder.threads.at(c.start_knobs.threads_idx);
    j["start_knobs"]["freq_ghz"] = c.ladder.freq.at(c.start_knobs.freq_idx);
    j["start_knobs"]["qp"] = c.ladder.qp.at(c.start_knobs.qp_idx);
    j["explore"]["min_visits"] = c.min_visits;
    j["explore"]["budget_decisions"] = c.explore_budget;
    j["explore"]["min_explored_fraction"] = c.min_explored_fraction;
    nlohmann::ordered_json strategies = nlohmann::ordered_json::array();
    for (Strategy s : c.sweep.strategies) strategies.push_back(strategy_name(s));
    j["workload"]["strategies"] = std::move(strategies);
    j["workload"]["intervals_s"] = c.sweep.intervals;
    j["workload"]["fractions"] = c.sweep.fractions;
    j["workload"]["repeats"] = c.sweep.repeats;
    j["workload"]["n_clients"] = c.sweep.n_clients;
    j["workload"]["profiles"] = c.sweep.profile_pool;
    j["noise_scale"] = c.noise_scale;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    return j.dump(2) + "\n";
}

} // namespace kaas
