#pragma once

#include <cstdint>
#include <string>

#include "kaas/env_sim.hpp"
#include "kaas/kb.hpp"
#include "kaas/learning.hpp"
#include "kaas/mdp.hpp"
#include "kaas/workload.hpp"

namespace kaas {

/// Everything an experiment needs, in one declarative record. The JSON file
/// schema mirrors the nesting here (see README); every key is optional and
/// falls back to these defaults, and CLI flags override the loaded values.
struct ExperimentConfig {
    StateSpace space = StateSpace::defaults();
    KnobLadder ladder = KnobLadder::defaults();
    EnvModelParams env;
    Hyperparams hyper;
    KnobSetting start_knobs{3, 2, 8};  // 4 threads, 1.4 GHz, QP 30
    std::uint64_t min_visits = 10;
    std::uint64_t explore_budget = 1'500'000;  // decisions
    double min_explored_fraction = 0.95;
    SweepSpec sweep;
    double noise_scale = 1.0;
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    void validate() const;

    ProvisionOptions provision_options() const;
    ExperimentOptions experiment_options(bool record_trace = true) const;

    std::string table_path() const { return out_dir + "/ptable.json"; }
    std::string kb_path() const { return out_dir + "/kb.json"; }
    std::string policy_path(const std::string& name) const {
        return out_dir + "/policy_" + name + ".json";
    }
};

ExperimentConfig default_config();
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical full dump; load(dump(c)) == c.
std::string config_to_json_text(const ExperimentConfig& c);

} // namespace kaas
