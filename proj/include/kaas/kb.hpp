#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kaas/env_sim.hpp"
#include "kaas/learning.hpp"
#include "kaas/mdp.hpp"
#include "kaas/transitions.hpp"

namespace kaas {

enum class UserClass { Regular, Premium };
enum class ResourceMode { Full, Minimized };

const char* user_class_name(UserClass c);
const char* resource_mode_name(ResourceMode m);

/// The canonical policy name serving a (class, mode) cell:
/// (Regular, Full) -> pi_R_hi, (Premium, Full) -> pi_P_hi,
/// (Regular, Minimized) -> pi_R_lo, (Premium, Minimized) -> pi_P_lo.
const char* canonical_policy_name(UserClass c, ResourceMode m);

/// Time-averaged behavior of one greedy policy over a profile set.
struct RolloutStats {
    std::uint64_t ticks = 0;
    double avg_threads = 0.0;
    double avg_freq = 0.0;
    double avg_qp = 0.0;
    double avg_fps = 0.0;
    double avg_psnr = 0.0;
    double avg_power = 0.0;
    double delta_violation_pct = 0.0;  // share of ticks below 24 fps, percent
};

/// Runs the greedy policy solo over each profile in turn (noise on unless
/// scaled away) and averages the per-tick knob and metric series.
RolloutStats rollout_policy(const Policy& policy, const std::vector<VideoProfile>& profiles,
                            const StateSpace& space, const KnobLadder& ladder,
                            const EnvModelParams& env, const KnobSetting& start_knobs,
                            std::uint64_t seed, double noise_scale = 1.0);

struct KbEntry {
    Policy policy;
    double avg_cores = 0.0;    // mean thread count while serving training content
    double avg_quality = 0.0;  // mean PSNR, dB
    std::vector<std::string> measured_on;
};

/// The policy knowledge base: trained policies plus the serving metadata
/// (average core usage) the admission predictor consumes.
class KnowledgeBase {
public:
    KnowledgeBase(StateSpace space, KnobLadder ladder, EnvModelParams env);

    /// Measures the policy over the given profiles and stores/replaces its
    /// entry under policy.name.
    const KbEntry& register_policy(const Policy& policy,
                                   const std::vector<VideoProfile>& profiles,
                                   const KnobSetting& start_knobs, std::uint64_t seed);

    bool provisioned() const;  // all four canonical names present
    std::vector<std::string> missing_names() const;

    const Policy& lookup(UserClass c, ResourceMode m) const;  // KnowledgeMissError when absent
    double avg_cores(UserClass c, ResourceMode m) const;
    const KbEntry& entry(const std::string& name) const;
    bool has(const std::string& name) const;
    std::vector<std::string> names() const;

    const StateSpace& space() const { return space_; }
    const KnobLadder& ladder() const { return ladder_; }
    const EnvModelParams& env() const { return env_; }
    const std::string& signature() const { return signature_; }

    void save(const std::string& path) const;
    static KnowledgeBase load(const std::string& path, const StateSpace& space,
                              const KnobLadder& ladder, const EnvModelParams& env);

private:
    StateSpace space_;
    KnobLadder ladder_;
    EnvModelParams env_;
    std::string signature_;
    std::vector<KbEntry> entries_;  // insertion order, unique names
};

struct ProvisionOptions {
    StateSpace space;
    KnobLadder ladder;
    EnvModelParams env;
    Hyperparams hyper;
    KnobSetting start_knobs;
    std::uint64_t min_visits = 10;
    std::uint64_t explore_budget = 1'500'000;  // decisions
    double min_explored_fraction = 0.95;
    std::uint64_t seed = 1;
};

struct ProvisionResult {
    KnowledgeBase kb;
    TransitionTable table;
    CoverageReport coverage;
};

/// The one-time bootstrap: explore until the transition table satisfies
/// min_visits (skipped when the given table already does), train the base
/// policy pi_R_hi online while recording its transitions into the table,
/// derive the other three policies offline from the table alone, then
/// measure all four against the training profiles. seed fans out to every
/// stage, so the whole bootstrap is reproducible from one number.
ProvisionResult provision(const ProvisionOptions& opt, const TransitionTable* existing = nullptr);

} // namespace kaas
