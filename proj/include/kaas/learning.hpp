#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kaas/env_sim.hpp"
#include "kaas/mdp.hpp"
#include "kaas/rewards.hpp"
#include "kaas/transitions.hpp"

namespace kaas {

struct Hyperparams {
    double learning_rate = 0.1;
    double discount = 0.9;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    /// 0 means the default schedule: linear decay over the first 60% of
    /// the run's decisions, flat at epsilon_end after.
    std::uint64_t epsilon_decay_steps = 0;
    /// Budget in frames; one decision is made per 24-frame control
    /// interval, so decisions = training_frames / 24.
    std::uint64_t training_frames = 100'000 * 24;
    /// Offline episode length before restarting from a fresh start state.
    std::uint64_t offline_horizon = 64;

    std::uint64_t decisions() const { return training_frames / kFramesPerInterval; }
    double epsilon_at(std::uint64_t step, std::uint64_t total_decisions) const;
    void validate() const;
};

/// Dense expected-reward table over (state, action), with visit counts.
class QTable {
public:
    explicit QTable(const StateSpace& space);

    double q(std::size_t s_idx, std::size_t a_idx) const {
        return q_[s_idx * kActionCount + a_idx];
    }
    std::uint64_t visits(std::size_t s_idx, std::size_t a_idx) const {
        return visits_[s_idx * kActionCount + a_idx];
    }
    std::uint64_t state_visits(std::size_t s_idx) const;
    double row_max(std::size_t s_idx) const;
    /// Argmax action index of the row, ties to the lowest index.
    std::size_t row_argmax(std::size_t s_idx) const;

    /// q(s,a) += lr·(r + discount·max q(s′,·) − q(s,a)). Rejects non-finite
    /// rewards; counts one visit.
    void update(const State& s, const Action& a, double r, const State& next,
                const Hyperparams& h);
    /// Direct cell assignment for oracles; bypasses visit accounting.
    void set(std::size_t s_idx, std::size_t a_idx, double v) {
        q_[s_idx * kActionCount + a_idx] = v;
    }

    const StateSpace& space() const { return space_; }

private:
    StateSpace space_;
    std::vector<double> q_;
    std::vector<std::uint64_t> visits_;
};

/// A trained policy: the greedy action map plus its training provenance.
struct Policy {
    std::string name;
    RewardRecipe recipe;
    Hyperparams hyper;
    std::string trained_with;  // "online" or "offline"
    std::uint64_t seed = 0;
    std::uint64_t env_interactions = 0;
    std::vector<std::uint8_t> greedy;          // action index per state index
    std::vector<std::uint64_t> state_visits;   // per state, summed over actions

    Action act(const State& s, const StateSpace& space) const;
    void save(const std::string& path) const;
    static Policy load(const std::string& path);
    std::string to_json_text() const;               // canonical serialized form
    static Policy from_json_text(const std::string& text);
    /// Per-state best-action summary (state_idx, action_idx, visits).
    void export_csv(const std::string& path, const StateSpace& space) const;
};

/// Q-Learning against the live environment, one decision per control
/// interval; environment interactions equal decisions exactly. When
/// record_into is given, every observed transition lands in that table
/// (this is how the base policy's run doubles as transition recording).
Policy train_online(TrainingEnv& env, const RewardRecipe& recipe, const StateSpace& space,
                    const Hyperparams& h, std::uint64_t seed,
                    TransitionTable* record_into = nullptr);

/// Q-Learning against the recorded table alone: successors come from
/// sample_next, never the environment (env_interactions stays 0, asserted).
/// Unexplored actions are masked out of the choice at each state; episodes
/// restart from start_states (default: every explored state, uniformly).
/// min_explored_fraction guards against training on a threadbare table.
Policy train_offline(const TransitionTable& pt, const RewardRecipe& recipe,
                     const Hyperparams& h, std::uint64_t seed,
                     std::vector<State> start_states = {},
                     double min_explored_fraction = 0.95);

/// Independent oracle: the fixed point of
/// Q(s,a) = Σ_s′ P̂(s′|s,a)·(R(s′) + discount·max Q(s′,·))
/// over explored pairs, to sup-norm tol. Throws OracleFailureError if the
/// iteration cap is hit first.
QTable value_iteration(const TransitionTable& pt, const RewardRecipe& recipe, double discount,
                       double tol = 1e-9, int max_iterations = 20'000);

/// Greedy action per state, ties to the lowest action index.
std::vector<std::uint8_t> extract_greedy(const QTable& q);

} // namespace kaas
