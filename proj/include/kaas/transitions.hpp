#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "kaas/env_sim.hpp"
#include "kaas/mdp.hpp"

namespace kaas {

/// Canonical encoding of everything that defines transition semantics:
/// bin edges, knob ladders and environment constants. Tables built under a
/// different signature are incompatible (stale-table guard).
std::string table_signature(const StateSpace& space, const KnobLadder& ladder,
                            const EnvModelParams& env);

struct CoverageReport {
    std::uint64_t visited_states = 0;
    std::uint64_t explored_pairs = 0;         // total > 0
    std::uint64_t satisfied_pairs = 0;        // total >= min_visits
    int min_visits = 0;
    std::uint64_t recorded_transitions = 0;
    bool complete = false;  // every pair of every visited state satisfied

    double satisfied_fraction() const {
        return explored_pairs == 0
                   ? 0.0
                   : static_cast<double>(satisfied_pairs) / static_cast<double>(explored_pairs);
    }
};

/// Empirical next-state counts per (state, action); probabilities are
/// count/total. Unexplored pairs stay absent rather than smoothed.
class TransitionTable {
public:
    using RowEntry = std::pair<std::uint32_t, std::uint64_t>;  // state index, count

    TransitionTable(const StateSpace& space, std::string signature, std::uint64_t build_seed,
                    std::string build_date);

    void record(const State& s, const Action& a, const State& next);
    std::uint64_t total(const State& s, const Action& a) const;
    /// Successors of (s, a) ordered by state index; empty when unexplored.
    const std::vector<RowEntry>& row(const State& s, const Action& a) const;

    /// Draws a successor with probability count/total. A single-successor
    /// row returns it without consuming a draw. Throws UnexploredPairError
    /// when total(s, a) == 0.
    State sample_next(const State& s, const Action& a, std::mt19937_64& rng) const;

    /// Cell-wise count addition; signatures must match.
    void merge(const TransitionTable& other);

    CoverageReport coverage(int min_visits) const;
    /// Actions of s with at least one recorded transition.
    std::vector<std::size_t> explored_actions(const State& s) const;
    std::vector<State> explored_states() const;

    const StateSpace& space() const { return space_; }
    const std::string& signature() const { return signature_; }
    std::uint64_t build_seed() const { return build_seed_; }
    const std::string& build_date() const { return build_date_; }

    void save(const std::string& path) const;
    /// Loads and verifies the signature against expected_signature
    /// (SignatureMismatchError on any difference).
    static TransitionTable load(const std::string& path, const std::string& expected_signature);
    /// One line per nonzero cell: s_idx, a_idx, next_idx, count.
    void export_csv(const std::string& path) const;

private:
    std::size_t cell(const State& s, const Action& a) const;

    StateSpace space_;
    std::string signature_;
    std::uint64_t build_seed_;
    std::string build_date_;
    std::vector<std::vector<RowEntry>> rows_;   // state_count * 27
    std::vector<std::uint64_t> totals_;
};

/// Systematic exploration: at each visited state pick the least-tried
/// action (lowest index on ties), with periodic knob teleports to reach
/// regions the delta dynamics rarely enter. Runs until every action of
/// every visited state has min_visits recorded transitions or the decision
/// budget runs out; a partial table with its coverage report is a valid
/// outcome, not an error.
struct ExploreResult {
    TransitionTable table;
    CoverageReport coverage;
};
ExploreResult explore(TrainingEnv& env, const StateSpace& space, int min_visits,
                      std::uint64_t budget_decisions, std::uint64_t seed);

} // namespace kaas
