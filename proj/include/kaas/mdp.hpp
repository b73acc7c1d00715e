#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace kaas {

/// The three monitored metrics, each backing one factored sub-space.
enum class MetricId { ThroughputFps, QualityPsnrDb, PowerWatts };

const char* metric_name(MetricId id);

/// Discrete value ladders for the three control knobs. Actions step along
/// these; the environment evaluates the rung values.
struct KnobLadder {
    std::vector<int> threads;  // thread counts, ascending, >= 1
    std::vector<double> freq;  // core frequency in GHz, ascending, > 0
    std::vector<int> qp;       // encoder QP, ascending, within 0..51

    static KnobLadder defaults();
    void validate() const;  // throws InvalidInputError
};

/// Indices into a KnobLadder; the vector of knobs a client is running with.
struct KnobSetting {
    int threads_idx = 0;
    int freq_idx = 0;
    int qp_idx = 0;

    bool operator==(const KnobSetting&) const = default;
};

bool valid_for(const KnobSetting& k, const KnobLadder& ladder);

/// One factored sub-space: a metric plus ascending bin edges. Edges define
/// half-open bins [e_i, e_i+1), with an open bin below the first edge and
/// another at/above the last, so bin_count() == edges.size() + 1.
struct SubStateSpec {
    MetricId metric_id{};
    std::vector<double> bin_edges;

    std::size_t bin_count() const { return bin_edges.size() + 1; }
    /// Bin index containing x. Throws InvalidInputError on non-finite x.
    std::size_t bin_of(double x) const;
    void validate() const;
};

/// The three sub-space specs in fixed order: fps, psnr, power.
struct StateSpace {
    SubStateSpec fps;
    SubStateSpec psnr;
    SubStateSpec power;

    static StateSpace defaults();
    void validate() const;

    std::size_t fps_bins() const { return fps.bin_count(); }
    std::size_t psnr_bins() const { return psnr.bin_count(); }
    std::size_t power_bins() const { return power.bin_count(); }
    std::size_t state_count() const { return fps_bins() * psnr_bins() * power_bins(); }
};

/// A factored state: one bin index per sub-space.
struct State {
    int fps_bin = 0;
    int psnr_bin = 0;
    int power_bin = 0;

    bool operator==(const State&) const = default;
};

/// Lexicographic index of s in enumerate_states(space) order.
std::size_t state_index(const State& s, const StateSpace& space);
State state_from_index(std::size_t idx, const StateSpace& space);

/// One step along each knob ladder: every delta in {-1, 0, +1}. Applying a
/// delta at a ladder end saturates instead of wrapping.
struct Action {
    int d_threads = 0;
    int d_freq = 0;
    int d_qp = 0;

    bool operator==(const Action&) const = default;
};

inline constexpr std::size_t kActionCount = 27;

std::size_t action_index(const Action& a);
Action action_from_index(std::size_t idx);

/// Moves each knob index by its delta, clamped to [0, rungs-1].
KnobSetting apply_action(const KnobSetting& knobs, const Action& a, const KnobLadder& ladder);

/// Maps raw metric readings to the factored state. Throws InvalidInputError
/// if any reading is non-finite.
State discretize(double fps, double psnr_db, double power_w, const StateSpace& space);

/// All states, duplicate-free, lexicographic in (fps, psnr, power).
std::vector<State> enumerate_states(const StateSpace& space);

/// The 27 joint delta actions, lexicographic in (d_threads, d_freq, d_qp)
/// with deltas ordered -1, 0, +1.
std::vector<Action> enumerate_actions();

} // namespace kaas
