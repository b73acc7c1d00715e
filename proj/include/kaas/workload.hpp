#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kaas/kb.hpp"
#include "kaas/scheduler.hpp"

namespace kaas {

struct WorkloadSpec {
    double arrival_interval_s = 10.0;
    double premium_fraction = 0.5;
    int n_clients = 10;
    std::vector<std::string> profile_pool;  // empty means v1..v4
    std::uint64_t seed = 1;

    void validate() const;  // interval > 0, fraction in [0,1], n >= 1
};

/// Clients arriving at t = 0, I, 2I, ...; exactly floor(fraction*n) of them
/// premium, placement shuffled by the seed; profiles drawn uniformly from
/// the pool. Deterministic for a fixed spec.
std::vector<ClientInfo> generate_workload(const WorkloadSpec& spec);

struct ClientSummary {
    int id = 0;
    UserClass klass = UserClass::Regular;
    std::string profile;
    std::uint64_t arrival_s = 0;
    std::uint64_t admit_s = 0;
    std::uint64_t finish_s = 0;
    std::uint64_t intervals = 0;
    double avg_fps = 0.0;
    double avg_psnr = 0.0;
    double avg_power = 0.0;
    double avg_threads = 0.0;
    double avg_freq = 0.0;
    double avg_qp = 0.0;
    double delta_violation_pct = 0.0;
};

struct MetricsReport {
    Strategy strategy = Strategy::ThreeTier;
    double arrival_interval_s = 0.0;
    double premium_fraction = 0.0;
    std::uint64_t seed = 0;
    int clients = 0;
    int completed = 0;
    double users_per_minute = 0.0;       // completions per simulated minute
    double admissions_per_minute = 0.0;  // secondary counting rule
    std::optional<double> avg_psnr_regular;  // absent when the class is absent
    std::optional<double> avg_psnr_premium;
    double delta_violation_pct = 0.0;  // share of all intervals below 24 fps
    std::array<double, 3> tier_time_pct{};  // sums to 1 within 1e-9
    double avg_threads = 0.0;
    double avg_freq = 0.0;
    double avg_qp = 0.0;
    double avg_power = 0.0;
    double avg_fps = 0.0;
    double avg_psnr = 0.0;
    std::uint64_t total_seconds = 0;  // simulated time until the last completion
    std::vector<ClientSummary> per_client;
};

struct ExperimentOptions {
    int physical_cores = 12;
    KnobSetting start_knobs;
    double noise_scale = 1.0;
    bool record_trace = true;
};

struct ExperimentResult {
    MetricsReport report;
    std::vector<EventRecord> events;
    std::vector<TraceRow> trace;
};

/// Runs one workload to completion of every client under the given serving
/// strategy. One simulated second per control interval; arrivals at a tick
/// are processed before that tick encodes. Deterministic for a fixed spec.
ExperimentResult run_experiment(const KnowledgeBase& kb, Strategy strategy,
                                const WorkloadSpec& workload, const ExperimentOptions& opt);

/// One experiment-matrix cell, averaged over its repeats. The same repeat
/// index maps to the same workload seed for every strategy, so strategies
/// are always compared on identical arrival sequences.
struct SweepRow {
    Strategy strategy = Strategy::ThreeTier;
    double arrival_interval_s = 0.0;
    double premium_fraction = 0.0;
    int repeats = 0;
    double users_per_minute = 0.0;
    double admissions_per_minute = 0.0;
    std::optional<double> avg_psnr_regular;
    std::optional<double> avg_psnr_premium;
    double delta_violation_pct = 0.0;
    std::array<double, 3> tier_time_pct{};
    double avg_threads = 0.0;
    double avg_freq = 0.0;
    double avg_qp = 0.0;
    double avg_power = 0.0;
    double avg_seconds = 0.0;
};

struct SweepSpec {
    std::vector<Strategy> strategies = {Strategy::ThreeTier, Strategy::TwoPol, Strategy::OnePol};
    std::vector<double> intervals = {5.0, 10.0, 15.0};
    std::vector<double> fractions = {0.0, 0.25, 0.5, 0.75, 1.0};
    int repeats = 3;
    int n_clients = 10;
    std::vector<std::string> profile_pool;
    std::uint64_t base_seed = 1;
};

struct SweepResult {
    std::vector<SweepRow> rows;          // interval-major, fraction, strategy
    std::vector<MetricsReport> runs;     // every individual run, same order plus repeat
};

SweepResult run_sweep(const KnowledgeBase& kb, const SweepSpec& spec,
                      const ExperimentOptions& opt);

// CSV renderings. All numeric cells use shortest round-trip formatting so
// identical inputs always produce identical bytes.
std::string report_csv(const MetricsReport& r);
std::string clients_csv(const MetricsReport& r);
std::string events_csv(const std::vector<EventRecord>& events);
std::string trace_csv(const std::vector<TraceRow>& trace);
std::string sweep_csv(const std::vector<SweepRow>& rows);
/// Wide pivots for plotting: users/min and premium PSNR per (interval,
/// fraction) with one column per strategy, and the 3tier S2-time line.
std::string plot_users_csv(const std::vector<SweepRow>& rows);
std::string plot_premium_psnr_csv(const std::vector<SweepRow>& rows);
std::string plot_s2_time_csv(const std::vector<SweepRow>& rows);

} // namespace kaas
