#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "kaas/env_sim.hpp"
#include "kaas/kb.hpp"
#include "kaas/mdp.hpp"

namespace kaas {

enum class ServiceTier : int { S0 = 0, S1 = 1, S2 = 2 };
const char* tier_name(ServiceTier t);

/// Resource mode each user class runs under at a given tier. S0 gives
/// everyone the full-resource policy; S1 trims regulars; S2 trims everyone.
ResourceMode mode_for(ServiceTier t, UserClass c);

enum class Strategy { ThreeTier, TwoPol, OnePol };
const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);  // throws InvalidInputError

struct ClientInfo {
    int id = 0;
    UserClass klass = UserClass::Regular;
    std::string profile_id;
    std::uint64_t arrival_time = 0;
};

struct EventRecord {
    std::uint64_t time = 0;
    std::string event;  // arrive | admit | requeue | tier_change | finish
    int client = -1;    // -1 for tier_change
    ServiceTier tier = ServiceTier::S0;
};

/// One per-client control interval, for trace.csv.
struct TraceRow {
    std::uint64_t time = 0;
    int client = 0;
    ServiceTier tier = ServiceTier::S0;
    std::string policy;
    int threads = 0;
    double freq = 0.0;
    int qp = 0;
    double fps = 0.0;
    double psnr = 0.0;
    double power = 0.0;
};

struct ClientStats {
    ClientInfo info;
    std::uint64_t admit_time = 0;
    std::uint64_t finish_time = 0;
    bool finished = false;
    std::uint64_t ticks = 0;
    double sum_fps = 0.0;
    double sum_psnr = 0.0;
    double sum_power = 0.0;
    double sum_threads = 0.0;
    double sum_freq = 0.0;
    double sum_qp = 0.0;
    std::uint64_t low_fps_ticks = 0;  // intervals below the 24 fps floor
};

struct SchedulerConfig {
    Strategy strategy = Strategy::ThreeTier;
    int physical_cores = 12;
    KnobSetting start_knobs;
    double noise_scale = 1.0;
    bool record_trace = true;
};

/// Admission, tier control and per-interval policy serving for one machine.
/// Admission predicts load as the sum of each client's policy avg_cores and
/// walks the tier ladder upward only when the current tier cannot fit the
/// head of the queue; departures re-pack downward. The two baselines pin
/// every client to a full-resource policy and never change tier.
class SchedulerCore {
public:
    SchedulerCore(const KnowledgeBase& kb, const SchedulerConfig& cfg, std::uint64_t seed);

    /// Enqueues the client and re-examines the queue.
    void arrive(const ClientInfo& c, std::uint64_t now);
    /// Runs one control interval for every admitted client: act on the last
    /// observation, then encode under the shared contention factor. Finished
    /// clients depart, the tier re-packs and the queue drains.
    void control_tick(std::uint64_t now);

    bool idle() const { return running_.empty() && queue_.empty(); }
    int running_count() const { return static_cast<int>(running_.size()); }
    int queued_count() const { return static_cast<int>(queue_.size()); }
    int finished_count() const;
    ServiceTier tier() const { return tier_; }
    std::uint64_t ticks() const { return ticks_; }
    const std::vector<std::uint64_t>& tier_ticks() const { return tier_ticks_; }

    const std::vector<EventRecord>& events() const { return events_; }
    const std::vector<TraceRow>& trace() const { return trace_; }
    /// All clients seen so far, ordered by id.
    std::vector<ClientStats> client_stats() const;

    /// The policy serving a class at a tier under this strategy.
    const char* policy_name_for(ServiceTier t, UserClass c) const;

private:
    struct Running {
        ClientInfo info;
        EncodeSession session;
        KnobSetting knobs;
        std::optional<Observation> last_obs;
    };

    double predicted_load(ServiceTier t, const ClientInfo* incoming) const;
    bool try_admit(const ClientInfo& c, std::uint64_t now);
    void drain_queue(std::uint64_t now);
    void set_tier(ServiceTier t, std::uint64_t now);
    void finish_client(std::size_t run_idx, std::uint64_t now);
    ClientStats& stats_for(int id);

    const KnowledgeBase& kb_;
    SchedulerConfig cfg_;
    std::uint64_t seed_;
    ServiceTier tier_ = ServiceTier::S0;
    std::deque<ClientInfo> queue_;
    std::vector<Running> running_;
    std::vector<ClientStats> stats_;  // every client ever seen, by arrival
    std::vector<EventRecord> events_;
    std::vector<TraceRow> trace_;
    std::vector<std::uint64_t> tier_ticks_ = {0, 0, 0};
    std::uint64_t ticks_ = 0;
};

} // namespace kaas
