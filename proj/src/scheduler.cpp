#include "kaas/scheduler.hpp"

#include <algorithm>

#include "kaas/errors.hpp"

namespace kaas {

const char* tier_name(ServiceTier t) {
    switch (t) {
    case ServiceTier::S0: return "S0";
    case ServiceTier::S1: return "S1";
    default: return "S2";
    }
}

ResourceMode mode_for(ServiceTier t, UserClass c) {
    switch (t) {
    case ServiceTier::S0: return ResourceMode::Full;
    case ServiceTier::S1:
        return c == UserClass::Premium ? ResourceMode::Full : ResourceMode::Minimized;
    default: return ResourceMode::Minimized;
    }
}

const char* strategy_name(Strategy s) {
    switch (s) {
    case Strategy::ThreeTier: return "3tier";
    case Strategy::TwoPol: return "2pol";
    default: return "1pol";
    }
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "3tier") return Strategy::ThreeTier;
    if (name == "2pol") return Strategy::TwoPol;
    if (name == "1pol") return Strategy::OnePol;
    throw InvalidInputError("unknown strategy " + name + " (expected 3tier, 2pol or 1pol)");
}

SchedulerCore::SchedulerCore(const KnowledgeBase& kb, const SchedulerConfig& cfg,
                             std::uint64_t seed)
    : kb_(kb), cfg_(cfg), seed_(seed) {
    if (cfg_.physical_cores < 1)
        throw InvalidInputError("physical_cores must be at least 1");
    if (!valid_for(cfg_.start_knobs, kb_.ladder()))
        throw InvalidInputError("start knobs fall outside the ladder");
    // Fail at construction, not mid-run, when the kb lacks a policy the
    // strategy will serve.
    std::vector<const char*> needed;
    switch (cfg_.strategy) {
    case Strategy::OnePol: needed = {"pi_R_hi"}; break;
    case Strategy::TwoPol: needed = {"pi_R_hi", "pi_P_hi"}; break;
    default: needed = {"pi_R_hi", "pi_P_hi", "pi_R_lo", "pi_P_lo"}; break;
    }
    for (const char* n : needed) (void)kb_.entry(n);
}

const char* SchedulerCore::policy_name_for(ServiceTier t, UserClass c) const {
    switch (cfg_.strategy) {
    case Strategy::OnePol: return canonical_policy_name(UserClass::Regular, ResourceMode::Full);
    case Strategy::TwoPol: return canonical_policy_name(c, ResourceMode::Full);
    default: return canonical_policy_name(c, mode_for(t, c));
    }
}

double SchedulerCore::predicted_load(ServiceTier t, const ClientInfo* incoming) const {
    double load = 0.0;
    for (const Running& r : running_)
        load += kb_.entry(policy_name_for(t, r.info.klass)).avg_cores;
    if (incoming) load += kb_.entry(policy_name_for(t, incoming->klass)).avg_cores;
    return load;
}

void SchedulerCore::set_tier(ServiceTier t, std::uint64_t now) {
    if (t == tier_) return;
    tier_ = t;
    events_.push_back({now, "tier_change", -1, tier_});
}

bool SchedulerCore::try_admit(const ClientInfo& c, std::uint64_t now) {
    std::vector<ServiceTier> candidates = {tier_};
    if (cfg_.strategy == Strategy::ThreeTier) {
        if (tier_ == ServiceTier::S0) candidates.push_back(ServiceTier::S1);
        if (c.klass == UserClass::Premium && tier_ != ServiceTier::S2)
            candidates.push_back(ServiceTier::S2);
    }
    for (ServiceTier t : candidates) {
        if (predicted_load(t, &c) > cfg_.physical_cores + 1e-9) continue;
        set_tier(t, now);
        running_.push_back(Running{c,
                                   EncodeSession(profile_by_id(c.profile_id), cfg_.start_knobs,
                                                 seed_, static_cast<std::uint64_t>(c.id),
                                                 cfg_.noise_scale),
                                   cfg_.start_knobs, std::nullopt});
        stats_for(c.id).admit_time = now;
        events_.push_back({now, "admit", c.id, tier_});
        return true;
    }
    return false;
}

void SchedulerCore::drain_queue(std::uint64_t now) {
    while (!queue_.empty()) {
        // Head-of-line only: a blocked head keeps its place at the front so
        // arrival order is never reshuffled.
        if (!try_admit(queue_.front(), now)) {
            events_.push_back({now, "requeue", queue_.front().id, tier_});
            break;
        }
        queue_.pop_front();
    }
}

void SchedulerCore::arrive(const ClientInfo& c, std::uint64_t now) {
    for (const ClientStats& s : stats_)
        if (s.info.id == c.id) throw InvalidInputError("duplicate client id");
    ClientStats st;
    st.info = c;
    stats_.push_back(std::move(st));
    events_.push_back({now, "arrive", c.id, tier_});
    queue_.push_back(c);
    drain_queue(now);
}

ClientStats& SchedulerCore::stats_for(int id) {
    for (ClientStats& s : stats_)
        if (s.info.id == id) return s;
    throw BookkeepingError("no stats record for client");
}

void SchedulerCore::finish_client(std::size_t run_idx, std::uint64_t now) {
    int id = running_[run_idx].info.id;
    running_.erase(running_.begin() + static_cast<std::ptrdiff_t>(run_idx));
    ClientStats& st = stats_for(id);
    st.finished = true;
    st.finish_time = now;
    events_.push_back({now, "finish", id, tier_});
    if (cfg_.strategy == Strategy::ThreeTier) {
        // Re-pack: the lowest tier whose prediction still fits everyone left.
        for (int t = 0; t <= static_cast<int>(tier_); ++t) {
            if (predicted_load(static_cast<ServiceTier>(t), nullptr) <=
                cfg_.physical_cores + 1e-9) {
                set_tier(static_cast<ServiceTier>(t), now);
                break;
            }
        }
    }
    drain_queue(now);
}

void SchedulerCore::control_tick(std::uint64_t now) {
    if (running_.empty()) return;
    const KnobLadder& ladder = kb_.ladder();
    const StateSpace& space = kb_.space();
    // Act on last interval's observation first, so this tick's contention
    // reflects the knobs everyone actually runs with.
    for (Running& r : running_) {
        if (!r.last_obs) continue;
        const Policy& pol = kb_.entry(policy_name_for(tier_, r.info.klass)).policy;
        r.knobs = apply_action(r.knobs, pol.act(discretize(*r.last_obs, space), space), ladder);
        r.session.set_knobs(r.knobs);
    }
    int total_threads = 0;
    for (const Running& r : running_) total_threads += ladder.threads[r.knobs.threads_idx];
    double contention = contention_factor(total_threads, cfg_.physical_cores);
    int active = static_cast<int>(running_.size());
    std::vector<int> finished_ids;
    for (Running& r : running_) {
        Observation obs = r.session.step_interval(ladder, kb_.env(), contention, active);
        r.last_obs = obs;
        ClientStats& st = stats_for(r.info.id);
        ++st.ticks;
        st.sum_fps += obs.fps;
        st.sum_psnr += obs.psnr;
        st.sum_power += obs.power;
        st.sum_threads += ladder.threads[r.knobs.threads_idx];
        st.sum_freq += ladder.freq[r.knobs.freq_idx];
        st.sum_qp += ladder.qp[r.knobs.qp_idx];
        if (obs.fps < 24.0) ++st.low_fps_ticks;
        if (cfg_.record_trace)
            trace_.push_back({now, r.info.id, tier_, policy_name_for(tier_, r.info.klass),
                              ladder.threads[r.knobs.threads_idx], ladder.freq[r.knobs.freq_idx],
                              ladder.qp[r.knobs.qp_idx], obs.fps, obs.psnr, obs.power});
        if (r.session.finished()) finished_ids.push_back(r.info.id);
    }
    ++ticks_;
    ++tier_ticks_[static_cast<std::size_t>(tier_)];
    for (int id : finished_ids) {
        for (std::size_t i = 0; i < running_.size(); ++i) {
            if (running_[i].info.id == id) {
                finish_client(i, now);
                break;
            }
        }
    }
}

int SchedulerCore::finished_count() const {
    return static_cast<int>(
        std::count_if(stats_.begin(), stats_.end(),
                      [](const ClientStats& s) { return s.finished; }));
}

std::vector<ClientStats> SchedulerCore::client_stats() const {
    std::vector<ClientStats> out = stats_;
    std::sort(out.begin(), out.end(),
              [](const ClientStats& a, const ClientStats& b) { return a.info.id < b.info.id; });
    return out;
}

} // namespace kaas
