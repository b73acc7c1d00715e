#include "kaas/workload.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kaas/errors.hpp"
#include "kaas/ioutil.hpp"
#include "kaas/rng.hpp"

namespace kaas {

void WorkloadSpec::validate() const {
    if (!(arrival_interval_s > 0.0) || !std::isfinite(arrival_interval_s))
        throw InvalidInputError("arrival_interval_s must be positive");
    if (!(premium_fraction >= 0.0 && premium_fraction <= 1.0))
        throw InvalidInputError("premium_fraction must lie in [0, 1]");
    if (n_clients < 1) throw InvalidInputError("n_clients must be at least 1");
    for (const std::string& id : profile_pool) (void)profile_by_id(id);
}

std::vector<ClientInfo> generate_workload(const WorkloadSpec& spec) {
    spec.validate();
    std::vector<std::string> pool = spec.profile_pool;
    if (pool.empty()) pool = {"v1", "v2", "v3", "v4"};
    const std::size_t n = static_cast<std::size_t>(spec.n_clients);
    // floor(fraction*n) premium; the epsilon absorbs binary representation
    // dust in fractions like 0.1 so the rounding stays the documented floor.
    const std::size_t n_premium = static_cast<std::size_t>(
        std::floor(spec.premium_fraction * static_cast<double>(n) + 1e-9));
    std::vector<UserClass> classes(n, UserClass::Regular);
    std::fill_n(classes.begin(), std::min(n_premium, n), UserClass::Premium);
    std::mt19937_64 rng = make_rng(spec.seed, RngStream::Workload);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t j = std::uniform_int_distribution<std::size_t>(0, i)(rng);
        std::swap(classes[i], classes[j]);
    }
    std::vector<ClientInfo> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ClientInfo c;
        c.id = static_cast<int>(i);
        c.klass = classes[i];
        c.profile_id =
            pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        c.arrival_time = static_cast<std::uint64_t>(
            std::llround(static_cast<double>(i) * spec.arrival_interval_s));
        out.push_back(std::move(c));
    }
    return out;
}

ExperimentResult run_experiment(const KnowledgeBase& kb, Strategy strategy,
                                const WorkloadSpec& workload, const ExperimentOptions& opt) {
    std::vector<ClientInfo> clients = generate_workload(workload);
    SchedulerConfig scfg;
    scfg.strategy = strategy;
    scfg.physical_cores = opt.physical_cores;
    scfg.start_knobs = opt.start_knobs;
    scfg.noise_scale = opt.noise_scale;
    scfg.record_trace = opt.record_trace;
    SchedulerCore core(kb, scfg, workload.seed);

    std::uint64_t t = 0;
    std::size_t next = 0;
    while (next < clients.size() || !core.idle()) {
        while (next < clients.size() && clients[next].arrival_time == t)
            core.arrive(clients[next++], t);
        core.control_tick(t);
        if (core.running_count() == 0 && core.queued_count() > 0 && next == clients.size())
            throw InvalidInputError(
                "admission cannot progress: a queued client never fits the machine");
        ++t;
        if (t > 50'000'000) throw BookkeepingError("experiment failed to terminate");
    }

    ExperimentResult res;
    MetricsReport& r = res.report;
    r.strategy = strategy;
    r.arrival_interval_s = workload.arrival_interval_s;
    r.premium_fraction = workload.premium_fraction;
    r.seed = workload.seed;
    r.clients = static_cast<int>(clients.size());
    r.completed = core.finished_count();
    if (r.completed != r.clients)
        throw BookkeepingError("experiment ended with unfinished clients");
    r.total_seconds = t;

    double sum_ticks = 0, sum_low = 0, sum_fps = 0, sum_psnr = 0, sum_power = 0;
    double sum_threads = 0, sum_freq = 0, sum_qp = 0;
    double psnr_reg = 0, psnr_prem = 0;
    int n_reg = 0, n_prem = 0;
    for (const ClientStats& st : core.client_stats()) {
        if (st.ticks == 0) throw BookkeepingError("client finished without encoding");
        ClientSummary cs;
        cs.id = st.info.id;
        cs.klass = st.info.klass;
        cs.profile = st.info.profile_id;
        cs.arrival_s = st.info.arrival_time;
        cs.admit_s = st.admit_time;
        cs.finish_s = st.finish_time;
        cs.intervals = st.ticks;
        double n = static_cast<double>(st.ticks);
        cs.avg_fps = st.sum_fps / n;
        cs.avg_psnr = st.sum_psnr / n;
        cs.avg_power = st.sum_power / n;
        cs.avg_threads = st.sum_threads / n;
        cs.avg_freq = st.sum_freq / n;
        cs.avg_qp = st.sum_qp / n;
        cs.delta_violation_pct = 100.0 * static_cast<double>(st.low_fps_ticks) / n;
        if (cs.klass == UserClass::Regular) {
            psnr_reg += cs.avg_psnr;
            ++n_reg;
        } else {
            psnr_prem += cs.avg_psnr;
            ++n_prem;
        }
        sum_ticks += n;
        sum_low += static_cast<double>(st.low_fps_ticks);
        sum_fps += st.sum_fps;
        sum_psnr += st.sum_psnr;
        sum_power += st.sum_power;
        sum_threads += st.sum_threads;
        sum_freq += st.sum_freq;
        sum_qp += st.sum_qp;
        r.per_client.push_back(std::move(cs));
    }
    double minutes = static_cast<double>(r.total_seconds) / 60.0;
    r.users_per_minute = static_cast<double>(r.completed) / minutes;
    double admissions = 0;
    for (const EventRecord& e : core.events())
        if (e.event == "admit") ++admissions;
    r.admissions_per_minute = admissions / minutes;
    if (n_reg > 0) r.avg_psnr_regular = psnr_reg / n_reg;
    if (n_prem > 0) r.avg_psnr_premium = psnr_prem / n_prem;
    r.delta_violation_pct = 100.0 * sum_low / sum_ticks;
    for (std::size_t i = 0; i < 3; ++i)
        r.tier_time_pct[i] = static_cast<double>(core.tier_ticks()[i]) /
                             static_cast<double>(core.ticks());
    r.avg_threads = sum_threads / sum_ticks;
    r.avg_freq = sum_freq / sum_ticks;
    r.avg_qp = sum_qp / sum_ticks;
    r.avg_power = sum_power / sum_ticks;
    r.avg_fps = sum_fps / sum_ticks;
    r.avg_psnr = sum_psnr / sum_ticks;
    res.events = core.events();
    res.trace = core.trace();
    return res;
}

SweepResult run_sweep(const KnowledgeBase& kb, const SweepSpec& spec,
                      const ExperimentOptions& opt) {
    if (spec.repeats < 1) throw InvalidInputError("repeats must be at least 1");
    if (spec.strategies.empty() || spec.intervals.empty() || spec.fractions.empty())
        throw InvalidInputError("sweep matrix must not be empty");
    ExperimentOptions run_opt = opt;
    run_opt.record_trace = false;
    SweepResult out;
    for (std::size_t ii = 0; ii < spec.intervals.size(); ++ii) {
        for (std::size_t fi = 0; fi < spec.fractions.size(); ++fi) {
            for (Strategy strat : spec.strategies) {
                SweepRow row;
                row.strategy = strat;
                row.arrival_interval_s = spec.intervals[ii];
                row.premium_fraction = spec.fractions[fi];
                row.repeats = spec.repeats;
                double psnr_reg = 0, psnr_prem = 0;
                int reg_n = 0, prem_n = 0;
                for (int rep = 0; rep < spec.repeats; ++rep) {
                    WorkloadSpec w;
                    w.arrival_interval_s = spec.intervals[ii];
                    w.premium_fraction = spec.fractions[fi];
                    w.n_clients = spec.n_clients;
                    w.profile_pool = spec.profile_pool;
                    // Strategy-independent seed: every strategy replays the
                    // same arrival sequences.
                    w.seed = mix_seed(spec.base_seed,
                                      (ii * 1000 + fi) * 100 + static_cast<std::uint64_t>(rep) + 1);
                    ExperimentResult res = run_experiment(kb, strat, w, run_opt);
                    const MetricsReport& m = res.report;
                    row.users_per_minute += m.users_per_minute;
                    row.admissions_per_minute += m.admissions_per_minute;
                    if (m.avg_psnr_regular) {
                        psnr_reg += *m.avg_psnr_regular;
                        ++reg_n;
                    }
                    if (m.avg_psnr_premium) {
                        psnr_prem += *m.avg_psnr_premium;
                        ++prem_n;
                    }
                    row.delta_violation_pct += m.delta_violation_pct;
                    for (std::size_t k = 0; k < 3; ++k) row.tier_time_pct[k] += m.tier_time_pct[k];
                    row.avg_threads += m.avg_threads;
                    row.avg_freq += m.avg_freq;
                    row.avg_qp += m.avg_qp;
                    row.avg_power += m.avg_power;
                    row.avg_seconds += static_cast<double>(m.total_seconds);
                    out.runs.push_back(std::move(res.report));
                }
                double nr = static_cast<double>(spec.repeats);
                row.users_per_minute /= nr;
                row.admissions_per_minute /= nr;
                if (reg_n > 0) row.avg_psnr_regular = psnr_reg / reg_n;
                if (prem_n > 0) row.avg_psnr_premium = psnr_prem / prem_n;
                row.delta_violation_pct /= nr;
                for (std::size_t k = 0; k < 3; ++k) row.tier_time_pct[k] /= nr;
                row.avg_threads /= nr;
                row.avg_freq /= nr;
                row.avg_qp /= nr;
                row.avg_power /= nr;
                row.avg_seconds /= nr;
                out.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

namespace {

std::string opt_cell(const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string();
}

} // namespace

std::string report_csv(const MetricsReport& r) {
    std::string s =
        "strategy,arrival_interval_s,premium_fraction,seed,clients,completed,"
        "users_per_minute,admissions_per_minute,avg_psnr_regular,avg_psnr_premium,"
        "delta_violation_pct,tier_s0_pct,tier_s1_pct,tier_s2_pct,"
        "avg_threads,avg_freq_ghz,avg_qp,avg_power_w,avg_fps,avg_psnr_db,total_seconds\n";
    s += strategy_name(r.strategy);
    s += ',' + fmt_double(r.arrival_interval_s) + ',' + fmt_double(r.premium_fraction);
    s += ',' + std::to_string(r.seed) + ',' + std::to_string(r.clients) + ',' +
         std::to_string(r.completed);
    s += ',' + fmt_double(r.users_per_minute) + ',' + fmt_double(r.admissions_per_minute);
    s += ',' + opt_cell(r.avg_psnr_regular) + ',' + opt_cell(r.avg_psnr_premium);
    s += ',' + fmt_double(r.delta_violation_pct);
    for (double p : r.tier_time_pct) s += ',' + fmt_double(p);
    s += ',' + fmt_double(r.avg_threads) + ',' + fmt_double(r.avg_freq) + ',' +
         fmt_double(r.avg_qp) + ',' + fmt_double(r.avg_power) + ',' + fmt_double(r.avg_fps) +
         ',' + fmt_double(r.avg_psnr);
    s += ',' + std::to_string(r.total_seconds) + '\n';
    return s;
}

std::string clients_csv(const MetricsReport& r) {
    std::string s =
        "client,class,profile,arrival_s,admit_s,finish_s,intervals,"
        "avg_fps,avg_psnr_db,avg_power_w,avg_threads,avg_freq_ghz,avg_qp,delta_violation_pct\n";
    for (const ClientSummary& c : r.per_client) {
        s += std::to_string(c.id);
        s += ',';
        s += user_class_name(c.klass);
        s += ',' + c.profile + ',' + std::to_string(c.arrival_s) + ',' +
             std::to_string(c.admit_s) + ',' + std::to_string(c.finish_s) + ',' +
             std::to_string(c.intervals);
        s += ',' + fmt_double(c.avg_fps) + ',' + fmt_double(c.avg_psnr) + ',' +
             fmt_double(c.avg_power) + ',' + fmt_double(c.avg_threads) + ',' +
             fmt_double(c.avg_freq) + ',' + fmt_double(c.avg_qp) + ',' +
             fmt_double(c.delta_violation_pct);
        s += '\n';
    }
    return s;
}

std::string events_csv(const std::vector<EventRecord>& events) {
    std::string s = "time_s,event,client,tier\n";
    for (const EventRecord& e : events) {
        s += std::to_string(e.time) + ',' + e.event + ',';
        if (e.client >= 0) s += std::to_string(e.client);
        s += ',';
        s += tier_name(e.tier);
        s += '\n';
    }
    return s;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::string s = "time_s,client,tier,policy,threads,freq_ghz,qp,fps,psnr_db,power_w\n";
    for (const TraceRow& t : trace) {
        s += std::to_string(t.time) + ',' + std::to_string(t.client) + ',';
        s += tier_name(t.tier);
        s += ',' + t.policy + ',' + std::to_string(t.threads) + ',' + fmt_double(t.freq) + ',' +
             std::to_string(t.qp) + ',' + fmt_double(t.fps) + ',' + fmt_double(t.psnr) + ',' +
             fmt_double(t.power);
        s += '\n';
    }
    return s;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string s =
        "strategy,arrival_interval_s,premium_fraction,repeats,"
        "users_per_minute,admissions_per_minute,avg_psnr_regular,avg_psnr_premium,"
        "delta_violation_pct,tier_s0_pct,tier_s1_pct,tier_s2_pct,"
        "avg_threads,avg_freq_ghz,avg_qp,avg_power_w,avg_seconds\n";
    for (const SweepRow& r : rows) {
        s += strategy_name(r.strategy);
        s += ',' + fmt_double(r.arrival_interval_s) + ',' + fmt_double(r.premium_fraction) + ',' +
             std::to_string(r.repeats);
        s += ',' + fmt_double(r.users_per_minute) + ',' + fmt_double(r.admissions_per_minute);
        s += ',' + opt_cell(r.avg_psnr_regular) + ',' + opt_cell(r.avg_psnr_premium);
        s += ',' + fmt_double(r.delta_violation_pct);
        for (double p : r.tier_time_pct) s += ',' + fmt_double(p);
        s += ',' + fmt_double(r.avg_threads) + ',' + fmt_double(r.avg_freq) + ',' +
             fmt_double(r.avg_qp) + ',' + fmt_double(r.avg_power) + ',' +
             fmt_double(r.avg_seconds);
        s += '\n';
    }
    return s;
}

namespace {

// Pivot rows into one line per (interval, fraction) with a column per
// strategy, in first-appearance order.
std::string pivot_csv(const std::vector<SweepRow>& rows, const char* value_name,
                      double (*value)(const SweepRow&), bool (*present)(const SweepRow&)) {
    (void)value_name;
    const Strategy order[] = {Strategy::ThreeTier, Strategy::TwoPol, Strategy::OnePol};
    std::string s = "arrival_interval_s,premium_fraction";
    for (Strategy st : order) {
        s += ',';
        s += strategy_name(st);
    }
    s += '\n';
    std::vector<std::pair<double, double>> cells;
    for (const SweepRow& r : rows) {
        std::pair<double, double> key{r.arrival_interval_s, r.premium_fraction};
        if (std::find(cells.begin(), cells.end(), key) == cells.end()) cells.push_back(key);
    }
    for (const auto& [interval, fraction] : cells) {
        s += fmt_double(interval) + ',' + fmt_double(fraction);
        for (Strategy st : order) {
            s += ',';
            for (const SweepRow& r : rows) {
                if (r.strategy == st && r.arrival_interval_s == interval &&
                    r.premium_fraction == fraction) {
                    if (present(r)) s += fmt_double(value(r));
                    break;
                }
            }
        }
        s += '\n';
    }
    return s;
}

} // namespace

std::string plot_users_csv(const std::vector<SweepRow>& rows) {
    return pivot_csv(
        rows, "users_per_minute", [](const SweepRow& r) { return r.users_per_minute; },
        [](const SweepRow&) { return true; });
}

std::string plot_premium_psnr_csv(const std::vector<SweepRow>& rows) {
    return pivot_csv(
        rows, "avg_psnr_premium",
        [](const SweepRow& r) { return r.avg_psnr_premium.value_or(0.0); },
        [](const SweepRow& r) { return r.avg_psnr_premium.has_value(); });
}

std::string plot_s2_time_csv(const std::vector<SweepRow>& rows) {
    std::string s = "arrival_interval_s,premium_fraction,s2_time_pct\n";
    for (const SweepRow& r : rows) {
        if (r.strategy != Strategy::ThreeTier) continue;
        s += fmt_double(r.arrival_interval_s) + ',' + fmt_double(r.premium_fraction) + ',' +
             fmt_double(r.tier_time_pct[2]) + '\n';
    }
    return s;
}

} // namespace kaas
