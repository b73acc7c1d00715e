#include "kaas/transitions.hpp"

#include <algorithm>

#include <json.hpp>

#include "kaas/errors.hpp"
#include "kaas/ioutil.hpp"
#include "kaas/rng.hpp"

namespace kaas {

std::string table_signature(const StateSpace& space, const KnobLadder& ladder,
                            const EnvModelParams& env) {
    nlohmann::ordered_json j;
    j["fps_edges"] = space.fps.bin_edges;
    j["psnr_edges"] = space.psnr.bin_edges;
    j["power_edges"] = space.power.bin_edges;
    j["threads"] = ladder.threads;
    j["freq"] = ladder.freq;
    j["qp"] = ladder.qp;
    // physical_cores is a serving-machine property, not a dynamics one:
    // training runs solo, so tables stay valid across machine sizes.
    j["power_model"] = {env.power.alpha, env.power.beta, env.power.gamma};
    j["fps_model"] = {env.fps_gain, env.thread_exp, env.qp_speedup, env.qp_ref};
    j["psnr_model"] = {env.psnr_base, env.psnr_slope};
    return j.dump();
}

TransitionTable::TransitionTable(const StateSpace& space, std::string signature,
                                 std::uint64_t build_seed, std::string build_date)
    : space_(space),
      signature_(std::move(signature)),
      build_seed_(build_seed),
      build_date_(std::move(build_date)),
      rows_(space.state_count() * kActionCount),
      totals_(space.state_count() * kActionCount, 0) {}

std::size_t TransitionTable::cell(const State& s, const Action& a) const {
    return state_index(s, space_) * kActionCount + action_index(a);
}

void TransitionTable::record(const State& s, const Action& a, const State& next) {
    const std::uint32_t nidx = static_cast<std::uint32_t>(state_index(next, space_));
    std::vector<RowEntry>& row = rows_[cell(s, a)];
    auto it = std::lower_bound(row.begin(), row.end(), nidx,
                               [](const RowEntry& e, std::uint32_t v) { return e.first < v; });
    if (it != row.end() && it->first == nidx)
        ++it->second;
    else
        row.insert(it, {nidx, 1});
    ++totals_[cell(s, a)];
}

std::uint64_t TransitionTable::total(const State& s, const Action& a) const {
    return totals_[cell(s, a)];
}

const std::vector<TransitionTable::RowEntry>& TransitionTable::row(const State& s,
                                                                   const Action& a) const {
    return rows_[cell(s, a)];
}

State TransitionTable::sample_next(const State& s, const Action& a, std::mt19937_64& rng) const {
    const std::vector<RowEntry>& row = rows_[cell(s, a)];
    if (row.empty()) throw UnexploredPairError("no recorded transitions for this state-action");
    // Point-mass rows stay rng-silent so deterministic tables replay without
    // perturbing the caller's draw sequence.
    if (row.size() == 1) return state_from_index(row.front().first, space_);
    const std::uint64_t total = totals_[cell(s, a)];
    std::uint64_t pick = std::uniform_int_distribution<std::uint64_t>(0, total - 1)(rng);
    for (const RowEntry& e : row) {
        if (pick < e.second) return state_from_index(e.first, space_);
        pick -= e.second;
    }
    return state_from_index(row.back().first, space_);  // unreachable
}

void TransitionTable::merge(const TransitionTable& other) {
    if (other.signature_ != signature_)
        throw SignatureMismatchError("cannot merge transition tables of different builds");
    for (std::size_t c = 0; c < rows_.size(); ++c) {
        for (const RowEntry& e : other.rows_[c]) {
            std::vector<RowEntry>& row = rows_[c];
            auto it = std::lower_bound(
                row.begin(), row.end(), e.first,
                [](const RowEntry& x, std::uint32_t v) { return x.first < v; });
            if (it != row.end() && it->first == e.first)
                it->second += e.second;
            else
                row.insert(it, e);
        }
        totals_[c] += other.totals_[c];
    }
}

CoverageReport TransitionTable::coverage(int min_visits) const {
    CoverageReport r;
    r.min_visits = min_visits;
    const std::size_t n_states = space_.state_count();
    for (std::size_t si = 0; si < n_states; ++si) {
        bool visited = false;
        for (std::size_t ai = 0; ai < kActionCount; ++ai) {
            const std::uint64_t t = totals_[si * kActionCount + ai];
            if (t == 0) continue;
            visited = true;
            ++r.explored_pairs;
            r.recorded_transitions += t;
            if (t >= static_cast<std::uint64_t>(min_visits)) ++r.satisfied_pairs;
        }
        if (visited) ++r.visited_states;
    }
    r.complete = r.visited_states > 0 &&
                 r.satisfied_pairs == r.visited_states * kActionCount;
    return r;
}

std::vector<std::size_t> TransitionTable::explored_actions(const State& s) const {
    std::vector<std::size_t> out;
    const std::size_t base = state_index(s, space_) * kActionCount;
    for (std::size_t ai = 0; ai < kActionCount; ++ai)
        if (totals_[base + ai] > 0) out.push_back(ai);
    return out;
}

std::vector<State> TransitionTable::explored_states() const {
    std::vector<State> out;
    const std::size_t n_states = space_.state_count();
    for (std::size_t si = 0; si < n_states; ++si) {
        for (std::size_t ai = 0; ai < kActionCount; ++ai) {
            if (totals_[si * kActionCount + ai] > 0) {
                out.push_back(state_from_index(si, space_));
                break;
            }
        }
    }
    return out;
}

void TransitionTable::save(const std::string& path) const {
    nlohmann::ordered_json j;
    j["format"] = "kaas-transitions";
    j["version"] = 1;
    j["signature"] = nlohmann::ordered_json::parse(signature_);
    j["build_seed"] = build_seed_;
    j["build_date"] = build_date_;
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < rows_.size(); ++c) {
        if (rows_[c].empty()) continue;
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        row.push_back(c / kActionCount);
        row.push_back(c % kActionCount);
        for (const RowEntry& e : rows_[c]) {
            row.push_back(e.first);
            row.push_back(e.second);
        }
        cells.push_back(std::move(row));
    }
    j["cells"] = std::move(cells);
    write_text_file(path, j.dump());
}

TransitionTable TransitionTable::load(const std::string& path,
                                      const std::string& expected_signature) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError("unreadable transition table " + path + ": " + e.what());
    }
    if (j.value("format", "") != "kaas-transitions" || j.value("version", 0) != 1)
        throw InvalidInputError(path + " is not a version-1 transition table");
    const std::string sig = j.at("signature").dump();
    if (nlohmann::json::parse(expected_signature).dump() != sig)
        throw SignatureMismatchError(
            "transition table " + path +
            " was built under a different bin/ladder/environment configuration");

    // The signature *is* the live configuration, so reconstruct the space
    // from it: the caller's expected signature matched byte-for-byte.
    StateSpace space;
    space.fps = {MetricId::ThroughputFps, j["signature"]["fps_edges"].get<std::vector<double>>()};
    space.psnr = {MetricId::QualityPsnrDb,
                  j["signature"]["psnr_edges"].get<std::vector<double>>()};
    space.power = {MetricId::PowerWatts,
                   j["signature"]["power_edges"].get<std::vector<double>>()};
    space.validate();

    TransitionTable t(space, sig, j.value("build_seed", 0ull), j.value("build_date", ""));
    for (const auto& row : j.at("cells")) {
        if (row.size() < 4 || row.size() % 2 != 0)
            throw InvalidInputError(path + ": malformed cell row");
        const std::size_t si = row[0].get<std::size_t>();
        const std::size_t ai = row[1].get<std::size_t>();
        if (si >= space.state_count() || ai >= kActionCount)
            throw InvalidInputError(path + ": cell index out of range");
        const std::size_t c = si * kActionCount + ai;
        for (std::size_t k = 2; k + 1 < row.size(); k += 2) {
            const std::uint32_t nidx = row[k].get<std::uint32_t>();
            const std::uint64_t count = row[k + 1].get<std::uint64_t>();
            if (nidx >= space.state_count() || count == 0)
                throw InvalidInputError(path + ": malformed successor entry");
            t.rows_[c].push_back({nidx, count});
            t.totals_[c] += count;
        }
        if (!std::is_sorted(t.rows_[c].begin(), t.rows_[c].end(),
                            [](const RowEntry& a, const RowEntry& b) { return a.first < b.first; }))
            throw InvalidInputError(path + ": successor entries out of order");
    }
    return t;
}

void TransitionTable::export_csv(const std::string& path) const {
    std::string csv = "state_idx,action_idx,next_state_idx,count\n";
    for (std::size_t c = 0; c < rows_.size(); ++c)
        for (const RowEntry& e : rows_[c])
            csv += std::to_string(c / kActionCount) + ',' + std::to_string(c % kActionCount) +
                   ',' + std::to_string(e.first) + ',' + std::to_string(e.second) + '\n';
    write_text_file(path, csv);
}

ExploreResult explore(TrainingEnv& env, const StateSpace& space, int min_visits,
                      std::uint64_t budget_decisions, std::uint64_t seed) {
    if (min_visits < 1) throw InvalidInputError("min_visits must be >= 1");
    space.validate();
    TransitionTable table(space, table_signature(space, env.ladder(), env.model()), seed,
                          build_date_utc());

    std::mt19937_64 explore_rng = make_rng(seed, RngStream::Exploration);
    const std::size_t n_states = space.state_count();
    // Picks by table totals plus in-flight attempts so the round-robin over
    // actions stays fair before transitions land.
    std::vector<std::uint32_t> attempts(n_states * kActionCount, 0);

    // Teleports keep coverage from stalling in the attractor the delta
    // dynamics would otherwise orbit; the jump itself is not a transition.
    constexpr std::uint64_t kTeleportEvery = 96;
    constexpr std::uint64_t kCheckEvery = 8192;

    bool have_prev = false;
    State prev{};
    std::size_t prev_action = 0;
    bool skip_record = false;

    for (std::uint64_t step = 0; step < budget_decisions; ++step) {
        const Observation obs = env.step();
        const State s = discretize(obs.fps, obs.psnr, obs.power, space);
        if (have_prev && !skip_record) table.record(prev, action_from_index(prev_action), s);
        skip_record = false;

        const std::size_t base = state_index(s, space) * kActionCount;
        std::size_t pick = 0;
        std::uint64_t best = UINT64_MAX;
        for (std::size_t ai = 0; ai < kActionCount; ++ai) {
            const std::uint64_t tried =
                table.total(s, action_from_index(ai)) + attempts[base + ai];
            if (tried < best) {
                best = tried;
                pick = ai;
            }
        }
        ++attempts[base + pick];
        env.apply(action_from_index(pick));
        prev = s;
        prev_action = pick;
        have_prev = true;

        if ((step + 1) % kTeleportEvery == 0) {
            KnobSetting k;
            k.threads_idx = static_cast<int>(explore_rng() % env.ladder().threads.size());
            k.freq_idx = static_cast<int>(explore_rng() % env.ladder().freq.size());
            k.qp_idx = static_cast<int>(explore_rng() % env.ladder().qp.size());
            env.teleport(k);
            // The next observed state did not follow from (prev, action).
            skip_record = true;
        }
        if ((step + 1) % kCheckEvery == 0 && table.coverage(min_visits).complete) break;
    }
    return {std::move(table), table.coverage(min_visits)};
}

} // namespace kaas
