#include "kaas/mdp.hpp"

#include <algorithm>
#include <cmath>

#include "kaas/errors.hpp"

namespace kaas {

const char* metric_name(MetricId id) {
    switch (id) {
        case MetricId::ThroughputFps: return "fps";
        case MetricId::QualityPsnrDb: return "psnr";
        case MetricId::PowerWatts: return "power";
    }
    return "?";
}

KnobLadder KnobLadder::defaults() {
    KnobLadder l;
    for (int t = 1; t <= 12; ++t) l.threads.push_back(t);
    // Spelled out so every rung is the exact decimal-nearest double; the top
    // rung must be exactly 2.0 for the 125 W ceiling to come out exact.
    l.freq = {1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0};
    for (int q = 22; q <= 40; ++q) l.qp.push_back(q);
    return l;
}

namespace {

template <typename T>
bool strictly_ascending(const std::vector<T>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::greater_equal<T>()) == v.end();
}

} // namespace

void KnobLadder::validate() const {
    if (threads.empty() || freq.empty() || qp.empty())
        throw InvalidInputError("knob ladder has an empty rung list");
    if (!strictly_ascending(threads) || !strictly_ascending(freq) || !strictly_ascending(qp))
        throw InvalidInputError("knob ladder rungs must be strictly ascending");
    if (threads.front() < 1)
        throw InvalidInputError("thread counts must be >= 1");
    if (freq.front() <= 0.0)
        throw InvalidInputError("frequencies must be positive");
    if (qp.front() < 0 || qp.back() > 51)
        throw InvalidInputError("QP rungs must lie within 0..51");
}

bool valid_for(const KnobSetting& k, const KnobLadder& ladder) {
    auto in = [](int i, std::size_t n) { return i >= 0 && static_cast<std::size_t>(i) < n; };
    return in(k.threads_idx, ladder.threads.size()) && in(k.freq_idx, ladder.freq.size()) &&
           in(k.qp_idx, ladder.qp.size());
}

std::size_t SubStateSpec::bin_of(double x) const {
    if (!std::isfinite(x))
        throw InvalidInputError(std::string("non-finite ") + metric_name(metric_id) + " reading");
    // Count of edges <= x: values below the first edge land in bin 0,
    // values at or above the last edge in the open top bin.
    return static_cast<std::size_t>(
        std::upper_bound(bin_edges.begin(), bin_edges.end(), x) - bin_edges.begin());
}

void SubStateSpec::validate() const {
    if (bin_edges.empty())
        throw InvalidInputError("sub-state spec needs at least one bin edge");
    for (double e : bin_edges)
        if (!std::isfinite(e)) throw InvalidInputError("non-finite bin edge");
    if (!strictly_ascending(bin_edges))
        throw InvalidInputError("bin edges must be strictly ascending");
}

StateSpace StateSpace::defaults() {
    StateSpace sp;
    sp.fps = {MetricId::ThroughputFps, {24.0, 30.0, 40.0}};
    sp.psnr = {MetricId::QualityPsnrDb, {}};
    for (int db = 34; db <= 46; ++db) sp.psnr.bin_edges.push_back(static_cast<double>(db));
    sp.power = {MetricId::PowerWatts, {}};
    for (int w = 20; w <= 120; w += 5) sp.power.bin_edges.push_back(static_cast<double>(w));
    return sp;
}

void StateSpace::validate() const {
    fps.validate();
    psnr.validate();
    power.validate();
    if (fps.metric_id != MetricId::ThroughputFps || psnr.metric_id != MetricId::QualityPsnrDb ||
        power.metric_id != MetricId::PowerWatts)
        throw InvalidInputError("state space sub-specs are mislabeled");
}

std::size_t state_index(const State& s, const StateSpace& space) {
    auto check = [](int bin, std::size_t n, const char* what) {
        if (bin < 0 || static_cast<std::size_t>(bin) >= n)
            throw InvalidInputError(std::string(what) + " bin out of range");
    };
    check(s.fps_bin, space.fps_bins(), "fps");
    check(s.psnr_bin, space.psnr_bins(), "psnr");
    check(s.power_bin, space.power_bins(), "power");
    return (static_cast<std::size_t>(s.fps_bin) * space.psnr_bins() +
            static_cast<std::size_t>(s.psnr_bin)) *
               space.power_bins() +
           static_cast<std::size_t>(s.power_bin);
}

State state_from_index(std::size_t idx, const StateSpace& space) {
    if (idx >= space.state_count())
        throw InvalidInputError("state index out of range");
    State s;
    s.power_bin = static_cast<int>(idx % space.power_bins());
    idx /= space.power_bins();
    s.psnr_bin = static_cast<int>(idx % space.psnr_bins());
    s.fps_bin = static_cast<int>(idx / space.psnr_bins());
    return s;
}

std::size_t action_index(const Action& a) {
    auto check = [](int d) {
        if (d < -1 || d > 1) throw InvalidInputError("action delta outside {-1,0,+1}");
        return static_cast<std::size_t>(d + 1);
    };
    return (check(a.d_threads) * 3 + check(a.d_freq)) * 3 + check(a.d_qp);
}

Action action_from_index(std::size_t idx) {
    if (idx >= kActionCount) throw InvalidInputError("action index out of range");
    Action a;
    a.d_qp = static_cast<int>(idx % 3) - 1;
    a.d_freq = static_cast<int>((idx / 3) % 3) - 1;
    a.d_threads = static_cast<int>(idx / 9) - 1;
    return a;
}

KnobSetting apply_action(const KnobSetting& knobs, const Action& a, const KnobLadder& ladder) {
    if (!valid_for(knobs, ladder))
        throw InvalidInputError("knob setting does not address the ladder");
    action_index(a);  // validates deltas
    auto clamp = [](int idx, int delta, std::size_t n) {
        return std::clamp(idx + delta, 0, static_cast<int>(n) - 1);
    };
    KnobSetting out;
    out.threads_idx = clamp(knobs.threads_idx, a.d_threads, ladder.threads.size());
    out.freq_idx = clamp(knobs.freq_idx, a.d_freq, ladder.freq.size());
    out.qp_idx = clamp(knobs.qp_idx, a.d_qp, ladder.qp.size());
    return out;
}

State discretize(double fps, double psnr_db, double power_w, const StateSpace& space) {
    State s;
    s.fps_bin = static_cast<int>(space.fps.bin_of(fps));
    s.psnr_bin = static_cast<int>(space.psnr.bin_of(psnr_db));
    s.power_bin = static_cast<int>(space.power.bin_of(power_w));
    return s;
}

std::vector<State> enumerate_states(const StateSpace& space) {
    std::vector<State> out;
    out.reserve(space.state_count());
    for (std::size_t f = 0; f < space.fps_bins(); ++f)
        for (std::size_t p = 0; p < space.psnr_bins(); ++p)
            for (std::size_t w = 0; w < space.power_bins(); ++w)
                out.push_back({static_cast<int>(f), static_cast<int>(p), static_cast<int>(w)});
    return out;
}

std::vector<Action> enumerate_actions() {
    std::vector<Action> out;
    out.reserve(kActionCount);
    for (std::size_t i = 0; i < kActionCount; ++i) out.push_back(action_from_index(i));
    return out;
}

} // namespace kaas
