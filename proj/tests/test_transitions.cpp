#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "kaas/env_sim.hpp"
#include "kaas/errors.hpp"
#include "kaas/ioutil.hpp"
#include "kaas/mdp.hpp"
#include "kaas/rng.hpp"
#include "kaas/transitions.hpp"

namespace {

using namespace kaas;

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// 2 bins per metric: 8 addressable states, tiny enough for exhaustive loops.
StateSpace tiny_space() {
    StateSpace sp;
    sp.fps = SubStateSpec{MetricId::ThroughputFps, {1e9}};
    sp.psnr = SubStateSpec{MetricId::QualityPsnrDb, {1e9}};
    sp.power = SubStateSpec{MetricId::PowerWatts, {1e9}};
    return sp;
}

TransitionTable tiny_table() {
    StateSpace sp = tiny_space();
    return TransitionTable(sp, table_signature(sp, KnobLadder{}, EnvModelParams{}), 7,
                           "2026-01-01");
}

VideoProfile flat_profile(int frames = 48) {
    VideoProfile p;
    p.id = "flat";
    p.length_frames = frames;
    p.scenes = {Scene{0, 1.0, 0.0}};
    p.noise_sigma_fps = 0.0;
    p.noise_sigma_psnr = 0.0;
    return p;
}

bool same_table(const TransitionTable& a, const TransitionTable& b) {
    if (a.space().state_count() != b.space().state_count()) return false;
    for (std::size_t si = 0; si < a.space().state_count(); ++si) {
        const State s = state_from_index(si, a.space());
        for (std::size_t ai = 0; ai < kActionCount; ++ai) {
            const Action act = action_from_index(ai);
            if (a.total(s, act) != b.total(s, act)) return false;
            if (a.row(s, act) != b.row(s, act)) return false;
        }
    }
    return true;
}

TransitionTable random_table(std::uint64_t seed, int records = 300) {
    TransitionTable t = tiny_table();
    std::mt19937_64 rng(seed);
    for (int i = 0; i < records; ++i) {
        const State s = state_from_index(rng() % 8, t.space());
        const Action a = action_from_index(rng() % kActionCount);
        const State n = state_from_index(rng() % 8, t.space());
        t.record(s, a, n);
    }
    return t;
}

} // namespace

TEST_CASE("transition table records counts and keeps successor rows sorted") {
    TransitionTable t = tiny_table();
    const State s{0, 0, 0};
    const Action a = action_from_index(13);

    CHECK(t.total(s, a) == 0);
    CHECK(t.row(s, a).empty());

    t.record(s, a, State{0, 0, 1});
    CHECK(t.total(s, a) == 1);
    t.record(s, a, State{0, 0, 1});
    CHECK(t.total(s, a) == 2);
    CHECK(t.row(s, a).size() == 1);

    // Insert successors out of index order; the row must come back sorted.
    t.record(s, a, State{1, 0, 0});  // index 4
    t.record(s, a, State{0, 0, 0});  // index 0
    const std::vector<TransitionTable::RowEntry> want = {{0, 1}, {1, 2}, {4, 1}};
    CHECK(t.row(s, a) == want);
    CHECK(t.total(s, a) == 4);

    // Counts sum to the total for every touched cell.
    std::uint64_t sum = 0;
    for (const auto& e : t.row(s, a)) sum += e.second;
    CHECK(sum == t.total(s, a));

    // Other cells stay untouched.
    CHECK(t.total(s, action_from_index(0)) == 0);
    CHECK(t.total(State{0, 1, 0}, a) == 0);

    CHECK(t.explored_actions(s) == std::vector<std::size_t>{13});
    CHECK(t.explored_states().size() == 1);
    CHECK(state_index(t.explored_states()[0], t.space()) == 0);
}

TEST_CASE("sampling follows the empirical distribution") {
    TransitionTable t = tiny_table();
    const State s{0, 0, 0};
    const Action a = action_from_index(5);
    const State x{0, 0, 0};
    const State y{0, 0, 1};
    for (int i = 0; i < 75; ++i) t.record(s, a, x);
    for (int i = 0; i < 25; ++i) t.record(s, a, y);

    std::mt19937_64 rng = make_rng(1, RngStream::TransitionSample);
    int hits = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i)
        if (state_index(t.sample_next(s, a, rng), t.space()) == 0) ++hits;
    const double freq = static_cast<double>(hits) / draws;
    CHECK(freq == doctest::Approx(0.75).epsilon(0.027));  // +-0.02 absolute
    CHECK(std::fabs(freq - 0.75) < 0.02);

    CHECK_THROWS_AS(t.sample_next(s, action_from_index(0), rng), UnexploredPairError);
}

TEST_CASE("single-successor rows sample without consuming a draw") {
    TransitionTable t = tiny_table();
    const State s{0, 0, 0};
    const Action a = action_from_index(13);
    const State n{1, 1, 1};
    for (int i = 0; i < 3; ++i) t.record(s, a, n);

    std::mt19937_64 used(99);
    std::mt19937_64 untouched(99);
    for (int i = 0; i < 10; ++i)
        CHECK(state_index(t.sample_next(s, a, used), t.space()) == state_index(n, t.space()));
    CHECK(used == untouched);  // engine state identical: zero draws consumed
    CHECK(used() == untouched());

    // A two-successor row does consume the stream.
    t.record(s, a, State{0, 0, 1});
    (void)t.sample_next(s, a, used);
    CHECK_FALSE(used == untouched);
}

TEST_CASE("merging adds counts cell-wise and is order-insensitive") {
    const TransitionTable t1 = random_table(11);
    const TransitionTable t2 = random_table(22);
    const TransitionTable t3 = random_table(33);

    TransitionTable ab = t1;
    ab.merge(t2);
    TransitionTable ba = t2;
    ba.merge(t1);
    CHECK(same_table(ab, ba));

    // Cell-wise totals are exact sums.
    for (std::size_t si = 0; si < 8; ++si) {
        const State s = state_from_index(si, t1.space());
        for (std::size_t ai = 0; ai < kActionCount; ++ai) {
            const Action a = action_from_index(ai);
            CHECK(ab.total(s, a) == t1.total(s, a) + t2.total(s, a));
        }
    }

    TransitionTable left = ab;  // (t1+t2)+t3
    left.merge(t3);
    TransitionTable inner = t2;  // t1+(t2+t3)
    inner.merge(t3);
    TransitionTable right = t1;
    right.merge(inner);
    CHECK(same_table(left, right));

    // Merging an empty table changes nothing.
    TransitionTable same = t1;
    same.merge(tiny_table());
    CHECK(same_table(same, t1));

    // Tables of different builds refuse to merge.
    StateSpace def = StateSpace::defaults();
    TransitionTable other(def, table_signature(def, KnobLadder{}, EnvModelParams{}), 1, "d");
    TransitionTable t = tiny_table();
    CHECK_THROWS_AS(t.merge(other), SignatureMismatchError);
}

TEST_CASE("coverage reports visited states and explored and satisfied pairs") {
    TransitionTable t = tiny_table();
    CoverageReport c = t.coverage(1);
    CHECK(c.visited_states == 0);
    CHECK(c.explored_pairs == 0);
    CHECK(c.satisfied_pairs == 0);
    CHECK(c.recorded_transitions == 0);
    CHECK_FALSE(c.complete);
    CHECK(c.satisfied_fraction() == 0.0);

    const State s0{0, 0, 0};
    const State s1{0, 0, 1};
    for (int i = 0; i < 3; ++i) t.record(s0, action_from_index(0), s1);
    t.record(s0, action_from_index(1), s1);
    c = t.coverage(2);
    CHECK(c.visited_states == 1);
    CHECK(c.explored_pairs == 2);
    CHECK(c.satisfied_pairs == 1);
    CHECK(c.recorded_transitions == 4);
    CHECK(c.min_visits == 2);
    CHECK_FALSE(c.complete);
    CHECK(c.satisfied_fraction() == doctest::Approx(0.5));

    // Satisfy every action of the one visited state: coverage completes.
    for (std::size_t ai = 0; ai < kActionCount; ++ai)
        for (int i = 0; i < 2; ++i) t.record(s0, action_from_index(ai), s0);
    c = t.coverage(2);
    CHECK(c.explored_pairs == 27);
    CHECK(c.satisfied_pairs == 27);
    CHECK(c.complete);
    CHECK_FALSE(t.coverage(4).complete);  // raise the bar, lose completeness

    // A second visited state with partial action coverage breaks completeness.
    t.record(s1, action_from_index(13), s1);
    c = t.coverage(2);
    CHECK(c.visited_states == 2);
    CHECK_FALSE(c.complete);
}

TEST_CASE("tables round-trip through save and load byte for byte") {
    TransitionTable t = tiny_table();
    t.record(State{0, 0, 0}, action_from_index(13), State{0, 0, 1});
    t.record(State{0, 0, 0}, action_from_index(13), State{0, 0, 0});
    t.record(State{1, 1, 1}, action_from_index(0), State{0, 1, 0});
    t.record(State{1, 1, 1}, action_from_index(0), State{0, 1, 0});

    const std::string p1 = tmp_path("ptable_rt1.json");
    const std::string p2 = tmp_path("ptable_rt2.json");
    t.save(p1);
    TransitionTable back = TransitionTable::load(p1, t.signature());
    back.save(p2);
    CHECK(read_text_file(p1) == read_text_file(p2));

    CHECK(same_table(t, back));
    CHECK(back.space().state_count() == 8);
    CHECK(back.signature() == t.signature());
    CHECK(back.build_seed() == 7);
    CHECK(back.build_date() == "2026-01-01");
}

TEST_CASE("loading validates signature and payload shape") {
    TransitionTable t = tiny_table();
    t.record(State{0, 0, 0}, action_from_index(2), State{0, 0, 1});
    const std::string path = tmp_path("ptable_val.json");
    t.save(path);

    // A table built under different bins must be rejected up front.
    const std::string other_sig =
        table_signature(StateSpace::defaults(), KnobLadder{}, EnvModelParams{});
    CHECK_THROWS_AS(TransitionTable::load(path, other_sig), SignatureMismatchError);

    CHECK_THROWS_AS(TransitionTable::load(tmp_path("no_such_table.json"), t.signature()),
                    InvalidInputError);

    const std::string bad = tmp_path("ptable_bad.json");
    write_text_file(bad, "not json at all");
    CHECK_THROWS_AS(TransitionTable::load(bad, t.signature()), InvalidInputError);
    write_text_file(bad, "{\"format\":\"something-else\",\"version\":1}");
    CHECK_THROWS_AS(TransitionTable::load(bad, t.signature()), InvalidInputError);

    // Hand-built payloads: every malformed cell row must be caught.
    nlohmann::ordered_json base;
    base["format"] = "kaas-transitions";
    base["version"] = 1;
    base["signature"] = nlohmann::ordered_json::parse(t.signature());
    base["build_seed"] = 7;
    base["build_date"] = "2026-01-01";

    auto with_cells = [&](nlohmann::ordered_json cells) {
        nlohmann::ordered_json j = base;
        j["cells"] = std::move(cells);
        write_text_file(bad, j.dump());
    };

    with_cells(nlohmann::ordered_json::array({{0, 0, 5, 1, 2, 1}}));  // successors out of order
    CHECK_THROWS_AS(TransitionTable::load(bad, t.signature()), InvalidInputError);
    with_cells(nlohmann::ordered_json::array({{0, 0, 1, 0}}));  // zero count
    CHECK_THROWS_AS(TransitionTable::load(bad, t.signature()), InvalidInputError);
    with_cells(nlohmann::ordered_json::array({{0, 0, 9, 1}}));  // next index out of range
    CHECK_THROWS_AS(TransitionTable::load(bad, t.signature()), InvalidInputError);
    with_cells(nlohmann::ordered_json::array({{0, 27, 1, 1}}));  // action out of range
    CHECK_THROWS_AS(TransitionTable::load(bad, t.signature()), InvalidInputError);
    with_cells(nlohmann::ordered_json::array({{0, 0, 1}}));  // odd row
    CHECK_THROWS_AS(TransitionTable::load(bad, t.signature()), InvalidInputError);

    with_cells(nlohmann::ordered_json::array({{0, 0, 2, 1, 5, 1}}));  // sorted: fine
    CHECK_NOTHROW(TransitionTable::load(bad, t.signature()));
}

TEST_CASE("csv export lists one line per nonzero cell") {
    TransitionTable t = tiny_table();
    t.record(State{0, 0, 0}, action_from_index(13), State{0, 0, 0});
    t.record(State{0, 0, 0}, action_from_index(13), State{0, 0, 0});
    t.record(State{0, 0, 1}, action_from_index(4), State{1, 0, 0});
    const std::string path = tmp_path("ptable.csv");
    t.export_csv(path);

    const std::string csv = read_text_file(path);
    CHECK(csv.rfind("state_idx,action_idx,next_state_idx,count\n", 0) == 0);
    CHECK(csv.find("0,13,0,2\n") != std::string::npos);
    CHECK(csv.find("1,4,4,1\n") != std::string::npos);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 3);  // header + two entries
}

TEST_CASE("the signature tracks dynamics configuration but not machine size") {
    const StateSpace sp = StateSpace::defaults();
    const KnobLadder ladder;
    EnvModelParams env;
    const std::string sig = table_signature(sp, ladder, env);
    CHECK(sig == table_signature(sp, ladder, env));

    StateSpace sp2 = sp;
    sp2.fps.bin_edges = {24.0, 30.0, 48.0};
    CHECK(sig != table_signature(sp2, ladder, env));

    KnobLadder l2 = ladder;
    l2.threads.pop_back();
    CHECK(sig != table_signature(sp, l2, env));

    EnvModelParams e2 = env;
    e2.power.alpha = 2.5;
    CHECK(sig != table_signature(sp, ladder, e2));
    e2 = env;
    e2.psnr_slope = 0.5;
    CHECK(sig != table_signature(sp, ladder, e2));

    // Core count is a property of the serving machine, not the dynamics:
    // tables recorded solo stay valid whatever machine later consumes them.
    e2 = env;
    e2.physical_cores = 10000;
    CHECK(sig == table_signature(sp, ladder, e2));
}

TEST_CASE("exploration fills a degenerate space to the visit target") {
    const StateSpace sp = tiny_space();
    const KnobLadder ladder;
    const EnvModelParams model;
    const KnobSetting start{3, 2, 8};

    TrainingEnv env({flat_profile()}, ladder, model, start, 5);
    ExploreResult res = explore(env, sp, 4, 50000, 9);
    CHECK(res.coverage.complete);
    CHECK(res.coverage.visited_states == 1);
    CHECK(res.coverage.explored_pairs == 27);
    CHECK(res.coverage.satisfied_pairs == 27);
    CHECK(res.coverage.min_visits == 4);
    CHECK(env.interactions() <= 50000);
    CHECK(env.interactions() >= 27 * 4);
    const State s0{0, 0, 0};
    for (std::size_t ai = 0; ai < kActionCount; ++ai)
        CHECK(res.table.total(s0, action_from_index(ai)) >= 4);

    // Same seeds, same table: exploration is a pure function of its inputs.
    TrainingEnv env2({flat_profile()}, ladder, model, start, 5);
    ExploreResult res2 = explore(env2, sp, 4, 50000, 9);
    CHECK(same_table(res.table, res2.table));
    CHECK(env2.interactions() == env.interactions());

    CHECK_THROWS_AS(explore(env2, sp, 0, 10, 1), InvalidInputError);
}

TEST_CASE("exploration respects the decision budget and reports partial coverage") {
    const StateSpace sp = StateSpace::defaults();
    TrainingEnv env(training_profiles(), KnobLadder{}, EnvModelParams{}, KnobSetting{3, 2, 8}, 5);
    ExploreResult res = explore(env, sp, 3, 400, 9);
    // No early exit inside the first check window: the budget is consumed
    // exactly, minus nothing.
    CHECK(env.interactions() == 400);
    CHECK_FALSE(res.coverage.complete);
    // 400 steps record 399 transitions except the 4 post-teleport gaps.
    CHECK(res.coverage.recorded_transitions == 395);
    CHECK(res.coverage.visited_states >= 1);
    CHECK(res.coverage.explored_pairs >= 27);
}

TEST_CASE("without noise the hold action concentrates on its own state") {
    const StateSpace sp = StateSpace::defaults();
    TrainingEnv env({flat_profile(480)}, KnobLadder{}, EnvModelParams{}, KnobSetting{3, 2, 8}, 5);
    ExploreResult res = explore(env, sp, 1, 3000, 9);

    const std::vector<State> seen = res.table.explored_states();
    CHECK(seen.size() >= 5);
    const Action hold = action_from_index(13);
    int checked = 0;
    for (const State& s : seen) {
        if (res.table.total(s, hold) == 0) continue;
        const auto& row = res.table.row(s, hold);
        CHECK(row.size() == 1);
        CHECK(row.front().first == state_index(s, sp));
        ++checked;
    }
    CHECK(checked >= 1);
}
