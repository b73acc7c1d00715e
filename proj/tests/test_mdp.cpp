#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "kaas/errors.hpp"
#include "kaas/mdp.hpp"

using namespace kaas;

TEST_CASE("default ladders carry the documented rungs") {
    KnobLadder l = KnobLadder::defaults();
    l.validate();
    REQUIRE(l.threads.size() == 12);
    CHECK(l.threads.front() == 1);
    CHECK(l.threads.back() == 12);
    REQUIRE(l.freq.size() == 9);
    CHECK(l.freq.front() == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(l.freq.back() == 2.0);  // exact: the 125 W ceiling depends on it
    REQUIRE(l.qp.size() == 19);
    CHECK(l.qp.front() == 22);
    CHECK(l.qp.back() == 40);
}

TEST_CASE("ladder validation rejects malformed rungs") {
    KnobLadder l = KnobLadder::defaults();
    l.threads = {3, 2};
    CHECK_THROWS_AS(l.validate(), InvalidInputError);
    l = KnobLadder::defaults();
    l.freq.clear();
    CHECK_THROWS_AS(l.validate(), InvalidInputError);
    l = KnobLadder::defaults();
    l.qp = {50, 52};
    CHECK_THROWS_AS(l.validate(), InvalidInputError);
    l = KnobLadder::defaults();
    l.threads.front() = 0;
    CHECK_THROWS_AS(l.validate(), InvalidInputError);
}

TEST_CASE("default state space is 4 x 14 x 22 = 1232 states") {
    StateSpace sp = StateSpace::defaults();
    sp.validate();
    CHECK(sp.fps_bins() == 4);
    CHECK(sp.psnr_bins() == 14);
    CHECK(sp.power_bins() == 22);
    CHECK(sp.state_count() == 1232);
    CHECK(enumerate_states(sp).size() == 1232);
}

TEST_CASE("bin_of maps readings to half-open bins") {
    StateSpace sp = StateSpace::defaults();

    // fps edges {24, 30, 40}
    CHECK(sp.fps.bin_of(23.9) == 0);
    CHECK(sp.fps.bin_of(24.0) == 1);  // edge value belongs to the upper bin
    CHECK(sp.fps.bin_of(27.7) == 1);
    CHECK(sp.fps.bin_of(30.0) == 2);
    CHECK(sp.fps.bin_of(39.999) == 2);
    CHECK(sp.fps.bin_of(40.0) == 3);
    CHECK(sp.fps.bin_of(500.0) == 3);

    // psnr edges 34..46 in 1 dB steps
    CHECK(sp.psnr.bin_of(33.9) == 0);
    CHECK(sp.psnr.bin_of(36.0) == 3);  // first bin at/above the 36 dB floor
    CHECK(sp.psnr.bin_of(37.86) == 4);
    CHECK(sp.psnr.bin_of(46.0) == 13);
    CHECK(sp.psnr.bin_of(60.0) == 13);

    // power edges 20..120 in 5 W steps
    CHECK(sp.power.bin_of(10.0) == 0);
    CHECK(sp.power.bin_of(39.0) == 4);
    CHECK(sp.power.bin_of(120.0) == 21);
    CHECK(sp.power.bin_of(1e9) == 21);  // open top bin
}

TEST_CASE("bin_of rejects non-finite readings") {
    StateSpace sp = StateSpace::defaults();
    CHECK_THROWS_AS(sp.fps.bin_of(std::numeric_limits<double>::quiet_NaN()), InvalidInputError);
    CHECK_THROWS_AS(sp.power.bin_of(std::numeric_limits<double>::infinity()), InvalidInputError);
    CHECK_THROWS_AS(discretize(30.0, std::numeric_limits<double>::quiet_NaN(), 50.0, sp),
                    InvalidInputError);
}

TEST_CASE("sub-state spec validation") {
    SubStateSpec s{MetricId::ThroughputFps, {}};
    CHECK_THROWS_AS(s.validate(), InvalidInputError);
    s.bin_edges = {1.0, 1.0};
    CHECK_THROWS_AS(s.validate(), InvalidInputError);
    s.bin_edges = {2.0, 1.0};
    CHECK_THROWS_AS(s.validate(), InvalidInputError);
    s.bin_edges = {1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(s.validate(), InvalidInputError);
    s.bin_edges = {1.0, 2.0};
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("discretize lands every metric in its containing bin") {
    StateSpace sp = StateSpace::defaults();
    State s = discretize(27.7, 37.86, 39.0, sp);
    CHECK(s == State{1, 4, 4});
    CHECK(discretize(23.9, 33.0, 10.0, sp) == State{0, 0, 0});
    CHECK(discretize(100.0, 50.0, 1e9, sp) == State{3, 13, 21});
}

TEST_CASE("points inside one bin discretize identically") {
    StateSpace sp = StateSpace::defaults();
    std::mt19937_64 rng(7);
    auto jitter_pair = [&](const SubStateSpec& spec, std::size_t bin) {
        double lo = bin == 0 ? spec.bin_edges.front() - 10.0 : spec.bin_edges[bin - 1];
        double hi = bin == spec.bin_edges.size() ? spec.bin_edges.back() + 10.0
                                                 : spec.bin_edges[bin];
        std::uniform_real_distribution<double> d(lo, hi);
        double a = d(rng), b = d(rng);
        CHECK(spec.bin_of(a) == bin);
        CHECK(spec.bin_of(b) == bin);
    };
    for (std::size_t bin = 0; bin < sp.fps.bin_count(); ++bin) jitter_pair(sp.fps, bin);
    for (std::size_t bin = 0; bin < sp.psnr.bin_count(); ++bin) jitter_pair(sp.psnr, bin);
    for (std::size_t bin = 0; bin < sp.power.bin_count(); ++bin) jitter_pair(sp.power, bin);
}

TEST_CASE("state indexing is lexicographic and round-trips") {
    StateSpace sp = StateSpace::defaults();
    CHECK(state_index(State{0, 0, 0}, sp) == 0);
    CHECK(state_index(State{0, 0, 1}, sp) == 1);
    CHECK(state_index(State{0, 1, 0}, sp) == 22);
    CHECK(state_index(State{1, 0, 0}, sp) == 14 * 22);
    CHECK(state_index(State{3, 13, 21}, sp) == 1231);

    std::vector<State> all = enumerate_states(sp);
    CHECK(all.front() == State{0, 0, 0});
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(state_index(all[i], sp) == i);
        CHECK(state_from_index(i, sp) == all[i]);
        seen.insert(state_index(all[i], sp));
    }
    CHECK(seen.size() == all.size());  // duplicate-free

    CHECK_THROWS_AS(state_index(State{0, 14, 0}, sp), InvalidInputError);
    CHECK_THROWS_AS(state_from_index(1232, sp), InvalidInputError);
}

TEST_CASE("27 actions in lexicographic delta order") {
    std::vector<Action> all = enumerate_actions();
    REQUIRE(all.size() == kActionCount);
    CHECK(all[0] == Action{-1, -1, -1});
    CHECK(all[13] == Action{0, 0, 0});
    CHECK(all[26] == Action{1, 1, 1});
    CHECK(action_index(Action{1, 0, 0}) == 22);
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(action_index(all[i]) == i);
        CHECK(action_from_index(i) == all[i]);
        seen.insert(i);
    }
    CHECK(seen.size() == 27);
    CHECK_THROWS_AS(action_index(Action{2, 0, 0}), InvalidInputError);
    CHECK_THROWS_AS(action_from_index(27), InvalidInputError);
}

TEST_CASE("apply_action steps and saturates") {
    KnobLadder l = KnobLadder::defaults();
    KnobSetting k{3, 0, 0};
    KnobSetting up = apply_action(k, Action{1, 0, 0}, l);
    CHECK(up.threads_idx == 4);
    CHECK(up.freq_idx == 0);
    CHECK(up.qp_idx == 0);

    // saturation at both ends
    KnobSetting top{11, 8, 18};
    CHECK(apply_action(top, Action{1, 1, 1}, l) == top);
    KnobSetting bottom{0, 0, 0};
    CHECK(apply_action(bottom, Action{-1, -1, -1}, l) == bottom);
    KnobSetting hi_freq{5, 8, 9};
    CHECK(apply_action(hi_freq, Action{0, 1, 0}, l).freq_idx == 8);

    // identity action
    KnobSetting mid{5, 4, 9};
    CHECK(apply_action(mid, Action{0, 0, 0}, l) == mid);
}

TEST_CASE("apply_action never leaves the ladder, exhaustively") {
    KnobLadder l = KnobLadder::defaults();
    for (int t = 0; t < 12; ++t)
        for (int f = 0; f < 9; ++f)
            for (int q = 0; q < 19; ++q)
                for (const Action& a : enumerate_actions()) {
                    KnobSetting k{t, f, q};
                    KnobSetting r = apply_action(k, a, l);
                    CHECK(valid_for(r, l));
                    // zero-delta axes never move
                    if (a.d_threads == 0) CHECK(r.threads_idx == t);
                    if (a.d_freq == 0) CHECK(r.freq_idx == f);
                    if (a.d_qp == 0) CHECK(r.qp_idx == q);
                }
}

TEST_CASE("apply_action rejects foreign knob settings") {
    KnobLadder l = KnobLadder::defaults();
    CHECK_THROWS_AS(apply_action(KnobSetting{12, 0, 0}, Action{0, 0, 0}, l), InvalidInputError);
    CHECK_THROWS_AS(apply_action(KnobSetting{0, -1, 0}, Action{0, 0, 0}, l), InvalidInputError);
}
