#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kaas/env_sim.hpp"
#include "kaas/errors.hpp"
#include "kaas/ioutil.hpp"
#include "kaas/kb.hpp"
#include "kaas/learning.hpp"
#include "kaas/mdp.hpp"
#include "kaas/rewards.hpp"

namespace {

using namespace kaas;

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

VideoProfile flat_profile(int frames = 48, double sigma_fps = 0.0, double sigma_psnr = 0.0) {
    VideoProfile p;
    p.id = "flat";
    p.length_frames = frames;
    p.scenes = {Scene{0, 1.0, 0.0}};
    p.noise_sigma_fps = sigma_fps;
    p.noise_sigma_psnr = sigma_psnr;
    return p;
}

Policy hold_policy(const std::string& name, const StateSpace& sp, int action = 13) {
    Policy p;
    p.name = name;
    p.recipe = recipe_by_name(name);
    p.hyper = Hyperparams{};
    p.trained_with = "offline";
    p.seed = 1;
    p.greedy.assign(sp.state_count(), static_cast<std::uint8_t>(action));
    p.state_visits.assign(sp.state_count(), 1);
    return p;
}

// Bin counts the shapes accept, edges beyond every reachable metric: the
// whole dynamics collapses into state (0,0,0), keeping provisioning cheap.
StateSpace one_state_space() {
    StateSpace sp;
    sp.fps = SubStateSpec{MetricId::ThroughputFps, {1e9, 2e9, 3e9}};
    std::vector<double> pe;
    for (int i = 0; i < 13; ++i) pe.push_back(1e9 + 1e6 * i);
    sp.psnr = SubStateSpec{MetricId::QualityPsnrDb, pe};
    sp.power = SubStateSpec{MetricId::PowerWatts, {1e9}};
    return sp;
}

} // namespace

TEST_CASE("class, mode and canonical policy names form the expected grid") {
    CHECK(std::string(user_class_name(UserClass::Regular)) == "regular");
    CHECK(std::string(user_class_name(UserClass::Premium)) == "premium");
    CHECK(std::string(resource_mode_name(ResourceMode::Full)) == "full");
    CHECK(std::string(resource_mode_name(ResourceMode::Minimized)) == "minimized");

    CHECK(std::string(canonical_policy_name(UserClass::Regular, ResourceMode::Full)) ==
          "pi_R_hi");
    CHECK(std::string(canonical_policy_name(UserClass::Premium, ResourceMode::Full)) ==
          "pi_P_hi");
    CHECK(std::string(canonical_policy_name(UserClass::Regular, ResourceMode::Minimized)) ==
          "pi_R_lo");
    CHECK(std::string(canonical_policy_name(UserClass::Premium, ResourceMode::Minimized)) ==
          "pi_P_lo");
}

TEST_CASE("rollouts of a hold policy average to the start knobs exactly") {
    const StateSpace sp = StateSpace::defaults();
    const KnobLadder ladder;
    const EnvModelParams env;
    const Policy p = hold_policy("pi_R_hi", sp);
    const KnobSetting start{3, 2, 8};  // 4 threads, 1.4 GHz, QP 30

    RolloutStats st = rollout_policy(p, {flat_profile(48)}, sp, ladder, env, start, 9);
    CHECK(st.ticks == 2);  // 48 frames = 2 control intervals
    CHECK(st.avg_threads == 4.0);
    CHECK(st.avg_freq == doctest::Approx(1.4).epsilon(1e-12));
    CHECK(st.avg_qp == 30.0);
    // No noise, fixed knobs: the averages are the model values themselves.
    CHECK(st.avg_fps == doctest::Approx(fps_model(4.0, 1.4, 30.0, 1.0, 1.0, env)).epsilon(1e-12));
    CHECK(st.avg_psnr == doctest::Approx(psnr_model(30.0, 0.0, env)).epsilon(1e-12));
    CHECK(st.avg_power == doctest::Approx(power_watts(4.0, 1.4, env.power)).epsilon(1e-12));

    // fps_model(4, 1.4, 30, 1, 1) sits above the 24 fps floor, so no
    // violations; starving the encoder at 1 thread breaks the floor always.
    CHECK(st.delta_violation_pct == 0.0);
    RolloutStats starved =
        rollout_policy(p, {flat_profile(48)}, sp, ladder, env, KnobSetting{0, 0, 0}, 9);
    CHECK(starved.delta_violation_pct == 100.0);

    // Multi-profile rollouts concatenate tick counts.
    RolloutStats multi =
        rollout_policy(p, {flat_profile(48), flat_profile(72)}, sp, ladder, env, start, 9);
    CHECK(multi.ticks == 5);

    // Determinism: same seed, same stats; the noise stream shifts them.
    const VideoProfile noisy = flat_profile(480, 0.06, 0.3);
    RolloutStats a = rollout_policy(p, {noisy}, sp, ladder, env, start, 42);
    RolloutStats b = rollout_policy(p, {noisy}, sp, ladder, env, start, 42);
    CHECK(a.avg_fps == b.avg_fps);
    CHECK(a.avg_psnr == b.avg_psnr);
    RolloutStats c = rollout_policy(p, {noisy}, sp, ladder, env, start, 43);
    CHECK(a.avg_fps != c.avg_fps);
    // noise_scale 0 silences the profile's sigmas entirely.
    RolloutStats quiet = rollout_policy(p, {noisy}, sp, ladder, env, start, 42, 0.0);
    CHECK(quiet.avg_fps == doctest::Approx(fps_model(4.0, 1.4, 30.0, 1.0, 1.0, env)).epsilon(1e-12));

    CHECK_THROWS_AS(rollout_policy(p, {}, sp, ladder, env, start, 9), InvalidInputError);
    Policy foreign = hold_policy("pi_R_hi", one_state_space());
    CHECK_THROWS_AS(rollout_policy(foreign, {flat_profile(48)}, sp, ladder, env, start, 9),
                    SignatureMismatchError);
}

TEST_CASE("the knowledge base registers, replaces and looks up policies") {
    const StateSpace sp = StateSpace::defaults();
    KnowledgeBase kb(sp, KnobLadder{}, EnvModelParams{});
    CHECK_FALSE(kb.provisioned());
    CHECK(kb.missing_names().size() == 4);
    CHECK_FALSE(kb.has("pi_R_hi"));
    CHECK_THROWS_AS(kb.entry("pi_R_hi"), KnowledgeMissError);
    CHECK_THROWS_AS(kb.lookup(UserClass::Regular, ResourceMode::Full), KnowledgeMissError);

    const VideoProfile prof = flat_profile(48);
    kb.register_policy(hold_policy("pi_R_hi", sp), {prof}, KnobSetting{3, 2, 8}, 1);
    kb.register_policy(hold_policy("pi_P_hi", sp), {prof}, KnobSetting{4, 2, 8}, 1);
    CHECK(kb.has("pi_R_hi"));
    CHECK_FALSE(kb.provisioned());
    CHECK(kb.missing_names() == std::vector<std::string>{"pi_R_lo", "pi_P_lo"});

    kb.register_policy(hold_policy("pi_R_lo", sp), {prof}, KnobSetting{1, 2, 8}, 1);
    kb.register_policy(hold_policy("pi_P_lo", sp), {prof}, KnobSetting{2, 2, 8}, 1);
    CHECK(kb.provisioned());
    CHECK(kb.missing_names().empty());
    CHECK(kb.names() ==
          std::vector<std::string>{"pi_R_hi", "pi_P_hi", "pi_R_lo", "pi_P_lo"});

    // Hold policies pin avg_cores to the registration start threads.
    CHECK(kb.avg_cores(UserClass::Regular, ResourceMode::Full) == 4.0);
    CHECK(kb.avg_cores(UserClass::Premium, ResourceMode::Full) == 5.0);
    CHECK(kb.avg_cores(UserClass::Regular, ResourceMode::Minimized) == 2.0);
    CHECK(kb.avg_cores(UserClass::Premium, ResourceMode::Minimized) == 3.0);
    CHECK(kb.lookup(UserClass::Premium, ResourceMode::Full).name == "pi_P_hi");
    CHECK(kb.entry("pi_R_hi").measured_on == std::vector<std::string>{"flat"});
    CHECK(kb.entry("pi_R_hi").avg_quality ==
          doctest::Approx(psnr_model(30.0, 0.0, EnvModelParams{})).epsilon(1e-12));

    // Re-registration replaces the entry in place, preserving order.
    kb.register_policy(hold_policy("pi_R_hi", sp), {prof}, KnobSetting{7, 2, 8}, 1);
    CHECK(kb.avg_cores(UserClass::Regular, ResourceMode::Full) == 8.0);
    CHECK(kb.names().front() == "pi_R_hi");
    CHECK(kb.names().size() == 4);
}

TEST_CASE("the knowledge base survives serialization byte for byte") {
    const StateSpace sp = StateSpace::defaults();
    const KnobLadder ladder;
    const EnvModelParams env;
    KnowledgeBase kb(sp, ladder, env);
    const VideoProfile prof = flat_profile(48);
    kb.register_policy(hold_policy("pi_R_hi", sp), {prof}, KnobSetting{3, 2, 8}, 1);
    kb.register_policy(hold_policy("pi_P_hi", sp), {prof}, KnobSetting{4, 2, 8}, 1);

    const std::string p1 = tmp_path("kb_rt1.json");
    const std::string p2 = tmp_path("kb_rt2.json");
    kb.save(p1);
    KnowledgeBase back = KnowledgeBase::load(p1, sp, ladder, env);
    back.save(p2);
    CHECK(read_text_file(p1) == read_text_file(p2));

    // A partial base round-trips as partial.
    CHECK_FALSE(back.provisioned());
    CHECK(back.missing_names() == std::vector<std::string>{"pi_R_lo", "pi_P_lo"});
    CHECK(back.names() == kb.names());
    CHECK(back.avg_cores(UserClass::Regular, ResourceMode::Full) == 4.0);
    CHECK(back.entry("pi_P_hi").policy.greedy == kb.entry("pi_P_hi").policy.greedy);

    // A base saved under different bins must not load.
    StateSpace other = sp;
    other.fps.bin_edges = {24.0, 30.0, 48.0};
    CHECK_THROWS_AS(KnowledgeBase::load(p1, other, ladder, env), SignatureMismatchError);

    CHECK_THROWS_AS(KnowledgeBase::load(tmp_path("no_such_kb.json"), sp, ladder, env),
                    InvalidInputError);
    const std::string bad = tmp_path("kb_bad.json");
    write_text_file(bad, "{]");
    CHECK_THROWS_AS(KnowledgeBase::load(bad, sp, ladder, env), InvalidInputError);
    write_text_file(bad, "{\"format\":\"kaas-kb\",\"version\":2}");
    CHECK_THROWS_AS(KnowledgeBase::load(bad, sp, ladder, env), InvalidInputError);
}

TEST_CASE("provisioning bootstraps all four policies from one seed") {
    ProvisionOptions opt;
    opt.space = one_state_space();
    opt.ladder = KnobLadder{};
    opt.env = EnvModelParams{};
    opt.hyper.training_frames = 200 * kFramesPerInterval;
    opt.start_knobs = KnobSetting{3, 2, 8};
    opt.min_visits = 5;
    opt.explore_budget = 20000;
    opt.seed = 31;

    ProvisionResult res = provision(opt);
    CHECK(res.kb.provisioned());
    CHECK(res.coverage.complete);
    CHECK(res.coverage.visited_states == 1);
    CHECK(res.coverage.explored_pairs == 27);

    // The base policy learned online; the other three never touched the
    // environment, which is the entire value proposition.
    CHECK(res.kb.entry("pi_R_hi").policy.trained_with == "online");
    CHECK(res.kb.entry("pi_R_hi").policy.env_interactions == 200);
    for (const char* name : {"pi_P_hi", "pi_R_lo", "pi_P_lo"}) {
        CHECK(res.kb.entry(name).policy.trained_with == "offline");
        CHECK(res.kb.entry(name).policy.env_interactions == 0);
    }
    for (const std::string& name : res.kb.names()) {
        const KbEntry& e = res.kb.entry(name);
        CHECK(e.avg_cores >= 1.0);
        CHECK(e.avg_cores <= 12.0);
        CHECK(e.avg_quality > 0.0);
        CHECK(e.measured_on == std::vector<std::string>{"t1", "t2", "t3"});
    }

    // The base run's transitions landed in the returned table.
    CHECK(res.table.coverage(1).recorded_transitions >= 199);

    // Same options, same bytes: the whole bootstrap replays from the seed.
    ProvisionResult res2 = provision(opt);
    const std::string p1 = tmp_path("prov_kb1.json");
    const std::string p2 = tmp_path("prov_kb2.json");
    res.kb.save(p1);
    res2.kb.save(p2);
    CHECK(read_text_file(p1) == read_text_file(p2));
}

TEST_CASE("provisioning reuses a complete table and rejects a foreign one") {
    ProvisionOptions opt;
    opt.space = one_state_space();
    opt.hyper.training_frames = 100 * kFramesPerInterval;
    opt.start_knobs = KnobSetting{3, 2, 8};
    opt.min_visits = 3;
    opt.explore_budget = 20000;
    opt.seed = 8;

    ProvisionResult first = provision(opt);
    const std::uint64_t explored_transitions = first.coverage.recorded_transitions;

    // Passing the finished table back skips exploration: the reused table
    // grows only by the base policy's recording.
    ProvisionResult second = provision(opt, &first.table);
    CHECK(second.coverage.recorded_transitions == explored_transitions + 99);

    // A table from different dynamics is rejected outright.
    StateSpace other = StateSpace::defaults();
    TransitionTable foreign(other, table_signature(other, opt.ladder, opt.env), 1, "d");
    CHECK_THROWS_AS(provision(opt, &foreign), SignatureMismatchError);

    ProvisionOptions bad = opt;
    bad.min_visits = 0;
    CHECK_THROWS_AS(provision(bad), InvalidInputError);
    bad = opt;
    bad.start_knobs.threads_idx = 99;
    CHECK_THROWS_AS(provision(bad), InvalidInputError);
}
