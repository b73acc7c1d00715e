#include "kaas/kb.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <json.hpp>

#include "kaas/errors.hpp"
#include "kaas/ioutil.hpp"
#include "kaas/rng.hpp"
#include "kaas/transitions.hpp"

namespace kaas {

const char* user_class_name(UserClass c) {
    return c == UserClass::Regular ? "regular" : "premium";
}

const char* resource_mode_name(ResourceMode m) {
    return m == ResourceMode::Full ? "full" : "minimized";
}

const char* canonical_policy_name(UserClass c, ResourceMode m) {
    if (c == UserClass::Regular)
        return m == ResourceMode::Full ? "pi_R_hi" : "pi_R_lo";
    return m == ResourceMode::Full ? "pi_P_hi" : "pi_P_lo";
}

RolloutStats rollout_policy(const Policy& policy, const std::vector<VideoProfile>& profiles,
                            const StateSpace& space, const KnobLadder& ladder,
                            const EnvModelParams& env, const KnobSetting& start_knobs,
                            std::uint64_t seed, double noise_scale) {
    if (profiles.empty())
        throw InvalidInputError("rollout needs at least one profile");
    if (policy.greedy.size() != space.state_count())
        throw SignatureMismatchError("policy state count does not match the state space");
    RolloutStats st;
    double threads = 0, freq = 0, qp = 0, fps = 0, psnr = 0, power = 0;
    std::uint64_t low = 0;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        EncodeSession session(profiles[i], start_knobs, seed, i, noise_scale);
        KnobSetting knobs = start_knobs;
        while (!session.finished()) {
            Observation obs = session.step_interval(ladder, env);
            threads += ladder.threads[knobs.threads_idx];
            freq += ladder.freq[knobs.freq_idx];
            qp += ladder.qp[knobs.qp_idx];
            fps += obs.fps;
            psnr += obs.psnr;
            power += obs.power;
            if (obs.fps < 24.0) ++low;
            ++st.ticks;
            knobs = apply_action(knobs, policy.act(discretize(obs, space), space), ladder);
            session.set_knobs(knobs);
        }
    }
    double n = static_cast<double>(st.ticks);
    st.avg_threads = threads / n;
    st.avg_freq = freq / n;
    st.avg_qp = qp / n;
    st.avg_fps = fps / n;
    st.avg_psnr = psnr / n;
    st.avg_power = power / n;
    st.delta_violation_pct = 100.0 * static_cast<double>(low) / n;
    return st;
}

KnowledgeBase::KnowledgeBase(StateSpace space, KnobLadder ladder, EnvModelParams env)
    : space_(std::move(space)), ladder_(std::move(ladder)), env_(env) {
    space_.validate();
    ladder_.validate();
    signature_ = table_signature(space_, ladder_, env_);
}

const KbEntry& KnowledgeBase::register_policy(const Policy& policy,
                                              const std::vector<VideoProfile>& profiles,
                                              const KnobSetting& start_knobs,
                                              std::uint64_t seed) {
    RolloutStats st = rollout_policy(policy, profiles, space_, ladder_, env_, start_knobs, seed);
    KbEntry entry;
    entry.policy = policy;
    entry.avg_cores = st.avg_threads;
    entry.avg_quality = st.avg_psnr;
    for (const auto& p : profiles) entry.measured_on.push_back(p.id);
    for (auto& e : entries_) {
        if (e.policy.name == policy.name) {
            e = std::move(entry);
            return e;
        }
    }
    entries_.push_back(std::move(entry));
    return entries_.back();
}

std::vector<std::string> KnowledgeBase::missing_names() const {
    std::vector<std::string> out;
    for (const char* name : {"pi_R_hi", "pi_P_hi", "pi_R_lo", "pi_P_lo"})
        if (!has(name)) out.push_back(name);
    return out;
}

bool KnowledgeBase::provisioned() const { return missing_names().empty(); }

const KbEntry& KnowledgeBase::entry(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.policy.name == name) return e;
    throw KnowledgeMissError("knowledge base has no policy named " + name);
}

bool KnowledgeBase::has(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const KbEntry& e) { return e.policy.name == name; });
}

std::vector<std::string> KnowledgeBase::names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.policy.name);
    return out;
}

const Policy& KnowledgeBase::lookup(UserClass c, ResourceMode m) const {
    return entry(canonical_policy_name(c, m)).policy;
}

double KnowledgeBase::avg_cores(UserClass c, ResourceMode m) const {
    return entry(canonical_policy_name(c, m)).avg_cores;
}

void KnowledgeBase::save(const std::string& path) const {
    nlohmann::ordered_json j;
    j["format"] = "kaas-kb";
    j["version"] = 1;
    j["signature"] = nlohmann::ordered_json::parse(signature_);
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : entries_) {
        nlohmann::ordered_json je;
        je["policy"] = nlohmann::ordered_json::parse(e.policy.to_json_text());
        je["avg_cores"] = e.avg_cores;
        je["avg_quality"] = e.avg_quality;
        je["measured_on"] = e.measured_on;
        j["entries"].push_back(std::move(je));
    }
    write_text_file(path, j.dump());
}

KnowledgeBase KnowledgeBase::load(const std::string& path, const StateSpace& space,
                                  const KnobLadder& ladder, const EnvModelParams& env) {
    KnowledgeBase kb(space, ladder, env);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError("unreadable knowledge base " + path + ": " + e.what());
    }
    try {
        if (j.value("format", "") != "kaas-kb" || j.value("version", 0) != 1)
            throw InvalidInputError("not a version-1 knowledge base record");
        if (j.at("signature").dump() != kb.signature_)
            throw SignatureMismatchError(
                "knowledge base " + path + " was built against a different configuration");
        for (const auto& je : j.at("entries")) {
            KbEntry e;
            e.policy = Policy::from_json_text(je.at("policy").dump());
            e.avg_cores = je.at("avg_cores").get<double>();
            e.avg_quality = je.at("avg_quality").get<double>();
            for (const auto& m : je.at("measured_on")) e.measured_on.push_back(m.get<std::string>());
            if (!std::isfinite(e.avg_cores) || e.avg_cores <= 0.0)
                throw InvalidInputError("entry " + e.policy.name + " has a bad avg_cores");
            if (e.policy.greedy.size() != kb.space_.state_count())
                throw SignatureMismatchError("entry " + e.policy.name +
                                             " does not match the configured state space");
            if (kb.has(e.policy.name))
                throw InvalidInputError("duplicate entry " + e.policy.name);
            kb.entries_.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError("unreadable knowledge base " + path + ": " + e.what());
    }
    return kb;
}

ProvisionResult provision(const ProvisionOptions& opt, const TransitionTable* existing) {
    opt.space.validate();
    opt.ladder.validate();
    opt.env.validate();
    opt.hyper.validate();
    if (!valid_for(opt.start_knobs, opt.ladder))
        throw InvalidInputError("start knobs fall outside the ladder");
    if (opt.min_visits < 1) throw InvalidInputError("min_visits must be at least 1");
    const std::string sig = table_signature(opt.space, opt.ladder, opt.env);

    std::optional<TransitionTable> table;
    if (existing) {
        if (existing->signature() != sig)
            throw SignatureMismatchError(
                "supplied transition table was built against a different configuration");
        if (existing->coverage(static_cast<int>(opt.min_visits)).complete) table = *existing;
    }
    if (!table) {
        TrainingEnv env(training_profiles(), opt.ladder, opt.env, opt.start_knobs,
                        mix_seed(opt.seed, 1));
        ExploreResult ex = explore(env, opt.space, static_cast<int>(opt.min_visits),
                                   opt.explore_budget, opt.seed);
        if (existing) ex.table.merge(*existing);  // keep whatever was already known
        table = std::move(ex.table);
    }

    TrainingEnv base_env(training_profiles(), opt.ladder, opt.env, opt.start_knobs,
                         mix_seed(opt.seed, 2));
    Policy base = train_online(base_env, recipe_by_name("pi_R_hi"), opt.space, opt.hyper,
                               mix_seed(opt.seed, 3), &*table);
    Policy p_hi = train_offline(*table, recipe_by_name("pi_P_hi"), opt.hyper,
                                mix_seed(opt.seed, 4), {}, opt.min_explored_fraction);
    Policy r_lo = train_offline(*table, recipe_by_name("pi_R_lo"), opt.hyper,
                                mix_seed(opt.seed, 5), {}, opt.min_explored_fraction);
    Policy p_lo = train_offline(*table, recipe_by_name("pi_P_lo"), opt.hyper,
                                mix_seed(opt.seed, 6), {}, opt.min_explored_fraction);

    KnowledgeBase kb(opt.space, opt.ladder, opt.env);
    const std::vector<VideoProfile> profs = training_profiles();
    kb.register_policy(base, profs, opt.start_knobs, mix_seed(opt.seed, 7));
    kb.register_policy(p_hi, profs, opt.start_knobs, mix_seed(opt.seed, 8));
    kb.register_policy(r_lo, profs, opt.start_knobs, mix_seed(opt.seed, 9));
    kb.register_policy(p_lo, profs, opt.start_knobs, mix_seed(opt.seed, 10));

    CoverageReport cov = table->coverage(static_cast<int>(opt.min_visits));
    return {std::move(kb), std::move(*table), cov};
}

} // namespace kaas
