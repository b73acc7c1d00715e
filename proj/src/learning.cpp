#include "kaas/learning.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "kaas/errors.hpp"
#include "kaas/ioutil.hpp"
#include "kaas/rng.hpp"

namespace kaas {

double Hyperparams::epsilon_at(std::uint64_t step, std::uint64_t total_decisions) const {
    std::uint64_t decay = epsilon_decay_steps;
    if (decay == 0) decay = std::max<std::uint64_t>(1, total_decisions * 6 / 10);
    if (step >= decay) return epsilon_end;
    const double f = static_cast<double>(step) / static_cast<double>(decay);
    return epsilon_start + (epsilon_end - epsilon_start) * f;
}

void Hyperparams::validate() const {
    if (!(learning_rate > 0.0) || learning_rate > 1.0)
        throw InvalidInputError("learning rate must lie in (0, 1]");
    if (!(discount >= 0.0) || discount >= 1.0)
        throw InvalidInputError("discount must lie in [0, 1)");
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(epsilon_start) || !in01(epsilon_end) || epsilon_start < epsilon_end)
        throw InvalidInputError("epsilon schedule must fall within [0,1], start >= end");
    if (training_frames < static_cast<std::uint64_t>(kFramesPerInterval))
        throw InvalidInputError("training budget shorter than one control interval");
    if (offline_horizon == 0) throw InvalidInputError("offline horizon must be >= 1");
}

QTable::QTable(const StateSpace& space)
    : space_(space),
      q_(space.state_count() * kActionCount, 0.0),
      visits_(space.state_count() * kActionCount, 0) {}

std::uint64_t QTable::state_visits(std::size_t s_idx) const {
    std::uint64_t n = 0;
    for (std::size_t ai = 0; ai < kActionCount; ++ai) n += visits_[s_idx * kActionCount + ai];
    return n;
}

double QTable::row_max(std::size_t s_idx) const {
    const double* row = &q_[s_idx * kActionCount];
    return *std::max_element(row, row + kActionCount);
}

std::size_t QTable::row_argmax(std::size_t s_idx) const {
    const double* row = &q_[s_idx * kActionCount];
    return static_cast<std::size_t>(std::max_element(row, row + kActionCount) - row);
}

void QTable::update(const State& s, const Action& a, double r, const State& next,
                    const Hyperparams& h) {
    if (!std::isfinite(r)) throw InvalidInputError("non-finite reward");
    const std::size_t si = state_index(s, space_);
    const std::size_t ai = action_index(a);
    double& cell = q_[si * kActionCount + ai];
    cell += h.learning_rate * (r + h.discount * row_max(state_index(next, space_)) - cell);
    ++visits_[si * kActionCount + ai];
}

Action Policy::act(const State& s, const StateSpace& space) const {
    return action_from_index(greedy.at(state_index(s, space)));
}

namespace {

nlohmann::ordered_json recipe_to_json(const RewardRecipe& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["psnr"] = {{"shape", shape_name(r.psnr.shape)}, {"alpha", r.psnr.alpha}};
    j["power"] = {{"shape", shape_name(r.power.shape)}, {"alpha", r.power.alpha}};
    j["fps"] = {{"shape", shape_name(r.fps.shape)}, {"alpha", r.fps.alpha}};
    return j;
}

RewardRecipe recipe_from_json(const nlohmann::json& j) {
    RewardRecipe r;
    r.name = j.at("name").get<std::string>();
    auto term = [&](const char* key) {
        return RewardTerm{shape_from_name(j.at(key).at("shape").get<std::string>()),
                          j.at(key).at("alpha").get<double>()};
    };
    r.psnr = term("psnr");
    r.power = term("power");
    r.fps = term("fps");
    r.validate();
    return r;
}

nlohmann::ordered_json hyper_to_json(const Hyperparams& h) {
    nlohmann::ordered_json j;
    j["learning_rate"] = h.learning_rate;
    j["discount"] = h.discount;
    j["epsilon_start"] = h.epsilon_start;
    j["epsilon_end"] = h.epsilon_end;
    j["epsilon_decay_steps"] = h.epsilon_decay_steps;
    j["training_frames"] = h.training_frames;
    j["offline_horizon"] = h.offline_horizon;
    return j;
}

Hyperparams hyper_from_json(const nlohmann::json& j) {
    Hyperparams h;
    h.learning_rate = j.at("learning_rate").get<double>();
    h.discount = j.at("discount").get<double>();
    h.epsilon_start = j.at("epsilon_start").get<double>();
    h.epsilon_end = j.at("epsilon_end").get<double>();
    h.epsilon_decay_steps = j.at("epsilon_decay_steps").get<std::uint64_t>();
    h.training_frames = j.at("training_frames").get<std::uint64_t>();
    h.offline_horizon = j.at("offline_horizon").get<std::uint64_t>();
    h.validate();
    return h;
}

} // namespace

nlohmann::ordered_json policy_to_json(const Policy& p);

nlohmann::ordered_json policy_to_json(const Policy& p) {
    nlohmann::ordered_json j;
    j["format"] = "kaas-policy";
    j["version"] = 1;
    j["name"] = p.name;
    j["recipe"] = recipe_to_json(p.recipe);
    j["hyperparams"] = hyper_to_json(p.hyper);
    j["trained_with"] = p.trained_with;
    j["seed"] = p.seed;
    j["env_interactions"] = p.env_interactions;
    j["greedy"] = p.greedy;
    j["state_visits"] = p.state_visits;
    return j;
}

Policy policy_from_json(const nlohmann::json& j);

Policy policy_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "kaas-policy" || j.value("version", 0) != 1)
        throw InvalidInputError("not a version-1 policy record");
    Policy p;
    p.name = j.at("name").get<std::string>();
    p.recipe = recipe_from_json(j.at("recipe"));
    p.hyper = hyper_from_json(j.at("hyperparams"));
    p.trained_with = j.at("trained_with").get<std::string>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.env_interactions = j.at("env_interactions").get<std::uint64_t>();
    p.greedy = j.at("greedy").get<std::vector<std::uint8_t>>();
    p.state_visits = j.at("state_visits").get<std::vector<std::uint64_t>>();
    for (std::uint8_t a : p.greedy)
        if (a >= kActionCount) throw InvalidInputError("greedy map holds a bad action index");
    if (p.state_visits.size() != p.greedy.size())
        throw InvalidInputError("policy visit map does not match its greedy map");
    return p;
}

void Policy::save(const std::string& path) const {
    write_text_file(path, to_json_text());
}

Policy Policy::load(const std::string& path) {
    try {
        return from_json_text(read_text_file(path));
    } catch (const InvalidInputError&) {
        throw;
    } catch (const std::exception& e) {
        throw InvalidInputError("unreadable policy " + path + ": " + e.what());
    }
}

std::string Policy::to_json_text() const {
    return policy_to_json(*this).dump();
}

Policy Policy::from_json_text(const std::string& text) {
    try {
        return policy_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError(std::string("unreadable policy record: ") + e.what());
    }
}

void Policy::export_csv(const std::string& path, const StateSpace& space) const {
    if (greedy.size() != space.state_count())
        throw InvalidInputError("policy does not match the state space");
    std::string csv = "state_idx,fps_bin,psnr_bin,power_bin,action_idx,visits\n";
    for (std::size_t si = 0; si < greedy.size(); ++si) {
        const State s = state_from_index(si, space);
        csv += std::to_string(si) + ',' + std::to_string(s.fps_bin) + ',' +
               std::to_string(s.psnr_bin) + ',' + std::to_string(s.power_bin) + ',' +
               std::to_string(greedy[si]) + ',' + std::to_string(state_visits[si]) + '\n';
    }
    write_text_file(path, csv);
}

namespace {

/// One epsilon-greedy choice among `allowed` (all actions when empty).
/// Exactly one uniform draw, plus one more on the explore branch, so seeded
/// trajectories replay identically across training modes.
std::size_t choose_action(const QTable& q, std::size_t s_idx, double epsilon,
                          const std::vector<std::size_t>* allowed, std::mt19937_64& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < epsilon) {
        if (!allowed) {
            return std::uniform_int_distribution<std::size_t>(0, kActionCount - 1)(rng);
        }
        const std::size_t k =
            std::uniform_int_distribution<std::size_t>(0, allowed->size() - 1)(rng);
        return (*allowed)[k];
    }
    if (!allowed) return q.row_argmax(s_idx);
    std::size_t best = (*allowed)[0];
    for (std::size_t ai : *allowed)
        if (q.q(s_idx, ai) > q.q(s_idx, best)) best = ai;
    return best;
}

Policy finish_policy(std::string name, const RewardRecipe& recipe, const Hyperparams& h,
                     std::string mode, std::uint64_t seed, std::uint64_t interactions,
                     const QTable& q) {
    Policy p;
    p.name = std::move(name);
    p.recipe = recipe;
    p.hyper = h;
    p.trained_with = std::move(mode);
    p.seed = seed;
    p.env_interactions = interactions;
    p.greedy = extract_greedy(q);
    p.state_visits.resize(q.space().state_count());
    for (std::size_t si = 0; si < p.state_visits.size(); ++si)
        p.state_visits[si] = q.state_visits(si);
    return p;
}

} // namespace

Policy train_online(TrainingEnv& env, const RewardRecipe& recipe, const StateSpace& space,
                    const Hyperparams& h, std::uint64_t seed, TransitionTable* record_into) {
    h.validate();
    recipe.validate();
    const std::uint64_t decisions = h.decisions();
    QTable q(space);
    CompositeReward reward(recipe, space);
    std::mt19937_64 action_rng = make_rng(seed, RngStream::Action);

    const std::uint64_t start_interactions = env.interactions();
    bool have_prev = false;
    State prev{};
    std::size_t prev_action = 0;
    for (std::uint64_t step = 0; step < decisions; ++step) {
        const Observation obs = env.step();
        const State s = discretize(obs.fps, obs.psnr, obs.power, space);
        if (have_prev) {
            q.update(prev, action_from_index(prev_action), reward(s), s, h);
            if (record_into) record_into->record(prev, action_from_index(prev_action), s);
        }
        const std::size_t a =
            choose_action(q, state_index(s, space), h.epsilon_at(step, decisions), nullptr,
                          action_rng);
        env.apply(action_from_index(a));
        prev = s;
        prev_action = a;
        have_prev = true;
    }
    const std::uint64_t interactions = env.interactions() - start_interactions;
    if (interactions != decisions)
        throw BookkeepingError("online training must touch the environment once per decision");
    return finish_policy(recipe.name, recipe, h, "online", seed, interactions, q);
}

Policy train_offline(const TransitionTable& pt, const RewardRecipe& recipe,
                     const Hyperparams& h, std::uint64_t seed, std::vector<State> start_states,
                     double min_explored_fraction) {
    h.validate();
    recipe.validate();
    const CoverageReport cov = pt.coverage(1);
    const double explored_fraction =
        cov.visited_states == 0 ? 0.0
                                : static_cast<double>(cov.explored_pairs) /
                                      static_cast<double>(cov.visited_states * kActionCount);
    if (explored_fraction < min_explored_fraction)
        throw InvalidInputError("transition table too sparse for offline training: explored " +
                                fmt_fixed(100.0 * explored_fraction, 1) + "% of pairs, need " +
                                fmt_fixed(100.0 * min_explored_fraction, 1) + "%");

    const StateSpace& space = pt.space();
    if (start_states.empty()) start_states = pt.explored_states();
    std::erase_if(start_states,
                  [&](const State& s) { return pt.explored_actions(s).empty(); });
    if (start_states.empty())
        throw InvalidInputError("no explored start states to train from");

    // Per-state action masks; a state observed only as a successor has none
    // and forces an episode restart when reached.
    std::vector<std::vector<std::size_t>> allowed(space.state_count());
    for (const State& s : pt.explored_states())
        allowed[state_index(s, space)] = pt.explored_actions(s);

    QTable q(space);
    CompositeReward reward(recipe, space);
    std::mt19937_64 action_rng = make_rng(seed, RngStream::Action);
    std::mt19937_64 sample_rng = make_rng(seed, RngStream::TransitionSample);
    std::mt19937_64 episode_rng = make_rng(seed, RngStream::EpisodeStart);
    auto draw_start = [&]() {
        return start_states[std::uniform_int_distribution<std::size_t>(
            0, start_states.size() - 1)(episode_rng)];
    };

    const std::uint64_t decisions = h.decisions();
    State s = draw_start();
    std::uint64_t steps_in_episode = 0;
    std::uint64_t done = 0;
    while (done < decisions) {
        const std::size_t si = state_index(s, space);
        if (allowed[si].empty() || steps_in_episode >= h.offline_horizon) {
            // Restarts cost no decision; dead-end states simply cut the
            // episode short.
            s = draw_start();
            steps_in_episode = 0;
            continue;
        }
        const std::size_t a = choose_action(q, si, h.epsilon_at(done, decisions),
                                            &allowed[si], action_rng);
        const Action act = action_from_index(a);
        const State next = pt.sample_next(s, act, sample_rng);
        q.update(s, act, reward(next), next, h);
        s = next;
        ++steps_in_episode;
        ++done;
    }
    // env_interactions is 0 by construction: nothing here can step an
    // environment, which is the whole point of this mode.
    return finish_policy(recipe.name, recipe, h, "offline", seed, 0, q);
}

QTable value_iteration(const TransitionTable& pt, const RewardRecipe& recipe, double discount,
                       double tol, int max_iterations) {
    if (!(discount >= 0.0) || discount >= 1.0)
        throw InvalidInputError("discount must lie in [0, 1)");
    if (!(tol > 0.0)) throw InvalidInputError("tolerance must be positive");
    const StateSpace& space = pt.space();
    QTable q(space);
    CompositeReward reward(recipe, space);

    // Work on explored cells only; unexplored entries stay pinned at zero,
    // matching offline Q-Learning's untouched cells.
    struct Cell {
        std::uint32_t s_idx;
        std::uint8_t a_idx;
        const std::vector<TransitionTable::RowEntry>* row;
        double total;
    };
    std::vector<Cell> cells;
    std::vector<double> reward_by_state(space.state_count());
    for (std::size_t si = 0; si < space.state_count(); ++si)
        reward_by_state[si] = reward(state_from_index(si, space));
    for (std::size_t si = 0; si < space.state_count(); ++si) {
        const State s = state_from_index(si, space);
        for (std::size_t ai = 0; ai < kActionCount; ++ai) {
            const Action a = action_from_index(ai);
            if (pt.total(s, a) == 0) continue;
            cells.push_back({static_cast<std::uint32_t>(si), static_cast<std::uint8_t>(ai),
                             &pt.row(s, a), static_cast<double>(pt.total(s, a))});
        }
    }

    for (int iter = 0; iter < max_iterations; ++iter) {
        double delta = 0.0;
        for (const Cell& c : cells) {
            double v = 0.0;
            for (const auto& [nidx, count] : *c.row)
                v += static_cast<double>(count) *
                     (reward_by_state[nidx] + discount * q.row_max(nidx));
            v /= c.total;
            delta = std::max(delta, std::fabs(v - q.q(c.s_idx, c.a_idx)));
            q.set(c.s_idx, c.a_idx, v);
        }
        if (delta < tol) return q;
    }
    throw OracleFailureError("value iteration failed to converge within the iteration cap");
}

std::vector<std::uint8_t> extract_greedy(const QTable& q) {
    std::vector<std::uint8_t> out(q.space().state_count());
    for (std::size_t si = 0; si < out.size(); ++si)
        out[si] = static_cast<std::uint8_t>(q.row_argmax(si));
    return out;
}

} // namespace kaas
