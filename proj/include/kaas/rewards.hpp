#pragma once

#include <string>
#include <vector>

#include "kaas/mdp.hpp"

namespace kaas {

/// Per-bin sub-reward shapes. Each shape targets one metric and is
/// calibrated to the default discretization of that metric's sub-space:
/// FpsStep needs 4 bins, the Psnr* shapes need 14, PowerLinear >= 2.
enum class RewardShape { FpsStep, PsnrLow, PsnrMid, PsnrHigh, PowerLinear };

const char* shape_name(RewardShape shape);
RewardShape shape_from_name(const std::string& name);  // throws InvalidInputError
MetricId shape_metric(RewardShape shape);

/// Reward per bin index for one sub-space. Throws InvalidInputError when the
/// shape does not fit the spec's metric or bin count.
std::vector<double> reward_table(RewardShape shape, const SubStateSpec& spec);

/// One weighted term of a composite reward.
struct RewardTerm {
    RewardShape shape{};
    double alpha = 0.0;
};

/// A named weighted sum of one PSNR, one power, and one FPS term. The term
/// weights are the only thing that distinguishes client classes; zero alpha
/// keeps the term but mutes it.
struct RewardRecipe {
    std::string name;
    RewardTerm psnr;
    RewardTerm power;
    RewardTerm fps;

    void validate() const;  // shape/metric agreement, finite alphas
};

/// The four built-in recipes: {regular, premium} x {high, low} power budget.
/// High-budget recipes mute or nearly mute the power term.
std::vector<RewardRecipe> builtin_recipes();
RewardRecipe recipe_by_name(const std::string& name);  // throws KnowledgeMissError

/// Canonical one-line encoding of a recipe's shapes and weights, stable
/// across runs; the name is deliberately excluded.
std::string recipe_key(const RewardRecipe& recipe);

/// One row of the reward landscape over the whole state space.
struct LandscapeRow {
    State s;
    double reward = 0.0;
    bool is_goal = false;  // reward >= threshold
};

/// Evaluates the composite reward at every state, flagging the goal set
/// (reward at or above threshold; 0.75 carves out the intended operating
/// region for the built-in recipes). One row per state, state-index order.
std::vector<LandscapeRow> reward_landscape(const RewardRecipe& recipe, const StateSpace& space,
                                           double threshold = 0.75);

/// Precomputed composite reward R(s) = sum_i alpha_i * R_i(s_i).
class CompositeReward {
public:
    CompositeReward(RewardRecipe recipe, const StateSpace& space);

    double operator()(const State& s) const;
    /// The unweighted sub-reward R_i(s_i) for one metric.
    double sub_reward(MetricId metric, const State& s) const;
    const RewardRecipe& recipe() const { return recipe_; }

private:
    RewardRecipe recipe_;
    std::vector<double> psnr_table_;
    std::vector<double> power_table_;
    std::vector<double> fps_table_;
};

} // namespace kaas
