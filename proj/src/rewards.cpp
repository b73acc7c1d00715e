#include "kaas/rewards.hpp"

#include <charconv>
#include <cmath>

#include "kaas/errors.hpp"

namespace kaas {

const char* shape_name(RewardShape shape) {
    switch (shape) {
        case RewardShape::FpsStep: return "fps-step";
        case RewardShape::PsnrLow: return "psnr-low";
        case RewardShape::PsnrMid: return "psnr-mid";
        case RewardShape::PsnrHigh: return "psnr-high";
        case RewardShape::PowerLinear: return "power-linear";
    }
    return "?";
}

RewardShape shape_from_name(const std::string& name) {
    for (RewardShape s : {RewardShape::FpsStep, RewardShape::PsnrLow, RewardShape::PsnrMid,
                          RewardShape::PsnrHigh, RewardShape::PowerLinear})
        if (name == shape_name(s)) return s;
    throw InvalidInputError("unknown reward shape: " + name);
}

MetricId shape_metric(RewardShape shape) {
    switch (shape) {
        case RewardShape::FpsStep: return MetricId::ThroughputFps;
        case RewardShape::PsnrLow:
        case RewardShape::PsnrMid:
        case RewardShape::PsnrHigh: return MetricId::QualityPsnrDb;
        case RewardShape::PowerLinear: return MetricId::PowerWatts;
    }
    throw InvalidInputError("unknown reward shape");
}

namespace {

// Straight line over bins [from, to], inclusive anchors.
void fill_linear(std::vector<double>& t, std::size_t from, std::size_t to, double v_from,
                 double v_to) {
    for (std::size_t i = from; i <= to; ++i)
        t[i] = v_from + (v_to - v_from) * static_cast<double>(i - from) /
                            static_cast<double>(to - from);
}

std::vector<double> psnr_table(RewardShape shape) {
    // 14 bins; bins 0..2 sit below the 36 dB floor and are penalized hard
    // so no weighting can make sub-floor quality attractive.
    std::vector<double> t(14, -1.0);
    switch (shape) {
        case RewardShape::PsnrLow:
            fill_linear(t, 3, 13, 1.0, 0.1);
            break;
        case RewardShape::PsnrHigh:
            fill_linear(t, 3, 11, 0.1, 1.0);
            t[12] = t[13] = 1.0;
            break;
        case RewardShape::PsnrMid:
            fill_linear(t, 3, 6, 0.2, 1.0);
            t[7] = 1.0;
            fill_linear(t, 7, 13, 1.0, 0.2);
            break;
        default:
            throw InvalidInputError("not a PSNR shape");
    }
    return t;
}

} // namespace

std::vector<double> reward_table(RewardShape shape, const SubStateSpec& spec) {
    if (shape_metric(shape) != spec.metric_id)
        throw InvalidInputError(std::string(shape_name(shape)) + " does not apply to " +
                                metric_name(spec.metric_id));
    const std::size_t n = spec.bin_count();
    switch (shape) {
        case RewardShape::FpsStep:
            if (n != 4) throw InvalidInputError("fps-step is calibrated to 4 bins");
            return {-1.0, 0.6, 1.0, 0.7};
        case RewardShape::PsnrLow:
        case RewardShape::PsnrMid:
        case RewardShape::PsnrHigh:
            if (n != 14) throw InvalidInputError("PSNR shapes are calibrated to 14 bins");
            return psnr_table(shape);
        case RewardShape::PowerLinear: {
            if (n < 2) throw InvalidInputError("power-linear needs at least 2 bins");
            std::vector<double> t(n);
            fill_linear(t, 0, n - 1, 1.0, 0.0);
            return t;
        }
    }
    throw InvalidInputError("unknown reward shape");
}

void RewardRecipe::validate() const {
    if (name.empty()) throw InvalidInputError("reward recipe needs a name");
    auto check = [](const RewardTerm& term, MetricId want, const char* slot) {
        if (shape_metric(term.shape) != want)
            throw InvalidInputError(std::string(slot) + " term carries a " +
                                    shape_name(term.shape) + " shape");
        if (!std::isfinite(term.alpha) || term.alpha < 0.0)
            throw InvalidInputError(std::string(slot) + " weight must be finite and >= 0");
    };
    check(psnr, MetricId::QualityPsnrDb, "psnr");
    check(power, MetricId::PowerWatts, "power");
    check(fps, MetricId::ThroughputFps, "fps");
}

std::vector<RewardRecipe> builtin_recipes() {
    std::vector<RewardRecipe> r(4);
    r[0].name = "pi_R_hi";
    r[0].psnr = {RewardShape::PsnrLow, 0.7};
    r[0].power = {RewardShape::PowerLinear, 0.1};
    r[0].fps = {RewardShape::FpsStep, 0.5};
    r[1].name = "pi_P_hi";
    r[1].psnr = {RewardShape::PsnrHigh, 0.7};
    r[1].power = {RewardShape::PowerLinear, 0.0};
    r[1].fps = {RewardShape::FpsStep, 0.5};
    r[2].name = "pi_R_lo";
    r[2].psnr = {RewardShape::PsnrLow, 0.7};
    r[2].power = {RewardShape::PowerLinear, 0.5};
    r[2].fps = {RewardShape::FpsStep, 0.5};
    r[3].name = "pi_P_lo";
    r[3].psnr = {RewardShape::PsnrMid, 0.7};
    r[3].power = {RewardShape::PowerLinear, 0.5};
    r[3].fps = {RewardShape::FpsStep, 0.5};
    return r;
}

RewardRecipe recipe_by_name(const std::string& name) {
    for (const RewardRecipe& r : builtin_recipes())
        if (r.name == name) return r;
    throw KnowledgeMissError("no built-in reward recipe named " + name);
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

} // namespace

std::string recipe_key(const RewardRecipe& recipe) {
    recipe.validate();
    std::string key;
    for (const RewardTerm* t : {&recipe.psnr, &recipe.power, &recipe.fps}) {
        if (!key.empty()) key += '+';
        key += fmt_double(t->alpha);
        key += '*';
        key += shape_name(t->shape);
    }
    return key;
}

CompositeReward::CompositeReward(RewardRecipe recipe, const StateSpace& space)
    : recipe_(std::move(recipe)) {
    recipe_.validate();
    space.validate();
    psnr_table_ = reward_table(recipe_.psnr.shape, space.psnr);
    power_table_ = reward_table(recipe_.power.shape, space.power);
    fps_table_ = reward_table(recipe_.fps.shape, space.fps);
}

double CompositeReward::operator()(const State& s) const {
    return recipe_.psnr.alpha * psnr_table_.at(static_cast<std::size_t>(s.psnr_bin)) +
           recipe_.power.alpha * power_table_.at(static_cast<std::size_t>(s.power_bin)) +
           recipe_.fps.alpha * fps_table_.at(static_cast<std::size_t>(s.fps_bin));
}

double CompositeReward::sub_reward(MetricId metric, const State& s) const {
    switch (metric) {
        case MetricId::ThroughputFps: return fps_table_.at(static_cast<std::size_t>(s.fps_bin));
        case MetricId::QualityPsnrDb: return psnr_table_.at(static_cast<std::size_t>(s.psnr_bin));
        case MetricId::PowerWatts: return power_table_.at(static_cast<std::size_t>(s.power_bin));
    }
    throw InvalidInputError("unknown metric");
}

std::vector<LandscapeRow> reward_landscape(const RewardRecipe& recipe, const StateSpace& space,
                                           double threshold) {
    if (!std::isfinite(threshold)) throw InvalidInputError("threshold must be finite");
    CompositeReward r(recipe, space);
    std::vector<LandscapeRow> rows;
    rows.reserve(space.state_count());
    for (const State& s : enumerate_states(space)) {
        double v = r(s);
        rows.push_back({s, v, v >= threshold});
    }
    return rows;
}

} // namespace kaas
