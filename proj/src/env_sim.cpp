#include "kaas/env_sim.hpp"

#include <algorithm>
#include <cmath>

#include "kaas/errors.hpp"
#include "kaas/rng.hpp"

namespace kaas {

void PowerModelParams::validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0))
        throw InvalidInputError("power model constants must be >= 0");
}

void EnvModelParams::validate() const {
    power.validate();
    if (!(fps_gain > 0.0) || !(thread_exp > 0.0))
        throw InvalidInputError("fps model constants must be positive");
    if (!(psnr_slope > 0.0))
        throw InvalidInputError("psnr must decrease with QP");
    if (physical_cores < 1) throw InvalidInputError("machine needs at least one core");
}

double power_watts(double nth, double freq, const PowerModelParams& p) {
    // nth = 0 is the idle machine: only the baseline gamma draws.
    if (nth < 0.0) throw InvalidInputError("power model needs nth >= 0");
    return nth * (p.alpha * freq * freq + p.beta) + p.gamma;
}

double fps_model(double nth, double freq, double qp, double complexity,
                 double contention_factor, const EnvModelParams& m) {
    if (complexity <= 0.0) throw InvalidInputError("complexity must be positive");
    return m.fps_gain * freq * std::pow(nth, m.thread_exp) *
           (1.0 + m.qp_speedup * (qp - m.qp_ref)) / complexity * contention_factor;
}

double psnr_model(double qp, double psnr_offset, const EnvModelParams& m) {
    return m.psnr_base - m.psnr_slope * qp + psnr_offset;
}

double contention_factor(int total_threads, int physical_cores) {
    if (total_threads <= physical_cores) return 1.0;
    return static_cast<double>(physical_cores) / static_cast<double>(total_threads);
}

const Scene& VideoProfile::scene_at(int frame) const {
    if (frame < 0 || frame >= length_frames)
        throw InvalidInputError("frame index outside profile " + id);
    // Last scene whose start is <= frame.
    const Scene* cur = &scenes.front();
    for (const Scene& s : scenes) {
        if (s.start_frame > frame) break;
        cur = &s;
    }
    return *cur;
}

void VideoProfile::validate() const {
    if (id.empty() || length_frames <= 0 || scenes.empty())
        throw InvalidInputError("malformed video profile");
    if (scenes.front().start_frame != 0)
        throw InvalidInputError("profile " + id + ": scenes must cover frame 0");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const Scene& s = scenes[i];
        if (i > 0 && s.start_frame <= scenes[i - 1].start_frame)
            throw InvalidInputError("profile " + id + ": scene starts must ascend");
        if (s.start_frame >= length_frames)
            throw InvalidInputError("profile " + id + ": scene starts beyond the end");
        if (s.complexity < 0.5 || s.complexity > 2.0)
            throw InvalidInputError("profile " + id + ": complexity outside [0.5, 2.0]");
    }
    if (noise_sigma_fps < 0.0 || noise_sigma_psnr < 0.0)
        throw InvalidInputError("profile " + id + ": negative noise sigma");
}

namespace {

VideoProfile make_profile(const std::string& id,
                          std::initializer_list<Scene> scenes) {
    VideoProfile p;
    p.id = id;
    p.length_frames = 2500;
    p.scenes = scenes;
    p.noise_sigma_fps = 0.06;
    p.noise_sigma_psnr = 0.3;
    p.validate();
    return p;
}

} // namespace

std::vector<VideoProfile> catalog() {
    // Complexity steps are kept gentle (ratio <= ~1.35 between adjacent
    // scenes) so a tuned controller can ride through real-time; psnr
    // offsets swing low enough that quality margins pay off. v1 carries
    // the largest complexity spike of the validation set on purpose.
    std::vector<VideoProfile> c;
    c.push_back(make_profile("t1", {{0, 0.85, 0.0},
                                    {360, 0.70, -0.8},
                                    {720, 0.95, -1.6},
                                    {1080, 0.75, 0.0},
                                    {1440, 1.00, -0.6},
                                    {1800, 0.65, -1.2},
                                    {2160, 0.90, 0.0}}));
    c.push_back(make_profile("t2", {{0, 0.75, -0.5},
                                    {300, 0.95, 0.0},
                                    {660, 0.65, -1.5},
                                    {1020, 0.85, -0.3},
                                    {1380, 1.05, -0.9},
                                    {1740, 0.70, 0.0},
                                    {2100, 0.90, -1.8}}));
    c.push_back(make_profile("t3", {{0, 0.90, -1.0},
                                    {420, 0.70, 0.0},
                                    {780, 1.00, -0.4},
                                    {1140, 0.80, -1.7},
                                    {1500, 0.60, -0.2},
                                    {1860, 0.95, -1.1},
                                    {2220, 0.75, 0.0}}));
    c.push_back(make_profile("v1", {{0, 0.80, 0.0},
                                    {300, 1.20, -1.9},
                                    {600, 0.70, 0.3},
                                    {960, 1.05, -1.0},
                                    {1320, 0.85, -0.2},
                                    {1680, 1.15, -1.5},
                                    {2040, 0.75, 0.0},
                                    {2340, 0.95, -0.8}}));
    c.push_back(make_profile("v2", {{0, 0.85, -0.4},
                                    {480, 0.70, 0.2},
                                    {960, 0.95, -1.2},
                                    {1440, 0.80, -0.6},
                                    {1920, 0.90, 0.0}}));
    c.push_back(make_profile("v3", {{0, 0.75, -0.9},
                                    {420, 0.90, -0.1},
                                    {900, 0.70, -1.4},
                                    {1380, 0.95, -0.5},
                                    {1860, 0.80, 0.1}}));
    c.push_back(make_profile("v4", {{0, 0.70, -0.3},
                                    {540, 0.85, -1.1},
                                    {1080, 0.65, 0.1},
                                    {1620, 0.90, -0.7},
                                    {2100, 0.75, -1.5}}));
    return c;
}

const VideoProfile& profile_by_id(const std::string& id) {
    static const std::vector<VideoProfile> profiles = catalog();
    for (const VideoProfile& p : profiles)
        if (p.id == id) return p;
    throw InvalidInputError("no video profile named " + id);
}

EncodeSession::EncodeSession(VideoProfile profile, KnobSetting knobs, std::uint64_t seed,
                             std::uint64_t client_salt, double noise_scale)
    : profile_(std::move(profile)),
      knobs_(knobs),
      rng_(make_rng(seed, RngStream::EnvNoise, client_salt)),
      noise_scale_(noise_scale) {
    profile_.validate();
    if (noise_scale_ < 0.0) throw InvalidInputError("noise scale must be >= 0");
}

std::vector<VideoProfile> training_profiles() {
    std::vector<VideoProfile> out;
    for (const VideoProfile& p : catalog())
        if (p.id[0] == 't') out.push_back(p);
    return out;
}

std::vector<VideoProfile> validation_profiles() {
    std::vector<VideoProfile> out;
    for (const VideoProfile& p : catalog())
        if (p.id[0] == 'v') out.push_back(p);
    return out;
}

TrainingEnv::TrainingEnv(std::vector<VideoProfile> profiles, KnobLadder ladder,
                         EnvModelParams model, KnobSetting start_knobs, std::uint64_t seed,
                         double noise_scale)
    : profiles_(std::move(profiles)),
      ladder_(std::move(ladder)),
      model_(model),
      knobs_(start_knobs),
      seed_(seed),
      noise_scale_(noise_scale) {
    if (profiles_.empty()) throw InvalidInputError("training env needs at least one profile");
    ladder_.validate();
    model_.validate();
    if (!valid_for(knobs_, ladder_)) throw InvalidInputError("start knobs foreign to ladder");
}

void TrainingEnv::ensure_session() {
    if (!session_.empty() && !session_.front().finished()) return;
    session_.clear();
    session_.emplace_back(profiles_[next_profile_], knobs_, seed_, sessions_started_,
                          noise_scale_);
    next_profile_ = (next_profile_ + 1) % profiles_.size();
    ++sessions_started_;
}

Observation TrainingEnv::step() {
    ensure_session();
    session_.front().set_knobs(knobs_);
    ++interactions_;
    return session_.front().step_interval(ladder_, model_);
}

void TrainingEnv::apply(const Action& a) { knobs_ = apply_action(knobs_, a, ladder_); }

void TrainingEnv::teleport(const KnobSetting& k) {
    if (!valid_for(k, ladder_)) throw InvalidInputError("teleport target foreign to ladder");
    knobs_ = k;
}

Observation EncodeSession::step_interval(const KnobLadder& ladder, const EnvModelParams& m,
                                         double contention, int active_clients) {
    if (finished()) throw SessionFinishedError("profile " + profile_.id + " already encoded");
    if (!valid_for(knobs_, ladder)) throw InvalidInputError("session knobs foreign to ladder");
    if (!(contention > 0.0) || contention > 1.0)
        throw InvalidInputError("contention factor outside (0, 1]");
    if (active_clients < 1) throw InvalidInputError("active_clients must be >= 1");

    const Scene& scene = profile_.scene_at(frames_done_);
    const double nth = ladder.threads[static_cast<std::size_t>(knobs_.threads_idx)];
    const double freq = ladder.freq[static_cast<std::size_t>(knobs_.freq_idx)];
    const double qp = ladder.qp[static_cast<std::size_t>(knobs_.qp_idx)];

    Observation o;
    o.fps = fps_model(nth, freq, qp, scene.complexity, contention, m);
    o.psnr = psnr_model(qp, scene.psnr_offset, m);
    // Zero sigma must not touch the rng: deterministic configurations have
    // to consume no draws so seeded trajectories stay aligned.
    const double sf = profile_.noise_sigma_fps * noise_scale_;
    if (sf > 0.0) o.fps *= std::exp(std::normal_distribution<double>(0.0, sf)(rng_));
    const double sp = profile_.noise_sigma_psnr * noise_scale_;
    if (sp > 0.0) o.psnr += std::normal_distribution<double>(0.0, sp)(rng_);

    o.power = nth * (m.power.alpha * freq * freq + m.power.beta) +
              m.power.gamma / static_cast<double>(active_clients);
    o.interval_frames = std::min(kFramesPerInterval, profile_.length_frames - frames_done_);
    frames_done_ += o.interval_frames;
    return o;
}

State discretize(const Observation& obs, const StateSpace& space) {
    return discretize(obs.fps, obs.psnr, obs.power, space);
}

} // namespace kaas
