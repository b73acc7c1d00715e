#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kaas/mdp.hpp"

namespace kaas {

/// P = nth·(alpha·freq² + beta) + gamma. Calibrated so 12 threads at
/// 2.0 GHz draw exactly the machine's 125 W ceiling.
struct PowerModelParams {
    double alpha = 2.0;  // W/GHz² per thread
    double beta = 1.0;   // W per thread
    double gamma = 17.0; // machine idle baseline, W

    void validate() const;  // all >= 0
};

/// Full synthetic-transcoder calibration. The fps/psnr constants are fit to
/// the reference operating points; anyone changing them must re-check that
/// fit before trusting downstream results.
struct EnvModelParams {
    PowerModelParams power;
    double fps_gain = 4.0;
    double thread_exp = 0.85;  // sub-linear thread scaling
    double qp_speedup = 0.05;  // relative encode speed per QP step above qp_ref
    double qp_ref = 22.0;
    double psnr_base = 53.4;   // dB at QP 0
    double psnr_slope = 0.42;  // dB lost per QP step
    int physical_cores = 12;

    void validate() const;
};

double power_watts(double nth, double freq, const PowerModelParams& p);
/// Deterministic fps before noise; complexity c scales inverse-linearly.
double fps_model(double nth, double freq, double qp, double complexity,
                 double contention_factor, const EnvModelParams& m);
double psnr_model(double qp, double psnr_offset, const EnvModelParams& m);

/// fps multiplier when running clients demand total_threads of the
/// machine's cores: min(1, cores/total).
double contention_factor(int total_threads, int physical_cores);

/// One homogeneous stretch of video content.
struct Scene {
    int start_frame = 0;
    double complexity = 1.0;  // encode cost scale, within [0.5, 2.0]
    double psnr_offset = 0.0; // content-dependent quality shift, dB
};

struct VideoProfile {
    std::string id;
    int length_frames = 0;
    std::vector<Scene> scenes;      // ordered by start_frame, first at 0
    double noise_sigma_fps = 0.0;   // lognormal sigma on fps
    double noise_sigma_psnr = 0.0;  // gaussian sigma on psnr, dB

    const Scene& scene_at(int frame) const;
    void validate() const;
};

/// 3 training profiles (t1..t3) followed by 4 validation profiles (v1..v4).
std::vector<VideoProfile> catalog();
const VideoProfile& profile_by_id(const std::string& id);  // throws InvalidInputError

inline constexpr int kFramesPerInterval = 24;

/// What the controller sees after one control interval.
struct Observation {
    double fps = 0.0;
    double psnr = 0.0;   // dB
    double power = 0.0;  // this client's apportioned share, W
    int interval_frames = 0;
};

State discretize(const Observation& obs, const StateSpace& space);

/// One client's in-progress encode. Noise is drawn from the session's own
/// stream, so distinct sessions never perturb each other's sequences.
class EncodeSession {
public:
    EncodeSession(VideoProfile profile, KnobSetting knobs, std::uint64_t seed,
                  std::uint64_t client_salt = 0, double noise_scale = 1.0);

    /// Advances up to kFramesPerInterval frames and reports the interval's
    /// metrics. active_clients splits the idle baseline gamma; pass 1 when
    /// the client has the machine to itself. Throws SessionFinishedError
    /// once all frames are done.
    Observation step_interval(const KnobLadder& ladder, const EnvModelParams& m,
                              double contention = 1.0, int active_clients = 1);

    bool finished() const { return frames_done_ >= profile_.length_frames; }
    int frames_done() const { return frames_done_; }
    const VideoProfile& profile() const { return profile_; }
    const KnobSetting& knobs() const { return knobs_; }
    void set_knobs(const KnobSetting& k) { knobs_ = k; }

private:
    VideoProfile profile_;
    KnobSetting knobs_;
    std::mt19937_64 rng_;
    double noise_scale_;
    int frames_done_ = 0;
};

/// A single-client training rig: encodes the given profiles round-robin in
/// one endless stream, knobs persisting across video boundaries. Both the
/// transition recorder and online Q-Learning drive their environment
/// through this.
class TrainingEnv {
public:
    TrainingEnv(std::vector<VideoProfile> profiles, KnobLadder ladder, EnvModelParams model,
                KnobSetting start_knobs, std::uint64_t seed, double noise_scale = 1.0);

    /// Encodes one control interval at the current knobs (solo client, no
    /// contention) and counts one environment interaction.
    Observation step();
    void apply(const Action& a);
    /// Jumps straight to a knob setting without an action; exploration
    /// plumbing, not an MDP transition.
    void teleport(const KnobSetting& k);

    const KnobSetting& knobs() const { return knobs_; }
    const KnobLadder& ladder() const { return ladder_; }
    const EnvModelParams& model() const { return model_; }
    std::uint64_t interactions() const { return interactions_; }

private:
    void ensure_session();

    std::vector<VideoProfile> profiles_;
    KnobLadder ladder_;
    EnvModelParams model_;
    KnobSetting knobs_;
    std::uint64_t seed_;
    double noise_scale_;
    std::vector<EncodeSession> session_;  // 0 or 1 live session
    std::size_t next_profile_ = 0;
    std::uint64_t sessions_started_ = 0;
    std::uint64_t interactions_ = 0;
};

/// The three training profiles t1..t3 from the catalog.
std::vector<VideoProfile> training_profiles();
/// The four validation profiles v1..v4.
std::vector<VideoProfile> validation_profiles();

} // namespace kaas
