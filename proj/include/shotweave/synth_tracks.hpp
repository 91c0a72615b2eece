#pragma once

#include <cstdint>

#include "shotweave/transition.hpp"

namespace shotweave {

// Camera-induced motion of one clip as seen from the anchor keyframe.
// Clip A travels at `cruise_speed`, eases down to `ease_min_speed` over
// `ease_frames`, then sits still for `stall_frames` frames before the
// anchor. Clip B mirrors this: a stall right after the anchor, then an
// ease-in up to cruise speed. Speeds are pixels per frame.
struct ClipMotion {
    double angle_deg = 0;  // image coordinates: 0 = +x, 90 = +y (down)
    double cruise_speed = 3.0;
    double ease_min_speed = 2.0;
    int ease_frames = 0;
    int stall_frames = 0;
    int length = 48;
};

struct MotionProfile {
    ClipMotion clip_a;
    ClipMotion clip_b;
    int width = 1280;
    int height = 720;
    double fps = 24;
    double parallax = 0.2;        // per-point speed factor drawn from [1-p, 1+p]
    double noise = 0.05;          // uniform +/- pixels per coordinate
    double occlusion_rate = 0.0;  // chance a non-anchor sample is invisible
};

struct SynthGroundTruth {
    int stall_a = 0;
    int stall_b = 0;
    Vec2 velocity_a;  // per-frame camera velocity arriving at clip A's stall
    Vec2 velocity_b;  // per-frame camera velocity leaving clip B's stall
};

struct SynthResult {
    TrackSet tracks;
    SynthGroundTruth truth;
};

// Deterministic in (profile, n_points, seed). Anchor positions are drawn so
// every trajectory stays inside the frame; throws PreconditionError when the
// requested motion cannot fit.
SynthResult synth_tracks(const MotionProfile& profile, int n_points, std::uint64_t seed);

nlohmann::json to_json(const MotionProfile& profile);
MotionProfile motion_profile_from_json(const nlohmann::json& doc);

}  // namespace shotweave
