#include "shotweave/synth_tracks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shotweave/error.hpp"
#include "shotweave/rng.hpp"

namespace shotweave {

using nlohmann::json;

namespace {

Vec2 direction(double angle_deg) {
    const double r = angle_deg * std::numbers::pi / 180.0;
    return {std::cos(r), std::sin(r)};
}

double speed_at(const ClipMotion& m, int step) {
    if (m.ease_frames <= 0 || step > m.ease_frames) {
        return m.cruise_speed;
    }
    return m.ease_min_speed + (m.cruise_speed - m.ease_min_speed) * (step - 1) / m.ease_frames;
}

// Camera displacement relative to the anchor at each merged frame of one
// clip. Index k holds the displacement k frames away from the anchor.
std::vector<Vec2> displacement_curve(const ClipMotion& m, double sign) {
    const Vec2 dir = direction(m.angle_deg);
    std::vector<Vec2> d(static_cast<std::size_t>(m.length), Vec2{});
    double travelled = 0;
    for (int k = m.stall_frames + 1; k < m.length; ++k) {
        travelled += speed_at(m, k - m.stall_frames);
        d[static_cast<std::size_t>(k)] = (sign * travelled) * dir;
    }
    return d;
}

json motion_json(const ClipMotion& m) {
    return json{{"angle_deg", m.angle_deg},       {"cruise_speed", m.cruise_speed}, {"ease_min_speed", m.ease_min_speed},
                {"ease_frames", m.ease_frames},   {"stall_frames", m.stall_frames}, {"length", m.length}};
}

ClipMotion motion_from_json(const json& doc) {
    ClipMotion m;
    m.angle_deg = doc.value("angle_deg", m.angle_deg);
    m.cruise_speed = doc.value("cruise_speed", m.cruise_speed);
    m.ease_min_speed = doc.value("ease_min_speed", m.ease_min_speed);
    m.ease_frames = doc.value("ease_frames", m.ease_frames);
    m.stall_frames = doc.value("stall_frames", m.stall_frames);
    m.length = doc.value("length", m.length);
    return m;
}

}  // namespace

SynthResult synth_tracks(const MotionProfile& profile, int n_points, std::uint64_t seed) {
    const ClipMotion& ma = profile.clip_a;
    const ClipMotion& mb = profile.clip_b;
    if (ma.length < 2 || mb.length < 2) {
        throw PreconditionError("synth_tracks: each clip needs at least two frames");
    }
    if (n_points < 1) {
        throw PreconditionError("synth_tracks: need at least one point");
    }

    // Clip A moves toward its stall, so looking back from the anchor the
    // displacement points against the direction of travel.
    const std::vector<Vec2> disp_a = displacement_curve(ma, -1.0);
    const std::vector<Vec2> disp_b = displacement_curve(mb, +1.0);

    const double max_scale = 1.0 + profile.parallax;
    double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
    for (const auto* curve : {&disp_a, &disp_b}) {
        for (const Vec2& d : *curve) {
            lo_x = std::min(lo_x, max_scale * d.x);
            hi_x = std::max(hi_x, max_scale * d.x);
            lo_y = std::min(lo_y, max_scale * d.y);
            hi_y = std::max(hi_y, max_scale * d.y);
        }
    }
    const double margin = profile.noise + 1e-6;
    const double x0 = -lo_x + margin, x1 = profile.width - hi_x - margin;
    const double y0 = -lo_y + margin, y1 = profile.height - hi_y - margin;
    if (x0 > x1 || y0 > y1) {
        throw PreconditionError("synth_tracks: motion does not fit inside the frame");
    }

    Rng rng(seed);
    SynthResult out;
    TrackSet& ts = out.tracks;
    ts.width = profile.width;
    ts.height = profile.height;
    ts.fps = profile.fps;
    ts.clip_a_len = ma.length;
    ts.clip_b_len = mb.length;
    for (int id = 0; id < n_points; ++id) {
        const Vec2 anchor{rng.uniform(x0, x1), rng.uniform(y0, y1)};
        const double scale = rng.uniform(1.0 - profile.parallax, 1.0 + profile.parallax);
        PointTrack track{id, {}};
        track.samples.reserve(static_cast<std::size_t>(ma.length + mb.length - 1));
        for (int f = -(ma.length - 1); f < mb.length; ++f) {
            const Vec2 d = f <= 0 ? disp_a[static_cast<std::size_t>(-f)] : disp_b[static_cast<std::size_t>(f)];
            Vec2 p = anchor + scale * d;
            p.x = std::clamp(p.x + rng.uniform(-profile.noise, profile.noise), 0.0, static_cast<double>(profile.width));
            p.y = std::clamp(p.y + rng.uniform(-profile.noise, profile.noise), 0.0, static_cast<double>(profile.height));
            const bool visible = f == 0 || rng.unit() >= profile.occlusion_rate;
            track.samples.push_back({f, p.x, p.y, visible});
        }
        ts.tracks.push_back(std::move(track));
    }

    out.truth.stall_a = ma.stall_frames;
    out.truth.stall_b = mb.stall_frames;
    out.truth.velocity_a = speed_at(ma, 1) * direction(ma.angle_deg);
    out.truth.velocity_b = speed_at(mb, 1) * direction(mb.angle_deg);
    return out;
}

json to_json(const MotionProfile& p) {
    return json{{"clip_a", motion_json(p.clip_a)}, {"clip_b", motion_json(p.clip_b)}, {"width", p.width},
                {"height", p.height},              {"fps", p.fps},                     {"parallax", p.parallax},
                {"noise", p.noise},                {"occlusion_rate", p.occlusion_rate}};
}

MotionProfile motion_profile_from_json(const json& doc) {
    MotionProfile p;
    if (doc.contains("clip_a")) p.clip_a = motion_from_json(doc.at("clip_a"));
    if (doc.contains("clip_b")) p.clip_b = motion_from_json(doc.at("clip_b"));
    p.width = doc.value("width", p.width);
    p.height = doc.value("height", p.height);
    p.fps = doc.value("fps", p.fps);
    p.parallax = doc.value("parallax", p.parallax);
    p.noise = doc.value("noise", p.noise);
    p.occlusion_rate = doc.value("occlusion_rate", p.occlusion_rate);
    return p;
}

}  // namespace shotweave
