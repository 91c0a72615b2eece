#include "shotweave/transition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "shotweave/error.hpp"

namespace shotweave {

using nlohmann::json;

namespace {

std::string point_label(int id) { return "point " + std::to_string(id); }

// Anchor sample of a track, or nullptr when the point is occluded there.
const TrackSample* visible_anchor(const PointTrack& track) {
    const TrackSample* s = track.at(TrackSet::kAnchorFrame);
    return (s && s->visible) ? s : nullptr;
}

std::vector<TrackSample> parse_samples(const json& frames, int point_id) {
    std::vector<TrackSample> out;
    for (const auto& f : frames) {
        TrackSample s;
        s.frame = f.at("f").get<int>();
        s.x = f.at("x").get<double>();
        s.y = f.at("y").get<double>();
        s.visible = f.value("visible", true);
        if (!std::isfinite(s.x) || !std::isfinite(s.y)) {
            throw ValidationError("tracks: non-finite coordinate for " + point_label(point_id));
        }
        out.push_back(s);
    }
    return out;
}

double least_squares_slope(std::span<const double> frames, std::span<const double> values) {
    const double n = static_cast<double>(frames.size());
    double fm = 0, vm = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        fm += frames[i];
        vm += values[i];
    }
    fm /= n;
    vm /= n;
    double num = 0, den = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        num += (frames[i] - fm) * (values[i] - vm);
        den += (frames[i] - fm) * (frames[i] - fm);
    }
    return den > 0 ? num / den : 0.0;
}

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

}  // namespace

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

const TrackSample* PointTrack::at(int frame) const {
    const auto it = std::ranges::lower_bound(samples, frame, {}, &TrackSample::frame);
    return (it != samples.end() && it->frame == frame) ? &*it : nullptr;
}

void validate_trackset(const TrackSet& ts) {
    if (ts.width <= 0 || ts.height <= 0) {
        throw ValidationError("tracks: width and height must be positive");
    }
    if (!(ts.fps > 0)) {
        throw ValidationError("tracks: fps must be positive");
    }
    if (ts.clip_a_len < 1 || ts.clip_b_len < 1) {
        throw ValidationError("tracks: clip lengths must be positive");
    }
    std::set<int> ids;
    for (const auto& track : ts.tracks) {
        if (!ids.insert(track.point_id).second) {
            throw ValidationError("tracks: duplicate " + point_label(track.point_id));
        }
        for (std::size_t i = 1; i < track.samples.size(); ++i) {
            if (track.samples[i].frame <= track.samples[i - 1].frame) {
                throw ValidationError("tracks: frames of " + point_label(track.point_id) +
                                      " are not strictly increasing");
            }
        }
        if (!track.at(TrackSet::kAnchorFrame)) {
            throw ValidationError("tracks: " + point_label(track.point_id) + " has no anchor sample at frame 0");
        }
        for (const auto& s : track.samples) {
            if (s.frame < -(ts.clip_a_len - 1) || s.frame > ts.clip_b_len - 1) {
                throw ValidationError("tracks: frame " + std::to_string(s.frame) + " of " +
                                      point_label(track.point_id) + " is outside the clips");
            }
            if (s.visible && (s.x < 0 || s.x > ts.width || s.y < 0 || s.y > ts.height)) {
                throw ValidationError("tracks: " + point_label(track.point_id) + " at frame " +
                                      std::to_string(s.frame) + " lies outside the frame bounds");
            }
        }
    }
}

TrackSet ingest_tracks(const json& doc) {
    TrackSet ts;
    try {
        ts.width = doc.at("width").get<int>();
        ts.height = doc.at("height").get<int>();
        ts.fps = doc.value("fps", 24.0);
        int min_frame = 0, max_frame = 0;
        for (const auto& p : doc.at("points")) {
            PointTrack track;
            track.point_id = p.at("id").get<int>();
            track.samples = parse_samples(p.at("frames"), track.point_id);
            for (const auto& s : track.samples) {
                min_frame = std::min(min_frame, s.frame);
                max_frame = std::max(max_frame, s.frame);
            }
            ts.tracks.push_back(std::move(track));
        }
        ts.clip_a_len = doc.contains("clip_a_len") ? doc.at("clip_a_len").get<int>() : 1 - min_frame;
        ts.clip_b_len = doc.contains("clip_b_len") ? doc.at("clip_b_len").get<int>() : 1 + max_frame;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("tracks: ") + e.what());
    }
    validate_trackset(ts);
    return ts;
}

json to_json(const TrackSet& ts) {
    json points = json::array();
    for (const auto& t : ts.tracks) {
        json frames = json::array();
        for (const auto& s : t.samples) {
            frames.push_back({{"f", s.frame}, {"x", s.x}, {"y", s.y}, {"visible", s.visible}});
        }
        points.push_back({{"id", t.point_id}, {"frames", std::move(frames)}});
    }
    return json{{"width", ts.width},         {"height", ts.height},         {"fps", ts.fps},
                {"clip_a_len", ts.clip_a_len}, {"clip_b_len", ts.clip_b_len}, {"points", std::move(points)}};
}

MergeResult merge_bidirectional(const RawTrackSet& back, const RawTrackSet& fwd, double anchor_tolerance) {
    if (back.width != fwd.width || back.height != fwd.height) {
        throw ValidationError("merge: backward and forward passes disagree on frame size");
    }
    MergeResult out;
    out.tracks.width = fwd.width;
    out.tracks.height = fwd.height;
    out.tracks.fps = fwd.fps;
    out.tracks.clip_a_len = back.clip_len;
    out.tracks.clip_b_len = fwd.clip_len;

    std::map<int, const PointTrack*> fwd_by_id;
    for (const auto& t : fwd.tracks) {
        fwd_by_id.emplace(t.point_id, &t);
    }
    std::set<int> back_ids;
    for (const auto& bt : back.tracks) {
        back_ids.insert(bt.point_id);
        const auto it = fwd_by_id.find(bt.point_id);
        if (it == fwd_by_id.end()) {
            out.warnings.push_back(point_label(bt.point_id) + " tracked backward only; dropped");
            continue;
        }
        const PointTrack& ft = *it->second;
        const TrackSample* ba = bt.at(0);
        const TrackSample* fa = ft.at(0);
        if (!ba || !fa) {
            throw ValidationError("merge: " + point_label(bt.point_id) + " lacks an anchor query sample");
        }
        if (ba->visible && fa->visible && norm(Vec2{ba->x - fa->x, ba->y - fa->y}) > anchor_tolerance) {
            throw ValidationError("merge: anchor positions of " + point_label(bt.point_id) + " differ by more than " +
                                  std::to_string(anchor_tolerance) + " px between directions");
        }

        PointTrack merged;
        merged.point_id = bt.point_id;
        for (auto s = bt.samples.rbegin(); s != bt.samples.rend(); ++s) {
            if (s->frame > 0) {
                TrackSample m = *s;
                m.frame = -s->frame;
                merged.samples.push_back(m);
            }
        }
        for (const auto& s : ft.samples) {
            if (s.frame >= 0) {
                merged.samples.push_back(s);
            }
        }
        out.tracks.tracks.push_back(std::move(merged));
    }
    for (const auto& [id, _] : fwd_by_id) {
        if (!back_ids.contains(id)) {
            out.warnings.push_back(point_label(id) + " tracked forward only; dropped");
        }
    }
    validate_trackset(out.tracks);
    return out;
}

RawTrackSet split_backward(const TrackSet& ts) {
    RawTrackSet raw{ts.width, ts.height, ts.fps, ts.clip_a_len, {}};
    for (const auto& t : ts.tracks) {
        PointTrack r{t.point_id, {}};
        for (auto s = t.samples.rbegin(); s != t.samples.rend(); ++s) {
            if (s->frame <= 0) {
                TrackSample m = *s;
                m.frame = -s->frame;
                r.samples.push_back(m);
            }
        }
        raw.tracks.push_back(std::move(r));
    }
    return raw;
}

RawTrackSet split_forward(const TrackSet& ts) {
    RawTrackSet raw{ts.width, ts.height, ts.fps, ts.clip_b_len, {}};
    for (const auto& t : ts.tracks) {
        PointTrack r{t.point_id, {}};
        for (const auto& s : t.samples) {
            if (s.frame >= 0) {
                r.samples.push_back(s);
            }
        }
        raw.tracks.push_back(std::move(r));
    }
    return raw;
}

void TransitionParams::validate() const {
    if (window < 1 || window > kMaxTruncationWindow) {
        throw ValidationError("transition params: window must be in [1, 30]");
    }
    if (!(tau > 0)) {
        throw ValidationError("transition params: tau must be positive");
    }
    if (k_fit < 2) {
        throw ValidationError("transition params: k_fit must be >= 2");
    }
    if (T < 2) {
        throw ValidationError("transition params: T must be >= 2");
    }
    if (K < 1) {
        throw ValidationError("transition params: K must be >= 1");
    }
}

json to_json(const TransitionParams& p) {
    return json{{"window", p.window}, {"tau", p.tau}, {"k_fit", p.k_fit}, {"T", p.T}, {"K", p.K}};
}

TransitionParams transition_params_from_json(const json& doc) {
    TransitionParams p;
    p.window = doc.value("window", p.window);
    p.tau = doc.value("tau", p.tau);
    p.k_fit = doc.value("k_fit", p.k_fit);
    p.T = doc.value("T", p.T);
    p.K = doc.value("K", p.K);
    p.validate();
    return p;
}

double median_displacement(const TrackSet& ts, int frame) {
    std::vector<double> d;
    d.reserve(ts.tracks.size());
    for (const auto& t : ts.tracks) {
        const TrackSample* a = visible_anchor(t);
        const TrackSample* s = t.at(frame);
        if (a && s && s->visible) {
            d.push_back(norm(Vec2{s->x - a->x, s->y - a->y}));
        }
    }
    if (d.empty()) {
        throw PreconditionError("truncation: no visible points at frame " + std::to_string(frame));
    }
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    const double upper = d[mid];
    if (d.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

Cuts detect_truncation(const TrackSet& ts, const TransitionParams& params) {
    params.validate();
    if (params.window > std::min(ts.clip_a_len - 1, ts.clip_b_len - 1)) {
        throw PreconditionError("truncation: window " + std::to_string(params.window) +
                                " exceeds the clip lengths (" + std::to_string(ts.clip_a_len) + ", " +
                                std::to_string(ts.clip_b_len) + ")");
    }
    Cuts cuts;
    auto scan = [&](int direction, const char* side) {
        for (int k = 1; k <= params.window; ++k) {
            if (median_displacement(ts, direction * k) >= params.tau) {
                return k - 1;
            }
        }
        cuts.warnings.push_back(std::string("clip ") + side + ": all " + std::to_string(params.window) +
                                " window frames frozen; truncated the full window");
        return params.window;
    };
    cuts.cut_a = scan(-1, "A");
    cuts.cut_b = scan(+1, "B");
    return cuts;
}

BoundaryEstimate estimate_boundary_state(const TrackSet& ts, Side side, const Cuts& cuts,
                                         const TransitionParams& params) {
    params.validate();
    const bool is_a = side == Side::A;
    const int boundary = is_a ? -cuts.cut_a : cuts.cut_b;
    const char* side_name = is_a ? "A" : "B";
    BoundaryEstimate out;
    for (const auto& t : ts.tracks) {
        if (!visible_anchor(t)) {
            continue;
        }
        const TrackSample* at_boundary = t.at(boundary);
        if (!at_boundary || !at_boundary->visible) {
            out.warnings.push_back(point_label(t.point_id) + " not visible at the clip " + side_name +
                                   " boundary; excluded");
            continue;
        }
        // Nearest k_fit visible samples on the far side of the boundary.
        std::vector<double> frames, xs, ys;
        auto take = [&](const TrackSample& s) {
            if (s.visible && static_cast<int>(frames.size()) < params.k_fit) {
                frames.push_back(s.frame);
                xs.push_back(s.x);
                ys.push_back(s.y);
            }
        };
        if (is_a) {
            for (auto s = t.samples.rbegin(); s != t.samples.rend(); ++s) {
                if (s->frame <= boundary) {
                    take(*s);
                }
            }
        } else {
            for (const auto& s : t.samples) {
                if (s.frame >= boundary) {
                    take(s);
                }
            }
        }
        if (static_cast<int>(frames.size()) < params.k_fit) {
            out.warnings.push_back(point_label(t.point_id) + " has fewer than " + std::to_string(params.k_fit) +
                                   " visible samples in clip " + side_name + "; excluded");
            continue;
        }
        const Vec2 per_frame{least_squares_slope(frames, xs), least_squares_slope(frames, ys)};
        out.states.emplace(t.point_id,
                           BoundaryState{Vec2{at_boundary->x, at_boundary->y}, static_cast<double>(params.T) * per_frame});
    }
    return out;
}

HermiteSegment HermiteSegment::from_states(const BoundaryState& s0, const BoundaryState& s1) {
    HermiteSegment h;
    h.a = 2.0 * s0.p + s0.v - 2.0 * s1.p + s1.v;
    h.b = -3.0 * s0.p - 2.0 * s0.v + 3.0 * s1.p - s1.v;
    h.c = s0.v;
    h.d = s0.p;
    return h;
}

Vec2 HermiteSegment::position(double t) const { return t * (t * (t * a + b) + c) + d; }

Vec2 HermiteSegment::velocity(double t) const { return t * (3.0 * t * a + 2.0 * b) + c; }

Vec2 hermite_position(const BoundaryState& s0, const BoundaryState& s1, double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw PreconditionError("hermite_position: t must lie in [0, 1]");
    }
    return HermiteSegment::from_states(s0, s1).position(t);
}

std::vector<std::size_t> farthest_point_order(std::span<const Vec2> points, std::size_t k) {
    std::vector<std::size_t> order;
    if (points.empty() || k == 0) {
        return order;
    }
    k = std::min(k, points.size());
    std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
    std::vector<bool> taken(points.size(), false);
    std::size_t current = 0;
    for (;;) {
        order.push_back(current);
        taken[current] = true;
        if (order.size() == k) {
            break;
        }
        std::size_t best = points.size();
        double best_d = -1;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (taken[i]) {
                continue;
            }
            nearest[i] = std::min(nearest[i], norm(points[i] - points[current]));
            if (nearest[i] > best_d) {
                best_d = nearest[i];
                best = i;
            }
        }
        current = best;
    }
    return order;
}

ControlField build_control_field(std::vector<PointStates> states, int width, int height,
                                 const TransitionParams& params) {
    params.validate();
    if (states.empty()) {
        throw PreconditionError("control field: no points with both boundary states");
    }
    std::ranges::sort(states, {}, &PointStates::point_id);
    std::vector<Vec2> anchors;
    anchors.reserve(states.size());
    for (const auto& s : states) {
        anchors.push_back(s.anchor);
    }

    ControlField field;
    field.T = params.T;
    field.width = width;
    field.height = height;
    for (std::size_t idx : farthest_point_order(anchors, static_cast<std::size_t>(params.K))) {
        const PointStates& ps = states[idx];
        const HermiteSegment path = HermiteSegment::from_states(ps.start, ps.end);
        Trajectory traj{ps.point_id, {}};
        traj.points.reserve(static_cast<std::size_t>(params.T));
        bool clamped = false;
        for (int i = 0; i < params.T; ++i) {
            const double t = static_cast<double>(i) / (params.T - 1);
            Vec2 p = path.position(t);
            const Vec2 c{std::clamp(p.x, 0.0, static_cast<double>(width)),
                         std::clamp(p.y, 0.0, static_cast<double>(height))};
            clamped = clamped || !(c == p);
            traj.points.push_back(c);
        }
        if (clamped) {
            field.warnings.push_back(point_label(ps.point_id) + " path left the frame; clamped to bounds");
        }
        field.trajectories.push_back(std::move(traj));
    }
    return field;
}

json to_json(const ControlField& field) {
    json trajectories = json::array();
    for (const auto& t : field.trajectories) {
        json pts = json::array();
        for (std::size_t i = 0; i < t.points.size(); ++i) {
            pts.push_back({{"frame", i}, {"x", t.points[i].x}, {"y", t.points[i].y}});
        }
        trajectories.push_back({{"point_id", t.point_id}, {"points", std::move(pts)}});
    }
    return json{{"T", field.T},
                {"width", field.width},
                {"height", field.height},
                {"trajectories", std::move(trajectories)},
                {"warnings", field.warnings}};
}

ControlField control_field_from_json(const json& doc) {
    ControlField f;
    try {
        f.T = doc.at("T").get<int>();
        f.width = doc.at("width").get<int>();
        f.height = doc.at("height").get<int>();
        for (const auto& t : doc.at("trajectories")) {
            Trajectory traj{t.at("point_id").get<int>(), {}};
            for (const auto& p : t.at("points")) {
                traj.points.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
            }
            if (static_cast<int>(traj.points.size()) != f.T) {
                throw ValidationError("control field: trajectory length differs from T");
            }
            f.trajectories.push_back(std::move(traj));
        }
        f.warnings = doc.value("warnings", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw ValidationError(std::string("control field: ") + e.what());
    }
    return f;
}

TransitionPlan plan_transition(const TrackSet& ts, const TransitionParams& params) {
    params.validate();
    validate_trackset(ts);
    TransitionPlan plan;
    plan.params = params;
    plan.clip_a_len = ts.clip_a_len;
    plan.clip_b_len = ts.clip_b_len;

    Cuts cuts = detect_truncation(ts, params);
    plan.cut_a = cuts.cut_a;
    plan.cut_b = cuts.cut_b;
    plan.warnings = cuts.warnings;

    for (const auto& t : ts.tracks) {
        if (!visible_anchor(t)) {
            plan.warnings.push_back(point_label(t.point_id) + " occluded at the anchor; dropped");
        }
    }
    BoundaryEstimate a = estimate_boundary_state(ts, Side::A, cuts, params);
    BoundaryEstimate b = estimate_boundary_state(ts, Side::B, cuts, params);
    plan.warnings.insert(plan.warnings.end(), a.warnings.begin(), a.warnings.end());
    plan.warnings.insert(plan.warnings.end(), b.warnings.begin(), b.warnings.end());

    for (const auto& t : ts.tracks) {
        const auto sa = a.states.find(t.point_id);
        const auto sb = b.states.find(t.point_id);
        if (sa == a.states.end() || sb == b.states.end()) {
            continue;
        }
        const TrackSample* anchor = t.at(TrackSet::kAnchorFrame);
        plan.states.push_back({t.point_id, Vec2{anchor->x, anchor->y}, sa->second, sb->second});
    }
    plan.field = build_control_field(plan.states, ts.width, ts.height, params);
    plan.warnings.insert(plan.warnings.end(), plan.field.warnings.begin(), plan.field.warnings.end());
    return plan;
}

json to_json(const TransitionPlan& plan) {
    json states = json::array();
    for (const auto& s : plan.states) {
        states.push_back({{"point_id", s.point_id},
                          {"anchor", vec_json(s.anchor)},
                          {"p0", vec_json(s.start.p)},
                          {"v0", vec_json(s.start.v)},
                          {"p1", vec_json(s.end.p)},
                          {"v1", vec_json(s.end.v)}});
    }
    return json{{"cut_a", plan.cut_a},           {"cut_b", plan.cut_b},   {"clip_a_len", plan.clip_a_len},
                {"clip_b_len", plan.clip_b_len}, {"params", to_json(plan.params)}, {"states", std::move(states)},
                {"field", to_json(plan.field)},  {"warnings", plan.warnings}};
}

CutList stitch_sequence(const std::vector<ClipSpan>& clips, const std::vector<TransitionPlan>& plans,
                        const std::vector<ClipSpan>& transitions) {
    if (clips.empty()) {
        throw PreconditionError("stitch: no clips");
    }
    if (plans.size() + 1 != clips.size() || transitions.size() != plans.size()) {
        throw ValidationError("stitch: need one plan and one transition clip per adjacent clip pair");
    }
    const bool pairwise = clips.size() == 2;
    CutList out;
    int rec = 0;
    auto emit = [&](std::string source, const std::string& ref, int in, int out_frame) {
        if (out_frame < in) {
            throw ValidationError("stitch: " + source + " has no frames left after truncation");
        }
        out.entries.push_back({std::move(source), ref, in, out_frame, rec, rec + out_frame - in});
        rec += out_frame - in + 1;
    };
    for (std::size_t i = 0; i < clips.size(); ++i) {
        const ClipSpan& clip = clips[i];
        int in = 0;
        int out_frame = clip.frames - 1;
        if (i > 0) {
            const TransitionPlan& prev = plans[i - 1];
            if (clip.frames != prev.clip_b_len) {
                throw ValidationError("stitch: clip " + std::to_string(i) + " has " + std::to_string(clip.frames) +
                                      " frames but the plan expects " + std::to_string(prev.clip_b_len));
            }
            in = prev.cut_b;
        }
        if (i + 1 < clips.size()) {
            const TransitionPlan& next = plans[i];
            if (clip.frames != next.clip_a_len) {
                throw ValidationError("stitch: clip " + std::to_string(i) + " has " + std::to_string(clip.frames) +
                                      " frames but the plan expects " + std::to_string(next.clip_a_len));
            }
            out_frame = clip.frames - 1 - next.cut_a;
        }
        emit(pairwise ? (i == 0 ? "clip_a" : "clip_b") : "clip_" + std::to_string(i), clip.ref, in, out_frame);
        if (i + 1 < clips.size()) {
            const ClipSpan& tr = transitions[i];
            if (tr.frames != plans[i].params.T) {
                throw ValidationError("stitch: transition clip has " + std::to_string(tr.frames) +
                                      " frames, expected T = " + std::to_string(plans[i].params.T));
            }
            emit(pairwise ? "transition" : "transition_" + std::to_string(i), tr.ref, 0, tr.frames - 1);
        }
    }
    out.total_frames = rec;
    return out;
}

CutList stitch_timeline(const TransitionPlan& plan, const ClipSpan& clip_a, const ClipSpan& transition,
                        const ClipSpan& clip_b) {
    return stitch_sequence({clip_a, clip_b}, {plan}, {transition});
}

json to_json(const CutList& cuts) {
    json entries = json::array();
    for (const auto& e : cuts.entries) {
        entries.push_back({{"source", e.source},
                           {"ref", e.ref},
                           {"src_in", e.src_in},
                           {"src_out", e.src_out},
                           {"rec_in", e.rec_in},
                           {"rec_out", e.rec_out}});
    }
    return json{{"total_frames", cuts.total_frames}, {"entries", std::move(entries)}};
}

}  // namespace shotweave
