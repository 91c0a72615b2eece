#pragma once

// Trajectory-guided transitions between two generated clips that share a
// keyframe. Point tracks from both clips are placed on one merged timeline
// whose frame 0 is the shared keyframe (the anchor): clip A occupies frames
// -(clip_a_len-1)..0 and clip B frames 0..clip_b_len-1.
//
// A transition is planned in four steps:
//   1. detect_truncation: starting next to the anchor, count the frames whose
//      median displacement from the anchor stays below `tau`; those frozen
//      frames are cut (at most `window` per side).
//   2. estimate_boundary_state: at the new boundary frames, take each point's
//      position and a least-squares velocity over `k_fit` samples.
//   3. a cubic Hermite path between the two boundary states per point.
//   4. build_control_field: sample K well-spread points' paths at T frames.
//
// Velocities handed to the Hermite path are in pixels per unit of the
// normalised transition time t in [0, 1]: per-frame velocity times T.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace shotweave {

struct Vec2 {
    double x = 0;
    double y = 0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

double norm(Vec2 v);

struct TrackSample {
    int frame = 0;
    double x = 0;
    double y = 0;
    bool visible = true;

    friend bool operator==(const TrackSample&, const TrackSample&) = default;
};

struct PointTrack {
    int point_id = 0;
    std::vector<TrackSample> samples;  // strictly increasing frames

    const TrackSample* at(int frame) const;
};

struct TrackSet {
    static constexpr int kAnchorFrame = 0;

    int width = 0;
    int height = 0;
    double fps = 24;
    int clip_a_len = 0;
    int clip_b_len = 0;
    std::vector<PointTrack> tracks;
};

// Raw single-direction tracker output. Frame 0 is the anchor; positive
// frames count away from it (into the reversed clip A, or into clip B).
struct RawTrackSet {
    int width = 0;
    int height = 0;
    double fps = 24;
    int clip_len = 0;
    std::vector<PointTrack> tracks;
};

// Throws ValidationError: anchor sample missing, coordinates out of bounds
// while visible, frames not strictly increasing or outside the clip range.
void validate_trackset(const TrackSet& tracks);

// Document: {width, height, fps, clip_a_len?, clip_b_len?,
//            points: [{id, frames: [{f, x, y, visible?}]}]}
// Omitted clip lengths are inferred from the frame range.
TrackSet ingest_tracks(const nlohmann::json& doc);
nlohmann::json to_json(const TrackSet& tracks);

struct MergeResult {
    TrackSet tracks;
    std::vector<std::string> warnings;
};

// Undoes the reversal of the backward pass (local frame k -> merged -k) and
// joins each id's halves at the single shared anchor sample. Ids seen in one
// direction only are dropped with a warning; anchor positions that disagree
// by more than `anchor_tolerance` pixels raise ValidationError.
MergeResult merge_bidirectional(const RawTrackSet& back, const RawTrackSet& fwd, double anchor_tolerance = 1.0);

// Inverse views of a merged set, used by trackers that emit merged data and
// by round-trip checks.
RawTrackSet split_backward(const TrackSet& tracks);
RawTrackSet split_forward(const TrackSet& tracks);

inline constexpr int kMaxTruncationWindow = 30;

struct TransitionParams {
    int window = kMaxTruncationWindow;  // frames scanned per side, 1..30
    double tau = 1.0;                   // frozen-motion threshold in pixels
    int k_fit = 5;                      // samples in the velocity fit
    int T = 16;                         // transition frame count
    int K = 16;                         // control points emitted

    void validate() const;
};

nlohmann::json to_json(const TransitionParams& params);
// Missing keys keep their defaults.
TransitionParams transition_params_from_json(const nlohmann::json& doc);

enum class Side { A, B };

struct Cuts {
    int cut_a = 0;  // frames removed from the end of clip A
    int cut_b = 0;  // frames removed from the start of clip B
    std::vector<std::string> warnings;
};

// Median over anchor-visible points visible at `frame` of the distance from
// their anchor position. Throws PreconditionError if no point qualifies.
double median_displacement(const TrackSet& tracks, int frame);

Cuts detect_truncation(const TrackSet& tracks, const TransitionParams& params);

struct BoundaryState {
    Vec2 p;  // pixels
    Vec2 v;  // pixels per unit normalised time
};

struct BoundaryEstimate {
    std::map<int, BoundaryState> states;  // by point id
    std::vector<std::string> warnings;
};

BoundaryEstimate estimate_boundary_state(const TrackSet& tracks, Side side, const Cuts& cuts,
                                         const TransitionParams& params);

// Cubic P(t) = a t^3 + b t^2 + c t + d with P(0)=p0, P'(0)=v0, P(1)=p1, P'(1)=v1.
struct HermiteSegment {
    Vec2 a, b, c, d;

    static HermiteSegment from_states(const BoundaryState& start, const BoundaryState& end);
    // Polynomial evaluation; defined for any t.
    Vec2 position(double t) const;
    Vec2 velocity(double t) const;
};

// Throws PreconditionError if t is outside [0, 1].
Vec2 hermite_position(const BoundaryState& start, const BoundaryState& end, double t);

struct PointStates {
    int point_id = 0;
    Vec2 anchor;
    BoundaryState start;  // end of clip A
    BoundaryState end;    // start of clip B
};

struct Trajectory {
    int point_id = 0;
    std::vector<Vec2> points;  // one per transition frame
};

struct ControlField {
    int T = 0;
    int width = 0;
    int height = 0;
    std::vector<Trajectory> trajectories;
    std::vector<std::string> warnings;
};

// Indices of up to k points chosen by farthest-point sampling, starting
// from index 0; ties go to the lower index.
std::vector<std::size_t> farthest_point_order(std::span<const Vec2> points, std::size_t k);

// Points are ordered by id before sampling.
ControlField build_control_field(std::vector<PointStates> states, int width, int height,
                                 const TransitionParams& params);

nlohmann::json to_json(const ControlField& field);
ControlField control_field_from_json(const nlohmann::json& doc);

struct TransitionPlan {
    int cut_a = 0;
    int cut_b = 0;
    int clip_a_len = 0;
    int clip_b_len = 0;
    TransitionParams params;
    std::vector<PointStates> states;
    ControlField field;
    std::vector<std::string> warnings;
};

TransitionPlan plan_transition(const TrackSet& tracks, const TransitionParams& params);
nlohmann::json to_json(const TransitionPlan& plan);

struct ClipSpan {
    std::string ref;  // artifact digest or file name
    int frames = 0;
};

struct CutListEntry {
    std::string source;  // clip_a | transition | clip_b, or clip_<i> / transition_<i>
    std::string ref;
    int src_in = 0;  // inclusive
    int src_out = 0;  // inclusive
    int rec_in = 0;
    int rec_out = 0;
};

struct CutList {
    std::vector<CutListEntry> entries;
    int total_frames = 0;
};

// A[0, La-1-cut_a] + transition[0, T-1] + B[cut_b, Lb-1].
CutList stitch_timeline(const TransitionPlan& plan, const ClipSpan& clip_a, const ClipSpan& transition,
                        const ClipSpan& clip_b);

// N clips joined by N-1 planned transitions.
CutList stitch_sequence(const std::vector<ClipSpan>& clips, const std::vector<TransitionPlan>& plans,
                        const std::vector<ClipSpan>& transitions);

nlohmann::json to_json(const CutList& cuts);

}  // namespace shotweave
