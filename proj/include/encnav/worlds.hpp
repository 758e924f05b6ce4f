#pragma once

#include <algorithm>
#include <map>
#include <tuple>
#include <vector>

#include "encnav/sim_world.hpp"

namespace encnav {

// ---------------------------------------------------------------------------
// Landmark derivation: instead of authoring landmark annotations by hand, the
// compiler raycasts noiseless scans from probe poses and runs them through
// the same extraction pipeline the robot uses. Whatever the robot can see is
// exactly what gets encoded.
// ---------------------------------------------------------------------------

struct AnnotationPolicy {
    double max_obs_range = 9.0;   // trust features only within this range
    double min_room_area = 4.0;   // skinny wall-hugging triples are unstable
    double min_separation = 1.2;  // same kind+extra pairs must not share a
                                  // search window (> 2 * search tolerance)
};

inline std::vector<LandmarkDescriptor> derive_landmarks(const World& world,
                                                        const std::vector<Pose2D>& probes,
                                                        const HashingConfig& cfg,
                                                        const LidarModel& lidar_model,
                                                        const FeatureParams& params = {},
                                                        const AnnotationPolicy& policy = {}) {
    LidarModel lm = lidar_model;
    lm.range_sigma = 0.0;
    Rng rng(0);

    // Key: kind, grid cell, extra index. First sighting wins; with zero noise
    // repeated sightings reproduce the same exact geometry anyway.
    std::map<std::tuple<int, std::int64_t, std::int64_t, std::int64_t>, LandmarkDescriptor> found;
    for (const auto& pose : probes) {
        const ScanFrame scan = raycast_scan(world, pose, lm, rng);
        const ExtractionResult ext = extract_observations(scan, params);
        for (const auto& obs : ext.observations) {
            if (obs.position.norm() > policy.max_obs_range) continue;
            if (obs.kind == LandmarkKind::room && *obs.area < policy.min_room_area) continue;
            LandmarkDescriptor lmk;
            lmk.kind = obs.kind;
            const Vec2 global = pose.to_global(obs.position);
            lmk.position = {global.x, global.y, 0.0};
            if (obs.kind == LandmarkKind::doorway)
                lmk.orientation = wrap_half_turn(*obs.orientation + pose.theta);
            else if (obs.kind == LandmarkKind::corner)
                lmk.orientation = wrap_two_pi(*obs.orientation + pose.theta);
            else if (obs.kind == LandmarkKind::room)
                lmk.area = *obs.area;
            const auto extra = landmark_extra(lmk, cfg);
            const std::tuple key{int(lmk.kind),
                                 quantize_scalar(lmk.position.x, cfg.grid_resolution),
                                 quantize_scalar(lmk.position.y, cfg.grid_resolution),
                                 extra.value_or(0)};
            found.emplace(key, std::move(lmk));
        }
    }
    // Separation policy: two encodable landmarks of the same kind and extra
    // index inside one search window would let the spiral anchor on the
    // wrong one; keep the first of any such pair.
    std::vector<LandmarkDescriptor> out;
    out.reserve(found.size());
    for (auto& [key, lmk] : found) {
        const auto extra = landmark_extra(lmk, cfg);
        bool crowded = false;
        for (const auto& kept : out) {
            if (kept.kind != lmk.kind) continue;
            if (landmark_extra(kept, cfg) != extra) continue;
            const double d = std::hypot(kept.position.x - lmk.position.x,
                                        kept.position.y - lmk.position.y);
            if (d < policy.min_separation) {
                crowded = true;
                break;
            }
        }
        if (crowded) continue;
        lmk.id = int(out.size());
        out.push_back(std::move(lmk));
    }
    return out;
}

/// Edge policy: connect landmark pairs with a straight drivable line. The
/// checked segment is trimmed at both ends (the robot holds a standoff from
/// the landmark itself) and must keep `clearance` meters from every wall.
inline std::vector<std::pair<int, int>> visibility_edges(
    const std::vector<LandmarkDescriptor>& landmarks, const std::vector<Segment>& walls,
    double min_len = 1.5, double max_len = 12.0, double clearance = 0.35, double trim = 0.45) {
    std::vector<std::pair<int, int>> edges;
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        for (std::size_t j = 0; j < landmarks.size(); ++j) {
            if (i == j) continue;
            const Vec2 a{landmarks[i].position.x, landmarks[i].position.y};
            const Vec2 b{landmarks[j].position.x, landmarks[j].position.y};
            const double len = distance(a, b);
            if (len < min_len || len > max_len || len <= 2.0 * trim) continue;
            const Vec2 dir = (b - a) / len;
            const Segment path{a + dir * trim, b - dir * trim};
            bool clear = true;
            for (const auto& wall : walls) {
                if (segment_segment_distance(path, wall) < clearance) {
                    clear = false;
                    break;
                }
            }
            if (clear) edges.emplace_back(int(i), int(j));
        }
    }
    return edges;
}

inline int nearest_landmark(const std::vector<LandmarkDescriptor>& landmarks, const Vec2& p,
                            std::optional<LandmarkKind> kind = std::nullopt) {
    int best = -1;
    double best_d = std::numeric_limits<double>::max();
    for (const auto& lm : landmarks) {
        if (kind && lm.kind != *kind) continue;
        const double d = distance({lm.position.x, lm.position.y}, p);
        if (d < best_d) {
            best_d = d;
            best = lm.id;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Reference world: a 40 x 40 m floorplan with 9 single-entrance rooms around
// a central hall, two square pillars, and stub door frames at every opening.
// The whole plan is rotated by half an angle bin so that wall orientations
// sit at bin centers instead of bin edges; exact-edge orientations would
// flip bins on every scan under sensor noise.
// ---------------------------------------------------------------------------

struct ReferenceLayout {
    std::vector<Segment> walls;       // axis-aligned, before rotation
    std::vector<Pose2D> probes;       // landmark derivation poses
    Pose2D deploy{6.0, 6.0, kPi / 2};
    Pose2D qr_deploy{12.5, 14.0, kPi / 2};
    std::vector<Pose2D> qr_posts;     // free-standing marker posts in the hall
    struct Door {
        Vec2 center;
        double normal;  // radians; the wall runs perpendicular to this
    };
    std::vector<Door> doors;
};

namespace detail {

inline void add_box(std::vector<Segment>& walls, Vec2 lo, Vec2 hi) {
    walls.push_back({{lo.x, lo.y}, {hi.x, lo.y}});
    walls.push_back({{hi.x, lo.y}, {hi.x, hi.y}});
    walls.push_back({{hi.x, hi.y}, {lo.x, hi.y}});
    walls.push_back({{lo.x, hi.y}, {lo.x, lo.y}});
}

/// Horizontal wall y=const from x0 to x1 with door gaps. Each gap edge gets a
/// door reveal: a jamb segment crossing the wall perpendicularly. The jamb
/// meets the wall exactly on the wall line, so the jamb corner is a single
/// canonical point seen identically from both sides.
inline void add_h_wall(std::vector<Segment>& walls, double y, double x0, double x1,
                       const std::vector<double>& door_centers, double gap = 2.0,
                       double jamb = 0.25) {
    double cursor = x0;
    for (double c : door_centers) {
        const double g0 = c - gap / 2, g1 = c + gap / 2;
        walls.push_back({{cursor, y}, {g0, y}});
        walls.push_back({{g0, y - jamb}, {g0, y + jamb}});
        walls.push_back({{g1, y - jamb}, {g1, y + jamb}});
        cursor = g1;
    }
    walls.push_back({{cursor, y}, {x1, y}});
}

inline void add_v_wall(std::vector<Segment>& walls, double x, double y0, double y1,
                       const std::vector<double>& door_centers, double gap = 2.0,
                       double jamb = 0.25) {
    double cursor = y0;
    for (double c : door_centers) {
        const double g0 = c - gap / 2, g1 = c + gap / 2;
        walls.push_back({{x, cursor}, {x, g0}});
        walls.push_back({{x - jamb, g0}, {x + jamb, g0}});
        walls.push_back({{x - jamb, g1}, {x + jamb, g1}});
        cursor = g1;
    }
    walls.push_back({{x, cursor}, {x, y1}});
}

inline ReferenceLayout reference_layout() {
    ReferenceLayout lay;
    auto& w = lay.walls;
    add_box(w, {0, 0}, {40, 40});

    // Top room row (A, B, C) above y=28; bottom row (D, E, F) below y=12.
    add_h_wall(w, 28.0, 0.0, 40.0, {6.0, 19.0, 33.0});
    add_h_wall(w, 12.0, 0.0, 40.0, {6.0, 19.0, 33.0});
    w.push_back({{12, 28}, {12, 40}});
    w.push_back({{26, 28}, {26, 40}});
    w.push_back({{12, 0}, {12, 12}});
    w.push_back({{26, 0}, {26, 12}});

    // East rooms (G1, G2) behind x=28; west room (I) behind x=10.
    add_v_wall(w, 28.0, 12.0, 28.0, {16.0, 24.0});
    w.push_back({{28, 20}, {40, 20}});
    add_v_wall(w, 10.0, 12.0, 28.0, {20.0});

    // Structural columns: omnidirectional corner landmarks in the hall and
    // off-center inside the larger rooms.
    for (const Vec2 c : {Vec2{14, 16}, Vec2{24, 16}, Vec2{14, 24}, Vec2{24, 24}, Vec2{19, 20},
                         Vec2{3.5, 31.5}, Vec2{16, 31}, Vec2{36.5, 31.5}, Vec2{3.5, 8.5},
                         Vec2{16, 8.5}, Vec2{36.5, 8.5}, Vec2{5, 16}, Vec2{5, 24},
                         Vec2{31, 14}, Vec2{31, 26}})
        add_box(w, {c.x - 0.3, c.y - 0.3}, {c.x + 0.3, c.y + 0.3});

    lay.doors = {{{6, 28}, kPi / 2},  {{19, 28}, kPi / 2}, {{33, 28}, kPi / 2},
                 {{6, 12}, kPi / 2},  {{19, 12}, kPi / 2}, {{33, 12}, kPi / 2},
                 {{28, 16}, 0.0},     {{28, 24}, 0.0},     {{10, 20}, 0.0}};

    // Probe poses: room centers and a hall sweep, eight headings each, plus
    // oblique door-front probes on both sides of every opening (door posts
    // resolve only from a few meters and off the door axis).
    const std::vector<Vec2> spots = {
        {6, 34},  {19, 34}, {33, 34},            // A B C
        {6, 6},   {19, 6},  {33, 6},             // D E F
        {34, 16}, {34, 24}, {5, 20},             // G1 G2 I
        {12.5, 16}, {12.5, 24}, {18.5, 15}, {18.5, 25},
        {25.5, 16}, {25.5, 24}, {18.5, 20.0}, {12.0, 20.0}, {25.0, 20.0},
    };
    for (const auto& s : spots)
        for (int h = 0; h < 8; ++h)
            lay.probes.push_back(Pose2D{s.x, s.y, h * kPi / 4});
    // Door reveals resolve as a concave pair only from inside the approach
    // corridor within a few meters, which is exactly where a transiting
    // robot scans from.
    for (const auto& door : lay.doors) {
        for (double side : {1.0, -1.0}) {
            const Vec2 n = Vec2{std::cos(door.normal), std::sin(door.normal)} * side;
            const Vec2 t = n.perp();
            for (const Vec2 rel : {Vec2{2.0, 0.55}, Vec2{2.0, -0.55}, Vec2{2.6, 0.55},
                                   Vec2{2.6, -0.55}, Vec2{3.2, 0.0}, Vec2{1.6, 0.0}}) {
                const Vec2 p = door.center + n * rel.x + t * rel.y;
                const Vec2 look = door.center - p;
                lay.probes.push_back(Pose2D{p.x, p.y, std::atan2(look.y, look.x)});
            }
        }
    }

    // Free-standing QR posts around the hall, normals facing open space.
    const std::vector<Pose2D> posts = {
        {10.6, 14.0, 0.0},        {10.6, 18.0, 0.0},   {10.6, 23.0, 0.0},
        {10.6, 26.5, 0.0},        {14.0, 12.6, kPi / 2}, {17.5, 12.6, kPi / 2},
        {21.5, 12.6, kPi / 2},    {25.0, 12.6, kPi / 2}, {27.4, 14.5, kPi},
        {27.4, 18.5, kPi},        {27.4, 22.0, kPi},     {27.4, 26.0, kPi},
        {24.5, 27.4, -kPi / 2},   {21.0, 27.4, -kPi / 2}, {17.0, 27.4, -kPi / 2},
        {13.5, 27.4, -kPi / 2},
    };
    lay.qr_posts = posts;
    return lay;
}

inline Vec2 rotate_about(const Vec2& p, const Vec2& center, double angle, const Vec2& shift) {
    return center + (p - center).rotated(angle) + shift;
}

}  // namespace detail

/// Hashing parameters used by the reference missions. The angle bin count is
/// a multiple of 8 so the half-bin plan rotation centers every axis-class
/// orientation inside a bin.
inline HashingConfig reference_config() {
    HashingConfig cfg;
    cfg.grid_resolution = 0.1;
    cfg.angle_bins = 72;
    cfg.area_quantum = 0.5;
    cfg.time_window = 10.0;
    return cfg;
}

inline HashingConfig qr_reference_config() {
    HashingConfig cfg;
    cfg.grid_resolution = 0.02;
    cfg.angle_bins = 72;
    cfg.area_quantum = 0.5;
    cfg.time_window = 10.0;
    return cfg;
}

struct ReferenceWorld {
    World world;
    Pose2D deploy;
    HashingConfig cfg;
};

/// The lidar-feature reference world: rotated half a bin (2.5 degrees for 72
/// bins) about the plan center and shifted into the positive quadrant.
inline const ReferenceWorld& reference_world() {
    static const ReferenceWorld rw = [] {
        const HashingConfig cfg = reference_config();
        const double beta = kPi / double(cfg.angle_bins);  // half bin
        const Vec2 center{20, 20};
        const Vec2 shift{2, 2};

        ReferenceLayout lay = detail::reference_layout();
        ReferenceWorld out;
        out.cfg = cfg;
        out.world.bounds_min = {0, 0};
        out.world.bounds_max = {44, 44};
        for (const auto& s : lay.walls)
            out.world.walls.push_back({detail::rotate_about(s.a, center, beta, shift),
                                       detail::rotate_about(s.b, center, beta, shift)});
        std::vector<Pose2D> probes;
        for (const auto& p : lay.probes) {
            const Vec2 q = detail::rotate_about(p.position(), center, beta, shift);
            probes.push_back(Pose2D{q.x, q.y, p.theta + beta});
        }
        out.world.landmarks_truth = derive_landmarks(out.world, probes, cfg, LidarModel{});
        const Vec2 d = detail::rotate_about(lay.deploy.position(), center, beta, shift);
        out.deploy = Pose2D{d.x, d.y, lay.deploy.theta + beta};
        return out;
    }();
    return rw;
}

/// QR-marker variant: same floorplan, free-standing marker posts in the hall,
/// graph nodes are the posts themselves on a 2 cm grid.
inline const ReferenceWorld& qr_reference_world() {
    static const ReferenceWorld rw = [] {
        const HashingConfig cfg = qr_reference_config();
        const double beta = kPi / double(reference_config().angle_bins);
        const Vec2 center{20, 20};
        const Vec2 shift{2, 2};

        ReferenceLayout lay = detail::reference_layout();
        ReferenceWorld out;
        out.cfg = cfg;
        out.world.bounds_min = {0, 0};
        out.world.bounds_max = {44, 44};
        for (const auto& s : lay.walls)
            out.world.walls.push_back({detail::rotate_about(s.a, center, beta, shift),
                                       detail::rotate_about(s.b, center, beta, shift)});
        int id = 0;
        for (const auto& post : lay.qr_posts) {
            const Vec2 q = detail::rotate_about(post.position(), center, beta, shift);
            LandmarkDescriptor lm;
            lm.id = id;
            lm.kind = LandmarkKind::qr;
            lm.position = {q.x, q.y, 0.0};
            out.world.landmarks_truth.push_back(lm);
            QrMarker marker;
            marker.pose = Pose2D{q.x, q.y, post.theta + beta};
            marker.node = id;
            out.world.qr_markers.push_back(marker);
            ++id;
        }
        const Vec2 d = detail::rotate_about(lay.qr_deploy.position(), center, beta, shift);
        out.deploy = Pose2D{d.x, d.y, lay.qr_deploy.theta + beta};
        return out;
    }();
    return rw;
}

/// Builds the encoded graph for a reference-style world with the visibility
/// edge policy and the start node nearest the deploy pose.
inline EncodedNavGraph build_reference_graph(const ReferenceWorld& rw, double max_edge_len = 12.0) {
    const auto edges = visibility_edges(rw.world.landmarks_truth, rw.world.walls, 1.5,
                                        max_edge_len);
    const int start = nearest_landmark(rw.world.landmarks_truth, rw.deploy.position());
    return build_nav_graph(rw.world.landmarks_truth, edges, rw.cfg, start);
}

}  // namespace encnav
