#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "encnav/geometry.hpp"
#include "encnav/hashing.hpp"
#include "encnav/map_encoder.hpp"

namespace encnav {

/// One 2D lidar sweep. 270 degree field of view, 1080 samples, 0.25 degree
/// angular step. Beams without a return within max_range carry the infinity
/// sentinel.
struct ScanFrame {
    double timestamp = 0.0;
    double bearing_min = -0.75 * kPi;
    double bearing_max = 0.75 * kPi;
    double max_range = 10.0;
    std::vector<double> ranges;

    static constexpr int kSamples = 1080;
    static constexpr double kNoReturn = std::numeric_limits<double>::infinity();

    double bearing(int i) const {
        return bearing_min + (bearing_max - bearing_min) * double(i) / double(ranges.size());
    }

    void validate() const {
        if (ranges.size() != kSamples)
            throw std::invalid_argument("ScanFrame: expected 1080 samples, got " +
                                        std::to_string(ranges.size()));
    }
};

enum class FeatureClass { concave, convex };

/// Wall-junction point in the robot frame. incoming/outgoing are the unit
/// directions of the two adjacent wall segments, ordered by scan bearing.
struct FeaturePoint {
    Vec2 position;
    FeatureClass cls = FeatureClass::convex;
    Vec2 incoming_dir;
    Vec2 outgoing_dir;
};

/// Candidate landmark sighting in the robot frame. Doorways and corners carry
/// an orientation, rooms an area. QR observations (produced by the camera
/// model, not by this module) carry the marker's payload digest.
struct Observation {
    LandmarkKind kind = LandmarkKind::doorway;
    Vec2 position;
    std::optional<double> orientation;
    std::optional<double> area;
    std::optional<Digest> payload_digest;
    std::vector<int> feature_indices;  // indices into the source feature list
};

struct FeatureParams {
    double eps_split = 0.05;       // max point-to-chord deviation before splitting, m
    int min_points = 5;            // discard shorter segment runs
    double eps_join = 0.3;         // max endpoint gap for adjacent-segment corners, m
    double theta_corner = 30.0 * kPi / 180.0;  // min direction change for a corner
    double cluster_break = 0.5;    // consecutive-point gap that splits clusters, m
    double merge_angle = 10.0 * kPi / 180.0;   // collinearity limit when merging
    double doorway_min = 1.2;      // m, closed interval
    double doorway_max = 2.5;      // m, closed interval
};

/// Fitted line segment with the scan indices it came from, ordered by bearing.
struct ScanSegment {
    Vec2 p0;        // endpoint at the lower-bearing side
    Vec2 p1;        // endpoint at the higher-bearing side
    int first_idx = 0;
    int last_idx = 0;
    int num_points = 0;

    Vec2 direction() const { return (p1 - p0).normalized(); }
};

namespace detail {

struct ScanPoint {
    Vec2 p;
    int idx;
};

/// Total-least-squares line fit; returns (centroid, unit direction).
inline std::pair<Vec2, Vec2> fit_line(const std::vector<ScanPoint>& pts, int lo, int hi) {
    Vec2 mean{0, 0};
    const int n = hi - lo + 1;
    for (int i = lo; i <= hi; ++i) mean += pts[i].p;
    mean = mean / double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = lo; i <= hi; ++i) {
        const Vec2 d = pts[i].p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    // Dominant eigenvector of the 2x2 scatter matrix.
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double lambda = 0.5 * tr + std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
    Vec2 dir{lambda - syy, sxy};
    if (dir.norm() < 1e-12) dir = {sxy, lambda - sxx};
    if (dir.norm() < 1e-12) dir = {1.0, 0.0};
    return {mean, dir.normalized()};
}

inline void split_recursive(const std::vector<ScanPoint>& pts, int lo, int hi,
                            const FeatureParams& par, std::vector<std::pair<int, int>>& runs) {
    if (hi - lo + 1 < par.min_points) return;
    const Vec2 a = pts[lo].p;
    const Vec2 b = pts[hi].p;
    const Vec2 chord = b - a;
    const double len = chord.norm();
    double max_dev = -1.0;
    int split_at = -1;
    if (len < 1e-9) {
        runs.emplace_back(lo, hi);
        return;
    }
    const Vec2 n = chord.perp() / len;
    for (int i = lo + 1; i < hi; ++i) {
        const double dev = std::abs((pts[i].p - a).dot(n));
        if (dev > max_dev) {
            max_dev = dev;
            split_at = i;
        }
    }
    if (max_dev > par.eps_split && split_at > lo && split_at < hi) {
        split_recursive(pts, lo, split_at, par, runs);
        split_recursive(pts, split_at, hi, par, runs);
    } else {
        runs.emplace_back(lo, hi);
    }
}

inline ScanSegment make_segment(const std::vector<ScanPoint>& pts, int lo, int hi) {
    auto [mean, dir] = fit_line(pts, lo, hi);
    // Keep the direction aligned with increasing scan order.
    if ((pts[hi].p - pts[lo].p).dot(dir) < 0.0) dir = dir * -1.0;
    const double t0 = (pts[lo].p - mean).dot(dir);
    const double t1 = (pts[hi].p - mean).dot(dir);
    ScanSegment s;
    s.p0 = mean + dir * t0;
    s.p1 = mean + dir * t1;
    s.first_idx = pts[lo].idx;
    s.last_idx = pts[hi].idx;
    s.num_points = hi - lo + 1;
    return s;
}

inline double line_angle(const Vec2& a, const Vec2& b) {
    const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
    return std::acos(c);
}

}  // namespace detail

/// Split-and-merge extraction: clusters the scan at range discontinuities,
/// recursively splits each polyline at the max-deviation point, fits the kept
/// runs, and merges collinear neighbors. Returns segments in bearing order.
inline std::vector<ScanSegment> extract_segments(const ScanFrame& scan,
                                                 const FeatureParams& par = {}) {
    std::vector<detail::ScanPoint> pts;
    pts.reserve(scan.ranges.size());
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        const double r = scan.ranges[i];
        if (!std::isfinite(r) || r <= 0.0 || r > scan.max_range) continue;
        const double b = scan.bearing(int(i));
        pts.push_back({{r * std::cos(b), r * std::sin(b)}, int(i)});
    }
    if (pts.empty()) return {};

    std::vector<ScanSegment> segments;
    std::size_t cluster_start = 0;
    auto flush_cluster = [&](std::size_t lo, std::size_t hi) {
        if (hi - lo + 1 < std::size_t(par.min_points)) return;
        std::vector<std::pair<int, int>> runs;
        detail::split_recursive(pts, int(lo), int(hi), par, runs);
        for (auto [a, b] : runs)
            if (b - a + 1 >= par.min_points) segments.push_back(detail::make_segment(pts, a, b));
    };
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (distance(pts[i].p, pts[i - 1].p) > par.cluster_break) {
            flush_cluster(cluster_start, i - 1);
            cluster_start = i;
        }
    }
    flush_cluster(cluster_start, pts.size() - 1);

    // Merge collinear neighbors split by noise or by the recursion itself.
    std::vector<ScanSegment> merged;
    for (const auto& s : segments) {
        if (!merged.empty()) {
            ScanSegment& prev = merged.back();
            const double gap = distance(prev.p1, s.p0);
            const double ang = detail::line_angle(prev.p1 - prev.p0, s.p1 - s.p0);
            const double offset = point_segment_distance(s.p1, {prev.p0, prev.p1});
            if (gap <= par.eps_join && ang <= par.merge_angle &&
                offset <= 2.0 * par.eps_split + gap * std::sin(par.merge_angle)) {
                prev.p1 = s.p1;
                prev.last_idx = s.last_idx;
                prev.num_points += s.num_points;
                continue;
            }
        }
        merged.push_back(s);
    }
    return merged;
}

/// Emits a feature point wherever two adjacent segments meet closely enough
/// and turn by at least theta_corner. Classification follows the free-space
/// angle at the point, measured on the sensor side: below 180 degrees the
/// point is convex (room-interior corner), above it is concave (doorjamb).
inline std::vector<FeaturePoint> classify_feature_points(const std::vector<ScanSegment>& segments,
                                                         const FeatureParams& par = {}) {
    std::vector<FeaturePoint> features;
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
        const ScanSegment& s1 = segments[i];
        const ScanSegment& s2 = segments[i + 1];
        if (distance(s1.p1, s2.p0) > par.eps_join) continue;
        const double turn = detail::line_angle(s1.p1 - s1.p0, s2.p1 - s2.p0);
        if (turn < par.theta_corner) continue;

        // Intersection of the two fitted lines.
        const Vec2 d1 = s1.direction();
        const Vec2 d2 = s2.direction();
        const double denom = d1.cross(d2);
        Vec2 corner;
        if (std::abs(denom) < 1e-9) {
            corner = (s1.p1 + s2.p0) / 2.0;
        } else {
            const double t = (s2.p0 - s1.p0).cross(d2) / denom;
            corner = s1.p0 + d1 * t;
        }

        // Wall rays from the corner toward the far ends of both segments.
        const Vec2 u = (s1.p0 - corner).normalized();
        const Vec2 v = (s2.p1 - corner).normalized();
        const Vec2 to_robot = (Vec2{0, 0} - corner).normalized();
        const double au = std::atan2(u.y, u.x);
        const double av = std::atan2(v.y, v.x);
        const double ar = std::atan2(to_robot.y, to_robot.x);
        const double sweep_uv = wrap_two_pi(av - au);   // ccw sector from u to v
        const double sweep_ur = wrap_two_pi(ar - au);
        const double free_angle = (sweep_ur <= sweep_uv) ? sweep_uv : kTwoPi - sweep_uv;

        FeaturePoint fp;
        fp.position = corner;
        fp.cls = free_angle < kPi ? FeatureClass::convex : FeatureClass::concave;
        fp.incoming_dir = d1;
        fp.outgoing_dir = d2;
        features.push_back(fp);
    }
    return features;
}

/// All unordered pairs of concave feature points separated by a doorway-sized
/// gap (closed interval). The observation sits at the midpoint; orientation is
/// the undirected direction of the jamb-to-jamb line in [0, pi).
inline std::vector<Observation> detect_doorways(const std::vector<FeaturePoint>& features,
                                                const FeatureParams& par = {}) {
    std::vector<Observation> out;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].cls != FeatureClass::concave) continue;
        for (std::size_t j = i + 1; j < features.size(); ++j) {
            if (features[j].cls != FeatureClass::concave) continue;
            const double d = distance(features[i].position, features[j].position);
            if (d < par.doorway_min || d > par.doorway_max) continue;
            const Vec2 span = features[j].position - features[i].position;
            Observation obs;
            obs.kind = LandmarkKind::doorway;
            obs.position = (features[i].position + features[j].position) / 2.0;
            obs.orientation = wrap_half_turn(std::atan2(span.y, span.x));
            obs.feature_indices = {int(i), int(j)};
            out.push_back(std::move(obs));
        }
    }
    return out;
}

/// Concave feature points not used by any doorway become corner observations.
/// Orientation is the bisector of the two wall normals (both taken on the
/// free-space side), normalized to [0, 2*pi).
inline std::vector<Observation> detect_corners(const std::vector<FeaturePoint>& features,
                                               const std::vector<Observation>& doorways) {
    std::vector<bool> in_doorway(features.size(), false);
    for (const auto& d : doorways)
        for (int idx : d.feature_indices) in_doorway[idx] = true;

    std::vector<Observation> out;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const FeaturePoint& fp = features[i];
        if (fp.cls != FeatureClass::concave || in_doorway[i]) continue;

        const Vec2 to_robot = (Vec2{0, 0} - fp.position).normalized();
        auto free_side_normal = [&](const Vec2& wall_dir) {
            const Vec2 n = wall_dir.perp();
            return n.dot(to_robot) >= 0.0 ? n : n * -1.0;
        };
        const Vec2 n1 = free_side_normal(fp.incoming_dir);
        const Vec2 n2 = free_side_normal(fp.outgoing_dir);
        Vec2 bisector = n1 + n2;
        if (bisector.norm() < 1e-9) bisector = to_robot;

        Observation obs;
        obs.kind = LandmarkKind::corner;
        obs.position = fp.position;
        obs.orientation = wrap_two_pi(std::atan2(bisector.y, bisector.x));
        obs.feature_indices = {int(i)};
        out.push_back(std::move(obs));
    }
    return out;
}

/// Every run of three consecutive convex points (consecutive in the full
/// bearing-ordered feature list) yields a room observation at the centroid
/// with the triangle area. Degenerate collinear triples are discarded.
inline std::vector<Observation> detect_rooms(const std::vector<FeaturePoint>& features) {
    std::vector<Observation> out;
    for (std::size_t i = 0; i + 2 < features.size(); ++i) {
        if (features[i].cls != FeatureClass::convex ||
            features[i + 1].cls != FeatureClass::convex ||
            features[i + 2].cls != FeatureClass::convex)
            continue;
        const Vec2 a = features[i].position;
        const Vec2 b = features[i + 1].position;
        const Vec2 c = features[i + 2].position;
        const double area = 0.5 * std::abs((b - a).cross(c - a));
        if (area < 1e-9) continue;
        Observation obs;
        obs.kind = LandmarkKind::room;
        obs.position = (a + b + c) / 3.0;
        obs.area = area;
        obs.feature_indices = {int(i), int(i + 1), int(i + 2)};
        out.push_back(std::move(obs));
    }
    return out;
}

struct ExtractionResult {
    std::vector<ScanSegment> segments;
    std::vector<FeaturePoint> features;
    std::vector<Observation> observations;
};

/// Full robot-side pipeline for one scan.
inline ExtractionResult extract_observations(const ScanFrame& scan, const FeatureParams& par = {}) {
    ExtractionResult r;
    r.segments = extract_segments(scan, par);
    r.features = classify_feature_points(r.segments, par);
    auto doorways = detect_doorways(r.features, par);
    auto corners = detect_corners(r.features, doorways);
    auto rooms = detect_rooms(r.features);
    r.observations.reserve(doorways.size() + corners.size() + rooms.size());
    for (auto& o : doorways) r.observations.push_back(std::move(o));
    for (auto& o : corners) r.observations.push_back(std::move(o));
    for (auto& o : rooms) r.observations.push_back(std::move(o));
    return r;
}

/// Debug dump: `t,x,y,cls` per feature point.
inline std::string features_csv(double t, const std::vector<FeaturePoint>& features) {
    std::string out = "t,x,y,cls\n";
    char buf[128];
    for (const auto& f : features) {
        std::snprintf(buf, sizeof(buf), "%.3f,%.4f,%.4f,%s\n", t, f.position.x, f.position.y,
                      f.cls == FeatureClass::concave ? "concave" : "convex");
        out += buf;
    }
    return out;
}

}  // namespace encnav
