#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "encnav/feature_extraction.hpp"
#include "encnav/geometry.hpp"
#include "encnav/localizer.hpp"
#include "encnav/map_encoder.hpp"
#include "encnav/rng.hpp"

namespace encnav {

// ---------------------------------------------------------------------------
// World and sensor/actuator models
// ---------------------------------------------------------------------------

struct QrMarker {
    Pose2D pose;        // marker position and outward normal direction
    int node = -1;      // landmark index the payload encodes
    Digest payload;     // stamped from the encoded graph before a run
};

/// Compiler-side world description. Robots never see this directly.
struct World {
    Vec2 bounds_min{0.0, 0.0};
    Vec2 bounds_max{40.0, 40.0};
    std::vector<Segment> walls;
    std::vector<LandmarkDescriptor> landmarks_truth;
    std::vector<QrMarker> qr_markers;
};

struct LidarModel {
    double fov = 1.5 * kPi;     // 270 degrees
    int samples = 1080;         // 0.25 degree steps
    double rate_hz = 1.0;
    double max_range = 10.0;
    double range_sigma = 0.01;  // m
};

/// Odometry error model. sigma_t and sigma_r are unitless fractions of the
/// distance traveled / angle turned. Each run additionally draws a wheel
/// calibration bias from the same fractions, so reported increments are
/// scaled by (1 + bias) before white per-step noise is added; the white term
/// alone accumulates far too slowly to reproduce realistic drift.
struct OdometryModel {
    double sigma_t = 0.0;
    double sigma_r = 0.0;
    double bias_t = 0.0;  // per-run draw, N(0, sigma_t)
    double bias_r = 0.0;  // per-run draw, N(0, sigma_r)

    static OdometryModel sampled(double sigma_t, double sigma_r, Rng& rng) {
        OdometryModel m;
        m.sigma_t = sigma_t;
        m.sigma_r = sigma_r;
        m.bias_t = sigma_t > 0.0 ? rng.normal(0.0, sigma_t) : 0.0;
        m.bias_r = sigma_r > 0.0 ? rng.normal(0.0, sigma_r) : 0.0;
        return m;
    }
};

struct QrModel {
    double fov = 60.0 * kPi / 180.0;  // camera cone, full angle
    double detect_range = 3.0;        // m
    double marker_side = 0.12;        // m
    double max_incidence = 60.0 * kPi / 180.0;
    double range_sigma = 0.02;        // m
    double bearing_sigma = 0.5 * kPi / 180.0;
};

struct Command {
    double v = 0.0;      // m/s
    double omega = 0.0;  // rad/s
};

/// Body-frame odometry increment reported by the wheel encoders.
struct OdometryIncrement {
    double ds_forward = 0.0;
    double ds_lateral = 0.0;
    double dtheta = 0.0;
};

struct QrDetection {
    Digest payload;
    double range = 0.0;
    double bearing = 0.0;  // relative to robot heading
};

// ---------------------------------------------------------------------------
// Simulation primitives
// ---------------------------------------------------------------------------

/// Per-beam nearest wall intersection with Gaussian range noise. Beams
/// without a hit inside max_range carry the sentinel.
inline ScanFrame raycast_scan(const World& w, const Pose2D& true_pose, const LidarModel& lm,
                              Rng& rng) {
    ScanFrame scan;
    scan.timestamp = 0.0;
    scan.bearing_min = -lm.fov / 2.0;
    scan.bearing_max = lm.fov / 2.0;
    scan.max_range = lm.max_range;
    scan.ranges.resize(lm.samples, ScanFrame::kNoReturn);
    const Vec2 origin = true_pose.position();
    for (int i = 0; i < lm.samples; ++i) {
        const double bearing = scan.bearing_min + lm.fov * double(i) / double(lm.samples);
        const Vec2 dir{std::cos(true_pose.theta + bearing), std::sin(true_pose.theta + bearing)};
        double best = std::numeric_limits<double>::infinity();
        for (const auto& wall : w.walls) {
            const double t = ray_segment_intersect(origin, dir, wall);
            if (t < best) best = t;
        }
        if (best <= lm.max_range) {
            double r = best + (lm.range_sigma > 0.0 ? rng.normal(0.0, lm.range_sigma) : 0.0);
            scan.ranges[i] = std::clamp(r, 1e-3, lm.max_range);
        }
    }
    return scan;
}

/// Exact unicycle integration for the true pose; the reported increment is
/// the body-frame true increment scaled by the run's wheel bias plus white
/// per-step noise with std sigma_t*|v|*dt (translation components) and
/// sigma_r*|omega|*dt (heading).
inline std::pair<Pose2D, OdometryIncrement> step_motion(const Pose2D& true_pose,
                                                        const Command& cmd, double dt,
                                                        const OdometryModel& om, Rng& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_motion: dt must be > 0");
    const double v = cmd.v, w = cmd.omega;
    Pose2D next = true_pose;
    if (std::abs(w) < 1e-12) {
        next.x += v * dt * std::cos(true_pose.theta);
        next.y += v * dt * std::sin(true_pose.theta);
    } else {
        const double r = v / w;
        next.x += r * (std::sin(true_pose.theta + w * dt) - std::sin(true_pose.theta));
        next.y += -r * (std::cos(true_pose.theta + w * dt) - std::cos(true_pose.theta));
    }
    next.theta = wrap_pi(true_pose.theta + w * dt);

    const Vec2 body = (next.position() - true_pose.position()).rotated(-true_pose.theta);
    const double trans_sigma = om.sigma_t * std::abs(v) * dt;
    const double rot_sigma = om.sigma_r * std::abs(w) * dt;
    OdometryIncrement inc;
    inc.ds_forward =
        body.x * (1.0 + om.bias_t) + (trans_sigma > 0.0 ? rng.normal(0.0, trans_sigma) : 0.0);
    inc.ds_lateral = body.y + (trans_sigma > 0.0 ? rng.normal(0.0, trans_sigma) : 0.0);
    inc.dtheta =
        (w * dt) * (1.0 + om.bias_r) + (rot_sigma > 0.0 ? rng.normal(0.0, rot_sigma) : 0.0);
    return {next, inc};
}

/// Geometric camera abstraction: a marker is reported when it is inside the
/// camera cone and detection range, faces the robot, and has line of sight.
/// The payload digest is returned verbatim.
inline std::vector<QrDetection> detect_qr(const World& w, const Pose2D& true_pose,
                                          const QrModel& qm, Rng& rng) {
    std::vector<QrDetection> out;
    for (const auto& marker : w.qr_markers) {
        const Vec2 rel = marker.pose.position() - true_pose.position();
        const double range = rel.norm();
        if (range > qm.detect_range || range < 1e-6) continue;
        const double bearing = wrap_pi(std::atan2(rel.y, rel.x) - true_pose.theta);
        if (std::abs(bearing) > qm.fov / 2.0) continue;
        const Vec2 to_robot = rel * -1.0;
        const double incidence = wrap_pi(std::atan2(to_robot.y, to_robot.x) - marker.pose.theta);
        if (std::abs(incidence) >= qm.max_incidence) continue;
        const Vec2 dir = rel / range;
        bool occluded = false;
        for (const auto& wall : w.walls) {
            if (ray_segment_intersect(true_pose.position(), dir, wall) < range - 1e-6) {
                occluded = true;
                break;
            }
        }
        if (occluded) continue;
        QrDetection det;
        det.payload = marker.payload;
        det.range =
            std::max(1e-3, range + (qm.range_sigma > 0.0 ? rng.normal(0.0, qm.range_sigma) : 0.0));
        det.bearing =
            bearing + (qm.bearing_sigma > 0.0 ? rng.normal(0.0, qm.bearing_sigma) : 0.0);
        out.push_back(det);
    }
    return out;
}

/// Stamps marker payload digests from the encoded graph.
inline void install_qr_payloads(World& w, const EncodedNavGraph& g) {
    for (auto& m : w.qr_markers) {
        if (m.node < 0 || m.node >= int(g.size()))
            throw std::invalid_argument("qr marker references unknown node");
        m.payload = g.node_digests[m.node];
    }
}

// ---------------------------------------------------------------------------
// Mission log
// ---------------------------------------------------------------------------

struct MissionTick {
    double t = 0.0;
    Pose2D true_pose;
    Pose2D odom_pose;
    Pose2D hash_pose;
    std::string event;  // semicolon-separated tags
    double feat_ms = 0.0;
    double search_ms = 0.0;
    int trials = 0;
};

/// Per-match diagnostics used by verification; not part of the CSV schema.
struct MatchEvent {
    double t = 0.0;
    int node = -1;
    int trials = 0;
    double error_before = 0.0;   // |est - true| position error entering the match
    double error_after = 0.0;    // |est - true| immediately after the pose update
    double obs_distance = 0.0;   // robot-to-observation lever arm
    double heading_error = 0.0;  // |est heading - true heading| entering the match
};

struct MissionLog {
    std::vector<MissionTick> ticks;
    std::vector<MatchEvent> matches;
    std::set<int> matched_nodes;
    bool aborted = false;
    double duration_s = 0.0;

    /// CSV per the published schema. Timing columns are wall-clock
    /// measurements; with_timings=false zeroes them so that fixed-seed runs
    /// are byte-identical.
    std::string csv(bool with_timings = true) const {
        std::string out =
            "t,true_x,true_y,true_th,odom_x,odom_y,odom_th,hash_x,hash_y,hash_th,event,feat_ms,"
            "search_ms,trials\n";
        char buf[512];
        for (const auto& k : ticks) {
            std::snprintf(buf, sizeof(buf),
                          "%.1f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%s,%.3f,%.3f,%d\n",
                          k.t, k.true_pose.x, k.true_pose.y, k.true_pose.theta, k.odom_pose.x,
                          k.odom_pose.y, k.odom_pose.theta, k.hash_pose.x, k.hash_pose.y,
                          k.hash_pose.theta, k.event.c_str(), with_timings ? k.feat_ms : 0.0,
                          with_timings ? k.search_ms : 0.0, k.trials);
            out += buf;
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Robot agent. Strictly robot-side: it sees the encoded graph, scans,
// odometry increments, and QR detections. The true pose never enters.
// ---------------------------------------------------------------------------

struct MissionOptions {
    double duration_s = 150.0;
    double control_dt = 0.1;
    double scan_period = 1.0;
    double cruise_speed = 0.5;
    double edge_timeout_s = 40.0;
    double start_timeout_s = 60.0;
    double arrive_radius = 0.35;
    double corner_standoff = 0.8;
    double blocked_range = 0.5;
    bool use_lidar = true;
    bool use_qr = false;
    Pose2D deploy_pose{0.0, 0.0, 0.0};
    FeatureParams features;
    SearchBudget budget;
};

class RobotAgent {
public:
    enum class Mode { search_start, follow, goto_node, recover, wander, done };

    struct MatchRecord {
        Observation obs;
        MatchResult match;
        Pose2D est_before;  // estimate entering the match, for diagnostics
    };

    struct Counters {
        int follow_legs = 0;
        int goto_legs = 0;
        int wander_legs = 0;
        int arrivals_new = 0;
        int arrivals_known = 0;
        int fails_blocked = 0;
        int fails_timeout = 0;
        int fails_stall = 0;
    };

    struct ScanOutcome {
        std::vector<MatchRecord> matches;
        double feat_s = 0.0;
        double search_s = 0.0;
        int trials = 0;
        std::string events;
    };

    RobotAgent(const EncodedNavGraph& graph, const MissionOptions& opt)
        : graph_(&graph), opt_(opt), localizer_(graph, opt.budget) {
        odom_pose_ = opt.deploy_pose;
        hash_pose_ = opt.deploy_pose;
        tried_bins_.resize(graph.size());
        node_cells_.resize(graph.size());
    }

    const Pose2D& odom_pose() const { return odom_pose_; }
    const Pose2D& hash_pose() const { return hash_pose_; }
    const std::set<int>& matched_nodes() const { return matched_nodes_; }
    Mode mode() const { return mode_; }
    bool aborted() const { return aborted_; }
    Localizer& localizer() { return localizer_; }
    const Counters& counters() const { return counters_; }

    void begin(double t) {
        mission_start_t_ = t;
        leg_start_t_ = t;
    }

    void integrate_odometry(const OdometryIncrement& inc) {
        // Increments are body-frame deltas taken at the pre-step heading, so
        // applying them at the current heading estimate inverts them exactly
        // when the estimate is exact.
        auto apply = [&](Pose2D& p) {
            p.x += inc.ds_forward * std::cos(p.theta) - inc.ds_lateral * std::sin(p.theta);
            p.y += inc.ds_forward * std::sin(p.theta) + inc.ds_lateral * std::cos(p.theta);
            p.theta = wrap_pi(p.theta + inc.dtheta);
        };
        apply(odom_pose_);
        apply(hash_pose_);
    }

    /// Feature extraction plus hash search for one lidar frame.
    ScanOutcome process_scan(const ScanFrame& scan, double t) {
        ScanOutcome out;
        const auto f0 = std::chrono::steady_clock::now();
        const ExtractionResult ext = extract_observations(scan, opt_.features);
        const auto f1 = std::chrono::steady_clock::now();
        out.feat_s = std::chrono::duration<double>(f1 - f0).count();

        // Forward clearance plus the most open bearing, from the robot's own
        // scan. The open bearing uses a smoothed window so a single stray
        // beam through a slit does not attract the wander fallback.
        forward_clearance_ = std::numeric_limits<double>::infinity();
        left_clearance_ = std::numeric_limits<double>::infinity();
        right_clearance_ = std::numeric_limits<double>::infinity();
        double best_open = -1.0;
        const int n = int(scan.ranges.size());
        for (int i = 0; i < n; ++i) {
            const double b = scan.bearing(i);
            const double r = std::isfinite(scan.ranges[i]) ? scan.ranges[i] : scan.max_range;
            if (std::abs(b) <= 25.0 * kPi / 180.0 && std::isfinite(scan.ranges[i]))
                forward_clearance_ = std::min(forward_clearance_, scan.ranges[i]);
            if (b > 25.0 * kPi / 180.0 && b <= 70.0 * kPi / 180.0)
                left_clearance_ = std::min(left_clearance_, r);
            if (b < -25.0 * kPi / 180.0 && b >= -70.0 * kPi / 180.0)
                right_clearance_ = std::min(right_clearance_, r);
            if (i >= 20 && i + 20 < n) {
                double window_min = r;
                for (int j = i - 20; j <= i + 20; j += 5) {
                    const double rj =
                        std::isfinite(scan.ranges[j]) ? scan.ranges[j] : scan.max_range;
                    window_min = std::min(window_min, rj);
                }
                if (window_min > best_open) {
                    best_open = window_min;
                    best_open_bearing_ = b;
                }
            }
        }

        for (const auto& obs : ext.observations) {
            const Pose2D est_before = hash_pose_;
            auto match = localizer_.match_observation(obs, hash_pose_);
            out.search_s += localizer_.last_elapsed_s();
            out.trials += localizer_.last_trials();
            if (!match) continue;
            hash_pose_ = match->corrected_pose;
            out.matches.push_back({obs, *match, est_before});
            handle_match(obs, *match, t, out);
        }
        return out;
    }

    /// QR detections feed the identical localizer path. The payload digest is
    /// first matched against the node list directly (no preimage trials);
    /// the spiral search then recovers the cell, which is what re-anchors
    /// the pose.
    ScanOutcome process_qr(const std::vector<QrDetection>& detections, double t) {
        ScanOutcome out;
        for (const auto& det : detections) {
            Observation obs;
            obs.kind = LandmarkKind::qr;
            obs.position = {det.range * std::cos(det.bearing), det.range * std::sin(det.bearing)};
            obs.payload_digest = det.payload;
            bool known = false;
            for (const auto& d : graph_->node_digests)
                if (d == det.payload) {
                    known = true;
                    break;
                }
            if (!known) continue;
            const Pose2D est_before = hash_pose_;
            auto match = localizer_.match_observation(obs, hash_pose_);
            out.search_s += localizer_.last_elapsed_s();
            out.trials += localizer_.last_trials();
            if (!match) continue;
            hash_pose_ = match->corrected_pose;
            out.matches.push_back({obs, *match, est_before});
            handle_match(obs, *match, t, out);
        }
        return out;
    }

    /// Controller: rotate toward the goal heading, then drive at cruise
    /// speed. Blocked or stalled legs trigger a fixed recovery maneuver
    /// (back off, turn away, replan); repeated failures fall back to
    /// driving toward open space until a fresh match re-anchors the plan.
    Command control(double t) {
        if (mode_ == Mode::search_start) {
            if (t - mission_start_t_ > opt_.start_timeout_s && matched_nodes_.empty())
                aborted_ = true;
            return {0.0, 1.0};
        }
        if (mode_ == Mode::done) return {0.0, 0.5};

        if (mode_ == Mode::recover) {
            if (recover_ticks_ > 0) {
                --recover_ticks_;
                if (recover_phase_ == 0) return track(-0.25, hash_pose_.theta, false);
                return {0.0, 1.0};
            }
            if (recover_phase_ == 0) {
                recover_phase_ = 1;
                recover_ticks_ = int(std::llround(1.6 / opt_.control_dt / 1.0));
                return {0.0, 1.0};
            }
            plan_next(t);
            return {0.0, 0.0};
        }

        // Stall detection: commanded motion without odometry progress means
        // the robot is pressed against something its scan cone missed.
        if (cmd_distance_ > 1.0) {
            if (distance(odom_pose_.position(), progress_anchor_) < 0.35) {
                ++counters_.fails_stall;
                fail_current_leg(t);
                return {0.0, 0.0};
            }
            cmd_distance_ = 0.0;
            progress_anchor_ = odom_pose_.position();
        }

        if (t - leg_start_t_ > opt_.edge_timeout_s) {
            ++counters_.fails_timeout;
            fail_current_leg(t);
            return {0.0, 0.0};
        }

        double target_heading;
        if (mode_ == Mode::follow) {
            target_heading = follow_heading_;
        } else if (mode_ == Mode::wander) {
            target_heading = wander_heading_;
            if (t - leg_start_t_ > 8.0) {
                plan_next(t);
                return {0.0, 0.0};
            }
        } else {
            const Vec2 to_target = goto_target_ - hash_pose_.position();
            if (to_target.norm() < goto_radius_) {
                if (goto_node_ >= 0) current_node_ = goto_node_;
                plan_next(t);
                return {0.0, 0.0};
            }
            target_heading = std::atan2(to_target.y, to_target.x);
        }

        const double err = wrap_pi(target_heading - hash_pose_.theta);
        if (std::abs(err) > 15.0 * kPi / 180.0) return {0.0, std::clamp(3.0 * err, -1.2, 1.2)};
        if (forward_clearance_ < opt_.blocked_range) {
            ++counters_.fails_blocked;
            fail_current_leg(t);
            return {0.0, 0.0};
        }
        return track(opt_.cruise_speed, target_heading, true);
    }

private:
    Command track(double v, double heading, bool steer) {
        cmd_distance_ += std::abs(v) * opt_.control_dt;
        double omega = steer ? 2.0 * wrap_pi(heading - hash_pose_.theta) : 0.0;
        // Nudge away from close side obstacles while driving forward.
        if (v > 0.0) {
            if (left_clearance_ < 0.8) omega -= 0.8 * (0.8 - left_clearance_);
            if (right_clearance_ < 0.8) omega += 0.8 * (0.8 - right_clearance_);
        }
        return {v, std::clamp(omega, -0.8, 0.8)};
    }

    Vec2 node_position(int node) const {
        const MatchResult& c = *node_cells_[node];
        return {double(c.qx) * graph_->cfg.grid_resolution,
                double(c.qy) * graph_->cfg.grid_resolution};
    }

    /// Where the robot should stand when "at" a node: corners get a standoff
    /// into free space along their encoded normal bisector.
    Vec2 node_stand_point(int node) const {
        const MatchResult& cell = *node_cells_[node];
        Vec2 p = node_position(node);
        if (cell.kind == LandmarkKind::corner && cell.extra) {
            const double bin_width = kTwoPi / graph_->cfg.angle_bins;
            const double dir = (double(*cell.extra) + 0.5) * bin_width;
            p += Vec2{std::cos(dir), std::sin(dir)} * opt_.corner_standoff;
        }
        return p;
    }

    void handle_match(const Observation& obs, const MatchResult& match, double t,
                      ScanOutcome& out) {
        out.events += ";match:" + std::to_string(match.node);
        const bool is_new = !matched_nodes_.count(match.node);
        matched_nodes_.insert(match.node);
        node_cells_[match.node] = match;
        if (is_new) {
            decoded_edges_[match.node] = localizer_.decode_outgoing_edges(match);
            out.events += ";edges:" + std::to_string(match.node) + ":" +
                          std::to_string(decoded_edges_[match.node].size());
        }

        if (mode_ == Mode::search_start) {
            current_node_ = match.node;
            plan_next(t);
        } else if (mode_ == Mode::follow && match.node != follow_source_) {
            if (is_new) {
                ++counters_.arrivals_new;
                dfs_stack_.push_back(follow_source_);
                current_node_ = match.node;
                plan_next(t);
            } else if (t - leg_start_t_ > 3.0 &&
                       distance(hash_pose_.position(), node_stand_point(match.node)) < 2.0) {
                // Physically reached known territory; continue from there.
                ++counters_.arrivals_known;
                current_node_ = match.node;
                plan_next(t);
            }
        }
    }

    void fail_current_leg(double t) {
        leg_start_t_ = t;
        cmd_distance_ = 0.0;
        progress_anchor_ = odom_pose_.position();
        if (mode_ == Mode::goto_node && goto_node_ >= 0) ++goto_failures_[goto_node_];
        const bool was_follow = mode_ == Mode::follow;
        // Back off and turn before replanning.
        mode_ = Mode::recover;
        recover_phase_ = 0;
        recover_ticks_ = int(std::llround(0.6 / opt_.cruise_speed / opt_.control_dt)) * 2;
        if (was_follow && current_node_ >= 0 && node_cells_[current_node_])
            pending_return_ = current_node_;  // fall back toward the last matched node
    }

    void goto_to_node(int node) {
        ++counters_.goto_legs;
        goto_target_ = node_stand_point(node);
        goto_radius_ = opt_.arrive_radius;
        goto_node_ = node;
        mode_ = Mode::goto_node;
    }

    /// Depth-first over decoded bearings, preferring bins that do not point
    /// back toward nodes whose cells are already known.
    void plan_next(double t) {
        leg_start_t_ = t;
        cmd_distance_ = 0.0;
        progress_anchor_ = odom_pose_.position();
        if (pending_return_ >= 0) {
            const int node = pending_return_;
            pending_return_ = -1;
            if (node_cells_[node] && goto_failures_[node] < 3) {
                goto_to_node(node);
                return;
            }
        }
        if (current_node_ < 0 || !node_cells_[current_node_]) {
            mode_ = Mode::search_start;
            return;
        }
        // Navigate to the node before departing along one of its bearings.
        const Vec2 here = node_stand_point(current_node_);
        if (distance(hash_pose_.position(), here) > opt_.arrive_radius + 0.3) {
            if (goto_failures_[current_node_] < 3) {
                goto_to_node(current_node_);
            } else {
                wander();
            }
            return;
        }

        const auto it = decoded_edges_.find(current_node_);
        static const std::vector<std::pair<int, Digest>> kNone;
        const auto& bins = it != decoded_edges_.end() ? it->second : kNone;
        auto& tried = tried_bins_[current_node_];
        const double bin_width = kTwoPi / graph_->cfg.angle_bins;

        int best_bin = -1;
        bool best_known = true;
        for (const auto& [bin, digest] : bins) {
            if (tried.count(bin)) continue;
            bool known_target = false;
            const double heading = (bin + 0.5) * bin_width;
            for (int node : matched_nodes_) {
                if (node == current_node_ || !node_cells_[node]) continue;
                const Vec2 rel = node_position(node) - here;
                const double dist = rel.norm();
                if (dist < 0.5 || dist > 15.0) continue;
                if (std::abs(wrap_pi(std::atan2(rel.y, rel.x) - heading)) < bin_width) {
                    known_target = true;
                    break;
                }
            }
            if (best_bin < 0 || (best_known && !known_target)) {
                best_bin = bin;
                best_known = known_target;
            }
            if (!best_known) break;
        }

        if (best_bin >= 0) {
            ++counters_.follow_legs;
            tried.insert(best_bin);
            follow_source_ = current_node_;
            follow_heading_ = wrap_pi((best_bin + 0.5) * bin_width);
            mode_ = Mode::follow;
            return;
        }

        while (!dfs_stack_.empty()) {
            const int back = dfs_stack_.back();
            dfs_stack_.pop_back();
            if (node_cells_[back] && goto_failures_[back] < 3 && has_untried_bins(back)) {
                goto_to_node(back);
                return;
            }
        }
        // Stack exhausted: resume from the nearest matched node that still
        // has untried bearings.
        int best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (int node : matched_nodes_) {
            if (!node_cells_[node] || goto_failures_[node] >= 3) continue;
            if (!has_untried_bins(node)) continue;
            const double d = distance(hash_pose_.position(), node_position(node));
            if (d < best_d) {
                best_d = d;
                best = node;
            }
        }
        if (best >= 0) {
            goto_to_node(best);
            return;
        }
        if (int(matched_nodes_.size()) < int(graph_->size())) {
            wander();
            return;
        }
        mode_ = Mode::done;
    }

    bool has_untried_bins(int node) const {
        const auto it = decoded_edges_.find(node);
        if (it == decoded_edges_.end()) return false;
        for (const auto& [bin, digest] : it->second)
            if (!tried_bins_[node].count(bin)) return true;
        return false;
    }

    /// Exploration fallback: head into the most open direction the last scan
    /// showed, then replan. Keeps the robot moving when every planned leg
    /// has failed; fresh matches re-anchor the depth-first plan.
    void wander() {
        ++counters_.wander_legs;
        wander_heading_ = wrap_pi(hash_pose_.theta + best_open_bearing_);
        mode_ = Mode::wander;
    }

    const EncodedNavGraph* graph_;
    MissionOptions opt_;
    Localizer localizer_;

    Pose2D odom_pose_;
    Pose2D hash_pose_;

    Mode mode_ = Mode::search_start;
    int current_node_ = -1;
    int follow_source_ = -1;
    double follow_heading_ = 0.0;
    Vec2 goto_target_;
    double goto_radius_ = 0.35;
    int goto_node_ = -1;
    std::vector<int> dfs_stack_;

    std::set<int> matched_nodes_;
    std::vector<std::optional<MatchResult>> node_cells_;
    std::unordered_map<int, std::vector<std::pair<int, Digest>>> decoded_edges_;
    std::vector<std::set<int>> tried_bins_;

    double forward_clearance_ = std::numeric_limits<double>::infinity();
    double left_clearance_ = std::numeric_limits<double>::infinity();
    double right_clearance_ = std::numeric_limits<double>::infinity();
    double best_open_bearing_ = 0.0;
    double mission_start_t_ = 0.0;
    double leg_start_t_ = 0.0;
    bool aborted_ = false;

    int recover_phase_ = 0;
    int recover_ticks_ = 0;
    int pending_return_ = -1;
    double wander_heading_ = 0.0;
    std::unordered_map<int, int> goto_failures_;
    double cmd_distance_ = 0.0;
    Vec2 progress_anchor_;
    Counters counters_;
};

// ---------------------------------------------------------------------------
// Mission executor (harness side)
// ---------------------------------------------------------------------------

inline bool collides(const World& w, const Vec2& p, double radius) {
    for (const auto& wall : w.walls)
        if (point_segment_distance(p, wall) < radius) return true;
    return false;
}

namespace detail {

inline void record_matches(MissionLog& log, const RobotAgent::ScanOutcome& outcome,
                           const Pose2D& true_pose, double t) {
    for (const auto& rec : outcome.matches) {
        MatchEvent ev;
        ev.t = t;
        ev.node = rec.match.node;
        ev.trials = rec.match.trials;
        ev.error_before = distance(rec.est_before.position(), true_pose.position());
        ev.error_after = distance(rec.match.corrected_pose.position(), true_pose.position());
        ev.obs_distance = rec.obs.position.norm();
        ev.heading_error = std::abs(wrap_pi(rec.est_before.theta - true_pose.theta));
        log.matches.push_back(ev);
    }
}

}  // namespace detail

/// Runs the scan -> extract -> match -> navigate loop at a 10 Hz control tick
/// with 1 Hz scans. Fully deterministic for a fixed seed.
inline MissionLog run_mission(const World& w, const EncodedNavGraph& g, const LidarModel& lidar,
                              const OdometryModel& odom, const QrModel& qr,
                              const MissionOptions& opt, std::uint64_t seed) {
    Rng rng(seed);
    OdometryModel om = odom;
    if (om.bias_t == 0.0 && om.bias_r == 0.0)
        om = OdometryModel::sampled(odom.sigma_t, odom.sigma_r, rng);

    RobotAgent agent(g, opt);
    agent.begin(0.0);
    Pose2D true_pose = opt.deploy_pose;

    MissionLog log;
    log.duration_s = opt.duration_s;
    const int ticks = static_cast<int>(std::llround(opt.duration_s / opt.control_dt));
    const int scan_every =
        std::max(1, static_cast<int>(std::llround(opt.scan_period / opt.control_dt)));
    const double robot_radius = 0.175;

    for (int k = 0; k < ticks; ++k) {
        const double t = k * opt.control_dt;
        MissionTick tick;
        tick.t = t;

        if (k % scan_every == 0) {
            if (opt.use_lidar) {
                const ScanFrame scan = raycast_scan(w, true_pose, lidar, rng);
                auto outcome = agent.process_scan(scan, t);
                tick.feat_ms = outcome.feat_s * 1e3;
                tick.search_ms = outcome.search_s * 1e3;
                tick.trials = outcome.trials;
                tick.event = "scan" + outcome.events;
                detail::record_matches(log, outcome, true_pose, t);
            }
            if (opt.use_qr) {
                const auto dets = detect_qr(w, true_pose, qr, rng);
                auto outcome = agent.process_qr(dets, t);
                tick.search_ms += outcome.search_s * 1e3;
                tick.trials += outcome.trials;
                if (tick.event.empty()) tick.event = "scan";
                tick.event += outcome.events;
                detail::record_matches(log, outcome, true_pose, t);
            }
        }

        Command cmd = agent.control(t);
        if (agent.aborted()) {
            tick.event += tick.event.empty() ? "abort" : ";abort";
            log.aborted = true;
            tick.true_pose = true_pose;
            tick.odom_pose = agent.odom_pose();
            tick.hash_pose = agent.hash_pose();
            log.ticks.push_back(std::move(tick));
            break;
        }

        // Physical wall blocking: brake instead of penetrating.
        if (cmd.v != 0.0) {
            const Vec2 ahead =
                true_pose.position() +
                Vec2{std::cos(true_pose.theta), std::sin(true_pose.theta)} *
                    (cmd.v * opt.control_dt + robot_radius);
            if (collides(w, ahead, robot_radius)) cmd.v = 0.0;
        }

        auto [next_pose, inc] = step_motion(true_pose, cmd, opt.control_dt, om, rng);
        true_pose = next_pose;
        agent.integrate_odometry(inc);

        tick.true_pose = true_pose;
        tick.odom_pose = agent.odom_pose();
        tick.hash_pose = agent.hash_pose();
        log.ticks.push_back(std::move(tick));
    }
    log.matched_nodes = agent.matched_nodes();
    return log;
}

}  // namespace encnav
