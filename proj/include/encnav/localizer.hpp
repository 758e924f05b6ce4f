#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "encnav/feature_extraction.hpp"
#include "encnav/hashing.hpp"
#include "encnav/map_encoder.hpp"

namespace encnav {

/// Spatial tolerance of the trial-and-error search. The swept window is the
/// square of side 2R around the estimate, which yields
/// (2*floor(R/delta)+1)^2 candidate cells.
struct SearchBudget {
    double tolerance = 0.5;  // meters

    int max_ring(double delta) const { return static_cast<int>(std::floor(tolerance / delta)); }
    std::size_t offset_count(double delta) const {
        const std::size_t side = 2 * static_cast<std::size_t>(max_ring(delta)) + 1;
        return side * side;
    }
};

struct GridOffset {
    int dx = 0;
    int dy = 0;
    bool operator==(const GridOffset&) const = default;
};

/// Candidate cell offsets ordered by Chebyshev ring, clockwise within a ring
/// starting at (ring, 0). The first element is always (0, 0), so the nearest
/// candidate wins and ties inside a ring resolve deterministically.
inline std::vector<GridOffset> spiral_offsets(double tolerance, double delta) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("spiral_offsets: tolerance must be > 0");
    if (!(delta > 0.0)) throw std::invalid_argument("spiral_offsets: delta must be > 0");
    const int m = static_cast<int>(std::floor(tolerance / delta));
    std::vector<GridOffset> out;
    out.reserve(std::size_t(2 * m + 1) * std::size_t(2 * m + 1));
    out.push_back({0, 0});
    for (int r = 1; r <= m; ++r) {
        // Right edge going down, bottom edge going left, left edge going up,
        // top edge going right: clockwise with x right and y up.
        for (int y = 0; y >= -r; --y) out.push_back({r, y});
        for (int x = r - 1; x >= -r; --x) out.push_back({x, -r});
        for (int y = -r + 1; y <= r; ++y) out.push_back({-r, y});
        for (int x = -r + 1; x <= r; ++x) out.push_back({x, r});
        for (int y = r - 1; y >= 1; --y) out.push_back({r, y});
    }
    return out;
}

/// Result of a successful hash match: which node, the preimage fields that
/// reproduced its digest, the corrected pose, and the search cost.
struct MatchResult {
    int node = -1;
    LandmarkKind kind = LandmarkKind::doorway;
    std::int64_t qx = 0;
    std::int64_t qy = 0;
    std::int64_t qz = 0;
    std::optional<std::int64_t> extra;
    Pose2D corrected_pose;
    int trials = 0;
    double elapsed_s = 0.0;

    Preimage preimage() const { return cell_preimage(landmark_tag(kind), qx, qy, qz, extra); }
};

/// Applies a match to the pose estimate: the robot re-anchors its position on
/// the matched cell, then (for orientation-carrying kinds) snaps its heading
/// using the encoded orientation bin. Position is computed in the estimate's
/// frame, so with a noiseless observation the only residual is quantization.
inline Pose2D update_pose(const MatchResult& match, const Observation& obs,
                          const Pose2D& est_pose, const HashingConfig& cfg) {
    const double delta = cfg.grid_resolution;
    const Vec2 landmark_pos{double(match.qx) * delta, double(match.qy) * delta};
    const Vec2 displacement = obs.position.rotated(est_pose.theta);
    const Vec2 corrected = landmark_pos - displacement;

    double heading = est_pose.theta;
    if (match.extra && (match.kind == LandmarkKind::doorway || match.kind == LandmarkKind::corner)) {
        const double bin_width = kTwoPi / cfg.angle_bins;
        const double encoded_center = (double(*match.extra) + 0.5) * bin_width;
        const double observed_global = obs.orientation.value_or(0.0) + est_pose.theta;
        double residual = encoded_center - observed_global;
        // Doorway orientations are undirected lines; resolve modulo pi.
        if (match.kind == LandmarkKind::doorway) {
            residual = std::remainder(residual, kPi);
        } else {
            residual = wrap_pi(residual);
        }
        heading = est_pose.theta + residual;
    }
    return Pose2D{corrected.x, corrected.y, heading};
}

/// Trial-and-error matcher. Holds the published graph in hash-set form plus a
/// memo of already-computed candidate digests: a cell's digest is a pure
/// function of (kind, cell, extra), so repeated scans never rehash it.
class Localizer {
public:
    Localizer(const EncodedNavGraph& graph, SearchBudget budget)
        : graph_(&graph), budget_(budget), offsets_(spiral_offsets(budget.tolerance,
                                                                   graph.cfg.grid_resolution)) {
        for (std::size_t i = 0; i < graph.node_digests.size(); ++i)
            node_index_.emplace(graph.node_digests[i], int(i));
    }

    const SearchBudget& budget() const { return budget_; }
    const std::vector<GridOffset>& offsets() const { return offsets_; }

    /// Sweeps candidate cells around the estimated observation position in
    /// spiral order and returns the first whose kind-appropriate digest is
    /// published in the graph. Orientation is taken from the current heading
    /// estimate; only position is swept.
    std::optional<MatchResult> match_observation(const Observation& obs, const Pose2D& est_pose) {
        const auto t0 = std::chrono::steady_clock::now();
        const HashingConfig& cfg = graph_->cfg;
        const Vec2 global = est_pose.to_global(obs.position);
        const std::int64_t base_x = quantize_scalar(global.x, cfg.grid_resolution);
        const std::int64_t base_y = quantize_scalar(global.y, cfg.grid_resolution);

        std::optional<std::int64_t> extra;
        switch (obs.kind) {
            case LandmarkKind::doorway:
                extra = quantize_angle(wrap_half_turn(obs.orientation.value_or(0.0) + est_pose.theta),
                                       cfg.angle_bins);
                break;
            case LandmarkKind::corner:
                extra = quantize_angle(obs.orientation.value_or(0.0) + est_pose.theta,
                                       cfg.angle_bins);
                break;
            case LandmarkKind::room:
                extra = quantize_scalar(obs.area.value_or(0.0), cfg.area_quantum);
                break;
            case LandmarkKind::qr:
                extra = std::nullopt;
                break;
        }

        int trials = 0;
        std::optional<MatchResult> result;
        for (const auto& off : offsets_) {
            ++trials;
            const Digest d = cell_digest(obs.kind, base_x + off.dx, base_y + off.dy, extra);
            const auto it = node_index_.find(d);
            if (it == node_index_.end()) continue;
            // QR observations carry the marker's payload digest; a cell only
            // counts when it reproduces that exact node.
            if (obs.payload_digest && graph_->node_digests[it->second] != *obs.payload_digest)
                continue;
            MatchResult m;
            m.node = it->second;
            m.kind = obs.kind;
            m.qx = base_x + off.dx;
            m.qy = base_y + off.dy;
            m.qz = 0;
            m.extra = extra;
            m.trials = trials;
            m.corrected_pose = update_pose(m, obs, est_pose, cfg);
            result = m;
            break;
        }
        if (!result) trials = static_cast<int>(offsets_.size());
        const auto t1 = std::chrono::steady_clock::now();
        if (result) {
            result->trials = trials;
            result->elapsed_s = std::chrono::duration<double>(t1 - t0).count();
        }
        last_trials_ = trials;
        last_elapsed_s_ = std::chrono::duration<double>(t1 - t0).count();
        return result;
    }

    int last_trials() const { return last_trials_; }
    double last_elapsed_s() const { return last_elapsed_s_; }

    /// Exhaustively tries every bearing bin against the matched node's row of
    /// the edge table: exactly K digests per call.
    std::vector<std::pair<int, Digest>> decode_outgoing_edges(const MatchResult& node) {
        const HashingConfig& cfg = graph_->cfg;
        std::unordered_set<Digest, DigestHash> row;
        for (const auto& d : graph_->edge_digests[node.node])
            if (!d.is_zero()) row.insert(d);
        std::vector<std::pair<int, Digest>> out;
        for (int bin = 0; bin < cfg.angle_bins; ++bin) {
            const Digest d = hash256(edge_preimage(landmark_tag(node.kind), node.qx, node.qy,
                                                   node.qz, bin, cfg));
            if (row.count(d)) out.emplace_back(bin, d);
        }
        return out;
    }

private:
    Digest cell_digest(LandmarkKind kind, std::int64_t qx, std::int64_t qy,
                       std::optional<std::int64_t> extra) {
        CacheKey key{kind, qx, qy, extra.value_or(kNoExtra)};
        auto it = digest_memo_.find(key);
        if (it != digest_memo_.end()) return it->second;
        const Digest d = hash256(cell_preimage(landmark_tag(kind), qx, qy, 0, extra));
        digest_memo_.emplace(key, d);
        return d;
    }

    static constexpr std::int64_t kNoExtra = std::numeric_limits<std::int64_t>::min();

    struct CacheKey {
        LandmarkKind kind;
        std::int64_t qx, qy, extra;
        bool operator==(const CacheKey&) const = default;
    };
    struct CacheKeyHash {
        std::size_t operator()(const CacheKey& k) const {
            std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(k.kind);
            auto mix = [&h](std::uint64_t v) {
                h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            };
            mix(static_cast<std::uint64_t>(k.qx));
            mix(static_cast<std::uint64_t>(k.qy));
            mix(static_cast<std::uint64_t>(k.extra));
            return static_cast<std::size_t>(h);
        }
    };

    const EncodedNavGraph* graph_;
    SearchBudget budget_;
    std::vector<GridOffset> offsets_;
    std::unordered_map<Digest, int, DigestHash> node_index_;
    std::unordered_map<CacheKey, Digest, CacheKeyHash> digest_memo_;
    int last_trials_ = 0;
    double last_elapsed_s_ = 0.0;
};

}  // namespace encnav
