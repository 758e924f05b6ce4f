#include <catch2/catch_amalgamated.hpp>

#include <optional>
#include <set>

#include "encnav/localizer.hpp"
#include "encnav/rng.hpp"

using namespace encnav;

namespace {

struct OracleHit {
    int node = -1;
    GridOffset offset;
    std::size_t spiral_index = 0;
};

/// Exhaustive search over every offset in the window, selecting the
/// minimum-Chebyshev-ring match with ties broken by spiral order. Computes
/// digests straight from the preimage builders, independent of Localizer.
std::optional<OracleHit> brute_force_match(const Observation& obs, const Pose2D& est,
                                           const EncodedNavGraph& g, double tolerance) {
    const auto& cfg = g.cfg;
    const Vec2 global = est.to_global(obs.position);
    const std::int64_t bx = quantize_scalar(global.x, cfg.grid_resolution);
    const std::int64_t by = quantize_scalar(global.y, cfg.grid_resolution);
    std::optional<std::int64_t> extra;
    if (obs.kind == LandmarkKind::doorway)
        extra = quantize_angle(wrap_half_turn(*obs.orientation + est.theta), cfg.angle_bins);
    else if (obs.kind == LandmarkKind::corner)
        extra = quantize_angle(*obs.orientation + est.theta, cfg.angle_bins);
    else if (obs.kind == LandmarkKind::room)
        extra = quantize_scalar(*obs.area, cfg.area_quantum);

    const auto spiral = spiral_offsets(tolerance, cfg.grid_resolution);
    auto spiral_pos = [&](const GridOffset& o) {
        for (std::size_t i = 0; i < spiral.size(); ++i)
            if (spiral[i] == o) return i;
        return spiral.size();
    };

    const int m = int(std::floor(tolerance / cfg.grid_resolution));
    std::optional<OracleHit> best;
    for (int dx = -m; dx <= m; ++dx) {
        for (int dy = -m; dy <= m; ++dy) {
            const Digest d =
                hash256(cell_preimage(landmark_tag(obs.kind), bx + dx, by + dy, 0, extra));
            for (std::size_t n = 0; n < g.node_digests.size(); ++n) {
                if (g.node_digests[n] != d) continue;
                OracleHit hit{int(n), {dx, dy}, spiral_pos({dx, dy})};
                if (!best || hit.spiral_index < best->spiral_index) best = hit;
            }
        }
    }
    return best;
}

LandmarkDescriptor make_landmark(Rng& rng, int id, LandmarkKind kind) {
    LandmarkDescriptor lm;
    lm.id = id;
    lm.kind = kind;
    lm.position = {rng.uniform(-18.0, 18.0), rng.uniform(-18.0, 18.0), 0.0};
    if (kind == LandmarkKind::doorway) lm.orientation = rng.uniform(0.0, kPi);
    if (kind == LandmarkKind::corner) lm.orientation = rng.uniform(0.0, kTwoPi);
    if (kind == LandmarkKind::room) lm.area = rng.uniform(5.0, 100.0);
    return lm;
}

Observation observe(const LandmarkDescriptor& lm, const Pose2D& true_pose) {
    Observation obs;
    obs.kind = lm.kind;
    obs.position = true_pose.to_local({lm.position.x, lm.position.y});
    if (lm.kind == LandmarkKind::doorway)
        obs.orientation = wrap_half_turn(*lm.orientation - true_pose.theta);
    else if (lm.kind == LandmarkKind::corner)
        obs.orientation = wrap_two_pi(*lm.orientation - true_pose.theta);
    else if (lm.kind == LandmarkKind::room)
        obs.area = lm.area;
    return obs;
}

}  // namespace

TEST_CASE("spiral offset counts reproduce the published series") {
    CHECK(spiral_offsets(0.5, 0.4).size() == 9);
    CHECK(spiral_offsets(0.5, 0.2).size() == 25);
    CHECK(spiral_offsets(0.5, 0.1).size() == 121);
    CHECK(spiral_offsets(0.5, 0.05).size() == 441);
    CHECK(spiral_offsets(0.5, 0.025).size() == 1681);
    const auto one = spiral_offsets(0.5, 0.6);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == GridOffset{0, 0});
    CHECK_THROWS_AS(spiral_offsets(0.0, 0.1), std::invalid_argument);
}

TEST_CASE("spiral order: chebyshev rings, clockwise from (ring, 0)") {
    const auto offs = spiral_offsets(0.5, 0.2);  // m = 2
    REQUIRE(offs.size() == 25);
    CHECK(offs[0] == GridOffset{0, 0});
    const std::vector<GridOffset> ring1 = {{1, 0},  {1, -1}, {0, -1}, {-1, -1},
                                           {-1, 0}, {-1, 1}, {0, 1},  {1, 1}};
    for (std::size_t i = 0; i < ring1.size(); ++i) CHECK(offs[1 + i] == ring1[i]);

    int prev_ring = 0;
    std::set<std::pair<int, int>> seen;
    for (const auto& o : offs) {
        const int ring = std::max(std::abs(o.dx), std::abs(o.dy));
        CHECK(ring >= prev_ring - 0);
        CHECK(ring <= 2);
        prev_ring = std::max(prev_ring, ring);
        CHECK(seen.insert({o.dx, o.dy}).second);
    }
    CHECK(offs[9] == GridOffset{2, 0});  // ring 2 starts at (2, 0)
}

TEST_CASE("exact estimate matches on the first trial") {
    HashingConfig cfg;
    cfg.grid_resolution = 0.1;
    Rng rng(21);
    std::vector<LandmarkDescriptor> lms;
    for (int i = 0; i < 10; ++i) lms.push_back(make_landmark(rng, i, LandmarkKind::corner));
    lms[4].position = {3.0, -2.0, 0.0};  // exactly on the grid
    const auto g = build_nav_graph(lms, {}, cfg, 0);

    Localizer loc(g, SearchBudget{0.5});
    const Pose2D true_pose{1.0, 1.0, 0.7};
    const auto obs = observe(lms[4], true_pose);
    const auto m = loc.match_observation(obs, true_pose);
    REQUIRE(m.has_value());
    CHECK(m->node == 4);
    CHECK(m->trials == 1);
}

TEST_CASE("injected translation error is found in the minimal ring") {
    HashingConfig cfg;
    cfg.grid_resolution = 0.1;
    Rng rng(22);
    std::vector<LandmarkDescriptor> lms;
    for (int i = 0; i < 8; ++i) lms.push_back(make_landmark(rng, i, LandmarkKind::doorway));
    lms[2].position = {5.0, 5.0, 0.0};
    lms[2].orientation = 0.3;
    const auto g = build_nav_graph(lms, {}, cfg, 0);
    Localizer loc(g, SearchBudget{0.5});

    const Pose2D true_pose{0.0, 0.0, 0.0};
    const Pose2D est{0.30, 0.0, 0.0};  // ring 3 at most
    const auto obs = observe(lms[2], true_pose);
    const auto m = loc.match_observation(obs, est);
    REQUIRE(m.has_value());
    CHECK(m->node == 2);
    CHECK(m->trials <= 49);

    const auto oracle = brute_force_match(obs, est, g, 0.5);
    REQUIRE(oracle.has_value());
    CHECK(oracle->node == m->node);
}

TEST_CASE("error beyond the tolerance yields no match and a full sweep") {
    HashingConfig cfg;
    cfg.grid_resolution = 0.1;
    std::vector<LandmarkDescriptor> lms;
    LandmarkDescriptor lm;
    lm.id = 0;
    lm.kind = LandmarkKind::corner;
    lm.position = {5.0, 5.0, 0.0};
    lm.orientation = 1.0;
    lms.push_back(lm);
    const auto g = build_nav_graph(lms, {}, cfg, 0);
    Localizer loc(g, SearchBudget{0.5});

    const Pose2D true_pose{0.0, 0.0, 0.0};
    const Pose2D est{0.80, 0.0, 0.0};
    const auto obs = observe(lms[0], true_pose);
    CHECK_FALSE(loc.match_observation(obs, est).has_value());
    CHECK(loc.last_trials() == 121);  // equality exactly on no-match
}

TEST_CASE("oracle equivalence over randomized instances") {
    HashingConfig cfg;
    cfg.grid_resolution = 0.1;
    Rng rng(31);
    std::vector<LandmarkDescriptor> lms;
    const LandmarkKind kinds[] = {LandmarkKind::doorway, LandmarkKind::corner, LandmarkKind::room};
    for (int i = 0; i < 30; ++i) lms.push_back(make_landmark(rng, i, kinds[i % 3]));
    const auto g = build_nav_graph(lms, {}, cfg, 0);
    Localizer loc(g, SearchBudget{0.5});

    int matched = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t target = rng.uniform_index(lms.size());
        const Pose2D true_pose{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
                               rng.uniform(-kPi, kPi)};
        const Pose2D est{true_pose.x + rng.uniform(-0.7, 0.7),
                         true_pose.y + rng.uniform(-0.7, 0.7), true_pose.theta};
        const auto obs = observe(lms[target], true_pose);
        const auto mine = loc.match_observation(obs, est);
        const auto oracle = brute_force_match(obs, est, g, 0.5);
        REQUIRE(mine.has_value() == oracle.has_value());
        if (mine) {
            ++matched;
            CHECK(mine->node == oracle->node);
            CHECK(mine->qx ==
                  quantize_scalar(est.to_global(obs.position).x, 0.1) + oracle->offset.dx);
            // Soundness: the returned preimage re-hashes to the node digest.
            CHECK(hash256(mine->preimage()) == g.node_digests[mine->node]);
            CHECK(mine->trials <= int(loc.offsets().size()));
        } else {
            CHECK(loc.last_trials() == int(loc.offsets().size()));
        }
    }
    CHECK(matched > 100);
}

TEST_CASE("update_pose re-anchors position in the estimate frame") {
    HashingConfig cfg;
    cfg.grid_resolution = 0.1;
    MatchResult m;
    m.kind = LandmarkKind::qr;
    m.qx = 50;
    m.qy = 30;
    Observation obs;
    obs.kind = LandmarkKind::qr;
    obs.position = {1.0, 0.0};
    const Pose2D est{3.7, 2.2, 0.0};
    const Pose2D out = update_pose(m, obs, est, cfg);
    CHECK_THAT(out.x, Catch::Matchers::WithinAbs(4.0, 1e-12));
    CHECK_THAT(out.y, Catch::Matchers::WithinAbs(3.0, 1e-12));
    CHECK_THAT(out.theta, Catch::Matchers::WithinAbs(0.0, 1e-12));  // qr: heading unchanged
}

TEST_CASE("update_pose heading correction stays within a bin width") {
    HashingConfig cfg;
    cfg.grid_resolution = 0.1;
    cfg.angle_bins = 72;
    const double bin = kTwoPi / cfg.angle_bins;

    const double true_orientation = 10.5 * bin;  // mid-bin
    const double heading_err = 5.0 * kPi / 180.0;
    MatchResult m;
    m.kind = LandmarkKind::doorway;
    m.qx = 40;
    m.qy = 0;
    m.extra = quantize_angle(true_orientation, cfg.angle_bins);

    Observation obs;
    obs.kind = LandmarkKind::doorway;
    obs.position = {2.0, 0.0};
    const Pose2D true_pose{0.0, 0.0, 0.0};
    obs.orientation = wrap_half_turn(true_orientation - true_pose.theta);

    const Pose2D est{0.0, 0.0, heading_err};
    const Pose2D out = update_pose(m, obs, est, cfg);
    CHECK(std::abs(wrap_pi(out.theta - true_pose.theta)) <= bin / 2 + 1e-9);

    // Room matches leave the heading untouched.
    MatchResult room;
    room.kind = LandmarkKind::room;
    room.qx = 40;
    room.qy = 0;
    room.extra = 100;
    Observation robs;
    robs.kind = LandmarkKind::room;
    robs.position = {2.0, 0.0};
    robs.area = 25.0;
    CHECK(update_pose(room, robs, est, cfg).theta == est.theta);
}

TEST_CASE("noiseless post-match position error is quantization only") {
    HashingConfig cfg;
    cfg.grid_resolution = 0.1;
    Rng rng(77);
    for (int i = 0; i < 500; ++i) {
        std::vector<LandmarkDescriptor> lms;
        lms.push_back(make_landmark(rng, 0, LandmarkKind::corner));
        const auto g = build_nav_graph(lms, {}, cfg, 0);
        Localizer loc(g, SearchBudget{0.5});

        const Pose2D true_pose{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                               rng.uniform(-kPi, kPi)};
        const Pose2D est{true_pose.x + rng.uniform(-0.4, 0.4),
                         true_pose.y + rng.uniform(-0.4, 0.4), true_pose.theta};
        const auto obs = observe(lms[0], true_pose);
        const auto m = loc.match_observation(obs, est);
        REQUIRE(m.has_value());
        const Pose2D corrected = update_pose(*m, obs, est, cfg);
        const double err = distance(corrected.position(), true_pose.position());
        CHECK(err <= cfg.grid_resolution / 2.0 * std::sqrt(2.0) + 1e-9);
    }
}

TEST_CASE("decode_outgoing_edges recovers the compiler's bearings") {
    HashingConfig cfg;
    cfg.angle_bins = 16;
    Rng rng(13);
    std::vector<LandmarkDescriptor> lms;
    for (int i = 0; i < 6; ++i) lms.push_back(make_landmark(rng, i, LandmarkKind::corner));
    const std::vector<std::pair<int, int>> edges = {{0, 1}, {0, 3}, {0, 5}, {2, 0}};
    const auto g = build_nav_graph(lms, edges, cfg, 0);
    Localizer loc(g, SearchBudget{0.5});

    MatchResult node0;
    node0.node = 0;
    node0.kind = lms[0].kind;
    node0.qx = quantize_scalar(lms[0].position.x, cfg.grid_resolution);
    node0.qy = quantize_scalar(lms[0].position.y, cfg.grid_resolution);
    node0.qz = 0;

    const auto decoded = loc.decode_outgoing_edges(node0);
    REQUIRE(decoded.size() == 3);
    std::set<int> bins;
    for (auto [bin, digest] : decoded) {
        bins.insert(bin);
        bool in_row = false;
        for (const auto& d : g.edge_digests[0])
            if (d == digest) in_row = true;
        CHECK(in_row);
    }
    std::set<int> expected;
    for (auto [i, j] : edges) {
        if (i != 0) continue;
        const double bearing = std::atan2(lms[j].position.y - lms[0].position.y,
                                          lms[j].position.x - lms[0].position.x);
        expected.insert(quantize_angle(bearing, cfg.angle_bins));
    }
    CHECK(bins == expected);

    MatchResult node1 = node0;
    node1.node = 1;
    node1.qx = quantize_scalar(lms[1].position.x, cfg.grid_resolution);
    node1.qy = quantize_scalar(lms[1].position.y, cfg.grid_resolution);
    CHECK(loc.decode_outgoing_edges(node1).empty());
}
