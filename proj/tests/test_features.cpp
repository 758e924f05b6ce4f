#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "encnav/feature_extraction.hpp"
#include "encnav/rng.hpp"
#include "encnav/sim_world.hpp"

using namespace encnav;

namespace {

World square_room(double half) {
    World w;
    w.walls.push_back({{-half, -half}, {half, -half}});
    w.walls.push_back({{half, -half}, {half, half}});
    w.walls.push_back({{half, half}, {-half, half}});
    w.walls.push_back({{-half, half}, {-half, -half}});
    return w;
}

/// Closed-form beam length inside an axis-aligned square centered on the
/// origin, for a robot at the origin.
double square_beam_length(double half, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    double best = std::numeric_limits<double>::infinity();
    if (std::abs(c) > 1e-15) {
        const double t = half / std::abs(c);
        if (std::abs(t * s) <= half + 1e-12) best = std::min(best, t);
    }
    if (std::abs(s) > 1e-15) {
        const double t = half / std::abs(s);
        if (std::abs(t * c) <= half + 1e-12) best = std::min(best, t);
    }
    return best;
}

FeaturePoint fp(double x, double y, FeatureClass cls) {
    FeaturePoint f;
    f.position = {x, y};
    f.cls = cls;
    f.incoming_dir = {1, 0};
    f.outgoing_dir = {0, 1};
    return f;
}

}  // namespace

TEST_CASE("raycast in a square room matches the analytic oracle") {
    const World w = square_room(2.0);
    LidarModel lm;
    lm.range_sigma = 0.0;
    Rng rng(1);
    const Pose2D pose{0.0, 0.0, 20.0 * kPi / 180.0};
    const ScanFrame scan = raycast_scan(w, pose, lm, rng);
    REQUIRE(scan.ranges.size() == 1080);
    for (int i = 0; i < 1080; ++i) {
        const double global = pose.theta + scan.bearing(i);
        const double expect = square_beam_length(2.0, global);
        REQUIRE_THAT(scan.ranges[i], Catch::Matchers::WithinAbs(expect, 1e-9));
    }
}

TEST_CASE("empty world: all beams sentinel, extraction yields nothing") {
    World w;
    LidarModel lm;
    Rng rng(2);
    const ScanFrame scan = raycast_scan(w, Pose2D{0, 0, 0}, lm, rng);
    for (double r : scan.ranges) CHECK(std::isinf(r));
    CHECK(extract_segments(scan).empty());
}

TEST_CASE("single straight wall produces one segment") {
    World w;
    w.walls.push_back({{-6.0, 2.0}, {6.0, 2.0}});
    LidarModel lm;
    lm.range_sigma = 0.0;
    Rng rng(3);
    const ScanFrame scan = raycast_scan(w, Pose2D{0, 0, kPi / 2}, lm, rng);
    const auto segs = extract_segments(scan);
    REQUIRE(segs.size() == 1);
    CHECK_THAT(std::abs(segs[0].direction().y), Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("square room: segments, corners, and the room triple") {
    const World w = square_room(2.0);
    LidarModel lm;
    lm.range_sigma = 0.0;
    Rng rng(4);
    const Pose2D pose{0.0, 0.0, 20.0 * kPi / 180.0};
    const ScanFrame scan = raycast_scan(w, pose, lm, rng);

    const auto segs = extract_segments(scan);
    CHECK(segs.size() >= 3);
    CHECK(segs.size() <= 5);

    const auto features = classify_feature_points(segs);
    REQUIRE(features.size() == 3);
    for (const auto& f : features) CHECK(f.cls == FeatureClass::convex);

    // Corner positions in the robot frame map back to the square's corners.
    for (const auto& f : features) {
        const Vec2 g = pose.to_global(f.position);
        CHECK_THAT(std::abs(g.x), Catch::Matchers::WithinAbs(2.0, 1e-6));
        CHECK_THAT(std::abs(g.y), Catch::Matchers::WithinAbs(2.0, 1e-6));
    }

    const auto rooms = detect_rooms(features);
    REQUIRE(rooms.size() == 1);
    CHECK_THAT(*rooms[0].area, Catch::Matchers::WithinAbs(8.0, 1e-6));
    const Vec2 centroid = pose.to_global(rooms[0].position);
    CHECK_THAT(centroid.x, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-6));
    CHECK_THAT(centroid.y, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-6));

    // Idempotence.
    const auto again = extract_observations(scan);
    REQUIRE(again.features.size() == features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        CHECK(again.features[i].position == features[i].position);
        CHECK(again.features[i].cls == features[i].cls);
    }
}

TEST_CASE("door post shows a concave near corner") {
    // A wall ending at a square door post; robot approaching obliquely from
    // the front. The post's near-inner corner reads concave (free space
    // around it exceeds 180 degrees).
    World w;
    w.walls.push_back({{-6.0, 0.0}, {-0.1, 0.0}});
    w.walls.push_back({{-0.1, -0.1}, {0.1, -0.1}});
    w.walls.push_back({{0.1, -0.1}, {0.1, 0.1}});
    w.walls.push_back({{0.1, 0.1}, {-0.1, 0.1}});
    w.walls.push_back({{-0.1, 0.1}, {-0.1, -0.1}});
    LidarModel lm;
    lm.range_sigma = 0.0;
    Rng rng(5);
    const Pose2D pose{1.5, -2.0, kPi / 2};
    const ScanFrame scan = raycast_scan(w, pose, lm, rng);
    const auto segs = extract_segments(scan);
    const auto features = classify_feature_points(segs);
    bool found_concave = false;
    for (const auto& f : features) {
        const Vec2 g = pose.to_global(f.position);
        if (f.cls == FeatureClass::concave && distance(g, {0.1, -0.1}) < 0.05)
            found_concave = true;
    }
    CHECK(found_concave);
}

TEST_CASE("collinear gap does not merge or form corners") {
    World w;
    w.walls.push_back({{-6.0, 2.0}, {-1.0, 2.0}});
    w.walls.push_back({{1.0, 2.0}, {6.0, 2.0}});
    LidarModel lm;
    lm.range_sigma = 0.0;
    Rng rng(6);
    const ScanFrame scan = raycast_scan(w, Pose2D{0, 0, kPi / 2}, lm, rng);
    const auto segs = extract_segments(scan);
    REQUIRE(segs.size() == 2);
    CHECK(classify_feature_points(segs).empty());
}

TEST_CASE("doorway detection thresholds are a closed interval") {
    const auto at = [](double d) {
        return std::vector<FeaturePoint>{fp(2.0, 0.0, FeatureClass::concave),
                                         fp(2.0, d, FeatureClass::concave)};
    };
    const auto mid = detect_doorways(at(1.8));
    REQUIRE(mid.size() == 1);
    CHECK_THAT(mid[0].position.x, Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK_THAT(mid[0].position.y, Catch::Matchers::WithinAbs(0.9, 1e-12));
    CHECK_THAT(*mid[0].orientation, Catch::Matchers::WithinAbs(kPi / 2, 1e-12));

    CHECK(detect_doorways(at(1.0)).empty());
    CHECK(detect_doorways(at(1.2)).size() == 1);   // closed lower bound
    CHECK(detect_doorways(at(2.5)).size() == 1);   // closed upper bound
    CHECK(detect_doorways(at(2.501)).empty());
}

TEST_CASE("doorway detection is order invariant") {
    std::vector<FeaturePoint> fwd = {fp(1.0, 1.0, FeatureClass::concave),
                                     fp(2.5, 2.0, FeatureClass::concave)};
    std::vector<FeaturePoint> rev = {fwd[1], fwd[0]};
    const auto a = detect_doorways(fwd);
    const auto b = detect_doorways(rev);
    REQUIRE(a.size() == 1);
    REQUIRE(b.size() == 1);
    CHECK(a[0].position == b[0].position);
    CHECK_THAT(*a[0].orientation, Catch::Matchers::WithinAbs(*b[0].orientation, 1e-12));
}

TEST_CASE("corner detection excludes doorway members and convex points") {
    std::vector<FeaturePoint> features = {
        fp(0.0, 0.0, FeatureClass::concave),   // lone concave -> corner
        fp(5.0, 0.0, FeatureClass::concave),   // doorway pair member
        fp(5.0, 1.8, FeatureClass::concave),   // doorway pair member
        fp(9.0, 2.0, FeatureClass::convex),    // never a corner
    };
    const auto doorways = detect_doorways(features);
    REQUIRE(doorways.size() == 1);
    const auto corners = detect_corners(features, doorways);
    REQUIRE(corners.size() == 1);
    CHECK(corners[0].position == Vec2{0.0, 0.0});
    CHECK(corners[0].orientation.has_value());
}

TEST_CASE("corner orientation is the free-side normal bisector") {
    // Walls along +x and +y from the corner, robot outside the quadrant.
    FeaturePoint f;
    f.position = {2.0, 2.0};
    f.cls = FeatureClass::concave;
    f.incoming_dir = {1.0, 0.0};
    f.outgoing_dir = {0.0, 1.0};
    const auto corners = detect_corners({f}, {});
    REQUIRE(corners.size() == 1);
    CHECK_THAT(*corners[0].orientation, Catch::Matchers::WithinAbs(1.25 * kPi, 1e-9));
}

TEST_CASE("room triples: consecutive convex runs only") {
    std::vector<FeaturePoint> features = {
        fp(0.0, 0.0, FeatureClass::convex),
        fp(4.0, 0.0, FeatureClass::convex),
        fp(4.0, 3.0, FeatureClass::convex),
    };
    auto rooms = detect_rooms(features);
    REQUIRE(rooms.size() == 1);
    CHECK_THAT(rooms[0].position.x, Catch::Matchers::WithinAbs(8.0 / 3.0, 1e-12));
    CHECK_THAT(rooms[0].position.y, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(*rooms[0].area, Catch::Matchers::WithinAbs(6.0, 1e-12));

    // A concave interruption breaks the run.
    features.insert(features.begin() + 1, fp(2.0, 0.5, FeatureClass::concave));
    CHECK(detect_rooms(features).empty());

    // Degenerate collinear triple is discarded.
    const std::vector<FeaturePoint> flat = {fp(0, 0, FeatureClass::convex),
                                            fp(1, 0, FeatureClass::convex),
                                            fp(2, 0, FeatureClass::convex)};
    CHECK(detect_rooms(flat).empty());

    // Four consecutive convex corners: two overlapping triples, equal areas,
    // distinct centroids.
    const std::vector<FeaturePoint> rect = {
        fp(0, 0, FeatureClass::convex), fp(4, 0, FeatureClass::convex),
        fp(4, 3, FeatureClass::convex), fp(0, 3, FeatureClass::convex)};
    const auto two = detect_rooms(rect);
    REQUIRE(two.size() == 2);
    CHECK_THAT(*two[0].area, Catch::Matchers::WithinAbs(*two[1].area, 1e-12));
    CHECK(two[0].position != two[1].position);
}

TEST_CASE("observation conservation: defining features exist in the list") {
    std::vector<FeaturePoint> features = {
        fp(0.0, 0.0, FeatureClass::concave), fp(0.0, 1.8, FeatureClass::concave),
        fp(3.0, 0.0, FeatureClass::convex),  fp(6.0, 0.0, FeatureClass::convex),
        fp(6.0, 4.0, FeatureClass::convex),  fp(9.0, 9.0, FeatureClass::concave),
    };
    const auto doorways = detect_doorways(features);
    const auto corners = detect_corners(features, doorways);
    const auto rooms = detect_rooms(features);
    for (const auto* group : {&doorways, &corners, &rooms})
        for (const auto& obs : *group)
            for (int idx : obs.feature_indices) {
                CHECK(idx >= 0);
                CHECK(idx < int(features.size()));
            }
    REQUIRE(doorways.size() == 1);
    REQUIRE(corners.size() == 1);
    REQUIRE(rooms.size() == 1);
}

TEST_CASE("frame covariance: rigid transforms carry through") {
    Rng rng(8);
    for (int round = 0; round < 50; ++round) {
        const double dx = rng.uniform(-5, 5), dy = rng.uniform(-5, 5);
        const double rot = rng.uniform(-kPi, kPi);
        const Pose2D xf{dx, dy, rot};

        std::vector<FeaturePoint> base;
        for (int i = 0; i < 8; ++i) {
            FeaturePoint f;
            f.position = {rng.uniform(-8, 8), rng.uniform(-8, 8)};
            f.cls = rng.uniform() < 0.5 ? FeatureClass::concave : FeatureClass::convex;
            const double a = rng.uniform(0.0, kTwoPi);
            f.incoming_dir = {std::cos(a), std::sin(a)};
            f.outgoing_dir = {std::cos(a + kPi / 2), std::sin(a + kPi / 2)};
            base.push_back(f);
        }
        std::vector<FeaturePoint> moved = base;
        for (auto& f : moved) {
            f.position = xf.to_global(f.position);
            f.incoming_dir = f.incoming_dir.rotated(rot);
            f.outgoing_dir = f.outgoing_dir.rotated(rot);
        }

        const auto rooms_a = detect_rooms(base);
        const auto rooms_b = detect_rooms(moved);
        REQUIRE(rooms_a.size() == rooms_b.size());
        for (std::size_t i = 0; i < rooms_a.size(); ++i) {
            const Vec2 expect = xf.to_global(rooms_a[i].position);
            CHECK_THAT(rooms_b[i].position.x, Catch::Matchers::WithinAbs(expect.x, 1e-9));
            CHECK_THAT(rooms_b[i].position.y, Catch::Matchers::WithinAbs(expect.y, 1e-9));
            CHECK_THAT(*rooms_b[i].area, Catch::Matchers::WithinAbs(*rooms_a[i].area, 1e-9));
        }

        const auto doors_a = detect_doorways(base);
        const auto doors_b = detect_doorways(moved);
        REQUIRE(doors_a.size() == doors_b.size());
        for (std::size_t i = 0; i < doors_a.size(); ++i) {
            const Vec2 expect = xf.to_global(doors_a[i].position);
            CHECK_THAT(doors_b[i].position.x, Catch::Matchers::WithinAbs(expect.x, 1e-9));
            CHECK_THAT(doors_b[i].position.y, Catch::Matchers::WithinAbs(expect.y, 1e-9));
            CHECK_THAT(*doors_b[i].orientation,
                       Catch::Matchers::WithinAbs(wrap_half_turn(*doors_a[i].orientation + rot),
                                                  1e-9));
        }
    }
}
