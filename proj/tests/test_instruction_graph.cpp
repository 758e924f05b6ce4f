#include <catch2/catch_amalgamated.hpp>

#include "encnav/instruction_graph.hpp"
#include "encnav/rng.hpp"

using namespace encnav;

namespace {

Digest random_digest(Rng& rng) {
    Digest d;
    for (auto& b : d.bytes) b = std::uint8_t(rng.next_u64());
    return d;
}

}  // namespace

TEST_CASE("compose_trigger is order significant") {
    const Digest s = hash256("sensor-snapshot");
    const auto a = compose_trigger({TriggerInput::action("lift"), TriggerInput::sensor(s)});
    const auto b = compose_trigger({TriggerInput::sensor(s), TriggerInput::action("lift")});
    CHECK(a != b);
    CHECK(compose_trigger({TriggerInput::time_window(3)}) ==
          compose_trigger({TriggerInput::time_window(3)}));
    CHECK(compose_trigger({TriggerInput::position(1, 2, 0)}) !=
          compose_trigger({TriggerInput::position(1, 3, 0)}));
    CHECK_THROWS_AS(compose_trigger({}), std::invalid_argument);
}

TEST_CASE("try_advance walks a path graph sequentially") {
    const Digest s0 = hash256("see-dock");
    const Digest s1 = hash256("see-shelf");
    const Digest s2 = hash256("see-exit");
    EncodedInstructionGraph g;
    g.nodes = {compose_trigger({TriggerInput::sensor(s0)}),
               compose_trigger({TriggerInput::sensor(s1)}),
               compose_trigger({TriggerInput::sensor(s2)})};
    g.edges = {{0, 1, Digest::zero()}, {1, 2, Digest::zero()}};

    MissionState st = MissionState::initial(g);

    // Correct first input decodes only the first node.
    auto [st1, dec1] = try_advance(st, g, {TriggerInput::sensor(s0)});
    CHECK(dec1 == std::vector<int>{0});
    CHECK(st1.node_decoded[0]);
    CHECK_FALSE(st1.node_decoded[1]);

    // Wrong input: no change.
    auto [st1b, dec1b] = try_advance(st1, g, {TriggerInput::sensor(hash256("junk"))});
    CHECK(dec1b.empty());
    CHECK(st1b.node_decoded == st1.node_decoded);

    // Later inputs cannot skip ahead of the frontier.
    auto [stx, decx] = try_advance(st, g, {TriggerInput::sensor(s2)});
    CHECK(decx.empty());

    // Sequential completion.
    auto [st2, dec2] = try_advance(st1, g, {TriggerInput::sensor(s1)});
    CHECK(dec2 == std::vector<int>{1});
    auto [st3, dec3] = try_advance(st2, g, {TriggerInput::sensor(s2)});
    CHECK(dec3 == std::vector<int>{2});
    CHECK(st3.decoded_count() == 3);
}

TEST_CASE("try_advance decodes parallel branches in one call") {
    const Digest root = hash256("root");
    const Digest left = hash256("left");
    const Digest right = hash256("right");
    EncodedInstructionGraph g;
    g.nodes = {compose_trigger({TriggerInput::sensor(root)}),
               compose_trigger({TriggerInput::sensor(left)}),
               compose_trigger({TriggerInput::sensor(right)})};
    g.edges = {{0, 1, Digest::zero()}, {0, 2, Digest::zero()}};

    MissionState st = MissionState::initial(g);
    auto [st1, dec1] = try_advance(
        st, g,
        {TriggerInput::sensor(root), TriggerInput::sensor(left), TriggerInput::sensor(right)});
    CHECK(dec1.size() == 3);
    CHECK(st1.decoded_count() == 3);
}

TEST_CASE("non-empty edges gate their targets") {
    const Digest s0 = hash256("s0");
    const Digest s1 = hash256("s1");
    const Digest act = hash256("move-token");
    EncodedInstructionGraph g;
    g.nodes = {compose_trigger({TriggerInput::sensor(s0)}),
               compose_trigger({TriggerInput::sensor(s1)})};
    g.edges = {{0, 1, compose_trigger({TriggerInput::token(act)})}};

    MissionState st = MissionState::initial(g);
    auto [st1, d1] = try_advance(st, g, {TriggerInput::sensor(s0), TriggerInput::sensor(s1)});
    // Node 1 stays locked until the edge digest is reproduced.
    CHECK(d1 == std::vector<int>{0});
    auto [st2, d2] = try_advance(st1, g, {TriggerInput::sensor(s1)});
    CHECK(d2.empty());
    auto [st3, d3] = try_advance(st1, g, {TriggerInput::token(act), TriggerInput::sensor(s1)});
    CHECK(d3 == std::vector<int>{1});
}

TEST_CASE("cyclic graphs revalidate without corrupting history") {
    const Digest a = hash256("a"), b = hash256("b");
    EncodedInstructionGraph g;
    g.nodes = {compose_trigger({TriggerInput::sensor(a)}),
               compose_trigger({TriggerInput::sensor(b)})};
    g.edges = {{0, 1, Digest::zero()}, {1, 0, Digest::zero()}};
    MissionState st = MissionState::initial(g);
    auto [st1, d1] = try_advance(st, g, {TriggerInput::sensor(a), TriggerInput::sensor(b)});
    CHECK(st1.decoded_count() == 2);
    const auto history_before = st1.history;
    auto [st2, d2] = try_advance(st1, g, {TriggerInput::sensor(a), TriggerInput::sensor(b)});
    CHECK(d2.empty());
    CHECK(st2.history == history_before);
    CHECK(st2.decoded_count() == 2);
}

TEST_CASE("monotonicity under random replay") {
    Rng rng(99);
    const Digest s0 = hash256("x0"), s1 = hash256("x1"), s2 = hash256("x2");
    EncodedInstructionGraph g;
    g.nodes = {compose_trigger({TriggerInput::sensor(s0)}),
               compose_trigger({TriggerInput::sensor(s1)}),
               compose_trigger({TriggerInput::sensor(s2)})};
    g.edges = {{0, 1, Digest::zero()}, {1, 2, Digest::zero()}};
    MissionState st = MissionState::initial(g);
    const std::vector<Digest> pool = {s0, s1, s2};
    int last = 0;
    for (int i = 0; i < 200; ++i) {
        std::vector<TriggerInput> inputs;
        const int n = 1 + int(rng.uniform_index(3));
        for (int k = 0; k < n; ++k) {
            if (rng.uniform() < 0.5)
                inputs.push_back(TriggerInput::sensor(pool[rng.uniform_index(3)]));
            else
                inputs.push_back(TriggerInput::sensor(random_digest(rng)));
        }
        auto [next, dec] = try_advance(st, g, inputs);
        st = std::move(next);
        CHECK(st.decoded_count() >= last);
        last = st.decoded_count();
    }
}

TEST_CASE("fuzzed inputs never decode a mismatched node") {
    Rng rng(5);
    EncodedInstructionGraph g;
    g.nodes = {compose_trigger({TriggerInput::sensor(hash256("real-trigger"))})};
    MissionState st = MissionState::initial(g);
    for (int i = 0; i < 20000; ++i) {
        auto [next, dec] = try_advance(st, g, {TriggerInput::sensor(random_digest(rng))});
        CHECK(dec.empty());
    }
}

TEST_CASE("validate_timed_token accepts only nearby windows") {
    HashingConfig cfg;
    cfg.time_window = 10.0;
    const Digest base = hash256("mission-step");

    const Digest fresh = timed_token(base, 42.0, cfg);  // window 4
    CHECK(validate_timed_token(fresh, base, 45.0, cfg, 1));
    CHECK(validate_timed_token(fresh, base, 55.0, cfg, 1));       // window 5, skew covers
    CHECK_FALSE(validate_timed_token(fresh, base, 72.0, cfg, 1));  // replayed 3 windows later

    // Skew 0 accepts only the exact window, including at the boundary.
    const Digest w1 = timed_token(base, 10.0, cfg);
    CHECK(validate_timed_token(w1, base, 19.999, cfg, 0));
    CHECK_FALSE(validate_timed_token(w1, base, 20.0, cfg, 0));
    CHECK_FALSE(validate_timed_token(w1, base, 9.999, cfg, 0));
    CHECK_THROWS_AS(validate_timed_token(w1, base, 10.0, cfg, -1), std::invalid_argument);
}
