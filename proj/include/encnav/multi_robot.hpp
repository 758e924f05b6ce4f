#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "encnav/instruction_graph.hpp"
#include "encnav/rng.hpp"

#include <json.hpp>

namespace encnav {

// ---------------------------------------------------------------------------
// Mission splitting (Fig.-4 style mutual validation): two robots hold
// disjoint encoded step lists; a step may require the peer's opaque token,
// an observation of the peer's behavior, and (in timed mode) the current
// time window before its digest can be reproduced.
// ---------------------------------------------------------------------------

struct MutualStep {
    Digest node_digest;     // published
    bool needs_peer = false;
    int peer_step = -1;     // peer step whose emitted token unlocks this one
    bool needs_behavior = false;
    bool timed = false;
    std::int64_t planned_window = 0;
};

struct MutualMissionSpec {
    std::array<std::vector<MutualStep>, 2> steps;
    HashingConfig cfg;
    std::int64_t skew = 1;
};

/// Opaque message. The token is the entire payload; sender, sequence number
/// and send time are transport framing.
struct TokenEnvelope {
    int sender = 0;
    std::uint64_t seq = 0;
    Digest token;
    double send_time = 0.0;
};

struct ByzAction {
    enum class Kind { corrupt, forge, replay };
    Kind kind = Kind::corrupt;
    int victim = 1;       // robot whose dependency token is attacked
    int step = 0;         // victim step index
    int replay_delay = 40;  // rounds, for replay
};

struct ChannelModel {
    double drop_prob = 0.0;
    int delay_rounds = 1;
    std::vector<ByzAction> byzantine;
};

struct ScenarioSpec {
    struct StepRecipe {
        int peer_step = -1;  // -1: no peer token needed
        bool needs_behavior = false;
    };
    std::array<std::vector<StepRecipe>, 2> recipes;
    ChannelModel channel;
    bool timed = false;
    double round_s = 0.5;
    double window_s = 30.0;
    std::int64_t skew = 1;
    int max_rounds = 600;
    int resend_every = 2;
    int stall_rounds = 60;

    /// Default ping-pong inspection: robot 0 leads, each later step waits for
    /// the peer's previous one.
    static ScenarioSpec ping_pong(int steps_per_robot, bool behavior = false) {
        ScenarioSpec s;
        for (int k = 0; k < steps_per_robot; ++k) {
            s.recipes[0].push_back({k == 0 ? -1 : k - 1, behavior});
            s.recipes[1].push_back({k, false});
        }
        return s;
    }
};

/// Deterministic abstract environment values. The compiler and the simulated
/// environment derive them from the same rule, so the compiler can encode
/// digests the robots will later be able to reproduce.
namespace mutual_env {

inline Digest own_sensor(int robot, int step) {
    return hash256("sense|" + std::to_string(robot) + "|" + std::to_string(step));
}
inline Digest env_snapshot(int robot, int step) {
    return hash256("env|" + std::to_string(robot) + "|" + std::to_string(step));
}
inline Digest behavior(int robot, int step) {
    return hash256("behav|" + std::to_string(robot) + "|" + std::to_string(step));
}

}  // namespace mutual_env

/// Token announcing a completed step, salted with environment data.
inline Digest emit_token(const Digest& completed_step, const TriggerInput& env_input,
                         bool step_decoded = true) {
    if (!step_decoded) throw std::logic_error("emit_token: step not decoded");
    return compose_trigger({TriggerInput::token(completed_step), env_input});
}

struct CompiledMission {
    MutualMissionSpec spec;
    // Ground truth, harness side only.
    std::array<std::vector<Digest>, 2> step_digests;
    std::array<std::vector<Digest>, 2> tokens;  // emitted after each step
    int lossless_chain_len = 0;
};

/// Resolves step digests and inter-robot tokens in dependency order.
inline CompiledMission compile_mutual_mission(const ScenarioSpec& sc,
                                              HashingConfig cfg = HashingConfig{}) {
    cfg.time_window = sc.window_s;
    CompiledMission out;
    out.spec.cfg = cfg;
    out.spec.skew = sc.skew;
    const std::array<int, 2> counts{int(sc.recipes[0].size()), int(sc.recipes[1].size())};
    for (int r = 0; r < 2; ++r) {
        out.spec.steps[r].resize(counts[r]);
        out.step_digests[r].resize(counts[r]);
        out.tokens[r].resize(counts[r]);
    }

    std::array<std::vector<bool>, 2> done{std::vector<bool>(counts[0], false),
                                          std::vector<bool>(counts[1], false)};
    int resolved = 0, chain_depth = 0;
    std::array<std::vector<int>, 2> depth{std::vector<int>(counts[0], 0),
                                          std::vector<int>(counts[1], 0)};
    while (resolved < counts[0] + counts[1]) {
        bool progress = false;
        for (int r = 0; r < 2; ++r) {
            for (int k = 0; k < counts[r]; ++k) {
                if (done[r][k]) continue;
                if (k > 0 && !done[r][k - 1]) continue;  // steps are sequential
                const auto& rec = sc.recipes[r][k];
                const int peer = 1 - r;
                if (rec.peer_step >= 0) {
                    if (rec.peer_step >= counts[peer])
                        throw std::invalid_argument("scenario: peer step out of range");
                    if (!done[peer][rec.peer_step]) continue;
                }
                int d = k > 0 ? depth[r][k - 1] + 1 : 1;
                std::vector<TriggerInput> inputs;
                inputs.push_back(TriggerInput::sensor(mutual_env::own_sensor(r, k)));
                if (rec.peer_step >= 0) {
                    inputs.push_back(TriggerInput::token(out.tokens[peer][rec.peer_step]));
                    d = std::max(d, depth[peer][rec.peer_step] + 1);
                }
                if (rec.needs_behavior)
                    inputs.push_back(TriggerInput::sensor(mutual_env::behavior(r, k)));
                if (inputs.size() > 3)
                    throw std::invalid_argument("scenario: step needs more than 3 inputs");
                MutualStep& st = out.spec.steps[r][k];
                st.needs_peer = rec.peer_step >= 0;
                st.peer_step = rec.peer_step;
                st.needs_behavior = rec.needs_behavior;
                st.timed = sc.timed;
                if (sc.timed) {
                    // Planned decode time in the lossless schedule.
                    const double t = double(d) * double(sc.channel.delay_rounds + 1) * sc.round_s;
                    st.planned_window = static_cast<std::int64_t>(std::floor(t / cfg.time_window));
                    if (inputs.size() >= 3)
                        throw std::invalid_argument(
                            "scenario: timed steps support at most 2 other inputs");
                    inputs.push_back(TriggerInput::time_window(st.planned_window));
                }
                const Digest digest = compose_trigger(inputs);
                st.node_digest = digest;
                out.step_digests[r][k] = digest;
                out.tokens[r][k] =
                    emit_token(digest, TriggerInput::sensor(mutual_env::env_snapshot(r, k)));
                depth[r][k] = d;
                chain_depth = std::max(chain_depth, d);
                done[r][k] = true;
                ++resolved;
                progress = true;
            }
        }
        if (!progress) throw std::invalid_argument("scenario: cyclic step dependencies");
    }
    out.lossless_chain_len = chain_depth;
    return out;
}

// ---------------------------------------------------------------------------
// Protocol runtime
// ---------------------------------------------------------------------------

/// Robot-side protocol state: its half of the mission as a path instruction
/// graph plus transport bookkeeping.
class ProtocolRobot {
public:
    ProtocolRobot(int id, const MutualMissionSpec& spec) : id_(id), spec_(&spec) {
        const auto& steps = spec.steps[id];
        for (std::size_t k = 0; k < steps.size(); ++k) {
            graph_.nodes.push_back(steps[k].node_digest);
            if (k > 0) graph_.edges.push_back({int(k - 1), int(k), Digest::zero()});
        }
        state_ = MissionState::initial(graph_);
    }

    int decoded_steps() const { return state_.decoded_count(); }
    bool complete() const { return decoded_steps() == int(graph_.size()); }
    int next_step() const { return decoded_steps(); }

    /// One protocol round: fold the inbox into the trigger inputs, advance
    /// the instruction graph, and emit tokens for newly decoded steps that
    /// the peer depends on. Duplicate envelopes (same sender and sequence
    /// number) are ignored.
    std::vector<TokenEnvelope> step_protocol(const std::vector<TokenEnvelope>& inbox, double t) {
        for (const auto& env : inbox) {
            if (!seen_.insert({env.sender, env.seq}).second) continue;  // duplicate
            rounds_since_recv_ = 0;
            token_pool_.push_back(env.token);
            if (token_pool_.size() > 6) token_pool_.pop_front();
        }

        std::vector<TokenEnvelope> outbox;
        bool progress = true;
        while (progress && !complete()) {
            progress = false;
            const int k = next_step();
            const MutualStep& st = spec_->steps[id_][k];
            std::vector<TriggerInput> inputs;
            inputs.push_back(TriggerInput::sensor(mutual_env::own_sensor(id_, k)));
            if (st.needs_behavior)
                inputs.push_back(TriggerInput::sensor(mutual_env::behavior(id_, k)));
            for (const auto& tok : token_pool_) inputs.push_back(TriggerInput::token(tok));
            if (st.timed) {
                const std::int64_t center = time_window_index(t, spec_->cfg);
                for (std::int64_t w = center - spec_->skew; w <= center + spec_->skew; ++w)
                    inputs.push_back(TriggerInput::time_window(w));
            }
            auto [next_state, decoded] = try_advance(state_, graph_, inputs);
            state_ = std::move(next_state);
            for (int dk : decoded) {
                progress = true;
                if (!peer_needs(dk)) continue;
                TokenEnvelope env;
                env.sender = id_;
                env.seq = next_seq_++;
                env.token = emit_token(
                    graph_.nodes[dk], TriggerInput::sensor(mutual_env::env_snapshot(id_, dk)));
                env.send_time = t;
                outbox.push_back(env);
                last_sent_ = env;
            }
        }
        if (!outbox.empty()) rounds_since_send_ = 0;
        return outbox;
    }

    /// Periodic resend of the latest token while the peer stays silent.
    std::optional<TokenEnvelope> maybe_resend(double t, int resend_every) {
        ++rounds_since_send_;
        ++rounds_since_recv_;
        if (!last_sent_ || complete()) return std::nullopt;
        if (rounds_since_send_ < resend_every || rounds_since_recv_ < resend_every)
            return std::nullopt;
        rounds_since_send_ = 0;
        TokenEnvelope env = *last_sent_;
        env.seq = next_seq_++;
        env.send_time = t;
        return env;
    }

    const MissionState& state() const { return state_; }

private:
    bool peer_needs(int own_step) const {
        for (const auto& st : spec_->steps[1 - id_])
            if (st.needs_peer && st.peer_step == own_step) return true;
        return false;
    }

    int id_;
    const MutualMissionSpec* spec_;
    EncodedInstructionGraph graph_;
    MissionState state_;
    std::set<std::pair<int, std::uint64_t>> seen_;
    std::deque<Digest> token_pool_;
    std::uint64_t next_seq_ = 1;
    std::optional<TokenEnvelope> last_sent_;
    int rounds_since_send_ = 0;
    int rounds_since_recv_ = 0;
};

struct TranscriptRow {
    int round = 0;
    int sender = 0;
    std::uint64_t seq = 0;
    Digest token;
    bool delivered = false;
    bool corrupted = false;
};

struct MutualRunResult {
    std::string verdict;  // "completed" or "stalled-at-step-k"
    int rounds = 0;
    std::array<int, 2> decoded{0, 0};
    int false_decodes = 0;
    std::vector<TranscriptRow> transcript;

    std::string transcript_csv() const {
        std::string out = "round,sender,seq,token,delivered,corrupted\n";
        for (const auto& r : transcript)
            out += std::to_string(r.round) + "," + std::to_string(r.sender) + "," +
                   std::to_string(r.seq) + "," + r.token.hex() + "," +
                   (r.delivered ? "1" : "0") + "," + (r.corrupted ? "1" : "0") + "\n";
        return out;
    }
};

/// Lockstep deterministic scheduler: the channel is the only conduit between
/// the two agents.
inline MutualRunResult run_mutual_scenario(const ScenarioSpec& sc, const CompiledMission& cm,
                                           std::uint64_t seed) {
    Rng rng(seed);
    ProtocolRobot robots[2] = {ProtocolRobot(0, cm.spec), ProtocolRobot(1, cm.spec)};

    struct InFlight {
        TokenEnvelope env;
        int deliver_round;
        bool corrupted;
    };
    std::vector<InFlight> in_flight;
    MutualRunResult res;

    // Tokens each robot has received uncorrupted; used to flag false decodes.
    std::array<std::set<std::string>, 2> clean_tokens;
    std::array<int, 2> last_decoded{0, 0};
    int last_progress_round = 0;

    auto token_under_attack = [&](const Digest& token, const ByzAction& act) {
        const auto& st = cm.spec.steps[act.victim];
        if (act.step < 0 || act.step >= int(st.size())) return false;
        const auto& dep = st[act.step];
        if (!dep.needs_peer) return false;
        return token == cm.tokens[1 - act.victim][dep.peer_step];
    };

    for (int round = 0; round < sc.max_rounds; ++round) {
        const double t = round * sc.round_s;

        // Deliveries due this round.
        std::array<std::vector<TokenEnvelope>, 2> inbox;
        std::vector<InFlight> still;
        for (auto& f : in_flight) {
            if (f.deliver_round == round) {
                const int to = 1 - f.env.sender;
                inbox[to].push_back(f.env);
                if (!f.corrupted) clean_tokens[to].insert(f.env.token.hex());
            } else {
                still.push_back(f);
            }
        }
        in_flight = std::move(still);

        // Agents advance and emit.
        std::vector<TokenEnvelope> outgoing;
        for (int r = 0; r < 2; ++r) {
            auto out = robots[r].step_protocol(inbox[r], t);
            for (auto& env : out) outgoing.push_back(env);
            if (auto re = robots[r].maybe_resend(t, sc.resend_every)) outgoing.push_back(*re);
        }

        // Channel: byzantine tampering, drops, delay.
        for (auto& env : outgoing) {
            TranscriptRow row;
            row.round = round;
            row.sender = env.sender;
            row.seq = env.seq;
            row.token = env.token;

            bool dropped = false, corrupted = false;
            int deliver = round + std::max(1, sc.channel.delay_rounds);
            for (const auto& act : sc.channel.byzantine) {
                if (!token_under_attack(env.token, act)) continue;
                corrupted = true;
                if (act.kind == ByzAction::Kind::corrupt) {
                    env.token.bytes[0] ^= 0xff;
                } else if (act.kind == ByzAction::Kind::forge) {
                    for (auto& b : env.token.bytes) b = std::uint8_t(rng.next_u64());
                } else {  // replay: hold the true token and re-inject it late
                    deliver = round + act.replay_delay;
                }
            }
            if (!corrupted && sc.channel.drop_prob > 0.0 &&
                rng.uniform() < sc.channel.drop_prob)
                dropped = true;

            row.delivered = !dropped;
            row.corrupted = corrupted;
            res.transcript.push_back(row);
            if (!dropped) in_flight.push_back({env, deliver, corrupted});
        }

        // Progress bookkeeping and safety accounting.
        for (int r = 0; r < 2; ++r) {
            const int d = robots[r].decoded_steps();
            for (int k = last_decoded[r]; k < d; ++k) {
                const auto& st = cm.spec.steps[r][k];
                if (st.needs_peer) {
                    const Digest& needed = cm.tokens[1 - r][st.peer_step];
                    if (!clean_tokens[r].count(needed.hex())) ++res.false_decodes;
                }
            }
            if (d != last_decoded[r]) {
                last_decoded[r] = d;
                last_progress_round = round;
            }
        }

        res.rounds = round + 1;
        if (robots[0].complete() && robots[1].complete()) {
            res.verdict = "completed";
            break;
        }
        if (round - last_progress_round > sc.stall_rounds) break;
    }

    res.decoded = {robots[0].decoded_steps(), robots[1].decoded_steps()};
    if (res.verdict.empty()) {
        const int r = robots[0].complete() ? 1 : 0;
        res.verdict = "stalled-at-step-" + std::to_string(robots[r].next_step());
    }
    return res;
}

// ---------------------------------------------------------------------------
// Scenario file format
// ---------------------------------------------------------------------------

class ScenarioParseError : public std::runtime_error {
public:
    explicit ScenarioParseError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string serialize_scenario(const ScenarioSpec& sc) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    auto robots = nlohmann::ordered_json::array();
    for (int r = 0; r < 2; ++r) {
        auto steps = nlohmann::ordered_json::array();
        for (const auto& st : sc.recipes[r])
            steps.push_back({{"peer_step", st.peer_step}, {"needs_behavior", st.needs_behavior}});
        robots.push_back({{"steps", std::move(steps)}});
    }
    j["robots"] = std::move(robots);
    nlohmann::ordered_json ch;
    ch["drop_prob"] = sc.channel.drop_prob;
    ch["delay_rounds"] = sc.channel.delay_rounds;
    auto byz = nlohmann::ordered_json::array();
    for (const auto& b : sc.channel.byzantine) {
        const char* kind = b.kind == ByzAction::Kind::corrupt ? "corrupt"
                           : b.kind == ByzAction::Kind::forge ? "forge"
                                                              : "replay";
        byz.push_back({{"action", kind},
                       {"victim", b.victim},
                       {"step", b.step},
                       {"replay_delay", b.replay_delay}});
    }
    ch["byzantine"] = std::move(byz);
    j["channel"] = std::move(ch);
    j["timed"] = sc.timed;
    j["round_s"] = sc.round_s;
    j["window_s"] = sc.window_s;
    j["skew"] = sc.skew;
    j["max_rounds"] = sc.max_rounds;
    j["resend_every"] = sc.resend_every;
    return j.dump(2) + "\n";
}

inline ScenarioSpec parse_scenario(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioParseError(std::string("scenario parse error: ") + e.what());
    }
    try {
        if (j.value("version", 0) != 1) throw ScenarioParseError("scenario: unsupported version");
        ScenarioSpec sc;
        const auto& robots = j.at("robots");
        if (!robots.is_array() || robots.size() != 2)
            throw ScenarioParseError("scenario: exactly two robots required");
        for (int r = 0; r < 2; ++r) {
            for (const auto& st : robots[r].at("steps")) {
                ScenarioSpec::StepRecipe rec;
                rec.peer_step = st.value("peer_step", -1);
                rec.needs_behavior = st.value("needs_behavior", false);
                sc.recipes[r].push_back(rec);
            }
            if (sc.recipes[r].empty())
                throw ScenarioParseError("scenario: robot step list must be non-empty");
        }
        if (j.contains("channel")) {
            const auto& ch = j["channel"];
            sc.channel.drop_prob = ch.value("drop_prob", 0.0);
            sc.channel.delay_rounds = ch.value("delay_rounds", 1);
            for (const auto& b : ch.value("byzantine", nlohmann::json::array())) {
                ByzAction act;
                const std::string kind = b.at("action").get<std::string>();
                if (kind == "corrupt") act.kind = ByzAction::Kind::corrupt;
                else if (kind == "forge") act.kind = ByzAction::Kind::forge;
                else if (kind == "replay") act.kind = ByzAction::Kind::replay;
                else throw ScenarioParseError("scenario: unknown byzantine action " + kind);
                act.victim = b.at("victim").get<int>();
                if (act.victim != 0 && act.victim != 1)
                    throw ScenarioParseError("scenario: victim must be 0 or 1");
                act.step = b.at("step").get<int>();
                act.replay_delay = b.value("replay_delay", 40);
                sc.channel.byzantine.push_back(act);
            }
        }
        sc.timed = j.value("timed", false);
        sc.round_s = j.value("round_s", 0.5);
        sc.window_s = j.value("window_s", 30.0);
        sc.skew = j.value("skew", std::int64_t(1));
        sc.max_rounds = j.value("max_rounds", 600);
        sc.resend_every = j.value("resend_every", 2);
        if (sc.channel.drop_prob < 0.0 || sc.channel.drop_prob >= 1.0)
            throw ScenarioParseError("scenario: drop_prob must be in [0, 1)");
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioParseError(std::string("scenario: ") + e.what());
    }
}

}  // namespace encnav
