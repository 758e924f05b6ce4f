#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "encnav/hashing.hpp"

namespace encnav {

/// One input a robot can feed into a trigger: sensed data (as a digest of its
/// canonical form), a quantized position, a coarse time window, an opaque
/// token received from outside, or a preprogrammed action id.
struct TriggerInput {
    enum class Kind { sensor_digest, position, time_window, external_token, action_id };

    Kind kind = Kind::action_id;
    Digest digest;          // sensor_digest / external_token
    std::int64_t qx = 0;    // position
    std::int64_t qy = 0;
    std::int64_t qz = 0;
    std::int64_t window = 0;  // time_window
    std::string action_name;  // action_id

    static TriggerInput sensor(const Digest& d) {
        TriggerInput t;
        t.kind = Kind::sensor_digest;
        t.digest = d;
        return t;
    }
    static TriggerInput position(std::int64_t x, std::int64_t y, std::int64_t z = 0) {
        TriggerInput t;
        t.kind = Kind::position;
        t.qx = x;
        t.qy = y;
        t.qz = z;
        return t;
    }
    static TriggerInput time_window(std::int64_t w) {
        TriggerInput t;
        t.kind = Kind::time_window;
        t.window = w;
        return t;
    }
    static TriggerInput token(const Digest& d) {
        TriggerInput t;
        t.kind = Kind::external_token;
        t.digest = d;
        return t;
    }
    static TriggerInput action(std::string id) {
        TriggerInput t;
        t.kind = Kind::action_id;
        t.action_name = std::move(id);
        return t;
    }

    void serialize_into(Preimage& p) const {
        switch (kind) {
            case Kind::sensor_digest:
                p.append_raw("s");
                p.append_raw(digest.hex());
                return;
            case Kind::position:
                p.append_raw("p");
                p.append_int(qx).append_int(qy).append_int(qz);
                return;
            case Kind::time_window:
                p.append_raw("w");
                p.append_int(window);
                return;
            case Kind::external_token:
                p.append_raw("x");
                p.append_raw(digest.hex());
                return;
            case Kind::action_id:
                p.append_raw("a");
                p.append_raw(action_name);
                return;
        }
        throw std::logic_error("TriggerInput: bad kind");
    }
};

/// Order-significant digest over a sequence of trigger inputs.
inline Digest compose_trigger(const std::vector<TriggerInput>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("compose_trigger: empty input list");
    Preimage p = Preimage::from_tag("trig");
    for (const auto& in : inputs) in.serialize_into(p);
    return hash256(p);
}

/// General encoded instruction graph: opaque nodes plus directed edges whose
/// digest may be all-zero ("empty": traversal requires only decoding the
/// target node).
struct EncodedInstructionGraph {
    std::vector<Digest> nodes;
    struct Edge {
        int from = 0;
        int to = 0;
        Digest digest;  // zero = empty edge
    };
    std::vector<Edge> edges;

    std::size_t size() const { return nodes.size(); }
};

/// Decode progress. Nodes move from the frontier into the decoded set only
/// when some composed trigger reproduces their digest exactly.
struct MissionState {
    std::vector<bool> node_decoded;
    std::vector<bool> edge_decoded;
    std::vector<std::pair<int, Digest>> history;  // (node, digest) in decode order

    static MissionState initial(const EncodedInstructionGraph& g) {
        MissionState s;
        s.node_decoded.assign(g.size(), false);
        s.edge_decoded.assign(g.edges.size(), false);
        return s;
    }

    int decoded_count() const {
        int n = 0;
        for (bool b : node_decoded) n += b ? 1 : 0;
        return n;
    }
};

namespace detail {

/// Nodes currently eligible for decoding: roots (in-degree zero, and node 0
/// as a conventional root) plus targets of decoded or empty edges out of
/// decoded nodes.
inline std::vector<int> frontier_nodes(const EncodedInstructionGraph& g, const MissionState& s) {
    std::vector<int> in_degree(g.size(), 0);
    for (const auto& e : g.edges) in_degree[e.to]++;
    std::vector<bool> eligible(g.size(), false);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (in_degree[i] == 0 || i == 0) eligible[i] = true;
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const auto& e = g.edges[k];
        if (!s.node_decoded[e.from]) continue;
        if (e.digest.is_zero() || s.edge_decoded[k]) eligible[e.to] = true;
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (eligible[i] && !s.node_decoded[i]) out.push_back(int(i));
    return out;
}

inline std::vector<int> frontier_edges(const EncodedInstructionGraph& g, const MissionState& s) {
    std::vector<int> out;
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const auto& e = g.edges[k];
        if (s.node_decoded[e.from] && !s.edge_decoded[k] && !e.digest.is_zero())
            out.push_back(int(k));
    }
    return out;
}

/// Enumerates ordered tuples of distinct inputs, sizes 1..3, in index order,
/// and calls fn with each composed digest. The size cap bounds the trial
/// budget per call.
template <typename Fn>
void for_each_composition(const std::vector<TriggerInput>& inputs, Fn&& fn) {
    const int n = static_cast<int>(inputs.size());
    for (int i = 0; i < n; ++i) {
        fn(compose_trigger({inputs[i]}));
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            fn(compose_trigger({inputs[i], inputs[j]}));
            for (int k = 0; k < n; ++k) {
                if (k == i || k == j) continue;
                fn(compose_trigger({inputs[i], inputs[j], inputs[k]}));
            }
        }
    }
}

}  // namespace detail

/// One round of the continuous trial-and-error process: tries the bounded
/// catalog of input combinations against every frontier node and edge.
/// Returns the updated state and the list of newly decoded node indices.
/// No match leaves the state untouched.
inline std::pair<MissionState, std::vector<int>> try_advance(
    const MissionState& state, const EncodedInstructionGraph& g,
    const std::vector<TriggerInput>& inputs) {
    MissionState s = state;
    std::vector<int> newly_decoded;
    if (inputs.empty()) return {s, newly_decoded};

    std::unordered_set<Digest, DigestHash> candidates;
    detail::for_each_composition(inputs, [&](const Digest& d) { candidates.insert(d); });

    // Decoding a node can expose new frontier edges and vice versa; iterate to
    // the fixpoint reachable with this input set.
    bool progress = true;
    while (progress) {
        progress = false;
        for (int idx : detail::frontier_nodes(g, s)) {
            if (candidates.count(g.nodes[idx])) {
                s.node_decoded[idx] = true;
                s.history.emplace_back(idx, g.nodes[idx]);
                newly_decoded.push_back(idx);
                progress = true;
            }
        }
        for (int k : detail::frontier_edges(g, s)) {
            if (candidates.count(g.edges[k].digest)) {
                s.edge_decoded[k] = true;
                progress = true;
            }
        }
    }
    return {s, newly_decoded};
}

/// Accepts a timed token when it matches the base digest salted with any
/// window within +/- skew of the window containing t.
inline bool validate_timed_token(const Digest& token, const Digest& base, double t,
                                 const HashingConfig& cfg, std::int64_t skew) {
    cfg.validate();
    if (skew < 0) throw std::invalid_argument("validate_timed_token: skew must be >= 0");
    const std::int64_t center = time_window_index(t, cfg);
    for (std::int64_t w = center - skew; w <= center + skew; ++w)
        if (token == timed_token_for_window(base, w)) return true;
    return false;
}

}  // namespace encnav
