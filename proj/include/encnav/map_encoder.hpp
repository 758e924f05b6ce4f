#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "encnav/hashing.hpp"

#include <json.hpp>

namespace encnav {

enum class LandmarkKind { doorway, corner, room, qr };

inline std::string_view landmark_tag(LandmarkKind k) {
    switch (k) {
        case LandmarkKind::doorway: return "doorway";
        case LandmarkKind::corner: return "corner";
        case LandmarkKind::room: return "room";
        case LandmarkKind::qr: return "qr";
    }
    throw std::logic_error("landmark_tag: bad kind");
}

inline LandmarkKind landmark_kind_from(std::string_view s) {
    if (s == "doorway") return LandmarkKind::doorway;
    if (s == "corner") return LandmarkKind::corner;
    if (s == "room") return LandmarkKind::room;
    if (s == "qr") return LandmarkKind::qr;
    throw std::invalid_argument("unknown landmark kind: " + std::string(s));
}

/// Ground-truth landmark. Known only on the mission-compiler side; robots see
/// nothing of it except digests.
struct LandmarkDescriptor {
    int id = 0;
    LandmarkKind kind = LandmarkKind::doorway;
    Point3 position;
    std::optional<double> orientation;  // doorway: segment direction; corner: normal bisector
    std::optional<double> area;         // room: triangle area, m^2
    std::optional<std::string> qr_payload;

    void validate() const {
        if ((kind == LandmarkKind::doorway || kind == LandmarkKind::corner) && !orientation)
            throw std::invalid_argument("landmark " + std::to_string(id) +
                                        ": doorway/corner requires orientation");
        if (kind == LandmarkKind::room && (!area || !(*area > 0.0)))
            throw std::invalid_argument("landmark " + std::to_string(id) +
                                        ": room requires area > 0");
    }
};

/// The public artifact handed to robots: digests only, plus the published
/// start anchor and the quantization parameters needed to reproduce
/// preimages. The N x N edge table uses the all-zero digest for "no edge".
struct EncodedNavGraph {
    HashingConfig cfg;  // only grid_resolution, angle_bins, area_quantum are published
    std::vector<Digest> node_digests;
    std::vector<std::vector<Digest>> edge_digests;
    int start_node = 0;
    Point3 start_position;

    std::size_t size() const { return node_digests.size(); }

    const Digest& edge(int i, int j) const { return edge_digests[i][j]; }

    std::vector<std::pair<int, int>> edge_list() const {
        std::vector<std::pair<int, int>> out;
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = 0; j < size(); ++j)
                if (!edge_digests[i][j].is_zero()) out.emplace_back(int(i), int(j));
        return out;
    }
};

/// Kind-specific extra index: orientation bin for doorways/corners, area
/// index for rooms, none for QR landmarks.
inline std::optional<std::int64_t> landmark_extra(const LandmarkDescriptor& lm,
                                                  const HashingConfig& cfg) {
    switch (lm.kind) {
        case LandmarkKind::doorway:
        case LandmarkKind::corner:
            if (!lm.orientation)
                throw std::invalid_argument("landmark " + std::to_string(lm.id) +
                                            ": missing orientation");
            return quantize_angle(*lm.orientation, cfg.angle_bins);
        case LandmarkKind::room:
            if (!lm.area)
                throw std::invalid_argument("landmark " + std::to_string(lm.id) + ": missing area");
            return quantize_scalar(*lm.area, cfg.area_quantum);
        case LandmarkKind::qr:
            return std::nullopt;
    }
    throw std::logic_error("landmark_extra: bad kind");
}

inline Preimage node_preimage(const LandmarkDescriptor& lm, const HashingConfig& cfg) {
    lm.validate();
    return landmark_preimage(landmark_tag(lm.kind), lm.position, landmark_extra(lm, cfg), cfg);
}

inline Digest encode_node(const LandmarkDescriptor& lm, const HashingConfig& cfg) {
    return hash256(node_preimage(lm, cfg));
}

/// Builds the full encoded graph from ground truth. Edges are directed: the
/// digest for (i, j) binds node i's identity to the quantized bearing of the
/// straight direction i -> j, so (i, j) and (j, i) never share a digest.
/// Throws if two landmarks collide onto identical node digests under cfg.
inline EncodedNavGraph build_nav_graph(const std::vector<LandmarkDescriptor>& landmarks,
                                       const std::vector<std::pair<int, int>>& edges,
                                       const HashingConfig& cfg, int start_node) {
    cfg.validate();
    const int n = static_cast<int>(landmarks.size());
    for (int i = 0; i < n; ++i)
        if (landmarks[i].id != i)
            throw std::invalid_argument("landmark ids must be contiguous from 0");
    if (start_node < 0 || start_node >= n) throw std::invalid_argument("start node out of range");

    EncodedNavGraph g;
    g.cfg = cfg;
    g.start_node = start_node;
    g.start_position = landmarks[start_node].position;
    g.node_digests.reserve(n);

    std::unordered_map<std::string, int> seen;
    for (const auto& lm : landmarks) {
        const Preimage p = node_preimage(lm, cfg);
        auto [it, inserted] = seen.emplace(p.str(), lm.id);
        if (!inserted)
            throw std::invalid_argument("landmark collision under config: landmarks " +
                                        std::to_string(it->second) + " and " +
                                        std::to_string(lm.id) + " share preimage " + p.str());
        g.node_digests.push_back(hash256(p));
    }

    g.edge_digests.assign(n, std::vector<Digest>(n, Digest::zero()));
    for (auto [i, j] : edges) {
        if (i < 0 || i >= n || j < 0 || j >= n)
            throw std::invalid_argument("edge endpoint out of range");
        if (i == j) throw std::invalid_argument("self edges are not allowed");
        const auto& a = landmarks[i];
        const auto& b = landmarks[j];
        const double bearing = std::atan2(b.position.y - a.position.y,
                                          b.position.x - a.position.x);
        const int bin = quantize_angle(bearing, cfg.angle_bins);
        g.edge_digests[i][j] = hash256(edge_preimage(
            landmark_tag(a.kind), quantize_scalar(a.position.x, cfg.grid_resolution),
            quantize_scalar(a.position.y, cfg.grid_resolution),
            quantize_scalar(a.position.z, cfg.grid_resolution), bin, cfg));
    }
    return g;
}

/// Graph file format: JSON with a sparse edge list. Parsers materialize the
/// dense table. Serialization is deterministic (fixed key order).
inline std::string serialize_graph(const EncodedNavGraph& g) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["cfg"] = {{"delta", g.cfg.grid_resolution},
                {"angle_bins", g.cfg.angle_bins},
                {"area_quantum", g.cfg.area_quantum}};
    j["start"] = {{"node", g.start_node},
                  {"position", {g.start_position.x, g.start_position.y, g.start_position.z}}};
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& d : g.node_digests) nodes.push_back(d.hex());
    j["nodes"] = std::move(nodes);
    auto edges = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t k = 0; k < g.size(); ++k)
            if (!g.edge_digests[i][k].is_zero())
                edges.push_back({i, k, g.edge_digests[i][k].hex()});
    j["edges"] = std::move(edges);
    return j.dump(2) + "\n";
}

class GraphParseError : public std::runtime_error {
public:
    explicit GraphParseError(const std::string& what) : std::runtime_error(what) {}
};

inline EncodedNavGraph parse_graph(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw GraphParseError(std::string("graph parse error: ") + e.what());
    }
    try {
        if (!j.is_object()) throw GraphParseError("graph file: top level must be an object");
        if (j.value("version", 0) != 1) throw GraphParseError("graph file: unsupported version");
        EncodedNavGraph g;
        const auto& cfg = j.at("cfg");
        g.cfg.grid_resolution = cfg.at("delta").get<double>();
        g.cfg.angle_bins = cfg.at("angle_bins").get<int>();
        g.cfg.area_quantum = cfg.at("area_quantum").get<double>();
        g.cfg.validate();
        const auto& start = j.at("start");
        g.start_node = start.at("node").get<int>();
        const auto& pos = start.at("position");
        if (!pos.is_array() || pos.size() != 3)
            throw GraphParseError("graph file: start.position must be [x, y, z]");
        g.start_position = {pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>()};

        if (j.contains("hint") || j.contains("hints"))
            throw GraphParseError("graph file: plaintext hints are not permitted");
        const auto& nodes = j.at("nodes");
        if (!nodes.is_array() || nodes.empty())
            throw GraphParseError("graph file: nodes must be a non-empty array");
        const int n = static_cast<int>(nodes.size());
        for (int i = 0; i < n; ++i) {
            if (nodes[i].is_object())
                throw GraphParseError("graph file: plaintext hints are not permitted");
            try {
                g.node_digests.push_back(Digest::from_hex(nodes[i].get<std::string>()));
            } catch (const std::invalid_argument& e) {
                throw GraphParseError("graph file: node " + std::to_string(i) + ": " + e.what());
            }
        }
        if (g.start_node < 0 || g.start_node >= n)
            throw GraphParseError("graph file: start node out of range");

        g.edge_digests.assign(n, std::vector<Digest>(n, Digest::zero()));
        const auto& edges = j.at("edges");
        if (!edges.is_array()) throw GraphParseError("graph file: edges must be an array");
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto& row = edges[e];
            if (!row.is_array() || row.size() != 3)
                throw GraphParseError("graph file: edge " + std::to_string(e) +
                                      " must be [i, j, digest]");
            const int a = row[0].get<int>();
            const int b = row[1].get<int>();
            if (a < 0 || a >= n || b < 0 || b >= n)
                throw GraphParseError("graph file: edge " + std::to_string(e) +
                                      " endpoint out of range");
            if (a == b)
                throw GraphParseError("graph file: edge " + std::to_string(e) +
                                      " is a self edge");
            if (!g.edge_digests[a][b].is_zero())
                throw GraphParseError("graph file: duplicate edge " + std::to_string(e));
            try {
                g.edge_digests[a][b] = Digest::from_hex(row[2].get<std::string>());
            } catch (const std::invalid_argument& ex) {
                throw GraphParseError("graph file: edge " + std::to_string(e) + ": " + ex.what());
            }
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw GraphParseError(std::string("graph file: ") + e.what());
    }
}

}  // namespace encnav
