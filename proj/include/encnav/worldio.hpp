#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "encnav/sim_world.hpp"

#include <json.hpp>

namespace encnav {

class WorldParseError : public std::runtime_error {
public:
    explicit WorldParseError(const std::string& what) : std::runtime_error(what) {}
};

/// World file: bounds, wall segments, annotated landmarks, optional QR marker
/// placements referencing landmark indices.
inline std::string serialize_world(const World& w) {
    nlohmann::ordered_json j;
    j["bounds"] = {w.bounds_max.x - w.bounds_min.x, w.bounds_max.y - w.bounds_min.y};
    auto walls = nlohmann::ordered_json::array();
    for (const auto& s : w.walls) walls.push_back({s.a.x, s.a.y, s.b.x, s.b.y});
    j["walls"] = std::move(walls);
    auto lms = nlohmann::ordered_json::array();
    for (const auto& lm : w.landmarks_truth) {
        nlohmann::ordered_json e;
        e["kind"] = std::string(landmark_tag(lm.kind));
        e["position"] = {lm.position.x, lm.position.y, lm.position.z};
        if (lm.orientation) e["orientation"] = *lm.orientation;
        if (lm.area) e["area"] = *lm.area;
        if (lm.qr_payload) e["payload"] = *lm.qr_payload;
        lms.push_back(std::move(e));
    }
    j["landmarks"] = std::move(lms);
    auto qrs = nlohmann::ordered_json::array();
    for (const auto& m : w.qr_markers)
        qrs.push_back({{"pose", {m.pose.x, m.pose.y, m.pose.theta}}, {"node", m.node}});
    j["qr"] = std::move(qrs);
    return j.dump(2) + "\n";
}

inline World parse_world(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw WorldParseError(std::string("world parse error: ") + e.what());
    }
    try {
        World w;
        const auto& bounds = j.at("bounds");
        if (!bounds.is_array() || bounds.size() != 2)
            throw WorldParseError("world file: bounds must be [w, h]");
        w.bounds_min = {0.0, 0.0};
        w.bounds_max = {bounds[0].get<double>(), bounds[1].get<double>()};
        for (const auto& s : j.at("walls")) {
            if (!s.is_array() || s.size() != 4)
                throw WorldParseError("world file: wall must be [x1, y1, x2, y2]");
            w.walls.push_back(
                {{s[0].get<double>(), s[1].get<double>()}, {s[2].get<double>(), s[3].get<double>()}});
        }
        int id = 0;
        for (const auto& e : j.value("landmarks", nlohmann::json::array())) {
            LandmarkDescriptor lm;
            lm.id = id++;
            lm.kind = landmark_kind_from(e.at("kind").get<std::string>());
            const auto& p = e.at("position");
            if (!p.is_array() || p.size() != 3)
                throw WorldParseError("world file: landmark position must be [x, y, z]");
            lm.position = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
            if (e.contains("orientation")) lm.orientation = e["orientation"].get<double>();
            if (e.contains("area")) lm.area = e["area"].get<double>();
            if (e.contains("payload")) lm.qr_payload = e["payload"].get<std::string>();
            lm.validate();
            w.landmarks_truth.push_back(std::move(lm));
        }
        for (const auto& m : j.value("qr", nlohmann::json::array())) {
            QrMarker marker;
            const auto& pose = m.at("pose");
            if (!pose.is_array() || pose.size() != 3)
                throw WorldParseError("world file: qr pose must be [x, y, theta]");
            marker.pose = Pose2D{pose[0].get<double>(), pose[1].get<double>(),
                                 pose[2].get<double>()};
            marker.node = m.at("node").get<int>();
            if (marker.node < 0 || marker.node >= int(w.landmarks_truth.size()))
                throw WorldParseError("world file: qr marker references unknown landmark");
            w.qr_markers.push_back(marker);
        }
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw WorldParseError(std::string("world file: ") + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(content.data(), std::streamsize(content.size()));
}

}  // namespace encnav
