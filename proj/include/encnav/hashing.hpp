#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "encnav/geometry.hpp"
#include "encnav/sha3.hpp"

namespace encnav {

/// 256-bit digest. Canonical text form is 64 lowercase hex characters.
/// The all-zero value is reserved as the "absent" sentinel and is never a
/// legitimate hash output.
struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    bool operator==(const Digest&) const = default;
    auto operator<=>(const Digest&) const = default;

    bool is_zero() const {
        for (auto b : bytes)
            if (b != 0) return false;
        return true;
    }

    std::string hex() const {
        static constexpr char kHex[] = "0123456789abcdef";
        std::string s(64, '0');
        for (std::size_t i = 0; i < 32; ++i) {
            s[2 * i] = kHex[bytes[i] >> 4];
            s[2 * i + 1] = kHex[bytes[i] & 0xf];
        }
        return s;
    }

    static Digest from_hex(std::string_view s) {
        if (s.size() != 64)
            throw std::invalid_argument("Digest::from_hex: expected 64 hex chars, got " +
                                        std::to_string(s.size()));
        Digest d;
        auto nibble = [](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            throw std::invalid_argument(std::string("Digest::from_hex: invalid character '") +
                                        c + "'");
        };
        for (std::size_t i = 0; i < 32; ++i)
            d.bytes[i] = static_cast<std::uint8_t>((nibble(s[2 * i]) << 4) | nibble(s[2 * i + 1]));
        return d;
    }

    static Digest zero() { return Digest{}; }
};

struct DigestHash {
    std::size_t operator()(const Digest& d) const {
        std::uint64_t v;
        std::memcpy(&v, d.bytes.data(), sizeof(v));
        return static_cast<std::size_t>(v);
    }
};

/// Quantization and tokenization parameters. Digests are only comparable
/// between holders of identical configs.
struct HashingConfig {
    double grid_resolution = 0.1;   // meters per grid cell
    int angle_bins = 16;            // divisions of [0, 2*pi)
    double area_quantum = 0.25;     // square meters per area index
    double time_window = 10.0;      // seconds per timed-token window

    void validate() const {
        if (!(grid_resolution > 0.0)) throw std::invalid_argument("HashingConfig: grid_resolution must be > 0");
        if (angle_bins < 4) throw std::invalid_argument("HashingConfig: angle_bins must be >= 4");
        if (!(area_quantum > 0.0)) throw std::invalid_argument("HashingConfig: area_quantum must be > 0");
        if (!(time_window > 0.0)) throw std::invalid_argument("HashingConfig: time_window must be > 0");
    }

    bool operator==(const HashingConfig&) const = default;
};

/// Rounds v/q to the nearest integer, ties away from zero.
inline std::int64_t quantize_scalar(double v, double q) {
    if (!(q > 0.0)) throw std::invalid_argument("quantize_scalar: quantum must be > 0");
    if (!std::isfinite(v)) throw std::invalid_argument("quantize_scalar: non-finite value");
    return static_cast<std::int64_t>(std::llround(v / q));
}

/// Maps an angle to a bin index in [0, K): floor after normalization to
/// [0, 2*pi). Rounding jitter that lands exactly on 2*pi clamps to bin 0.
inline int quantize_angle(double theta, int bins) {
    if (bins < 4) throw std::invalid_argument("quantize_angle: bins must be >= 4");
    if (!std::isfinite(theta)) throw std::invalid_argument("quantize_angle: non-finite angle");
    const double norm = wrap_two_pi(theta);
    int idx = static_cast<int>(std::floor(norm * bins / kTwoPi));
    if (idx >= bins) idx = 0;
    if (idx < 0) idx = 0;
    return idx;
}

/// Preimage bytes: UTF-8 fields joined by '|'. The first field is a type tag,
/// the rest are canonically formatted signed decimal integers. No field may
/// contain the separator.
class Preimage {
public:
    Preimage() = default;

    static Preimage from_tag(std::string_view tag) {
        if (tag.empty()) throw std::invalid_argument("Preimage: empty type tag");
        if (tag.find('|') != std::string_view::npos)
            throw std::invalid_argument("Preimage: type tag contains separator");
        Preimage p;
        p.data_.assign(tag);
        return p;
    }

    Preimage& append_int(std::int64_t v) {
        data_.push_back('|');
        char buf[24];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        data_.append(buf, ptr);
        return *this;
    }

    Preimage& append_raw(std::string_view field) {
        if (field.find('|') != std::string_view::npos)
            throw std::invalid_argument("Preimage: field contains separator");
        data_.push_back('|');
        data_.append(field);
        return *this;
    }

    const std::string& str() const { return data_; }
    std::span<const std::uint8_t> bytes() const {
        return {reinterpret_cast<const std::uint8_t*>(data_.data()), data_.size()};
    }

    bool operator==(const Preimage&) const = default;

private:
    std::string data_;
};

/// SHA3-256 of the exact preimage bytes.
inline Digest hash256(const Preimage& p) {
    Digest d;
    d.bytes = Sha3_256::hash(p.bytes());
    if (d.is_zero()) throw std::runtime_error("hash256: all-zero digest (reserved sentinel)");
    return d;
}

inline Digest hash256(std::string_view raw) {
    Digest d;
    d.bytes = Sha3_256::hash({reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()});
    if (d.is_zero()) throw std::runtime_error("hash256: all-zero digest (reserved sentinel)");
    return d;
}

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// Node preimage: `tag|qx|qy|qz` with an optional trailing extra index
/// (orientation bin or area index, depending on the landmark kind).
inline Preimage landmark_preimage(std::string_view type_tag, const Point3& position,
                                  std::optional<std::int64_t> extra, const HashingConfig& cfg) {
    cfg.validate();
    Preimage p = Preimage::from_tag(type_tag);
    p.append_int(quantize_scalar(position.x, cfg.grid_resolution));
    p.append_int(quantize_scalar(position.y, cfg.grid_resolution));
    p.append_int(quantize_scalar(position.z, cfg.grid_resolution));
    if (extra) p.append_int(*extra);
    return p;
}

/// Preimage for quantized grid indices that are already known.
inline Preimage cell_preimage(std::string_view type_tag, std::int64_t qx, std::int64_t qy,
                              std::int64_t qz, std::optional<std::int64_t> extra) {
    Preimage p = Preimage::from_tag(type_tag);
    p.append_int(qx).append_int(qy).append_int(qz);
    if (extra) p.append_int(*extra);
    return p;
}

/// Edge preimage: the node's `tag|qx|qy|qz` (extra dropped) extended with a
/// literal `e` field and the bearing bin. The `e` field keeps edge preimages
/// disjoint from node preimages that happen to carry an extra index.
inline Preimage edge_preimage(std::string_view type_tag, std::int64_t qx, std::int64_t qy,
                              std::int64_t qz, int bearing_bin, const HashingConfig& cfg) {
    cfg.validate();
    if (bearing_bin < 0 || bearing_bin >= cfg.angle_bins)
        throw std::invalid_argument("edge_preimage: bearing bin " + std::to_string(bearing_bin) +
                                    " outside [0, " + std::to_string(cfg.angle_bins) + ")");
    Preimage p = Preimage::from_tag(type_tag);
    p.append_int(qx).append_int(qy).append_int(qz);
    p.append_raw("e");
    p.append_int(bearing_bin);
    return p;
}

inline std::int64_t time_window_index(double t, const HashingConfig& cfg) {
    return static_cast<std::int64_t>(std::floor(t / cfg.time_window));
}

inline Digest timed_token_for_window(const Digest& base, std::int64_t window) {
    Preimage p = Preimage::from_tag(base.hex());
    p.append_raw("t");
    p.append_int(window);
    return hash256(p);
}

/// Digest salted with a coarse time-window index: hash of `hex|t|window`.
inline Digest timed_token(const Digest& base, double t, const HashingConfig& cfg) {
    cfg.validate();
    if (!(t >= 0.0)) throw std::invalid_argument("timed_token: time must be >= 0");
    return timed_token_for_window(base, time_window_index(t, cfg));
}

}  // namespace encnav
