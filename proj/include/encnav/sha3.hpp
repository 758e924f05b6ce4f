#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>

namespace encnav {

/// SHA3-256 (FIPS 202). Incremental absorb/finalize plus a one-shot helper.
/// Byte-oriented sponge with rate 136, capacity 64, domain padding 0x06.
class Sha3_256 {
public:
    static constexpr std::size_t kDigestSize = 32;
    static constexpr std::size_t kRate = 136;

    Sha3_256() { reset(); }

    void reset() {
        state_.fill(0);
        pos_ = 0;
    }

    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        while (len > 0) {
            const std::size_t take = std::min(len, kRate - pos_);
            for (std::size_t i = 0; i < take; ++i)
                state_bytes()[pos_ + i] ^= p[i];
            pos_ += take;
            p += take;
            len -= take;
            if (pos_ == kRate) {
                keccakf(state_);
                pos_ = 0;
            }
        }
    }

    std::array<std::uint8_t, kDigestSize> finalize() {
        state_bytes()[pos_] ^= 0x06;
        state_bytes()[kRate - 1] ^= 0x80;
        keccakf(state_);
        std::array<std::uint8_t, kDigestSize> out{};
        std::memcpy(out.data(), state_.data(), kDigestSize);
        return out;
    }

    static std::array<std::uint8_t, kDigestSize> hash(std::span<const std::uint8_t> data) {
        Sha3_256 h;
        h.update(data.data(), data.size());
        return h.finalize();
    }

private:
    // Little-endian lane layout; valid on all targets this project builds for.
    static_assert(std::endian::native == std::endian::little);

    std::uint8_t* state_bytes() { return reinterpret_cast<std::uint8_t*>(state_.data()); }

    static void keccakf(std::array<std::uint64_t, 25>& st) {
        static constexpr std::uint64_t kRndc[24] = {
            0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808aULL,
            0x8000000080008000ULL, 0x000000000000808bULL, 0x0000000080000001ULL,
            0x8000000080008081ULL, 0x8000000000008009ULL, 0x000000000000008aULL,
            0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000aULL,
            0x000000008000808bULL, 0x800000000000008bULL, 0x8000000000008089ULL,
            0x8000000000008003ULL, 0x8000000000008002ULL, 0x8000000000000080ULL,
            0x000000000000800aULL, 0x800000008000000aULL, 0x8000000080008081ULL,
            0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL};
        static constexpr int kRotc[24] = {1,  3,  6,  10, 15, 21, 28, 36, 45, 55, 2,  14,
                                          27, 41, 56, 8,  25, 43, 62, 18, 39, 61, 20, 44};
        static constexpr int kPiln[24] = {10, 7,  11, 17, 18, 3, 5,  16, 8,  21, 24, 4,
                                          15, 23, 19, 13, 12, 2, 20, 14, 22, 9,  6,  1};

        for (int round = 0; round < 24; ++round) {
            // Theta
            std::uint64_t bc[5];
            for (int i = 0; i < 5; ++i)
                bc[i] = st[i] ^ st[i + 5] ^ st[i + 10] ^ st[i + 15] ^ st[i + 20];
            for (int i = 0; i < 5; ++i) {
                const std::uint64_t t = bc[(i + 4) % 5] ^ rotl(bc[(i + 1) % 5], 1);
                for (int j = 0; j < 25; j += 5)
                    st[j + i] ^= t;
            }
            // Rho and Pi
            std::uint64_t t = st[1];
            for (int i = 0; i < 24; ++i) {
                const int j = kPiln[i];
                const std::uint64_t tmp = st[j];
                st[j] = rotl(t, kRotc[i]);
                t = tmp;
            }
            // Chi
            for (int j = 0; j < 25; j += 5) {
                for (int i = 0; i < 5; ++i)
                    bc[i] = st[j + i];
                for (int i = 0; i < 5; ++i)
                    st[j + i] ^= (~bc[(i + 1) % 5]) & bc[(i + 2) % 5];
            }
            // Iota
            st[0] ^= kRndc[round];
        }
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::array<std::uint64_t, 25> state_{};
    std::size_t pos_ = 0;
};

}  // namespace encnav
