#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string_view>

namespace ringsim {

/// Incremental 64-bit FNV-1a, used for state hashes and stable digests.
class Fnv1a {
public:
    Fnv1a& bytes(std::span<const std::byte> data) {
        for (auto b : data) {
            h_ ^= static_cast<std::uint8_t>(b);
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& str(std::string_view s) { return bytes(std::as_bytes(std::span(s.data(), s.size()))); }
    Fnv1a& u64(std::uint64_t v) {
        std::byte buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = std::byte((v >> (8 * i)) & 0xff);
        return bytes(buf);
    }
    std::uint64_t digest() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

// Little-endian field codecs over byte spans.
inline void store_le(std::span<std::byte> out, std::size_t off, std::uint64_t v, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i) out[off + i] = std::byte((v >> (8 * i)) & 0xff);
}

inline std::uint64_t load_le(std::span<const std::byte> in, std::size_t off, std::size_t width) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= std::uint64_t(std::to_integer<std::uint8_t>(in[off + i])) << (8 * i);
    return v;
}

/// Seeded generator with platform-stable bounded draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, n); n == 0 returns 0.
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }
    /// Uniform in [lo, hi].
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }
    bool chance(double p) { return static_cast<double>(engine_() >> 11) * 0x1.0p-53 < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace ringsim
