#include <cstring>

#include "ringsim/harness.hpp"
#include "ringsim/util.hpp"

namespace ringsim::wire {

namespace {
std::uint64_t tag(std::uint64_t key, std::span<const std::byte> body) {
    return Fnv1a().u64(key).bytes(body).u64(~key).digest();
}

void fill(std::span<std::byte> out, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& b : out) b = std::byte(rng.below(256));
}
}  // namespace

std::uint64_t key_for(std::uint64_t seed) { return Fnv1a().str("victim-key").u64(seed).digest(); }

std::vector<std::byte> make_message(std::uint64_t key, std::uint32_t seq, std::uint64_t payload_seed) {
    std::vector<std::byte> m(kMessageSize);
    std::memcpy(m.data(), "MSG1", 4);
    store_le(m, 4, seq, 4);
    fill(std::span(m).subspan(8, 16), payload_seed);
    store_le(m, 24, tag(key, std::span(m).first(24)), 8);
    return m;
}

std::vector<std::byte> make_backup(std::uint64_t key) {
    std::vector<std::byte> m(kMessageSize);
    std::memcpy(m.data(), "BKP1", 4);
    store_le(m, 24, tag(key, std::span(m).first(24)), 8);
    return m;
}

bool valid_message(std::uint64_t key, std::span<const std::byte> m) {
    if (m.size() != kMessageSize) return false;
    if (std::memcmp(m.data(), "MSG1", 4) != 0 && std::memcmp(m.data(), "BKP1", 4) != 0) return false;
    return load_le(m, 24, 8) == tag(key, m.first(24));
}

std::vector<std::byte> make_record(std::uint64_t key, std::uint64_t id) {
    std::vector<std::byte> r(kRecordSize);
    store_le(r, 0, id, 8);
    fill(std::span(r).subspan(8, 48), key ^ (id * 0x9e3779b97f4a7c15ULL));
    store_le(r, 56, tag(key, std::span(r).first(56)), 8);
    return r;
}

bool valid_record(std::uint64_t key, std::span<const std::byte> r, std::uint64_t expected_id) {
    if (r.size() != kRecordSize) return false;
    return load_le(r, 0, 8) == expected_id && load_le(r, 56, 8) == tag(key, r.first(56));
}

}  // namespace ringsim::wire
