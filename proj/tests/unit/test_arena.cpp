#include <gtest/gtest.h>

#include <bit>

#include "ringsim/arena.hpp"
#include "ringsim/util.hpp"

using namespace ringsim;

namespace {

constexpr VirtAddr kBase = 0x11000;

struct Pool {
    explicit Pool(ArenaPool::Config c = {}) : pool(inst, std::move(c)) {}

    /// Serves the outstanding refill order with a block at `base`.
    void refill(VirtAddr base) {
        auto o = pool.take_refill_order();
        ASSERT_TRUE(o);
        pool.on_refill({base, 0x10000000 + base, o->bytes});
    }
    ArenaId get(std::size_t size, VirtAddr base = kBase) {
        auto r = pool.request_arena(size);
        if (r.ok() && r->arena) return *r->arena;
        refill(base);
        for (const auto& o : pool.take_outcomes())
            if (o.ticket == r->ticket && o.arena) return *o.arena;
        ADD_FAILURE() << "no arena";
        return {};
    }
    bool conserved() const { return pool.received_bytes() == pool.live_bytes() + pool.binned_bytes(); }

    Instrumentation inst;
    ArenaPool pool;
};

/// Binary decomposition of `bytes` into bins no smaller than `min_class`.
std::map<std::size_t, std::size_t> expected_split(std::size_t bytes, std::size_t min_class, std::size_t max_class) {
    std::map<std::size_t, std::size_t> out;
    while (bytes >= max_class) {
        ++out[max_class];
        bytes -= max_class;
    }
    for (std::size_t bit = max_class; bit >= min_class; bit >>= 1)
        if (bytes & bit) {
            ++out[bit];
            bytes -= bit;
        }
    if (bytes) ++out[bytes];
    return out;
}

}  // namespace

TEST(Arena, SizeClassesArePowersOfTwoThenPages) {
    Pool p;
    EXPECT_EQ(p.pool.size_class(1), 256u);
    EXPECT_EQ(p.pool.size_class(257), 512u);
    EXPECT_EQ(p.pool.size_class(64 * 1024), 64u * 1024);
    EXPECT_EQ(p.pool.size_class(64 * 1024 + 1), 64u * 1024 + kPageSize);
}

TEST(Arena, RequestWaitsForRefillThenBinsRemainder) {
    Pool p;
    auto r = p.pool.request_arena(100);
    ASSERT_TRUE(r.ok());
    EXPECT_FALSE(r->arena);
    EXPECT_EQ(p.pool.queued_requests(), 1u);
    auto o = p.pool.take_refill_order();
    ASSERT_TRUE(o);
    EXPECT_EQ(o->bytes, 16u * 1024);
    EXPECT_FALSE(p.pool.take_refill_order());
    p.pool.on_refill({kBase, 0x20000, o->bytes});
    auto out = p.pool.take_outcomes();
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].ticket, r->ticket);
    ASSERT_TRUE(out[0].arena);
    auto info = *p.pool.info(*out[0].arena);
    EXPECT_GE(info.base, kBase);
    EXPECT_LE(info.base + info.capacity, kBase + o->bytes);
    EXPECT_EQ(info.capacity, 256u);
    EXPECT_EQ(p.pool.bin_census(), expected_split(16 * 1024 - 256, 256, 64 * 1024));
    EXPECT_TRUE(p.conserved());
}

TEST(Arena, PrefillPlanCarvesInOrder) {
    ArenaPool::Config c;
    c.init_bytes = 20 * 1024;
    c.prefill_plan = {{1024, 4}, {4096, 2}};
    Pool p(c);
    p.pool.prefill();
    auto o = p.pool.take_refill_order();
    ASSERT_TRUE(o);
    EXPECT_TRUE(o->prefill);
    p.pool.on_refill({kBase, 0x20000, o->bytes});
    auto census = p.pool.bin_census();
    EXPECT_EQ(census[1024], 4u);
    EXPECT_EQ(census[4096], 2u);
    EXPECT_EQ(census[8192], 1u);
    EXPECT_TRUE(p.conserved());
}

TEST(Arena, InitBytesFromLaunchEnvironment) {
    EXPECT_EQ(ArenaPool::init_bytes_from_env({{"RINGSIM_INIT_SHM_BYTES", "65536"}}), 65536u);
    EXPECT_EQ(ArenaPool::init_bytes_from_env({{"RINGSIM_INIT_SHM_BYTES", "12k"}}), 0u);
    EXPECT_EQ(ArenaPool::init_bytes_from_env({}), 0u);
}

TEST(Arena, FreedBlockIsReusedUnderNewIdentity) {
    Pool p;
    const ArenaId a = p.get(300);
    const auto base = p.pool.info(a)->base;
    ASSERT_TRUE(p.pool.free_arena(a).ok());
    EXPECT_EQ(p.pool.free_arena(a).error(), Errc::DoubleFree);
    auto r = p.pool.request_arena(300);
    ASSERT_TRUE(r.ok() && r->arena);
    EXPECT_EQ(r->arena->index, a.index);
    EXPECT_NE(r->arena->generation, a.generation);
    EXPECT_EQ(p.pool.info(*r->arena)->base, base);
    EXPECT_EQ(p.pool.push(a, 8).error(), Errc::StaleArena);
    EXPECT_EQ(p.pool.free_arena(a).error(), Errc::StaleArena);
}

TEST(Arena, FreeWithLiveDataResetsTop) {
    Pool p;
    const ArenaId a = p.get(512);
    ASSERT_TRUE(p.pool.push(a, 200).ok());
    ASSERT_TRUE(p.pool.free_arena(a).ok());
    auto r = p.pool.request_arena(512);
    ASSERT_TRUE(r->arena);
    EXPECT_EQ(p.pool.info(*r->arena)->top, 0u);
}

TEST(Arena, PushPopErrors) {
    Pool p;
    const ArenaId a = p.get(256);
    EXPECT_EQ(p.pool.push(a, 8, 3).error(), Errc::InvalidArgument);
    EXPECT_EQ(p.pool.push(a, 257).error(), Errc::ArenaFull);
    EXPECT_EQ(*p.pool.push(a, 1), 0u);
    EXPECT_EQ(*p.pool.push(a, 1), 16u);
    EXPECT_EQ(p.pool.pop(a, 18).error(), Errc::Underflow);
    EXPECT_TRUE(p.pool.pop(a, 17).ok());
    EXPECT_EQ(p.pool.info(a)->top, 0u);
    ASSERT_TRUE(p.pool.push(a, 1).ok());
    EXPECT_EQ(p.pool.push(a, 8, std::size_t(1) << 40).error(), Errc::ArenaFull);
}

// Push/pop against a shadow stack of frames: offsets, alignment and the
// full/underflow verdicts must agree on every step.
TEST(ArenaProperty, PushPopMatchesShadowStack) {
    Pool p;
    Rng r(31);
    for (int round = 0; round < 50; ++round) {
        const std::size_t size = std::size_t(1) << r.range(8, 14);
        const ArenaId a = p.get(size, kBase + round * 0x100000);
        const std::size_t cap = p.pool.info(a)->capacity;
        std::size_t top = 0;
        for (int i = 0; i < 2000; ++i) {
            if (r.chance(0.55)) {
                const std::size_t n = r.below(cap / 4 + 1);
                const std::size_t align = std::size_t(1) << r.below(8);
                const std::size_t at = (top + align - 1) / align * align;
                auto got = p.pool.push(a, n, align);
                if (at + n > cap) {
                    ASSERT_EQ(got.error(), Errc::ArenaFull);
                } else {
                    ASSERT_TRUE(got.ok());
                    ASSERT_EQ(*got, at);
                    ASSERT_EQ(*got % align, 0u);
                    top = at + n;
                }
            } else {
                const std::size_t n = r.below(top + 16);
                auto st = p.pool.pop(a, n);
                if (n > top) {
                    ASSERT_EQ(st.error(), Errc::Underflow);
                } else {
                    ASSERT_TRUE(st.ok());
                    top -= n;
                }
            }
            ASSERT_EQ(p.pool.info(a)->top, top);
        }
        if (r.chance(0.5)) ASSERT_TRUE(p.pool.free_arena(a).ok());
        ASSERT_TRUE(p.conserved());
    }
    EXPECT_EQ(p.inst.stats.total_violations(), 0u);
}

// Live arenas never overlap, and every byte received is either live or
// binned.
TEST(ArenaProperty, LiveArenasAreDisjoint) {
    Pool p;
    Rng r(8);
    std::vector<ArenaId> live;
    VirtAddr next_block = kBase;
    for (int i = 0; i < 3000; ++i) {
        if (live.empty() || r.chance(0.6)) {
            auto req = p.pool.request_arena(r.range(1, 20000));
            ASSERT_TRUE(req.ok());
            if (req->arena) {
                live.push_back(*req->arena);
            } else {
                auto o = p.pool.take_refill_order();
                ASSERT_TRUE(o);
                p.pool.on_refill({next_block, next_block, o->bytes});
                next_block += o->bytes + kPageSize;
                for (const auto& out : p.pool.take_outcomes()) {
                    ASSERT_TRUE(out.arena);
                    live.push_back(*out.arena);
                }
            }
        } else {
            const std::size_t k = r.below(live.size());
            ASSERT_TRUE(p.pool.free_arena(live[k]).ok());
            live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
        }
        ASSERT_TRUE(p.conserved());
    }
    std::vector<std::pair<VirtAddr, VirtAddr>> spans;
    for (const auto& a : live) {
        auto info = *p.pool.info(a);
        spans.emplace_back(info.base, info.base + info.capacity);
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) EXPECT_LE(spans[i - 1].second, spans[i].first);
}

TEST(Arena, RejectedGrantsAreReissuedThenFail) {
    Pool p;
    auto r = p.pool.request_arena(100);
    for (int i = 0; i < 3; ++i) {
        ASSERT_TRUE(p.pool.take_refill_order()) << i;
        p.pool.on_refill_rejected();
        EXPECT_TRUE(p.pool.take_outcomes().empty());
    }
    ASSERT_TRUE(p.pool.take_refill_order());
    p.pool.on_refill_rejected();
    auto out = p.pool.take_outcomes();
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].ticket, r->ticket);
    EXPECT_FALSE(out[0].arena);
    EXPECT_FALSE(p.pool.take_refill_order());
    EXPECT_EQ(p.pool.refills_issued(), 4u);
}
