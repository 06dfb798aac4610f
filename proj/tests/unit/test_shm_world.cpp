#include <gtest/gtest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "ringsim/shm_world.hpp"
#include "ringsim/util.hpp"

using namespace ringsim;

namespace {

ShmWorld::Config small_world() { return {64, 4}; }

}  // namespace

TEST(ShmWorld, AllocatesDistinctPagesAndTracksOwnership) {
    ShmWorld w(small_world());
    auto a = w.alloc_pages(3, Party::enclave(1), World::Trusted, PagePurpose::Private);
    auto b = w.alloc_pages(2, Party::proxy(1), World::Normal, PagePurpose::Shared);
    ASSERT_TRUE(a.ok());
    ASSERT_TRUE(b.ok());
    std::set<PhysPageId> all(a->begin(), a->end());
    all.insert(b->begin(), b->end());
    EXPECT_EQ(all.size(), 5u);
    EXPECT_EQ(w.pages_owned(Party::enclave(1)), 3u);
    EXPECT_EQ(w.pages_owned(Party::proxy(1)), 2u);
    EXPECT_EQ(w.page((*a)[0])->world, World::Trusted);
}

TEST(ShmWorld, QuotaIsEnforced) {
    ShmWorld w(small_world());
    w.set_quota(Party::enclave(2), 4);
    ASSERT_TRUE(w.alloc_pages(3, Party::enclave(2), World::Trusted, PagePurpose::Private).ok());
    auto r = w.alloc_pages(2, Party::enclave(2), World::Trusted, PagePurpose::Private);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.error(), Errc::QuotaExceeded);
    EXPECT_EQ(w.pages_owned(Party::enclave(2)), 3u);
}

TEST(ShmWorld, PoolExhaustionIsReported) {
    ShmWorld w(small_world());
    auto r = w.alloc_pages(1000, Party::proxy(1), World::Normal, PagePurpose::Shared);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.error(), Errc::OutOfMemory);
}

TEST(ShmWorld, KernelRegionIsTrustedAndReserved) {
    ShmWorld w(small_world());
    const auto k = w.kernel_region();
    ASSERT_EQ(k.size(), 4u);
    for (auto p : k) {
        EXPECT_EQ(w.page(p)->world, World::Trusted);
        EXPECT_EQ(w.page(p)->purpose, PagePurpose::Kernel);
    }
}

// Replays random alloc/free interleavings and audits the page table against
// a reference count built from the replay itself.
TEST(ShmWorldProperty, NoPageIsEverOwnedTwice) {
    ShmWorld w(ShmWorld::Config{256, 4});
    Rng r(11);
    std::vector<std::pair<Party, std::vector<PhysPageId>>> live;
    for (int step = 0; step < 1000; ++step) {
        if (live.empty() || r.chance(0.55)) {
            const Party owner = r.chance(0.5) ? Party::enclave(1 + r.below(3)) : Party::proxy(1 + r.below(3));
            const World world = owner.kind == PartyKind::Enclave ? World::Trusted : World::Normal;
            auto got = w.alloc_pages(1 + r.below(6), owner, world, PagePurpose::Private);
            if (got.ok()) live.emplace_back(owner, *got);
        } else {
            const std::size_t i = r.below(live.size());
            ASSERT_TRUE(w.free_pages(live[i].second).ok());
            live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
        }
        std::map<PhysPageId, int> refs;
        std::map<Party, std::size_t> per_owner;
        for (const auto& [owner, pages] : live) {
            for (auto p : pages) ++refs[p];
            per_owner[owner] += pages.size();
        }
        for (const auto& [p, n] : refs) ASSERT_EQ(n, 1) << "page " << p.index << " handed out twice";
        ASSERT_EQ(w.page_table().size(), refs.size() + 4);
        for (const auto& [p, n] : refs) ASSERT_TRUE(w.page(p).has_value());
        for (const auto& [owner, n] : per_owner) ASSERT_EQ(w.pages_owned(owner), n);
    }
}

TEST(ShmWorld, FreeRejectsUnknownAndDuplicatePages) {
    ShmWorld w(small_world());
    auto a = w.alloc_pages(2, Party::proxy(1), World::Normal, PagePurpose::Shared);
    ASSERT_TRUE(a.ok());
    std::vector<PhysPageId> dup{(*a)[0], (*a)[0]};
    EXPECT_EQ(w.free_pages(dup).error(), Errc::UnknownPage);
    std::vector<PhysPageId> unknown{PhysPageId{63}};
    EXPECT_EQ(w.free_pages(unknown).error(), Errc::UnknownPage);
    EXPECT_TRUE(w.free_pages(*a).ok());
}

// 10^5 physical probes from the normal world fault exactly on trusted pages.
TEST(ShmWorldProperty, HostProbesFaultExactlyOnTrustedPages) {
    ShmWorld w(ShmWorld::Config{128, 4});
    Rng r(5);
    for (int i = 0; i < 40; ++i) {
        const bool trusted = r.chance(0.5);
        (void)w.alloc_pages(1 + r.below(2), trusted ? Party::enclave(1) : Party::proxy(1),
                            trusted ? World::Trusted : World::Normal,
                            trusted ? PagePurpose::Private : PagePurpose::Shared);
    }
    std::uint64_t faults = 0;
    for (int i = 0; i < 100'000; ++i) {
        const std::uint64_t page = r.below(136);  // a few pages past the end of memory
        const std::uint64_t off = r.below(kPageSize);
        const std::size_t len = 1 + r.below(kPageSize - off);
        auto got = w.access_physical(World::Normal, page * kPageSize + off, len, AccessMode::Read);
        bool trusted = page >= 128;
        for (const auto& [id, e] : w.page_table())
            if (id.index == page && e.world == World::Trusted) trusted = true;
        ASSERT_EQ(got.ok(), !trusted) << "page " << page;
        if (!got.ok()) ++faults;
    }
    EXPECT_EQ(w.monitor().faults, faults);
    EXPECT_EQ(w.monitor().trusted_leaks, 0u);
}

TEST(ShmWorld, TrustedRequesterReachesTrustedPages) {
    ShmWorld w(small_world());
    auto a = w.alloc_pages(1, Party::enclave(1), World::Trusted, PagePurpose::Private);
    ASSERT_TRUE(a.ok());
    EXPECT_TRUE(w.access_physical(World::Trusted, (*a)[0].index * kPageSize, 16, AccessMode::Write).ok());
}

TEST(ShmWorld, TrustedPagesNeverEnterNormalSpaces) {
    ShmWorld w(small_world());
    const SpaceId host = w.create_space(Party::proxy(1), World::Normal);
    auto kp = w.kernel_region();
    EXPECT_FALSE(w.map_pages(host, 0x10000, std::span(kp.data(), 1), Perm::ReadWrite).ok());
    auto own = w.alloc_pages(1, Party::proxy(1), World::Trusted, PagePurpose::Private);
    ASSERT_TRUE(own.ok());
    EXPECT_FALSE(w.map_pages(host, 0x10000, *own, Perm::ReadWrite).ok());
    EXPECT_TRUE(w.space(host).mappings.empty());
}

TEST(ShmWorld, MappingsInOneSpaceNeverOverlap) {
    ShmWorld w(ShmWorld::Config{128, 4});
    const SpaceId s = w.create_space(Party::proxy(1), World::Normal);
    Rng r(3);
    for (int i = 0; i < 300; ++i) {
        auto pages = w.alloc_pages(1 + r.below(3), Party::proxy(1), World::Normal, PagePurpose::Shared);
        if (!pages.ok()) break;
        const VirtAddr base = r.below(64) * kPageSize;
        (void)w.map_pages(s, base, *pages, Perm::ReadWrite);
        const auto& m = w.space(s).mappings;
        VirtAddr prev_end = 0;
        for (const auto& [b, mp] : m) {
            ASSERT_GE(b, prev_end);
            prev_end = mp.end();
        }
    }
}

TEST(ShmWorld, FindFreeRangeSkipsMappings) {
    ShmWorld w(small_world());
    const SpaceId s = w.create_space(Party::proxy(1), World::Normal);
    auto p = w.alloc_pages(2, Party::proxy(1), World::Normal, PagePurpose::Shared);
    ASSERT_TRUE(w.map_pages(s, 0x2000, *p, Perm::ReadWrite).ok());
    EXPECT_EQ(w.find_free_range(s, 0x1000, 0x1000), 0x1000u);
    EXPECT_EQ(w.find_free_range(s, 0x2000, 0x1000), 0x4000u);
}

TEST(ShmWorld, WindowRejectsOutOfRangeAccessAndCountsIt) {
    ShmWorld w(small_world());
    const SpaceId s = w.create_space(Party::proxy(1), World::Normal);
    auto p = w.alloc_pages(1, Party::proxy(1), World::Normal, PagePurpose::Shared);
    ASSERT_TRUE(w.map_pages(s, 0x1000, *p, Perm::ReadWrite).ok());
    auto win = w.access(s, 0x1000, 64, AccessMode::Write);
    ASSERT_TRUE(win.ok());
    std::array<std::byte, 8> buf{};
    EXPECT_TRUE(win->write(56, buf));
    EXPECT_FALSE(win->write(60, buf));
    EXPECT_FALSE(win->read(64, buf));
    EXPECT_EQ(w.monitor().window_violations, 2u);
    EXPECT_FALSE(win->sub(60, 8).valid());
    EXPECT_FALSE(w.access(s, 0x1ff0, 32, AccessMode::Read).ok());
}

TEST(ShmWorld, ReadOnlyMappingRefusesWrites) {
    ShmWorld w(small_world());
    const SpaceId s = w.create_space(Party::proxy(1), World::Normal);
    auto p = w.alloc_pages(1, Party::proxy(1), World::Normal, PagePurpose::Shared);
    ASSERT_TRUE(w.map_pages(s, 0x1000, *p, Perm::ReadOnly).ok());
    EXPECT_TRUE(w.access(s, 0x1000, 8, AccessMode::Read).ok());
    EXPECT_FALSE(w.access(s, 0x1000, 8, AccessMode::Write).ok());
}

TEST(ShmWorld, RegistrationRejectsDuplicatePagesWithoutStateChange) {
    ShmWorld w(small_world());
    auto p = w.alloc_pages(2, Party::proxy(1), World::Normal, PagePurpose::Shared);
    ASSERT_TRUE(p.ok());
    const auto before = w.state_hash();
    std::vector<PhysPageId> dup{(*p)[0], (*p)[0]};
    auto r = w.register_shared(Party::enclave(1), dup, 16, 2 * kPageSize);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.error(), Errc::DuplicatePage);
    EXPECT_EQ(w.state_hash(), before);
    EXPECT_EQ(w.registration(Party::enclave(1), 16), nullptr);
}

TEST(ShmWorld, RegistrationRejectsPrivateKernelAndWrongSize) {
    ShmWorld w(small_world());
    auto priv = w.alloc_pages(1, Party::enclave(1), World::Trusted, PagePurpose::Private);
    auto shared = w.alloc_pages(2, Party::proxy(1), World::Normal, PagePurpose::Shared);
    auto k = w.kernel_region();
    EXPECT_EQ(w.register_shared(Party::enclave(2), *priv, 16, kPageSize).error(), Errc::OverlapWithPrivate);
    EXPECT_EQ(w.register_shared(Party::enclave(2), std::span(k.data(), 1), 16, kPageSize).error(),
              Errc::OverlapWithPrivate);
    EXPECT_EQ(w.register_shared(Party::enclave(2), *shared, 16, kPageSize).error(), Errc::SizeMismatch);
    EXPECT_TRUE(w.register_shared(Party::enclave(2), *shared, 16, 2 * kPageSize).ok());
    EXPECT_EQ(w.register_shared(Party::enclave(3), *shared, 16, 2 * kPageSize).error(), Errc::OverlapWithPrivate);
}

// Random grants checked against a brute-force validator. A rejected grant
// must leave the trusted state hash untouched.
TEST(ShmWorldProperty, RegistrationMatchesBruteForce) {
    ShmWorld w(ShmWorld::Config{256, 4});
    Rng r(21);
    std::vector<PhysPageId> shared, priv;
    for (int i = 0; i < 20; ++i) {
        auto s = w.alloc_pages(4, Party::proxy(1), World::Normal, PagePurpose::Shared);
        auto p = w.alloc_pages(1, Party::enclave(1), World::Trusted, PagePurpose::Private);
        shared.insert(shared.end(), s->begin(), s->end());
        priv.insert(priv.end(), p->begin(), p->end());
    }
    const auto kernel = w.kernel_region();
    std::vector<oracle::GrantRecord> accepted;
    std::size_t accepts = 0, rejects = 0;
    for (int i = 0; i < 3000; ++i) {
        std::vector<PhysPageId> pages;
        const std::size_t n = r.below(5);
        for (std::size_t j = 0; j < n; ++j) {
            switch (r.below(10)) {
            case 0: pages.push_back(priv[r.below(priv.size())]); break;
            case 1: pages.push_back(kernel[r.below(kernel.size())]); break;
            case 2: pages.push_back(PhysPageId{200 + r.below(100)}); break;
            case 3:
                if (!pages.empty()) pages.push_back(pages[r.below(pages.size())]);
                break;
            default: pages.push_back(shared[r.below(shared.size())]); break;
            }
        }
        const Party grantee = Party::enclave(1 + r.below(3));
        const RegionId region = 16 + r.below(40);
        const std::size_t size = r.chance(0.85) ? pages.size() * kPageSize : r.below(5) * kPageSize;
        const auto flaws = oracle::brute_force_grant(w, accepted, grantee, pages, region, size);
        const auto before = w.state_hash();
        auto got = w.register_shared(grantee, pages, region, size);
        ASSERT_EQ(got.ok(), !flaws.any()) << "grant " << i;
        if (got.ok()) {
            ++accepts;
            accepted.push_back({grantee, region, pages});
            ASSERT_NE(w.registration(grantee, region), nullptr);
        } else {
            ++rejects;
            ASSERT_TRUE(flaws.explains(got.error())) << to_string(got.error());
            ASSERT_EQ(w.state_hash(), before);
        }
        // Occasionally revoke to reopen pages for later grants.
        if (!accepted.empty() && r.chance(0.3)) {
            const std::size_t k = r.below(accepted.size());
            ASSERT_TRUE(w.revoke(accepted[k].grantee, accepted[k].region).ok());
            accepted.erase(accepted.begin() + static_cast<std::ptrdiff_t>(k));
        }
    }
    EXPECT_GT(accepts, 50u);
    EXPECT_GT(rejects, 500u);
}

TEST(ShmWorld, RevokeOnlyBeforeMapping) {
    ShmWorld w(small_world());
    auto p = w.alloc_pages(1, Party::proxy(1), World::Normal, PagePurpose::Shared);
    const SpaceId e = w.create_space(Party::enclave(1), World::Trusted);
    ASSERT_TRUE(w.register_shared(Party::enclave(1), *p, 16, kPageSize).ok());
    ASSERT_TRUE(w.map_region(e, Party::enclave(1), 16, 0x11000, Perm::ReadWrite).ok());
    EXPECT_EQ(w.revoke(Party::enclave(1), 16).error(), Errc::RegionMapped);
    EXPECT_EQ(w.free_pages(*p).error(), Errc::PageInUse);
    EXPECT_EQ(w.revoke(Party::enclave(1), 99).error(), Errc::UnknownRegion);
}

TEST(ShmWorld, RegionMapsOnlyIntoTheGranteesSpace) {
    ShmWorld w(small_world());
    auto p = w.alloc_pages(1, Party::proxy(1), World::Normal, PagePurpose::Shared);
    const SpaceId mine = w.create_space(Party::enclave(1), World::Trusted);
    const SpaceId other = w.create_space(Party::enclave(2), World::Trusted);
    ASSERT_TRUE(w.register_shared(Party::enclave(1), *p, 16, kPageSize).ok());
    EXPECT_FALSE(w.map_region(other, Party::enclave(1), 16, 0x11000, Perm::ReadWrite).ok());
    EXPECT_TRUE(w.map_region(mine, Party::enclave(1), 16, 0x11000, Perm::ReadWrite).ok());
    EXPECT_EQ(w.map_region(mine, Party::enclave(1), 17, 0x12000, Perm::ReadWrite).error(), Errc::UnknownRegion);
}
