#include <gtest/gtest.h>

#include "rig.hpp"

using namespace ringsim;
using ringsim::testing::EnvRig;

namespace {

AdversaryPolicy with_default(OpAction a, std::uint32_t flood = 0) {
    AdversaryPolicy p;
    p.default_rule.action = a;
    p.default_rule.flood = flood;
    return p;
}

std::vector<std::uint64_t> submit_nops(EnclaveRing& ring, int n) {
    std::vector<std::uint64_t> ids;
    for (int i = 0; i < n; ++i) {
        SqeArgs a;
        a.opcode = Opcode::Getpid;
        ids.push_back(*ring.prep_and_submit(*ring.try_get_sqe(), a, 100 + i));
    }
    return ids;
}

std::vector<Completion> drain(EnclaveRing& ring) {
    std::vector<Completion> out;
    while (auto c = ring.peek_cqe()) {
        out.push_back(*c);
        (void)ring.consume_cqe();
    }
    return out;
}

}  // namespace

TEST(HostModel, HonestHostAnswersEverySubmission) {
    EnvRig rig;
    ASSERT_TRUE(rig.ready());
    auto& ring = rig.env->ring();
    submit_nops(ring, 5);
    for (int i = 0; i < 10; ++i) rig.host_tick();
    const auto got = drain(ring);
    ASSERT_EQ(got.size(), 5u);
    for (const auto& c : got) EXPECT_EQ(c.result, rig.host->proxy_pid(rig.id));
    EXPECT_EQ(rig.host->stats().sqes_consumed, 5u);
    EXPECT_EQ(rig.host->stats().cqes_posted, 5u);
}

TEST(HostModel, DenyAllConsumesWithoutCompleting) {
    EnvRig rig(with_default(OpAction::Deny));
    ASSERT_TRUE(rig.ready());
    auto& ring = rig.env->ring();
    submit_nops(ring, 6);
    for (int i = 0; i < 20; ++i) rig.host_tick();
    EXPECT_TRUE(drain(ring).empty());
    EXPECT_EQ(rig.host->stats().sqes_consumed, 6u);
    EXPECT_EQ(rig.host->stats().denied, 6u);
    EXPECT_EQ(rig.host->stats().cqes_posted, 0u);
    EXPECT_EQ(ring.live_ids(), 6u);
    // The SQ space came back even though nothing completed.
    for (int i = 0; i < 16; ++i) EXPECT_TRUE(ring.try_get_sqe().ok());
}

TEST(HostModel, DuplicateCompletionDeliveredOnce) {
    EnvRig rig(with_default(OpAction::Duplicate));
    ASSERT_TRUE(rig.ready());
    auto& ring = rig.env->ring();
    const auto ids = submit_nops(ring, 3);
    for (int i = 0; i < 10; ++i) rig.host_tick();
    const auto got = drain(ring);
    ASSERT_EQ(got.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(got[i].internal_id, ids[i]);
    EXPECT_EQ(rig.host->stats().duplicated, 3u);
    EXPECT_EQ(ring.dropped(), 3u);
}

TEST(HostModel, FloodedJunkIsDiscarded) {
    EnvRig rig(with_default(OpAction::Flood, 4));
    ASSERT_TRUE(rig.ready());
    auto& ring = rig.env->ring();
    const auto ids = submit_nops(ring, 2);
    std::vector<Completion> got;
    for (int i = 0; i < 20; ++i) {
        rig.host_tick();
        for (const auto& c : drain(ring)) got.push_back(c);
    }
    EXPECT_GT(rig.host->stats().flooded, 0u);
    for (const auto& c : got) EXPECT_TRUE(c.internal_id == ids[0] || c.internal_id == ids[1]);
    EXPECT_LE(got.size(), 2u);
    EXPECT_EQ(rig.env->inst().stats.total_violations(), 0u);
}

TEST(HostModel, DelayedOpCompletesAfterDelay) {
    AdversaryPolicy p;
    p.per_op[Opcode::Getpid] = OpRule{OpAction::Delay, 500'000, 0, 1.0};
    EnvRig rig(p);
    ASSERT_TRUE(rig.ready());
    auto& ring = rig.env->ring();
    submit_nops(ring, 1);
    const SimTime start = rig.now;
    SimTime arrived = -1;
    for (int i = 0; i < 200 && arrived < 0; ++i) {
        rig.host_tick();
        if (!drain(ring).empty()) arrived = rig.now;
    }
    ASSERT_GE(arrived, 0);
    EXPECT_GE(arrived - start, 500'000);
}

TEST(HostModel, PollerSleepsWhenIdleAndWakesOnEnter) {
    EnvRig rig;
    ASSERT_TRUE(rig.ready());
    auto& ring = rig.env->ring();
    EXPECT_EQ(rig.host->poller(rig.id), PollerState::Awake);
    for (int i = 0; i < 30; ++i) rig.host_tick();
    EXPECT_EQ(rig.host->poller(rig.id), PollerState::Asleep);
    EXPECT_TRUE(ring.need_wakeup());
    submit_nops(ring, 1);
    for (int i = 0; i < 5; ++i) rig.host_tick();
    EXPECT_TRUE(drain(ring).empty());
    ring.enter_kernel(rig.now);
    for (int i = 0; i < 5; ++i) rig.host_tick();
    EXPECT_EQ(rig.host->poller(rig.id), PollerState::Awake);
    EXPECT_FALSE(ring.need_wakeup());
    EXPECT_EQ(drain(ring).size(), 1u);
    EXPECT_GE(rig.host->stats().wakes, 1u);
}

TEST(HostModel, NeverWakeIgnoresEnter) {
    AdversaryPolicy p;
    p.never_wake = true;
    EnvRig rig(p);
    ASSERT_TRUE(rig.ready());
    auto& ring = rig.env->ring();
    for (int i = 0; i < 30; ++i) rig.host_tick();
    ASSERT_EQ(rig.host->poller(rig.id), PollerState::Asleep);
    submit_nops(ring, 1);
    ring.enter_kernel(rig.now);
    for (int i = 0; i < 10; ++i) rig.host_tick();
    EXPECT_EQ(rig.host->poller(rig.id), PollerState::Asleep);
    EXPECT_TRUE(drain(ring).empty());
    EXPECT_GE(rig.host->stats().wakes_ignored, 1u);
}

TEST(HostModel, KilledProxyStopsServing) {
    AdversaryPolicy p;
    p.kill_proxy_at = 50'000;
    EnvRig rig(p);
    ASSERT_TRUE(rig.ready());
    for (int i = 0; i < 10; ++i) rig.host_tick();
    EXPECT_FALSE(rig.host->proxy_alive(rig.id));
    submit_nops(rig.env->ring(), 2);
    for (int i = 0; i < 10; ++i) rig.host_tick();
    EXPECT_TRUE(drain(rig.env->ring()).empty());
}

TEST(HostModel, TrustedProbesAlwaysFault) {
    AdversaryPolicy p;
    p.trusted_probes = 50;
    EnvRig rig(p);
    ASSERT_TRUE(rig.ready());
    for (int i = 0; i < 20; ++i) rig.host_tick();
    EXPECT_EQ(rig.host->stats().probes, 1000u);
    EXPECT_EQ(rig.host->stats().probe_faults, 1000u);
    EXPECT_EQ(rig.rt.world().monitor().trusted_leaks, 0u);
}

TEST(HostModel, LatencyHistogramBuckets) {
    LatencyHistogram h;
    h.add(1);
    h.add(1000);
    h.add(1023);
    h.add(1024);
    EXPECT_EQ(h.count, 4u);
    EXPECT_EQ(h.max, 1024);
    EXPECT_EQ(h.total, 3048);
    EXPECT_EQ(h.buckets.at(0), 1u);
    EXPECT_EQ(h.buckets.at(9), 2u);
    EXPECT_EQ(h.buckets.at(10), 1u);
}
