#include <gtest/gtest.h>

#include "ringsim/promise.hpp"
#include "ringsim/util.hpp"

using namespace ringsim;

namespace {

Step add(void*, const PromiseArgs& args, const Settlement& in) {
    return Step::fulfill(in.value + static_cast<std::int64_t>(args[0]));
}

Step count_and_pass(void* ctx, const PromiseArgs&, const Settlement& in) {
    ++*static_cast<int*>(ctx);
    return in.state == PromiseState::Fulfilled ? Step::fulfill(in.value) : Step::fail(in.value);
}

Step recover(void*, const PromiseArgs&, const Settlement& in) {
    return in.state == PromiseState::Failed ? Step::fulfill(-in.value) : Step::fulfill(in.value);
}

Step follow_arg(void*, const PromiseArgs& args, const Settlement&) {
    return Step::follow(PromiseId::from_tag(args[0]));
}

struct Fixture {
    explicit Fixture(PromisePool::Config c = {}) : pool(inst, c) {}
    Instrumentation inst;
    PromisePool pool;
};

}  // namespace

TEST(Promise, PoolExhaustsAtCapacity) {
    Fixture f;
    std::vector<PromiseId> held;
    for (;;) {
        auto p = f.pool.make();
        if (!p.ok()) {
            EXPECT_EQ(p.error(), Errc::PoolExhausted);
            break;
        }
        held.push_back(*p);
        ASSERT_EQ(f.pool.outstanding(), held.size());
    }
    EXPECT_EQ(held.size(), f.pool.capacity());
    ASSERT_TRUE(f.pool.release(held.front()).ok());
    EXPECT_TRUE(f.pool.make().ok());
    EXPECT_EQ(f.pool.make().error(), Errc::PoolExhausted);
}

TEST(Promise, ChainOfThreeCarriesValue) {
    Fixture f;
    const PromiseId root = *f.pool.make();
    const PromiseId a = *f.pool.then(root, add, nullptr, {1});
    const PromiseId b = *f.pool.then(a, add, nullptr, {10});
    const PromiseId c = *f.pool.then(b, add, nullptr, {100});
    EXPECT_EQ(f.pool.poll(c).state, PromiseState::Pending);
    EXPECT_EQ(f.pool.then(root, add, nullptr, {}).error(), Errc::AlreadyChained);
    ASSERT_TRUE(f.pool.fulfill(root, 1000).ok());
    const auto s = f.pool.poll(c);
    EXPECT_EQ(s.state, PromiseState::Fulfilled);
    EXPECT_EQ(s.value, 1111);
    // Intermediate links are freed once they hand their result on.
    EXPECT_EQ(f.pool.poll(root).state, PromiseState::Invalid);
    EXPECT_EQ(f.pool.poll(b).state, PromiseState::Invalid);
    EXPECT_EQ(f.pool.outstanding(), 1u);
    ASSERT_TRUE(f.pool.release(c).ok());
    EXPECT_EQ(f.pool.outstanding(), 0u);
}

TEST(Promise, FailureSkipsCallbacksUnlessAlways) {
    Fixture f;
    int runs = 0;
    const PromiseId root = *f.pool.make();
    const PromiseId a = *f.pool.then(root, count_and_pass, &runs, {});
    const PromiseId b = *f.pool.then(a, count_and_pass, &runs, {});
    const PromiseId c = *f.pool.then(b, recover, nullptr, {}, true);
    ASSERT_TRUE(f.pool.fail(root, 5).ok());
    EXPECT_EQ(runs, 0);
    const auto s = f.pool.poll(c);
    EXPECT_EQ(s.state, PromiseState::Fulfilled);
    EXPECT_EQ(s.value, -5);
}

TEST(Promise, ThenOnSettledRunsImmediately) {
    Fixture f;
    const PromiseId done = *f.pool.make_fulfilled(7);
    const PromiseId n = *f.pool.then(done, add, nullptr, {3});
    EXPECT_EQ(f.pool.poll(n).value, 10);
    const PromiseId bad = *f.pool.make_failed(9);
    const PromiseId m = *f.pool.then(bad, add, nullptr, {3});
    EXPECT_EQ(f.pool.poll(m).state, PromiseState::Failed);
    EXPECT_EQ(f.pool.poll(m).value, 9);
}

TEST(Promise, FollowAdoptsAnotherPromise) {
    Fixture f;
    const PromiseId inner = *f.pool.make();
    const PromiseId root = *f.pool.make();
    const PromiseId out = *f.pool.then(root, follow_arg, nullptr, {inner.tag()});
    ASSERT_TRUE(f.pool.fulfill(root, 0).ok());
    EXPECT_EQ(f.pool.poll(out).state, PromiseState::Pending);
    ASSERT_TRUE(f.pool.fulfill(inner, 42).ok());
    EXPECT_EQ(f.pool.poll(out).value, 42);

    const PromiseId root2 = *f.pool.make();
    const PromiseId out2 = *f.pool.then(root2, follow_arg, nullptr, {PromiseId{999, 1}.tag()});
    ASSERT_TRUE(f.pool.fulfill(root2, 0).ok());
    EXPECT_EQ(f.pool.poll(out2).state, PromiseState::Failed);
}

TEST(Promise, ContinuationBudgetDefersLongChains) {
    PromisePool::Config c;
    c.continuation_budget = 8;
    Fixture f(c);
    const PromiseId root = *f.pool.make();
    PromiseId tail = root;
    for (int i = 0; i < 50; ++i) tail = *f.pool.then(tail, add, nullptr, {1});
    ASSERT_TRUE(f.pool.fulfill(root, 0).ok());
    EXPECT_EQ(f.pool.callbacks_run(), 8u);
    EXPECT_TRUE(f.pool.has_deferred());
    EXPECT_EQ(f.pool.poll(tail).state, PromiseState::Pending);
    int rounds = 0;
    while (f.pool.has_deferred()) {
        f.pool.run_deferred();
        ++rounds;
    }
    EXPECT_EQ(rounds, 6);  // ceil(50 / 8) - 1
    EXPECT_EQ(f.pool.poll(tail).value, 50);
}

TEST(Promise, SettleFromCompletion) {
    Fixture f;
    const PromiseId ok = *f.pool.make();
    const PromiseId bad = *f.pool.make();
    ASSERT_TRUE(f.pool.settle_from_cqe(ok.tag(), 12).ok());
    ASSERT_TRUE(f.pool.settle_from_cqe(bad.tag(), -13).ok());
    EXPECT_EQ(f.pool.poll(ok).value, 12);
    EXPECT_EQ(f.pool.poll(bad).state, PromiseState::Failed);
    EXPECT_EQ(f.pool.poll(bad).value, 13);
    EXPECT_EQ(f.pool.settle_from_cqe(ok.tag(), 1).error(), Errc::UnknownTag);
    EXPECT_EQ(f.pool.settle_from_cqe(0xdeadbeef, 1).error(), Errc::UnknownTag);
    EXPECT_EQ(f.pool.fulfill(ok, 1).error(), Errc::StalePromise);
}

TEST(Promise, StaleIdAfterReuse) {
    Fixture f;
    const PromiseId a = *f.pool.make();
    ASSERT_TRUE(f.pool.release(a).ok());
    const PromiseId b = *f.pool.make();
    EXPECT_EQ(a.index, b.index);
    EXPECT_NE(a.generation, b.generation);
    EXPECT_EQ(f.pool.poll(a).state, PromiseState::Invalid);
    EXPECT_EQ(f.pool.release(a).error(), Errc::StalePromise);
    EXPECT_NE(b.tag(), 0u);
}

TEST(Promise, PollingNeverSettlesOnItsOwn) {
    Fixture f;
    const PromiseId p = *f.pool.make();
    for (int i = 0; i < 1'000'000; ++i) ASSERT_EQ(f.pool.poll(p).state, PromiseState::Pending);
    EXPECT_EQ(f.inst.stats.calls(MeteredOp::PromisePoll), 1'000'000u);
    EXPECT_EQ(f.inst.stats.total_violations(), 0u);
}

// Random make/then/settle/release traffic against a live-count oracle. A
// link chained behind a pending promise stays allocated until it settles.
TEST(PromiseProperty, OutstandingMatchesLiveCount) {
    Fixture f;
    Rng r(12);
    std::vector<PromiseId> heads;
    std::size_t links = 0;
    for (int i = 0; i < 20000; ++i) {
        const auto op = r.below(4);
        if (op == 0 || heads.empty()) {
            if (auto p = f.pool.make(); p.ok()) heads.push_back(*p);
        } else {
            const std::size_t k = r.below(heads.size());
            const PromiseId p = heads[k];
            if (op == 1) {
                const bool pending = f.pool.poll(p).state == PromiseState::Pending;
                if (auto n = f.pool.then(p, add, nullptr, {1}); n.ok()) {
                    heads[k] = *n;
                    links += pending;
                }
            } else if (op == 2) {
                (void)f.pool.fulfill(p, 1);
            } else {
                ASSERT_TRUE(f.pool.release(p).ok());
                heads.erase(heads.begin() + static_cast<std::ptrdiff_t>(k));
            }
        }
        f.pool.run_deferred();
        std::size_t live = 0;
        for (const auto& h : heads) live += f.pool.poll(h).state != PromiseState::Invalid;
        ASSERT_EQ(live, heads.size());
        ASSERT_EQ(f.pool.outstanding(), heads.size() + links);
    }
}
