#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ringsim/rt_scheduler.hpp"
#include "ringsim/util.hpp"

using namespace ringsim;

namespace {

TaskSpec spec(SimTime period, SimTime budget, int priority = 0, std::uint32_t core = 0) {
    TaskSpec s;
    s.period = period;
    s.budget = budget;
    s.priority = priority;
    s.core = core;
    s.mem_quota = 16;
    return s;
}

SimTime executed(const std::vector<TraceRecord>& trace, TaskId id, SimTime until) {
    SimTime total = 0, since = -1;
    for (const auto& r : trace) {
        if (r.task != id) continue;
        if (r.event == SchedEvent::Dispatch) since = r.t;
        else if (since >= 0 && r.event != SchedEvent::Replenish) {
            total += r.t - since;
            since = -1;
        }
    }
    if (since >= 0) total += until - since;
    return total;
}

}  // namespace

TEST(Scheduler, RejectsMalformedSpecs) {
    Scheduler s(SchedPolicy::FixedPriority, 2);
    EXPECT_EQ(s.admit(spec(0, 1)).error(), Errc::InvalidArgument);
    EXPECT_EQ(s.admit(spec(10, 0)).error(), Errc::InvalidArgument);
    EXPECT_EQ(s.admit(spec(10, 11)).error(), Errc::InvalidArgument);
    EXPECT_EQ(s.admit(spec(10, 5, 0, 2)).error(), Errc::InvalidArgument);
    EXPECT_TRUE(s.admit(spec(10, 10, 0, 1)).ok());
    EXPECT_EQ(s.admit(spec(10, 1, 0, 1)).error(), Errc::Rejected);
    EXPECT_TRUE(s.admit(spec(10, 10, 0, 0)).ok());
}

// Exact rational admission against integer cross-multiplication on random
// specs whose utilization sums land on and around one.
TEST(SchedulerProperty, AdmissionMatchesExactUtilization) {
    Rng r(2024);
    std::size_t accepted = 0, rejected = 0;
    for (int trial = 0; trial < 300; ++trial) {
        Scheduler s(SchedPolicy::Edf, 1);
        std::vector<oracle::RefTask> admitted;
        for (int i = 0; i < 12; ++i) {
            const SimTime period = r.range(1, 60);
            const SimTime budget = r.range(1, period);
            auto candidate = admitted;
            candidate.push_back({period, budget, 0, 0, 0});
            const bool want = oracle::utilization_fits(candidate, 0);
            auto got = s.admit(spec(period, budget));
            ASSERT_EQ(got.ok(), want) << period << "/" << budget;
            if (want) {
                admitted = candidate;
                ++accepted;
            } else {
                EXPECT_EQ(got.error(), Errc::Rejected);
                ++rejected;
            }
        }
        // A lone task plus its complement fills the core exactly.
        if (admitted.size() == 1 && admitted[0].budget < admitted[0].period) {
            ASSERT_TRUE(s.admit(spec(admitted[0].period, admitted[0].period - admitted[0].budget)).ok());
            EXPECT_EQ(s.admit(spec(1000, 1)).error(), Errc::Rejected);
        }
    }
    EXPECT_GT(accepted, 300u);
    EXPECT_GT(rejected, 300u);
}

TEST(Scheduler, FixedPriorityPreemptsAndExhausts) {
    Scheduler s(SchedPolicy::FixedPriority);
    const TaskId low = *s.admit(spec(100, 50, 5));
    EXPECT_EQ(s.running(), low);
    s.advance(10);
    const TaskId high = *s.admit(spec(20, 5, 1));
    EXPECT_EQ(s.running(), high);
    s.advance(5);
    EXPECT_EQ(s.running(), low);
    EXPECT_EQ(s.task(high).state, TaskState::BudgetExhausted);
    s.advance(85);
    EXPECT_EQ(s.now(), 100);
    EXPECT_EQ(executed(s.trace(), low, 100), 50);
}

TEST(Scheduler, EdfRunsEarliestDeadline) {
    Scheduler s(SchedPolicy::Edf);
    const TaskId slow = *s.admit(spec(100, 10));
    const TaskId fast = *s.admit(spec(30, 10));
    EXPECT_EQ(s.running(), fast);
    s.advance(10);
    EXPECT_EQ(s.running(), slow);
}

TEST(Scheduler, YieldForfeitsRestOfPeriod) {
    Scheduler s(SchedPolicy::FixedPriority);
    const TaskId a = *s.admit(spec(100, 40, 0));
    const TaskId b = *s.admit(spec(100, 40, 1));
    s.advance(10);
    ASSERT_TRUE(s.yield_remaining(a).ok());
    EXPECT_EQ(s.task(a).remaining, 0);
    EXPECT_EQ(s.task(a).state, TaskState::Yielded);
    EXPECT_EQ(s.running(), b);
    EXPECT_TRUE(s.yield_remaining(a).ok());  // not running: no effect
    s.advance(90);
    EXPECT_EQ(s.running(), a);
    EXPECT_EQ(s.task(a).remaining, 40);
    EXPECT_EQ(executed(s.trace(), a, 100), 10);
    EXPECT_EQ(executed(s.trace(), b, 100), 40);
    EXPECT_EQ(s.yield_remaining(99).error(), Errc::UnknownTask);
}

TEST(Scheduler, DonationConservesBudgetAndQuota) {
    Scheduler s(SchedPolicy::FixedPriority);
    const TaskId parent = *s.admit(spec(100, 60));
    const double u_before = s.utilization();
    const TaskId child = *s.donate(parent, spec(0, 0), 20, 6);
    EXPECT_EQ(s.task(parent).spec.budget, 40);
    EXPECT_EQ(s.task(parent).spec.mem_quota, 10u);
    EXPECT_EQ(s.task(child).spec.budget, 20);
    EXPECT_EQ(s.task(child).spec.period, 100);
    EXPECT_EQ(s.task(child).parent, parent);
    EXPECT_DOUBLE_EQ(s.utilization(), u_before);
    EXPECT_EQ(s.donate(parent, spec(0, 0), 41, 0).error(), Errc::InsufficientDonation);
    EXPECT_EQ(s.donate(parent, spec(0, 0), 0, 0).error(), Errc::InsufficientDonation);
    EXPECT_EQ(s.donate(parent, spec(0, 0), 1, 11).error(), Errc::InsufficientDonation);
    EXPECT_EQ(s.donate(77, spec(0, 0), 1, 0).error(), Errc::UnknownTask);
    ASSERT_TRUE(s.retire(child).ok());
    EXPECT_EQ(s.task(parent).spec.budget, 60);
    EXPECT_EQ(s.task(parent).spec.mem_quota, 16u);
    EXPECT_EQ(s.retire(child).error(), Errc::UnknownTask);
}

// Random donate/retire trees: the core's total utilization never changes.
TEST(SchedulerProperty, DonationTreesConserveUtilization) {
    Rng r(99);
    for (int trial = 0; trial < 100; ++trial) {
        Scheduler s(SchedPolicy::Edf);
        const TaskId root = *s.admit(spec(1000, 1000));
        std::vector<TaskId> live{root};
        for (int i = 0; i < 50; ++i) {
            const TaskId t = live[r.below(live.size())];
            if (r.chance(0.6)) {
                const SimTime b = s.task(t).spec.budget;
                if (b < 2) continue;
                if (auto c = s.donate(t, spec(0, 0), r.range(1, b - 1), 0); c.ok()) live.push_back(*c);
            } else if (t != root) {
                ASSERT_TRUE(s.retire(t).ok());
                live.erase(std::find(live.begin(), live.end(), t));
            }
            SimTime total = 0;
            for (const auto& [id, tc] : s.tasks()) total += tc.spec.budget;
            // Orphaned budget stays with the orphan, so the sum over live
            // tasks never exceeds the root's original budget.
            ASSERT_LE(total, 1000);
            s.advance(r.range(1, 300));
        }
    }
}

TEST(Scheduler, DonatedChildWaitsForNextPeriod) {
    Scheduler s(SchedPolicy::FixedPriority);
    const TaskId parent = *s.admit(spec(100, 60, 1));
    s.advance(10);
    const TaskId child = *s.donate(parent, spec(0, 0, 0), 30, 0);
    EXPECT_EQ(s.task(child).state, TaskState::BudgetExhausted);
    s.advance(90);
    EXPECT_EQ(s.running(), child);
    s.advance(100);
    EXPECT_EQ(executed(s.trace(), child, 200), 30);
}

TEST(SchedulerTrace, SmallSetsMatchUnitStepReference) {
    for (const auto policy : {SchedPolicy::FixedPriority, SchedPolicy::Edf}) {
        for (std::uint64_t seed = 1; seed <= 6; ++seed) {
            auto tasks = oracle::random_task_set(seed, 4, policy == SchedPolicy::FixedPriority);
            Rng r(seed);
            for (auto& t : tasks)
                if (r.chance(0.3)) t.work = r.range(1, t.budget);
            const SimTime horizon = 4 * 120;
            const auto want = oracle::reference_trace(policy, 1, tasks, horizon);
            const auto got = oracle::scheduler_trace(policy, 1, tasks, horizon);
            ASSERT_EQ(got.size(), want.size()) << "seed " << seed;
            for (std::size_t i = 0; i < got.size(); ++i)
                ASSERT_EQ(got[i], want[i]) << "seed " << seed << " record " << i;
        }
    }
}

TEST(SchedulerTrace, TwoCoresMatchReference) {
    std::vector<oracle::RefTask> tasks{{10, 4, 0, 0, 0}, {20, 10, 1, 0, 3}, {8, 8, 0, 1, 0}, {16, 0, 1, 1, 0}};
    tasks[3].budget = 1;
    tasks[2].budget = 7;
    for (const auto policy : {SchedPolicy::FixedPriority, SchedPolicy::Edf})
        EXPECT_EQ(oracle::scheduler_trace(policy, 2, tasks, 200), oracle::reference_trace(policy, 2, tasks, 200));
}

// Every full period window grants each task its whole budget when the set
// is schedulable: harmonic rate-monotonic sets under FP, any set under EDF.
TEST(SchedulerProperty, BudgetGuaranteedEveryWindow) {
    std::uint64_t windows = 0;
    for (const auto policy : {SchedPolicy::FixedPriority, SchedPolicy::Edf}) {
        for (std::uint64_t seed = 100; seed < 110; ++seed) {
            const bool harmonic = policy == SchedPolicy::FixedPriority;
            const auto tasks = oracle::random_task_set(seed, 8, harmonic);
            const SimTime horizon = (harmonic ? 64 : 120) * 200;
            const auto trace = oracle::scheduler_trace(policy, 1, tasks, horizon);
            const auto service = oracle::window_service(trace, tasks, horizon);
            for (std::size_t i = 0; i < tasks.size(); ++i)
                for (const SimTime got : service[i]) {
                    ASSERT_EQ(got, tasks[i].budget) << "seed " << seed << " task " << i;
                    ++windows;
                }
        }
    }
    EXPECT_GT(windows, 10'000u);
}

TEST(Scheduler, NextEventTracksExhaustAndRelease) {
    Scheduler s(SchedPolicy::FixedPriority);
    (void)*s.admit(spec(100, 30));
    EXPECT_EQ(s.time_to_next_event(), 30);
    s.advance(30);
    EXPECT_EQ(s.time_to_next_event(), 70);
}
