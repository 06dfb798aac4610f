#include "ringsim/promise.hpp"

namespace ringsim {

namespace {
constexpr std::uint32_t kPollBound = 2;
}

PromisePool::PromisePool(Instrumentation& inst, Config config) : inst_(inst), config_(config) {
    if (config_.chunk_size == 0) config_.chunk_size = 1;
}

PromisePool::Record* PromisePool::get(PromiseId p) {
    const std::size_t chunk = p.index / config_.chunk_size;
    if (chunk >= chunks_.size()) return nullptr;
    Record& r = chunks_[chunk][p.index % config_.chunk_size];
    return r.in_use && r.generation == p.generation ? &r : nullptr;
}

const PromisePool::Record* PromisePool::get(PromiseId p) const {
    return const_cast<PromisePool*>(this)->get(p);
}

Result<PromiseId> PromisePool::allocate() {
    if (outstanding_ >= config_.max_outstanding) return Err{Errc::PoolExhausted};
    if (free_.empty()) {
        const std::size_t first = chunks_.size() * config_.chunk_size;
        chunks_.push_back(std::make_unique<Record[]>(config_.chunk_size));
        for (std::size_t i = config_.chunk_size; i-- > 0;)
            free_.push_back(static_cast<std::uint32_t>(first + i));
    }
    const std::uint32_t idx = free_.back();
    free_.pop_back();
    Record& r = chunks_[idx / config_.chunk_size][idx % config_.chunk_size];
    const std::uint32_t gen = r.generation + 1;
    r = Record{};
    r.generation = gen;
    r.in_use = true;
    ++outstanding_;
    return PromiseId{idx, gen};
}

void PromisePool::free_record(PromiseId p) {
    Record* r = get(p);
    if (!r) return;
    r->in_use = false;
    free_.push_back(p.index);
    --outstanding_;
}

Result<PromiseId> PromisePool::make() { return allocate(); }

Result<PromiseId> PromisePool::make_fulfilled(std::int64_t v) {
    auto p = allocate();
    if (p.ok()) get(*p)->s = {PromiseState::Fulfilled, v};
    return p;
}

Result<PromiseId> PromisePool::make_failed(std::int64_t err) {
    auto p = allocate();
    if (p.ok()) get(*p)->s = {PromiseState::Failed, err};
    return p;
}

Result<PromiseId> PromisePool::then(PromiseId p, PromiseCallback cb, void* ctx,
                                    const PromiseArgs& args, bool always) {
    Record* r = get(p);
    if (!r) return Err{Errc::StalePromise};
    if (r->has_next) return Err{Errc::AlreadyChained};
    auto next = allocate();
    if (!next.ok()) return next;
    r = get(p);
    r->has_next = true;
    r->next = *next;
    r->cb = cb;
    r->ctx = ctx;
    r->args = args;
    r->always = always;
    r->owned_by_chain = true;
    if (r->s.settled()) {
        ready_.push_back(p);
        drain(config_.continuation_budget);
    }
    return next;
}

Settlement PromisePool::poll(PromiseId p) const {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::PromisePoll, kPollBound);
    inst_.meter.tick();
    const Record* r = get(p);
    if (!r) return {PromiseState::Invalid, 0};
    return r->s;
}

void PromisePool::settle(PromiseId p, Settlement s) {
    Record* r = get(p);
    if (!r || r->s.settled()) return;
    r->s = s;
    if (r->has_next) ready_.push_back(p);
}

Status PromisePool::fulfill(PromiseId p, std::int64_t value) {
    Record* r = get(p);
    if (!r || r->s.settled()) return Err{Errc::StalePromise};
    settle(p, {PromiseState::Fulfilled, value});
    drain(config_.continuation_budget);
    return {};
}

Status PromisePool::fail(PromiseId p, std::int64_t err) {
    Record* r = get(p);
    if (!r || r->s.settled()) return Err{Errc::StalePromise};
    settle(p, {PromiseState::Failed, err});
    drain(config_.continuation_budget);
    return {};
}

Status PromisePool::settle_from_cqe(std::uint64_t tag, std::int32_t result) {
    const PromiseId p = PromiseId::from_tag(tag);
    Record* r = get(p);
    if (!r || r->s.settled()) return Err{Errc::UnknownTag};
    if (result < 0) return fail(p, -std::int64_t(result));
    return fulfill(p, result);
}

void PromisePool::run_deferred() { drain(config_.continuation_budget); }

void PromisePool::drain(std::uint32_t budget) {
    if (draining_) return;
    draining_ = true;
    while (!ready_.empty() && budget > 0) {
        const PromiseId p = ready_.front();
        ready_.pop_front();
        Record* r = get(p);
        if (!r) continue;
        const PromiseId next = r->next;
        const Settlement in = r->s;
        if (!get(next)) {
            free_record(p);
            continue;
        }
        if (r->cb && (in.state == PromiseState::Fulfilled || r->always)) {
            --budget;
            ++callbacks_run_;
            const auto cb = r->cb;
            void* ctx = r->ctx;
            const PromiseArgs args = r->args;
            free_record(p);
            const Step step = cb(ctx, args, in);
            switch (step.kind) {
            case Step::Kind::Fulfill: settle(next, {PromiseState::Fulfilled, step.value}); break;
            case Step::Kind::Fail: settle(next, {PromiseState::Failed, step.value}); break;
            case Step::Kind::Adopt: {
                Record* q = get(step.adopt);
                if (!q || q->has_next || step.adopt == next) {
                    settle(next, {PromiseState::Failed, errno_code::kEINVAL});
                    break;
                }
                q->has_next = true;
                q->next = next;
                q->cb = nullptr;
                q->owned_by_chain = true;
                if (q->s.settled()) ready_.push_back(step.adopt);
                break;
            }
            }
        } else {
            free_record(p);
            settle(next, in);
        }
    }
    draining_ = false;
}

Status PromisePool::release(PromiseId p) {
    Record* r = get(p);
    if (!r) return Err{Errc::StalePromise};
    if (r->has_next) return Err{Errc::AlreadyChained};
    free_record(p);
    return {};
}

}  // namespace ringsim
