#include "ringsim/arena.hpp"

#include <bit>
#include <charconv>

namespace ringsim {

namespace {
constexpr std::uint32_t kPushPopBound = 2;
}

std::size_t ArenaPool::init_bytes_from_env(const std::map<std::string, std::string>& env) {
    auto it = env.find("RINGSIM_INIT_SHM_BYTES");
    if (it == env.end()) return 0;
    std::size_t v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return 0;
    return v;
}

ArenaPool::ArenaPool(Instrumentation& inst, Config config) : inst_(inst), config_(std::move(config)) {}

std::size_t ArenaPool::size_class(std::size_t size) const {
    if (size > config_.max_class) return round_up_pages(size);
    return std::max(config_.min_class, std::bit_ceil(size));
}

ArenaPool::Record* ArenaPool::lookup(ArenaId a) {
    if (a.index >= records_.size()) return nullptr;
    auto& r = records_[a.index];
    return r.generation == a.generation ? &r : nullptr;
}

const ArenaPool::Record* ArenaPool::lookup(ArenaId a) const {
    return const_cast<ArenaPool*>(this)->lookup(a);
}

std::optional<ArenaId> ArenaPool::take_from_bins(std::size_t cls) {
    for (auto it = bins_.lower_bound(cls); it != bins_.end(); ++it) {
        if (it->second.empty()) continue;
        const std::uint32_t idx = it->second.back();
        it->second.pop_back();
        auto& r = records_[idx];
        r.live = true;
        r.top = 0;
        ++r.generation;
        return ArenaId{idx, r.generation};
    }
    return std::nullopt;
}

void ArenaPool::bin_block(VirtAddr base, std::size_t capacity) {
    records_.push_back(Record{base, capacity, 0, 0, false});
    bins_[capacity].push_back(static_cast<std::uint32_t>(records_.size() - 1));
}

void ArenaPool::split_greedy(VirtAddr base, std::size_t bytes) {
    while (bytes >= config_.min_class) {
        const std::size_t c = std::bit_floor(std::min(bytes, config_.max_class));
        bin_block(base, c);
        base += c;
        bytes -= c;
    }
    if (bytes > 0) bin_block(base, bytes);
}

Result<ArenaPool::Request> ArenaPool::request_arena(std::size_t size) {
    if (size == 0) return Err{Errc::InvalidArgument};
    const std::size_t cls = size_class(size);
    if (auto a = take_from_bins(cls)) return Request{a, 0};
    const std::uint64_t ticket = next_ticket_++;
    queue_.push_back({ticket, cls});
    if (!in_flight_ && !wanted_) wanted_ = RefillOrder{std::max(cls, config_.refill_min), false};
    return Request{std::nullopt, ticket};
}

void ArenaPool::prefill() {
    if (config_.init_bytes == 0 || in_flight_ || wanted_) return;
    wanted_ = RefillOrder{round_up_pages(config_.init_bytes), true};
}

std::optional<RefillOrder> ArenaPool::take_refill_order() {
    if (in_flight_ || !wanted_) return std::nullopt;
    in_flight_ = wanted_;
    wanted_.reset();
    ++refills_issued_;
    return in_flight_;
}

void ArenaPool::on_refill(const TranslationEntry& block) {
    if (!in_flight_) return;
    rejections_ = 0;
    received_ += block.size;
    VirtAddr base = block.enclave_base;
    std::size_t left = block.size;
    if (in_flight_->prefill) {
        for (const auto& [sz, count] : config_.prefill_plan) {
            for (std::size_t i = 0; i < count && sz > 0 && left >= sz; ++i) {
                bin_block(base, sz);
                base += sz;
                left -= sz;
            }
        }
    } else if (!queue_.empty() && left >= queue_.front().cls) {
        const std::size_t cls = queue_.front().cls;
        bin_block(base, cls);
        base += cls;
        left -= cls;
    }
    split_greedy(base, left);
    in_flight_.reset();
    serve_queue();
    if (!queue_.empty() && !wanted_)
        wanted_ = RefillOrder{std::max(queue_.front().cls, config_.refill_min), false};
}

void ArenaPool::on_refill_rejected() {
    if (!in_flight_) return;
    if (++rejections_ >= config_.max_rejections) {
        on_refill_failed();
        return;
    }
    wanted_ = in_flight_;
    in_flight_.reset();
}

void ArenaPool::on_refill_failed() {
    rejections_ = 0;
    in_flight_.reset();
    wanted_.reset();
    for (const auto& w : queue_) outcomes_.push_back({w.ticket, std::nullopt});
    queue_.clear();
}

void ArenaPool::serve_queue() {
    while (!queue_.empty()) {
        auto a = take_from_bins(queue_.front().cls);
        if (!a) break;
        outcomes_.push_back({queue_.front().ticket, a});
        queue_.pop_front();
    }
}

std::vector<TicketOutcome> ArenaPool::take_outcomes() {
    std::vector<TicketOutcome> out;
    out.swap(outcomes_);
    return out;
}

Result<std::size_t> ArenaPool::push(ArenaId a, std::size_t n, std::size_t align) {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::ArenaPush, kPushPopBound);
    inst_.meter.tick();
    Record* r = lookup(a);
    if (!r || !r->live) return Err{Errc::StaleArena};
    if (!is_power_of_two(align)) return Err{Errc::InvalidArgument};
    const std::size_t aligned = (r->top + align - 1) & ~(align - 1);
    if (aligned < r->top || aligned > r->capacity || n > r->capacity - aligned)
        return Err{Errc::ArenaFull};
    r->top = aligned + n;
    return aligned;
}

Status ArenaPool::pop(ArenaId a, std::size_t n) {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::ArenaPop, kPushPopBound);
    inst_.meter.tick();
    Record* r = lookup(a);
    if (!r || !r->live) return Err{Errc::StaleArena};
    if (n > r->top) return Err{Errc::Underflow};
    r->top -= n;
    return {};
}

Status ArenaPool::free_arena(ArenaId a) {
    Record* r = lookup(a);
    if (!r) return Err{Errc::StaleArena};
    if (!r->live) return Err{Errc::DoubleFree};
    r->live = false;
    r->top = 0;
    bins_[r->capacity].push_back(a.index);
    return {};
}

Result<ArenaInfo> ArenaPool::info(ArenaId a) const {
    const Record* r = lookup(a);
    if (!r || !r->live) return Err{Errc::StaleArena};
    return ArenaInfo{r->base, r->capacity, r->top};
}

std::size_t ArenaPool::bin_count(std::size_t capacity) const {
    auto it = bins_.find(capacity);
    return it == bins_.end() ? 0 : it->second.size();
}

std::map<std::size_t, std::size_t> ArenaPool::bin_census() const {
    std::map<std::size_t, std::size_t> out;
    for (const auto& [cap, v] : bins_)
        if (!v.empty()) out[cap] = v.size();
    return out;
}

std::size_t ArenaPool::live_bytes() const {
    std::size_t t = 0;
    for (const auto& r : records_)
        if (r.live) t += r.capacity;
    return t;
}

std::size_t ArenaPool::binned_bytes() const {
    std::size_t t = 0;
    for (const auto& [cap, v] : bins_) t += cap * v.size();
    return t;
}

}  // namespace ringsim
