#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>

namespace ringsim {

/// Simulated time in integer nanoseconds.
using SimTime = std::int64_t;
using VirtAddr = std::uint64_t;
using PhysAddr = std::uint64_t;
using RegionId = std::uint64_t;
using TaskId = std::uint32_t;

inline constexpr std::size_t kPageSize = 4096;

constexpr std::size_t round_up_pages(std::size_t bytes) {
    return (bytes + kPageSize - 1) / kPageSize * kPageSize;
}

constexpr bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

enum class Errc : std::uint8_t {
    // shm_world
    QuotaExceeded,
    OutOfMemory,
    DuplicatePage,
    OverlapWithPrivate,
    SizeMismatch,
    UnknownPage,
    RegionExists,
    UnknownRegion,
    RegionMapped,
    NotValidated,
    VirtualRangeBusy,
    BusFault,
    PageInUse,
    // ring_protocol
    BadSize,
    Full,
    EmptyConsume,
    // enclave_api
    Untranslatable,
    StaleSqeId,
    PendingTableFull,
    RegistrationRejected,
    InsufficientDonation,
    TranslationOverlap,
    NoRings,
    // arena_alloc
    ArenaFull,
    Underflow,
    DoubleFree,
    StaleArena,
    PoolExhausted,
    // promises
    UnknownTag,
    AlreadyChained,
    StalePromise,
    // rt_scheduler
    Rejected,
    UnknownTask,
    // secure_device
    DeviceFull,
    // misc
    InvalidArgument,
};

std::string_view to_string(Errc e);

/// Error wrapper used to construct a failed Result.
struct Err {
    Errc code;
};

/// Minimal value-or-error carrier used on every fallible path.
template <class T>
class [[nodiscard]] Result {
public:
    Result(T value) : data_(std::in_place_index<0>, std::move(value)) {}
    Result(Err e) : data_(std::in_place_index<1>, e.code) {}

    bool ok() const { return data_.index() == 0; }
    explicit operator bool() const { return ok(); }

    T& value() & { return std::get<0>(data_); }
    const T& value() const& { return std::get<0>(data_); }
    T&& value() && { return std::get<0>(std::move(data_)); }
    T& operator*() & { return value(); }
    const T& operator*() const& { return value(); }
    T* operator->() { return &value(); }
    const T* operator->() const { return &value(); }

    Errc error() const { return std::get<1>(data_); }

private:
    std::variant<T, Errc> data_;
};

template <>
class [[nodiscard]] Result<void> {
public:
    Result() = default;
    Result(Err e) : error_(e.code) {}

    bool ok() const { return !error_.has_value(); }
    explicit operator bool() const { return ok(); }
    Errc error() const { return *error_; }

private:
    std::optional<Errc> error_;
};

using Status = Result<void>;

/// POSIX-style error numbers carried in completion results (fixed values).
namespace errno_code {
inline constexpr std::int32_t kEPERM = 1;
inline constexpr std::int32_t kENOENT = 2;
inline constexpr std::int32_t kEINTR = 4;
inline constexpr std::int32_t kEIO = 5;
inline constexpr std::int32_t kEBADF = 9;
inline constexpr std::int32_t kEAGAIN = 11;
inline constexpr std::int32_t kENOMEM = 12;
inline constexpr std::int32_t kEFAULT = 14;
inline constexpr std::int32_t kEEXIST = 17;
inline constexpr std::int32_t kENOTDIR = 20;
inline constexpr std::int32_t kEISDIR = 21;
inline constexpr std::int32_t kEINVAL = 22;
inline constexpr std::int32_t kENOSPC = 28;
inline constexpr std::int32_t kEPIPE = 32;
inline constexpr std::int32_t kEADDRINUSE = 98;
inline constexpr std::int32_t kENOTCONN = 107;
inline constexpr std::int32_t kETIMEDOUT = 110;
inline constexpr std::int32_t kECANCELED = 125;
inline constexpr std::int32_t kEOPNOTSUPP = 95;
}  // namespace errno_code

}  // namespace ringsim
