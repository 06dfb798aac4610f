#include "ringsim/types.hpp"
#include "ringsim/step_meter.hpp"

namespace ringsim {

std::string_view to_string(Errc e) {
    switch (e) {
    case Errc::QuotaExceeded: return "QuotaExceeded";
    case Errc::OutOfMemory: return "OutOfMemory";
    case Errc::DuplicatePage: return "DuplicatePage";
    case Errc::OverlapWithPrivate: return "OverlapWithPrivate";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::UnknownPage: return "UnknownPage";
    case Errc::RegionExists: return "RegionExists";
    case Errc::UnknownRegion: return "UnknownRegion";
    case Errc::RegionMapped: return "RegionMapped";
    case Errc::NotValidated: return "NotValidated";
    case Errc::VirtualRangeBusy: return "VirtualRangeBusy";
    case Errc::BusFault: return "BusFault";
    case Errc::PageInUse: return "PageInUse";
    case Errc::BadSize: return "BadSize";
    case Errc::Full: return "Full";
    case Errc::EmptyConsume: return "EmptyConsume";
    case Errc::Untranslatable: return "Untranslatable";
    case Errc::StaleSqeId: return "StaleSqeId";
    case Errc::PendingTableFull: return "PendingTableFull";
    case Errc::RegistrationRejected: return "RegistrationRejected";
    case Errc::InsufficientDonation: return "InsufficientDonation";
    case Errc::TranslationOverlap: return "TranslationOverlap";
    case Errc::NoRings: return "NoRings";
    case Errc::ArenaFull: return "ArenaFull";
    case Errc::Underflow: return "Underflow";
    case Errc::DoubleFree: return "DoubleFree";
    case Errc::StaleArena: return "StaleArena";
    case Errc::PoolExhausted: return "PoolExhausted";
    case Errc::UnknownTag: return "UnknownTag";
    case Errc::AlreadyChained: return "AlreadyChained";
    case Errc::StalePromise: return "StalePromise";
    case Errc::Rejected: return "Rejected";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::DeviceFull: return "DeviceFull";
    case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

std::string_view to_string(MeteredOp op) {
    switch (op) {
    case MeteredOp::TryGetSqe: return "try_get_sqe";
    case MeteredOp::PrepAndSubmit: return "prep_and_submit";
    case MeteredOp::ReleaseSqe: return "release_sqe";
    case MeteredOp::PeekCqe: return "peek_cqe";
    case MeteredOp::ConsumeCqe: return "consume_cqe";
    case MeteredOp::Translate: return "translate";
    case MeteredOp::DeepTranslate: return "deep_translate";
    case MeteredOp::ArenaPush: return "arena_push";
    case MeteredOp::ArenaPop: return "arena_pop";
    case MeteredOp::PromisePoll: return "promise_poll";
    case MeteredOp::Count: break;
    }
    return "?";
}

}  // namespace ringsim
