#pragma once

// The enclave-side stack of one enclave: ring, arenas, promises and the
// async I/O layer, wired to a single instrumentation block.

#include <memory>

#include "ringsim/arena.hpp"
#include "ringsim/async_io.hpp"
#include "ringsim/enclave_ring.hpp"
#include "ringsim/promise.hpp"
#include "ringsim/trusted_kernel.hpp"

namespace ringsim {

struct EnclaveEnvConfig {
    EnclaveRing::Config ring{};
    ArenaPool::Config arenas{};
    PromisePool::Config promises{};
    AsyncIo::Config io{};
};

class EnclaveEnv {
public:
    /// Maps the enclave's rings through the trusted kernel and builds the
    /// stack on top of them.
    static Result<std::unique_ptr<EnclaveEnv>> create(TrustedKernel& kernel, EnclaveId id,
                                                      EnclaveEnvConfig config = {});

    EnclaveRing& ring() { return *ring_; }
    ArenaPool& arenas() { return *arenas_; }
    PromisePool& promises() { return *promises_; }
    AsyncIo& io() { return *io_; }
    Instrumentation& inst() { return *inst_; }
    EnclaveId id() const { return id_; }

private:
    EnclaveEnv() = default;

    EnclaveId id_ = 0;
    std::unique_ptr<Instrumentation> inst_;
    std::unique_ptr<EnclaveRing> ring_;
    std::unique_ptr<ArenaPool> arenas_;
    std::unique_ptr<PromisePool> promises_;
    std::unique_ptr<AsyncIo> io_;
};

}  // namespace ringsim
