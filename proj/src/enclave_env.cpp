#include "ringsim/enclave_env.hpp"

namespace ringsim {

Result<std::unique_ptr<EnclaveEnv>> EnclaveEnv::create(TrustedKernel& kernel, EnclaveId id,
                                                       EnclaveEnvConfig config) {
    auto rings = kernel.sys_attach_rings(id);
    if (!rings.ok()) return Err{rings.error()};
    std::unique_ptr<EnclaveEnv> env(new EnclaveEnv());
    env->id_ = id;
    env->inst_ = std::make_unique<Instrumentation>();
    auto ring = EnclaveRing::attach(kernel, id, *rings, *env->inst_, config.ring);
    if (!ring.ok()) return Err{ring.error()};
    env->ring_ = std::move(*ring);
    env->arenas_ = std::make_unique<ArenaPool>(*env->inst_, config.arenas);
    env->promises_ = std::make_unique<PromisePool>(*env->inst_, config.promises);
    env->io_ = std::make_unique<AsyncIo>(*env->ring_, *env->arenas_, *env->promises_, config.io);
    env->arenas_->prefill();
    return env;
}

}  // namespace ringsim
