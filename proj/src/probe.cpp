#include "ctricks/probe.hpp"

#include <string>

#include "ctricks/error.hpp"

namespace ctricks::toy {

ProbeParams probe_param_count(const ProbeSpec& spec) {
    if (spec.c_in <= 0) throw Error(ErrorKind::InvalidArgument, "c_in must be positive, got " + std::to_string(spec.c_in));
    ProbeParams p;
    // conv weights + bias, then GroupNorm gamma and beta
    p.bottleneck = spec.c_in * spec.bottleneck + spec.bottleneck + 2 * spec.bottleneck;
    const std::int64_t k2 = spec.head_kernel * spec.head_kernel;
    p.head = spec.bottleneck * spec.head_channels * k2 + spec.head_channels + spec.head_channels * spec.outputs +
             spec.outputs;
    p.total = p.bottleneck + p.head;
    return p;
}

}  // namespace ctricks::toy
