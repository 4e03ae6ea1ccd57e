#pragma once

#include <cstdint>

namespace ctricks::toy {

// Detection probe attached at a model tap: a 1x1 bottleneck conv (with bias)
// + GroupNorm (affine) + SiLU, then a shared head made of one 3x3 conv and a
// 1x1 predictor emitting 4 box coordinates + 1 objectness per cell.
struct ProbeSpec {
    std::int64_t c_in = 0;
    std::int64_t bottleneck = 512;
    std::int64_t head_channels = 256;
    std::int64_t head_kernel = 3;
    std::int64_t outputs = 5;
};

struct ProbeParams {
    std::int64_t bottleneck = 0;
    std::int64_t head = 0;
    std::int64_t total = 0;
};

// Throws Error(InvalidArgument) for c_in <= 0.
ProbeParams probe_param_count(const ProbeSpec& spec);

}  // namespace ctricks::toy
