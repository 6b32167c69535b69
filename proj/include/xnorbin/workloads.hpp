#pragma once

#include <cstdint>

#include "xnorbin/model_format.hpp"

namespace xnorbin::model {

/// Binary-AlexNet layer table from conv2 onward (27x27x96 input); the
/// fully-connected layers are convolutions whose kernel covers the incoming
/// map. conv1 (11x11 kernel) is not representable on the 7x7 array and is
/// left out. Weights and thresholds are random; only the shapes matter.
ModelDescriptor alexnet_shaped_model(std::uint64_t seed = 1, bool conv2_pool = true);

}  // namespace xnorbin::model
