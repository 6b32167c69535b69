#pragma once

#include <vector>

#include "xnorbin/bnn_core.hpp"
#include "xnorbin/model_format.hpp"

namespace xnorbin::bnn {

/// Reference forward pass, one layer at a time. Returns the activation after
/// every layer; the last entry is the network output.
std::vector<BinaryFeatureMap> forward_ref_layers(const model::ModelDescriptor& model,
                                                 const BinaryFeatureMap& input);

BinaryFeatureMap forward_ref(const model::ModelDescriptor& model, const BinaryFeatureMap& input);

}  // namespace xnorbin::bnn
