#include "xnorbin/forward.hpp"

#include <string>

#include "xnorbin/error.hpp"

namespace xnorbin::bnn {

std::vector<BinaryFeatureMap> forward_ref_layers(const model::ModelDescriptor& model,
                                                 const BinaryFeatureMap& input) {
  model::require_valid(model);
  const auto& shape = model.input_shape;
  if (input.height() != shape.height || input.width() != shape.width ||
      input.channels() != shape.channels) {
    throw ShapeError("input is " + std::to_string(input.height()) + "x" + std::to_string(input.width()) +
                     "x" + std::to_string(input.channels()) + ", model expects " +
                     std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
                     std::to_string(shape.channels));
  }

  std::vector<BinaryFeatureMap> outputs;
  const BinaryFeatureMap* cur = &input;
  for (const auto& layer : model.layers) {
    const auto thresholds = model::effective_thresholds(layer);
    std::vector<BitPlane> planes;
    planes.reserve(layer.c_out);
    for (int o = 0; o < layer.c_out; ++o) {
      BitPlane bits = apply_threshold(conv2d_ref(*cur, layer.weights, o, layer.geometry), thresholds[o]);
      if (layer.pool.enabled) bits = pool_or(bits, layer.pool.size, layer.pool.stride);
      planes.push_back(std::move(bits));
    }
    BinaryFeatureMap next(planes.front().height, planes.front().width, layer.c_out);
    for (int o = 0; o < layer.c_out; ++o)
      for (int y = 0; y < next.height(); ++y)
        for (int x = 0; x < next.width(); ++x)
          if (planes[o].at(y, x)) next.set_bit(o, y, x, true);
    outputs.push_back(std::move(next));
    cur = &outputs.back();
  }
  return outputs;
}

BinaryFeatureMap forward_ref(const model::ModelDescriptor& model, const BinaryFeatureMap& input) {
  return forward_ref_layers(model, input).back();
}

}  // namespace xnorbin::bnn
