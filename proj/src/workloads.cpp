#include "xnorbin/workloads.hpp"

#include "xnorbin/util.hpp"

namespace xnorbin::model {

namespace {

struct LayerRow {
  int c_out;
  int kernel;  // 0: cover the incoming map
  int pad;
  int pool_size;  // 0: no pooling
  int pool_stride;
};

}  // namespace

ModelDescriptor alexnet_shaped_model(std::uint64_t seed, bool conv2_pool) {
  const LayerRow table[] = {
      {256, 5, 2, conv2_pool ? 3 : 0, 2},  // conv2
      {384, 3, 1, 0, 0},                   // conv3
      {384, 3, 1, 0, 0},                   // conv4
      {256, 3, 1, 3, 2},                   // conv5
      {4096, 0, 0, 0, 0},                  // fc6
      {4096, 1, 0, 0, 0},                  // fc7
      {1000, 1, 0, 0, 0},                  // fc8
  };
  util::Rng rng(seed);
  ModelDescriptor m;
  m.name = conv2_pool ? "alexnet-shaped" : "alexnet-shaped-conv2-nopool";
  m.input_shape = Shape{27, 27, 96};
  Shape cur = m.input_shape;
  for (const auto& row : table) {
    LayerDescriptor l;
    l.c_in = cur.channels;
    l.c_out = row.c_out;
    const int kh = row.kernel == 0 ? std::min(cur.height, kMaxKernel) : row.kernel;
    const int kw = row.kernel == 0 ? std::min(cur.width, kMaxKernel) : row.kernel;
    l.geometry = bnn::ConvGeometry{kh, kw, 1, 1, row.pad, row.pad, -1};
    const int conv_h = l.geometry.out_height(cur.height);
    const int conv_w = l.geometry.out_width(cur.width);
    if (row.pool_size > 0) l.pool = bnn::PoolConfig{true, row.pool_size, row.pool_stride};
    l.weights = bnn::WeightSet{l.c_out, kh, kw, l.c_in, {}};
    l.weights.words.resize(l.weights.expected_words());
    const int tiles = l.weights.tiles_in();
    for (std::size_t i = 0; i < l.weights.words.size(); ++i) {
      const auto mask = bnn::valid_lane_mask(l.c_in, static_cast<int>(i % tiles));
      l.weights.words[i] = bnn::BipolarWord{static_cast<std::uint16_t>(rng.next() & mask)};
    }
    for (int o = 0; o < l.c_out; ++o) {
      l.thresholds.push_back(bnn::ThresholdSpec{bnn::ThresholdMode::GE,
                                                static_cast<std::int16_t>(rng.uniform(-8, 8)), 0});
    }
    cur = Shape{l.pool.out_extent(conv_h), l.pool.out_extent(conv_w), l.c_out};
    m.layers.push_back(std::move(l));
  }
  return m;
}

}  // namespace xnorbin::model
