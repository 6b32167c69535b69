#include "xnorbin/bnn_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "xnorbin/error.hpp"

namespace xnorbin::bnn {

BipolarWord encode_bipolar(std::span<const int> values) {
  if (values.size() != kLanes) {
    throw InvalidBipolar("expected 16 values, got " + std::to_string(values.size()));
  }
  std::uint16_t bits = 0;
  for (int i = 0; i < kLanes; ++i) {
    const int v = values[i];
    if (v != 1 && v != -1) {
      throw InvalidBipolar("lane " + std::to_string(i) + " holds " + std::to_string(v));
    }
    if (v == 1) bits |= static_cast<std::uint16_t>(1u << i);
  }
  return BipolarWord{bits};
}

std::array<int, kLanes> decode_bipolar(BipolarWord word) {
  std::array<int, kLanes> out{};
  for (int i = 0; i < kLanes; ++i) out[i] = ((word.bits >> i) & 1u) ? 1 : -1;
  return out;
}

BinaryFeatureMap::BinaryFeatureMap(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ShapeError("feature map dims must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(channels));
  }
  words_.assign(static_cast<std::size_t>(tiles()) * height * width, BipolarWord{});
}

BinaryFeatureMap::BinaryFeatureMap(int height, int width, int channels,
                                   std::vector<BipolarWord> words)
    : BinaryFeatureMap(height, width, channels) {
  if (words.size() != words_.size()) {
    throw ShapeError("feature map expects " + std::to_string(words_.size()) + " words, got " +
                     std::to_string(words.size()));
  }
  const std::uint16_t mask = valid_lane_mask(channels, tiles() - 1);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (std::size_t i = (tiles() - 1) * plane; i < words.size(); ++i) {
    if (words[i].bits & ~mask) {
      throw ShapeError("padding channel bits must be 0 (word " + std::to_string(i) + ")");
    }
  }
  words_ = std::move(words);
}

bool BinaryFeatureMap::bit(int c, int y, int x) const {
  return (word(c / kLanes, y, x).bits >> (c % kLanes)) & 1u;
}

void BinaryFeatureMap::set_bit(int c, int y, int x, bool value) {
  auto& w = words_[index(c / kLanes, y, x)];
  const auto m = static_cast<std::uint16_t>(1u << (c % kLanes));
  w.bits = value ? static_cast<std::uint16_t>(w.bits | m) : static_cast<std::uint16_t>(w.bits & ~m);
}

BipolarWord pad_word(int pad_value, int channels, int t) {
  return BipolarWord{pad_value > 0 ? valid_lane_mask(channels, t) : std::uint16_t{0}};
}

IntegerPlane conv2d_ref(const BinaryFeatureMap& input, const WeightSet& weights, int o,
                        const ConvGeometry& geom) {
  if (weights.c_in != input.channels()) {
    throw ShapeError("weights expect " + std::to_string(weights.c_in) + " input channels, map has " +
                     std::to_string(input.channels()));
  }
  if (weights.k_h != geom.k_h || weights.k_w != geom.k_w) {
    throw ShapeError("weight kernel does not match geometry");
  }
  if (o < 0 || o >= weights.c_out) throw ShapeError("filter index out of range");
  if (geom.stride_y < 1 || geom.stride_x < 1 || geom.pad_y < 0 || geom.pad_x < 0 ||
      geom.pad_y >= geom.k_h || geom.pad_x >= geom.k_w) {
    throw ShapeError("invalid stride/padding");
  }
  const int out_h = geom.out_height(input.height());
  const int out_w = geom.out_width(input.width());
  if (out_h < 1 || out_w < 1) throw ShapeError("kernel larger than padded input");

  const int tiles = input.tiles();
  if (geom.k_h * geom.k_w * kLanes * tiles > std::numeric_limits<std::int16_t>::max()) {
    throw ShapeError("pre-activation range exceeds 16-bit accumulator");
  }
  IntegerPlane out{out_h, out_w, std::vector<std::int16_t>(static_cast<std::size_t>(out_h) * out_w)};
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      int sum = 0;
      for (int r = 0; r < geom.k_h; ++r) {
        const int iy = y * geom.stride_y + r - geom.pad_y;
        for (int c = 0; c < geom.k_w; ++c) {
          const int ix = x * geom.stride_x + c - geom.pad_x;
          const bool inside = iy >= 0 && iy < input.height() && ix >= 0 && ix < input.width();
          for (int t = 0; t < tiles; ++t) {
            const BipolarWord a =
                inside ? input.word(t, iy, ix) : pad_word(geom.pad_value, input.channels(), t);
            sum += dot16(a, weights.word(o, r, c, t));
          }
        }
      }
      out.values[static_cast<std::size_t>(y) * out_w + x] = static_cast<std::int16_t>(sum);
    }
  }
  return out;
}

ThresholdSpec fold_bn_threshold(double gamma, double beta, double mu, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(gamma) || !std::isfinite(beta) ||
      !std::isfinite(mu)) {
    throw InvalidBatchNorm("sigma must be positive and all parameters finite");
  }
  if (gamma == 0.0) {
    return ThresholdSpec{ThresholdMode::CONST, 0, static_cast<std::uint8_t>(beta >= 0.0 ? 1 : 0)};
  }

  constexpr double lo = std::numeric_limits<std::int16_t>::min();
  constexpr double hi = std::numeric_limits<std::int16_t>::max();
  const double x = mu - beta * sigma / gamma;
  const auto pred = [&](double s) { return bn_sign(gamma, beta, mu, sigma, s); };

  if (gamma > 0) {
    // Smallest integer s with pred(s). The closed form can be off by one
    // ulp-induced step, so settle it against the float predicate itself.
    double t = std::clamp(std::ceil(x), lo, hi);
    while (t > lo && pred(t - 1)) t -= 1;
    while (t < hi && !pred(t)) t += 1;
    return ThresholdSpec{ThresholdMode::GE, static_cast<std::int16_t>(t), 0};
  }
  // Largest integer s with pred(s).
  double t = std::clamp(std::floor(x), lo, hi);
  while (t < hi && pred(t + 1)) t += 1;
  while (t > lo && !pred(t)) t -= 1;
  return ThresholdSpec{ThresholdMode::LE, static_cast<std::int16_t>(t), 0};
}

BitPlane apply_threshold(const IntegerPlane& plane, const ThresholdSpec& spec) {
  BitPlane out{plane.height, plane.width, std::vector<std::uint8_t>(plane.values.size())};
  for (std::size_t i = 0; i < plane.values.size(); ++i) out.bits[i] = spec.apply(plane.values[i]);
  return out;
}

BitPlane pool_or(const BitPlane& plane, int size, int stride) {
  if (size < 1 || stride < 1) throw ShapeError("pool size and stride must be >= 1");
  if (size > plane.height || size > plane.width) {
    throw ShapeError("pool window " + std::to_string(size) + " exceeds plane " +
                     std::to_string(plane.height) + "x" + std::to_string(plane.width));
  }
  const int out_h = (plane.height - size) / stride + 1;
  const int out_w = (plane.width - size) / stride + 1;
  BitPlane out{out_h, out_w, std::vector<std::uint8_t>(static_cast<std::size_t>(out_h) * out_w)};
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      bool any = false;
      for (int r = 0; r < size && !any; ++r) {
        for (int c = 0; c < size && !any; ++c) any = plane.at(y * stride + r, x * stride + c);
      }
      out.bits[static_cast<std::size_t>(y) * out_w + x] = any;
    }
  }
  return out;
}

}  // namespace xnorbin::bnn
