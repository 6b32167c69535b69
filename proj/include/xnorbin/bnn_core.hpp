#pragma once

// Bit-true binary arithmetic and the reference forward pass.
//
// Encoding: bit 1 is +1, bit 0 is -1. The product of two bipolar values is
// therefore XNOR of their bits, and a 16-lane dot product reduces to
// 16 - 2 * popcount(a ^ b).

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace xnorbin::bnn {

inline constexpr int kLanes = 16;

/// Sixteen bipolar values packed into one 16-bit word. Bit i holds lane i.
struct BipolarWord {
  std::uint16_t bits = 0;

  friend constexpr bool operator==(BipolarWord, BipolarWord) = default;
};

inline constexpr int tiles_for(int channels) { return (channels + kLanes - 1) / kLanes; }

/// Mask of lanes that carry real channels in tile `t` of a `channels`-wide map.
inline constexpr std::uint16_t valid_lane_mask(int channels, int t) {
  const int used = channels - t * kLanes;
  if (used >= kLanes) return 0xFFFF;
  if (used <= 0) return 0;
  return static_cast<std::uint16_t>((1u << used) - 1u);
}

BipolarWord encode_bipolar(std::span<const int> values);
std::array<int, kLanes> decode_bipolar(BipolarWord word);

constexpr int dot16(BipolarWord a, BipolarWord b) {
  return kLanes - 2 * std::popcount(static_cast<unsigned>(a.bits ^ b.bits));
}

/// Binary feature map, words indexed (t * H + y) * W + x.
class BinaryFeatureMap {
 public:
  BinaryFeatureMap() = default;
  BinaryFeatureMap(int height, int width, int channels);
  BinaryFeatureMap(int height, int width, int channels, std::vector<BipolarWord> words);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  int tiles() const { return tiles_for(channels_); }

  std::size_t index(int t, int y, int x) const {
    return (static_cast<std::size_t>(t) * height_ + y) * width_ + x;
  }
  BipolarWord word(int t, int y, int x) const { return words_[index(t, y, x)]; }
  void set_word(int t, int y, int x, BipolarWord w) { words_[index(t, y, x)] = w; }

  bool bit(int c, int y, int x) const;
  void set_bit(int c, int y, int x, bool value);

  std::span<const BipolarWord> words() const { return words_; }

  friend bool operator==(const BinaryFeatureMap&, const BinaryFeatureMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<BipolarWord> words_;
};

/// Pre-activation sums for one output channel.
struct IntegerPlane {
  int height = 0;
  int width = 0;
  std::vector<std::int16_t> values;

  std::int16_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// One bit per pixel; used between thresholding and packing.
struct BitPlane {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  bool at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }

  friend bool operator==(const BitPlane&, const BitPlane&) = default;
};

/// Binary filter bank, words indexed ((o * k_h + r) * k_w + c) * T_in + t.
struct WeightSet {
  int c_out = 0;
  int k_h = 0;
  int k_w = 0;
  int c_in = 0;
  std::vector<BipolarWord> words;

  int tiles_in() const { return tiles_for(c_in); }
  std::size_t index(int o, int r, int c, int t) const {
    return ((static_cast<std::size_t>(o) * k_h + r) * k_w + c) * tiles_in() + t;
  }
  BipolarWord word(int o, int r, int c, int t) const { return words[index(o, r, c, t)]; }
  std::size_t expected_words() const {
    return static_cast<std::size_t>(c_out) * k_h * k_w * tiles_in();
  }

  friend bool operator==(const WeightSet&, const WeightSet&) = default;
};

enum class ThresholdMode : std::uint8_t { GE = 0, LE = 1, CONST = 2 };

struct ThresholdSpec {
  ThresholdMode mode = ThresholdMode::GE;
  std::int16_t threshold = 0;
  std::uint8_t const_bit = 0;

  bool apply(int s) const {
    switch (mode) {
      case ThresholdMode::GE: return s >= threshold;
      case ThresholdMode::LE: return s <= threshold;
      case ThresholdMode::CONST: return const_bit != 0;
    }
    return false;
  }

  friend bool operator==(const ThresholdSpec&, const ThresholdSpec&) = default;
};

struct ConvGeometry {
  int k_h = 1;
  int k_w = 1;
  int stride_y = 1;
  int stride_x = 1;
  int pad_y = 0;
  int pad_x = 0;
  int pad_value = -1;  // +1 or -1

  int out_height(int in_h) const { return (in_h + 2 * pad_y - k_h) / stride_y + 1; }
  int out_width(int in_w) const { return (in_w + 2 * pad_x - k_w) / stride_x + 1; }

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

struct PoolConfig {
  bool enabled = false;
  int size = 1;
  int stride = 1;

  int out_extent(int in) const { return enabled ? (in - size) / stride + 1 : in; }

  friend bool operator==(const PoolConfig&, const PoolConfig&) = default;
};

/// Word substituted for out-of-bounds taps in tile `t`. Padding lanes stay 0
/// so they keep contributing the same +1 per tap as in-bounds pixels.
BipolarWord pad_word(int pad_value, int channels, int t);

IntegerPlane conv2d_ref(const BinaryFeatureMap& input, const WeightSet& weights, int o,
                        const ConvGeometry& geom);

/// The float-domain batch-norm + sign decision the folded threshold must
/// reproduce exactly. Evaluation order is part of the contract.
inline bool bn_sign(double gamma, double beta, double mu, double sigma, double s) {
  return gamma * (s - mu) / sigma + beta >= 0.0;
}

ThresholdSpec fold_bn_threshold(double gamma, double beta, double mu, double sigma);

BitPlane apply_threshold(const IntegerPlane& plane, const ThresholdSpec& spec);

BitPlane pool_or(const BitPlane& plane, int size, int stride);

}  // namespace xnorbin::bnn
