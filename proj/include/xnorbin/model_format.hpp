#pragma once

// XBM1 model container: descriptor types, JSON serialization, validation and
// the seeded random-model generator used throughout the tests.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xnorbin/bnn_core.hpp"

namespace xnorbin::model {

inline constexpr int kMaxKernel = 7;
inline constexpr const char* kModelFormatTag = "XBM1";

struct LayerDescriptor {
  bnn::ConvGeometry geometry;
  int c_in = 0;
  int c_out = 0;
  bnn::WeightSet weights;
  // As written in the model file; see effective_thresholds() for the values
  // the packed datapath compares against.
  std::vector<bnn::ThresholdSpec> thresholds;
  bnn::PoolConfig pool;

  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  friend bool operator==(const Shape&, const Shape&) = default;
};

struct ModelDescriptor {
  std::string name;
  Shape input_shape;
  std::vector<LayerDescriptor> layers;

  friend bool operator==(const ModelDescriptor&, const ModelDescriptor&) = default;
};

/// Per-layer spatial dims derived from the chained geometry.
struct LayerDims {
  Shape in;
  int conv_h = 0;  // pre-pool output
  int conv_w = 0;
  Shape out;       // post-pool output
};

/// Geometry chain for every layer. Assumes the model validates.
std::vector<LayerDims> layer_dims(const ModelDescriptor& model);

/// Thresholds shifted by k_h * k_w * (padding lanes of the last input tile):
/// each padding lane pairs bit 0 with bit 0 and adds +1 per tap.
std::vector<bnn::ThresholdSpec> effective_thresholds(const LayerDescriptor& layer);

struct Violation {
  int layer = -1;  // -1 for model-level problems
  std::string rule;
  std::string message;

  std::string to_string() const;
};

std::vector<Violation> validate_model(const ModelDescriptor& model);

/// Throws ValidationError listing every violation.
void require_valid(const ModelDescriptor& model);

std::string model_to_json(const ModelDescriptor& model);
ModelDescriptor model_from_json(const std::string& text);

ModelDescriptor load_model(const std::filesystem::path& file);
void save_model(const ModelDescriptor& model, const std::filesystem::path& file);

struct RandomModelBounds {
  int max_height = 16;
  int max_width = 16;
  int max_channels = 64;
};

ModelDescriptor gen_random_model(std::uint64_t seed, int depth, const RandomModelBounds& bounds = {});

/// Random input with padding lanes cleared.
bnn::BinaryFeatureMap gen_random_input(std::uint64_t seed, const Shape& shape);

}  // namespace xnorbin::model
