#pragma once

// Lowers a model to the accelerator control stream.
//
// Sink bank layout for a layer with G output groups (all addresses in 16-bit
// words):
//
//   output_base                       packed output, group g at g*pH*pW
//   psum_base = (G-1)*pH*pW           16 filters x conv_h x conv_w partial sums
//
// The last group's packed words land at the start of the partial-sum region.
// A packed word for pooled row py is only written once conv row
// py*stride+size-1 is finished, and every partial sum it overlaps belongs to a
// row at or above py, so the overwritten slots are dead by then. The output
// ends up contiguous in BinaryFeatureMap order and the next layer reads it in
// place.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xnorbin/bnn_core.hpp"
#include "xnorbin/error.hpp"
#include "xnorbin/model_format.hpp"

namespace xnorbin::compiler {

inline constexpr const char* kControlStreamFormatTag = "XCS1";

struct MemoryConfig {
  std::int64_t bank_a_bits = 128 * 1024;
  std::int64_t bank_b_bits = 256 * 1024;
  std::int64_t param_buffer_bits = 64ll * 1024 * 1024;
  int row_banks = 7;
  int bpus = 7;
  int units_per_bpu = 7;
  int csr_width = 7;

  friend bool operator==(const MemoryConfig&, const MemoryConfig&) = default;
};

struct CompileOptions {
  // Parameters live in external flash; the parameter buffer acts as a cache.
  bool stream_params = false;
  // Layer 0 reads its input from an external stream instead of a bank.
  bool allow_streaming_input = false;

  friend bool operator==(const CompileOptions&, const CompileOptions&) = default;
};

enum class Bank : std::uint8_t { A = 0, B = 1 };

inline Bank other(Bank b) { return b == Bank::A ? Bank::B : Bank::A; }
inline const char* bank_name(Bank b) { return b == Bank::A ? "A" : "B"; }
std::int64_t bank_bits(const MemoryConfig& cfg, Bank b);

class KernelTooLarge : public Error {
 public:
  explicit KernelTooLarge(const std::string& m) : Error("KernelTooLarge", m) {}
};
class FeatureMapOverflow : public Error {
 public:
  explicit FeatureMapOverflow(const std::string& m) : Error("FeatureMapOverflow", m) {}
};
class ParamOverflow : public Error {
 public:
  explicit ParamOverflow(const std::string& m) : Error("ParamOverflow", m) {}
};

struct LayerProgram {
  Bank src_bank = Bank::A;
  Bank sink_bank = Bank::B;

  bnn::ConvGeometry geometry;
  bnn::PoolConfig pool;
  model::Shape in;
  int conv_h = 0;
  int conv_w = 0;
  model::Shape out;
  int t_in = 0;
  int g_out = 0;

  std::int64_t input_base = 0;
  std::int64_t input_words = 0;
  bool input_streamed = false;
  std::int64_t psum_base = 0;
  std::int64_t psum_words = 0;
  std::int64_t output_base = 0;
  std::int64_t output_words = 0;
  std::int64_t weights_base = 0;
  std::int64_t weights_words = 0;
  std::int64_t thresholds_base = 0;
  std::int64_t thresholds_words = 0;

  std::int64_t sink_words() const;

  friend bool operator==(const LayerProgram&, const LayerProgram&) = default;
};

/// Two parameter words per output channel: (mode | const_bit << 2), threshold.
inline constexpr int kThresholdWordsPerChannel = 2;

struct ControlStream {
  MemoryConfig memory;
  CompileOptions options;
  std::vector<LayerProgram> layers;
  std::vector<std::uint16_t> param_image;

  friend bool operator==(const ControlStream&, const ControlStream&) = default;
};

struct CapacityViolation {
  std::string term;  // "input" or "sink"
  Bank bank = Bank::A;
  std::int64_t required_bits = 0;
  std::int64_t available_bits = 0;

  std::string describe() const;
};

struct CapacityRequest {
  model::LayerDims dims;
  Bank src_bank = Bank::A;
  bool exempt_input = false;
};

/// Input fmap bits must fit the source bank; one group of partial sums plus
/// the packed outputs of the other groups must fit the sink bank.
std::optional<CapacityViolation> check_capacity(const CapacityRequest& req, const MemoryConfig& cfg);

std::int64_t input_bits(const model::LayerDims& d);
std::int64_t sink_bits(const model::LayerDims& d);

ControlStream compile(const model::ModelDescriptor& model, const MemoryConfig& cfg = {},
                      const CompileOptions& options = {});

std::string control_stream_to_json(const ControlStream& cs);
ControlStream control_stream_from_json(const std::string& text);

void emit_control_stream(const ControlStream& cs, const std::filesystem::path& file);
ControlStream load_control_stream(const std::filesystem::path& file);

}  // namespace xnorbin::compiler
