#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xnorbin::util {

// mt19937_64 output is fixed by the standard; the distributions in <random>
// are not, so bounded draws are done here to keep seeds portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform(std::int64_t lo, std::int64_t hi);

  bool coin() { return (next() >> 63) != 0; }

  /// Uniform double in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

std::string words_to_base64(std::span<const std::uint16_t> words);
/// Throws SchemaError when the payload is not valid base64 or not a whole
/// number of 16-bit words.
std::vector<std::uint16_t> base64_to_words(std::string_view text);

std::string read_file(const std::filesystem::path& file);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& file);

/// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& file, std::string_view contents);

}  // namespace xnorbin::util
