#pragma once

// XBF1 activation files: "XBF1", then u16 H, W, C (little-endian), then the
// packed words in BinaryFeatureMap order, each u16 little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xnorbin/bnn_core.hpp"

namespace xnorbin::io {

std::string encode_activation(const bnn::BinaryFeatureMap& fmap);
bnn::BinaryFeatureMap decode_activation(const std::vector<std::uint8_t>& bytes);

void save_activation(const bnn::BinaryFeatureMap& fmap, const std::filesystem::path& file);
bnn::BinaryFeatureMap load_activation(const std::filesystem::path& file);

}  // namespace xnorbin::io
