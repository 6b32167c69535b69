#include "xnorbin/activation_file.hpp"

#include <limits>

#include "xnorbin/error.hpp"
#include "xnorbin/util.hpp"

namespace xnorbin::io {

namespace {

constexpr char kMagic[4] = {'X', 'B', 'F', '1'};
constexpr std::size_t kHeaderBytes = 10;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

std::uint16_t get_u16(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

}  // namespace

std::string encode_activation(const bnn::BinaryFeatureMap& fmap) {
  constexpr int kMax = std::numeric_limits<std::uint16_t>::max();
  if (fmap.height() > kMax || fmap.width() > kMax || fmap.channels() > kMax) {
    throw ShapeError("feature map dims exceed the 16-bit XBF1 header");
  }
  std::string out(kMagic, sizeof kMagic);
  put_u16(out, static_cast<std::uint16_t>(fmap.height()));
  put_u16(out, static_cast<std::uint16_t>(fmap.width()));
  put_u16(out, static_cast<std::uint16_t>(fmap.channels()));
  for (const auto w : fmap.words()) put_u16(out, w.bits);
  return out;
}

bnn::BinaryFeatureMap decode_activation(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw ParseError("not an XBF1 activation file");
  }
  const int h = get_u16(bytes, 4);
  const int w = get_u16(bytes, 6);
  const int c = get_u16(bytes, 8);
  if (h < 1 || w < 1 || c < 1) throw ParseError("XBF1 header has a zero dimension");
  const std::size_t words = static_cast<std::size_t>(bnn::tiles_for(c)) * h * w;
  if (bytes.size() != kHeaderBytes + 2 * words) {
    throw ParseError("XBF1 payload has " + std::to_string(bytes.size() - kHeaderBytes) + " bytes, expected " +
                     std::to_string(2 * words));
  }
  std::vector<bnn::BipolarWord> data(words);
  for (std::size_t i = 0; i < words; ++i) data[i] = bnn::BipolarWord{get_u16(bytes, kHeaderBytes + 2 * i)};
  return bnn::BinaryFeatureMap(h, w, c, std::move(data));
}

void save_activation(const bnn::BinaryFeatureMap& fmap, const std::filesystem::path& file) {
  util::write_file_atomic(file, encode_activation(fmap));
}

bnn::BinaryFeatureMap load_activation(const std::filesystem::path& file) {
  return decode_activation(util::read_binary_file(file));
}

}  // namespace xnorbin::io
