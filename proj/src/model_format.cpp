#include "xnorbin/model_format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "xnorbin/error.hpp"
#include "xnorbin/util.hpp"

namespace xnorbin::model {

using nlohmann::json;
using bnn::ThresholdMode;
using bnn::ThresholdSpec;

std::vector<LayerDims> layer_dims(const ModelDescriptor& model) {
  std::vector<LayerDims> dims;
  Shape cur = model.input_shape;
  for (const auto& layer : model.layers) {
    LayerDims d;
    d.in = cur;
    d.conv_h = layer.geometry.out_height(cur.height);
    d.conv_w = layer.geometry.out_width(cur.width);
    d.out = Shape{layer.pool.out_extent(d.conv_h), layer.pool.out_extent(d.conv_w), layer.c_out};
    dims.push_back(d);
    cur = d.out;
  }
  return dims;
}

std::vector<ThresholdSpec> effective_thresholds(const LayerDescriptor& layer) {
  const int pad_lanes = bnn::tiles_for(layer.c_in) * bnn::kLanes - layer.c_in;
  const int offset = layer.geometry.k_h * layer.geometry.k_w * pad_lanes;
  std::vector<ThresholdSpec> out = layer.thresholds;
  for (auto& spec : out) {
    if (spec.mode == ThresholdMode::CONST) continue;
    const int shifted = std::clamp<int>(spec.threshold + offset, std::numeric_limits<std::int16_t>::min(),
                                        std::numeric_limits<std::int16_t>::max());
    spec.threshold = static_cast<std::int16_t>(shifted);
  }
  return out;
}

std::string Violation::to_string() const {
  std::ostringstream ss;
  ss << rule;
  if (layer >= 0) ss << "@" << layer;
  ss << ": " << message;
  return ss.str();
}

std::vector<Violation> validate_model(const ModelDescriptor& model) {
  std::vector<Violation> out;
  const auto fail = [&](int layer, std::string rule, std::string message) {
    out.push_back(Violation{layer, std::move(rule), std::move(message)});
  };

  const Shape& in = model.input_shape;
  if (in.height < 1 || in.width < 1 || in.channels < 1) {
    fail(-1, "InputShape", "input dims must be positive");
    return out;
  }
  if (model.layers.empty()) fail(-1, "EmptyModel", "model has no layers");

  Shape cur = in;
  bool chain_ok = true;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const int li = static_cast<int>(i);
    const auto& l = model.layers[i];
    const auto& g = l.geometry;

    bool kernel_ok = true;
    if (g.k_h > kMaxKernel || g.k_w > kMaxKernel) {
      fail(li, "KernelTooLarge",
           "kernel exceeds 7 (" + std::to_string(g.k_h) + "x" + std::to_string(g.k_w) +
               "); it would need to be split into smaller convolutions");
      kernel_ok = false;
    }
    if (g.k_h < 1 || g.k_w < 1) {
      fail(li, "KernelRange", "kernel dims must be >= 1");
      kernel_ok = false;
    }
    if (l.c_in < 1 || l.c_out < 1) {
      fail(li, "ChannelCount", "c_in and c_out must be >= 1");
      chain_ok = false;
      continue;
    }
    if (chain_ok && l.c_in != cur.channels) {
      fail(li, "ChannelMismatch",
           "c_in " + std::to_string(l.c_in) + " != incoming channels " + std::to_string(cur.channels));
    }
    if (g.stride_y < 1 || g.stride_x < 1) {
      fail(li, "StrideRange", "strides must be >= 1");
      kernel_ok = false;
    }
    if (g.pad_y < 0 || g.pad_x < 0 || g.pad_y >= g.k_h || g.pad_x >= g.k_w) {
      fail(li, "PadRange", "padding must satisfy 0 <= pad < kernel");
      kernel_ok = false;
    }
    if (g.pad_value != 1 && g.pad_value != -1) fail(li, "PadValue", "pad_value must be +1 or -1");

    if (static_cast<int>(l.thresholds.size()) != l.c_out) {
      fail(li, "ThresholdCount",
           std::to_string(l.thresholds.size()) + " thresholds for " + std::to_string(l.c_out) + " outputs");
    }
    for (const auto& t : l.thresholds) {
      if (t.mode != ThresholdMode::GE && t.mode != ThresholdMode::LE && t.mode != ThresholdMode::CONST) {
        fail(li, "ThresholdMode", "unknown threshold mode");
        break;
      }
      if (t.const_bit > 1) {
        fail(li, "ThresholdMode", "const_bit must be 0 or 1");
        break;
      }
    }

    const auto& w = l.weights;
    if (w.c_out != l.c_out || w.c_in != l.c_in || w.k_h != g.k_h || w.k_w != g.k_w) {
      fail(li, "WeightShape", "weight set dims disagree with layer dims");
    } else if (w.words.size() != w.expected_words()) {
      fail(li, "WeightCount",
           std::to_string(w.words.size()) + " weight words, expected " + std::to_string(w.expected_words()));
    } else if (kernel_ok) {
      const int last = w.tiles_in() - 1;
      const std::uint16_t mask = bnn::valid_lane_mask(l.c_in, last);
      bool clean = true;
      for (int o = 0; o < l.c_out && clean; ++o)
        for (int r = 0; r < g.k_h && clean; ++r)
          for (int c = 0; c < g.k_w && clean; ++c) clean = (w.word(o, r, c, last).bits & ~mask) == 0;
      if (!clean) fail(li, "WeightPadding", "weight bits for padding channels must be 0");
    }

    if (kernel_ok && g.k_h * g.k_w * bnn::kLanes * bnn::tiles_for(l.c_in) >
                         std::numeric_limits<std::int16_t>::max()) {
      fail(li, "AccumulatorRange", "k_h*k_w*16*ceil(c_in/16) exceeds the 16-bit accumulator");
    }

    if (!kernel_ok || !chain_ok) {
      chain_ok = false;
      continue;
    }
    const int conv_h = g.out_height(cur.height);
    const int conv_w = g.out_width(cur.width);
    if (conv_h < 1 || conv_w < 1) {
      fail(li, "ConvUnderflow", "kernel larger than padded input");
      chain_ok = false;
      continue;
    }
    if (l.pool.enabled) {
      if (l.pool.size < 1 || l.pool.stride < 1) {
        fail(li, "PoolConfig", "pool size and stride must be >= 1");
        chain_ok = false;
        continue;
      }
      if (l.pool.size > conv_h || l.pool.size > conv_w) {
        fail(li, "PoolOverrun",
             "pool window " + std::to_string(l.pool.size) + " larger than conv output " +
                 std::to_string(conv_h) + "x" + std::to_string(conv_w));
        chain_ok = false;
        continue;
      }
    }
    cur = Shape{l.pool.out_extent(conv_h), l.pool.out_extent(conv_w), l.c_out};
  }
  return out;
}

void require_valid(const ModelDescriptor& model) {
  const auto violations = validate_model(model);
  if (violations.empty()) return;
  std::string msg;
  for (const auto& v : violations) {
    if (!msg.empty()) msg += "; ";
    msg += v.to_string();
  }
  throw ValidationError(msg);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const char* mode_name(ThresholdMode m) {
  switch (m) {
    case ThresholdMode::GE: return "GE";
    case ThresholdMode::LE: return "LE";
    case ThresholdMode::CONST: return "CONST";
  }
  return "?";
}

void expect_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + " must be an object");
  std::set<std::string> want(keys.begin(), keys.end());
  for (const auto& k : want) {
    if (!obj.contains(k)) throw SchemaError(where + " is missing field '" + k + "'");
  }
  for (const auto& [k, v] : obj.items()) {
    if (!want.count(k)) throw SchemaError(where + " has unexpected field '" + k + "'");
  }
}

int get_int(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw SchemaError(where + "." + key + " must be an integer");
  const auto i = v.get<std::int64_t>();
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
    throw SchemaError(where + "." + key + " out of range");
  }
  return static_cast<int>(i);
}

std::pair<int, int> get_pair(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw SchemaError(where + "." + key + " must be a pair of integers");
  }
  return {v[0].get<int>(), v[1].get<int>()};
}

}  // namespace

std::string model_to_json(const ModelDescriptor& model) {
  json doc;
  doc["format_tag"] = kModelFormatTag;
  doc["name"] = model.name;
  doc["input_shape"] = {model.input_shape.height, model.input_shape.width, model.input_shape.channels};
  json layers = json::array();
  for (const auto& l : model.layers) {
    json jl;
    jl["c_in"] = l.c_in;
    jl["c_out"] = l.c_out;
    jl["kernel"] = {l.geometry.k_h, l.geometry.k_w};
    jl["stride"] = {l.geometry.stride_y, l.geometry.stride_x};
    jl["pad"] = {l.geometry.pad_y, l.geometry.pad_x};
    jl["pad_value"] = l.geometry.pad_value;
    jl["pool"] = {{"enabled", l.pool.enabled}, {"size", l.pool.size}, {"stride", l.pool.stride}};
    json th = json::array();
    for (const auto& t : l.thresholds) {
      th.push_back({{"mode", mode_name(t.mode)}, {"t", t.threshold}, {"const_bit", t.const_bit}});
    }
    jl["thresholds"] = std::move(th);
    std::vector<std::uint16_t> raw(l.weights.words.size());
    std::transform(l.weights.words.begin(), l.weights.words.end(), raw.begin(),
                   [](bnn::BipolarWord w) { return w.bits; });
    jl["weights"] = util::words_to_base64(raw);
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(1) + "\n";
}

ModelDescriptor model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  expect_keys(doc, {"format_tag", "name", "input_shape", "layers"}, "model");
  if (doc["format_tag"] != kModelFormatTag) throw SchemaError("format_tag must be \"XBM1\"");
  if (!doc["name"].is_string()) throw SchemaError("model.name must be a string");

  ModelDescriptor m;
  m.name = doc["name"].get<std::string>();
  const json& shape = doc["input_shape"];
  if (!shape.is_array() || shape.size() != 3 ||
      !std::all_of(shape.begin(), shape.end(), [](const json& v) { return v.is_number_integer(); })) {
    throw SchemaError("input_shape must be [H, W, C]");
  }
  m.input_shape = Shape{shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>()};

  if (!doc["layers"].is_array()) throw SchemaError("layers must be an array");
  for (std::size_t i = 0; i < doc["layers"].size(); ++i) {
    const std::string where = "layers[" + std::to_string(i) + "]";
    const json& jl = doc["layers"][i];
    expect_keys(jl, {"c_in", "c_out", "kernel", "stride", "pad", "pad_value", "pool", "thresholds", "weights"},
                where);
    LayerDescriptor l;
    l.c_in = get_int(jl, "c_in", where);
    l.c_out = get_int(jl, "c_out", where);
    std::tie(l.geometry.k_h, l.geometry.k_w) = get_pair(jl, "kernel", where);
    std::tie(l.geometry.stride_y, l.geometry.stride_x) = get_pair(jl, "stride", where);
    std::tie(l.geometry.pad_y, l.geometry.pad_x) = get_pair(jl, "pad", where);
    l.geometry.pad_value = get_int(jl, "pad_value", where);

    const json& jp = jl["pool"];
    expect_keys(jp, {"enabled", "size", "stride"}, where + ".pool");
    if (!jp["enabled"].is_boolean()) throw SchemaError(where + ".pool.enabled must be a boolean");
    l.pool = bnn::PoolConfig{jp["enabled"].get<bool>(), get_int(jp, "size", where + ".pool"),
                             get_int(jp, "stride", where + ".pool")};

    if (!jl["thresholds"].is_array()) throw SchemaError(where + ".thresholds must be an array");
    for (std::size_t k = 0; k < jl["thresholds"].size(); ++k) {
      const std::string tw = where + ".thresholds[" + std::to_string(k) + "]";
      const json& jt = jl["thresholds"][k];
      expect_keys(jt, {"mode", "t", "const_bit"}, tw);
      ThresholdSpec spec;
      const json& mode = jt["mode"];
      if (mode == "GE") spec.mode = ThresholdMode::GE;
      else if (mode == "LE") spec.mode = ThresholdMode::LE;
      else if (mode == "CONST") spec.mode = ThresholdMode::CONST;
      else throw SchemaError(tw + ".mode must be GE, LE or CONST");
      const int t = get_int(jt, "t", tw);
      if (t < std::numeric_limits<std::int16_t>::min() || t > std::numeric_limits<std::int16_t>::max()) {
        throw SchemaError(tw + ".t does not fit a 16-bit signed integer");
      }
      spec.threshold = static_cast<std::int16_t>(t);
      const int cb = get_int(jt, "const_bit", tw);
      if (cb != 0 && cb != 1) throw SchemaError(tw + ".const_bit must be 0 or 1");
      spec.const_bit = static_cast<std::uint8_t>(cb);
      l.thresholds.push_back(spec);
    }

    if (!jl["weights"].is_string()) throw SchemaError(where + ".weights must be a base64 string");
    const auto raw = util::base64_to_words(jl["weights"].get<std::string>());
    l.weights.c_out = l.c_out;
    l.weights.c_in = l.c_in;
    l.weights.k_h = l.geometry.k_h;
    l.weights.k_w = l.geometry.k_w;
    if (l.c_out >= 1 && l.c_in >= 1 && l.geometry.k_h >= 1 && l.geometry.k_w >= 1 &&
        raw.size() != l.weights.expected_words()) {
      throw SchemaError(where + ".weights holds " + std::to_string(raw.size()) + " words, expected " +
                        std::to_string(l.weights.expected_words()));
    }
    l.weights.words.reserve(raw.size());
    for (const auto w : raw) l.weights.words.push_back(bnn::BipolarWord{w});
    m.layers.push_back(std::move(l));
  }
  return m;
}

ModelDescriptor load_model(const std::filesystem::path& file) {
  auto m = model_from_json(util::read_file(file));
  require_valid(m);
  return m;
}

void save_model(const ModelDescriptor& model, const std::filesystem::path& file) {
  util::write_file_atomic(file, model_to_json(model));
}

// ---------------------------------------------------------------------------
// Random fixtures

namespace {

bnn::BipolarWord random_word(util::Rng& rng, int channels, int t) {
  return bnn::BipolarWord{static_cast<std::uint16_t>(rng.next() & bnn::valid_lane_mask(channels, t))};
}

int isqrt(int v) { return static_cast<int>(std::sqrt(static_cast<double>(v))); }

}  // namespace

ModelDescriptor gen_random_model(std::uint64_t seed, int depth, const RandomModelBounds& bounds) {
  if (depth < 1) throw ValidationError("depth must be >= 1");
  if (bounds.max_height < 1 || bounds.max_width < 1 || bounds.max_channels < 1) {
    throw ValidationError("random model bounds must be positive");
  }
  util::Rng rng(seed);
  ModelDescriptor m;
  m.name = "random-" + std::to_string(seed) + "-d" + std::to_string(depth);
  m.input_shape = Shape{static_cast<int>(rng.uniform(1, bounds.max_height)),
                        static_cast<int>(rng.uniform(1, bounds.max_width)),
                        static_cast<int>(rng.uniform(1, bounds.max_channels))};

  Shape cur = m.input_shape;
  for (int i = 0; i < depth; ++i) {
    LayerDescriptor l;
    l.c_in = cur.channels;
    l.c_out = static_cast<int>(rng.uniform(1, bounds.max_channels));
    auto& g = l.geometry;
    const auto pick_axis = [&](int extent, int& k, int& pad, int& stride) {
      k = static_cast<int>(rng.uniform(1, kMaxKernel));
      pad = static_cast<int>(rng.uniform(0, k - 1));
      if (extent + 2 * pad < k) k = extent + 2 * pad;
      stride = static_cast<int>(rng.uniform(1, 2));
    };
    pick_axis(cur.height, g.k_h, g.pad_y, g.stride_y);
    pick_axis(cur.width, g.k_w, g.pad_x, g.stride_x);
    g.pad_value = rng.coin() ? 1 : -1;

    const int conv_h = g.out_height(cur.height);
    const int conv_w = g.out_width(cur.width);
    if (rng.coin()) {
      const int size = static_cast<int>(rng.uniform(1, std::min({3, conv_h, conv_w})));
      l.pool = bnn::PoolConfig{true, size, static_cast<int>(rng.uniform(1, 2))};
    }

    const int fan_in = g.k_h * g.k_w * l.c_in;
    const int spread = 2 * std::max(1, isqrt(fan_in));
    for (int o = 0; o < l.c_out; ++o) {
      bnn::ThresholdSpec spec;
      const auto roll = rng.uniform(0, 9);
      if (roll < 5) spec.mode = ThresholdMode::GE;
      else if (roll < 8) spec.mode = ThresholdMode::LE;
      else spec.mode = ThresholdMode::CONST;
      if (spec.mode == ThresholdMode::CONST) {
        spec.const_bit = static_cast<std::uint8_t>(rng.coin());
      } else {
        spec.threshold = static_cast<std::int16_t>(rng.uniform(-spread, spread));
      }
      l.thresholds.push_back(spec);
    }

    l.weights = bnn::WeightSet{l.c_out, g.k_h, g.k_w, l.c_in, {}};
    l.weights.words.resize(l.weights.expected_words());
    const int tiles = l.weights.tiles_in();
    for (std::size_t w = 0; w < l.weights.words.size(); ++w) {
      l.weights.words[w] = random_word(rng, l.c_in, static_cast<int>(w % tiles));
    }

    cur = Shape{l.pool.out_extent(conv_h), l.pool.out_extent(conv_w), l.c_out};
    m.layers.push_back(std::move(l));
  }
  return m;
}

bnn::BinaryFeatureMap gen_random_input(std::uint64_t seed, const Shape& shape) {
  util::Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
  bnn::BinaryFeatureMap fmap(shape.height, shape.width, shape.channels);
  for (int t = 0; t < fmap.tiles(); ++t)
    for (int y = 0; y < shape.height; ++y)
      for (int x = 0; x < shape.width; ++x) fmap.set_word(t, y, x, random_word(rng, shape.channels, t));
  return fmap;
}

}  // namespace xnorbin::model
