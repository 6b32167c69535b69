#include "xnorbin/compiler.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

#include "xnorbin/util.hpp"

namespace xnorbin::compiler {

using nlohmann::json;

std::int64_t bank_bits(const MemoryConfig& cfg, Bank b) {
  return b == Bank::A ? cfg.bank_a_bits : cfg.bank_b_bits;
}

std::int64_t LayerProgram::sink_words() const { return psum_base + psum_words; }

std::string CapacityViolation::describe() const {
  return term + " needs " + std::to_string(required_bits) + " bits in bank " + bank_name(bank) + " (" +
         std::to_string(available_bits) + " available)";
}

std::int64_t input_bits(const model::LayerDims& d) {
  return std::int64_t{bnn::tiles_for(d.in.channels)} * bnn::kLanes * d.in.height * d.in.width;
}

std::int64_t sink_bits(const model::LayerDims& d) {
  const std::int64_t groups = bnn::tiles_for(d.out.channels);
  const std::int64_t psums = std::int64_t{d.conv_h} * d.conv_w * bnn::kLanes * 16;
  const std::int64_t packed = (groups - 1) * d.out.height * d.out.width * bnn::kLanes;
  return psums + packed;
}

std::optional<CapacityViolation> check_capacity(const CapacityRequest& req, const MemoryConfig& cfg) {
  const Bank sink = other(req.src_bank);
  if (!req.exempt_input) {
    const auto need = input_bits(req.dims);
    if (need > bank_bits(cfg, req.src_bank)) {
      return CapacityViolation{"input", req.src_bank, need, bank_bits(cfg, req.src_bank)};
    }
  }
  const auto need = sink_bits(req.dims);
  if (need > bank_bits(cfg, sink)) return CapacityViolation{"sink", sink, need, bank_bits(cfg, sink)};
  return std::nullopt;
}

namespace {

void check_config(const MemoryConfig& cfg) {
  if (cfg.bank_a_bits <= 0 || cfg.bank_b_bits <= 0 || cfg.param_buffer_bits <= 0 || cfg.row_banks <= 0 ||
      cfg.bpus <= 0 || cfg.units_per_bpu <= 0 || cfg.csr_width <= 0) {
    throw ConfigMismatch("memory config values must all be positive");
  }
}

struct PhaseAttempt {
  std::size_t layers_ok = 0;
  std::optional<CapacityViolation> violation;
};

PhaseAttempt try_phase(const std::vector<model::LayerDims>& dims, Bank first_src, const MemoryConfig& cfg,
                       const CompileOptions& opt) {
  PhaseAttempt a;
  Bank src = first_src;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const bool exempt = i == 0 && opt.allow_streaming_input;
    if (auto v = check_capacity({dims[i], src, exempt}, cfg)) {
      a.violation = v;
      return a;
    }
    ++a.layers_ok;
    src = other(src);
  }
  return a;
}

std::uint16_t threshold_config_word(const bnn::ThresholdSpec& t) {
  return static_cast<std::uint16_t>(static_cast<unsigned>(t.mode) | (t.const_bit << 2));
}

}  // namespace

ControlStream compile(const model::ModelDescriptor& model, const MemoryConfig& cfg,
                      const CompileOptions& options) {
  check_config(cfg);
  const int max_rows = std::min(cfg.bpus, cfg.row_banks);
  const int max_cols = std::min(cfg.units_per_bpu, cfg.csr_width);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& g = model.layers[i].geometry;
    if (g.k_h > std::min(max_rows, model::kMaxKernel) || g.k_w > std::min(max_cols, model::kMaxKernel)) {
      throw KernelTooLarge("layer " + std::to_string(i) + " has a " + std::to_string(g.k_h) + "x" +
                           std::to_string(g.k_w) + " kernel but the array supports at most " +
                           std::to_string(std::min(max_rows, model::kMaxKernel)) + "x" +
                           std::to_string(std::min(max_cols, model::kMaxKernel)) +
                           "; it would need to be split into smaller convolutions");
    }
  }
  model::require_valid(model);
  const auto dims = model::layer_dims(model);

  ControlStream cs;
  cs.memory = cfg;
  cs.options = options;

  // Parameter image: weights then thresholds, layer after layer.
  for (const auto& layer : model.layers) {
    for (const auto w : layer.weights.words) cs.param_image.push_back(w.bits);
    for (const auto& t : model::effective_thresholds(layer)) {
      cs.param_image.push_back(threshold_config_word(t));
      cs.param_image.push_back(static_cast<std::uint16_t>(t.threshold));
    }
  }
  PhaseAttempt best = try_phase(dims, Bank::A, cfg, options);
  Bank first_src = Bank::A;
  if (best.violation) {
    const PhaseAttempt swapped = try_phase(dims, Bank::B, cfg, options);
    if (!swapped.violation) {
      best = swapped;
      first_src = Bank::B;
    } else {
      const PhaseAttempt& pick = swapped.layers_ok > best.layers_ok ? swapped : best;
      throw FeatureMapOverflow("layer " + std::to_string(pick.layers_ok) + ": " + pick.violation->describe());
    }
  }

  const std::int64_t param_bits = static_cast<std::int64_t>(cs.param_image.size()) * 16;
  if (!options.stream_params && param_bits > cfg.param_buffer_bits) {
    throw ParamOverflow("parameters need " + std::to_string(param_bits) + " bits, buffer holds " +
                        std::to_string(cfg.param_buffer_bits) + " (enable parameter streaming)");
  }

  std::int64_t param_cursor = 0;
  std::int64_t input_base = 0;
  Bank src = first_src;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    const auto& d = dims[i];
    LayerProgram p;
    p.src_bank = src;
    p.sink_bank = other(src);
    p.geometry = layer.geometry;
    p.pool = layer.pool;
    p.in = d.in;
    p.conv_h = d.conv_h;
    p.conv_w = d.conv_w;
    p.out = d.out;
    p.t_in = bnn::tiles_for(d.in.channels);
    p.g_out = bnn::tiles_for(d.out.channels);

    p.input_base = input_base;
    p.input_words = std::int64_t{p.t_in} * d.in.height * d.in.width;
    p.input_streamed = i == 0 && options.allow_streaming_input;
    const std::int64_t group_words = std::int64_t{d.out.height} * d.out.width;
    p.output_base = 0;
    p.output_words = p.g_out * group_words;
    p.psum_base = p.output_base + (p.g_out - 1) * group_words;
    p.psum_words = std::int64_t{bnn::kLanes} * d.conv_h * d.conv_w;

    p.weights_base = param_cursor;
    p.weights_words = static_cast<std::int64_t>(layer.weights.words.size());
    p.thresholds_base = p.weights_base + p.weights_words;
    p.thresholds_words = std::int64_t{kThresholdWordsPerChannel} * layer.c_out;
    param_cursor = p.thresholds_base + p.thresholds_words;

    cs.layers.push_back(p);
    input_base = p.output_base;
    src = other(src);
  }
  return cs;
}

// ---------------------------------------------------------------------------
// XCS1 JSON

namespace {

json shape_json(const model::Shape& s) { return {s.height, s.width, s.channels}; }

model::Shape shape_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw SchemaError("shape must be [H, W, C]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

Bank bank_from(const json& j) {
  if (j == "A") return Bank::A;
  if (j == "B") return Bank::B;
  throw SchemaError("bank must be \"A\" or \"B\"");
}

}  // namespace

std::string control_stream_to_json(const ControlStream& cs) {
  json doc;
  doc["format_tag"] = kControlStreamFormatTag;
  const auto& m = cs.memory;
  doc["memory"] = {{"bank_a_bits", m.bank_a_bits},       {"bank_b_bits", m.bank_b_bits},
                   {"param_buffer_bits", m.param_buffer_bits}, {"row_banks", m.row_banks},
                   {"bpus", m.bpus},                     {"units_per_bpu", m.units_per_bpu},
                   {"csr_width", m.csr_width}};
  doc["options"] = {{"stream_params", cs.options.stream_params},
                    {"allow_streaming_input", cs.options.allow_streaming_input}};
  json layers = json::array();
  for (const auto& p : cs.layers) {
    const auto& g = p.geometry;
    layers.push_back({
        {"src_bank", bank_name(p.src_bank)},
        {"sink_bank", bank_name(p.sink_bank)},
        {"kernel", {g.k_h, g.k_w}},
        {"stride", {g.stride_y, g.stride_x}},
        {"pad", {g.pad_y, g.pad_x}},
        {"pad_value", g.pad_value},
        {"pool", {{"enabled", p.pool.enabled}, {"size", p.pool.size}, {"stride", p.pool.stride}}},
        {"in_shape", shape_json(p.in)},
        {"conv_shape", {p.conv_h, p.conv_w}},
        {"out_shape", shape_json(p.out)},
        {"t_in", p.t_in},
        {"g_out", p.g_out},
        {"input_base", p.input_base},
        {"input_words", p.input_words},
        {"input_streamed", p.input_streamed},
        {"psum_base", p.psum_base},
        {"psum_words", p.psum_words},
        {"output_base", p.output_base},
        {"output_words", p.output_words},
        {"weights_base", p.weights_base},
        {"weights_words", p.weights_words},
        {"thresholds_base", p.thresholds_base},
        {"thresholds_words", p.thresholds_words},
    });
  }
  doc["layers"] = std::move(layers);
  doc["params"] = {{"words", cs.param_image.size()}, {"image", util::words_to_base64(cs.param_image)}};
  return doc.dump(1) + "\n";
}

ControlStream control_stream_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format_tag", "") != kControlStreamFormatTag) {
      throw SchemaError("format_tag must be \"XCS1\"");
    }
    ControlStream cs;
    const json& m = doc.at("memory");
    cs.memory.bank_a_bits = m.at("bank_a_bits").get<std::int64_t>();
    cs.memory.bank_b_bits = m.at("bank_b_bits").get<std::int64_t>();
    cs.memory.param_buffer_bits = m.at("param_buffer_bits").get<std::int64_t>();
    cs.memory.row_banks = m.at("row_banks").get<int>();
    cs.memory.bpus = m.at("bpus").get<int>();
    cs.memory.units_per_bpu = m.at("units_per_bpu").get<int>();
    cs.memory.csr_width = m.at("csr_width").get<int>();
    cs.options.stream_params = doc.at("options").at("stream_params").get<bool>();
    cs.options.allow_streaming_input = doc.at("options").at("allow_streaming_input").get<bool>();

    for (const json& jl : doc.at("layers")) {
      LayerProgram p;
      p.src_bank = bank_from(jl.at("src_bank"));
      p.sink_bank = bank_from(jl.at("sink_bank"));
      auto& g = p.geometry;
      g.k_h = jl.at("kernel").at(0).get<int>();
      g.k_w = jl.at("kernel").at(1).get<int>();
      g.stride_y = jl.at("stride").at(0).get<int>();
      g.stride_x = jl.at("stride").at(1).get<int>();
      g.pad_y = jl.at("pad").at(0).get<int>();
      g.pad_x = jl.at("pad").at(1).get<int>();
      g.pad_value = jl.at("pad_value").get<int>();
      const json& jp = jl.at("pool");
      p.pool = {jp.at("enabled").get<bool>(), jp.at("size").get<int>(), jp.at("stride").get<int>()};
      p.in = shape_from(jl.at("in_shape"));
      p.conv_h = jl.at("conv_shape").at(0).get<int>();
      p.conv_w = jl.at("conv_shape").at(1).get<int>();
      p.out = shape_from(jl.at("out_shape"));
      p.t_in = jl.at("t_in").get<int>();
      p.g_out = jl.at("g_out").get<int>();
      p.input_base = jl.at("input_base").get<std::int64_t>();
      p.input_words = jl.at("input_words").get<std::int64_t>();
      p.input_streamed = jl.at("input_streamed").get<bool>();
      p.psum_base = jl.at("psum_base").get<std::int64_t>();
      p.psum_words = jl.at("psum_words").get<std::int64_t>();
      p.output_base = jl.at("output_base").get<std::int64_t>();
      p.output_words = jl.at("output_words").get<std::int64_t>();
      p.weights_base = jl.at("weights_base").get<std::int64_t>();
      p.weights_words = jl.at("weights_words").get<std::int64_t>();
      p.thresholds_base = jl.at("thresholds_base").get<std::int64_t>();
      p.thresholds_words = jl.at("thresholds_words").get<std::int64_t>();
      cs.layers.push_back(p);
    }
    cs.param_image = util::base64_to_words(doc.at("params").at("image").get<std::string>());
    if (cs.param_image.size() != doc.at("params").at("words").get<std::size_t>()) {
      throw SchemaError("parameter image length does not match params.words");
    }
    return cs;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed control stream: ") + e.what());
  }
}

void emit_control_stream(const ControlStream& cs, const std::filesystem::path& file) {
  util::write_file_atomic(file, control_stream_to_json(cs));
}

ControlStream load_control_stream(const std::filesystem::path& file) {
  return control_stream_from_json(util::read_file(file));
}

}  // namespace xnorbin::compiler
