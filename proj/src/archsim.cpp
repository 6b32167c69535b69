#include "xnorbin/archsim.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <stdexcept>

#include "json.hpp"

#include "xnorbin/error.hpp"

namespace xnorbin::sim {

using compiler::Bank;
using compiler::ControlStream;
using compiler::LayerProgram;
using compiler::MemoryConfig;

Stats& Stats::operator+=(const Stats& o) {
  cycles += o.cycles;
  xnor_word_ops += o.xnor_word_ops;
  src_reads += o.src_reads;
  sink_reads += o.sink_reads;
  sink_writes += o.sink_writes;
  packed_writes += o.packed_writes;
  param_reads += o.param_reads;
  rowbank_reads += o.rowbank_reads;
  rowbank_writes += o.rowbank_writes;
  csr_shifts += o.csr_shifts;
  crossbar_rotations += o.crossbar_rotations;
  return *this;
}

std::vector<std::pair<std::string, std::int64_t>> stats_fields(const Stats& s) {
  return {{"cycles", s.cycles},
          {"xnor_word_ops", s.xnor_word_ops},
          {"src_reads", s.src_reads},
          {"sink_reads", s.sink_reads},
          {"sink_writes", s.sink_writes},
          {"packed_writes", s.packed_writes},
          {"param_reads", s.param_reads},
          {"rowbank_reads", s.rowbank_reads},
          {"rowbank_writes", s.rowbank_writes},
          {"csr_shifts", s.csr_shifts},
          {"crossbar_rotations", s.crossbar_rotations}};
}

namespace {

class WordMemory {
 public:
  WordMemory(std::string name, std::int64_t words) : name_(std::move(name)), words_(words, 0) {}

  std::uint16_t read(std::int64_t addr) const {
    check(addr);
    return words_[addr];
  }
  void write(std::int64_t addr, std::uint16_t value) {
    check(addr);
    words_[addr] = value;
  }
  std::int64_t size() const { return static_cast<std::int64_t>(words_.size()); }
  const std::string& name() const { return name_; }

 private:
  void check(std::int64_t addr) const {
    if (addr < 0 || addr >= size()) {
      throw AddressFault(name_ + " address " + std::to_string(addr) + " outside [0, " +
                         std::to_string(size()) + ")");
    }
  }

  std::string name_;
  std::vector<std::uint16_t> words_;
};

void require_in_region(std::int64_t addr, std::int64_t base, std::int64_t len, const char* region) {
  if (addr < base || addr >= base + len) {
    throw AddressFault(std::string("access at ") + std::to_string(addr) + " outside declared " + region +
                       " region [" + std::to_string(base) + ", " + std::to_string(base + len) + ")");
  }
}

class Machine {
 public:
  Machine(const ControlStream& cs, const SimOptions& opt)
      : cs_(cs),
        opt_(opt),
        bank_a_("bank A", cs.memory.bank_a_bits / 16),
        bank_b_("bank B", cs.memory.bank_b_bits / 16),
        params_("param buffer", static_cast<std::int64_t>(cs.param_image.size())),
        row_banks_(cs.memory.row_banks),
        row_tags_(cs.memory.row_banks, kEmpty),
        act_csr_(cs.memory.bpus, std::vector<bnn::BipolarWord>(cs.memory.csr_width)),
        wt_csr_(cs.memory.bpus, std::vector<bnn::BipolarWord>(cs.memory.csr_width)) {
    for (std::size_t i = 0; i < cs.param_image.size(); ++i) {
      params_.write(static_cast<std::int64_t>(i), cs.param_image[i]);
    }
  }

  SimResult run(const bnn::BinaryFeatureMap& input) {
    if (cs_.layers.empty()) throw ConfigMismatch("control stream has no layers");
    const auto& first = cs_.layers.front();
    if (input.height() != first.in.height || input.width() != first.in.width ||
        input.channels() != first.in.channels) {
      throw ShapeError("input shape does not match the control stream");
    }
    for (std::size_t i = 0; i < cs_.layers.size(); ++i) check_program(static_cast<int>(i), cs_.layers[i]);

    // Stage the network input.
    const auto words = input.words();
    if (first.input_streamed) {
      stream_ = std::make_unique<WordMemory>("input stream", static_cast<std::int64_t>(words.size()));
    }
    WordMemory& staging = first.input_streamed ? *stream_ : bank(first.src_bank);
    for (std::size_t i = 0; i < words.size(); ++i) {
      staging.write(first.input_base + static_cast<std::int64_t>(i), words[i].bits);
    }

    SimResult result;
    for (std::size_t i = 0; i < cs_.layers.size(); ++i) {
      const Stats before = stats_;
      run_layer(static_cast<int>(i), cs_.layers[i]);
      result.layer_stats.push_back(difference(stats_, before));
      if (opt_.capture_layers) result.layer_outputs.push_back(read_output(cs_.layers[i]));
    }
    result.output = read_output(cs_.layers.back());
    result.stats = stats_;
    return result;
  }

 private:
  static constexpr int kEmpty = -2;
  static constexpr int kPadRow = -1;

  WordMemory& bank(Bank b) { return b == Bank::A ? bank_a_ : bank_b_; }

  static Stats difference(const Stats& a, const Stats& b) {
    Stats d;
    d.cycles = a.cycles - b.cycles;
    d.xnor_word_ops = a.xnor_word_ops - b.xnor_word_ops;
    d.src_reads = a.src_reads - b.src_reads;
    d.sink_reads = a.sink_reads - b.sink_reads;
    d.sink_writes = a.sink_writes - b.sink_writes;
    d.packed_writes = a.packed_writes - b.packed_writes;
    d.param_reads = a.param_reads - b.param_reads;
    d.rowbank_reads = a.rowbank_reads - b.rowbank_reads;
    d.rowbank_writes = a.rowbank_writes - b.rowbank_writes;
    d.csr_shifts = a.csr_shifts - b.csr_shifts;
    d.crossbar_rotations = a.crossbar_rotations - b.crossbar_rotations;
    return d;
  }

  void check_program(int index, const LayerProgram& p) {
    const auto& g = p.geometry;
    const auto& m = cs_.memory;
    if (g.k_h > m.bpus || g.k_h > m.row_banks || g.k_w > m.units_per_bpu || g.k_w > m.csr_width) {
      throw ConfigMismatch("layer " + std::to_string(index) + " kernel " + std::to_string(g.k_h) + "x" +
                           std::to_string(g.k_w) + " exceeds the processing array");
    }
    if (p.src_bank == p.sink_bank) throw ConfigMismatch("layer " + std::to_string(index) + " src == sink");
    const auto within = [&](std::int64_t base, std::int64_t len, std::int64_t cap, const char* what) {
      if (base < 0 || len < 0 || base + len > cap) {
        throw AddressFault("layer " + std::to_string(index) + " " + what + " region [" + std::to_string(base) +
                           ", " + std::to_string(base + len) + ") exceeds capacity " + std::to_string(cap));
      }
    };
    if (!p.input_streamed) within(p.input_base, p.input_words, bank(p.src_bank).size(), "input");
    within(p.psum_base, p.psum_words, bank(p.sink_bank).size(), "partial-sum");
    within(p.output_base, p.output_words, bank(p.sink_bank).size(), "output");
    within(p.weights_base, p.weights_words, params_.size(), "weight");
    within(p.thresholds_base, p.thresholds_words, params_.size(), "threshold");
  }

  bnn::BinaryFeatureMap read_output(const LayerProgram& p) {
    std::vector<bnn::BipolarWord> words(p.output_words);
    WordMemory& sink = bank(p.sink_bank);
    for (std::int64_t i = 0; i < p.output_words; ++i) words[i] = bnn::BipolarWord{sink.read(p.output_base + i)};
    return bnn::BinaryFeatureMap(p.out.height, p.out.width, p.out.channels, std::move(words));
  }

  void trace(const char* unit, const char* op, const std::string& where) {
    if (opt_.trace) *opt_.trace << stats_.cycles << ' ' << unit << ' ' << op << ' ' << where << '\n';
  }

  static std::string addr(const char* space, std::int64_t a) { return std::string(space) + ":" + std::to_string(a); }

  // Streams padded input row `row` of tile `t` into its row bank.
  void load_row(const LayerProgram& p, int t, int row) {
    const int bank_idx = row % cs_.memory.row_banks;
    const int iy = row - p.geometry.pad_y;
    if (iy < 0 || iy >= p.in.height) {
      row_tags_[bank_idx] = kPadRow;
      return;
    }
    WordMemory& src = p.input_streamed ? *stream_ : bank(p.src_bank);
    const char* space = p.input_streamed ? "S" : compiler::bank_name(p.src_bank);
    auto& line = row_banks_[bank_idx];
    line.resize(p.in.width);
    const std::int64_t row_base = p.input_base + (std::int64_t{t} * p.in.height + iy) * p.in.width;
    if (opt_.trace) trace("fetch", "row", addr(space, row_base));
    for (int x = 0; x < p.in.width; ++x) {
      require_in_region(row_base + x, p.input_base, p.input_words, "input");
      line[x] = bnn::BipolarWord{src.read(row_base + x)};
      ++stats_.src_reads;
      ++stats_.rowbank_writes;
    }
    row_tags_[bank_idx] = row;
  }

  void shift_in(const LayerProgram& p, int t, int top_row, int col) {
    const auto& g = p.geometry;
    const int ix = col - g.pad_x;
    const auto pad = bnn::pad_word(g.pad_value, p.in.channels, t);
    for (int r = 0; r < g.k_h; ++r) {
      const int bank_idx = (r + rotation_) % cs_.memory.row_banks;
      if (row_tags_[bank_idx] != kPadRow && row_tags_[bank_idx] != top_row + r) {
        throw std::logic_error("crossbar routed BPU " + std::to_string(r) + " to a stale row bank");
      }
      const bool inside = row_tags_[bank_idx] != kPadRow && ix >= 0 && ix < p.in.width;
      auto& csr = act_csr_[r];
      std::shift_left(csr.begin(), csr.begin() + g.k_w, 1);
      csr[g.k_w - 1] = inside ? row_banks_[bank_idx][ix] : pad;
      ++stats_.rowbank_reads;
    }
    ++stats_.csr_shifts;
  }

  int window_sum(const bnn::ConvGeometry& g) {
    int sum = 0;
    for (int r = 0; r < g.k_h; ++r)
      for (int c = 0; c < g.k_w; ++c) sum += bnn::dot16(act_csr_[r][c], wt_csr_[r][c]);
    stats_.xnor_word_ops += std::int64_t{g.k_h} * g.k_w;
    return sum;
  }

  bnn::ThresholdSpec threshold_for(const LayerProgram& p, int o) {
    const std::int64_t base = p.thresholds_base + std::int64_t{compiler::kThresholdWordsPerChannel} * o;
    require_in_region(base + 1, p.thresholds_base, p.thresholds_words, "threshold");
    const std::uint16_t cfg = params_.read(base);
    bnn::ThresholdSpec spec;
    spec.mode = static_cast<bnn::ThresholdMode>(cfg & 0x3);
    spec.const_bit = static_cast<std::uint8_t>((cfg >> 2) & 1);
    spec.threshold = static_cast<std::int16_t>(params_.read(base + 1));
    return spec;
  }

  void run_layer(int index, const LayerProgram& p) {
    const auto& g = p.geometry;
    const int R = cs_.memory.row_banks;
    const int pool_size = p.pool.enabled ? p.pool.size : 1;
    const int pool_stride = p.pool.enabled ? p.pool.stride : 1;
    const int padded_rows = p.in.height + 2 * g.pad_y;
    WordMemory& sink = bank(p.sink_bank);
    const char* sink_name = compiler::bank_name(p.sink_bank);
    bool fault_pending = opt_.fault_layer && *opt_.fault_layer == index;

    std::vector<bnn::ThresholdSpec> thresholds;
    for (int o = 0; o < p.out.channels; ++o) thresholds.push_back(threshold_for(p, o));

    for (int grp = 0; grp < p.g_out; ++grp) {
      const int filters = std::min(bnn::kLanes, p.out.channels - grp * bnn::kLanes);
      for (int t = 0; t < p.t_in; ++t) {
        const bool last_tile = t == p.t_in - 1;
        std::fill(row_tags_.begin(), row_tags_.end(), kEmpty);
        rotation_ = 0;
        int next_row = 0;
        // Pooled output rows in flight, keyed by pooled row index.
        std::map<int, std::vector<std::uint16_t>> pending;

        for (int y = 0; y < p.conv_h; ++y) {
          if (y > 0) {
            for (int s = 0; s < g.stride_y; ++s) {
              rotation_ = (rotation_ + 1) % R;
              ++stats_.crossbar_rotations;
            }
            if (opt_.trace) trace("xbar", "rotate", std::to_string(rotation_));
          }
          const int top = y * g.stride_y;
          while (next_row <= top + g.k_h - 1) load_row(p, t, next_row++);

          for (int j = 0; j < filters; ++j) {
            const int o = grp * bnn::kLanes + j;
            for (int r = 0; r < g.k_h; ++r) {
              for (int c = 0; c < g.k_w; ++c) {
                const std::int64_t a =
                    p.weights_base + ((std::int64_t{o} * g.k_h + r) * g.k_w + c) * p.t_in + t;
                require_in_region(a, p.weights_base, p.weights_words, "weight");
                wt_csr_[r][c] = bnn::BipolarWord{params_.read(a)};
              }
              ++stats_.param_reads;
            }
            if (opt_.bpu0_rowbanks) opt_.bpu0_rowbanks->push_back(rotation_ % R);

            // Pipeline fill, then one result per cycle.
            for (int c = 0; c < g.k_w; ++c) shift_in(p, t, top, c);
            stats_.cycles += g.k_w - 1;
            int col = g.k_w;
            for (int x = 0; x < p.conv_w; ++x) {
              if (x > 0) {
                for (int s = 0; s < g.stride_x; ++s) shift_in(p, t, top, col++);
              }
              const int sum = window_sum(g);
              ++stats_.cycles;

              const std::int64_t a = p.psum_base + (std::int64_t{j} * p.conv_h + y) * p.conv_w + x;
              require_in_region(a, p.psum_base, p.psum_words, "partial-sum");
              int value = sum;
              if (t > 0) {
                value += static_cast<std::int16_t>(sink.read(a));
                ++stats_.sink_reads;
                if (opt_.trace) trace("dma", "rmw", addr(sink_name, a));
              } else {
                if (opt_.trace) trace("dma", "wr", addr(sink_name, a));
              }
              if (!last_tile) {
                sink.write(a, static_cast<std::uint16_t>(static_cast<std::int16_t>(value)));
                ++stats_.sink_writes;
                continue;
              }
              const auto& spec = thresholds[o];
              if (fault_pending && spec.mode != bnn::ThresholdMode::CONST && !spec.apply(value)) {
                value = spec.threshold;
                fault_pending = false;
              }
              sink.write(a, static_cast<std::uint16_t>(static_cast<std::int16_t>(value)));
              ++stats_.sink_writes;
              if (!spec.apply(value)) continue;
              // OR the bit into every pooled window that covers (y, x).
              for (int py = std::max(0, (y - pool_size + pool_stride) / pool_stride);
                   py < p.out.height && py * pool_stride <= y; ++py) {
                if (y >= py * pool_stride + pool_size) continue;
                auto& words = pending.try_emplace(py, p.out.width, std::uint16_t{0}).first->second;
                for (int px = 0; px < p.out.width && px * pool_stride <= x; ++px) {
                  if (x < px * pool_stride + pool_size) words[px] |= static_cast<std::uint16_t>(1u << j);
                }
              }
            }
          }

          if (last_tile) {
            // Flush pooled rows whose window ends on this conv row.
            const int py = y - pool_size + 1;
            if (py >= 0 && py % pool_stride == 0 && py / pool_stride < p.out.height) {
              const int prow = py / pool_stride;
              auto it = pending.find(prow);
              const std::vector<std::uint16_t> zeros(p.out.width, 0);
              const auto& words = it == pending.end() ? zeros : it->second;
              for (int px = 0; px < p.out.width; ++px) {
                const std::int64_t a =
                    p.output_base + (std::int64_t{grp} * p.out.height + prow) * p.out.width + px;
                require_in_region(a, p.output_base, p.output_words, "output");
                sink.write(a, words[px]);
                ++stats_.packed_writes;
                if (opt_.trace) trace("dma", "pack", addr(sink_name, a));
              }
              if (it != pending.end()) pending.erase(it);
            }
          }
        }
        // Rows below the last window are still streamed through the row banks.
        while (next_row < padded_rows) load_row(p, t, next_row++);
      }
    }
  }

  const ControlStream& cs_;
  const SimOptions& opt_;
  WordMemory bank_a_;
  WordMemory bank_b_;
  WordMemory params_;
  std::unique_ptr<WordMemory> stream_;
  std::vector<std::vector<bnn::BipolarWord>> row_banks_;
  std::vector<int> row_tags_;
  int rotation_ = 0;
  std::vector<std::vector<bnn::BipolarWord>> act_csr_;
  std::vector<std::vector<bnn::BipolarWord>> wt_csr_;
  Stats stats_;
};

}  // namespace

SimResult simulate(const ControlStream& cs, const bnn::BinaryFeatureMap& input, const SimOptions& options) {
  Machine machine(cs, options);
  return machine.run(input);
}

// ---------------------------------------------------------------------------
// Closed-form accounting

namespace {

void check_array(const model::ModelDescriptor& model, const MemoryConfig& cfg) {
  for (const auto& l : model.layers) {
    const auto& g = l.geometry;
    if (g.k_h > cfg.bpus || g.k_h > cfg.row_banks || g.k_w > cfg.units_per_bpu || g.k_w > cfg.csr_width) {
      throw ConfigMismatch("kernel exceeds the processing array");
    }
  }
}

}  // namespace

ClosedForm stats_closed_form(const model::ModelDescriptor& model, const MemoryConfig& cfg) {
  model::require_valid(model);
  check_array(model, cfg);
  ClosedForm out;
  const auto dims = model::layer_dims(model);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& g = model.layers[i].geometry;
    const auto& d = dims[i];
    const std::int64_t c_out = d.out.channels;
    const std::int64_t T = bnn::tiles_for(d.in.channels);
    const std::int64_t G = bnn::tiles_for(d.out.channels);
    const std::int64_t oh = d.conv_h;
    const std::int64_t ow = d.conv_w;
    Stats s;
    s.cycles = c_out * T * oh * (ow + g.k_w - 1);
    s.xnor_word_ops = c_out * T * oh * ow * g.k_h * g.k_w;
    s.src_reads = G * T * d.in.height * d.in.width;
    s.rowbank_writes = s.src_reads;
    s.sink_writes = c_out * T * oh * ow;
    s.sink_reads = c_out * (T - 1) * oh * ow;
    s.packed_writes = G * d.out.height * d.out.width;
    s.param_reads = c_out * T * oh * g.k_h;
    s.csr_shifts = c_out * T * oh * (g.k_w + (ow - 1) * g.stride_x);
    s.rowbank_reads = g.k_h * s.csr_shifts;
    s.crossbar_rotations = G * T * (oh - 1) * g.stride_y;
    out.per_layer.push_back(s);
    out.total += s;
  }
  return out;
}

CycleReport analytic_cycles(const model::ModelDescriptor& model, const MemoryConfig& cfg) {
  model::require_valid(model);
  check_array(model, cfg);
  CycleReport out;
  const auto dims = model::layer_dims(model);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& d = dims[i];
    const std::int64_t cycles = std::int64_t{d.out.channels} * bnn::tiles_for(d.in.channels) * d.conv_h *
                                (d.conv_w + model.layers[i].geometry.k_w - 1);
    out.per_layer.push_back(cycles);
    out.total += cycles;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stats JSON

std::string stats_to_json(const Stats& total, const std::vector<Stats>& per_layer) {
  const auto obj = [](const Stats& s) {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : stats_fields(s)) j[k] = v;
    return j;
  };
  nlohmann::ordered_json doc;
  doc["total"] = obj(total);
  doc["layers"] = nlohmann::ordered_json::array();
  for (const auto& s : per_layer) doc["layers"].push_back(obj(s));
  return doc.dump(1) + "\n";
}

Stats stats_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!doc.is_object() || !doc.contains("total") || !doc["total"].is_object()) {
    throw SchemaError("stats document needs a \"total\" object");
  }
  const auto& t = doc["total"];
  Stats s;
  const auto get = [&](const char* key, std::int64_t& field) {
    if (!t.contains(key) || !t[key].is_number_integer()) {
      throw SchemaError(std::string("stats.total.") + key + " missing or not an integer");
    }
    field = t[key].get<std::int64_t>();
  };
  get("cycles", s.cycles);
  get("xnor_word_ops", s.xnor_word_ops);
  get("src_reads", s.src_reads);
  get("sink_reads", s.sink_reads);
  get("sink_writes", s.sink_writes);
  get("packed_writes", s.packed_writes);
  get("param_reads", s.param_reads);
  get("rowbank_reads", s.rowbank_reads);
  get("rowbank_writes", s.rowbank_writes);
  get("csr_shifts", s.csr_shifts);
  get("crossbar_rotations", s.crossbar_rotations);
  return s;
}

}  // namespace xnorbin::sim
