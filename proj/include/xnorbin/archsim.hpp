#pragma once

// Transaction-level model of the accelerator datapath: row banks behind a
// rotating crossbar, a cluster of BPUs with activation and weight shift
// registers, and the DMA unit that accumulates partial sums in the sink bank,
// re-binarizes, pools and packs.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "xnorbin/bnn_core.hpp"
#include "xnorbin/compiler.hpp"
#include "xnorbin/model_format.hpp"

namespace xnorbin::sim {

struct Stats {
  std::int64_t cycles = 0;
  std::int64_t xnor_word_ops = 0;
  std::int64_t src_reads = 0;
  std::int64_t sink_reads = 0;
  std::int64_t sink_writes = 0;
  std::int64_t packed_writes = 0;
  std::int64_t param_reads = 0;
  std::int64_t rowbank_reads = 0;
  std::int64_t rowbank_writes = 0;
  std::int64_t csr_shifts = 0;
  std::int64_t crossbar_rotations = 0;

  Stats& operator+=(const Stats& o);
  friend bool operator==(const Stats&, const Stats&) = default;
};

/// Field name/value pairs in a fixed order, shared by the JSON writer and
/// the energy model.
std::vector<std::pair<std::string, std::int64_t>> stats_fields(const Stats& s);

struct SimOptions {
  // Line-per-transaction debug trace: "<cycle> <unit> <op> <address>".
  std::ostream* trace = nullptr;
  // Row bank index BPU 0 reads, recorded once per (filter, tile, output row).
  std::vector<int>* bpu0_rowbanks = nullptr;
  // Test hook: in this layer, raise the first final-tile partial sum that
  // re-binarizes to 0 just enough to flip it to 1.
  std::optional<int> fault_layer;
  bool capture_layers = false;
};

struct SimResult {
  bnn::BinaryFeatureMap output;
  Stats stats;
  std::vector<Stats> layer_stats;
  std::vector<bnn::BinaryFeatureMap> layer_outputs;  // filled when capture_layers is set
};

SimResult simulate(const compiler::ControlStream& cs, const bnn::BinaryFeatureMap& input,
                   const SimOptions& options = {});

struct CycleReport {
  std::vector<std::int64_t> per_layer;
  std::int64_t total = 0;
};

CycleReport analytic_cycles(const model::ModelDescriptor& model, const compiler::MemoryConfig& cfg = {});

struct ClosedForm {
  std::vector<Stats> per_layer;
  Stats total;
};

ClosedForm stats_closed_form(const model::ModelDescriptor& model, const compiler::MemoryConfig& cfg = {});

std::string stats_to_json(const Stats& total, const std::vector<Stats>& per_layer = {});
/// Reads the "total" block of a stats document.
Stats stats_from_json(const std::string& text);

}  // namespace xnorbin::sim
