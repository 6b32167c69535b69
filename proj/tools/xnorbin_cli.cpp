// xnorbin: compile, simulate and cross-check binary CNN models.
//
// Exit codes: 0 ok, 1 usage or I/O, 2 validation or compile failure,
// 3 simulator/oracle mismatch.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "xnorbin/activation_file.hpp"
#include "xnorbin/archsim.hpp"
#include "xnorbin/compiler.hpp"
#include "xnorbin/error.hpp"
#include "xnorbin/forward.hpp"
#include "xnorbin/model_format.hpp"
#include "xnorbin/perf_energy.hpp"
#include "xnorbin/util.hpp"

namespace {

using namespace xnorbin;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitCompile = 2;
constexpr int kExitMismatch = 3;

struct MemoryFlags {
  double bank_a_kbit = 128;
  double bank_b_kbit = 256;
  std::optional<double> param_kbit;
  bool allow_streaming_input = false;
  bool stream_params = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--bank-a-kbit", bank_a_kbit, "Bank A capacity in kbit")->capture_default_str();
    cmd->add_option("--bank-b-kbit", bank_b_kbit, "Bank B capacity in kbit")->capture_default_str();
    cmd->add_option("--param-kbit", param_kbit, "Parameter buffer capacity in kbit");
    cmd->add_flag("--allow-streaming-input", allow_streaming_input,
                  "Exempt layer 0's input from the source-bank capacity check");
    cmd->add_flag("--stream-params", stream_params, "Parameters stream from external flash");
  }

  compiler::MemoryConfig config() const {
    compiler::MemoryConfig cfg;
    cfg.bank_a_bits = static_cast<std::int64_t>(bank_a_kbit * 1024);
    cfg.bank_b_bits = static_cast<std::int64_t>(bank_b_kbit * 1024);
    if (param_kbit) cfg.param_buffer_bits = static_cast<std::int64_t>(*param_kbit * 1024);
    return cfg;
  }
  compiler::CompileOptions options() const { return {stream_params, allow_streaming_input}; }
};

int exit_code_for(const Error& e) {
  const auto& k = e.kind();
  if (k == "IoError" || k == "ParseError" || k == "SchemaError" || k == "ShapeError" || k == "InvalidBipolar") {
    return kExitIo;
  }
  return kExitCompile;
}

struct LayerDiff {
  int layer = -1;
  std::size_t words_differing = 0;
  std::size_t words_total = 0;
};

std::vector<LayerDiff> diff_layers(const std::vector<bnn::BinaryFeatureMap>& ref,
                                   const std::vector<bnn::BinaryFeatureMap>& sim) {
  std::vector<LayerDiff> out;
  for (std::size_t i = 0; i < ref.size() && i < sim.size(); ++i) {
    LayerDiff d{static_cast<int>(i), 0, ref[i].words().size()};
    if (ref[i].words().size() != sim[i].words().size()) {
      d.words_differing = d.words_total;
    } else {
      for (std::size_t w = 0; w < d.words_total; ++w) d.words_differing += ref[i].words()[w] != sim[i].words()[w];
    }
    out.push_back(d);
  }
  return out;
}

// Runs oracle and simulator on one pair; prints a per-layer summary on
// divergence and returns whether they agreed byte for byte.
bool compare_once(const model::ModelDescriptor& m, const bnn::BinaryFeatureMap& input,
                  const compiler::MemoryConfig& cfg, const compiler::CompileOptions& copt,
                  std::optional<int> fault_layer, const std::string& tag) {
  const auto ref = bnn::forward_ref_layers(m, input);
  const auto cs = compiler::compile(m, cfg, copt);
  sim::SimOptions sopt;
  sopt.capture_layers = true;
  sopt.fault_layer = fault_layer;
  const auto res = sim::simulate(cs, input, sopt);
  if (io::encode_activation(res.output) == io::encode_activation(ref.back())) return true;

  std::cout << tag << ": MISMATCH\n";
  const auto diffs = diff_layers(ref, res.layer_outputs);
  int first = -1;
  for (const auto& d : diffs) {
    std::cout << "  layer " << d.layer << ": " << d.words_differing << "/" << d.words_total << " words differ\n";
    if (first < 0 && d.words_differing > 0) first = d.layer;
  }
  std::cout << "  first divergence at layer " << first << "\n";
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"XNORBIN accelerator model: compiler, simulator, reference oracle and energy model"};
  app.require_subcommand(1);

  // compile
  auto* compile_cmd = app.add_subcommand("compile", "Lower a model to an XCS1 control stream");
  std::string model_path, out_path;
  MemoryFlags mem;
  compile_cmd->add_option("--model", model_path, "XBM1 model file")->required();
  compile_cmd->add_option("--out", out_path, "Control stream output")->required();
  mem.attach(compile_cmd);

  // run
  auto* run_cmd = app.add_subcommand("run", "Simulate a model on the accelerator");
  std::string input_path, output_path, stats_path, trace_path;
  run_cmd->add_option("--model", model_path, "XBM1 model file")->required();
  run_cmd->add_option("--input", input_path, "XBF1 input activation")->required();
  run_cmd->add_option("--output", output_path, "XBF1 output activation")->required();
  run_cmd->add_option("--stats", stats_path, "Write event counters as JSON");
  run_cmd->add_option("--trace", trace_path, "Write a transaction trace");
  mem.attach(run_cmd);

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "Run the reference forward pass");
  oracle_cmd->add_option("--model", model_path, "XBM1 model file")->required();
  oracle_cmd->add_option("--input", input_path, "XBF1 input activation")->required();
  oracle_cmd->add_option("--output", output_path, "XBF1 output activation")->required();

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Check simulator output against the oracle");
  std::optional<std::uint64_t> seed;
  int runs = 1;
  std::optional<int> depth;
  std::optional<int> fault_layer;
  compare_cmd->add_option("--model", model_path, "XBM1 model file");
  compare_cmd->add_option("--input", input_path, "XBF1 input activation");
  compare_cmd->add_option("--seed", seed, "Generate random models starting at this seed");
  compare_cmd->add_option("--runs", runs, "Number of runs (seeds, or repeats of a fixed pair)")->capture_default_str();
  compare_cmd->add_option("--depth", depth, "Layers per generated model (default 1 + seed % 4)");
  compare_cmd->add_option("--inject-fault", fault_layer, "Corrupt one partial sum in this layer (testing)")
      ->group("");
  mem.attach(compare_cmd);

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random model and matching input");
  std::uint64_t gen_seed = 0;
  int gen_depth = 1;
  std::string out_model, out_input;
  model::RandomModelBounds bounds;
  gen_cmd->add_option("--seed", gen_seed, "Random seed")->required();
  gen_cmd->add_option("--depth", gen_depth, "Number of layers")->required();
  gen_cmd->add_option("--out-model", out_model, "XBM1 output")->required();
  gen_cmd->add_option("--out-input", out_input, "XBF1 output")->required();
  gen_cmd->add_option("--max-h", bounds.max_height)->capture_default_str();
  gen_cmd->add_option("--max-w", bounds.max_width)->capture_default_str();
  gen_cmd->add_option("--max-c", bounds.max_channels)->capture_default_str();

  // energy
  auto* energy_cmd = app.add_subcommand("energy", "Turn event counters into an energy report");
  std::string coeffs_path, report_path;
  double freq_mhz = 0;
  bool text = false;
  energy_cmd->add_option("--stats", stats_path, "Stats JSON from `run --stats`")->required();
  energy_cmd->add_option("--coeffs", coeffs_path, "Per-event energy coefficients")->required();
  energy_cmd->add_option("--freq-mhz", freq_mhz, "Clock frequency in MHz")->required();
  energy_cmd->add_option("--report", report_path, "Report JSON output")->required();
  energy_cmd->add_flag("--text", text, "Also print a human-readable summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitIo;
  }

  try {
    if (*compile_cmd) {
      const auto m = model::load_model(model_path);
      const auto cs = compiler::compile(m, mem.config(), mem.options());
      compiler::emit_control_stream(cs, out_path);
      std::cout << "compiled " << cs.layers.size() << " layer(s); layer 0 reads bank "
                << compiler::bank_name(cs.layers.front().src_bank) << "\n";
      return kExitOk;
    }

    if (*run_cmd) {
      const auto m = model::load_model(model_path);
      const auto input = io::load_activation(input_path);
      const auto cs = compiler::compile(m, mem.config(), mem.options());
      std::ostringstream trace;
      sim::SimOptions sopt;
      if (!trace_path.empty()) sopt.trace = &trace;
      const auto res = sim::simulate(cs, input, sopt);
      io::save_activation(res.output, output_path);
      if (!stats_path.empty()) util::write_file_atomic(stats_path, sim::stats_to_json(res.stats, res.layer_stats));
      if (!trace_path.empty()) util::write_file_atomic(trace_path, trace.str());
      std::cout << "cycles " << res.stats.cycles << ", xnor word ops " << res.stats.xnor_word_ops << "\n";
      return kExitOk;
    }

    if (*oracle_cmd) {
      const auto m = model::load_model(model_path);
      const auto input = io::load_activation(input_path);
      io::save_activation(bnn::forward_ref(m, input), output_path);
      return kExitOk;
    }

    if (*compare_cmd) {
      if (runs < 1) throw ValidationError("--runs must be >= 1");
      const bool fixed = !model_path.empty() || !input_path.empty();
      if (fixed == seed.has_value() || (fixed && (model_path.empty() || input_path.empty()))) {
        std::cerr << "compare needs either --model and --input, or --seed\n";
        return kExitIo;
      }
      int failures = 0;
      if (fixed) {
        const auto m = model::load_model(model_path);
        const auto input = io::load_activation(input_path);
        std::optional<std::string> first_bytes;
        for (int r = 0; r < runs; ++r) {
          if (!compare_once(m, input, mem.config(), mem.options(), fault_layer, "run " + std::to_string(r))) {
            ++failures;
          }
          const auto bytes =
              io::encode_activation(sim::simulate(compiler::compile(m, mem.config(), mem.options()), input).output);
          if (first_bytes && *first_bytes != bytes) {
            std::cout << "run " << r << ": output differs from run 0 (nondeterminism)\n";
            ++failures;
          }
          first_bytes = bytes;
        }
      } else {
        for (int r = 0; r < runs; ++r) {
          const std::uint64_t s = *seed + static_cast<std::uint64_t>(r);
          const int d = depth.value_or(1 + static_cast<int>(s % 4));
          const auto m = model::gen_random_model(s, d, bounds);
          const auto input = model::gen_random_input(s, m.input_shape);
          if (!compare_once(m, input, mem.config(), mem.options(), fault_layer, "seed " + std::to_string(s))) {
            ++failures;
          }
        }
      }
      std::cout << (runs - failures) << "/" << runs << " runs matched\n";
      return failures == 0 ? kExitOk : kExitMismatch;
    }

    if (*gen_cmd) {
      const auto m = model::gen_random_model(gen_seed, gen_depth, bounds);
      model::save_model(m, out_model);
      io::save_activation(model::gen_random_input(gen_seed, m.input_shape), out_input);
      return kExitOk;
    }

    if (*energy_cmd) {
      const auto stats = sim::stats_from_json(util::read_file(stats_path));
      const auto coeffs = energy::load_coefficients(coeffs_path);
      const auto report = energy::estimate(stats, coeffs, freq_mhz * 1e6);
      util::write_file_atomic(report_path, energy::report_to_json(report));
      if (text) std::cout << energy::report_to_text(report);
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitCompile;
  }
  return kExitIo;
}
