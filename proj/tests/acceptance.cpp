// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Expected values come from test-side oracles, not the library.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xnorbin/activation_file.hpp"
#include "xnorbin/archsim.hpp"
#include "xnorbin/compiler.hpp"
#include "xnorbin/error.hpp"
#include "xnorbin/forward.hpp"
#include "xnorbin/model_format.hpp"
#include "xnorbin/perf_energy.hpp"
#include "xnorbin/util.hpp"
#include "xnorbin/workloads.hpp"

namespace fs = std::filesystem;
using namespace xnorbin;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

model::ModelDescriptor seeded_model(std::uint64_t seed) {
  return model::gen_random_model(seed, 1 + static_cast<int>(seed % 4));
}

int decoded_dot(bnn::BipolarWord a, bnn::BipolarWord b) {
  int s = 0;
  for (int i = 0; i < 16; ++i) s += (((a.bits >> i) & 1) ? 1 : -1) * (((b.bits >> i) & 1) ? 1 : -1);
  return s;
}

Outcome oracle_equivalence() {
  Outcome o;
  int layers = 0, pooled = 0, ge = 0, le = 0, cst = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto m = seeded_model(seed);
    for (const auto& l : m.layers) {
      ++layers;
      pooled += l.pool.enabled;
      for (const auto& t : l.thresholds) {
        ge += t.mode == bnn::ThresholdMode::GE;
        le += t.mode == bnn::ThresholdMode::LE;
        cst += t.mode == bnn::ThresholdMode::CONST;
      }
    }
    const auto in = model::gen_random_input(seed, m.input_shape);
    const auto sim = sim::simulate(compiler::compile(m), in);
    const auto ref = bnn::forward_ref(m, in);
    if (io::encode_activation(sim.output) != io::encode_activation(ref)) o.fail("seed " + std::to_string(seed));
  }
  if (pooled == 0 || pooled == layers || ge == 0 || le == 0 || cst == 0) o.fail("generator did not mix features");
  if (o.pass) {
    o.detail = "100 models, " + std::to_string(layers) + " layers, " + std::to_string(pooled) + " pooled";
  }
  return o;
}

Outcome dot16_exhaustive() {
  Outcome o;
  util::Rng rng(2);
  for (unsigned p = 0; p <= 0xFFFF; ++p) {
    const bnn::BipolarWord a{static_cast<std::uint16_t>(rng.next())};
    const bnn::BipolarWord b{static_cast<std::uint16_t>(a.bits ^ p)};
    if (bnn::dot16(a, b) != decoded_dot(a, b)) o.fail("xor pattern " + std::to_string(p));
  }
  for (int i = 0; i < 100000; ++i) {
    const bnn::BipolarWord a{static_cast<std::uint16_t>(rng.next())};
    const bnn::BipolarWord b{static_cast<std::uint16_t>(rng.next())};
    if (bnn::dot16(a, b) != decoded_dot(a, b)) o.fail("random pair " + std::to_string(i));
  }
  if (o.pass) o.detail = "65536 patterns + 100000 pairs";
  return o;
}

Outcome threshold_fold() {
  Outcome o;
  util::Rng rng(3);
  int zero_gamma = 0, negative = 0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.unit();
    double gamma = (rng.unit() - 0.5) * 10;
    if (u < 0.05) gamma = 0;
    if (u >= 0.05 && u < 0.10) gamma = std::ldexp(1.0, static_cast<int>(rng.uniform(-20, 4)));
    const double beta = (rng.unit() - 0.5) * (u < 0.5 ? 20 : 2000);
    const double mu = (rng.unit() - 0.5) * 12000;
    // Include integral values so ties land exactly on sweep points.
    const double sigma = u > 0.9 ? static_cast<double>(rng.uniform(1, 8)) : 1e-3 + rng.unit() * 100;
    zero_gamma += gamma == 0;
    negative += gamma < 0;
    const auto spec = bnn::fold_bn_threshold(gamma, beta, mu, sigma);
    for (int s = -5000; s <= 5000; ++s) {
      if (spec.apply(s) != (gamma * (s - mu) / sigma + beta >= 0.0)) {
        o.fail("set " + std::to_string(i) + " at s=" + std::to_string(s));
        break;
      }
    }
  }
  if (o.pass) {
    o.detail = "10000 sets x 10001 sums (" + std::to_string(zero_gamma) + " gamma=0, " + std::to_string(negative) +
               " gamma<0)";
  }
  return o;
}

// Counts written out from the loop nest, independent of the library.
sim::Stats loop_nest_stats(const model::ModelDescriptor& m) {
  sim::Stats total;
  model::Shape cur = m.input_shape;
  for (const auto& l : m.layers) {
    const auto& g = l.geometry;
    const std::int64_t T = (l.c_in + 15) / 16, G = (l.c_out + 15) / 16, co = l.c_out;
    const std::int64_t oh = (cur.height + 2 * g.pad_y - g.k_h) / g.stride_y + 1;
    const std::int64_t ow = (cur.width + 2 * g.pad_x - g.k_w) / g.stride_x + 1;
    const std::int64_t ph = l.pool.enabled ? (oh - l.pool.size) / l.pool.stride + 1 : oh;
    const std::int64_t pw = l.pool.enabled ? (ow - l.pool.size) / l.pool.stride + 1 : ow;
    sim::Stats s;
    s.cycles = co * T * oh * (ow + g.k_w - 1);
    s.xnor_word_ops = co * T * oh * ow * g.k_h * g.k_w;
    s.src_reads = s.rowbank_writes = G * T * cur.height * cur.width;
    s.sink_writes = co * T * oh * ow;
    s.sink_reads = co * (T - 1) * oh * ow;
    s.packed_writes = G * ph * pw;
    s.param_reads = co * T * oh * g.k_h;
    s.csr_shifts = co * T * oh * (g.k_w + (ow - 1) * g.stride_x);
    s.rowbank_reads = g.k_h * s.csr_shifts;
    s.crossbar_rotations = G * T * (oh - 1) * g.stride_y;
    total += s;
    cur = {static_cast<int>(ph), static_cast<int>(pw), l.c_out};
  }
  return total;
}

Outcome stats_conformance() {
  Outcome o;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto m = seeded_model(seed);
    const auto r = sim::simulate(compiler::compile(m), model::gen_random_input(seed, m.input_shape));
    const auto cf = sim::stats_closed_form(m);
    const auto cyc = sim::analytic_cycles(m);
    if (!(r.stats == cf.total)) o.fail("closed form differs, seed " + std::to_string(seed));
    if (r.stats.cycles != cyc.total) o.fail("analytic cycles differ, seed " + std::to_string(seed));
    if (!(r.stats == loop_nest_stats(m))) o.fail("loop-nest count differs, seed " + std::to_string(seed));
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (!(r.layer_stats[i] == cf.per_layer[i]) || r.layer_stats[i].cycles != cyc.per_layer[i]) {
        o.fail("layer " + std::to_string(i) + ", seed " + std::to_string(seed));
      }
    }
  }
  if (o.pass) o.detail = "100 models, 11 counters per layer";
  return o;
}

Outcome peak_rate() {
  Outcome o;
  model::ModelDescriptor m;
  m.name = "peak";
  m.input_shape = {7, 1024, 16};
  model::LayerDescriptor l;
  l.c_in = 16;
  l.c_out = 1;
  l.geometry = bnn::ConvGeometry{7, 7, 1, 1, 0, 0, -1};
  l.weights = bnn::WeightSet{1, 7, 7, 16, std::vector<bnn::BipolarWord>(49, bnn::BipolarWord{0x1234})};
  l.thresholds = {bnn::ThresholdSpec{}};
  m.layers.push_back(l);
  const auto r = sim::simulate(compiler::compile(m), model::gen_random_input(5, m.input_shape));
  const std::int64_t ops = 32 * r.stats.xnor_word_ops;
  const std::int64_t cycles = r.stats.cycles;
  if (r.output.width() != 1018) o.fail("output width " + std::to_string(r.output.width()));
  // ops / cycles == 1568 * 1018 / 1024, cross-multiplied.
  if (ops * 1024 != std::int64_t{1568} * 1018 * cycles) {
    o.fail("ops=" + std::to_string(ops) + " cycles=" + std::to_string(cycles));
  }
  const auto report = energy::estimate(r.stats, energy::prior_coefficients(), 1.0);
  if (report.ops != ops || report.cycles != cycles) o.fail("energy report disagrees with stats");
  if (o.pass) o.detail = std::to_string(ops) + " Op / " + std::to_string(cycles) + " cycles";
  return o;
}

Outcome capacity_rule() {
  Outcome o;
  try {
    compiler::compile(model::alexnet_shaped_model());
  } catch (const Error& e) {
    o.fail(std::string("pooled table rejected: ") + e.what());
  }
  try {
    compiler::compile(model::alexnet_shaped_model(1, false));
    o.fail("nopool table accepted");
  } catch (const compiler::FeatureMapOverflow& e) {
    // conv2 sink: 16*16*27*27 + 15*27*27*16 = 361584 bits against 262144.
    if (std::string(e.what()).find("361584") == std::string::npos) o.fail(std::string("unexpected: ") + e.what());
  } catch (const Error& e) {
    o.fail(std::string("wrong error: ") + e.what());
  }
  if (o.pass) o.detail = "pooled compiles; nopool FeatureMapOverflow at conv2 (361584 > 262144 bits)";
  return o;
}

Outcome energy_model() {
  Outcome o;
  util::Rng rng(8);
  const auto alex = sim::stats_closed_form(model::alexnet_shaped_model()).total;
  for (int i = 0; i < 200; ++i) {
    auto coeffs = energy::prior_coefficients();
    for (auto& [event, c] : coeffs.events) {
      c.femtojoules = rng.unit() * 5000;
      c.component = static_cast<energy::Component>(rng.uniform(0, 3));
    }
    const auto s = sim::stats_closed_form(seeded_model(static_cast<std::uint64_t>(i) + 1)).total;
    sim::Stats s3 = s;
    s3 += s;
    s3 += s;
    const auto a = energy::estimate(s, coeffs, 1e8);
    const auto b = energy::estimate(s3, coeffs, 1e8);
    if (std::abs(b.total_joules - 3 * a.total_joules) > 1e-12 * b.total_joules) o.fail("linearity, set " + std::to_string(i));
    double manual = 0;
    for (const auto& [event, count] : energy::event_counts(s)) manual += count * coeffs.events.at(event).femtojoules;
    if (std::abs(a.total_joules - manual * 1e-15) > 1e-12 * a.total_joules) o.fail("sum of events, set " + std::to_string(i));

    auto scaled = coeffs;
    const double k = 0.01 + rng.unit() * 100;
    for (auto& [event, c] : scaled.events) c.femtojoules *= k;
    const auto p = energy::estimate(alex, coeffs, 1e8);
    const auto q = energy::estimate(alex, scaled, 1e8);
    for (std::size_t c = 0; c < energy::kComponents; ++c) {
      if (std::abs(p.component_percent[c] - q.component_percent[c]) > 1e-9) o.fail("scale invariance, set " + std::to_string(i));
    }
  }
  const auto shipped = energy::load_coefficients(std::string(XNORBIN_DATA_DIR) + "/default_coeffs.json");
  if (shipped.label.find("calibrated fixture") == std::string::npos) o.fail("fixture not labeled as calibration");
  const auto r = energy::estimate(alex, shipped, 1e8);
  const double target[] = {69.0, 14.6, 13.0};
  char buf[128];
  std::snprintf(buf, sizeof buf, "breakdown %.2f/%.2f/%.2f/%.2f", r.component_percent[0], r.component_percent[1],
                r.component_percent[2], r.component_percent[3]);
  for (int c = 0; c < 3; ++c) {
    if (std::abs(r.component_percent[c] - target[c]) > 10.0) o.fail(buf);
  }
  if (o.pass) o.detail = std::string("200 random sets; ") + buf;
  return o;
}

Outcome round_trips() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("xnorbin_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto m = seeded_model(seed);
    model::save_model(m, dir / "m.json");
    if (!(model::load_model(dir / "m.json") == m)) o.fail("XBM1 seed " + std::to_string(seed));
    const auto cs = compiler::compile(m);
    compiler::emit_control_stream(cs, dir / "cs.json");
    if (!(compiler::load_control_stream(dir / "cs.json") == cs)) o.fail("XCS1 seed " + std::to_string(seed));
    const auto in = model::gen_random_input(seed, m.input_shape);
    io::save_activation(in, dir / "a.xbf");
    if (!(io::load_activation(dir / "a.xbf") == in)) o.fail("XBF1 seed " + std::to_string(seed));
  }
  fs::remove_all(dir);
  if (o.pass) o.detail = "50 fixtures per format";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"oracle-equivalence", oracle_equivalence}, {"dot16-exhaustive", dot16_exhaustive},
      {"threshold-fold", threshold_fold},         {"stats-conformance", stats_conformance},
      {"peak-op-rate", peak_rate},                {"capacity-rule", capacity_rule},
      {"energy-model", energy_model},             {"format-round-trips", round_trips},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %-20s %6.2fs  %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    failures += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
