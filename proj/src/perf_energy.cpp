#include "xnorbin/perf_energy.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "xnorbin/error.hpp"
#include "xnorbin/util.hpp"

namespace xnorbin::energy {

using nlohmann::ordered_json;

const char* component_name(Component c) {
  switch (c) {
    case Component::Memory: return "memory";
    case Component::DmaCrossbar: return "dma_crossbar";
    case Component::Bpu: return "bpu";
    case Component::Other: return "other";
  }
  return "?";
}

Component component_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kComponents; ++i) {
    const auto c = static_cast<Component>(i);
    if (name == component_name(c)) return c;
  }
  throw SchemaError("unknown component '" + name + "'");
}

std::map<std::string, std::int64_t> event_counts(const sim::Stats& s) {
  return {{"src_read", s.src_reads},
          {"sink_read", s.sink_reads},
          {"sink_write", s.sink_writes},
          {"packed_write", s.packed_writes},
          {"param_read", s.param_reads},
          {"rowbank_read", s.rowbank_reads},
          {"rowbank_write", s.rowbank_writes},
          {"csr_shift", s.csr_shifts},
          {"xnor_word_op", s.xnor_word_ops},
          {"crossbar_rotation", s.crossbar_rotations},
          {"cycle_overhead", s.cycles}};
}

EnergyReport estimate(const sim::Stats& stats, const EnergyCoefficients& coeffs, double frequency_hz) {
  if (!(frequency_hz > 0)) throw ConfigMismatch("frequency must be positive");
  EnergyReport r;
  for (const auto& [event, count] : event_counts(stats)) {
    const auto it = coeffs.events.find(event);
    if (it == coeffs.events.end()) throw SchemaError("missing coefficient for event class '" + event + "'");
    const double joules = static_cast<double>(count) * it->second.femtojoules * 1e-15;
    r.component_joules[static_cast<std::size_t>(it->second.component)] += joules;
    r.total_joules += joules;
  }
  r.percentages_defined = r.total_joules > 0;
  if (r.percentages_defined) {
    for (std::size_t c = 0; c < kComponents; ++c) r.component_percent[c] = 100.0 * r.component_joules[c] / r.total_joules;
  }
  r.ops = 2 * bnn::kLanes * stats.xnor_word_ops;
  r.cycles = stats.cycles;
  r.frequency_hz = frequency_hz;
  if (r.cycles > 0) {
    r.runtime_seconds = static_cast<double>(r.cycles) / frequency_hz;
    r.throughput_ops = static_cast<double>(r.ops) / r.runtime_seconds;
    r.power_watts = r.total_joules / r.runtime_seconds;
  }
  if (r.power_watts > 0) r.efficiency_ops_per_watt = r.throughput_ops / r.power_watts;
  return r;
}

double peak_throughput(const compiler::MemoryConfig& cfg, int k_h, int k_w, double frequency_hz) {
  if (k_h < 1 || k_w < 1 || k_h > cfg.bpus || k_h > cfg.row_banks || k_w > cfg.units_per_bpu ||
      k_w > cfg.csr_width) {
    throw ConfigMismatch("kernel " + std::to_string(k_h) + "x" + std::to_string(k_w) + " outside the array");
  }
  return 2.0 * k_h * k_w * bnn::kLanes * frequency_hz;
}

EnergyCoefficients coefficients_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!doc.is_object()) throw SchemaError("coefficient file must be a JSON object");
  EnergyCoefficients out;
  for (const auto& [key, value] : doc.items()) {
    if (!key.empty() && key.front() == '_') {
      if (key == "_label" && value.is_string()) out.label = value.get<std::string>();
      continue;
    }
    if (std::find(kEventClasses.begin(), kEventClasses.end(), key) == kEventClasses.end()) {
      throw SchemaError("unknown event class '" + key + "'");
    }
    if (!value.is_object() || !value.contains("fJ") || !value["fJ"].is_number() || !value.contains("component") ||
        !value["component"].is_string()) {
      throw SchemaError("event class '" + key + "' needs {\"fJ\": number, \"component\": name}");
    }
    const double fj = value["fJ"].get<double>();
    if (fj < 0) throw SchemaError("event class '" + key + "' has a negative coefficient");
    out.events[key] = Coefficient{fj, component_from_name(value["component"].get<std::string>())};
  }
  for (const char* event : kEventClasses) {
    if (!out.events.count(event)) throw SchemaError(std::string("missing coefficient for event class '") + event + "'");
  }
  return out;
}

std::string coefficients_to_json(const EnergyCoefficients& coeffs) {
  ordered_json doc;
  if (!coeffs.label.empty()) doc["_label"] = coeffs.label;
  for (const char* event : kEventClasses) {
    const auto it = coeffs.events.find(event);
    if (it == coeffs.events.end()) continue;
    doc[event] = {{"fJ", it->second.femtojoules}, {"component", component_name(it->second.component)}};
  }
  return doc.dump(1) + "\n";
}

EnergyCoefficients load_coefficients(const std::filesystem::path& file) {
  return coefficients_from_json(util::read_file(file));
}

std::string report_to_json(const EnergyReport& r) {
  ordered_json doc;
  doc["total_joules"] = r.total_joules;
  ordered_json comps;
  for (std::size_t c = 0; c < kComponents; ++c) {
    comps[component_name(static_cast<Component>(c))] = {{"joules", r.component_joules[c]},
                                                        {"percent", r.component_percent[c]}};
  }
  doc["components"] = std::move(comps);
  doc["percentages_defined"] = r.percentages_defined;
  doc["ops"] = r.ops;
  doc["cycles"] = r.cycles;
  doc["frequency_hz"] = r.frequency_hz;
  doc["runtime_seconds"] = r.runtime_seconds;
  doc["throughput_ops_per_s"] = r.throughput_ops;
  doc["power_watts"] = r.power_watts;
  doc["efficiency_ops_per_s_per_watt"] = r.efficiency_ops_per_watt;
  return doc.dump(1) + "\n";
}

std::string report_to_text(const EnergyReport& r) {
  std::ostringstream ss;
  char line[160];
  std::snprintf(line, sizeof line, "ops          %lld (%lld cycles @ %.3f MHz)\n", static_cast<long long>(r.ops),
                static_cast<long long>(r.cycles), r.frequency_hz / 1e6);
  ss << line;
  std::snprintf(line, sizeof line, "throughput   %.4g GOp/s\n", r.throughput_ops / 1e9);
  ss << line;
  std::snprintf(line, sizeof line, "energy       %.4g uJ\n", r.total_joules * 1e6);
  ss << line;
  std::snprintf(line, sizeof line, "power        %.4g mW\n", r.power_watts * 1e3);
  ss << line;
  std::snprintf(line, sizeof line, "efficiency   %.4g TOp/s/W\n", r.efficiency_ops_per_watt / 1e12);
  ss << line;
  for (std::size_t c = 0; c < kComponents; ++c) {
    std::snprintf(line, sizeof line, "  %-13s %6.2f %%\n", component_name(static_cast<Component>(c)),
                  r.component_percent[c]);
    ss << line;
  }
  if (!r.percentages_defined) ss << "  (total energy is zero; percentages reported as 0)\n";
  return ss.str();
}

EnergyCoefficients prior_coefficients() {
  EnergyCoefficients c;
  c.label = "uncalibrated priors";
  const auto set = [&](const char* e, double fj, Component comp) { c.events[e] = Coefficient{fj, comp}; };
  set("src_read", 900, Component::Memory);
  set("sink_read", 1200, Component::Memory);
  set("sink_write", 1300, Component::Memory);
  set("packed_write", 1300, Component::Memory);
  set("param_read", 2500, Component::Memory);
  set("rowbank_write", 150, Component::Memory);
  set("rowbank_read", 60, Component::DmaCrossbar);
  set("crossbar_rotation", 400, Component::DmaCrossbar);
  set("xnor_word_op", 45, Component::Bpu);
  set("csr_shift", 30, Component::Bpu);
  set("cycle_overhead", 100, Component::Other);
  return c;
}

BreakdownTarget reference_breakdown() {
  BreakdownTarget t;
  t.percent = {69.0, 14.6, 13.0, 100.0 - 69.0 - 14.6 - 13.0};
  return t;
}

EnergyCoefficients calibrate(const sim::Stats& workload, const EnergyCoefficients& prior,
                             const BreakdownTarget& target) {
  // With per-component scale factors a_c the shares are a_c*E_c / sum(a*E),
  // so matching them exactly is the least-squares optimum.
  const EnergyReport base = estimate(workload, prior, 1.0);
  const auto bpu = static_cast<std::size_t>(Component::Bpu);
  if (base.component_joules[bpu] <= 0 || target.percent[bpu] <= 0) {
    throw ConfigMismatch("calibration needs nonzero BPU energy and target");
  }
  std::array<double, kComponents> scale{};
  for (std::size_t c = 0; c < kComponents; ++c) {
    if (base.component_joules[c] <= 0) {
      if (target.percent[c] > 0) throw ConfigMismatch("component with zero prior energy cannot be calibrated");
      continue;
    }
    scale[c] = (target.percent[c] / target.percent[bpu]) * (base.component_joules[bpu] / base.component_joules[c]);
  }
  EnergyCoefficients out = prior;
  out.label = "calibrated fixture: fitted to the published component breakdown, not a prediction";
  for (auto& [event, coeff] : out.events) coeff.femtojoules *= scale[static_cast<std::size_t>(coeff.component)];
  return out;
}

}  // namespace xnorbin::energy
