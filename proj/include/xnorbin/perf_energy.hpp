#pragma once

// Throughput and energy accounting over simulator event counts.
//
// Op convention: one multiply-accumulate is 2 Op, so every xnor_word_op
// (16 lanes) is 32 Op.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "xnorbin/archsim.hpp"
#include "xnorbin/compiler.hpp"

namespace xnorbin::energy {

enum class Component : std::uint8_t { Memory = 0, DmaCrossbar = 1, Bpu = 2, Other = 3 };
inline constexpr std::size_t kComponents = 4;

const char* component_name(Component c);
Component component_from_name(const std::string& name);

/// Event classes, in file order. "cycle_overhead" is charged per cycle.
inline constexpr std::array<const char*, 11> kEventClasses = {
    "src_read",      "sink_read",  "sink_write",   "packed_write",      "param_read",    "rowbank_read",
    "rowbank_write", "csr_shift",  "xnor_word_op", "crossbar_rotation", "cycle_overhead"};

struct Coefficient {
  double femtojoules = 0;
  Component component = Component::Other;
};

struct EnergyCoefficients {
  std::map<std::string, Coefficient> events;
  std::string label;
};

/// Event counts keyed like the coefficient table.
std::map<std::string, std::int64_t> event_counts(const sim::Stats& stats);

struct EnergyReport {
  double total_joules = 0;
  std::array<double, kComponents> component_joules{};
  std::array<double, kComponents> component_percent{};
  bool percentages_defined = false;  // false when total energy is zero
  std::int64_t ops = 0;
  std::int64_t cycles = 0;
  double frequency_hz = 0;
  double runtime_seconds = 0;
  double throughput_ops = 0;  // Op/s
  double power_watts = 0;
  double efficiency_ops_per_watt = 0;  // Op/s/W; 0 when power is zero
};

EnergyReport estimate(const sim::Stats& stats, const EnergyCoefficients& coeffs, double frequency_hz);

/// Peak rate of the array for a k_h x k_w kernel: 2 * k_h * k_w * 16 Op per cycle.
double peak_throughput(const compiler::MemoryConfig& cfg, int k_h, int k_w, double frequency_hz);

EnergyCoefficients coefficients_from_json(const std::string& text);
std::string coefficients_to_json(const EnergyCoefficients& coeffs);
EnergyCoefficients load_coefficients(const std::filesystem::path& file);

std::string report_to_json(const EnergyReport& report);
std::string report_to_text(const EnergyReport& report);

/// Uncalibrated per-event priors; relative magnitudes within a component are
/// kept by calibrate().
EnergyCoefficients prior_coefficients();

struct BreakdownTarget {
  std::array<double, kComponents> percent{};
};

/// Published breakdown used for the shipped fixture: memory 69, DMA and
/// crossbar 14.6, BPUs 13, remainder 3.4.
BreakdownTarget reference_breakdown();

/// Rescales each component's coefficients so the workload's energy split
/// matches the target shares. BPU coefficients keep their prior values.
EnergyCoefficients calibrate(const sim::Stats& workload, const EnergyCoefficients& prior,
                             const BreakdownTarget& target);

}  // namespace xnorbin::energy
