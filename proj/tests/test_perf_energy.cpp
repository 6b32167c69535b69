#include "doctest.h"

#include <cmath>

#include "xnorbin/archsim.hpp"
#include "xnorbin/error.hpp"
#include "xnorbin/perf_energy.hpp"
#include "xnorbin/util.hpp"
#include "xnorbin/workloads.hpp"

using namespace xnorbin;
using namespace xnorbin::energy;

namespace {

sim::Stats alexnet_stats() { return sim::stats_closed_form(model::alexnet_shaped_model()).total; }

EnergyCoefficients uniform(double fj) {
  EnergyCoefficients c = prior_coefficients();
  for (auto& [event, coeff] : c.events) coeff.femtojoules = fj;
  return c;
}

EnergyCoefficients shipped() { return load_coefficients(std::string(XNORBIN_DATA_DIR) + "/default_coeffs.json"); }

}  // namespace

TEST_CASE("zero coefficients give zero energy and defined throughput") {
  const auto r = estimate(alexnet_stats(), uniform(0), 100e6);
  CHECK(r.total_joules == 0);
  CHECK_FALSE(r.percentages_defined);
  CHECK(r.efficiency_ops_per_watt == 0);
  for (double p : r.component_percent) CHECK(p == 0);
  CHECK(r.throughput_ops > 0);
  CHECK(report_to_text(r).find("zero") != std::string::npos);
}

TEST_CASE("energy is linear in the event counts") {
  const auto s = sim::stats_closed_form(model::gen_random_model(3, 3)).total;
  sim::Stats twice = s;
  twice += s;
  const auto c = prior_coefficients();
  const auto a = estimate(s, c, 1e8);
  const auto b = estimate(twice, c, 1e8);
  CHECK(b.total_joules == doctest::Approx(2 * a.total_joules).epsilon(1e-12));
  CHECK(b.ops == 2 * a.ops);

  // Sum of single-event contributions.
  double sum = 0;
  for (const auto& [event, count] : event_counts(s)) sum += count * c.events.at(event).femtojoules * 1e-15;
  CHECK(a.total_joules == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("scaling all coefficients keeps the breakdown") {
  const auto s = alexnet_stats();
  auto scaled = prior_coefficients();
  for (auto& [event, coeff] : scaled.events) coeff.femtojoules *= 3.7;
  const auto a = estimate(s, prior_coefficients(), 1e8);
  const auto b = estimate(s, scaled, 1e8);
  for (std::size_t c = 0; c < kComponents; ++c)
    CHECK(b.component_percent[c] == doctest::Approx(a.component_percent[c]).epsilon(1e-12));
  double total = 0;
  for (double p : a.component_percent) total += p;
  CHECK(total == doctest::Approx(100.0));
}

TEST_CASE("efficiency does not depend on the clock") {
  const auto s = alexnet_stats();
  const auto a = estimate(s, shipped(), 50e6);
  const auto b = estimate(s, shipped(), 475.8e6);
  CHECK(a.efficiency_ops_per_watt == doctest::Approx(b.efficiency_ops_per_watt).epsilon(1e-12));
  CHECK(b.throughput_ops == doctest::Approx(a.throughput_ops * 475.8 / 50).epsilon(1e-12));
  CHECK(a.ops == 32 * s.xnor_word_ops);
  CHECK_THROWS_AS(estimate(s, shipped(), 0), ConfigMismatch);
}

TEST_CASE("peak throughput") {
  const compiler::MemoryConfig cfg;
  CHECK(peak_throughput(cfg, 7, 7, 1.0) == 1568);
  CHECK(peak_throughput(cfg, 1, 1, 1.0) == 32);
  CHECK(std::abs(peak_throughput(cfg, 7, 7, 475.8e6) - 746e9) < 0.5e9);
  CHECK_THROWS_AS(peak_throughput(cfg, 8, 7, 1.0), ConfigMismatch);
}

TEST_CASE("shipped coefficients reproduce the reference breakdown within 10 points") {
  const auto r = estimate(alexnet_stats(), shipped(), 100e6);
  const auto target = reference_breakdown();
  for (std::size_t c = 0; c < kComponents; ++c) {
    CHECK(std::abs(r.component_percent[c] - target.percent[c]) <= 10.0);
  }
  CHECK(shipped().label.find("calibrated fixture") != std::string::npos);
}

TEST_CASE("calibration regenerates the shipped fixture") {
  const auto fitted = calibrate(alexnet_stats(), prior_coefficients(), reference_breakdown());
  const auto file = shipped();
  for (const char* event : kEventClasses) {
    CHECK(fitted.events.at(event).femtojoules == doctest::Approx(file.events.at(event).femtojoules).epsilon(1e-12));
    CHECK(fitted.events.at(event).component == file.events.at(event).component);
  }
  // BPU coefficients stay at their priors.
  CHECK(fitted.events.at("xnor_word_op").femtojoules == prior_coefficients().events.at("xnor_word_op").femtojoules);
}

TEST_CASE("coefficient file errors") {
  auto text = coefficients_to_json(prior_coefficients());
  CHECK(coefficients_from_json(text).events.size() == kEventClasses.size());
  auto missing = prior_coefficients();
  missing.events.erase("csr_shift");
  try {
    coefficients_from_json(coefficients_to_json(missing));
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("csr_shift") != std::string::npos);
  }
  try {
    estimate(alexnet_stats(), missing, 1e8);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("csr_shift") != std::string::npos);
  }
  CHECK_THROWS_AS(coefficients_from_json("{\"warp_drive\": {\"fJ\": 1, \"component\": \"other\"}}"), SchemaError);
  CHECK_THROWS_AS(coefficients_from_json("{"), ParseError);
}
