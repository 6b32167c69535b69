// Regenerates the default energy coefficient fixture by fitting the prior
// per-event coefficients to the published component breakdown on the
// AlexNet-shaped workload.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "xnorbin/archsim.hpp"
#include "xnorbin/perf_energy.hpp"
#include "xnorbin/util.hpp"
#include "xnorbin/workloads.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Fit default energy coefficients"};
  std::string out = "data/default_coeffs.json";
  app.add_option("--out", out, "Coefficient file to write")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  using namespace xnorbin;
  const auto workload = sim::stats_closed_form(model::alexnet_shaped_model()).total;
  const auto coeffs = energy::calibrate(workload, energy::prior_coefficients(), energy::reference_breakdown());
  util::write_file_atomic(out, energy::coefficients_to_json(coeffs));
  std::cout << energy::report_to_text(energy::estimate(workload, coeffs, 1e8));
  return 0;
}
