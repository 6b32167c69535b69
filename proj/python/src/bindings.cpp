#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xnorbin/activation_file.hpp"
#include "xnorbin/archsim.hpp"
#include "xnorbin/bnn_core.hpp"
#include "xnorbin/compiler.hpp"
#include "xnorbin/error.hpp"
#include "xnorbin/forward.hpp"
#include "xnorbin/model_format.hpp"
#include "xnorbin/perf_energy.hpp"
#include "xnorbin/workloads.hpp"

namespace py = pybind11;
using namespace xnorbin;

namespace {

using Shape3 = std::tuple<int, int, int>;

model::Shape to_shape(const Shape3& s) { return {std::get<0>(s), std::get<1>(s), std::get<2>(s)}; }

const char* mode_name(bnn::ThresholdMode m) {
  switch (m) {
    case bnn::ThresholdMode::GE: return "GE";
    case bnn::ThresholdMode::LE: return "LE";
    case bnn::ThresholdMode::CONST: return "CONST";
  }
  return "?";
}

compiler::MemoryConfig memory(std::int64_t bank_a_kbit, std::int64_t bank_b_kbit) {
  compiler::MemoryConfig cfg;
  cfg.bank_a_bits = bank_a_kbit * 1024;
  cfg.bank_b_bits = bank_b_kbit * 1024;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_xnorbin, m) {
  m.doc() = "Binary CNN accelerator model: reference ops, compiler, simulator, energy";

  // Messages read "Kind: detail", e.g. "FeatureMapOverflow: layer 0: ...".
  py::register_exception<Error>(m, "XnorbinError");

  m.def("dot16", [](std::uint16_t a, std::uint16_t b) { return bnn::dot16({a}, {b}); });
  m.def("encode_bipolar", [](const std::vector<int>& v) { return bnn::encode_bipolar(v).bits; });
  m.def("decode_bipolar", [](std::uint16_t w) {
    const auto a = bnn::decode_bipolar({w});
    return std::vector<int>(a.begin(), a.end());
  });
  m.def(
      "fold_bn_threshold",
      [](double gamma, double beta, double mu, double sigma) {
        const auto t = bnn::fold_bn_threshold(gamma, beta, mu, sigma);
        return py::make_tuple(mode_name(t.mode), t.threshold, t.const_bit);
      },
      py::arg("gamma"), py::arg("beta"), py::arg("mu"), py::arg("sigma"));

  py::class_<bnn::BinaryFeatureMap>(m, "FeatureMap")
      .def_property_readonly("height", &bnn::BinaryFeatureMap::height)
      .def_property_readonly("width", &bnn::BinaryFeatureMap::width)
      .def_property_readonly("channels", &bnn::BinaryFeatureMap::channels)
      .def("bit", &bnn::BinaryFeatureMap::bit, py::arg("c"), py::arg("y"), py::arg("x"))
      .def("words",
           [](const bnn::BinaryFeatureMap& f) {
             std::vector<std::uint16_t> out;
             for (const auto w : f.words()) out.push_back(w.bits);
             return out;
           })
      .def("to_bytes", [](const bnn::BinaryFeatureMap& f) { return py::bytes(io::encode_activation(f)); })
      .def_static("from_bytes",
                  [](const py::bytes& b) {
                    const std::string s = b;
                    return io::decode_activation(std::vector<std::uint8_t>(s.begin(), s.end()));
                  })
      .def("__eq__", [](const bnn::BinaryFeatureMap& a, const bnn::BinaryFeatureMap& b) { return a == b; });

  py::class_<model::ModelDescriptor>(m, "Model")
      .def_readonly("name", &model::ModelDescriptor::name)
      .def_property_readonly("input_shape",
                             [](const model::ModelDescriptor& d) {
                               return Shape3{d.input_shape.height, d.input_shape.width, d.input_shape.channels};
                             })
      .def_property_readonly("num_layers", [](const model::ModelDescriptor& d) { return d.layers.size(); })
      .def("to_json", &model::model_to_json)
      .def_static("from_json", &model::model_from_json)
      .def("violations",
           [](const model::ModelDescriptor& d) {
             std::vector<std::string> out;
             for (const auto& v : model::validate_model(d)) out.push_back(v.to_string());
             return out;
           })
      .def("__eq__", [](const model::ModelDescriptor& a, const model::ModelDescriptor& b) { return a == b; });

  m.def("load_model", [](const std::string& p) { return model::load_model(p); });
  m.def("save_model", [](const model::ModelDescriptor& d, const std::string& p) { model::save_model(d, p); });
  m.def(
      "gen_random_model",
      [](std::uint64_t seed, int depth, int max_h, int max_w, int max_c) {
        return model::gen_random_model(seed, depth, {max_h, max_w, max_c});
      },
      py::arg("seed"), py::arg("depth"), py::arg("max_h") = 16, py::arg("max_w") = 16, py::arg("max_c") = 64);
  m.def("gen_random_input", [](std::uint64_t seed, const Shape3& s) { return model::gen_random_input(seed, to_shape(s)); });
  m.def("alexnet_shaped_model", &model::alexnet_shaped_model, py::arg("seed") = 1, py::arg("conv2_pool") = true);
  m.def("forward_ref", &bnn::forward_ref);

  py::class_<compiler::ControlStream>(m, "ControlStream")
      .def_property_readonly("num_layers", [](const compiler::ControlStream& c) { return c.layers.size(); })
      .def_property_readonly("src_banks",
                             [](const compiler::ControlStream& c) {
                               std::vector<std::string> out;
                               for (const auto& l : c.layers) out.emplace_back(compiler::bank_name(l.src_bank));
                               return out;
                             })
      .def("to_json", &compiler::control_stream_to_json)
      .def_static("from_json", &compiler::control_stream_from_json);

  m.def(
      "compile",
      [](const model::ModelDescriptor& d, std::int64_t bank_a_kbit, std::int64_t bank_b_kbit) {
        return compiler::compile(d, memory(bank_a_kbit, bank_b_kbit));
      },
      py::arg("model"), py::arg("bank_a_kbit") = 128, py::arg("bank_b_kbit") = 256);

  m.def("simulate", [](const compiler::ControlStream& cs, const bnn::BinaryFeatureMap& in) {
    const auto r = sim::simulate(cs, in);
    return py::make_tuple(r.output, sim::stats_to_json(r.stats, r.layer_stats));
  });
  m.def("stats_closed_form", [](const model::ModelDescriptor& d) {
    const auto cf = sim::stats_closed_form(d);
    return sim::stats_to_json(cf.total, cf.per_layer);
  });
  m.def("analytic_cycles", [](const model::ModelDescriptor& d) { return sim::analytic_cycles(d).total; });

  m.def(
      "estimate",
      [](const std::string& stats_json, const std::string& coeffs_json, double freq_hz) {
        return energy::report_to_json(energy::estimate(sim::stats_from_json(stats_json),
                                                       energy::coefficients_from_json(coeffs_json), freq_hz));
      },
      py::arg("stats_json"), py::arg("coeffs_json"), py::arg("frequency_hz"));
  m.def("peak_throughput", [](int kh, int kw, double freq_hz) {
    return energy::peak_throughput(compiler::MemoryConfig{}, kh, kw, freq_hz);
  });
}
