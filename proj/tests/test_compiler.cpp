#include "doctest.h"

#include <filesystem>

#include "xnorbin/compiler.hpp"
#include "xnorbin/error.hpp"
#include "xnorbin/util.hpp"
#include "xnorbin/workloads.hpp"

using namespace xnorbin;
using namespace xnorbin::compiler;

namespace {

model::LayerDescriptor make_layer(int c_in, int c_out, int k, int stride = 1, int pad = 0,
                                  bnn::PoolConfig pool = {}) {
  model::LayerDescriptor l;
  l.c_in = c_in;
  l.c_out = c_out;
  l.geometry = bnn::ConvGeometry{k, k, stride, stride, pad, pad, -1};
  l.pool = pool;
  l.weights = bnn::WeightSet{c_out, k, k, c_in, {}};
  l.weights.words.resize(l.weights.expected_words());
  l.thresholds.assign(static_cast<std::size_t>(c_out), bnn::ThresholdSpec{});
  return l;
}

model::ModelDescriptor single(model::Shape in, model::LayerDescriptor l) {
  model::ModelDescriptor m;
  m.name = "single";
  m.input_shape = in;
  m.layers.push_back(std::move(l));
  return m;
}

model::LayerDims dims_of(model::Shape in, int conv_h, int conv_w, model::Shape out) {
  return model::LayerDims{in, conv_h, conv_w, out};
}

}  // namespace

TEST_CASE("minimal model maps A to B") {
  const auto cs = compile(single({1, 1, 16}, make_layer(16, 16, 1)));
  REQUIRE(cs.layers.size() == 1);
  CHECK(cs.layers[0].src_bank == Bank::A);
  CHECK(cs.layers[0].sink_bank == Bank::B);
  CHECK(cs.layers[0].input_words == 1);
  CHECK(cs.layers[0].output_words == 1);
  CHECK(cs.param_image.size() == 16 + 16 * kThresholdWordsPerChannel);
}

TEST_CASE("capacity arithmetic") {
  // 27x27x96 -> 5x5 pad 2 -> 27x27x256, pool 3/2 -> 13x13.
  const auto d = dims_of({27, 27, 96}, 27, 27, {13, 13, 256});
  CHECK(input_bits(d) == 6 * 16 * 27 * 27);
  CHECK(sink_bits(d) == 16 * 16 * 27 * 27 + 15 * 13 * 13 * 16);
  CHECK(sink_bits(d) == 227184);
  MemoryConfig cfg;
  CHECK_FALSE(check_capacity({d, Bank::A, false}, cfg));

  // Without pooling the packed outputs of 15 groups are 27x27 each.
  const auto nopool = dims_of({27, 27, 96}, 27, 27, {27, 27, 256});
  CHECK(sink_bits(nopool) == 186624 + 15 * 729 * 16);
  const auto v = check_capacity({nopool, Bank::A, false}, cfg);
  REQUIRE(v);
  CHECK(v->term == "sink");
  CHECK(v->bank == Bank::B);
  CHECK(v->required_bits == 361584);
  CHECK(v->available_bits == 262144);

  // Boundary: exactly full passes, one bit short fails.
  MemoryConfig tight;
  tight.bank_a_bits = input_bits(d);
  tight.bank_b_bits = sink_bits(d);
  CHECK_FALSE(check_capacity({d, Bank::A, false}, tight));
  tight.bank_b_bits -= 1;
  CHECK(check_capacity({d, Bank::A, false}, tight));
  tight.bank_b_bits += 1;
  tight.bank_a_bits -= 1;
  const auto vi = check_capacity({d, Bank::A, false}, tight);
  REQUIRE(vi);
  CHECK(vi->term == "input");
  CHECK_FALSE(check_capacity({d, Bank::A, true}, tight));
}

TEST_CASE("oversized input is rejected with FeatureMapOverflow") {
  // 120*160*16 = 307200 bits, larger than either bank.
  const auto m = single({120, 160, 16}, make_layer(16, 16, 1));
  CHECK_THROWS_AS(compile(m), FeatureMapOverflow);
  try {
    compile(m);
  } catch (const FeatureMapOverflow& e) {
    CHECK(std::string(e.what()).find("307200") != std::string::npos);
  }
}

TEST_CASE("streaming input exempts the first layer's source") {
  // 7x7 stride 5 gives a 23x31 map, so only the input is oversized.
  const auto m = single({120, 160, 16}, make_layer(16, 16, 7, 5));
  CHECK_THROWS_AS(compile(m), FeatureMapOverflow);
  CompileOptions opt;
  opt.allow_streaming_input = true;
  const auto cs = compile(m, {}, opt);
  CHECK(cs.layers[0].input_streamed);
}

TEST_CASE("swapped phase when the input only fits bank B") {
  // 25 tiles x 22 x 22 = 193600 bits: too big for A, fits B.
  const auto m = single({22, 22, 400}, make_layer(400, 16, 7));
  const auto cs = compile(m);
  CHECK(cs.layers[0].src_bank == Bank::B);
  CHECK(cs.layers[0].sink_bank == Bank::A);
}

TEST_CASE("AlexNet-shaped table compiles; without conv2 pooling it does not") {
  const auto cs = compile(model::alexnet_shaped_model());
  CHECK(cs.layers.size() == 7);
  // The nopool variant also needs more parameters than the buffer holds;
  // feature-map capacity is reported first.
  CHECK_THROWS_AS(compile(model::alexnet_shaped_model(1, false)), FeatureMapOverflow);
  try {
    compile(model::alexnet_shaped_model(1, false));
  } catch (const FeatureMapOverflow& e) {
    CHECK(std::string(e.what()).find("361584") != std::string::npos);
  }
}

TEST_CASE("kernel and parameter limits") {
  auto big = make_layer(16, 16, 8);
  CHECK_THROWS_AS(compile(single({8, 8, 16}, big)), KernelTooLarge);
  MemoryConfig small;
  small.row_banks = 3;
  CHECK_THROWS_AS(compile(single({8, 8, 16}, make_layer(16, 16, 5)), small), KernelTooLarge);

  const auto m = single({4, 4, 16}, make_layer(16, 64, 3));
  MemoryConfig tiny;
  tiny.param_buffer_bits = 1024;
  CHECK_THROWS_AS(compile(m, tiny), ParamOverflow);
  CompileOptions stream;
  stream.stream_params = true;
  CHECK_NOTHROW(compile(m, tiny, stream));
}

TEST_CASE("invalid models are rejected before lowering") {
  auto l = make_layer(16, 16, 3);
  l.thresholds.pop_back();
  CHECK_THROWS_AS(compile(single({4, 4, 16}, l)), ValidationError);
}

TEST_CASE("layer programs chain, alternate and stay in bounds") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto m = model::gen_random_model(seed, 1 + static_cast<int>(seed % 5));
    const auto cs = compile(m);
    REQUIRE(cs.layers.size() == m.layers.size());
    std::int64_t param_end = 0;
    for (std::size_t i = 0; i < cs.layers.size(); ++i) {
      const auto& p = cs.layers[i];
      REQUIRE(p.sink_bank == other(p.src_bank));
      if (i + 1 < cs.layers.size()) {
        const auto& n = cs.layers[i + 1];
        REQUIRE(n.src_bank == p.sink_bank);
        REQUIRE(n.input_base == p.output_base);
        REQUIRE(n.input_words == p.output_words);
      }
      const std::int64_t sink_cap = bank_bits(cs.memory, p.sink_bank) / 16;
      const std::int64_t src_cap = bank_bits(cs.memory, p.src_bank) / 16;
      REQUIRE(p.input_base + p.input_words <= src_cap);
      REQUIRE(p.psum_base + p.psum_words <= sink_cap);
      REQUIRE(p.output_base + p.output_words <= sink_cap);
      REQUIRE(p.psum_words == 16LL * p.conv_h * p.conv_w);
      // Completed groups never overlap the partial-sum region.
      const std::int64_t group_words = static_cast<std::int64_t>(p.out.height) * p.out.width;
      REQUIRE(p.output_base + (p.g_out - 1) * group_words <= p.psum_base);
      REQUIRE(p.sink_words() * 16 == sink_bits(model::LayerDims{p.in, p.conv_h, p.conv_w, p.out}));
      // Parameter regions are contiguous and disjoint.
      REQUIRE(p.weights_base == param_end);
      REQUIRE(p.thresholds_base == p.weights_base + p.weights_words);
      REQUIRE(p.thresholds_words == kThresholdWordsPerChannel * static_cast<std::int64_t>(p.out.channels));
      param_end = p.thresholds_base + p.thresholds_words;
    }
    REQUIRE(param_end == static_cast<std::int64_t>(cs.param_image.size()));
  }
}

TEST_CASE("compilation is deterministic") {
  const auto m = model::gen_random_model(31, 4);
  CHECK(control_stream_to_json(compile(m)) == control_stream_to_json(compile(m)));
}

TEST_CASE("XCS1 round trip and errors") {
  const auto cs = compile(model::gen_random_model(12, 3));
  const auto text = control_stream_to_json(cs);
  CHECK(control_stream_from_json(text) == cs);
  const auto p = std::filesystem::temp_directory_path() / "xnorbin_test_cs.json";
  emit_control_stream(cs, p);
  CHECK(load_control_stream(p) == cs);
  std::filesystem::remove(p);

  CHECK_THROWS_AS(control_stream_from_json("{oops"), ParseError);
  auto bad = text;
  bad.replace(bad.find("XCS1"), 4, "XCS9");
  CHECK_THROWS_AS(control_stream_from_json(bad), SchemaError);
  CHECK_THROWS_AS(control_stream_from_json("{}"), SchemaError);
  CHECK_THROWS_AS(load_control_stream("/nonexistent/cs.json"), IoError);
}
