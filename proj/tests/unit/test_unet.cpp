// Copyright 2026 The rm3d Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rm3d/core/error.hpp"
#include "rm3d/core/rm3d_format.hpp"
#include "rm3d/core/rng.hpp"
#include "rm3d/diffusion/sampler.hpp"
#include "rm3d/diffusion/schedule.hpp"
#include "rm3d/diffusion/unet.hpp"
#include "temp_dir.hpp"

using namespace rm3d;
using namespace rm3d::diffusion;

namespace {

const std::filesystem::path kData = RM3D_TEST_DATA_DIR;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Tensor<double> random_tensor(Shape shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.values()) v = rng.normal();
  return t;
}

std::string error_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

constexpr const char* kSmall = R"(denoiser v1
latent_channels 2
condition_channels 1
time_embedding 4
conv3d in 3 4 3
film f 4
save s
down
resblock rb 4 4 3
up
concat s
conv3d out 8 2 1
)";

}  // namespace

TEST_CASE("trainer parity vector is reproduced") {
  const auto net = load_denoiser(kData / "parity_denoiser.txt", kData / "parity_weights.rm3d");
  const ParityVector parity = load_parity(kData / "parity.rm3d");
  CHECK(parity.expected.shape() == parity.x_t.shape());
  CHECK(parity_error(*net, parity) <= 1e-4);
}

TEST_CASE("identity 1x1x1 convolution returns its input") {
  DenoiserSpec spec = parse_descriptor("denoiser v1\nlatent_channels 1\ncondition_channels 0\nconv3d id 1 1 1\n");
  const ConvDenoiser net(spec, {Tensor<double>({1, 1, 1, 1, 1}, 1.0), Tensor<double>({1}, 0.0)});
  Rng rng(3);
  const Tensor<double> x = random_tensor({1, 3, 5, 2}, rng);
  CHECK(net.forward(x, 10.0, Tensor<double>({0, 3, 5, 2})) == x);
}

TEST_CASE("3x3x3 delta kernel shifts with zero padding") {
  const DenoiserSpec spec =
      parse_descriptor("denoiser v1\nlatent_channels 1\ncondition_channels 0\nconv3d s 1 1 3\n");
  Tensor<double> w({1, 1, 3, 3, 3}, 0.0);
  w(0, 0, 2, 1, 0) = 1.0;  // out(i, j, k) = in(i + 1, j, k - 1)
  const ConvDenoiser net(spec, {w, Tensor<double>({1}, 0.5)});
  Rng rng(4);
  const Tensor<double> x = random_tensor({1, 4, 3, 3}, rng);
  const Tensor<double> y = net.forward(x, 1.0, Tensor<double>({0, 4, 3, 3}));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) {
        const double src = (i + 1 < 4 && k >= 1) ? x(0, i + 1, j, k - 1) : 0.0;
        CHECK(y(0, i, j, k) == doctest::Approx(src + 0.5).epsilon(1e-15));
      }
}

TEST_CASE("descriptor round-trips through text") {
  for (const std::string text : {read_file(kData / "parity_denoiser.txt"), std::string(kSmall)}) {
    const DenoiserSpec spec = parse_descriptor(text);
    CHECK(parse_descriptor(to_text(spec)) == spec);
    CHECK(to_text(parse_descriptor(to_text(spec))) == to_text(spec));
  }
  const DenoiserSpec with_comments =
      parse_descriptor("# header\ndenoiser v1\n\nlatent_channels 1  # C\ncondition_channels 0\nact relu\n");
  CHECK(with_comments.layers.size() == 1);
  CHECK(with_comments.layers[0].act == Activation::Relu);
}

TEST_CASE("output shape equals noisy input shape") {
  const DenoiserSpec spec = parse_descriptor(kSmall);
  const ConvDenoiser net(spec, random_parameters(spec, 11));
  Rng rng(5);
  for (const Shape grid : {Shape{2, 2, 1}, Shape{4, 6, 3}, Shape{8, 4, 2}}) {
    const Tensor<double> x = random_tensor({2, grid[0], grid[1], grid[2]}, rng);
    const Tensor<double> c = random_tensor({1, grid[0], grid[1], grid[2]}, rng);
    const Tensor<double> y = net.forward(x, 500.0, c);
    CHECK(y.shape() == x.shape());
    for (double v : y.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("forward depends on time and condition") {
  const DenoiserSpec spec = parse_descriptor(kSmall);
  const ConvDenoiser net(spec, random_parameters(spec, 12));
  Rng rng(6);
  const Tensor<double> x = random_tensor({2, 4, 4, 2}, rng);
  const Tensor<double> c = random_tensor({1, 4, 4, 2}, rng);
  const Tensor<double> c2 = random_tensor({1, 4, 4, 2}, rng);
  CHECK_FALSE(net.forward(x, 10.0, c) == net.forward(x, 900.0, c));
  CHECK_FALSE(net.forward(x, 10.0, c) == net.forward(x, 10.0, c2));
  CHECK(net.forward(x, 10.0, c) == net.forward(x, 10.0, c));
}

TEST_CASE("predict_noise feeds the integer timestep") {
  const DenoiserSpec spec = parse_descriptor(kSmall);
  const ConvDenoiser net(spec, random_parameters(spec, 13));
  const NoiseSchedule sched = linear_schedule(100);
  Rng rng(7);
  const Tensor<double> x = random_tensor({2, 2, 2, 1}, rng);
  const Tensor<double> c = random_tensor({1, 2, 2, 1}, rng);
  CHECK(net.predict_noise(x, 37, c, sched) == net.forward(x, 37.0, c));
  CHECK_THROWS_AS(net.predict_noise(x, 0, c, sched), ValidationError);
  CHECK_THROWS_AS(net.predict_noise(x, 101, c, sched), ValidationError);
}

TEST_CASE("sampling with a convolutional denoiser keeps the latent shape") {
  const DenoiserSpec spec = parse_descriptor(kSmall);
  const ConvDenoiser net(spec, random_parameters(spec, 14, 0.2));
  const NoiseSchedule sched = linear_schedule(50);
  Rng rng(8);
  const Tensor<double> c = random_tensor({1, 4, 4, 2}, rng);
  SamplerConfig cfg;
  cfg.steps = 5;
  const GenerationReport r = generate(net, c, sched, cfg, nullptr, 1);
  CHECK(r.sample.shape() == Shape{2, 4, 4, 2});
  CHECK(r.step_ms.size() == 5);
  CHECK(r.peak_working_elements >= net.workspace_elements(32));
}

TEST_CASE("timestep embedding layout") {
  const std::vector<double> e = timestep_embedding(2.0, 6);
  REQUIRE(e.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    const double f = std::pow(10000.0, -static_cast<double>(i) / 3.0);
    CHECK(e[i] == doctest::Approx(std::sin(2.0 * f)).epsilon(1e-14));
    CHECK(e[3 + i] == doctest::Approx(std::cos(2.0 * f)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(timestep_embedding(1.0, 5), ValidationError);
}

TEST_CASE("parse errors name the line") {
  CHECK(error_of([] { parse_descriptor("denoiser v2\n"); }).find("line 1") != std::string::npos);
  CHECK(error_of([] { parse_descriptor("denoiser v1\nlatent_channels 1\ncondition_channels 0\nconv9 a 1 1 1\n"); })
            .find("line 4") != std::string::npos);
  CHECK(error_of([] { parse_descriptor("denoiser v1\nlatent_channels x\n"); }).find("line 2") != std::string::npos);
  CHECK(error_of([] { parse_descriptor("denoiser v1\nlatent_channels 1\ncondition_channels 0\nact tanh\n"); })
            .find("tanh") != std::string::npos);
  CHECK_THROWS_AS(parse_descriptor(""), ParseError);
  CHECK_THROWS_AS(parse_descriptor("denoiser v1\nlatent_channels 1\n"), ParseError);
}

TEST_CASE("structural errors name the layer") {
  const std::string head = "denoiser v1\nlatent_channels 1\ncondition_channels 1\n";
  CHECK(error_of([&] { parse_descriptor(head + "conv3d a 3 1 1\n"); }).find("'a'") != std::string::npos);
  CHECK(error_of([&] { parse_descriptor(head + "conv3d a 2 1 2\n"); }).find("odd") != std::string::npos);
  CHECK(error_of([&] { parse_descriptor(head + "conv3d a 2 1 1\nup\n"); }).find("layer 1") != std::string::npos);
  CHECK(error_of([&] { parse_descriptor(head + "conv3d a 2 1 1\nconcat nope\n"); }).find("unknown slot") !=
        std::string::npos);
  CHECK(error_of([&] { parse_descriptor(head + "save s\ndown\nconcat s\nup\n"); }).find("resolution") !=
        std::string::npos);
  CHECK(error_of([&] { parse_descriptor(head + "conv3d a 2 3 1\n"); }).find("3 channels") != std::string::npos);
  CHECK(error_of([] {
          parse_descriptor("denoiser v1\nlatent_channels 1\ncondition_channels 0\nfilm f 1\n");
        }).find("condition") != std::string::npos);
  CHECK_THROWS_AS(parse_descriptor(head + "time_embedding 3\nconv3d a 2 1 1\n"), ValidationError);
}

TEST_CASE("odd extents cannot be pooled") {
  const DenoiserSpec spec = parse_descriptor(kSmall);
  const ConvDenoiser net(spec, random_parameters(spec, 15));
  CHECK_THROWS_AS(net.forward(Tensor<double>({2, 3, 4, 1}), 1.0, Tensor<double>({1, 3, 4, 1})), ValidationError);
  CHECK_THROWS_AS(net.forward(Tensor<double>({1, 4, 4, 1}), 1.0, Tensor<double>({1, 4, 4, 1})), ValidationError);
  CHECK_THROWS_AS(net.forward(Tensor<double>({2, 4, 4, 1}), 1.0, Tensor<double>({1, 4, 2, 1})), ValidationError);
}

TEST_CASE("weight archive mismatches name the layer") {
  testing::TempDir dir("unet");
  const auto spec_file = dir / "net.txt";
  std::ofstream(spec_file) << read_file(kData / "parity_denoiser.txt");
  std::vector<AnyTensor> records = load_records(kData / "parity_weights.rm3d");
  const DenoiserSpec spec = parse_descriptor(read_file(spec_file));
  const std::vector<ParamSpec> params = parameter_list(spec);
  REQUIRE(records.size() == params.size());

  std::size_t target = 0;
  while (params[target].name != "rb2.conv1.weight") ++target;

  auto wrong_dim = records;
  wrong_dim[target] = Tensor<float>({6, 4, 3, 3, 2});
  save_records(dir / "bad.rm3d", wrong_dim);
  const std::string msg = error_of([&] { load_denoiser(spec_file, dir / "bad.rm3d"); });
  CHECK(msg.find("'rb2'") != std::string::npos);
  CHECK(msg.find("rb2.conv1.weight") != std::string::npos);

  auto truncated = records;
  truncated.pop_back();
  save_records(dir / "short.rm3d", truncated);
  CHECK(error_of([&] { load_denoiser(spec_file, dir / "short.rm3d"); }).find("'head'") != std::string::npos);

  auto extra = records;
  extra.push_back(Tensor<float>({1}));
  save_records(dir / "long.rm3d", extra);
  CHECK_THROWS_AS(load_denoiser(spec_file, dir / "long.rm3d"), ValidationError);

  auto ints = records;
  ints[0] = Tensor<std::int32_t>(record_shape(records[0]));
  save_records(dir / "ints.rm3d", ints);
  CHECK_THROWS_AS(load_denoiser(spec_file, dir / "ints.rm3d"), ParseError);
}
