#include <cstring>
#include <fstream>

#include "doctest.h"
#include "support.hpp"
#include "vrsa/checkpoint.hpp"
#include "vrsa/errors.hpp"
#include "vrsa/synth.hpp"
#include "vrsa/trainkit.hpp"

using namespace vrsa;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.encoder.D = 8;
  cfg.encoder.conv_stages = 1;
  cfg.encoder.spatial_downsample = 2;
  cfg.store.M = 4;
  cfg.store.epochs = 2;
  cfg.predictor.E = 8;
  cfg.predictor.epochs = 2;
  return cfg;
}

std::vector<TrainingSample> samples(const EncoderConfig& enc, std::vector<double> omegas, double fps = 60) {
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    SynthParams p;
    p.seed = 100 + i;
    p.omega_deg_s = omegas[i];
    p.fps = fps;
    p.duration_s = 0.25;
    p.height = 16;
    p.width = 32;
    const auto s = generate_clip(p, synth_clip_id(static_cast<int>(i)));
    out.push_back(make_sample(s.clip, s.labels, enc));
  }
  return out;
}

ParamSet sample_params() {
  ParamSet p;
  p["a"] = Tensor{{2, 3}, {1.0, -0.0, 1e-300, std::numeric_limits<double>::denorm_min(), 3.14159, -7}};
  p["scalar"] = Tensor{{}, {42.0}};
  p["vec.x"] = Tensor{{4}, {0.1, 0.2, 0.3, std::numeric_limits<double>::infinity()}};
  return p;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("checkpoint round trip is bitwise") {
  testing::TempDir dir("ckpt");
  const auto params = sample_params();
  save_checkpoint(params, dir / "m.vrsk");
  const auto back = load_checkpoint(dir / "m.vrsk");
  REQUIRE(back.size() == params.size());
  for (const auto& [name, t] : params) {
    const auto& u = back.at(name);
    CHECK(u.dims == t.dims);
    REQUIRE(u.data.size() == t.data.size());
    CHECK(std::memcmp(u.data.data(), t.data.data(), t.data.size() * sizeof(double)) == 0);
  }
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(params));
  CHECK(read_bytes(dir / "m.vrsk") == serialize_checkpoint(params));
}

TEST_CASE("checkpoint layout") {
  ParamSet p;
  p["w"] = Tensor{{2}, {1.0, 2.0}};
  const auto bytes = serialize_checkpoint(p);
  // magic + version + count + name len + name + rank + dim + payload
  CHECK(bytes.size() == 4u + 4 + 4 + 2 + 1 + 1 + 4 + 16);
  CHECK(std::memcmp(bytes.data(), "VRSK", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 1);
  double first = 0;
  std::memcpy(&first, bytes.data() + 20, 8);
  CHECK(first == 1.0);
}

TEST_CASE("checkpoint errors") {
  auto bytes = serialize_checkpoint(sample_params());
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    try {
      parse_checkpoint(bytes);
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }
  }
  SUBCASE("version mismatch") {
    bytes[4] = 2;
    try {
      parse_checkpoint(bytes);
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("version mismatch") != std::string::npos);
    }
  }
  SUBCASE("truncated payload") {
    for (std::size_t cut : {bytes.size() - 1, bytes.size() - 9, std::size_t{10}, std::size_t{3}}) {
      std::vector<std::uint8_t> shorter(bytes.begin(), bytes.begin() + static_cast<long>(cut));
      CHECK_THROWS_AS(parse_checkpoint(shorter), CheckpointError);
    }
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK_THROWS_AS(parse_checkpoint(bytes), CheckpointError);
  }
}

TEST_CASE("digest") {
  const std::uint8_t empty[1] = {0};
  CHECK(fnv1a_hex(std::span<const std::uint8_t>(empty, 0)) == "cbf29ce484222325");
  const std::uint8_t a[1] = {'a'};
  CHECK(fnv1a_hex(a) == "af63dc4c8601ec8c");
  auto p = sample_params();
  const auto d = checkpoint_digest(p);
  p["a"].data[0] = 1.0000000000000002;
  CHECK(checkpoint_digest(p) != d);
}

TEST_CASE("run config") {
  const auto cfg = small_config();
  CHECK(parse_run_config(format_run_config(cfg)) == cfg);

  CHECK_THROWS_AS(parse_run_config(R"({"seed": 1, "learning_rate": 3})"), ParseError);
  CHECK_THROWS_AS(parse_run_config(R"({"store": {"M": 4, "slots": 3}})"), ParseError);
  CHECK_THROWS_AS(parse_run_config(R"({"predictor": {"lr": 0}})"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"store": {"epochs": 0}})"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[1,2"), ParseError);

  const auto defaults = parse_run_config(R"({"seed": 9})");
  CHECK(defaults.seed == 9);
  CHECK(defaults.comfortable_threshold == 0.1);
  CHECK(defaults.predictor.freeze_store);
  CHECK(defaults.encoder.D == 128);
  CHECK(defaults.store.M == 64);
  CHECK(defaults.predictor.E == 64);
  CHECK(defaults.encoder.seed != defaults.store.seed);
  CHECK(parse_run_config(R"({"seed": 9, "store": {"seed": 3}})").store.seed == 3);
}

TEST_CASE("run_pipeline") {
  const auto cfg = small_config();
  const auto data = samples(cfg.encoder, {0, 2, 4, 60, 120, 180});

  SUBCASE("bit-identical reruns") {
    const auto a = run_pipeline(data, cfg);
    const auto b = run_pipeline(data, cfg);
    CHECK(a.comfortable_count == 3);
    CHECK(a.store_loss.size() == 2);
    CHECK(a.predictor_loss.size() == 2);
    CHECK(serialize_checkpoint(model_to_params(a.model)) == serialize_checkpoint(model_to_params(b.model)));
  }
  SUBCASE("saved model reloads") {
    testing::TempDir dir("pipeline");
    const auto a = run_pipeline(data, cfg);
    save_model(a.model, dir / "m.vrsk");
    const auto back = load_model(dir / "m.vrsk");
    CHECK(model_to_params(back) == model_to_params(a.model));
    for (const auto& s : data) CHECK(assess(s.diffs, back) == assess(s.diffs, a.model));
  }
  SUBCASE("no comfortable clips") {
    auto strict = cfg;
    strict.comfortable_threshold = 0.0;
    try {
      run_pipeline(data, strict);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("no comfortable clips") != std::string::npos);
    }
  }
  SUBCASE("needs two clips") {
    std::vector<TrainingSample> one(data.begin(), data.begin() + 1);
    CHECK_THROWS_AS(run_pipeline(one, cfg), ValidationError);
  }
}
