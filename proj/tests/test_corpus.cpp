#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "vrsa/corpus.hpp"
#include "vrsa/errors.hpp"

using namespace vrsa;

namespace {

ClipMeta meta(std::string id, double fps = 10.0, double duration = 1.0, int w = 32, int h = 16) {
  ClipMeta m;
  m.id = std::move(id);
  m.frames_path = "clips/" + m.id + ".vct";
  m.fps = fps;
  m.duration_s = duration;
  m.width = w;
  m.height = h;
  return m;
}

VideoClip ramp_clip(int T, int H, int W, float scale = 1.0f) {
  VideoClip c;
  c.frame_count = T;
  c.height = H;
  c.width = W;
  c.frames.resize(static_cast<std::size_t>(T) * H * W * 3);
  for (std::size_t i = 0; i < c.frames.size(); ++i) {
    c.frames[i] = scale * static_cast<float>(i % 251) / 250.0f;
  }
  return c;
}

Manifest random_manifest(std::mt19937_64& gen, int n) {
  Manifest m;
  for (int i = 0; i < n; ++i) m.clips.push_back(meta("clip" + std::to_string(gen() % 100000) + "_" + std::to_string(i)));
  return m;
}

void check_partition(const Manifest& m, const std::vector<Fold>& folds) {
  const auto ids = m.clip_ids();
  std::multiset<std::string> seen;
  for (const auto& f : folds) {
    seen.insert(f.test.begin(), f.test.end());
    CHECK(f.train.size() + f.test.size() == ids.size());
    std::set<std::string> test(f.test.begin(), f.test.end());
    for (const auto& id : f.train) CHECK(test.count(id) == 0);
    std::set<std::string> all(f.train.begin(), f.train.end());
    all.insert(f.test.begin(), f.test.end());
    CHECK(all == std::set<std::string>(ids.begin(), ids.end()));
  }
  CHECK(seen == std::multiset<std::string>(ids.begin(), ids.end()));
}

}  // namespace

TEST_CASE("manifest: two clips, no ratings") {
  const std::string text = R"({
    "schema_version": 1,
    "clips": [
      {"id": "v01", "frames_path": "a.vct", "fps": 30, "duration_s": 2, "width": 64, "height": 32,
       "projection": "equirectangular"},
      {"id": "v02", "frames_path": "b", "fps": 15, "duration_s": 1.5, "width": 64, "height": 32,
       "projection": "synthetic_flat"}
    ],
    "ratings": [], "physio": [], "splits": {}
  })";
  const auto m = parse_manifest(text);
  REQUIRE(m.clips.size() == 2);
  CHECK(m.clips[1].projection == Projection::synthetic_flat);
  CHECK(m.clips[0].expected_frames() == 60);
}

TEST_CASE("manifest validation names the offending record") {
  Manifest m;
  m.clips = {meta("v01"), meta("v01")};
  try {
    validate_manifest(m);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("v01") != std::string::npos);
  }

  m.clips = {meta("v01")};
  m.ratings = {SSQRecord{"v99", "s1", std::vector<int>(16, 0)}};
  try {
    validate_manifest(m);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("v99") != std::string::npos);
  }

  m.ratings.clear();
  m.clips[0].fps = 0.0;
  CHECK_THROWS_AS(validate_manifest(m), ValidationError);

  m.clips = {meta("a"), meta("b")};
  m.splits = {{"cv/train", {"a"}}, {"cv/test", {"a", "b"}}};
  CHECK_THROWS_AS(validate_manifest(m), ValidationError);
  m.splits = {{"cv/train", {"a"}}, {"cv/test", {"b"}}, {"all", {"a", "b"}}};
  CHECK_NOTHROW(validate_manifest(m));
  m.splits = {{"x", {"zzz"}}};
  CHECK_THROWS_AS(validate_manifest(m), ValidationError);
}

TEST_CASE("manifest parse errors") {
  CHECK_THROWS_AS(parse_manifest("{not json"), ParseError);
  CHECK_THROWS_AS(parse_manifest(R"({"schema_version":1,"clips":[],"ratings":[],"physio":[],"splits":{},"extra":1})"),
                  ParseError);
  CHECK_THROWS_AS(parse_manifest(R"({"schema_version":2,"clips":[],"ratings":[],"physio":[],"splits":{}})"),
                  ValidationError);
}

TEST_CASE("manifest write/read round trip is field-exact") {
  testing::TempDir dir("manifest");
  Manifest m;
  m.clips = {meta("v01", 29.97, 3.3366), meta("v02", 60.0, 0.1)};
  m.clips[1].projection = Projection::synthetic_flat;
  m.ratings = {SSQRecord{"v01", "s1", {0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3}}};
  m.physio = {PhysioSignal{"v02", "s1", PhysioKind::gsr, 128.0, {0.1, 1.0 / 3.0, -2.5e-7}}};
  m.splits = {{"cv/a", {"v01"}}, {"cv/b", {"v02"}}};
  write_manifest(m, dir / "m.json");
  const auto back = load_manifest(dir / "m.json");
  CHECK(back == m);
  write_manifest(back, dir / "m2.json");
  CHECK(load_manifest(dir / "m2.json") == m);
}

TEST_CASE("load_clip from VCT1") {
  testing::TempDir dir("vct");
  std::filesystem::create_directories(dir / "clips");
  auto m = meta("v", 8.0, 1.0, 32, 16);
  write_vct(ramp_clip(8, 16, 32), dir / "clips/v.vct");
  const auto clip = load_clip(m, dir.path());
  CHECK(clip.frame_count == 8);
  CHECK(clip.height == 16);
  CHECK(clip.width == 32);
  CHECK(clip.channels == 3);
  CHECK(clip.frames.size() == 8u * 16 * 32 * 3);

  SUBCASE("short payload is a dimension mismatch") {
    std::ifstream in(dir / "clips/v.vct", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    bytes.resize(bytes.size() - 4 * 100);
    std::ofstream(dir / "clips/v.vct", std::ios::binary) << bytes;
    try {
      load_clip(m, dir.path());
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
    }
  }
  SUBCASE("frame count must match fps * duration within one frame") {
    m.fps = 9.0;
    CHECK_NOTHROW(load_clip(m, dir.path()));
    m.fps = 12.0;
    CHECK_THROWS_AS(load_clip(m, dir.path()), ValidationError);
  }
  SUBCASE("spatial size must match") {
    m.width = 16;
    CHECK_THROWS_AS(load_clip(m, dir.path()), ValidationError);
  }
  SUBCASE("missing file") {
    m.frames_path = "nowhere.vct";
    CHECK_THROWS_AS(load_clip(m, dir.path()), IoError);
  }
  SUBCASE("non-finite data") {
    auto bad = ramp_clip(8, 16, 32);
    bad.frames[5] = std::numeric_limits<float>::quiet_NaN();
    write_vct(bad, dir / "clips/v.vct");
    CHECK_THROWS_AS(load_clip(m, dir.path()), ValidationError);
  }
}

TEST_CASE("load_clip from a PNG directory") {
  testing::TempDir dir("png");
  const auto src = ramp_clip(10, 16, 32);
  write_png_frames(src, dir / "frames");
  auto m = meta("p", 10.0, 1.0, 32, 16);
  m.frames_path = "frames";
  const auto clip = load_clip(m, dir.path());
  CHECK(clip.frame_count == 10);
  for (std::size_t i = 0; i < src.frames.size(); i += 97) {
    CHECK(std::abs(clip.frames[i] - src.frames[i]) <= 0.5f / 255.0f + 1e-6f);
  }
}

TEST_CASE("load_clip output stays within [0,1]") {
  testing::TempDir dir("range");
  std::filesystem::create_directories(dir / "clips");
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<float> wide(-2.0f, 3.0f);
  auto c = ramp_clip(8, 16, 32);
  for (auto& v : c.frames) v = wide(gen);
  write_vct(c, dir / "clips/r.vct");
  const auto clip = load_clip(meta("r", 8.0), dir.path());
  CHECK(std::all_of(clip.frames.begin(), clip.frames.end(), [](float v) { return v >= 0.0f && v <= 1.0f; }));
}

TEST_CASE("make_folds") {
  std::mt19937_64 gen(5);
  SUBCASE("10 clips, k=5") {
    const auto m = random_manifest(gen, 10);
    const auto folds = make_folds(m, 5, 42);
    REQUIRE(folds.size() == 5);
    for (const auto& f : folds) CHECK(f.test.size() == 2);
    check_partition(m, folds);
    const auto again = make_folds(m, 5, 42);
    for (std::size_t i = 0; i < folds.size(); ++i) {
      CHECK(folds[i].test == again[i].test);
      CHECK(folds[i].train == again[i].train);
    }
  }
  SUBCASE("k larger than clip count") {
    const auto m = random_manifest(gen, 3);
    CHECK_THROWS_AS(make_folds(m, 5, 0), ValidationError);
    CHECK_THROWS_AS(make_folds(m, 1, 0), ValidationError);
  }
  SUBCASE("partition property on random manifests") {
    for (int trial = 0; trial < 40; ++trial) {
      const int n = 2 + static_cast<int>(gen() % 30);
      const auto m = random_manifest(gen, n);
      for (int k = 2; k <= n; ++k) check_partition(m, make_folds(m, k, gen()));
    }
  }
}

TEST_CASE("summarize_physio") {
  PhysioSignal s{"c", "s", PhysioKind::heart_rate, 1.0, {60, 60, 60}};
  auto r = summarize_physio(s);
  CHECK(r.mean == 60);
  CHECK(r.std == 0);
  s.samples = {1, 3};
  r = summarize_physio(s);
  CHECK(r.mean == doctest::Approx(2.0));
  CHECK(r.std == doctest::Approx(1.0));
  CHECK(r.min == 1);
  CHECK(r.max == 3);
  s.samples.clear();
  CHECK_THROWS_AS(summarize_physio(s), ValidationError);
}
