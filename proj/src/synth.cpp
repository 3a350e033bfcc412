#include "vrsa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "text_util.hpp"
#include "vrsa/errors.hpp"

namespace vrsa {
namespace {

constexpr int kTextureComponents = 16;
constexpr int kLowestCycles = 2;      // horizontal cycles per 360 degrees
constexpr double kVerticalCycles = 2.0;
constexpr double kAmplitudeBudget = 0.45;  // keeps pixels inside [0.05, 0.95]

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct Component {
  double kx;
  double ky;
  double amplitude;
  double phase;
  double channel_phase[3];
};

std::vector<Component> make_texture(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x7e47));
  std::vector<Component> comps(kTextureComponents);
  double norm = 0.0;
  for (int j = 0; j < kTextureComponents; ++j) {
    auto& c = comps[static_cast<std::size_t>(j)];
    c.kx = kLowestCycles + j;
    c.ky = rng.uniform(-kVerticalCycles, kVerticalCycles);
    c.amplitude = 1.0 / std::sqrt(c.kx);
    c.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (double& p : c.channel_phase) p = rng.uniform(-0.5, 0.5);
    norm += c.amplitude;
  }
  for (auto& c : comps) c.amplitude *= kAmplitudeBudget / norm;
  return comps;
}

}  // namespace

void validate_synth_params(const SynthParams& p) {
  auto fail = [](const std::string& what) { throw ValidationError("synth params: " + what); };
  if (!(p.omega_max > 0.0)) fail("omega_max must be > 0");
  if (!(p.f_ref > 0.0)) fail("f_ref must be > 0");
  if (!(p.beta >= 0.0)) fail("beta must be >= 0");
  if (!(p.omega_deg_s >= 0.0) || p.omega_deg_s > p.omega_max) fail("omega must lie in [0, omega_max]");
  if (!(p.fps > 0.0) || p.fps > p.f_ref) fail("fps must lie in (0, f_ref]");
  if (!(p.duration_s > 0.0)) fail("duration_s must be > 0");
  if (p.height <= 0 || p.width <= 0) fail("height and width must be positive");
  if (std::lround(p.fps * p.duration_s) < 2) fail("fps * duration_s must give at least 2 frames");
}

NormalizedScores synth_labels(const SynthParams& p) {
  validate_synth_params(p);
  const double motion = p.omega_deg_s / p.omega_max;
  const double judder = std::pow(p.f_ref / p.fps, p.beta);
  NormalizedScores s;
  s.nausea = clamp01(motion);
  s.disorientation = clamp01(motion * judder);
  s.oculomotor = clamp01(judder - 1.0);
  s.total = (s.nausea + s.oculomotor + s.disorientation) / 3.0;
  return s;
}

SynthClip generate_clip(const SynthParams& p, const std::string& id) {
  SynthClip out;
  out.labels = synth_labels(p);

  auto& clip = out.clip;
  const int T = static_cast<int>(std::lround(p.fps * p.duration_s));
  clip.meta = ClipMeta{id, id + ".vct", p.fps, p.duration_s, p.width, p.height,
                       Projection::synthetic_flat};
  clip.frame_count = T;
  clip.height = p.height;
  clip.width = p.width;
  clip.channels = 3;

  const auto texture = make_texture(p.seed);
  const double shift_per_frame = p.omega_deg_s / p.fps * (p.width / 360.0);  // pixels
  const double two_pi = 2.0 * std::numbers::pi;
  const std::size_t W = static_cast<std::size_t>(p.width);
  const std::size_t H = static_cast<std::size_t>(p.height);

  std::vector<double> acc(H * W * 3);
  std::vector<double> cx(W), sx(W);
  clip.frames.resize(static_cast<std::size_t>(T) * H * W * 3);
  for (int t = 0; t < T; ++t) {
    std::fill(acc.begin(), acc.end(), 0.5);
    const double offset = shift_per_frame * t;
    for (const auto& comp : texture) {
      for (std::size_t x = 0; x < W; ++x) {
        const double a = two_pi * comp.kx * (static_cast<double>(x) + offset) / p.width;
        cx[x] = std::cos(a);
        sx[x] = std::sin(a);
      }
      for (std::size_t y = 0; y < H; ++y) {
        const double by = two_pi * comp.ky * static_cast<double>(y) / p.height + comp.phase;
        for (std::size_t c = 0; c < 3; ++c) {
          const double b = by + comp.channel_phase[c];
          const double cb = comp.amplitude * std::cos(b);
          const double sb = comp.amplitude * std::sin(b);
          double* row = &acc[(y * W) * 3 + c];
          for (std::size_t x = 0; x < W; ++x) row[x * 3] += cx[x] * cb - sx[x] * sb;
        }
      }
    }
    float* dst = &clip.frames[static_cast<std::size_t>(t) * H * W * 3];
    for (std::size_t i = 0; i < acc.size(); ++i) {
      dst[i] = static_cast<float>(std::clamp(acc[i], 0.0, 1.0));
    }
  }
  return out;
}

double GridAxis::sample(Rng& rng) const {
  if (!values.empty()) return values[rng.below(values.size())];
  return rng.uniform(lo, hi);
}

std::vector<SynthParams> sample_grid(int n, std::uint64_t seed, const SynthGrid& grid) {
  if (n < 1) throw ValidationError("synthetic corpus needs n >= 1");
  Rng rng(mix_seed(seed, 0));
  std::vector<SynthParams> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SynthParams p;
    p.seed = mix_seed(seed, static_cast<std::uint64_t>(i) + 1);
    p.omega_deg_s = grid.omega.sample(rng);
    p.fps = grid.fps.sample(rng);
    p.duration_s = grid.duration_s;
    p.height = grid.height;
    p.width = grid.width;
    p.omega_max = grid.omega_max;
    p.f_ref = grid.f_ref;
    p.beta = grid.beta;
    validate_synth_params(p);
    out.push_back(p);
  }
  return out;
}

std::string synth_clip_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth_%04d", index);
  return buf;
}

SynthCorpus generate_corpus(int n, std::uint64_t seed, const SynthGrid& grid,
                            const std::filesystem::path& out_dir) {
  const auto params = sample_grid(n, seed, grid);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "clips", ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  SynthCorpus corpus;
  for (int i = 0; i < n; ++i) {
    const std::string id = synth_clip_id(i);
    auto generated = generate_clip(params[static_cast<std::size_t>(i)], id);
    generated.clip.meta.frames_path = "clips/" + id + ".vct";
    write_vct(generated.clip, out_dir / generated.clip.meta.frames_path);
    corpus.manifest.clips.push_back(generated.clip.meta);
    corpus.labels[id] = generated.labels;
  }
  write_manifest(corpus.manifest, out_dir / "manifest.json");
  detail::write_file(out_dir / "labels.csv", format_labels_csv(corpus.labels));
  return corpus;
}

}  // namespace vrsa
