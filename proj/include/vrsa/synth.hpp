#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vrsa/corpus.hpp"
#include "vrsa/rng.hpp"
#include "vrsa/ssq.hpp"

namespace vrsa {

/// Controls for one synthetic clip: a noise panorama panned about the yaw
/// axis at omega_deg_s, sampled at fps.
struct SynthParams {
  std::uint64_t seed = 0;
  double omega_deg_s = 0.0;
  double fps = 60.0;
  double duration_s = 1.0;
  int height = 32;
  int width = 128;
  double omega_max = 180.0;
  double f_ref = 60.0;
  double beta = 0.5;
};

void validate_synth_params(const SynthParams& p);

/// Analytic ground truth:
///   nau = clamp(omega / omega_max)
///   dis = clamp(nau_raw * (f_ref / fps)^beta)
///   ocu = clamp((f_ref / fps)^beta - 1)
///   total = (nau + ocu + dis) / 3
NormalizedScores synth_labels(const SynthParams& p);

struct SynthClip {
  VideoClip clip;
  NormalizedScores labels;
};

SynthClip generate_clip(const SynthParams& p, const std::string& id = "synth");

/// One sampled axis of the corpus grid: a discrete set when `values` is
/// non-empty, otherwise the continuous range [lo, hi].
struct GridAxis {
  std::vector<double> values;
  double lo = 0.0;
  double hi = 0.0;

  static GridAxis set(std::vector<double> v) { return GridAxis{std::move(v), 0.0, 0.0}; }
  static GridAxis range(double lo, double hi) { return GridAxis{{}, lo, hi}; }
  double sample(Rng& rng) const;
};

struct SynthGrid {
  GridAxis omega = GridAxis::range(0.0, 180.0);
  GridAxis fps = GridAxis::set({15.0, 20.0, 24.0, 30.0, 40.0, 48.0, 60.0});
  double duration_s = 1.0;
  int height = 32;
  int width = 128;
  double omega_max = 180.0;
  double f_ref = 60.0;
  double beta = 0.5;
};

/// Deterministic parameter draws for n clips.
std::vector<SynthParams> sample_grid(int n, std::uint64_t seed, const SynthGrid& grid);

std::string synth_clip_id(int index);

struct SynthCorpus {
  Manifest manifest;
  std::map<std::string, NormalizedScores> labels;
};

/// Writes clips/<id>.vct, manifest.json and labels.csv under out_dir.
SynthCorpus generate_corpus(int n, std::uint64_t seed, const SynthGrid& grid,
                            const std::filesystem::path& out_dir);

}  // namespace vrsa
