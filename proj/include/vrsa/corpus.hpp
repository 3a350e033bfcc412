#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vrsa/ssq.hpp"

namespace vrsa {

enum class Projection { equirectangular, synthetic_flat };

struct ClipMeta {
  std::string id;
  std::string frames_path;  // relative paths resolve against the manifest directory
  double fps = 0.0;
  double duration_s = 0.0;
  int width = 0;
  int height = 0;
  Projection projection = Projection::equirectangular;

  /// Frame count implied by fps * duration_s.
  long expected_frames() const;
  bool operator==(const ClipMeta&) const = default;
};

/// Decoded clip: frames laid out T x H x W x C (C = 3), values in [0, 1].
struct VideoClip {
  ClipMeta meta;
  int frame_count = 0;
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> frames;

  std::size_t index(int t, int y, int x, int c) const {
    return ((static_cast<std::size_t>(t) * height + y) * width + x) * channels + c;
  }
  float at(int t, int y, int x, int c) const { return frames[index(t, y, x, c)]; }
};

enum class PhysioKind { heart_rate, gsr, eeg, other };

struct PhysioSignal {
  std::string clip_id;
  std::string subject_id;
  PhysioKind kind = PhysioKind::other;
  double sample_rate_hz = 0.0;
  std::vector<double> samples;

  bool operator==(const PhysioSignal&) const = default;
};

/// Dataset index. Split names of the form "<group>/<name>" belong to a
/// cross-validation group; splits sharing a group must be disjoint.
struct Manifest {
  int schema_version = 1;
  std::vector<ClipMeta> clips;
  std::vector<SSQRecord> ratings;
  std::vector<PhysioSignal> physio;
  std::map<std::string, std::vector<std::string>> splits;

  const ClipMeta& clip(const std::string& id) const;
  std::vector<std::string> clip_ids() const;
  bool operator==(const Manifest&) const = default;
};

/// Throws ValidationError naming the first offending record.
void validate_manifest(const Manifest& manifest);

Manifest parse_manifest(const std::string& json_text);
Manifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const Manifest& manifest);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Loads a VCT1 file or a PNG frame directory and checks it against meta.
VideoClip load_clip(const ClipMeta& meta, const std::filesystem::path& base_dir = {});

/// Loads a clip without a manifest entry; size and duration come from the data.
VideoClip load_clip_file(const std::filesystem::path& path, double fps, const std::string& id = "clip");

// VCT1: "VCT1", u32 T,H,W,C (LE), then float32 payload in T,H,W,C order.
VideoClip read_vct(const std::filesystem::path& path);
void write_vct(const VideoClip& clip, const std::filesystem::path& path);

/// Writes frame_000000.png ... as 8-bit RGB.
void write_png_frames(const VideoClip& clip, const std::filesystem::path& dir);

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded k-fold partition of the manifest's clip ids; index = fold number.
std::vector<Fold> make_folds(const Manifest& manifest, int k, std::uint64_t seed);

struct PhysioSummary {
  double mean = 0.0;
  double std = 0.0;  // population convention
  double min = 0.0;
  double max = 0.0;
};

PhysioSummary summarize_physio(const PhysioSignal& signal);

std::string to_string(Projection p);
std::string to_string(PhysioKind k);

}  // namespace vrsa
