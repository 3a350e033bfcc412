#include "vrsa/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "json.hpp"

#include "image_io.hpp"
#include "text_util.hpp"
#include "vrsa/errors.hpp"
#include "vrsa/rng.hpp"

namespace vrsa {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "VCT1 and VRSK I/O assume a little-endian host");

Projection parse_projection(const std::string& s) {
  if (s == "equirectangular") return Projection::equirectangular;
  if (s == "synthetic_flat") return Projection::synthetic_flat;
  throw ParseError("unknown projection '" + s + "'");
}

PhysioKind parse_kind(const std::string& s) {
  if (s == "heart_rate") return PhysioKind::heart_rate;
  if (s == "gsr") return PhysioKind::gsr;
  if (s == "eeg") return PhysioKind::eeg;
  if (s == "other") return PhysioKind::other;
  throw ParseError("unknown physio kind '" + s + "'");
}

void expect_keys(const json& obj, std::initializer_list<const char*> required,
                 const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be a JSON object");
  std::set<std::string> allowed(required.begin(), required.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ParseError(where + ": unexpected key '" + key + "'");
  }
  for (const char* key : required) {
    if (!obj.contains(key)) throw ParseError(where + ": missing key '" + std::string(key) + "'");
  }
}

ClipMeta clip_from_json(const json& j, std::size_t index) {
  const std::string where = "clips[" + std::to_string(index) + "]";
  expect_keys(j, {"id", "frames_path", "fps", "duration_s", "width", "height", "projection"}, where);
  ClipMeta m;
  m.id = j.at("id").get<std::string>();
  m.frames_path = j.at("frames_path").get<std::string>();
  m.fps = j.at("fps").get<double>();
  m.duration_s = j.at("duration_s").get<double>();
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.projection = parse_projection(j.at("projection").get<std::string>());
  return m;
}

json clip_to_json(const ClipMeta& m) {
  return json{{"id", m.id},
              {"frames_path", m.frames_path},
              {"fps", m.fps},
              {"duration_s", m.duration_s},
              {"width", m.width},
              {"height", m.height},
              {"projection", to_string(m.projection)}};
}

SSQRecord rating_from_json(const json& j, std::size_t index) {
  expect_keys(j, {"clip_id", "subject_id", "items"}, "ratings[" + std::to_string(index) + "]");
  return SSQRecord{j.at("clip_id").get<std::string>(), j.at("subject_id").get<std::string>(),
                   j.at("items").get<std::vector<int>>()};
}

PhysioSignal physio_from_json(const json& j, std::size_t index) {
  expect_keys(j, {"clip_id", "subject_id", "kind", "sample_rate_hz", "samples"},
              "physio[" + std::to_string(index) + "]");
  return PhysioSignal{j.at("clip_id").get<std::string>(), j.at("subject_id").get<std::string>(),
                      parse_kind(j.at("kind").get<std::string>()),
                      j.at("sample_rate_hz").get<double>(),
                      j.at("samples").get<std::vector<double>>()};
}

std::string split_group(const std::string& name) {
  const auto slash = name.find('/');
  return slash == std::string::npos ? std::string() : name.substr(0, slash);
}

void clip_error(const ClipMeta& m, const std::string& what) {
  throw ValidationError("clip '" + m.id + "': " + what);
}

}  // namespace

std::string to_string(Projection p) {
  return p == Projection::equirectangular ? "equirectangular" : "synthetic_flat";
}

std::string to_string(PhysioKind k) {
  switch (k) {
    case PhysioKind::heart_rate: return "heart_rate";
    case PhysioKind::gsr: return "gsr";
    case PhysioKind::eeg: return "eeg";
    case PhysioKind::other: return "other";
  }
  return "other";
}

long ClipMeta::expected_frames() const { return std::lround(fps * duration_s); }

const ClipMeta& Manifest::clip(const std::string& id) const {
  for (const auto& c : clips) {
    if (c.id == id) return c;
  }
  throw ValidationError("unknown clip id '" + id + "'");
}

std::vector<std::string> Manifest::clip_ids() const {
  std::vector<std::string> ids;
  ids.reserve(clips.size());
  for (const auto& c : clips) ids.push_back(c.id);
  return ids;
}

void validate_manifest(const Manifest& m) {
  if (m.schema_version != 1) {
    throw ValidationError("unsupported schema_version " + std::to_string(m.schema_version));
  }
  std::set<std::string> ids;
  for (const auto& c : m.clips) {
    if (c.id.empty()) throw ValidationError("clip with empty id");
    if (!ids.insert(c.id).second) throw ValidationError("duplicate clip id '" + c.id + "'");
    if (!(c.fps > 0.0) || !std::isfinite(c.fps)) clip_error(c, "fps must be > 0");
    if (!(c.duration_s > 0.0) || !std::isfinite(c.duration_s)) clip_error(c, "duration_s must be > 0");
    if (c.width <= 0 || c.height <= 0) clip_error(c, "width and height must be positive");
    if (c.frames_path.empty()) clip_error(c, "empty frames_path");
  }
  for (const auto& r : m.ratings) {
    if (!ids.count(r.clip_id)) {
      throw ValidationError("rating by subject '" + r.subject_id + "' references unknown clip '" +
                            r.clip_id + "'");
    }
    validate_record(r);
  }
  for (const auto& p : m.physio) {
    if (!ids.count(p.clip_id)) {
      throw ValidationError("physio signal of subject '" + p.subject_id +
                            "' references unknown clip '" + p.clip_id + "'");
    }
    if (p.samples.empty()) {
      throw ValidationError("physio signal for clip '" + p.clip_id + "' has no samples");
    }
    if (!(p.sample_rate_hz > 0.0)) {
      throw ValidationError("physio signal for clip '" + p.clip_id + "' has sample_rate_hz <= 0");
    }
  }
  std::map<std::string, std::map<std::string, std::string>> owner;  // group -> id -> split
  for (const auto& [name, members] : m.splits) {
    std::set<std::string> seen;
    const auto group = split_group(name);
    for (const auto& id : members) {
      if (!ids.count(id)) {
        throw ValidationError("split '" + name + "' references unknown clip '" + id + "'");
      }
      if (!seen.insert(id).second) {
        throw ValidationError("split '" + name + "' lists clip '" + id + "' twice");
      }
      if (group.empty()) continue;
      auto [it, fresh] = owner[group].emplace(id, name);
      if (!fresh) {
        throw ValidationError("clip '" + id + "' appears in both '" + it->second + "' and '" +
                              name + "' of split group '" + group + "'");
      }
    }
  }
}

Manifest parse_manifest(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  Manifest m;
  try {
    expect_keys(root, {"schema_version", "clips", "ratings", "physio", "splits"}, "manifest");
    m.schema_version = root.at("schema_version").get<int>();
    const auto& clips = root.at("clips");
    for (std::size_t i = 0; i < clips.size(); ++i) m.clips.push_back(clip_from_json(clips[i], i));
    const auto& ratings = root.at("ratings");
    for (std::size_t i = 0; i < ratings.size(); ++i) m.ratings.push_back(rating_from_json(ratings[i], i));
    const auto& physio = root.at("physio");
    for (std::size_t i = 0; i < physio.size(); ++i) m.physio.push_back(physio_from_json(physio[i], i));
    m.splits = root.at("splits").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest has wrong field types: ") + e.what());
  }
  validate_manifest(m);
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(detail::read_text_file(path));
}

std::string format_manifest(const Manifest& m) {
  json root;
  root["schema_version"] = m.schema_version;
  root["clips"] = json::array();
  for (const auto& c : m.clips) root["clips"].push_back(clip_to_json(c));
  root["ratings"] = json::array();
  for (const auto& r : m.ratings) {
    root["ratings"].push_back({{"clip_id", r.clip_id}, {"subject_id", r.subject_id}, {"items", r.items}});
  }
  root["physio"] = json::array();
  for (const auto& p : m.physio) {
    root["physio"].push_back({{"clip_id", p.clip_id},
                              {"subject_id", p.subject_id},
                              {"kind", to_string(p.kind)},
                              {"sample_rate_hz", p.sample_rate_hz},
                              {"samples", p.samples}});
  }
  root["splits"] = m.splits;
  return root.dump(2) + "\n";
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  validate_manifest(m);
  detail::write_file(path, format_manifest(m));
}

VideoClip read_vct(const std::filesystem::path& path) {
  const auto bytes = detail::read_binary_file(path);
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "VCT1", 4) != 0) {
    throw ParseError(path.string() + ": not a VCT1 file (bad magic at offset 0)");
  }
  std::uint32_t dims[4];
  std::memcpy(dims, bytes.data() + 4, sizeof(dims));
  VideoClip clip;
  clip.frame_count = static_cast<int>(dims[0]);
  clip.height = static_cast<int>(dims[1]);
  clip.width = static_cast<int>(dims[2]);
  clip.channels = static_cast<int>(dims[3]);
  if (clip.channels != 3) {
    throw ValidationError(path.string() + ": expected C=3, header says C=" + std::to_string(dims[3]));
  }
  const std::uint64_t count = std::uint64_t{dims[0]} * dims[1] * dims[2] * dims[3];
  if (bytes.size() - 20 != count * sizeof(float)) {
    throw ValidationError(path.string() + ": dimension mismatch, header T=" +
                          std::to_string(dims[0]) + " H=" + std::to_string(dims[1]) +
                          " W=" + std::to_string(dims[2]) + " implies " +
                          std::to_string(count * sizeof(float)) + " payload bytes, found " +
                          std::to_string(bytes.size() - 20));
  }
  clip.frames.resize(count);
  std::memcpy(clip.frames.data(), bytes.data() + 20, count * sizeof(float));
  return clip;
}

void write_vct(const VideoClip& clip, const std::filesystem::path& path) {
  std::string bytes = "VCT1";
  const std::uint32_t dims[4] = {static_cast<std::uint32_t>(clip.frame_count),
                                 static_cast<std::uint32_t>(clip.height),
                                 static_cast<std::uint32_t>(clip.width),
                                 static_cast<std::uint32_t>(clip.channels)};
  bytes.append(reinterpret_cast<const char*>(dims), sizeof(dims));
  bytes.append(reinterpret_cast<const char*>(clip.frames.data()), clip.frames.size() * sizeof(float));
  detail::write_file(path, bytes);
}

void write_png_frames(const VideoClip& clip, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t frame_size = static_cast<std::size_t>(clip.height) * clip.width * 3;
  for (int t = 0; t < clip.frame_count; ++t) {
    detail::RgbImage img{clip.width, clip.height, std::vector<std::uint8_t>(frame_size)};
    for (std::size_t i = 0; i < frame_size; ++i) {
      const float v = std::clamp(clip.frames[t * frame_size + i], 0.0f, 1.0f);
      img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06d.png", t);
    detail::write_png_rgb(img, dir / name);
  }
}

namespace {

VideoClip read_png_dir(const std::filesystem::path& dir) {
  VideoClip clip;
  for (int t = 0;; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06d.png", t);
    const auto file = dir / name;
    if (!std::filesystem::exists(file)) break;
    const auto img = detail::read_png_rgb(file);
    if (t == 0) {
      clip.width = img.width;
      clip.height = img.height;
    } else if (img.width != clip.width || img.height != clip.height) {
      throw ValidationError(file.string() + ": frame size differs from frame_000000.png");
    }
    for (auto p : img.pixels) clip.frames.push_back(static_cast<float>(p) / 255.0f);
    clip.frame_count = t + 1;
  }
  if (clip.frame_count == 0) throw IoError(dir.string() + ": no frame_000000.png found");
  return clip;
}

void finish_clip(VideoClip& clip) {
  if (clip.frame_count < 2) clip_error(clip.meta, "needs at least 2 frames");
  for (auto& v : clip.frames) {
    if (!std::isfinite(v)) clip_error(clip.meta, "non-finite pixel data");
    v = std::clamp(v, 0.0f, 1.0f);
  }
}

}  // namespace

VideoClip load_clip(const ClipMeta& meta, const std::filesystem::path& base_dir) {
  std::filesystem::path path(meta.frames_path);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  if (!std::filesystem::exists(path)) {
    throw IoError("clip '" + meta.id + "': missing frames at " + path.string());
  }
  VideoClip clip = std::filesystem::is_directory(path) ? read_png_dir(path) : read_vct(path);
  clip.meta = meta;
  if (clip.height != meta.height || clip.width != meta.width) {
    clip_error(meta, "dimension mismatch, meta says " + std::to_string(meta.height) + "x" +
                         std::to_string(meta.width) + ", data is " + std::to_string(clip.height) +
                         "x" + std::to_string(clip.width));
  }
  if (std::labs(clip.frame_count - meta.expected_frames()) > 1) {
    clip_error(meta, "dimension mismatch, fps*duration implies " +
                         std::to_string(meta.expected_frames()) + " frames, data has " +
                         std::to_string(clip.frame_count));
  }
  finish_clip(clip);
  return clip;
}

VideoClip load_clip_file(const std::filesystem::path& path, double fps, const std::string& id) {
  if (!(fps > 0.0)) throw ValidationError("clip '" + id + "': fps must be > 0");
  if (!std::filesystem::exists(path)) {
    throw IoError("clip '" + id + "': missing frames at " + path.string());
  }
  VideoClip clip = std::filesystem::is_directory(path) ? read_png_dir(path) : read_vct(path);
  clip.meta.id = id;
  clip.meta.frames_path = path.string();
  clip.meta.fps = fps;
  clip.meta.duration_s = clip.frame_count / fps;
  clip.meta.width = clip.width;
  clip.meta.height = clip.height;
  finish_clip(clip);
  return clip;
}

std::vector<Fold> make_folds(const Manifest& manifest, int k, std::uint64_t seed) {
  const auto ids = manifest.clip_ids();
  if (k < 2) throw ValidationError("make_folds: k must be >= 2");
  if (static_cast<std::size_t>(k) > ids.size()) {
    throw ValidationError("make_folds: k=" + std::to_string(k) + " exceeds clip count " +
                          std::to_string(ids.size()));
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t n = ids.size();
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::vector<int> fold_of(n);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold_of[order[pos++]] = static_cast<int>(f);
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    for (int f = 0; f < k; ++f) {
      auto& fold = folds[static_cast<std::size_t>(f)];
      (fold_of[i] == f ? fold.test : fold.train).push_back(ids[i]);
    }
  }
  return folds;
}

PhysioSummary summarize_physio(const PhysioSignal& signal) {
  const auto& s = signal.samples;
  if (s.empty()) throw ValidationError("summarize_physio: empty sample sequence");
  const double n = static_cast<double>(s.size());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  return PhysioSummary{mean, std::sqrt(ss / n), *lo, *hi};
}

}  // namespace vrsa
