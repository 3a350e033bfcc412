#include "vrsa/trainkit.hpp"

#include <set>

#include "json.hpp"
#include "text_util.hpp"
#include "vrsa/checkpoint.hpp"
#include "vrsa/errors.hpp"
#include "vrsa/rng.hpp"

namespace vrsa {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be a JSON object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ParseError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

void RunConfig::reseed(std::uint64_t base) {
  seed = base;
  encoder.seed = mix_seed(base, 1);
  store.seed = mix_seed(base, 2);
  predictor.seed = mix_seed(base, 3);
}

void RunConfig::validate() const {
  encoder.validate();
  store.validate();
  predictor.validate();
  if (!(comfortable_threshold >= 0.0 && comfortable_threshold <= 1.0)) {
    throw ValidationError("comfortable_threshold must be in [0, 1]");
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("run config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    reject_unknown(root, {"seed", "encoder", "store", "predictor", "comfortable_threshold"}, "run config");
    std::uint64_t seed = 0;
    read(root, "seed", seed);
    cfg.reseed(seed);
    read(root, "comfortable_threshold", cfg.comfortable_threshold);
    if (root.contains("encoder")) {
      const auto& e = root.at("encoder");
      reject_unknown(e, {"t_window", "t_stride", "spatial_downsample", "D", "conv_stages", "seed", "ref_fps",
                      "diff_gain"},
                     "encoder");
      read(e, "t_window", cfg.encoder.t_window);
      read(e, "t_stride", cfg.encoder.t_stride);
      read(e, "spatial_downsample", cfg.encoder.spatial_downsample);
      read(e, "D", cfg.encoder.D);
      read(e, "conv_stages", cfg.encoder.conv_stages);
      read(e, "seed", cfg.encoder.seed);
      read(e, "ref_fps", cfg.encoder.ref_fps);
      read(e, "diff_gain", cfg.encoder.diff_gain);
    }
    if (root.contains("store")) {
      const auto& s = root.at("store");
      reject_unknown(s, {"M", "tau", "lambda_entropy", "epochs", "lr", "momentum", "seed"}, "store");
      read(s, "M", cfg.store.M);
      read(s, "tau", cfg.store.tau);
      read(s, "lambda_entropy", cfg.store.lambda_entropy);
      read(s, "epochs", cfg.store.epochs);
      read(s, "lr", cfg.store.lr);
      read(s, "momentum", cfg.store.momentum);
      read(s, "seed", cfg.store.seed);
    }
    if (root.contains("predictor")) {
      const auto& p = root.at("predictor");
      reject_unknown(p, {"E", "hidden", "epochs", "lr", "momentum", "freeze_store", "seed"}, "predictor");
      read(p, "E", cfg.predictor.E);
      read(p, "hidden", cfg.predictor.hidden);
      read(p, "epochs", cfg.predictor.epochs);
      read(p, "lr", cfg.predictor.lr);
      read(p, "momentum", cfg.predictor.momentum);
      read(p, "freeze_store", cfg.predictor.freeze_store);
      read(p, "seed", cfg.predictor.seed);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("run config has wrong field types: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(detail::read_text_file(path));
}

std::string format_run_config(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["comfortable_threshold"] = cfg.comfortable_threshold;
  const auto& e = cfg.encoder;
  j["encoder"] = {{"t_window", e.t_window}, {"t_stride", e.t_stride},
                  {"spatial_downsample", e.spatial_downsample}, {"D", e.D},
                  {"conv_stages", e.conv_stages}, {"seed", e.seed}, {"ref_fps", e.ref_fps},
                  {"diff_gain", e.diff_gain}};
  const auto& s = cfg.store;
  j["store"] = {{"M", s.M}, {"tau", s.tau}, {"lambda_entropy", s.lambda_entropy}, {"epochs", s.epochs},
                {"lr", s.lr}, {"momentum", s.momentum}, {"seed", s.seed}};
  const auto& p = cfg.predictor;
  j["predictor"] = {{"E", p.E}, {"hidden", p.hidden}, {"epochs", p.epochs}, {"lr", p.lr},
                    {"momentum", p.momentum}, {"freeze_store", p.freeze_store}, {"seed", p.seed}};
  return j.dump(2) + "\n";
}

TrainingSample make_sample(const VideoClip& clip, const NormalizedScores& label,
                           const EncoderConfig& cfg) {
  return TrainingSample{clip.meta.id, frame_differences(clip, cfg), label};
}

std::vector<TrainingSample> load_samples(const Manifest& manifest,
                                         const std::map<std::string, NormalizedScores>& labels,
                                         const EncoderConfig& cfg,
                                         const std::filesystem::path& base_dir,
                                         std::span<const std::string> ids) {
  std::vector<std::string> wanted(ids.begin(), ids.end());
  if (wanted.empty()) wanted = manifest.clip_ids();
  std::vector<TrainingSample> samples;
  samples.reserve(wanted.size());
  for (const auto& id : wanted) {
    const auto label = labels.find(id);
    if (label == labels.end()) throw ValidationError("no label for clip '" + id + "'");
    samples.push_back(make_sample(load_clip(manifest.clip(id), base_dir), label->second, cfg));
  }
  return samples;
}

PipelineResult run_pipeline(std::span<const TrainingSample> samples, const RunConfig& cfg) {
  cfg.validate();
  if (samples.size() < 2) throw ValidationError("run_pipeline: needs at least 2 training clips");

  PipelineResult result;
  result.model.encoder_config = cfg.encoder;
  result.model.encoder = init_encoder(cfg.encoder);

  // Stage 1: store on comfortable clips, features from the initial encoder.
  std::vector<FeatureSeq> comfortable;
  for (const auto& s : samples) {
    if (s.label.total < cfg.comfortable_threshold) {
      comfortable.push_back(encode(s.diffs, cfg.encoder, result.model.encoder));
    }
  }
  result.comfortable_count = static_cast<int>(comfortable.size());
  if (comfortable.empty()) {
    throw ValidationError("no comfortable clips: no training label has total < comfortable_threshold (" +
                          detail::format_double(cfg.comfortable_threshold) +
                          "); raise the threshold or add low-motion clips at the reference frame rate");
  }
  auto store = train_store(comfortable, cfg.store);
  result.store_loss = std::move(store.loss_curve);
  result.model.store = std::move(store.params);

  // Stage 2: encoder, comparison and heads on every training clip.
  result.model.predictor = init_predictor(cfg.encoder.D, cfg.predictor);
  std::vector<TrainingPair> pairs;
  pairs.reserve(samples.size());
  for (const auto& s : samples) pairs.push_back({&s.diffs, s.label});
  auto trained = train_predictor(pairs, std::move(result.model), cfg.predictor);
  result.model = std::move(trained.model);
  result.predictor_loss = std::move(trained.loss_curve);
  return result;
}

PipelineResult run_pipeline(const Manifest& manifest,
                            const std::map<std::string, NormalizedScores>& labels,
                            const RunConfig& cfg, const std::filesystem::path& base_dir) {
  const auto samples = load_samples(manifest, labels, cfg.encoder, base_dir);
  return run_pipeline(samples, cfg);
}

void save_model(const Model& model, const std::filesystem::path& path) {
  save_checkpoint(model_to_params(model), path);
}

Model load_model(const std::filesystem::path& path) { return model_from_params(load_checkpoint(path)); }

}  // namespace vrsa
