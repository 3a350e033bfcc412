#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vrsa/corpus.hpp"
#include "vrsa/encoder.hpp"
#include "vrsa/predictor.hpp"
#include "vrsa/store.hpp"

namespace vrsa {

struct RunConfig {
  std::uint64_t seed = 0;
  EncoderConfig encoder;
  StoreConfig store;
  PredictorConfig predictor;
  /// Clips whose label total is below this train the store.
  double comfortable_threshold = 0.1;

  /// Sets seed and derives the encoder/store/predictor seeds from it.
  void reseed(std::uint64_t base);
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Parses the RunConfig JSON; unknown keys are a ParseError. Missing keys
/// keep their defaults. Sub-seeds not given explicitly derive from "seed".
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& cfg);

/// A clip reduced to its parameter-free encoder input plus its label.
struct TrainingSample {
  std::string id;
  FrameDifferences diffs;
  NormalizedScores label;
};

TrainingSample make_sample(const VideoClip& clip, const NormalizedScores& label,
                           const EncoderConfig& cfg);

/// Loads and reduces the given clips (all manifest clips when ids is empty).
std::vector<TrainingSample> load_samples(const Manifest& manifest,
                                         const std::map<std::string, NormalizedScores>& labels,
                                         const EncoderConfig& cfg,
                                         const std::filesystem::path& base_dir,
                                         std::span<const std::string> ids = {});

struct PipelineResult {
  Model model;
  std::vector<double> store_loss;
  std::vector<double> predictor_loss;
  int comfortable_count = 0;
};

/// Stage 1 trains the store on comfortable samples with the initial
/// encoder; stage 2 trains the predictor on all samples.
PipelineResult run_pipeline(std::span<const TrainingSample> samples, const RunConfig& cfg);

PipelineResult run_pipeline(const Manifest& manifest,
                            const std::map<std::string, NormalizedScores>& labels,
                            const RunConfig& cfg, const std::filesystem::path& base_dir = {});

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace vrsa
