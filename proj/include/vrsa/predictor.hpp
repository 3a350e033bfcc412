#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vrsa/encoder.hpp"
#include "vrsa/ssq.hpp"
#include "vrsa/store.hpp"
#include "vrsa/tensor.hpp"

namespace vrsa {

/// Pointwise map from [input, expected, residual] (3D) to E, tanh output.
struct CompareParams {
  Mat weight;  // E x 3D
  Mat bias;    // E x 1
};

/// E -> hidden (tanh) -> 1 (logistic).
struct Head {
  Mat w1;  // hidden x E
  Mat b1;  // hidden x 1
  Mat w2;  // 1 x hidden
  Mat b2;  // 1 x 1

  static Head zeros(int embedding, int hidden);
};

struct HeadSet {
  Head nausea;
  Head oculomotor;
  Head disorientation;
};

struct PredictorParams {
  CompareParams compare;
  HeadSet heads;

  std::vector<ParamView> views();
  PredictorParams zeros_like() const;
};

struct DifferenceEmbedding {
  Vec values;
};

struct PredictedScores {
  double nausea = 0.0;
  double oculomotor = 0.0;
  double disorientation = 0.0;
  double total = 0.0;  // mean of the three subscales

  bool operator==(const PredictedScores&) const = default;
};

/// Temporal mean plus temporal max of the per-step comparison map.
DifferenceEmbedding compare(const FeatureSeq& input, const StoreOutput& out,
                            const CompareParams& params);

PredictedScores predict_symptoms(const DifferenceEmbedding& embedding, const HeadSet& heads);

/// Everything assess() needs; serialized as one VRSK checkpoint.
struct Model {
  EncoderConfig encoder_config;
  EncoderWeights encoder;
  StoreParams store;
  PredictorParams predictor;

  /// Trainable tensors, named enc.* / store.* / cmp.* / head.*.
  std::vector<ParamView> views();
  Model zeros_like() const;
};

ParamSet model_to_params(const Model& model);
/// Throws CheckpointError on missing tensors or inconsistent shapes.
Model model_from_params(const ParamSet& params);

PredictedScores assess(const VideoClip& clip, const Model& model);
PredictedScores assess(const FrameDifferences& diffs, const Model& model);

struct PredictorConfig {
  int E = 64;
  int hidden = 16;
  int epochs = 30;
  double lr = 1e-2;
  double momentum = 0.9;
  bool freeze_store = true;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const PredictorConfig&) const = default;
};

PredictorParams init_predictor(int feature_width, const PredictorConfig& cfg);

/// Squared error summed over the three subscale heads for one clip. When
/// grad is non-null, encoder/comparison/head gradients are accumulated and,
/// if train_store is set, store gradients too.
double predictor_loss(const FrameDifferences& diffs, const NormalizedScores& label,
                      const Model& model, Model* grad, bool train_store = false);

struct TrainingPair {
  const FrameDifferences* diffs;
  NormalizedScores label;
};

struct PredictorTraining {
  Model model;
  std::vector<double> loss_curve;  // mean loss per epoch
};

/// Trains encoder, comparison and heads (store frozen unless
/// cfg.freeze_store is false), starting from `init`.
PredictorTraining train_predictor(std::span<const TrainingPair> pairs, Model init,
                                  const PredictorConfig& cfg);

}  // namespace vrsa
