#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vrsa/encoder.hpp"
#include "vrsa/tensor.hpp"

namespace vrsa {

/// M x D prototype features with cosine/softmax addressing.
struct MemoryBank {
  Mat slots;
  double tau = 0.1;

  int size() const { return static_cast<int>(slots.rows()); }
  int width() const { return static_cast<int>(slots.cols()); }
};

/// expected = read + w2 * tanh(w1 * read + b1) + b2. Zero w2 and b2 give the
/// identity map.
struct Decoder {
  Mat w1, b1, w2, b2;

  static Decoder identity(int width);
};

struct StoreParams {
  MemoryBank bank;
  Decoder decoder;

  std::vector<ParamView> views();
  StoreParams zeros_like() const;
};

struct MemoryRead {
  Vec read;
  Vec weights;
};

/// Cosine similarity, defined as 0 when either norm is below 1e-12.
double cosine(const Vec& a, const Vec& b);

MemoryRead memory_read(const Vec& query, const MemoryBank& bank);

struct StoreOutput {
  Mat expected;
  Mat residual;
  Mat address_weights;
};

StoreOutput store_forward(const FeatureSeq& feats, const MemoryBank& bank, const Decoder& decoder);

/// Mean over steps of squared residual norm divided by D.
double anomaly_score(const StoreOutput& out);

/// Given dL/dexpected, accumulates store gradients and returns dL/dquery.
Mat store_backward(const FeatureSeq& feats, const StoreOutput& out, const StoreParams& params,
                   const Mat& grad_expected, const Mat& grad_weights, StoreParams* grad);

/// Per-clip store objective: mean squared residual plus lambda times the
/// mean address entropy. Fills grad when non-null.
double store_loss(const FeatureSeq& feats, const StoreParams& params, double lambda_entropy,
                  StoreParams* grad = nullptr);

struct StoreConfig {
  int M = 64;
  double tau = 0.1;
  double lambda_entropy = 0.01;
  int epochs = 20;
  double lr = 1e-2;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const StoreConfig&) const = default;
};

struct StoreTraining {
  StoreParams params;
  std::vector<double> loss_curve;  // mean loss per epoch
};

StoreParams init_store(std::span<const FeatureSeq> corpus, const StoreConfig& cfg);

StoreTraining train_store(std::span<const FeatureSeq> corpus, const StoreConfig& cfg);

}  // namespace vrsa
