#pragma once

#include <cstdint>
#include <vector>

#include "vrsa/corpus.hpp"
#include "vrsa/tensor.hpp"

namespace vrsa {

struct EncoderConfig {
  int t_window = 4;
  int t_stride = 2;
  int spatial_downsample = 4;
  int D = 128;
  int conv_stages = 3;
  std::uint64_t seed = 0;
  /// Frame rate at which temporal differences are taken at face value.
  double ref_fps = 60.0;
  /// Fixed gain on the luminance differences so typical motion lands in the
  /// nonlinear range of the first stage.
  double diff_gain = 32.0;

  void validate() const;
  /// Output channels of each conv stage; the last one is D.
  std::vector<int> stage_channels() const;
  /// floor((T - t_window) / t_stride) + 1, or 0 when T < t_window.
  int window_count(int frames) const;
  bool operator==(const EncoderConfig&) const = default;
};

struct StrideInfo {
  int t_window = 0;
  int t_stride = 0;
  int spatial_downsample = 0;
};

/// One feature vector per temporal window (rows = windows).
struct FeatureSeq {
  Mat features;
  StrideInfo stride_info;

  int steps() const { return static_cast<int>(features.rows()); }
  int width() const { return static_cast<int>(features.cols()); }
};

/// 3x3 stride-2 convolution, weights laid out Cout x (Cin * 9).
struct ConvLayer {
  Mat weight;
  Mat bias;  // Cout x 1
};

struct EncoderWeights {
  std::vector<ConvLayer> conv;
  Mat rate_gain;  // C0 x 1, scales log2(ref_fps / fps) into the first stage

  std::vector<ParamView> views();
  EncoderWeights zeros_like() const;
};

EncoderWeights init_encoder(const EncoderConfig& cfg);

/// Parameter-free first stage: per window, the t_window-1 luminance frame
/// differences (scaled by diff_gain * fps / ref_fps) average-pooled by
/// spatial_downsample. Each window is a channels x (height*width) matrix.
struct FrameDifferences {
  int channels = 0;
  int height = 0;
  int width = 0;
  double log_rate = 0.0;  // log2(ref_fps / fps)
  std::vector<Mat> windows;
};

FrameDifferences frame_differences(const VideoClip& clip, const EncoderConfig& cfg);

/// Activations kept for the backward pass.
struct EncoderTrace {
  struct Stage {
    int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    Mat cols;    // (Cin*9) x (out_h*out_w)
    Mat preact;  // Cout x (out_h*out_w)
  };
  std::vector<std::vector<Stage>> windows;
  double log_rate = 0.0;
};

FeatureSeq encode(const FrameDifferences& diffs, const EncoderConfig& cfg,
                  const EncoderWeights& weights, EncoderTrace* trace = nullptr);

FeatureSeq encode(const VideoClip& clip, const EncoderConfig& cfg, const EncoderWeights& weights);

/// Accumulates parameter gradients for dL/dfeatures (windows x D).
void encode_backward(const EncoderTrace& trace, const Mat& grad_features,
                     const EncoderWeights& weights, EncoderWeights& grad);

}  // namespace vrsa
