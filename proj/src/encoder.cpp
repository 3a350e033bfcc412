#include "vrsa/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vrsa/errors.hpp"
#include "vrsa/rng.hpp"

namespace vrsa {
namespace {

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;

// softplus shifted so that f(0) = 0; static input then maps to zero features.
double shifted_softplus(double z) {
  const double sp = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return sp - std::numbers::ln2;
}
double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

int conv_out(int n) { return (n + 1) / 2; }  // stride 2, pad 1, kernel 3

// Rows ordered (channel, ky, kx); vertical zero padding, horizontal wrap.
Mat im2col(const Mat& input, int h, int w, int out_h, int out_w) {
  const int channels = static_cast<int>(input.rows());
  Mat cols = Mat::Zero(channels * kTaps, out_h * out_w);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const int row = c * kTaps + ky * kKernel + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = 2 * oy + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ((2 * ox + kx - 1) % w + w) % w;
            cols(row, oy * out_w + ox) = input(c, iy * w + ix);
          }
        }
      }
    }
  }
  return cols;
}

Mat col2im(const Mat& cols, int channels, int h, int w, int out_h, int out_w) {
  Mat out = Mat::Zero(channels, h * w);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const int row = c * kTaps + ky * kKernel + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = 2 * oy + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ((2 * ox + kx - 1) % w + w) % w;
            out(c, iy * w + ix) += cols(row, oy * out_w + ox);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

void EncoderConfig::validate() const {
  if (t_window < 2) throw ValidationError("encoder: t_window must be >= 2");
  if (t_stride < 1) throw ValidationError("encoder: t_stride must be >= 1");
  if (spatial_downsample < 1) throw ValidationError("encoder: spatial_downsample must be >= 1");
  if (D < 8) throw ValidationError("encoder: D must be >= 8");
  if (conv_stages < 1) throw ValidationError("encoder: conv_stages must be >= 1");
  if (!(ref_fps > 0.0)) throw ValidationError("encoder: ref_fps must be > 0");
  if (!(diff_gain > 0.0)) throw ValidationError("encoder: diff_gain must be > 0");
}

std::vector<int> EncoderConfig::stage_channels() const {
  std::vector<int> out;
  for (int i = 0; i < conv_stages; ++i) {
    const int shift = conv_stages - 1 - i;
    out.push_back(shift >= 30 ? 8 : std::max(8, D >> shift));
  }
  out.back() = D;
  return out;
}

int EncoderConfig::window_count(int frames) const {
  if (frames < t_window) return 0;
  return (frames - t_window) / t_stride + 1;
}

std::vector<ParamView> EncoderWeights::views() {
  std::vector<ParamView> out;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    auto& layer = conv[i];
    const auto cout = static_cast<std::uint32_t>(layer.weight.rows());
    const auto cin = static_cast<std::uint32_t>(layer.weight.cols() / kTaps);
    const std::string prefix = "enc.conv" + std::to_string(i);
    out.push_back({prefix + ".w", &layer.weight, {cout, cin, kKernel, kKernel}});
    out.push_back({prefix + ".b", &layer.bias, {cout}});
  }
  out.push_back({"enc.rate_gain", &rate_gain, {static_cast<std::uint32_t>(rate_gain.rows())}});
  return out;
}

EncoderWeights EncoderWeights::zeros_like() const {
  EncoderWeights z;
  for (const auto& layer : conv) {
    z.conv.push_back({Mat::Zero(layer.weight.rows(), layer.weight.cols()),
                      Mat::Zero(layer.bias.rows(), 1)});
  }
  z.rate_gain = Mat::Zero(rate_gain.rows(), 1);
  return z;
}

EncoderWeights init_encoder(const EncoderConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, 0xE1C0));
  EncoderWeights w;
  int cin = cfg.t_window - 1;
  for (int cout : cfg.stage_channels()) {
    const int fan_in = cin * kTaps;
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    ConvLayer layer{Mat(cout, fan_in), Mat::Zero(cout, 1)};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = scale * rng.normal();
    w.conv.push_back(std::move(layer));
    cin = cout;
  }
  const int c0 = static_cast<int>(w.conv.front().weight.rows());
  w.rate_gain = Mat(c0, 1);
  for (Eigen::Index i = 0; i < c0; ++i) w.rate_gain(i, 0) = rng.normal();
  return w;
}

FrameDifferences frame_differences(const VideoClip& clip, const EncoderConfig& cfg) {
  cfg.validate();
  if (clip.frame_count < cfg.t_window) {
    throw ValidationError("clip '" + clip.meta.id + "' has " + std::to_string(clip.frame_count) +
                          " frames, shorter than t_window=" + std::to_string(cfg.t_window));
  }
  if (!(clip.meta.fps > 0.0)) throw ValidationError("clip '" + clip.meta.id + "' has no frame rate");
  const int ds = cfg.spatial_downsample;
  const int ph = clip.height / ds;
  const int pw = clip.width / ds;
  if (ph < 1 || pw < 1) {
    throw ValidationError("clip '" + clip.meta.id + "' is smaller than spatial_downsample");
  }

  // Luminance (channel mean) average-pooled over ds x ds blocks, per frame.
  const double norm = 1.0 / (static_cast<double>(ds) * ds * clip.channels);
  Mat pooled = Mat::Zero(clip.frame_count, ph * pw);
  for (int t = 0; t < clip.frame_count; ++t) {
    for (int y = 0; y < ph * ds; ++y) {
      for (int x = 0; x < pw * ds; ++x) {
        double sum = 0.0;
        for (int c = 0; c < clip.channels; ++c) sum += clip.at(t, y, x, c);
        pooled(t, (y / ds) * pw + x / ds) += sum;
      }
    }
  }
  pooled *= norm;

  FrameDifferences out;
  out.channels = cfg.t_window - 1;
  out.height = ph;
  out.width = pw;
  out.log_rate = std::log2(cfg.ref_fps / clip.meta.fps);
  const double scale = cfg.diff_gain * clip.meta.fps / cfg.ref_fps;
  const int windows = cfg.window_count(clip.frame_count);
  out.windows.reserve(static_cast<std::size_t>(windows));
  for (int w = 0; w < windows; ++w) {
    const int start = w * cfg.t_stride;
    Mat diff(out.channels, ph * pw);
    for (int k = 0; k < out.channels; ++k) {
      diff.row(k) = (pooled.row(start + k + 1) - pooled.row(start + k)) * scale;
    }
    out.windows.push_back(std::move(diff));
  }
  return out;
}

FeatureSeq encode(const FrameDifferences& diffs, const EncoderConfig& cfg,
                  const EncoderWeights& weights, EncoderTrace* trace) {
  if (weights.conv.empty()) throw ShapeError("encoder weights have no conv stages");
  if (weights.conv.front().weight.cols() != static_cast<Eigen::Index>(diffs.channels) * kTaps) {
    throw ShapeError("encoder first stage expects " +
                     std::to_string(weights.conv.front().weight.cols() / kTaps) +
                     " difference channels, got " + std::to_string(diffs.channels));
  }
  const int steps = static_cast<int>(diffs.windows.size());
  const int width = static_cast<int>(weights.conv.back().weight.rows());
  FeatureSeq seq;
  seq.features = Mat::Zero(steps, width);
  seq.stride_info = {cfg.t_window, cfg.t_stride, cfg.spatial_downsample};
  if (trace) {
    trace->windows.assign(static_cast<std::size_t>(steps), {});
    trace->log_rate = diffs.log_rate;
  }

  for (int t = 0; t < steps; ++t) {
    Mat act = diffs.windows[static_cast<std::size_t>(t)];
    int h = diffs.height;
    int w = diffs.width;
    for (std::size_t s = 0; s < weights.conv.size(); ++s) {
      const auto& layer = weights.conv[s];
      const int oh = conv_out(h);
      const int ow = conv_out(w);
      Mat cols = im2col(act, h, w, oh, ow);
      Mat z = layer.weight * cols;
      Vec shift = layer.bias.col(0);
      if (s == 0) shift += weights.rate_gain.col(0) * diffs.log_rate;
      z.colwise() += shift;
      act = z.unaryExpr([](double v) { return shifted_softplus(v); });
      if (trace) {
        trace->windows[static_cast<std::size_t>(t)].push_back({h, w, oh, ow, std::move(cols), std::move(z)});
      }
      h = oh;
      w = ow;
    }
    seq.features.row(t) = act.rowwise().mean().transpose();
  }
  if (!seq.features.allFinite()) throw NumericalError("encoder produced non-finite features");
  return seq;
}

FeatureSeq encode(const VideoClip& clip, const EncoderConfig& cfg, const EncoderWeights& weights) {
  return encode(frame_differences(clip, cfg), cfg, weights);
}

void encode_backward(const EncoderTrace& trace, const Mat& grad_features,
                     const EncoderWeights& weights, EncoderWeights& grad) {
  const std::size_t stages = weights.conv.size();
  for (std::size_t t = 0; t < trace.windows.size(); ++t) {
    const auto& window = trace.windows[t];
    const auto& last = window.back();
    const int positions = last.out_h * last.out_w;
    Mat d_act = grad_features.row(static_cast<Eigen::Index>(t)).transpose().replicate(1, positions) /
                static_cast<double>(positions);
    for (std::size_t s = stages; s-- > 0;) {
      const auto& st = window[s];
      const Mat dz = d_act.cwiseProduct(st.preact.unaryExpr([](double v) { return logistic(v); }));
      grad.conv[s].weight.noalias() += dz * st.cols.transpose();
      const Vec dz_sum = dz.rowwise().sum();
      grad.conv[s].bias.col(0) += dz_sum;
      if (s == 0) {
        grad.rate_gain.col(0) += dz_sum * trace.log_rate;
        break;
      }
      const Mat d_cols = weights.conv[s].weight.transpose() * dz;
      const int cin = static_cast<int>(weights.conv[s].weight.cols() / kTaps);
      d_act = col2im(d_cols, cin, st.in_h, st.in_w, st.out_h, st.out_w);
    }
  }
}

}  // namespace vrsa
