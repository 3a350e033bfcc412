#include <cmath>

#include "vrsa/errors.hpp"
#include "vrsa/predictor.hpp"

namespace vrsa {
namespace {

constexpr const char* kEncoderConfigName = "enc.config";
constexpr const char* kTauName = "store.tau";

Tensor vector_tensor(std::vector<double> values) {
  return Tensor{{static_cast<std::uint32_t>(values.size())}, std::move(values)};
}

const Tensor& require(const ParamSet& params, const std::string& name) {
  const auto it = params.find(name);
  if (it == params.end()) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
  return it->second;
}

int dim(const ParamSet& params, const std::string& name, std::size_t axis) {
  const auto& t = require(params, name);
  if (t.dims.size() <= axis) throw CheckpointError("tensor '" + name + "' has too few dimensions");
  return static_cast<int>(t.dims[axis]);
}

int as_int(double v, const char* field) {
  if (!std::isfinite(v) || v != std::floor(v)) {
    throw CheckpointError(std::string("enc.config field ") + field + " is not an integer");
  }
  return static_cast<int>(v);
}

}  // namespace

ParamSet model_to_params(const Model& model) {
  Model copy = model;
  ParamSet params;
  for (const auto& view : copy.views()) {
    const Mat& m = *view.value;
    params[view.name] = Tensor{view.dims, std::vector<double>(m.data(), m.data() + m.size())};
  }
  const auto& c = model.encoder_config;
  params[kEncoderConfigName] =
      vector_tensor({static_cast<double>(c.t_window), static_cast<double>(c.t_stride),
                     static_cast<double>(c.spatial_downsample), static_cast<double>(c.D),
                     static_cast<double>(c.conv_stages), c.ref_fps, c.diff_gain});
  params[kTauName] = vector_tensor({model.store.bank.tau});
  return params;
}

Model model_from_params(const ParamSet& params) {
  const auto& cfg_tensor = require(params, kEncoderConfigName);
  if (cfg_tensor.dims != std::vector<std::uint32_t>{7}) {
    throw CheckpointError("enc.config must hold 7 values");
  }
  const auto& cv = cfg_tensor.data;
  Model model;
  auto& cfg = model.encoder_config;
  cfg.t_window = as_int(cv[0], "t_window");
  cfg.t_stride = as_int(cv[1], "t_stride");
  cfg.spatial_downsample = as_int(cv[2], "spatial_downsample");
  cfg.D = as_int(cv[3], "D");
  cfg.conv_stages = as_int(cv[4], "conv_stages");
  cfg.ref_fps = cv[5];
  cfg.diff_gain = cv[6];
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw CheckpointError(std::string("invalid encoder config in checkpoint: ") + e.what());
  }

  // Build a zero model of the right shape, then copy tensors in by name.
  int cin = cfg.t_window - 1;
  for (int cout : cfg.stage_channels()) {
    model.encoder.conv.push_back({Mat::Zero(cout, cin * 9), Mat::Zero(cout, 1)});
    cin = cout;
  }
  model.encoder.rate_gain = Mat::Zero(model.encoder.conv.front().weight.rows(), 1);

  const int M = dim(params, "store.slots", 0);
  const int dec_hidden = dim(params, "store.dec.w1", 0);
  model.store.bank.slots = Mat::Zero(M, cfg.D);
  model.store.bank.tau = require(params, kTauName).data.at(0);
  model.store.decoder = Decoder{Mat::Zero(dec_hidden, cfg.D), Mat::Zero(dec_hidden, 1),
                                Mat::Zero(cfg.D, dec_hidden), Mat::Zero(cfg.D, 1)};

  const int E = dim(params, "cmp.w", 0);
  const int hidden = dim(params, "head.nau.w1", 0);
  model.predictor.compare = CompareParams{Mat::Zero(E, 3 * cfg.D), Mat::Zero(E, 1)};
  model.predictor.heads = HeadSet{Head::zeros(E, hidden), Head::zeros(E, hidden), Head::zeros(E, hidden)};

  std::size_t matched = 2;  // enc.config and store.tau
  for (auto& view : model.views()) {
    const auto& t = require(params, view.name);
    if (t.dims != view.dims) throw CheckpointError("tensor '" + view.name + "' has unexpected shape");
    std::copy(t.data.begin(), t.data.end(), view.value->data());
    ++matched;
  }
  if (matched != params.size()) throw CheckpointError("checkpoint contains unrecognized tensors");
  if (!(model.store.bank.tau > 0.0)) throw CheckpointError("store.tau must be > 0");
  return model;
}

}  // namespace vrsa
