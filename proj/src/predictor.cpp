#include "vrsa/predictor.hpp"

#include <cmath>
#include <numeric>

#include "optim.hpp"
#include "vrsa/errors.hpp"
#include "vrsa/rng.hpp"

namespace vrsa {
namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct CompareTrace {
  Mat inputs;   // T x 3D
  Mat outputs;  // T x E, after tanh
  std::vector<Eigen::Index> argmax;
};

DifferenceEmbedding compare_forward(const FeatureSeq& input, const StoreOutput& out,
                                    const CompareParams& params, CompareTrace* trace) {
  const auto T = input.features.rows();
  const auto D = input.features.cols();
  if (T < 1) throw ShapeError("compare: empty feature sequence");
  if (out.expected.rows() != T || out.expected.cols() != D || out.residual.rows() != T ||
      out.residual.cols() != D) {
    throw ShapeError("compare: store output shape does not match input features");
  }
  if (params.weight.cols() != 3 * D || params.bias.rows() != params.weight.rows()) {
    throw ShapeError("compare: parameters expect width " + std::to_string(params.weight.cols() / 3) +
                     ", features have " + std::to_string(D));
  }
  Mat z(T, 3 * D);
  z << input.features, out.expected, out.residual;
  Mat y = z * params.weight.transpose();
  y.rowwise() += params.bias.col(0).transpose();
  y = y.array().tanh().matrix();

  const auto E = y.cols();
  DifferenceEmbedding emb;
  emb.values = y.colwise().mean().transpose();
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(E));
  for (Eigen::Index e = 0; e < E; ++e) {
    Eigen::Index best = 0;
    y.col(e).maxCoeff(&best);
    argmax[static_cast<std::size_t>(e)] = best;
    emb.values(e) += y(best, e);
  }
  if (trace) *trace = CompareTrace{std::move(z), std::move(y), std::move(argmax)};
  return emb;
}

struct HeadTrace {
  Vec hidden;
  double prob = 0.0;
};

double head_forward(const Head& head, const Vec& e, HeadTrace* trace) {
  Vec h = (head.w1 * e + head.b1.col(0)).array().tanh().matrix();
  const double logit = head.w2.row(0).dot(h) + head.b2(0, 0);
  const double p = logistic(logit);
  if (trace) *trace = HeadTrace{std::move(h), p};
  return p;
}

// dL/dp -> head gradients; returns dL/de.
Vec head_backward(const Head& head, const Vec& e, const HeadTrace& tr, double dp, Head& grad) {
  const double dlogit = dp * tr.prob * (1.0 - tr.prob);
  grad.w2.row(0) += dlogit * tr.hidden.transpose();
  grad.b2(0, 0) += dlogit;
  const Vec dpre = (dlogit * head.w2.row(0).transpose()).cwiseProduct(
      (1.0 - tr.hidden.array().square()).matrix());
  grad.w1.noalias() += dpre * e.transpose();
  grad.b1.col(0) += dpre;
  return head.w1.transpose() * dpre;
}

void check_head(const Head& head, Eigen::Index E, const char* name) {
  if (head.w1.cols() != E || head.b1.rows() != head.w1.rows() || head.w2.cols() != head.w1.rows() ||
      head.w2.rows() != 1 || head.b2.size() != 1) {
    throw ShapeError(std::string("head '") + name + "' does not match embedding width " +
                     std::to_string(E));
  }
}

void fill_normal(Mat& m, double scale, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
}

Head init_head(int E, int hidden, Rng& rng) {
  Head h = Head::zeros(E, hidden);
  fill_normal(h.w1, 1.0 / std::sqrt(static_cast<double>(E)), rng);
  fill_normal(h.w2, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  return h;
}

void append_head_views(std::vector<ParamView>& out, Head& h, const std::string& prefix) {
  const auto hidden = static_cast<std::uint32_t>(h.w1.rows());
  const auto E = static_cast<std::uint32_t>(h.w1.cols());
  out.push_back({prefix + ".w1", &h.w1, {hidden, E}});
  out.push_back({prefix + ".b1", &h.b1, {hidden}});
  out.push_back({prefix + ".w2", &h.w2, {1, hidden}});
  out.push_back({prefix + ".b2", &h.b2, {1}});
}

Head zeros_like(const Head& h) {
  return Head{Mat::Zero(h.w1.rows(), h.w1.cols()), Mat::Zero(h.b1.rows(), 1),
              Mat::Zero(1, h.w2.cols()), Mat::Zero(1, 1)};
}

}  // namespace

Head Head::zeros(int embedding, int hidden) {
  return Head{Mat::Zero(hidden, embedding), Mat::Zero(hidden, 1), Mat::Zero(1, hidden), Mat::Zero(1, 1)};
}

std::vector<ParamView> PredictorParams::views() {
  std::vector<ParamView> out;
  const auto E = static_cast<std::uint32_t>(compare.weight.rows());
  const auto in = static_cast<std::uint32_t>(compare.weight.cols());
  out.push_back({"cmp.w", &compare.weight, {E, in}});
  out.push_back({"cmp.b", &compare.bias, {E}});
  append_head_views(out, heads.nausea, "head.nau");
  append_head_views(out, heads.oculomotor, "head.ocu");
  append_head_views(out, heads.disorientation, "head.dis");
  return out;
}

PredictorParams PredictorParams::zeros_like() const {
  return PredictorParams{
      CompareParams{Mat::Zero(compare.weight.rows(), compare.weight.cols()),
                    Mat::Zero(compare.bias.rows(), 1)},
      HeadSet{vrsa::zeros_like(heads.nausea), vrsa::zeros_like(heads.oculomotor),
              vrsa::zeros_like(heads.disorientation)}};
}

std::vector<ParamView> Model::views() {
  auto out = encoder.views();
  for (auto& v : store.views()) out.push_back(std::move(v));
  for (auto& v : predictor.views()) out.push_back(std::move(v));
  return out;
}

Model Model::zeros_like() const {
  return Model{encoder_config, encoder.zeros_like(), store.zeros_like(), predictor.zeros_like()};
}

DifferenceEmbedding compare(const FeatureSeq& input, const StoreOutput& out,
                            const CompareParams& params) {
  return compare_forward(input, out, params, nullptr);
}

PredictedScores predict_symptoms(const DifferenceEmbedding& embedding, const HeadSet& heads) {
  const Vec& e = embedding.values;
  if (!e.allFinite()) throw NumericalError("predict_symptoms: non-finite embedding");
  check_head(heads.nausea, e.size(), "nau");
  check_head(heads.oculomotor, e.size(), "ocu");
  check_head(heads.disorientation, e.size(), "dis");
  PredictedScores s;
  s.nausea = head_forward(heads.nausea, e, nullptr);
  s.oculomotor = head_forward(heads.oculomotor, e, nullptr);
  s.disorientation = head_forward(heads.disorientation, e, nullptr);
  s.total = (s.nausea + s.oculomotor + s.disorientation) / 3.0;
  return s;
}

PredictedScores assess(const FrameDifferences& diffs, const Model& model) {
  const auto feats = encode(diffs, model.encoder_config, model.encoder);
  const auto out = store_forward(feats, model.store.bank, model.store.decoder);
  return predict_symptoms(compare(feats, out, model.predictor.compare), model.predictor.heads);
}

PredictedScores assess(const VideoClip& clip, const Model& model) {
  return assess(frame_differences(clip, model.encoder_config), model);
}

void PredictorConfig::validate() const {
  if (E < 1) throw ValidationError("predictor: E must be >= 1");
  if (hidden < 1) throw ValidationError("predictor: hidden must be >= 1");
  if (epochs < 1) throw ValidationError("predictor: epochs must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("predictor: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ValidationError("predictor: momentum must be in [0, 1)");
  }
}

PredictorParams init_predictor(int feature_width, const PredictorConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, 0x9ED1));
  PredictorParams p;
  p.compare.weight.resize(cfg.E, 3 * feature_width);
  fill_normal(p.compare.weight, 1.0 / std::sqrt(3.0 * feature_width), rng);
  p.compare.bias = Mat::Zero(cfg.E, 1);
  p.heads.nausea = init_head(cfg.E, cfg.hidden, rng);
  p.heads.oculomotor = init_head(cfg.E, cfg.hidden, rng);
  p.heads.disorientation = init_head(cfg.E, cfg.hidden, rng);
  return p;
}

double predictor_loss(const FrameDifferences& diffs, const NormalizedScores& label,
                      const Model& model, Model* grad, bool train_store) {
  EncoderTrace enc_trace;
  const auto feats = encode(diffs, model.encoder_config, model.encoder, grad ? &enc_trace : nullptr);
  const auto out = store_forward(feats, model.store.bank, model.store.decoder);
  CompareTrace cmp_trace;
  const auto emb = compare_forward(feats, out, model.predictor.compare, &cmp_trace);
  if (!emb.values.allFinite()) throw NumericalError("predictor: non-finite embedding");

  const auto& heads = model.predictor.heads;
  const Head* head_list[3] = {&heads.nausea, &heads.oculomotor, &heads.disorientation};
  const double targets[3] = {label.nausea, label.oculomotor, label.disorientation};
  HeadTrace head_traces[3];
  double loss = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double p = head_forward(*head_list[k], emb.values, &head_traces[k]);
    loss += (p - targets[k]) * (p - targets[k]);
  }
  if (!grad) return loss;

  Head* grad_heads[3] = {&grad->predictor.heads.nausea, &grad->predictor.heads.oculomotor,
                         &grad->predictor.heads.disorientation};
  Vec d_emb = Vec::Zero(emb.values.size());
  for (int k = 0; k < 3; ++k) {
    const double dp = 2.0 * (head_traces[k].prob - targets[k]);
    d_emb += head_backward(*head_list[k], emb.values, head_traces[k], dp, *grad_heads[k]);
  }

  // Mean pooling spreads the gradient evenly; max pooling routes it to argmax.
  const auto T = cmp_trace.outputs.rows();
  const auto D = feats.features.cols();
  Mat d_y = (d_emb / static_cast<double>(T)).transpose().replicate(T, 1);
  for (Eigen::Index e = 0; e < d_emb.size(); ++e) {
    d_y(cmp_trace.argmax[static_cast<std::size_t>(e)], e) += d_emb(e);
  }
  const Mat d_pre = d_y.cwiseProduct((1.0 - cmp_trace.outputs.array().square()).matrix());
  grad->predictor.compare.weight.noalias() += d_pre.transpose() * cmp_trace.inputs;
  grad->predictor.compare.bias.col(0) += d_pre.colwise().sum().transpose();
  const Mat d_z = d_pre * model.predictor.compare.weight;

  const Mat d_residual = d_z.middleCols(2 * D, D);
  Mat d_input = d_z.leftCols(D) + d_residual;
  const Mat d_expected = d_z.middleCols(D, D) - d_residual;
  d_input += store_backward(feats, out, model.store, d_expected, Mat(),
                            train_store ? &grad->store : nullptr);
  encode_backward(enc_trace, d_input, model.encoder, grad->encoder);
  return loss;
}

PredictorTraining train_predictor(std::span<const TrainingPair> pairs, Model init,
                                  const PredictorConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw ValidationError("train_predictor: empty training set");
  PredictorTraining result;
  result.model = std::move(init);
  Model grad = result.model.zeros_like();

  auto select = [&](Model& m) {
    auto views = m.encoder.views();
    if (!cfg.freeze_store) {
      for (auto& v : m.store.views()) views.push_back(std::move(v));
    }
    for (auto& v : m.predictor.views()) views.push_back(std::move(v));
    return views;
  };
  const auto param_views = select(result.model);
  const auto grad_views = select(grad);
  const auto all_grad_views = grad.views();
  detail::MomentumSgd sgd(cfg.lr, cfg.momentum);
  Rng rng(mix_seed(cfg.seed, 0x0DE6));

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const auto& pair = pairs[order[step]];
      detail::zero(all_grad_views);
      const double loss =
          predictor_loss(*pair.diffs, pair.label, result.model, &grad, !cfg.freeze_store);
      if (!std::isfinite(loss)) {
        throw NumericalError("train_predictor: non-finite loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step));
      }
      total += loss;
      sgd.step(param_views, grad_views);
    }
    result.loss_curve.push_back(total / static_cast<double>(order.size()));
  }
  return result;
}

}  // namespace vrsa
