#include "vrsa/store.hpp"

#include <cmath>
#include <numeric>

#include "optim.hpp"
#include "vrsa/errors.hpp"
#include "vrsa/rng.hpp"

namespace vrsa {
namespace {

constexpr double kNormFloor = 1e-12;

Vec softmax(const Vec& logits) {
  const double peak = logits.maxCoeff();
  Vec w = (logits.array() - peak).exp();
  return w / w.sum();
}

void check_shapes(const FeatureSeq& feats, const MemoryBank& bank, const Decoder& dec) {
  const auto D = bank.slots.cols();
  if (bank.slots.rows() < 1) throw ShapeError("memory bank has no slots");
  if (!(bank.tau > 0.0)) throw ValidationError("memory temperature tau must be > 0");
  if (feats.features.cols() != D) {
    throw ShapeError("feature width " + std::to_string(feats.features.cols()) +
                     " does not match memory width " + std::to_string(D));
  }
  if (dec.w1.cols() != D || dec.w2.rows() != D || dec.w1.rows() != dec.w2.cols() ||
      dec.b1.rows() != dec.w1.rows() || dec.b2.rows() != D) {
    throw ShapeError("decoder shapes do not match memory width " + std::to_string(D));
  }
}

Vec decode(const Vec& read, const Decoder& dec, Vec* hidden = nullptr) {
  Vec h = (dec.w1 * read + dec.b1.col(0)).array().tanh().matrix();
  Vec out = read + dec.w2 * h + dec.b2.col(0);
  if (hidden) *hidden = std::move(h);
  return out;
}

}  // namespace

Decoder Decoder::identity(int width) {
  return Decoder{Mat::Zero(width, width), Mat::Zero(width, 1), Mat::Zero(width, width),
                 Mat::Zero(width, 1)};
}

std::vector<ParamView> StoreParams::views() {
  const auto M = static_cast<std::uint32_t>(bank.slots.rows());
  const auto D = static_cast<std::uint32_t>(bank.slots.cols());
  const auto hidden = static_cast<std::uint32_t>(decoder.w1.rows());
  return {{"store.slots", &bank.slots, {M, D}},
          {"store.dec.w1", &decoder.w1, {hidden, D}},
          {"store.dec.b1", &decoder.b1, {hidden}},
          {"store.dec.w2", &decoder.w2, {D, hidden}},
          {"store.dec.b2", &decoder.b2, {D}}};
}

StoreParams StoreParams::zeros_like() const {
  auto z = [](const Mat& m) { return Mat::Zero(m.rows(), m.cols()); };
  return StoreParams{MemoryBank{z(bank.slots), bank.tau},
                     Decoder{z(decoder.w1), z(decoder.b1), z(decoder.w2), z(decoder.b2)}};
}

double cosine(const Vec& a, const Vec& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < kNormFloor || nb < kNormFloor) return 0.0;
  return a.dot(b) / (na * nb);
}

MemoryRead memory_read(const Vec& query, const MemoryBank& bank) {
  if (!query.allFinite()) throw ValidationError("memory_read: non-finite query");
  if (query.size() != bank.slots.cols()) throw ShapeError("memory_read: query width mismatch");
  const int M = bank.size();
  Vec logits(M);
  for (int i = 0; i < M; ++i) logits(i) = cosine(query, bank.slots.row(i).transpose()) / bank.tau;
  MemoryRead out;
  out.weights = softmax(logits);
  out.read = bank.slots.transpose() * out.weights;
  return out;
}

StoreOutput store_forward(const FeatureSeq& feats, const MemoryBank& bank, const Decoder& decoder) {
  check_shapes(feats, bank, decoder);
  const auto T = feats.features.rows();
  StoreOutput out;
  out.expected.resize(T, bank.slots.cols());
  out.address_weights.resize(T, bank.slots.rows());
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto mr = memory_read(feats.features.row(t).transpose(), bank);
    out.expected.row(t) = decode(mr.read, decoder).transpose();
    out.address_weights.row(t) = mr.weights.transpose();
  }
  out.residual = feats.features - out.expected;
  return out;
}

double anomaly_score(const StoreOutput& out) {
  const auto T = out.residual.rows();
  const auto D = out.residual.cols();
  if (T == 0 || D == 0) return 0.0;
  return out.residual.squaredNorm() / static_cast<double>(D) / static_cast<double>(T);
}

Mat store_backward(const FeatureSeq& feats, const StoreOutput& out, const StoreParams& params,
                   const Mat& grad_expected, const Mat& grad_weights, StoreParams* grad) {
  const auto& slots = params.bank.slots;
  const auto& dec = params.decoder;
  const double tau = params.bank.tau;
  const auto T = feats.features.rows();
  const auto M = slots.rows();
  const bool have_dw = grad_weights.size() > 0;

  Vec slot_norm(M);
  for (Eigen::Index i = 0; i < M; ++i) slot_norm(i) = slots.row(i).norm();

  Mat grad_query = Mat::Zero(T, slots.cols());
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vec q = feats.features.row(t).transpose();
    const Vec w = out.address_weights.row(t).transpose();
    const Vec read = slots.transpose() * w;
    Vec h;
    decode(read, dec, &h);

    const Vec de = grad_expected.row(t).transpose();
    const Vec dpre = (dec.w2.transpose() * de).cwiseProduct((1.0 - h.array().square()).matrix());
    const Vec dread = de + dec.w1.transpose() * dpre;
    if (grad) {
      grad->decoder.w2.noalias() += de * h.transpose();
      grad->decoder.b2.col(0) += de;
      grad->decoder.w1.noalias() += dpre * read.transpose();
      grad->decoder.b1.col(0) += dpre;
      grad->bank.slots.noalias() += w * dread.transpose();
    }

    Vec dw = slots * dread;
    if (have_dw) dw += grad_weights.row(t).transpose();
    const Vec dlogit = w.cwiseProduct((dw.array() - w.dot(dw)).matrix());

    const double qn = q.norm();
    if (qn < kNormFloor) continue;
    for (Eigen::Index i = 0; i < M; ++i) {
      if (slot_norm(i) < kNormFloor) continue;
      const double ds = dlogit(i) / tau;
      const auto m = slots.row(i).transpose();
      const double s = q.dot(m) / (qn * slot_norm(i));
      grad_query.row(t) += (ds * (m / (qn * slot_norm(i)) - s * q / (qn * qn))).transpose();
      if (grad) {
        grad->bank.slots.row(i) +=
            (ds * (q / (qn * slot_norm(i)) - s * m / (slot_norm(i) * slot_norm(i)))).transpose();
      }
    }
  }
  return grad_query;
}

double store_loss(const FeatureSeq& feats, const StoreParams& params, double lambda_entropy,
                  StoreParams* grad) {
  const auto out = store_forward(feats, params.bank, params.decoder);
  const double T = static_cast<double>(out.residual.rows());
  const double D = static_cast<double>(out.residual.cols());
  const double mse = out.residual.squaredNorm() / (T * D);

  double entropy = 0.0;
  Mat grad_weights = Mat::Zero(out.address_weights.rows(), out.address_weights.cols());
  for (Eigen::Index t = 0; t < out.address_weights.rows(); ++t) {
    for (Eigen::Index i = 0; i < out.address_weights.cols(); ++i) {
      const double w = out.address_weights(t, i);
      if (w <= 0.0) continue;
      entropy -= w * std::log(w);
      grad_weights(t, i) = -lambda_entropy * (std::log(w) + 1.0) / T;
    }
  }
  entropy /= T;

  if (grad) {
    const Mat grad_expected = -2.0 / (T * D) * out.residual;
    store_backward(feats, out, params, grad_expected, grad_weights, grad);
  }
  return mse + lambda_entropy * entropy;
}

void StoreConfig::validate() const {
  if (M < 1) throw ValidationError("store: M must be >= 1");
  if (!(tau > 0.0)) throw ValidationError("store: tau must be > 0");
  if (!(lambda_entropy >= 0.0)) throw ValidationError("store: lambda_entropy must be >= 0");
  if (epochs < 1) throw ValidationError("store: epochs must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("store: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("store: momentum must be in [0, 1)");
}

StoreParams init_store(std::span<const FeatureSeq> corpus, const StoreConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw ValidationError("train_store: empty corpus");
  const auto D = corpus.front().features.cols();
  std::vector<std::pair<std::size_t, Eigen::Index>> rows;
  for (std::size_t c = 0; c < corpus.size(); ++c) {
    if (corpus[c].features.cols() != D) throw ShapeError("train_store: inconsistent feature widths");
    for (Eigen::Index t = 0; t < corpus[c].features.rows(); ++t) rows.emplace_back(c, t);
  }
  if (rows.empty()) throw ValidationError("train_store: corpus has no feature steps");

  // Slots start at randomly chosen training features plus a small jitter.
  Rng rng(mix_seed(cfg.seed, 0x5702));
  StoreParams p;
  p.bank.tau = cfg.tau;
  p.bank.slots.resize(cfg.M, D);
  for (int i = 0; i < cfg.M; ++i) {
    const auto [c, t] = rows[rng.below(rows.size())];
    const Vec row = corpus[c].features.row(t).transpose();
    const double jitter = 1e-2 * row.norm() / std::sqrt(static_cast<double>(D));
    for (Eigen::Index d = 0; d < D; ++d) p.bank.slots(i, d) = row(d) + jitter * rng.normal();
  }
  p.decoder = Decoder::identity(static_cast<int>(D));
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  for (Eigen::Index i = 0; i < p.decoder.w1.size(); ++i) p.decoder.w1.data()[i] = scale * rng.normal();
  return p;
}

StoreTraining train_store(std::span<const FeatureSeq> corpus, const StoreConfig& cfg) {
  StoreTraining result;
  result.params = init_store(corpus, cfg);
  StoreParams grad = result.params.zeros_like();
  auto param_views = result.params.views();
  auto grad_views = grad.views();
  detail::MomentumSgd sgd(cfg.lr, cfg.momentum);
  Rng rng(mix_seed(cfg.seed, 0x0DE5));

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      detail::zero(grad_views);
      const double loss = store_loss(corpus[order[step]], result.params, cfg.lambda_entropy, &grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("train_store: non-finite loss at epoch " + std::to_string(epoch) +
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
