#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vrsa/errors.hpp"
#include "vrsa/predictor.hpp"
#include "vrsa/synth.hpp"

using namespace vrsa;

namespace {

Mat random_mat(std::mt19937_64& gen, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(gen);
  return m;
}

FeatureSeq seq_of(Mat features) {
  FeatureSeq s;
  s.features = std::move(features);
  return s;
}

VideoClip synth(double omega, double fps, int frames, std::uint64_t seed) {
  SynthParams p;
  p.seed = seed;
  p.omega_deg_s = omega;
  p.fps = fps;
  p.duration_s = frames / fps;
  p.height = 16;
  p.width = 32;
  return generate_clip(p).clip;
}

// Small but complete model with every tensor randomised.
Model tiny_model(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Model m;
  m.encoder_config.D = 8;
  m.encoder_config.conv_stages = 1;
  m.encoder_config.spatial_downsample = 2;
  m.encoder_config.seed = seed;
  m.encoder = init_encoder(m.encoder_config);
  for (auto& layer : m.encoder.conv) layer.bias = random_mat(gen, static_cast<int>(layer.bias.rows()), 1, 0.1);
  m.store.bank.slots = random_mat(gen, 4, 8);
  m.store.bank.tau = 0.5;
  m.store.decoder.w1 = random_mat(gen, 8, 8, 0.4);
  m.store.decoder.b1 = random_mat(gen, 8, 1, 0.1);
  m.store.decoder.w2 = random_mat(gen, 8, 8, 0.4);
  m.store.decoder.b2 = random_mat(gen, 8, 1, 0.1);
  PredictorConfig pc;
  pc.E = 8;
  pc.hidden = 5;
  pc.seed = seed;
  m.predictor = init_predictor(8, pc);
  for (Head* h : {&m.predictor.heads.nausea, &m.predictor.heads.oculomotor,
                  &m.predictor.heads.disorientation}) {
    h->b1 = random_mat(gen, 5, 1, 0.1);
    h->b2 = random_mat(gen, 1, 1, 0.1);
  }
  m.predictor.compare.bias = random_mat(gen, 8, 1, 0.1);
  return m;
}

void check_range(const PredictedScores& s) {
  for (double v : {s.nausea, s.oculomotor, s.disorientation, s.total}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(s.total == (s.nausea + s.oculomotor + s.disorientation) / 3.0);
}

}  // namespace

TEST_CASE("compare") {
  std::mt19937_64 gen(1);
  const auto model = tiny_model(1);
  const auto& cmp = model.predictor.compare;

  SUBCASE("single step: mean and max pooling coincide") {
    const auto feats = seq_of(random_mat(gen, 1, 8));
    const auto out = store_forward(feats, model.store.bank, model.store.decoder);
    Vec z(24);
    z << feats.features.row(0).transpose(), out.expected.row(0).transpose(), out.residual.row(0).transpose();
    const Vec manual = 2.0 * (cmp.weight * z + cmp.bias).array().tanh().matrix();
    CHECK((compare(feats, out, cmp).values - manual).norm() <= 1e-12);
  }
  SUBCASE("pure and residual-sensitive") {
    const auto feats = seq_of(random_mat(gen, 4, 8));
    auto out = store_forward(feats, model.store.bank, model.store.decoder);
    const auto a = compare(feats, out, cmp).values;
    CHECK(a == compare(feats, out, cmp).values);

    StoreOutput same;
    same.expected = feats.features;
    same.residual = Mat::Zero(4, 8);
    same.address_weights = out.address_weights;
    StoreOutput dup = same;
    CHECK(compare(feats, same, cmp).values == compare(feats, dup, cmp).values);

    out.residual *= 2.0;
    CHECK((compare(feats, out, cmp).values - a).norm() > 1e-6);
  }
  SUBCASE("shape mismatch") {
    const auto feats = seq_of(random_mat(gen, 4, 8));
    auto out = store_forward(feats, model.store.bank, model.store.decoder);
    out.residual = Mat::Zero(3, 8);
    CHECK_THROWS_AS(compare(feats, out, cmp), ShapeError);
  }
}

TEST_CASE("predict_symptoms") {
  SUBCASE("zero heads give one half") {
    HeadSet heads{Head::zeros(8, 4), Head::zeros(8, 4), Head::zeros(8, 4)};
    const auto s = predict_symptoms(DifferenceEmbedding{Vec::Zero(8)}, heads);
    CHECK(s == PredictedScores{0.5, 0.5, 0.5, 0.5});
  }
  SUBCASE("hand-set logit of 10") {
    HeadSet heads{Head::zeros(3, 2), Head::zeros(3, 2), Head::zeros(3, 2)};
    heads.nausea.b2(0, 0) = 10.0;
    heads.oculomotor.w1(0, 0) = 1.0;
    heads.oculomotor.w2(0, 0) = 10.0 / std::tanh(1.0);
    const Vec e = Vec::Unit(3, 0);
    const auto s = predict_symptoms(DifferenceEmbedding{e}, heads);
    const double expected = 1.0 / (1.0 + std::exp(-10.0));
    CHECK(s.nausea == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s.nausea == doctest::Approx(0.99995).epsilon(1e-5));
    CHECK(s.oculomotor == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s.disorientation == 0.5);
  }
  SUBCASE("range and total identity on arbitrary inputs") {
    std::mt19937_64 gen(2);
    for (int i = 0; i < 500; ++i) {
      HeadSet heads;
      for (Head* h : {&heads.nausea, &heads.oculomotor, &heads.disorientation}) {
        h->w1 = random_mat(gen, 6, 8, 5.0);
        h->b1 = random_mat(gen, 6, 1, 5.0);
        h->w2 = random_mat(gen, 1, 6, 20.0);
        h->b2 = random_mat(gen, 1, 1, 20.0);
      }
      check_range(predict_symptoms(DifferenceEmbedding{random_mat(gen, 8, 1, 100.0)}, heads));
    }
  }
  SUBCASE("non-finite embedding") {
    HeadSet heads{Head::zeros(2, 2), Head::zeros(2, 2), Head::zeros(2, 2)};
    Vec e(2);
    e << 1.0, std::nan("");
    CHECK_THROWS_AS(predict_symptoms(DifferenceEmbedding{e}, heads), NumericalError);
  }
}

TEST_CASE("predictor gradients match central differences (E=8)") {
  for (bool train_store : {false, true}) {
    for (std::uint64_t seed : {3u, 4u}) {
      const auto model_init = tiny_model(seed);
      Model model = model_init;
      const auto clip = synth(70, 30, 10, seed);
      const auto diffs = frame_differences(clip, model.encoder_config);
      const NormalizedScores label{0.3, 0.7, 0.1, 0.0};

      Model grad = model.zeros_like();
      predictor_loss(diffs, label, model, &grad, train_store);

      auto params = model.views();
      auto grads = grad.views();
      if (!train_store) {
        // Store tensors receive no gradient when frozen.
        for (std::size_t i = 0; i < grads.size(); ++i) {
          if (grads[i].name.rfind("store.", 0) == 0) CHECK(grads[i].value->isZero(0.0));
        }
        std::erase_if(params, [](const ParamView& v) { return v.name.rfind("store.", 0) == 0; });
        std::erase_if(grads, [](const ParamView& v) { return v.name.rfind("store.", 0) == 0; });
      }
      const auto r = oracle::check_gradients(
          params, grads, [&] { return predictor_loss(diffs, label, model, nullptr); });
      INFO("train_store=" << train_store << " worst=" << r.worst_name);
      CHECK(r.worst <= 1e-4);
    }
  }
}

TEST_CASE("train_predictor") {
  auto model = tiny_model(5);
  std::vector<FrameDifferences> diffs;
  std::vector<NormalizedScores> labels;
  std::mt19937_64 gen(0);
  std::uniform_real_distribution<double> omega(0, 180);
  const double fps_set[] = {15, 30, 60};
  for (int i = 0; i < 16; ++i) {
    SynthParams p;
    p.seed = gen();
    p.omega_deg_s = omega(gen);
    p.fps = fps_set[i % 3];
    p.duration_s = 0.5;
    p.height = 16;
    p.width = 32;
    const auto s = generate_clip(p);
    diffs.push_back(frame_differences(s.clip, model.encoder_config));
    labels.push_back(s.labels);
  }
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 16; ++i) pairs.push_back({&diffs[i], labels[i]});

  PredictorConfig cfg;
  cfg.E = 8;
  cfg.hidden = 5;
  cfg.epochs = 2;
  cfg.seed = 0;
  const auto a = train_predictor(pairs, model, cfg);
  REQUIRE(a.loss_curve.size() == 2);
  double initial = 0;
  for (const auto& p : pairs) initial += predictor_loss(*p.diffs, p.label, model, nullptr);
  initial /= 16.0;
  CHECK(a.loss_curve.back() < initial);

  const auto b = train_predictor(pairs, model, cfg);
  CHECK(model_to_params(a.model) == model_to_params(b.model));
  CHECK(a.model.store.bank.slots == model.store.bank.slots);

  cfg.freeze_store = false;
  const auto c = train_predictor(pairs, model, cfg);
  CHECK(c.model.store.bank.slots != model.store.bank.slots);

  std::vector<TrainingPair> none;
  CHECK_THROWS_AS(train_predictor(none, model, cfg), ValidationError);
}

TEST_CASE("assess") {
  const auto model = tiny_model(6);
  const auto clip = synth(45, 30, 12, 1);
  const auto a = assess(clip, model);
  CHECK(a == assess(clip, model));
  check_range(a);
  CHECK_THROWS_AS(assess(synth(45, 30, 3, 1), model), ValidationError);
}

TEST_CASE("model parameter set round trip") {
  const auto model = tiny_model(7);
  const auto params = model_to_params(model);
  CHECK(params.count("enc.config") == 1);
  CHECK(params.count("head.nau.w1") == 1);
  CHECK(params.count("cmp.w") == 1);
  CHECK(params.at("enc.conv0.w").dims == std::vector<std::uint32_t>{8, 3, 3, 3});
  const auto back = model_from_params(params);
  CHECK(model_to_params(back) == params);
  auto arch = back.encoder_config;
  arch.seed = model.encoder_config.seed;  // the init seed is not part of the checkpoint
  CHECK(arch == model.encoder_config);

  auto missing = params;
  missing.erase("store.slots");
  CHECK_THROWS_AS(model_from_params(missing), CheckpointError);
  auto extra = params;
  extra["bogus"] = Tensor{{1}, {0.0}};
  CHECK_THROWS_AS(model_from_params(extra), CheckpointError);
  auto reshaped = params;
  reshaped["cmp.b"].dims = {4, 2};
  CHECK_THROWS_AS(model_from_params(reshaped), CheckpointError);
}
