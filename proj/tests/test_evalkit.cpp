#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"
#include "vrsa/errors.hpp"
#include "vrsa/evalkit.hpp"
#include "vrsa/synth.hpp"
#include "vrsa/trainkit.hpp"

using namespace vrsa;

namespace {

std::vector<double> v(std::initializer_list<double> x) { return x; }

std::vector<double> random_vec(std::mt19937_64& gen, int n, bool ties) {
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> level(0, 6);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& x : out) x = ties ? level(gen) : normal(gen);
  return out;
}

NormalizedScores as_label(const PredictedScores& p) {
  return {p.nausea, p.oculomotor, p.disorientation, p.total};
}

}  // namespace

TEST_CASE("plcc / srocc / rmse worked examples") {
  CHECK(plcc(v({1, 2, 3}), v({2, 4, 6})) == doctest::Approx(1.0));
  CHECK(plcc(v({1, 2, 3}), v({3, 2, 1})) == doctest::Approx(-1.0));
  CHECK(srocc(v({1, 2, 3}), v({10, 20, 15})) == doctest::Approx(0.5));
  CHECK(srocc(v({1, 2, 3}), v({1, 2, 3})) == doctest::Approx(1.0));
  CHECK(rmse(v({1, 2}), v({1, 2})) == 0.0);
  CHECK(rmse(v({0, 0}), v({3, 4})) == doctest::Approx(std::sqrt(12.5)));
  CHECK(rmse(v({0, 0}), v({3, 4})) == doctest::Approx(3.5355).epsilon(1e-4));
}

TEST_CASE("metric errors") {
  CHECK_THROWS_AS(plcc(v({1, 2, 3}), v({1, 2})), LengthMismatchError);
  CHECK_THROWS_AS(srocc(v({1, 2, 3}), v({1, 2})), LengthMismatchError);
  CHECK_THROWS_AS(rmse(v({1, 2, 3}), v({1, 2})), LengthMismatchError);
  CHECK_THROWS_AS(plcc(v({1, 1, 1}), v({1, 2, 3})), ConstantInputError);
  CHECK_THROWS_AS(srocc(v({1, 2, 3}), v({4, 4, 4})), ConstantInputError);
  CHECK_THROWS_AS(plcc(v({1}), v({1})), ValidationError);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), ValidationError);
}

TEST_CASE("metrics agree with brute-force oracles") {
  std::mt19937_64 gen(31);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const bool ties = trial % 3 == 0;
    const auto x = random_vec(gen, 50, ties);
    const auto y = random_vec(gen, 50, ties);
    worst = std::max(worst, std::abs(plcc(x, y) - oracle::pearson(x, y)));
    worst = std::max(worst, std::abs(srocc(x, y) - oracle::spearman(x, y)));
    worst = std::max(worst, std::abs(rmse(x, y) - oracle::rmse(x, y)));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("average ranks on hand-made ties") {
  CHECK(average_ranks(v({10, 20, 20, 30})) == v({1, 2.5, 2.5, 4}));
  CHECK(average_ranks(v({5, 5, 5})) == v({2, 2, 2}));
  CHECK(average_ranks(v({3, 1, 2, 1})) == v({4, 1.5, 3, 1.5}));
  const auto x = v({1, 2, 2, 3, 4, 4, 4});
  const auto y = v({2, 1, 3, 3, 5, 4, 6});
  CHECK(srocc(x, y) == oracle::spearman(x, y));
}

TEST_CASE("metric symmetry and invariances") {
  std::mt19937_64 gen(32);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_vec(gen, 30, trial % 2 == 0);
    const auto y = random_vec(gen, 30, false);
    CHECK(plcc(x, y) == doctest::Approx(plcc(y, x)).epsilon(1e-12));
    CHECK(srocc(x, y) == doctest::Approx(srocc(y, x)).epsilon(1e-12));
    std::vector<double> ty(y.size()), tx(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) ty[i] = std::exp(2.0 * y[i]) + 3.0;
    for (std::size_t i = 0; i < x.size(); ++i) tx[i] = x[i] * x[i] * x[i];
    CHECK(srocc(x, ty) == doctest::Approx(srocc(x, y)).epsilon(1e-12));
    CHECK(srocc(tx, y) == doctest::Approx(srocc(x, y)).epsilon(1e-12));
    const double c = 0.5 + trial * 0.01;
    std::vector<double> cx(x), cy(y);
    for (auto& a : cx) a *= c;
    for (auto& a : cy) a *= c;
    CHECK(rmse(cx, cy) == doctest::Approx(c * rmse(x, y)).epsilon(1e-12));
    const double r = plcc(x, y);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("4-parameter logistic fit") {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    const double xi = -3.0 + 0.15 * i;
    x.push_back(xi);
    y.push_back(0.9 / (1.0 + std::exp(-(xi - 0.4) / 0.7)) + 0.05);
  }
  const auto fit = fit_logistic(x, y);
  double err = 0;
  for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(fit(x[i]) - y[i]));
  CHECK(err <= 1e-4);
}

TEST_CASE("evaluate_run") {
  std::map<std::string, PredictedScores> pred{
      {"a", {0.1, 0.2, 0.3, 0.2}}, {"b", {0.5, 0.1, 0.9, 0.5}}, {"c", {0.9, 0.6, 0.2, 0.5666}}};
  std::map<std::string, NormalizedScores> labels;
  for (const auto& [id, p] : pred) labels[id] = as_label(p);

  SUBCASE("identity") {
    const auto r = evaluate_run(pred, labels);
    CHECK(r.n == 3);
    REQUIRE(r.symptoms.size() == 4);
    for (const auto& [name, m] : r.symptoms) {
      CHECK(m.plcc == doctest::Approx(1.0));
      CHECK(m.srocc == doctest::Approx(1.0));
      CHECK(m.rmse == 0.0);
    }
  }
  SUBCASE("key mismatch lists the ids") {
    std::map<std::string, NormalizedScores> other{{"x", {}}, {"y", {}}};
    try {
      evaluate_run(pred, other);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      for (const char* id : {"a", "b", "c", "x", "y"}) {
        CHECK(msg.find(std::string("'") + id + "'") != std::string::npos);
      }
    }
  }
  SUBCASE("json and csv mirrors") {
    EvalOptions opt;
    opt.fold_id = 2;
    opt.config_digest = "abc";
    const auto r = evaluate_run(pred, labels, opt);
    const auto back = report_from_json(report_to_json(r));
    CHECK(back.n == r.n);
    CHECK(back.fold_id == 2);
    CHECK(back.config_digest == "abc");
    CHECK(back.symptoms.at("nausea").plcc == r.symptoms.at("nausea").plcc);
    std::vector<EvalReport> reports{r};
    const auto csv = reports_to_csv(reports);
    CHECK(csv.rfind("fold,symptom,metric,value\n", 0) == 0);
    CHECK(csv.find("2,total,rmse,0\n") != std::string::npos);
  }
  SUBCASE("predictions csv round trip") {
    CHECK(parse_predictions_csv(format_predictions_csv(pred)) == pred);
  }
}

TEST_CASE("aggregate_reports uses mean and population std") {
  EvalReport a, b;
  for (const char* name : kSymptomNames) {
    a.symptoms[name] = {0.5, 0.4, 0.1};
    b.symptoms[name] = {0.7, 0.8, 0.3};
  }
  std::vector<EvalReport> reports{a, b};
  const auto agg = aggregate_reports(reports);
  CHECK(agg.at("nausea").at("plcc").mean == doctest::Approx(0.6));
  CHECK(agg.at("nausea").at("plcc").std == doctest::Approx(0.1));
  CHECK(agg.at("nausea").at("srocc").std == doctest::Approx(0.2));
}

TEST_CASE("cross_validate: k=2 on 8 clips") {
  testing::TempDir dir("cv");
  SynthGrid grid;
  grid.omega = GridAxis::range(0.0, 90.0);
  grid.fps = GridAxis::range(20.0, 60.0);
  grid.duration_s = 0.25;
  grid.height = 16;
  grid.width = 32;
  const auto corpus = generate_corpus(8, 4, grid, dir.path());

  RunConfig cfg;
  cfg.seed = 1;
  cfg.encoder.D = 8;
  cfg.encoder.conv_stages = 1;
  cfg.encoder.spatial_downsample = 2;
  cfg.store.M = 4;
  cfg.store.epochs = 2;
  cfg.predictor.E = 8;
  cfg.predictor.epochs = 2;
  cfg.comfortable_threshold = 0.35;

  const auto a = cross_validate(corpus.manifest, corpus.labels, 2, cfg, dir.path());
  REQUIRE(a.folds.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(a.folds[i].fold_id == i);
    CHECK(a.folds[i].n == 4);
    CHECK(a.folds[i].config_digest.size() == 16);
  }
  CHECK(a.aggregate.size() == 4);
  const auto b = cross_validate(corpus.manifest, corpus.labels, 2, cfg, dir.path());
  CHECK(crossval_to_json(a) == crossval_to_json(b));
}
