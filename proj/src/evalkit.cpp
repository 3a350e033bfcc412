#include "vrsa/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "json.hpp"
#include "text_util.hpp"
#include "vrsa/checkpoint.hpp"
#include "vrsa/errors.hpp"
#include "vrsa/trainkit.hpp"

namespace vrsa {
namespace {

using nlohmann::json;

void check_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n,
                const char* metric) {
  if (x.size() != y.size()) {
    throw LengthMismatchError(std::string(metric) + ": length mismatch (" +
                              std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < min_n) {
    throw ValidationError(std::string(metric) + ": needs at least " + std::to_string(min_n) +
                          " samples, got " + std::to_string(x.size()));
  }
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
}

void check_not_constant(std::span<const double> x, std::span<const double> y, const char* metric) {
  if (is_constant(x) || is_constant(y)) {
    throw ConstantInputError(std::string(metric) + ": correlation undefined for a constant sequence (" +
                             (is_constant(x) ? "first" : "second") + " argument)");
  }
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw ConstantInputError("correlation: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double component(const PredictedScores& s, std::size_t k) {
  switch (k) {
    case 0: return s.nausea;
    case 1: return s.oculomotor;
    case 2: return s.disorientation;
    default: return s.total;
  }
}

double component(const NormalizedScores& s, std::size_t k) {
  switch (k) {
    case 0: return s.nausea;
    case 1: return s.oculomotor;
    case 2: return s.disorientation;
    default: return s.total;
  }
}

json report_json(const EvalReport& r) {
  json j;
  j["n"] = r.n;
  j["fold_id"] = r.fold_id ? json(*r.fold_id) : json(nullptr);
  j["config_digest"] = r.config_digest;
  j["symptoms"] = json::object();
  for (const auto& [name, m] : r.symptoms) {
    j["symptoms"][name] = {{"plcc", m.plcc}, {"srocc", m.srocc}, {"rmse", m.rmse}};
  }
  return j;
}

const char* kPredictionsHeader = "clip_id,nausea,oculomotor,disorientation,total";

}  // namespace

double plcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "plcc");
  check_not_constant(x, y, "plcc");
  return pearson(x, y);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double srocc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "srocc");
  check_not_constant(x, y, "srocc");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double rmse(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 1, "rmse");
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

double LogisticFit::operator()(double x) const {
  const auto& b = beta;
  return (b[0] - b[1]) / (1.0 + std::exp(-(x - b[2]) / std::abs(b[3]))) + b[1];
}

LogisticFit fit_logistic(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 4, "fit_logistic");
  const auto n = static_cast<Eigen::Index>(x.size());
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double var_x = 0.0;
  for (double v : x) var_x += (v - mean_x) * (v - mean_x);
  const double sd_x = std::sqrt(var_x / static_cast<double>(n));

  Eigen::Vector4d b(*std::max_element(y.begin(), y.end()), *std::min_element(y.begin(), y.end()),
                    mean_x, sd_x > 0.0 ? sd_x : 1.0);
  auto residuals = [&](const Eigen::Vector4d& p, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    r.resize(n);
    if (J) J->resize(n, 4);
    const double s = std::abs(p(3));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = (x[static_cast<std::size_t>(i)] - p(2)) / s;
      const double g = 1.0 / (1.0 + std::exp(-u));
      r(i) = (p(0) - p(1)) * g + p(1) - y[static_cast<std::size_t>(i)];
      if (J) {
        const double dg = g * (1.0 - g);
        (*J)(i, 0) = g;
        (*J)(i, 1) = 1.0 - g;
        (*J)(i, 2) = -(p(0) - p(1)) * dg / s;
        (*J)(i, 3) = -(p(0) - p(1)) * dg * u / s * (p(3) < 0.0 ? -1.0 : 1.0);
      }
    }
  };

  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  residuals(b, r, &J);
  double cost = r.squaredNorm();
  double mu = 1e-3;
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::Matrix4d JtJ = J.transpose() * J;
    const Eigen::Vector4d g = J.transpose() * r;
    Eigen::Matrix4d A = JtJ;
    A.diagonal() += mu * JtJ.diagonal().cwiseMax(1e-12);
    const Eigen::Vector4d step = A.ldlt().solve(-g);
    const Eigen::Vector4d candidate = b + step;
    Eigen::VectorXd r_new;
    residuals(candidate, r_new, nullptr);
    const double cost_new = r_new.squaredNorm();
    if (std::isfinite(cost_new) && cost_new < cost) {
      const double improvement = cost - cost_new;
      b = candidate;
      residuals(b, r, &J);
      cost = cost_new;
      mu = std::max(mu / 3.0, 1e-12);
      if (improvement < 1e-14 * (1.0 + cost)) break;
    } else {
      mu *= 4.0;
      if (mu > 1e12) break;
    }
  }
  LogisticFit fit;
  for (int i = 0; i < 4; ++i) fit.beta[static_cast<std::size_t>(i)] = b(i);
  fit.beta[3] = std::abs(fit.beta[3]);
  return fit;
}

EvalReport evaluate_run(const std::map<std::string, PredictedScores>& predictions,
                        const std::map<std::string, NormalizedScores>& labels,
                        const EvalOptions& options) {
  std::vector<std::string> only_pred, only_label;
  for (const auto& [id, _] : predictions) {
    if (!labels.count(id)) only_pred.push_back(id);
  }
  for (const auto& [id, _] : labels) {
    if (!predictions.count(id)) only_label.push_back(id);
  }
  if (!only_pred.empty() || !only_label.empty()) {
    std::string msg = "prediction/label key mismatch;";
    auto list = [&](const char* what, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" ") + what + ":";
      for (const auto& id : ids) msg += " '" + id + "'";
      msg += ";";
    };
    list("missing labels for", only_pred);
    list("missing predictions for", only_label);
    throw ValidationError(msg);
  }
  if (predictions.size() < 2) throw ValidationError("evaluate_run: needs at least 2 clips");

  EvalReport report;
  report.n = static_cast<int>(predictions.size());
  report.fold_id = options.fold_id;
  report.config_digest = options.config_digest;
  for (std::size_t k = 0; k < kSymptomNames.size(); ++k) {
    std::vector<double> pred, label;
    for (const auto& [id, p] : predictions) {
      pred.push_back(component(p, k));
      label.push_back(component(labels.at(id), k));
    }
    MetricSet m;
    if (options.logistic) {
      const auto fit = fit_logistic(pred, label);
      std::vector<double> mapped;
      for (double v : pred) mapped.push_back(fit(v));
      m.plcc = plcc(mapped, label);
    } else {
      m.plcc = plcc(pred, label);
    }
    m.srocc = srocc(pred, label);
    m.rmse = rmse(pred, label);
    report.symptoms[kSymptomNames[k]] = m;
  }
  return report;
}

std::map<std::string, std::map<std::string, MetricSummary>> aggregate_reports(
    std::span<const EvalReport> reports) {
  std::map<std::string, std::map<std::string, MetricSummary>> out;
  if (reports.empty()) return out;
  const double n = static_cast<double>(reports.size());
  for (const char* symptom : kSymptomNames) {
    std::map<std::string, std::vector<double>> values;
    for (const auto& r : reports) {
      const auto& m = r.symptoms.at(symptom);
      values["plcc"].push_back(m.plcc);
      values["srocc"].push_back(m.srocc);
      values["rmse"].push_back(m.rmse);
    }
    for (const auto& [metric, v] : values) {
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
      double ss = 0.0;
      for (double a : v) ss += (a - mean) * (a - mean);
      out[symptom][metric] = MetricSummary{mean, std::sqrt(ss / n)};
    }
  }
  return out;
}

CrossValidation cross_validate(const Manifest& manifest,
                               const std::map<std::string, NormalizedScores>& labels, int k,
                               const RunConfig& cfg, const std::filesystem::path& base_dir,
                               const EvalOptions& options) {
  cfg.validate();
  const auto folds = make_folds(manifest, k, cfg.seed);

  // The test sets must partition the manifest.
  std::set<std::string> seen;
  for (const auto& fold : folds) {
    for (const auto& id : fold.test) {
      if (!seen.insert(id).second) throw ValidationError("fold test sets overlap at '" + id + "'");
    }
  }
  if (seen.size() != manifest.clips.size()) throw ValidationError("fold test sets do not cover the manifest");

  const auto samples = load_samples(manifest, labels, cfg.encoder, base_dir);
  std::map<std::string, const TrainingSample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;

  CrossValidation cv;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<TrainingSample> train;
    for (const auto& id : folds[f].train) train.push_back(*by_id.at(id));
    const auto result = run_pipeline(train, cfg);

    std::map<std::string, PredictedScores> predictions;
    std::map<std::string, NormalizedScores> test_labels;
    for (const auto& id : folds[f].test) {
      predictions[id] = assess(by_id.at(id)->diffs, result.model);
      test_labels[id] = by_id.at(id)->label;
    }
    EvalOptions fold_options = options;
    fold_options.fold_id = static_cast<int>(f);
    fold_options.config_digest = checkpoint_digest(model_to_params(result.model));
    cv.folds.push_back(evaluate_run(predictions, test_labels, fold_options));
  }
  cv.aggregate = aggregate_reports(cv.folds);
  return cv;
}

std::string report_to_json(const EvalReport& report) { return report_json(report).dump(2) + "\n"; }

std::string crossval_to_json(const CrossValidation& cv) {
  json j;
  j["folds"] = json::array();
  for (const auto& r : cv.folds) j["folds"].push_back(report_json(r));
  j["aggregate"] = json::object();
  for (const auto& [symptom, metrics] : cv.aggregate) {
    for (const auto& [metric, s] : metrics) {
      j["aggregate"][symptom][metric] = {{"mean", s.mean}, {"std", s.std}};
    }
  }
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    EvalReport r;
    r.n = j.at("n").get<int>();
    if (!j.at("fold_id").is_null()) r.fold_id = j.at("fold_id").get<int>();
    r.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& [name, m] : j.at("symptoms").items()) {
      r.symptoms[name] = MetricSet{m.at("plcc").get<double>(), m.at("srocc").get<double>(),
                                   m.at("rmse").get<double>()};
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed report JSON: ") + e.what());
  }
}

CrossValidation crossval_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed cross-validation JSON: ") + e.what());
  }
  CrossValidation cv;
  try {
    for (const auto& fold : j.at("folds")) cv.folds.push_back(report_from_json(fold.dump()));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed cross-validation JSON: ") + e.what());
  }
  cv.aggregate = aggregate_reports(cv.folds);
  return cv;
}

std::vector<EvalReport> reports_from_csv(const std::string& text) {
  const auto rows = detail::lines(text);
  if (rows.empty() || rows[0] != "fold,symptom,metric,value") {
    throw ParseError("report CSV header must be fold,symptom,metric,value");
  }
  std::map<std::string, EvalReport> by_fold;
  std::vector<std::string> order;
  for (std::size_t row = 1; row < rows.size(); ++row) {
    const auto cells = detail::split(rows[row], ',');
    const std::string where = "report CSV line " + std::to_string(row + 1);
    if (cells.size() != 4) throw ParseError(where + ": expected 4 columns");
    const std::string fold(cells[0]);
    if (!by_fold.count(fold)) {
      order.push_back(fold);
      if (!fold.empty()) by_fold[fold].fold_id = detail::parse_int(cells[0], where);
    }
    auto& m = by_fold[fold].symptoms[std::string(cells[1])];
    const double value = detail::parse_double(cells[3], where);
    if (cells[2] == "plcc") {
      m.plcc = value;
    } else if (cells[2] == "srocc") {
      m.srocc = value;
    } else if (cells[2] == "rmse") {
      m.rmse = value;
    } else {
      throw ParseError(where + ": unknown metric '" + std::string(cells[2]) + "'");
    }
  }
  std::vector<EvalReport> out;
  for (const auto& fold : order) out.push_back(by_fold.at(fold));
  return out;
}

std::string reports_to_csv(std::span<const EvalReport> reports) {
  std::string out = "fold,symptom,metric,value\n";
  for (const auto& r : reports) {
    const std::string fold = r.fold_id ? std::to_string(*r.fold_id) : "";
    for (const auto& [symptom, m] : r.symptoms) {
      out += fold + ',' + symptom + ",plcc," + detail::format_double(m.plcc) + '\n';
      out += fold + ',' + symptom + ",srocc," + detail::format_double(m.srocc) + '\n';
      out += fold + ',' + symptom + ",rmse," + detail::format_double(m.rmse) + '\n';
    }
  }
  return out;
}

std::map<std::string, PredictedScores> parse_predictions_csv(const std::string& text) {
  const auto rows = detail::lines(text);
  if (rows.empty() || rows[0] != kPredictionsHeader) {
    throw ParseError(std::string("predictions CSV header must be ") + kPredictionsHeader);
  }
  std::map<std::string, PredictedScores> out;
  for (std::size_t row = 1; row < rows.size(); ++row) {
    const auto cells = detail::split(rows[row], ',');
    const std::string where = "predictions CSV line " + std::to_string(row + 1);
    if (cells.size() != 5) throw ParseError(where + ": expected 5 columns");
    PredictedScores s{detail::parse_double(cells[1], where), detail::parse_double(cells[2], where),
                      detail::parse_double(cells[3], where), detail::parse_double(cells[4], where)};
    const std::string id(cells[0]);
    if (!out.emplace(id, s).second) throw ValidationError(where + ": duplicate clip id '" + id + "'");
  }
  return out;
}

std::map<std::string, PredictedScores> read_predictions_csv(const std::filesystem::path& path) {
  return parse_predictions_csv(detail::read_text_file(path));
}

std::string format_predictions_csv(const std::map<std::string, PredictedScores>& predictions) {
  std::string out = std::string(kPredictionsHeader) + '\n';
  for (const auto& [id, s] : predictions) {
    out += id + ',' + detail::format_double(s.nausea) + ',' + detail::format_double(s.oculomotor) +
           ',' + detail::format_double(s.disorientation) + ',' + detail::format_double(s.total) + '\n';
  }
  return out;
}

}  // namespace vrsa
