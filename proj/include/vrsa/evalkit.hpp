#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vrsa/corpus.hpp"
#include "vrsa/predictor.hpp"
#include "vrsa/ssq.hpp"

namespace vrsa {

double plcc(std::span<const double> x, std::span<const double> y);
double srocc(std::span<const double> x, std::span<const double> y);
double rmse(std::span<const double> x, std::span<const double> y);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> x);

/// f(x) = (b1 - b2) / (1 + exp(-(x - b3) / |b4|)) + b2
struct LogisticFit {
  std::array<double, 4> beta{};
  double operator()(double x) const;
};

/// Levenberg-Marquardt fit of the 4-parameter logistic mapping x onto y.
LogisticFit fit_logistic(std::span<const double> x, std::span<const double> y);

inline constexpr std::array<const char*, 4> kSymptomNames = {"nausea", "oculomotor",
                                                              "disorientation", "total"};

struct MetricSet {
  double plcc = 0.0;
  double srocc = 0.0;
  double rmse = 0.0;
};

struct EvalReport {
  std::map<std::string, MetricSet> symptoms;
  int n = 0;
  std::optional<int> fold_id;
  std::string config_digest;
};

struct EvalOptions {
  /// Map predictions through a fitted 4-parameter logistic before PLCC.
  bool logistic = false;
  std::optional<int> fold_id;
  std::string config_digest;
};

/// Throws ValidationError listing ids present on only one side.
EvalReport evaluate_run(const std::map<std::string, PredictedScores>& predictions,
                        const std::map<std::string, NormalizedScores>& labels,
                        const EvalOptions& options = {});

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct CrossValidation {
  std::vector<EvalReport> folds;
  /// symptom -> metric ("plcc", "srocc", "rmse") -> summary over folds.
  std::map<std::string, std::map<std::string, MetricSummary>> aggregate;
};

struct RunConfig;

CrossValidation cross_validate(const Manifest& manifest,
                               const std::map<std::string, NormalizedScores>& labels, int k,
                               const RunConfig& cfg, const std::filesystem::path& base_dir = {},
                               const EvalOptions& options = {});

std::map<std::string, std::map<std::string, MetricSummary>> aggregate_reports(
    std::span<const EvalReport> reports);

std::string report_to_json(const EvalReport& report);
std::string crossval_to_json(const CrossValidation& cv);
EvalReport report_from_json(const std::string& text);
CrossValidation crossval_from_json(const std::string& text);
/// Columns fold,symptom,metric,value; fold is empty for single runs.
std::string reports_to_csv(std::span<const EvalReport> reports);
std::vector<EvalReport> reports_from_csv(const std::string& text);

// Predictions CSV: clip_id,nausea,oculomotor,disorientation,total
std::map<std::string, PredictedScores> parse_predictions_csv(const std::string& text);
std::map<std::string, PredictedScores> read_predictions_csv(const std::filesystem::path& path);
std::string format_predictions_csv(const std::map<std::string, PredictedScores>& predictions);

}  // namespace vrsa
