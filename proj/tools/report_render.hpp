#pragma once

#include <map>
#include <span>
#include <string>

#include "vrsa/evalkit.hpp"

namespace vrsa::report {

/// Per-symptom metric table; one column group per fold, plus mean +- std
/// when there is more than one report.
std::string metrics_table_svg(std::span<const EvalReport> reports);

/// 2x2 grid of predicted-vs-subjective scatter plots, one per symptom.
std::string scatter_svg(const std::map<std::string, PredictedScores>& predictions,
                        const std::map<std::string, NormalizedScores>& labels);

}  // namespace vrsa::report
