#include "report_render.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <vector>

#include "vrsa/errors.hpp"

namespace vrsa::report {

namespace {

std::string fmt(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string text(double x, double y, const std::string& s, const char* anchor = "start",
                 const char* weight = "normal") {
  return "<text x=\"" + fmt(x, 1) + "\" y=\"" + fmt(y, 1) + "\" text-anchor=\"" + anchor +
         "\" font-weight=\"" + weight + "\">" + escape(s) + "</text>\n";
}

double component(const PredictedScores& s, std::size_t k) {
  const double v[] = {s.nausea, s.oculomotor, s.disorientation, s.total};
  return v[k];
}

double component(const NormalizedScores& s, std::size_t k) {
  const double v[] = {s.nausea, s.oculomotor, s.disorientation, s.total};
  return v[k];
}

}  // namespace

std::string metrics_table_svg(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ValidationError("report: nothing to render");
  const char* metrics[] = {"plcc", "srocc", "rmse"};
  const bool summary = reports.size() > 1;

  std::vector<std::string> headers;
  for (const auto& r : reports) headers.push_back(r.fold_id ? "fold " + std::to_string(*r.fold_id) : "run");
  if (summary) headers.push_back("mean ± std");

  const double label_w = 130, col_w = summary ? 120 : 90, row_h = 24;
  const double group_w = col_w * 3;
  const double width = label_w + group_w * static_cast<double>(headers.size()) + 20;
  const double height = row_h * (2 + kSymptomNames.size()) + 40;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, 0) << "\" height=\""
      << fmt(height, 0) << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  double y = 20;
  for (std::size_t g = 0; g < headers.size(); ++g) {
    svg << text(label_w + group_w * g + group_w / 2, y, headers[g], "middle", "bold");
  }
  y += row_h;
  svg << text(10, y, "symptom", "start", "bold");
  for (std::size_t g = 0; g < headers.size(); ++g) {
    for (int m = 0; m < 3; ++m) {
      svg << text(label_w + group_w * g + col_w * (m + 0.5), y, metrics[m], "middle", "bold");
    }
  }
  svg << "<line x1=\"5\" x2=\"" << fmt(width - 5, 0) << "\" y1=\"" << fmt(y + 7, 1) << "\" y2=\""
      << fmt(y + 7, 1) << "\" stroke=\"black\"/>\n";

  const auto aggregate = summary ? aggregate_reports(reports)
                                 : std::map<std::string, std::map<std::string, MetricSummary>>{};
  for (const char* symptom : kSymptomNames) {
    y += row_h;
    svg << text(10, y, symptom);
    for (std::size_t g = 0; g < reports.size(); ++g) {
      const auto it = reports[g].symptoms.find(symptom);
      if (it == reports[g].symptoms.end()) continue;
      const double values[] = {it->second.plcc, it->second.srocc, it->second.rmse};
      for (int m = 0; m < 3; ++m) {
        svg << text(label_w + group_w * g + col_w * (m + 0.5), y, fmt(values[m]), "middle");
      }
    }
    if (summary) {
      const auto& a = aggregate.at(symptom);
      for (int m = 0; m < 3; ++m) {
        const auto& s = a.at(metrics[m]);
        svg << text(label_w + group_w * reports.size() + col_w * (m + 0.5), y,
                    fmt(s.mean) + " ± " + fmt(s.std), "middle");
      }
    }
  }
  y += row_h;
  std::string footer = "n = " + std::to_string(reports.front().n);
  if (!reports.front().config_digest.empty()) footer += ", model " + reports.front().config_digest;
  svg << text(10, y, footer);
  svg << "</svg>\n";
  return svg.str();
}

std::string scatter_svg(const std::map<std::string, PredictedScores>& predictions,
                        const std::map<std::string, NormalizedScores>& labels) {
  const auto report = evaluate_run(predictions, labels);
  const double panel = 260, margin = 40, gap = 30;
  const double width = 2 * panel + 2 * margin + gap, height = width + 10;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, 0) << "\" height=\""
      << fmt(height, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < kSymptomNames.size(); ++k) {
    const double x0 = margin + (k % 2) * (panel + gap);
    const double y0 = margin + (k / 2) * (panel + gap + 10);
    auto px = [&](double v) { return x0 + std::clamp(v, 0.0, 1.0) * panel; };
    auto py = [&](double v) { return y0 + panel - std::clamp(v, 0.0, 1.0) * panel; };

    const auto& m = report.symptoms.at(kSymptomNames[k]);
    svg << text(x0, y0 - 8,
                std::string(kSymptomNames[k]) + "  PLCC " + fmt(m.plcc) + "  SROCC " + fmt(m.srocc),
                "start", "bold");
    svg << "<rect x=\"" << fmt(x0, 1) << "\" y=\"" << fmt(y0, 1) << "\" width=\"" << fmt(panel, 0)
        << "\" height=\"" << fmt(panel, 0) << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << fmt(px(0), 1) << "\" y1=\"" << fmt(py(0), 1) << "\" x2=\"" << fmt(px(1), 1)
        << "\" y2=\"" << fmt(py(1), 1) << "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";
    for (const auto& [id, p] : predictions) {
      svg << "<circle cx=\"" << fmt(px(component(labels.at(id), k)), 1) << "\" cy=\""
          << fmt(py(component(p, k)), 1) << "\" r=\"3\" fill=\"#1f77b4\" fill-opacity=\"0.7\"><title>"
          << escape(id) << "</title></circle>\n";
    }
    svg << text(x0 + panel / 2, y0 + panel + 16, "subjective", "middle");
    svg << "<text x=\"" << fmt(x0 - 8, 1) << "\" y=\"" << fmt(y0 + panel / 2, 1)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << fmt(x0 - 8, 1) << ' '
        << fmt(y0 + panel / 2, 1) << ")\">predicted</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace vrsa::report
