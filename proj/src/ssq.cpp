#include "vrsa/ssq.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "text_util.hpp"
#include "vrsa/errors.hpp"

namespace vrsa {
namespace {

// 1-based Kennedy item numbers per subscale.
constexpr std::array<int, 7> kNauseaItems = {1, 6, 7, 8, 9, 15, 16};
constexpr std::array<int, 7> kOculomotorItems = {1, 2, 3, 4, 5, 9, 11};
constexpr std::array<int, 7> kDisorientationItems = {5, 8, 10, 11, 12, 13, 14};

int raw_sum(const SSQRecord& r, const std::array<int, 7>& members) {
  int sum = 0;
  for (int item : members) sum += r.items[static_cast<std::size_t>(item - 1)];
  return sum;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::string record_name(const SSQRecord& r) {
  return "rating (clip '" + r.clip_id + "', subject '" + r.subject_id + "')";
}

double trimmed_mean(std::vector<double> values, double trim_fraction) {
  std::sort(values.begin(), values.end());
  const auto drop = static_cast<std::size_t>(std::floor(trim_fraction * values.size()));
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = drop; i + drop < values.size(); ++i) {
    sum += values[i];
    ++count;
  }
  return sum / static_cast<double>(count);
}

constexpr const char* kLabelsHeader = "clip_id,nausea,oculomotor,disorientation,total";

}  // namespace

void validate_record(const SSQRecord& record) {
  if (record.items.size() != kSsqItemCount) {
    throw ValidationError(record_name(record) + " has " + std::to_string(record.items.size()) +
                          " items, expected 16");
  }
  for (std::size_t i = 0; i < record.items.size(); ++i) {
    const int v = record.items[i];
    if (v < 0 || v > 3) {
      throw ValidationError(record_name(record) + " item " + std::to_string(i + 1) + " = " +
                            std::to_string(v) + " outside {0,1,2,3}");
    }
  }
}

SymptomScores score_ssq(const SSQRecord& record) {
  validate_record(record);
  const int n = raw_sum(record, kNauseaItems);
  const int o = raw_sum(record, kOculomotorItems);
  const int d = raw_sum(record, kDisorientationItems);
  return SymptomScores{ssq::kNauseaWeight * n, ssq::kOculomotorWeight * o,
                       ssq::kDisorientationWeight * d, ssq::kTotalWeight * (n + o + d)};
}

NormalizedScores normalize_scores(const SymptomScores& s) {
  constexpr double raw_max = ssq::kMaxRawSubscale;
  return NormalizedScores{clamp01(s.nausea / (ssq::kNauseaWeight * raw_max)),
                          clamp01(s.oculomotor / (ssq::kOculomotorWeight * raw_max)),
                          clamp01(s.disorientation / (ssq::kDisorientationWeight * raw_max)),
                          clamp01(s.total / (ssq::kTotalWeight * 3.0 * raw_max))};
}

SymptomScores aggregate_subjects(std::span<const SSQRecord> records, double trim_fraction) {
  if (records.empty()) throw ValidationError("aggregate_subjects: no ratings to aggregate");
  if (trim_fraction < 0.0 || trim_fraction >= 0.5) {
    throw ValidationError("aggregate_subjects: trim fraction must be in [0, 0.5)");
  }
  std::vector<double> n, o, d, t;
  for (const auto& r : records) {
    const auto s = score_ssq(r);
    n.push_back(s.nausea);
    o.push_back(s.oculomotor);
    d.push_back(s.disorientation);
    t.push_back(s.total);
  }
  return SymptomScores{trimmed_mean(n, trim_fraction), trimmed_mean(o, trim_fraction),
                       trimmed_mean(d, trim_fraction), trimmed_mean(t, trim_fraction)};
}

std::map<std::string, NormalizedScores> labels_from_ratings(std::span<const SSQRecord> ratings,
                                                            double trim_fraction) {
  std::map<std::string, std::vector<SSQRecord>> by_clip;
  for (const auto& r : ratings) by_clip[r.clip_id].push_back(r);
  std::map<std::string, NormalizedScores> out;
  for (const auto& [id, records] : by_clip) {
    out[id] = normalize_scores(aggregate_subjects(records, trim_fraction));
  }
  return out;
}

std::vector<SSQRecord> parse_ratings_csv(const std::string& text) {
  const auto rows = detail::lines(text);
  if (rows.empty()) throw ParseError("ratings CSV is empty");
  const auto header = detail::split(rows[0], ',');
  if (header.size() != 18 || header[0] != "clip_id" || header[1] != "subject_id") {
    throw ParseError("ratings CSV header must be clip_id,subject_id,i1,...,i16");
  }
  for (int i = 1; i <= kSsqItemCount; ++i) {
    if (header[static_cast<std::size_t>(i + 1)] != "i" + std::to_string(i)) {
      throw ParseError("ratings CSV header column " + std::to_string(i + 2) + " must be i" +
                       std::to_string(i));
    }
  }
  std::vector<SSQRecord> out;
  for (std::size_t row = 1; row < rows.size(); ++row) {
    const auto cells = detail::split(rows[row], ',');
    const std::string where = "ratings CSV line " + std::to_string(row + 1);
    if (cells.size() != 18) throw ParseError(where + ": expected 18 columns");
    SSQRecord r{std::string(cells[0]), std::string(cells[1]), {}};
    for (std::size_t i = 2; i < cells.size(); ++i) {
      r.items.push_back(static_cast<int>(detail::parse_int(cells[i], where)));
    }
    validate_record(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SSQRecord> read_ratings_csv(const std::filesystem::path& path) {
  return parse_ratings_csv(detail::read_text_file(path));
}

std::string format_ratings_csv(std::span<const SSQRecord> records) {
  std::string out = "clip_id,subject_id";
  for (int i = 1; i <= kSsqItemCount; ++i) out += ",i" + std::to_string(i);
  out += '\n';
  for (const auto& r : records) {
    out += r.clip_id + ',' + r.subject_id;
    for (int v : r.items) out += ',' + std::to_string(v);
    out += '\n';
  }
  return out;
}

std::map<std::string, NormalizedScores> parse_labels_csv(const std::string& text) {
  const auto rows = detail::lines(text);
  if (rows.empty() || rows[0] != kLabelsHeader) {
    throw ParseError(std::string("labels CSV header must be ") + kLabelsHeader);
  }
  std::map<std::string, NormalizedScores> out;
  for (std::size_t row = 1; row < rows.size(); ++row) {
    const auto cells = detail::split(rows[row], ',');
    const std::string where = "labels CSV line " + std::to_string(row + 1);
    if (cells.size() != 5) throw ParseError(where + ": expected 5 columns");
    NormalizedScores s{detail::parse_double(cells[1], where), detail::parse_double(cells[2], where),
                       detail::parse_double(cells[3], where), detail::parse_double(cells[4], where)};
    for (double v : {s.nausea, s.oculomotor, s.disorientation, s.total}) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(where + ": label outside [0,1]");
    }
    const std::string id(cells[0]);
    if (!out.emplace(id, s).second) throw ValidationError(where + ": duplicate clip id '" + id + "'");
  }
  return out;
}

std::map<std::string, NormalizedScores> read_labels_csv(const std::filesystem::path& path) {
  return parse_labels_csv(detail::read_text_file(path));
}

std::string format_labels_csv(const std::map<std::string, NormalizedScores>& labels) {
  std::string out = std::string(kLabelsHeader) + '\n';
  for (const auto& [id, s] : labels) {
    out += id + ',' + detail::format_double(s.nausea) + ',' + detail::format_double(s.oculomotor) +
           ',' + detail::format_double(s.disorientation) + ',' + detail::format_double(s.total) + '\n';
  }
  return out;
}

}  // namespace vrsa
