#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vrsa {

inline constexpr int kSsqItemCount = 16;

/// One subject's Simulator Sickness Questionnaire answers for one clip.
/// Items follow the Kennedy ordering (1 general discomfort ... 16 burping),
/// each rated 0 (none) to 3 (severe).
struct SSQRecord {
  std::string clip_id;
  std::string subject_id;
  std::vector<int> items;

  bool operator==(const SSQRecord&) const = default;
};

/// Weighted SSQ subscale scores in questionnaire units.
struct SymptomScores {
  double nausea = 0.0;
  double oculomotor = 0.0;
  double disorientation = 0.0;
  double total = 0.0;
};

/// Subscale scores rescaled to [0, 1]; the regression target.
struct NormalizedScores {
  double nausea = 0.0;
  double oculomotor = 0.0;
  double disorientation = 0.0;
  double total = 0.0;

  bool operator==(const NormalizedScores&) const = default;
};

namespace ssq {
inline constexpr double kNauseaWeight = 9.54;
inline constexpr double kOculomotorWeight = 7.58;
inline constexpr double kDisorientationWeight = 13.92;
inline constexpr double kTotalWeight = 3.74;
inline constexpr int kMaxRawSubscale = 21;  // 7 items x 3
}  // namespace ssq

/// Throws ValidationError unless the record has 16 items in {0,1,2,3}.
void validate_record(const SSQRecord& record);

SymptomScores score_ssq(const SSQRecord& record);

/// Divides each score by its theoretical maximum and clamps to [0, 1].
NormalizedScores normalize_scores(const SymptomScores& scores);

/// Component-wise mean over subjects. With trim_fraction > 0 the
/// floor(trim_fraction * n) lowest and highest values of each component are
/// dropped before averaging.
SymptomScores aggregate_subjects(std::span<const SSQRecord> records, double trim_fraction = 0.0);

/// Per-clip normalized labels from raw ratings (mean over subjects).
std::map<std::string, NormalizedScores> labels_from_ratings(std::span<const SSQRecord> ratings,
                                                            double trim_fraction = 0.0);

// Ratings CSV: clip_id,subject_id,i1,...,i16
std::vector<SSQRecord> parse_ratings_csv(const std::string& text);
std::vector<SSQRecord> read_ratings_csv(const std::filesystem::path& path);
std::string format_ratings_csv(std::span<const SSQRecord> records);

// Labels CSV: clip_id,nausea,oculomotor,disorientation,total
std::map<std::string, NormalizedScores> parse_labels_csv(const std::string& text);
std::map<std::string, NormalizedScores> read_labels_csv(const std::filesystem::path& path);
std::string format_labels_csv(const std::map<std::string, NormalizedScores>& labels);

}  // namespace vrsa
