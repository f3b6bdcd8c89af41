#ifndef HGR_EVAL_HPP_
#define HGR_EVAL_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hgr/core_model.hpp"

namespace hgr {

/// Binary occupancy of one class over a sequence's frames.
using FrameLabelVector = std::vector<std::uint8_t>;

FrameLabelVector rasterize(std::span<const GestureSpan> spans, std::size_t sequence_length, Label label);

/// |GT ∩ P| / |GT ∪ P| over frames of one sequence for one class; 1 when both
/// are empty. Spans of other classes are ignored.
double jaccard_index(std::span<const GestureSpan> gt, std::span<const GestureSpan> pred,
                     std::size_t sequence_length, Label label);

/// Frame intersection-over-union of two intervals.
double temporal_iou(const GestureSpan& a, const GestureSpan& b);

/// A prediction corresponds to a ground-truth span when labels agree and the
/// temporal IoU is strictly above this value.
inline constexpr double kMatchIou = 0.5;

struct ClassMetrics {
  double jaccard = 0.0;
  double detection_rate = 0.0;
  double fp_rate = 0.0;
  std::size_t gt_count = 0;
  std::size_t matched = 0;
  std::size_t unmatched_pred = 0;
  std::size_t jaccard_samples = 0;  // sequences in which the class appears
};

struct MetricsReport {
  std::string name;
  std::array<ClassMetrics, kGestureCount> per_class{};
  double mean_jaccard = 0.0;
  double mean_detection_rate = 0.0;
  double mean_fp_rate = 0.0;
  std::size_t gt_count = 0;
  std::size_t matched = 0;
  std::size_t unmatched_pred = 0;
  double total_seconds = 0.0;
  double mean_classification_seconds = 0.0;
};

/// Greedy one-to-one matching: predictions are visited in temporal order and
/// each claims the earliest unmatched same-class ground-truth span with IoU
/// above kMatchIou. Returns for each prediction the index of its matched
/// ground-truth span or -1.
std::vector<long> greedy_match(std::span<const GestureSpan> gt, std::span<const GestureSpan> pred);

/// Scores predictions against ground truth. `sequence_lengths` maps every
/// sequence id to its frame count; spans on unknown ids raise Error.
MetricsReport match_and_score(std::span<const GestureSpan> gt, std::span<const GestureSpan> pred,
                              const std::map<std::string, std::size_t>& sequence_lengths);

MetricsReport match_and_score(std::span<const GestureSpan> gt, std::span<const GestureSpan> pred,
                              std::span<const SkeletonSequence> sequences);

// ---------------------------------------------------------------------------
// Reports

/// `class,jaccard,det_rate,fp_rate,gt_count,matched,unmatched_pred`, one row
/// per gesture class plus a MEAN row.
std::string report_csv(const MetricsReport& report);
/// JSON mirror of the CSV with an aggregate block and timing for each run.
std::string report_json(std::span<const MetricsReport> reports);
/// One summary row per run: method, det rate, fp rate, jaccard, times.
std::string summary_table(std::span<const MetricsReport> reports);

/// Writes `<stem>.csv` and `<stem>.json`, creating missing parent directories.
void write_report(const MetricsReport& report, const std::filesystem::path& path_stem);

}  // namespace hgr

#endif  // HGR_EVAL_HPP_
