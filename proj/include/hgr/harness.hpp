#ifndef HGR_HARNESS_HPP_
#define HGR_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgr/baseline_dissim.hpp"
#include "hgr/core_model.hpp"
#include "hgr/energy_detect.hpp"
#include "hgr/eval.hpp"
#include "hgr/online_fsm.hpp"
#include "hgr/recognizers.hpp"
#include "hgr/trajectory_hist.hpp"

namespace hgr {

enum class Method { Baseline, UDeepGRU, TSGR, Fsm, Energy };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

/// Events of one pipeline over a set of sequences with its timing.
struct PipelineRun {
  std::string method;
  std::vector<DetectionEvent> events;
  double total_seconds = 0.0;
  std::size_t classifications = 0;
  double mean_classification_seconds = 0.0;
};

/// Scores a run and copies its timing into the report.
MetricsReport score_run(const PipelineRun& run, const Dataset& truth);

// ---------------------------------------------------------------------------
// Baseline

BaselineModel train_baseline(const Dataset& data, const DictionaryConfig& dictionary, const SvmTrainConfig& svm);

PipelineRun run_baseline(const BaselineModel& model, std::span<const SkeletonSequence> sequences,
                         const SlidingConfig& config = {});

struct RegSelection {
  double reg = 0.0;
  std::vector<std::pair<double, double>> scores;  // (reg, validation mean Jaccard index)
};

/// Holds out `validation_sequences` sequences (seeded by svm.seed), trains the
/// SVMs on the rest once per candidate regulariser and keeps the one with the
/// best validation mean Jaccard index. Ties keep the earliest candidate.
RegSelection select_baseline_reg(const Dataset& data, std::span<const double> candidates,
                                 const DictionaryConfig& dictionary, SvmTrainConfig svm,
                                 std::size_t validation_sequences = 18);

// ---------------------------------------------------------------------------
// Frame labellers

/// Per-frame argmax turned directly into events, without post-processing.
PipelineRun run_argmax(const Recognizer& r, std::span<const SkeletonSequence> sequences);
PipelineRun run_argmax(std::span<const Recognizer> ensemble, std::span<const SkeletonSequence> sequences);

/// Per-frame labels fed frame by frame through the online state machine.
PipelineRun run_fsm(const Recognizer& r, std::span<const SkeletonSequence> sequences, const FsmConfig& config = {});
PipelineRun run_fsm(std::span<const Recognizer> ensemble, std::span<const SkeletonSequence> sequences,
                    const FsmConfig& config = {});

// ---------------------------------------------------------------------------
// Energy candidates

/// Mean per-frame probabilities of a recognizer over the segment.
SegmentClassifier recognizer_segment_classifier(const Recognizer& r);

/// Refines the base classifier's best gesture with trajectory templates; the
/// refined class receives the combined score.
SegmentClassifier with_histogram(SegmentClassifier base, const ClassTemplates& templates, double lambda);

/// Templates from the annotated trajectory-class gestures of a dataset.
ClassTemplates build_templates(const Dataset& data, std::size_t bins = kDefaultHistogramBins);

struct EnergyPipelineConfig {
  std::size_t window_length = 40;
  std::size_t stride = 10;
  CandidateFilterConfig filter;
  double lambda = 0.5;
};

/// `templates` may be null to skip the histogram refinement.
PipelineRun run_energy(const SegmentClassifier& classifier, const ClassTemplates* templates,
                       std::span<const SkeletonSequence> sequences, const EnergyPipelineConfig& config);

// ---------------------------------------------------------------------------
// Grid search

struct GridSpec {
  std::vector<double> alpha{0.5};
  std::vector<double> beta{0.5};
  std::vector<double> lambda{0.5};
  std::vector<std::optional<double>> epsilon{std::nullopt};  // nullopt: per-sequence default
  std::vector<std::size_t> stride{10};
  std::vector<std::size_t> window_length{40};

  std::size_t size() const;
};

struct GridPoint {
  double alpha = 0.5;
  double beta = 0.5;
  double lambda = 0.5;
  std::optional<double> epsilon;
  std::size_t stride = 10;
  std::size_t window_length = 40;
};

struct GridRow {
  GridPoint point;
  double mean_jaccard = 0.0;
  double detection_rate = 0.0;
  double fp_rate = 0.0;
};

struct GridResult {
  GridPoint best;
  double best_score = 0.0;
  std::vector<GridRow> table;  // in enumeration order: L, stride, epsilon, lambda, alpha, beta
};

/// Exhaustive search scored by mean Jaccard index on the validation set.
/// Ties keep the earliest point. Classifier outputs are computed once per
/// distinct segment. Throws Error when any axis is empty.
GridResult grid_search(const GridSpec& spec, const Dataset& validation, const SegmentClassifier& classifier,
                       const ClassTemplates* templates, const CandidateFilterConfig& base = {});

std::string grid_table_csv(const GridResult& result);

// ---------------------------------------------------------------------------
// Dataset import

/// Maps an external recording format onto the toolkit's data model.
class DatasetImporter {
 public:
  virtual ~DatasetImporter() = default;
  virtual std::string_view format() const = 0;
  /// Reads sequences and annotations rooted at `root`.
  virtual Dataset import(const std::filesystem::path& root) const = 0;
};

/// The toolkit's own layout: `<root>/sequences/*.skel` and `<root>/annotations.txt`.
class NativeImporter final : public DatasetImporter {
 public:
  std::string_view format() const override { return "native"; }
  Dataset import(const std::filesystem::path& root) const override;
};

/// Known formats: "native". Throws Error for anything else.
std::unique_ptr<DatasetImporter> make_importer(std::string_view format);

}  // namespace hgr

#endif  // HGR_HARNESS_HPP_
