#ifndef HGR_BASELINE_DISSIM_HPP_
#define HGR_BASELINE_DISSIM_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hgr/core_model.hpp"
#include "hgr/features.hpp"

namespace hgr {

inline constexpr std::size_t kResampleSteps = 20;
/// Dissimilarity components per representation gesture: palm trajectory,
/// nine articulation traces, palm path length and palm speed.
inline constexpr std::size_t kDissimilarityBlock = 12;
inline constexpr std::size_t kDefaultDetectionStride = 6;

/// The quantities of a resampled window that dissimilarities compare.
struct GestureSignature {
  std::array<Vec3, kResampleSteps> palm;
  std::array<std::array<double, kArticulationTraces>, kResampleSteps> articulation;
  std::array<double, kResampleSteps - 1> speed;  // per-step palm displacement norm
  double path_length = 0.0;
};

/// Requires exactly kResampleSteps frames.
GestureSignature gesture_signature(FrameView resampled);

struct DictionaryEntry {
  Label label = Label::NON_GESTURE;
  FrameWindow window;  // kResampleSteps frames
  std::string sequence_id;
  std::size_t source_start = 0;
  std::size_t source_length = 0;
};

struct GestureDictionary {
  std::vector<DictionaryEntry> entries;
  std::vector<std::size_t> representation;  // indices into entries
  std::vector<std::size_t> training;        // the remaining indices
  std::array<double, kGestureCount> class_mean_length{};
  std::vector<GestureSignature> rep_signatures;

  std::size_t rep_count() const { return representation.size(); }
  std::size_t feature_width() const { return kDissimilarityBlock * representation.size(); }
  /// Window length l(c) in frames used when scanning for class c.
  std::size_t window_length(Label c) const;
  /// Recomputes rep_signatures from the representation entries.
  void refresh_signatures();
};

struct DictionaryConfig {
  std::optional<std::size_t> non_gesture_count;  // unset: as many as gestures
  std::uint64_t seed = 1;
  double representation_fraction = 0.5;
  // Share of the non-gesture crops taken anywhere in a sequence as long as
  // they overlap every gesture with IoU below straddle_max_iou; the rest come
  // from stretches free of gestures.
  double straddle_fraction = 0.75;
  double straddle_max_iou = 0.3;
};

/// Crops and resamples every annotated gesture, samples non-gesture windows
/// from unannotated stretches with lengths drawn from the gesture lengths,
/// and splits each class in half (seeded) into representation and training
/// entries.
GestureDictionary build_dictionary(std::span<const SkeletonSequence> sequences,
                                   std::span<const AnnotationSpan> annotations, const DictionaryConfig& config);

/// 12 components per representation gesture; `query` must be resampled.
std::vector<double> dissimilarity_vector(FrameView query, const GestureDictionary& dict);
std::vector<double> dissimilarity_vector(const GestureSignature& query, std::span<const GestureSignature> reps);

struct LinearSvmModel {
  Label label = Label::NON_GESTURE;
  double bias = 0.0;
  std::vector<double> weights;

  double decision(std::span<const double> x) const;
};

struct SvmTrainConfig {
  std::size_t epochs = 40;
  double lr = 0.05;
  double reg = 1e-3;
  std::uint64_t seed = 1;
  bool balance_classes = false;  // weight hinge terms by inverse class frequency
  bool average = true;  // return the mean iterate of the second half of training
};

/// L2-regularised hinge loss minimised by seeded stochastic subgradient
/// descent. Labels are +1 / -1. Features are standardised internally and the
/// scaling is folded back into the returned weights.
LinearSvmModel train_linear_svm(std::span<const std::vector<double>> x, std::span<const int> y,
                                const SvmTrainConfig& config, Label label = Label::NON_GESTURE);

/// Mean hinge loss and accuracy of a model on a labelled set.
struct SvmFit {
  double hinge = 0.0;
  double accuracy = 0.0;
};
SvmFit evaluate_svm(const LinearSvmModel& model, std::span<const std::vector<double>> x, std::span<const int> y);

/// One-vs-rest SVM per gesture class on the training entries. Throws Error
/// naming a class without positives, or when there are no negatives.
std::vector<LinearSvmModel> train_svms(const GestureDictionary& dict, const SvmTrainConfig& config);

struct SlidingConfig {
  std::size_t stride = kDefaultDetectionStride;
  double threshold = 0.0;
};

/// A window hit of one class: the window [end - length + 1, end] scored above threshold.
struct WindowHit {
  Label label;
  std::size_t end;
  std::size_t length;
  double margin;
};

/// Merges runs of consecutive hits of a class into events, then resolves
/// overlaps between classes by keeping the larger margin.
std::vector<DetectionEvent> merge_hits(std::vector<WindowHit> hits, std::size_t stride, const std::string& sequence_id);

std::vector<DetectionEvent> detect_sliding(const SkeletonSequence& seq, std::span<const LinearSvmModel> models,
                                           const GestureDictionary& dict, const SlidingConfig& config = {});

struct BaselineModel {
  GestureDictionary dictionary;
  std::vector<LinearSvmModel> svms;

  /// Writes `svms.txt` (`class;bias;w0,w1,...`) and `dictionary.txt`.
  void save(const std::filesystem::path& dir) const;
  static BaselineModel load(const std::filesystem::path& dir);
};

std::string serialize_svms(std::span<const LinearSvmModel> models);
std::vector<LinearSvmModel> parse_svms(std::string_view text, const std::string& source = "svms");

}  // namespace hgr

#endif  // HGR_BASELINE_DISSIM_HPP_
