#ifndef HGR_RECOGNIZERS_HPP_
#define HGR_RECOGNIZERS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgr/core_model.hpp"
#include "hgr/features.hpp"
#include "hgr/seqnet/loss.hpp"
#include "hgr/seqnet/network.hpp"

namespace hgr {

enum class RecognizerKind { UDeepGRU, TSGR };

std::string_view recognizer_name(RecognizerKind k);
RecognizerKind parse_recognizer(std::string_view name);

struct RecognizerConfig {
  RecognizerKind kind = RecognizerKind::TSGR;
  FrameRecipe recipe = FrameRecipe::Positions60;
  // uDeepGRU: feature layer width followed by the GRU widths.
  // TSGR: one width per shift node. Empty selects the defaults.
  std::vector<std::size_t> widths;
  seqnet::LossKind loss = seqnet::LossKind::Focal;
  double focal_gamma = 1.0;
  std::uint64_t seed = 1;

  std::vector<std::size_t> resolved_widths() const;
};

/// Layer stack for a configuration, initialised from config.seed.
seqnet::SequenceNet build_network(const RecognizerConfig& config);

struct TrainProtocol {
  double lr = 2e-4;
  std::size_t batch = 10;
  std::size_t max_chunk = 256;
  std::size_t validation_sequences = 6;
  std::size_t epochs = 30;
  std::size_t patience = 8;  // epochs without a better validation F1 before stopping
  std::uint64_t seed = 1;
  double jitter_mm = 0.0;    // Gaussian position noise on training chunks; 0 disables
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_f1 = 0.0;
};

/// A trained per-frame labeller with its input statistics.
struct Recognizer {
  RecognizerConfig config;
  FeatureStats stats;
  seqnet::SequenceNet net;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_f1 = 0.0;
  std::vector<std::string> training_ids;
  std::vector<std::string> validation_ids;

  /// Single-file bundle: configuration, statistics and network checkpoint.
  void save(std::ostream& out) const;
  static Recognizer load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Recognizer load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Frame labels

/// Per-frame labels: frames inside a span carry its class, the rest
/// NON_GESTURE. Later spans overwrite earlier ones where they overlap.
std::vector<Label> labels_from_spans(std::size_t sequence_length, std::span<const GestureSpan> spans,
                                     const std::string& sequence_id);
/// Maximal runs of one gesture label, in order.
std::vector<GestureSpan> spans_from_labels(std::span<const Label> labels, const std::string& sequence_id);

/// Macro-averaged frame F1 over the gesture classes present in either stream.
/// Returns 1 when neither stream contains a gesture.
double macro_frame_f1(std::span<const Label> truth, std::span<const Label> predicted);

/// Z-scored network input for a sequence.
seqnet::Matrix recognizer_input(const SkeletonSequence& seq, FrameRecipe recipe, const FeatureStats& stats);

// ---------------------------------------------------------------------------
// Training and prediction

/// Called after every epoch; useful for progress reporting.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Withholds `validation_sequences` sequences (seeded), trains on chunks of
/// the rest and returns the network of the epoch with the best validation
/// macro frame F1. Throws Error with fewer than validation_sequences + 1
/// sequences.
Recognizer train_recognizer(const RecognizerConfig& config, const TrainProtocol& protocol, const Dataset& data,
                            const EpochCallback& on_epoch = {});

struct StreamPrediction {
  std::vector<Label> labels;
  seqnet::Matrix probabilities;  // frames x kLabelCount
};

StreamPrediction predict_stream(const Recognizer& r, const SkeletonSequence& seq);

/// Per-frame argmax with ties resolved towards NON_GESTURE, then the lowest
/// ordinal.
std::vector<Label> argmax_labels(const seqnet::Matrix& probabilities);

/// Averages member probability matrices and takes the tie-broken argmax.
/// Throws Error on shape mismatch.
std::vector<Label> ensemble_average(std::span<const seqnet::Matrix> member_probabilities);

struct Ensemble {
  std::vector<Recognizer> members;
  double subset_fraction = 0.8;
  std::uint64_t seed = 1;

  void save(const std::filesystem::path& path) const;
  static Ensemble load(const std::filesystem::path& path);
};

/// Trains `count` members, each on a seeded random `subset_fraction` of the
/// sequences, with member seeds derived from `seed`.
Ensemble train_ensemble(const RecognizerConfig& config, const TrainProtocol& protocol, const Dataset& data,
                        std::size_t count, double subset_fraction = 0.8, const EpochCallback& on_epoch = {});

std::vector<Label> ensemble_predict(std::span<const Recognizer> members, const SkeletonSequence& seq);

}  // namespace hgr

#endif  // HGR_RECOGNIZERS_HPP_
