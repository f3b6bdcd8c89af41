#ifndef HGR_ENERGY_DETECT_HPP_
#define HGR_ENERGY_DETECT_HPP_

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "hgr/core_model.hpp"

namespace hgr {

/// Translation applied to every coordinate before ratios are taken, so the
/// sensor origin is far from the denominators.
inline constexpr double kEnergyOffsetMm = 500.0;
/// Smallest magnitude allowed in a ratio denominator.
inline constexpr double kEnergyDivEps = 1e-6;

enum class EnergyKind {
  CoordinateRatio,  // sum over joints of |w_t / w_{t-1} - 1|
  Displacement,     // sum over joints of |w_t - w_{t-1}| (comparison variant)
};

/// Motion contribution of each frame: entry t is the joint sum for the step
/// t-1 -> t, entry 0 is zero.
std::vector<double> frame_energy(FrameView frames, EnergyKind kind = EnergyKind::CoordinateRatio);

/// Energy accumulated over the steps t = 1..L-1 of a window.
double window_energy(FrameView window, EnergyKind kind = EnergyKind::CoordinateRatio);

struct EnergyProfile {
  std::vector<std::size_t> window_starts;
  std::size_t window_length = 0;
  std::size_t stride = 0;
  std::vector<double> energy;
  // (E[i+1] - E[i-1]) / 2 for interior windows; absent at both ends.
  std::vector<std::optional<double>> delta;

  std::size_t size() const { return energy.size(); }
};

/// Builds the delta column for an energy series.
EnergyProfile make_profile(std::vector<double> energy, std::vector<std::size_t> window_starts = {},
                           std::size_t window_length = 0, std::size_t stride = 0);

/// Energies of the windows [s, s + L) for s = 0, stride, 2*stride, ...
EnergyProfile energy_profile(FrameView frames, std::size_t window_length, std::size_t stride,
                             EnergyKind kind = EnergyKind::CoordinateRatio);

/// 0.05 * max |delta| over the profile.
double default_epsilon(const EnergyProfile& profile);

/// Windows i with delta[i-1] > 0, delta[i] < epsilon and delta[i+1] < 0.
std::vector<std::size_t> select_candidates(const EnergyProfile& profile, double epsilon);

struct CandidateFilterConfig {
  std::optional<double> epsilon;  // unset: default_epsilon of each sequence
  double alpha = 0.5;             // drop when P(NON_GESTURE) > alpha
  double beta = 0.5;              // drop when the best gesture probability < beta
  std::size_t segment_length = 200;
  double trim_fraction = 0.05;    // of the segment's peak frame energy
  EnergyKind kind = EnergyKind::CoordinateRatio;
};

using ClassProbabilities = std::array<double, kLabelCount>;
/// Scores one segment; the result is indexed by Label ordinal.
using SegmentClassifier = std::function<ClassProbabilities(FrameView segment)>;

struct Candidate {
  std::size_t window_index = 0;
  std::size_t segment_start = 0;  // inclusive
  std::size_t segment_end = 0;    // inclusive
  std::size_t event_start = 0;    // segment trimmed to its motion burst
  std::size_t event_end = 0;
  Label label = Label::NON_GESTURE;
  double confidence = 0.0;
  double non_gesture = 0.0;
  double energy = 0.0;  // of the candidate window
  bool kept = false;
};

/// Candidate segments before and after confidence filtering, for diagnostics.
struct CandidateReport {
  EnergyProfile profile;
  double epsilon = 0.0;
  std::vector<Candidate> candidates;
};

/// Segment of `segment_length` frames centred on a window, clamped to the
/// sequence.
std::pair<std::size_t, std::size_t> centred_segment(std::size_t window_start, std::size_t window_length,
                                                    std::size_t segment_length, std::size_t sequence_length);

CandidateReport analyze_candidates(const SkeletonSequence& seq, std::size_t window_length, std::size_t stride,
                                   const CandidateFilterConfig& config, const SegmentClassifier& classifier);

/// Kept candidates as events. Overlapping events keep the more confident one,
/// then the one with the higher window energy.
std::vector<DetectionEvent> detect_candidates(const SkeletonSequence& seq, std::size_t window_length,
                                              std::size_t stride, const CandidateFilterConfig& config,
                                              const SegmentClassifier& classifier);

std::vector<DetectionEvent> suppress_overlaps(const std::vector<Candidate>& kept, const std::string& sequence_id);

}  // namespace hgr

#endif  // HGR_ENERGY_DETECT_HPP_
