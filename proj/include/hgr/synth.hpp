#ifndef HGR_SYNTH_HPP_
#define HGR_SYNTH_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "hgr/core_model.hpp"

namespace hgr::synth {

/// Articulated hand state from which all 20 joints are generated.
/// Flexion is 0 for a straight finger and 1 for a closed one; spread is a
/// per-finger sideways angle in radians. Fingers are ordered thumb .. pinky.
struct HandPose {
  Vec3 palm = Vec3(0.0, 200.0, 0.0);
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  std::array<double, 5> flex{0.15, 0.25, 0.3, 0.3, 0.3};
  std::array<double, 5> spread{0.0, -0.08, 0.0, 0.08, 0.16};
  // Closure of the thumb tip onto the index tip, 0 (none) .. 1 (touching).
  double pinch = 0.0;
};

/// Linear blend of flexion, spread, palm and pinch; slerp of orientation.
HandPose blend(const HandPose& a, const HandPose& b, double w);

/// Forward kinematics of the hand model.
HandFrame pose_frame(const HandPose& pose, double timestamp_ms, bool rotations);

struct SynthConfig {
  std::vector<Label> classes;                       // empty: all 18
  std::vector<std::size_t> gestures_per_sequence{4};  // drawn per sequence
  std::size_t sequence_count = 40;
  double noise_mm = 0.4;
  double idle_amplitude_mm = 10.0;
  double idle_min_hz = 0.15;
  double idle_max_hz = 0.5;
  std::size_t min_gap = 60;
  std::size_t max_gap = 120;
  double frame_rate_hz = 50.0;
  bool rotations = true;
  std::uint64_t seed = 1;
  std::string id_prefix = "synth";

  void validate() const;
};

/// Inclusive frame-count range of generated instances of a class.
std::pair<std::size_t, std::size_t> gesture_length_range(Label l);

/// Sequences of idle gesticulation with embedded gestures and their exact
/// annotations. Classes are assigned round-robin over a seeded shuffle so
/// per-class counts differ by at most one.
Dataset synth_generate(const SynthConfig& config);

/// One gesture performed on a still hand, `length` frames, with Gaussian
/// jitter. Used for template statistics and tests.
FrameWindow gesture_clip(Label l, std::size_t length, double noise_mm, std::uint64_t seed, bool rotations = false);

}  // namespace hgr::synth

#endif  // HGR_SYNTH_HPP_
