#ifndef HGR_FEATURES_HPP_
#define HGR_FEATURES_HPP_

#include <array>
#include <span>
#include <vector>

#include "hgr/core_model.hpp"

namespace hgr {

/// Backward differences of joint positions. Speed is zero at t = 0 and
/// acceleration is zero for t < 2.
struct KinematicsFrame {
  std::array<Vec3, kJointCount> speed;         // mm / frame
  std::array<Vec3, kJointCount> acceleration;  // mm / frame^2
};

std::vector<KinematicsFrame> compute_kinematics(FrameView window);

/// Per-axis absolute joint-to-joint differences, d[axis][k][j] = |J_k - J_j|.
struct DistanceMatrix {
  std::array<Eigen::Matrix<double, kJointCount, kJointCount>, 3> d;
};

DistanceMatrix joint_distance_matrix(const HandFrame& frame);

/// Nine distance traces over a window: the four adjacent-fingertip pairs
/// (thumb-index, index-middle, middle-ring, ring-pinky) followed by the five
/// fingertip-to-palm distances (thumb .. pinky).
inline constexpr std::size_t kArticulationTraces = 9;

struct ArticulationProfile {
  std::array<std::vector<double>, kArticulationTraces> traces;

  std::size_t length() const { return traces[0].size(); }
};

std::array<double, kArticulationTraces> articulation_distances(const HandFrame& frame);
ArticulationProfile articulation_distances(FrameView window);

// ---------------------------------------------------------------------------
// Normalisation

inline constexpr double kSpreadEpsilon = 1e-8;

enum class NormMode { PerInstanceZNorm, HandSizeThenZNorm, DatasetZScore };

/// Per-feature mean and standard deviation estimated on a training set.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t size() const { return mean.size(); }
  bool empty() const { return mean.empty(); }
};

/// Population statistics of equally sized feature vectors.
FeatureStats compute_feature_stats(std::span<const std::vector<double>> vectors);
/// (x - mean) / stddev in place; features with stddev below the epsilon guard
/// are set to 0.
void apply_zscore(std::vector<double>& x, const FeatureStats& stats);

/// Statistics over the 60 position coordinates of a set of frames, in
/// Positions60 order.
FeatureStats position_stats(std::span<const SkeletonSequence> sequences);

/// Mean IndexA-PinkyA distance over the window (mm).
double mean_hand_size(FrameView window);
/// Positions divided by the window's mean hand size.
FrameWindow scale_by_hand_size(FrameView window);

/// Normalises positions of a window. DatasetZScore requires `stats` from
/// position_stats(); the other modes ignore it.
FrameWindow normalize(FrameView window, NormMode mode, const FeatureStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Frame vectors

enum class FrameRecipe { Positions60, PosSpeedAccel, PosQuat140 };

std::size_t recipe_width(FrameRecipe recipe);
std::string_view recipe_name(FrameRecipe recipe);
FrameRecipe parse_recipe(std::string_view name);

/// Flattens one frame. PosSpeedAccel needs `kinematics`; PosQuat140 needs
/// rotations. Layout is joint-major in JointId order.
std::vector<double> frame_vector(const HandFrame& frame, FrameRecipe recipe,
                                 const KinematicsFrame* kinematics = nullptr);

/// Frame vectors for a whole window, computing kinematics when needed.
std::vector<std::vector<double>> frame_vectors(FrameView window, FrameRecipe recipe);

}  // namespace hgr

#endif  // HGR_FEATURES_HPP_
