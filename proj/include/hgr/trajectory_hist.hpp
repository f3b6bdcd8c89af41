#ifndef HGR_TRAJECTORY_HIST_HPP_
#define HGR_TRAJECTORY_HIST_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hgr/core_model.hpp"

namespace hgr {

inline constexpr std::size_t kDefaultHistogramBins = 16;

/// Classes whose trajectories are refined by histogram matching.
inline constexpr std::array<Label, 4> kTrajectoryClasses = {Label::CIRCLE, Label::V, Label::CROSS, Label::DENY};

bool is_trajectory_class(Label l);

/// Normalised histogram of gradient angles over [-pi/2, pi/2].
struct OrientationHistogram {
  std::vector<double> bins;

  std::size_t size() const { return bins.size(); }
  double sum() const;
};

/// Principal axes of a 3D point cloud: columns in descending eigenvalue
/// order, each with its first non-negligible component positive.
struct PrincipalAxes {
  Eigen::Matrix3d axes;
  Eigen::Vector3d eigenvalues;
  Eigen::Vector3d mean;
};

PrincipalAxes principal_axes(std::span<const Vec3> points);

/// Centers the points and projects them onto the top two principal axes.
std::vector<Eigen::Vector2d> project_to_plane(std::span<const Vec3> points);

/// Bin of an angle in [-pi/2, pi/2]; the boundary angles go to the last bin.
std::size_t angle_bin(double theta, std::size_t bins);

/// Histogram of atan(dy/dx) over consecutive 2D steps. Steps shorter than
/// 1e-6 of the path length are skipped; when every step is skipped the
/// histogram is uniform.
OrientationHistogram orientation_histogram(std::span<const Eigen::Vector2d> path, std::size_t bins);

/// IndexEnd trajectory of `segment` projected to 2D by PCA and summarised as
/// an orientation histogram.
OrientationHistogram trajectory_descriptor(FrameView segment, std::size_t bins = kDefaultHistogramBins);
OrientationHistogram trajectory_descriptor(std::span<const Vec3> points, std::size_t bins = kDefaultHistogramBins);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(const OrientationHistogram& a, const OrientationHistogram& b);

struct ScoredLabel {
  Label label = Label::NON_GESTURE;
  double score = 0.0;
};

/// Per-class mean histograms.
class ClassTemplates {
 public:
  ClassTemplates() = default;
  explicit ClassTemplates(std::size_t bins) : bins_(bins) {}

  /// Averages the descriptors of each class. Throws Error on mixed bin counts.
  static ClassTemplates build(std::span<const std::pair<Label, OrientationHistogram>> samples);

  std::size_t bins() const { return bins_; }
  const std::map<Label, OrientationHistogram>& templates() const { return templates_; }
  bool contains(Label l) const { return templates_.count(l) != 0; }
  void set(Label l, OrientationHistogram h);

  /// Class with the highest cosine similarity (ties: lowest ordinal).
  ScoredLabel best_match(const OrientationHistogram& descriptor) const;

  /// `class;b0,b1,...` lines.
  std::string serialize() const;
  static ClassTemplates parse(std::string_view text, const std::string& source = "templates");
  void save(const std::filesystem::path& path) const;
  static ClassTemplates load(const std::filesystem::path& path);

 private:
  std::size_t bins_ = 0;
  std::map<Label, OrientationHistogram> templates_;
};

/// Combines a base classifier prediction with template evidence. Base classes
/// without a template are returned untouched. When the best template agrees
/// with the base class the score is lambda * base + (1 - lambda) * similarity;
/// otherwise the higher of the two scores decides the class.
ScoredLabel classify_by_histogram(const OrientationHistogram& descriptor, const ClassTemplates& templates,
                                  ScoredLabel base, double lambda = 0.5);

}  // namespace hgr

#endif  // HGR_TRAJECTORY_HIST_HPP_
