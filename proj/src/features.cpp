#include "hgr/features.hpp"

#include <cmath>

namespace hgr {

std::vector<KinematicsFrame> compute_kinematics(FrameView window) {
  if (window.empty()) throw Error("compute_kinematics: empty window");
  std::vector<KinematicsFrame> out(window.size());
  for (std::size_t t = 0; t < window.size(); ++t) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const Vec3& p0 = window[t].positions[j];
      out[t].speed[j] = t >= 1 ? Vec3(p0 - window[t - 1].positions[j]) : Vec3::Zero();
      out[t].acceleration[j] =
          t >= 2 ? Vec3(p0 - 2.0 * window[t - 1].positions[j] + window[t - 2].positions[j])
                 : Vec3::Zero();
    }
  }
  return out;
}

DistanceMatrix joint_distance_matrix(const HandFrame& frame) {
  DistanceMatrix m;
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t k = 0; k < kJointCount; ++k) {
      for (std::size_t j = 0; j < kJointCount; ++j) {
        m.d[axis](k, j) = std::abs(frame.positions[k][axis] - frame.positions[j][axis]);
      }
    }
  }
  return m;
}

std::array<double, kArticulationTraces> articulation_distances(const HandFrame& frame) {
  std::array<double, kArticulationTraces> d{};
  for (std::size_t i = 0; i + 1 < kFingertips.size(); ++i) {
    d[i] = (frame.at(kFingertips[i]) - frame.at(kFingertips[i + 1])).norm();
  }
  const Vec3& palm = frame.at(JointId::Palm);
  for (std::size_t i = 0; i < kFingertips.size(); ++i) {
    d[4 + i] = (frame.at(kFingertips[i]) - palm).norm();
  }
  return d;
}

ArticulationProfile articulation_distances(FrameView window) {
  if (window.empty()) throw Error("articulation_distances: empty window");
  ArticulationProfile p;
  for (auto& trace : p.traces) trace.resize(window.size());
  for (std::size_t t = 0; t < window.size(); ++t) {
    const auto d = articulation_distances(window[t]);
    for (std::size_t k = 0; k < kArticulationTraces; ++k) p.traces[k][t] = d[k];
  }
  return p;
}

// ---------------------------------------------------------------------------

FeatureStats compute_feature_stats(std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) throw Error("compute_feature_stats: no samples");
  const std::size_t width = vectors.front().size();
  FeatureStats s;
  s.mean.assign(width, 0.0);
  s.stddev.assign(width, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != width) throw Error("compute_feature_stats: ragged feature vectors");
    for (std::size_t i = 0; i < width; ++i) s.mean[i] += v[i];
  }
  const double n = static_cast<double>(vectors.size());
  for (auto& m : s.mean) m /= n;
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < width; ++i) {
      const double d = v[i] - s.mean[i];
      s.stddev[i] += d * d;
    }
  }
  for (auto& sd : s.stddev) sd = std::sqrt(sd / n);
  return s;
}

void apply_zscore(std::vector<double>& x, const FeatureStats& stats) {
  if (x.size() != stats.size()) {
    throw Error("apply_zscore: vector width " + std::to_string(x.size()) + " vs stats width " +
                std::to_string(stats.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = stats.stddev[i] > kSpreadEpsilon ? (x[i] - stats.mean[i]) / stats.stddev[i] : 0.0;
  }
}

FeatureStats position_stats(std::span<const SkeletonSequence> sequences) {
  std::vector<std::vector<double>> vectors;
  for (const auto& s : sequences) {
    for (const auto& f : s.frames) vectors.push_back(frame_vector(f, FrameRecipe::Positions60));
  }
  return compute_feature_stats(vectors);
}

double mean_hand_size(FrameView window) {
  if (window.empty()) throw Error("mean_hand_size: empty window");
  double sum = 0.0;
  for (const auto& f : window) sum += (f.at(JointId::IndexA) - f.at(JointId::PinkyA)).norm();
  return sum / static_cast<double>(window.size());
}

FrameWindow scale_by_hand_size(FrameView window) {
  const double size = mean_hand_size(window);
  FrameWindow out(window.begin(), window.end());
  if (size <= kSpreadEpsilon) return out;
  for (auto& f : out) {
    for (auto& p : f.positions) p /= size;
  }
  return out;
}

namespace {

FrameWindow per_axis_znorm(FrameWindow w) {
  const double n = static_cast<double>(w.size() * kJointCount);
  for (int axis = 0; axis < 3; ++axis) {
    double mean = 0.0;
    for (const auto& f : w) {
      for (const auto& p : f.positions) mean += p[axis];
    }
    mean /= n;
    double var = 0.0;
    for (const auto& f : w) {
      for (const auto& p : f.positions) var += (p[axis] - mean) * (p[axis] - mean);
    }
    const double sd = std::sqrt(var / n);
    for (auto& f : w) {
      for (auto& p : f.positions) p[axis] = sd > kSpreadEpsilon ? (p[axis] - mean) / sd : 0.0;
    }
  }
  return w;
}

}  // namespace

FrameWindow normalize(FrameView window, NormMode mode, const FeatureStats* stats) {
  if (window.empty()) throw Error("normalize: empty window");
  switch (mode) {
    case NormMode::PerInstanceZNorm:
      return per_axis_znorm(FrameWindow(window.begin(), window.end()));
    case NormMode::HandSizeThenZNorm:
      return per_axis_znorm(scale_by_hand_size(window));
    case NormMode::DatasetZScore: {
      if (stats == nullptr || stats->size() != 3 * kJointCount) {
        throw Error("normalize: DatasetZScore needs 60-wide training statistics");
      }
      FrameWindow out(window.begin(), window.end());
      for (auto& f : out) {
        for (std::size_t j = 0; j < kJointCount; ++j) {
          for (int a = 0; a < 3; ++a) {
            const std::size_t i = 3 * j + a;
            f.positions[j][a] = stats->stddev[i] > kSpreadEpsilon
                                    ? (f.positions[j][a] - stats->mean[i]) / stats->stddev[i]
                                    : 0.0;
          }
        }
      }
      return out;
    }
  }
  throw Error("normalize: unknown mode");
}

// ---------------------------------------------------------------------------

std::size_t recipe_width(FrameRecipe recipe) {
  switch (recipe) {
    case FrameRecipe::Positions60: return 3 * kJointCount;
    case FrameRecipe::PosSpeedAccel: return 9 * kJointCount;
    case FrameRecipe::PosQuat140: return 7 * kJointCount;
  }
  return 0;
}

std::string_view recipe_name(FrameRecipe recipe) {
  switch (recipe) {
    case FrameRecipe::Positions60: return "positions60";
    case FrameRecipe::PosSpeedAccel: return "pos_speed_accel";
    case FrameRecipe::PosQuat140: return "pos_quat140";
  }
  return "?";
}

FrameRecipe parse_recipe(std::string_view name) {
  for (auto r : {FrameRecipe::Positions60, FrameRecipe::PosSpeedAccel, FrameRecipe::PosQuat140}) {
    if (recipe_name(r) == name) return r;
  }
  throw Error("unknown frame recipe '" + std::string(name) + "'");
}

std::vector<double> frame_vector(const HandFrame& frame, FrameRecipe recipe,
                                 const KinematicsFrame* kinematics) {
  std::vector<double> v;
  v.reserve(recipe_width(recipe));
  switch (recipe) {
    case FrameRecipe::Positions60:
      for (const auto& p : frame.positions) v.insert(v.end(), {p.x(), p.y(), p.z()});
      break;
    case FrameRecipe::PosSpeedAccel:
      if (kinematics == nullptr) throw Error("frame_vector: PosSpeedAccel needs kinematics");
      for (const auto& p : frame.positions) v.insert(v.end(), {p.x(), p.y(), p.z()});
      for (const auto& s : kinematics->speed) v.insert(v.end(), {s.x(), s.y(), s.z()});
      for (const auto& a : kinematics->acceleration) v.insert(v.end(), {a.x(), a.y(), a.z()});
      break;
    case FrameRecipe::PosQuat140:
      if (!frame.rotations) throw Error("frame_vector: PosQuat140 needs joint rotations");
      for (std::size_t j = 0; j < kJointCount; ++j) {
        const Vec3& p = frame.positions[j];
        const Quat& q = (*frame.rotations)[j];
        v.insert(v.end(), {p.x(), p.y(), p.z(), q.w, q.x, q.y, q.z});
      }
      break;
  }
  return v;
}

std::vector<std::vector<double>> frame_vectors(FrameView window, FrameRecipe recipe) {
  std::vector<std::vector<double>> out;
  out.reserve(window.size());
  if (recipe == FrameRecipe::PosSpeedAccel) {
    const auto kin = compute_kinematics(window);
    for (std::size_t t = 0; t < window.size(); ++t) out.push_back(frame_vector(window[t], recipe, &kin[t]));
  } else {
    for (const auto& f : window) out.push_back(frame_vector(f, recipe));
  }
  return out;
}

}  // namespace hgr
