#ifndef HGR_TESTS_SUPPORT_HPP_
#define HGR_TESTS_SUPPORT_HPP_

#include <filesystem>
#include <random>
#include <string>

#include "hgr/core_model.hpp"

namespace hgr::test {

/// Frame with every joint at `p`.
inline HandFrame flat_frame(const Vec3& p, double t_ms = 0.0) {
  HandFrame f;
  f.positions.fill(p);
  f.timestamp_ms = t_ms;
  return f;
}

/// Frame with seeded random joint positions in a 200 mm cube.
inline HandFrame random_frame(std::mt19937_64& rng, double t_ms = 0.0) {
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  HandFrame f;
  for (auto& p : f.positions) p = Vec3(u(rng), u(rng) + 200.0, u(rng));
  f.timestamp_ms = t_ms;
  return f;
}

inline SkeletonSequence random_sequence(std::size_t n, std::uint64_t seed, const std::string& id = "seq") {
  std::mt19937_64 rng(seed);
  SkeletonSequence s;
  s.id = id;
  for (std::size_t t = 0; t < n; ++t) s.frames.push_back(random_frame(rng, 20.0 * static_cast<double>(t)));
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hgr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace hgr::test

#endif  // HGR_TESTS_SUPPORT_HPP_
