#include "hgr/trajectory_hist.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "hgr/text_io.hpp"

namespace hgr {

bool is_trajectory_class(Label l) {
  return std::find(kTrajectoryClasses.begin(), kTrajectoryClasses.end(), l) != kTrajectoryClasses.end();
}

double OrientationHistogram::sum() const { return std::accumulate(bins.begin(), bins.end(), 0.0); }

PrincipalAxes principal_axes(std::span<const Vec3> points) {
  if (points.empty()) throw Error("principal_axes: no points");
  PrincipalAxes out;
  out.mean = Vec3::Zero();
  for (const Vec3& p : points) out.mean += p;
  out.mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - out.mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  std::array<int, 3> order{0, 1, 2};
  const Eigen::Vector3d ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ev[a] > ev[b]; });
  for (int c = 0; c < 3; ++c) {
    Vec3 v = solver.eigenvectors().col(order[c]);
    for (int k = 0; k < 3; ++k) {
      if (std::abs(v[k]) > 1e-12) {
        if (v[k] < 0) v = -v;
        break;
      }
    }
    out.axes.col(c) = v;
    out.eigenvalues[c] = std::max(0.0, ev[order[c]]);
  }
  return out;
}

std::vector<Eigen::Vector2d> project_to_plane(std::span<const Vec3> points) {
  const PrincipalAxes pa = principal_axes(points);
  std::vector<Eigen::Vector2d> out;
  out.reserve(points.size());
  for (const Vec3& p : points) {
    const Vec3 d = p - pa.mean;
    out.emplace_back(d.dot(pa.axes.col(0)), d.dot(pa.axes.col(1)));
  }
  return out;
}

std::size_t angle_bin(double theta, std::size_t bins) {
  const double u = (theta + std::numbers::pi / 2.0) / std::numbers::pi;
  if (!(u > 0.0 && u < 1.0)) return bins - 1;
  return std::min(bins - 1, static_cast<std::size_t>(u * static_cast<double>(bins)));
}

OrientationHistogram orientation_histogram(std::span<const Eigen::Vector2d> path, std::size_t bins) {
  if (bins < 2) throw Error("orientation histogram needs at least 2 bins");
  OrientationHistogram h{std::vector<double>(bins, 0.0)};
  double length = 0.0;
  for (std::size_t t = 1; t < path.size(); ++t) length += (path[t] - path[t - 1]).norm();

  std::size_t used = 0;
  for (std::size_t t = 1; t < path.size(); ++t) {
    const Eigen::Vector2d d = path[t] - path[t - 1];
    const double n = d.norm();
    if (!(n > 1e-6 * length) || n == 0.0) continue;
    double theta;
    if (std::abs(d.x()) <= 1e-9 * n) {
      theta = std::numbers::pi / 2.0;
    } else if (std::abs(d.y()) <= 1e-9 * n) {
      theta = 0.0;
    } else {
      theta = std::atan(d.y() / d.x());
    }
    h.bins[angle_bin(theta, bins)] += 1.0;
    ++used;
  }
  if (used == 0) {
    spdlog::warn("trajectory has no usable motion; returning a uniform histogram");
    std::fill(h.bins.begin(), h.bins.end(), 1.0 / static_cast<double>(bins));
    return h;
  }
  for (double& b : h.bins) b /= static_cast<double>(used);
  return h;
}

OrientationHistogram trajectory_descriptor(std::span<const Vec3> points, std::size_t bins) {
  if (points.size() < 3) throw Error("trajectory_descriptor: segment needs at least 3 frames");
  const auto plane = project_to_plane(points);
  return orientation_histogram(plane, bins);
}

OrientationHistogram trajectory_descriptor(FrameView segment, std::size_t bins) {
  std::vector<Vec3> tip;
  tip.reserve(segment.size());
  for (const HandFrame& f : segment) tip.push_back(f.at(JointId::IndexEnd));
  return trajectory_descriptor(std::span<const Vec3>(tip), bins);
}

double cosine_similarity(const OrientationHistogram& a, const OrientationHistogram& b) {
  if (a.size() != b.size()) throw Error("cosine_similarity: histograms differ in bin count");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a.bins[i] * b.bins[i];
    na += a.bins[i] * a.bins[i];
    nb += b.bins[i] * b.bins[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

ClassTemplates ClassTemplates::build(std::span<const std::pair<Label, OrientationHistogram>> samples) {
  if (samples.empty()) throw Error("ClassTemplates::build: no samples");
  ClassTemplates out(samples.front().second.size());
  std::map<Label, std::size_t> counts;
  for (const auto& [label, h] : samples) {
    if (h.size() != out.bins_) throw Error("ClassTemplates::build: mixed bin counts");
    auto& mean = out.templates_[label];
    if (mean.bins.empty()) mean.bins.assign(out.bins_, 0.0);
    const auto k = static_cast<double>(++counts[label]);
    for (std::size_t i = 0; i < h.size(); ++i) mean.bins[i] += (h.bins[i] - mean.bins[i]) / k;
  }
  return out;
}

void ClassTemplates::set(Label l, OrientationHistogram h) {
  if (bins_ == 0) bins_ = h.size();
  if (h.size() != bins_) throw Error("ClassTemplates::set: bin count mismatch");
  templates_[l] = std::move(h);
}

ScoredLabel ClassTemplates::best_match(const OrientationHistogram& descriptor) const {
  ScoredLabel best{Label::NON_GESTURE, -1.0};
  for (const auto& [label, h] : templates_) {
    const double s = cosine_similarity(descriptor, h);
    if (s > best.score) best = {label, s};
  }
  return best;
}

std::string ClassTemplates::serialize() const {
  std::ostringstream out;
  for (const auto& [label, h] : templates_) {
    out << label_name(label) << ';';
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << format_number(h.bins[i]);
    out << '\n';
  }
  return out.str();
}

ClassTemplates ClassTemplates::parse(std::string_view text, const std::string& source) {
  ClassTemplates out;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto fields = split(t, ';');
    if (fields.size() != 2) throw ParseError(source, lineno, "expected 'class;b0,b1,...'");
    Label label;
    try {
      label = parse_label(trim(fields[0]));
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
    OrientationHistogram h;
    for (auto v : split(fields[1], ',')) h.bins.push_back(parse_number<double>(trim(v), source, lineno));
    if (h.size() < 2) throw ParseError(source, lineno, "histogram needs at least 2 bins");
    if (out.bins_ != 0 && h.size() != out.bins_) throw ParseError(source, lineno, "inconsistent bin count");
    out.set(label, std::move(h));
  }
  return out;
}

void ClassTemplates::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize();
}

ClassTemplates ClassTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

ScoredLabel classify_by_histogram(const OrientationHistogram& descriptor, const ClassTemplates& templates,
                                  ScoredLabel base, double lambda) {
  if (!templates.contains(base.label)) return base;
  double norm = 0.0;
  for (double b : descriptor.bins) norm += b * b;
  if (norm == 0.0) return base;
  const ScoredLabel best = templates.best_match(descriptor);
  if (best.label == base.label) return {base.label, lambda * base.score + (1.0 - lambda) * best.score};
  return best.score > base.score ? best : base;
}

}  // namespace hgr
