#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "hgr/trajectory_hist.hpp"
#include "support.hpp"

using namespace hgr;
using std::numbers::pi;

namespace {

std::vector<Vec3> circle_points(std::size_t n, const Eigen::Matrix3d& rot, const Vec3& centre, double radius) {
  std::vector<Vec3> out;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = 2.0 * pi * static_cast<double>(k) / static_cast<double>(n);
    out.push_back(centre + rot * Vec3(radius * std::cos(a), radius * std::sin(a), 0.0));
  }
  return out;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

OrientationHistogram hist(std::initializer_list<double> v) { return OrientationHistogram{std::vector<double>(v)}; }

std::size_t argmax(const OrientationHistogram& h) {
  return static_cast<std::size_t>(std::max_element(h.bins.begin(), h.bins.end()) - h.bins.begin());
}

std::vector<Vec3> v_shape(std::size_t n) {
  std::vector<Vec3> pts;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(n - 1);
    pts.push_back(Vec3(60.0 * s, s < 0.5 ? -80.0 * s : -80.0 * (1.0 - s), 5.0 * std::sin(3.0 * s)));
  }
  return pts;
}

}  // namespace

TEST_CASE("angle bins") {
  CHECK(angle_bin(-pi / 2.0, 8) == 7);
  CHECK(angle_bin(-pi / 2.0 + 1e-9, 8) == 0);
  CHECK(angle_bin(pi / 2.0, 8) == 7);
  CHECK(angle_bin(0.0, 8) == 4);
  CHECK(angle_bin(-1e-12, 8) == 3);
  CHECK(angle_bin(pi / 8.0 - 1e-9, 8) == 4);
  CHECK(angle_bin(pi / 8.0 + 1e-9, 8) == 5);
}

TEST_CASE("a straight line puts all mass in the centre bin") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Vec3 origin(n(rng) * 100.0, n(rng) * 100.0, n(rng) * 100.0);
    std::vector<Vec3> pts;
    for (int k = 0; k < 30; ++k) pts.push_back(origin + dir * (3.0 * k));
    const auto h = trajectory_descriptor(pts, 16);
    CHECK(h.bins[8] == doctest::Approx(1.0));
    CHECK(h.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("planar trajectories keep their pairwise distances") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 30.0);
  const Eigen::Matrix3d rot = random_rotation(rng);
  std::vector<Vec3> pts;
  for (int k = 0; k < 25; ++k) pts.push_back(Vec3(10, 20, 30) + rot * Vec3(n(rng), n(rng), 0.0));
  const auto flat = project_to_plane(pts);
  REQUIRE(flat.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      CHECK((flat[i] - flat[j]).norm() == doctest::Approx((pts[i] - pts[j]).norm()).epsilon(1e-9));
}

TEST_CASE("principal axes") {
  std::vector<Vec3> pts;
  for (int k = -10; k <= 10; ++k) pts.push_back(Vec3(0.1 * k, -5.0 * k, 0.5 * (k % 3)));
  const auto pa = principal_axes(pts);
  CHECK(pa.eigenvalues(0) >= pa.eigenvalues(1));
  CHECK(pa.eigenvalues(1) >= pa.eigenvalues(2));
  CHECK((pa.axes.transpose() * pa.axes - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(std::abs(pa.axes(1, 0)) > 0.99);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 3; ++r) {
      if (std::abs(pa.axes(r, c)) > 1e-9) {
        CHECK(pa.axes(r, c) > 0.0);
        break;
      }
    }
  }
}

TEST_CASE("a sampled circle gives a near-uniform histogram") {
  // Oracle: bin the folded step angles of the circle in its own plane.
  const std::size_t n = 360, bins = 8;
  std::vector<double> oracle(bins, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double a0 = 2.0 * pi * k / n, a1 = 2.0 * pi * (k + 1) / n;
    const double dx = std::cos(a1) - std::cos(a0), dy = std::sin(a1) - std::sin(a0);
    double theta = std::atan(dy / dx);
    const auto b = std::min<std::size_t>(static_cast<std::size_t>((theta + pi / 2.0) / (pi / bins)), bins - 1);
    oracle[b] += 1.0 / static_cast<double>(n - 1);
  }
  CHECK(*std::max_element(oracle.begin(), oracle.end()) - *std::min_element(oracle.begin(), oracle.end()) < 0.05);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = trajectory_descriptor(circle_points(n, random_rotation(rng), Vec3(5, 200, -7), 40.0), bins);
    const double spread = *std::max_element(h.bins.begin(), h.bins.end()) -
                          *std::min_element(h.bins.begin(), h.bins.end());
    CHECK(spread < 0.05);
    for (std::size_t b = 0; b < bins; ++b) CHECK(h.bins[b] == doctest::Approx(oracle[b]).epsilon(0.05));
  }
}

TEST_CASE("descriptor invariances") {
  const auto base_pts = v_shape(40);
  const auto base = trajectory_descriptor(base_pts, 16);
  std::vector<Vec3> moved, scaled;
  for (const auto& p : base_pts) {
    moved.push_back(p + Vec3(-300.0, 15.0, 88.0));
    scaled.push_back(2.5 * p);
  }
  const auto m = trajectory_descriptor(moved, 16);
  const auto s = trajectory_descriptor(scaled, 16);
  for (std::size_t b = 0; b < 16; ++b) {
    CHECK(m.bins[b] == doctest::Approx(base.bins[b]));
    CHECK(s.bins[b] == doctest::Approx(base.bins[b]));
  }
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3d rot = random_rotation(rng);
    std::vector<Vec3> r;
    for (const auto& p : base_pts) r.push_back(rot * p);
    CHECK(argmax(trajectory_descriptor(r, 16)) == argmax(base));
  }
}

TEST_CASE("descriptor from frames uses the index tip") {
  auto seq = test::random_sequence(20, 1);
  std::vector<Vec3> tip;
  for (const auto& f : seq.frames) tip.push_back(f.positions[index_of(JointId::IndexEnd)]);
  CHECK(trajectory_descriptor(seq.view(), 8).bins == trajectory_descriptor(tip, 8).bins);
  CHECK_THROWS_AS(trajectory_descriptor(FrameView(seq.frames).first(2), 8), Error);
  CHECK_THROWS_AS(trajectory_descriptor(seq.view(), 1), Error);
}

TEST_CASE("static segments give a uniform histogram") {
  std::vector<Vec3> still(10, Vec3(1, 2, 3));
  const auto h = trajectory_descriptor(still, 4);
  for (double v : h.bins) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity(hist({0.2, 0.3, 0.5}), hist({0.2, 0.3, 0.5})) == doctest::Approx(1.0));
  CHECK(cosine_similarity(hist({0.5, 0.5, 0.0, 0.0}), hist({0.0, 0.0, 0.3, 0.7})) == 0.0);
  CHECK(cosine_similarity(hist({0, 0}), hist({1, 0})) == 0.0);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    OrientationHistogram a{std::vector<double>(6)}, b{std::vector<double>(6)};
    for (auto& v : a.bins) v = u(rng);
    for (auto& v : b.bins) v = u(rng);
    const double ab = cosine_similarity(a, b);
    CHECK(ab == cosine_similarity(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-12);
  }
  CHECK_THROWS_AS(cosine_similarity(hist({1, 0}), hist({1, 0, 0})), Error);
}

TEST_CASE("templates") {
  const auto d = trajectory_descriptor(v_shape(30), 8);
  std::vector<std::pair<Label, OrientationHistogram>> samples(5, {Label::V, d});
  samples.push_back({Label::CIRCLE, hist({0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125})});
  const auto t = ClassTemplates::build(samples);
  CHECK(t.bins() == 8);
  CHECK(t.templates().at(Label::V).bins == d.bins);
  CHECK(t.best_match(d).label == Label::V);
  CHECK(t.best_match(d).score == doctest::Approx(1.0));

  std::vector<std::pair<Label, OrientationHistogram>> avg{{Label::CROSS, hist({1.0, 0.0})},
                                                          {Label::CROSS, hist({0.0, 1.0})}};
  CHECK(ClassTemplates::build(avg).templates().at(Label::CROSS).bins == std::vector<double>{0.5, 0.5});
  std::vector<std::pair<Label, OrientationHistogram>> mixed{{Label::CROSS, hist({1.0, 0.0})},
                                                            {Label::V, hist({0.0, 0.5, 0.5})}};
  CHECK_THROWS_AS(ClassTemplates::build(mixed), Error);

  const auto text = t.serialize();
  CHECK(text.find("V;") != std::string::npos);
  const auto back = ClassTemplates::parse(text);
  CHECK(back.bins() == t.bins());
  for (const auto& [l, h] : t.templates()) CHECK(back.templates().at(l).bins == h.bins);
  const auto dir = test::scratch_dir("templates");
  t.save(dir / "t.txt");
  CHECK(ClassTemplates::load(dir / "t.txt").serialize() == text);

  try {
    ClassTemplates::parse("V;0.5,0.5\nCIRCLE;0.2,x\n", "tpl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(ClassTemplates::parse("V;0.5,0.5\nCIRCLE;0.2,0.3,0.5\n"), ParseError);
  CHECK_THROWS_AS(ClassTemplates::parse("BOGUS;0.5,0.5\n"), ParseError);
}

TEST_CASE("score combination") {
  // Template at cosine 0.9 from the descriptor (1, 0).
  const double a = 1.0 / (1.0 + std::sqrt(1.0 / 0.81 - 1.0));
  ClassTemplates t(2);
  t.set(Label::CIRCLE, hist({a, 1.0 - a}));
  t.set(Label::V, hist({0.0, 1.0}));
  const auto d = hist({1.0, 0.0});
  REQUIRE(t.best_match(d).score == doctest::Approx(0.9));

  auto r = classify_by_histogram(d, t, {Label::CIRCLE, 0.6}, 0.5);
  CHECK(r.label == Label::CIRCLE);
  CHECK(r.score == doctest::Approx(0.75));
  r = classify_by_histogram(d, t, {Label::CIRCLE, 0.6}, 1.0);
  CHECK(r.score == doctest::Approx(0.6));

  r = classify_by_histogram(d, t, {Label::V, 0.4}, 0.5);
  CHECK(r.label == Label::CIRCLE);
  CHECK(r.score == doctest::Approx(0.9));
  r = classify_by_histogram(d, t, {Label::V, 0.95}, 0.5);
  CHECK(r.label == Label::V);
  CHECK(r.score == doctest::Approx(0.95));

  r = classify_by_histogram(d, t, {Label::TAP, 0.3}, 0.5);
  CHECK(r.label == Label::TAP);
  CHECK(r.score == 0.3);
  r = classify_by_histogram(hist({0.0, 0.0}), t, {Label::CIRCLE, 0.6}, 0.5);
  CHECK(r.label == Label::CIRCLE);
  CHECK(r.score == 0.6);
}
