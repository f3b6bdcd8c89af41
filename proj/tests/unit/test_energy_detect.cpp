#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hgr/energy_detect.hpp"
#include "support.hpp"

using namespace hgr;

namespace {

SkeletonSequence still_sequence(std::size_t n, const Vec3& p = Vec3(10.0, 180.0, -30.0)) {
  SkeletonSequence s;
  s.id = "still";
  for (std::size_t t = 0; t < n; ++t) s.frames.push_back(test::flat_frame(p, 20.0 * static_cast<double>(t)));
  return s;
}

/// Idle noise with large oscillating bursts starting at the given frames.
SkeletonSequence burst_sequence(const std::vector<std::size_t>& bursts, std::size_t burst_length, std::size_t n,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  SkeletonSequence s;
  s.id = "bursts";
  for (std::size_t t = 0; t < n; ++t) {
    HandFrame f;
    f.timestamp_ms = 20.0 * static_cast<double>(t);
    double dx = 0.0;
    for (std::size_t b : bursts) {
      if (t >= b && t < b + burst_length) {
        dx = 40.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t - b) / 20.0);
      }
    }
    for (std::size_t j = 0; j < kJointCount; ++j) {
      f.positions[j] = Vec3(5.0 * static_cast<double>(j) + dx + noise(rng), 200.0 + noise(rng), noise(rng));
    }
    s.frames.push_back(f);
  }
  return s;
}

SegmentClassifier constant_classifier(Label l, double p, double non_gesture) {
  return [=](FrameView) {
    ClassProbabilities out{};
    out[index_of(l)] = p;
    out[index_of(Label::NON_GESTURE)] = non_gesture;
    return out;
  };
}

}  // namespace

TEST_CASE("window energy of a static hand is zero") {
  const auto s = still_sequence(30);
  CHECK(window_energy(s.view()) == 0.0);
  CHECK(window_energy(s.view(), EnergyKind::Displacement) == 0.0);
  for (double e : frame_energy(s.view())) CHECK(e == 0.0);
}

TEST_CASE("single coordinate step") {
  // After the reference offset the x coordinate goes from 1 to 2.
  auto s = still_sequence(2, Vec3(100.0, 100.0, 100.0));
  s.frames[0].positions[7].x() = 1.0 - kEnergyOffsetMm;
  s.frames[1].positions[7].x() = 2.0 - kEnergyOffsetMm;
  CHECK(window_energy(s.view()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(window_energy(s.view(), EnergyKind::Displacement) == doctest::Approx(1.0).epsilon(1e-12));
  const auto fe = frame_energy(s.view());
  CHECK(fe[0] == 0.0);
  CHECK(fe[1] == doctest::Approx(1.0));
}

TEST_CASE("energy sums the per-axis ratio norm over joints and steps") {
  const auto s = test::random_sequence(12, 3);
  double expected = 0.0;
  for (std::size_t t = 1; t < s.size(); ++t) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      double sq = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double cur = s.frames[t].positions[j][a] + kEnergyOffsetMm;
        const double prev = s.frames[t - 1].positions[j][a] + kEnergyOffsetMm;
        sq += (cur / prev - 1.0) * (cur / prev - 1.0);
      }
      expected += std::sqrt(sq);
    }
  }
  CHECK(window_energy(s.view()) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("energy is finite at the guarded denominator") {
  auto s = still_sequence(3);
  s.frames[0].positions[0].y() = -kEnergyOffsetMm;
  CHECK(std::isfinite(window_energy(s.view())));
}

TEST_CASE("energy roughly doubles with the window length of a periodic motion") {
  std::vector<std::size_t> none;
  SkeletonSequence s = burst_sequence({0}, 400, 400, 1);
  const double e40 = window_energy(FrameView(s.frames).subspan(0, 40));
  const double e80 = window_energy(FrameView(s.frames).subspan(0, 80));
  CHECK(e80 / e40 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("energy is invariant to joint permutation") {
  const auto s = test::random_sequence(20, 8);
  std::array<std::size_t, kJointCount> perm{};
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    auto p = s;
    for (std::size_t t = 0; t < s.size(); ++t)
      for (std::size_t j = 0; j < kJointCount; ++j) p.frames[t].positions[j] = s.frames[t].positions[perm[j]];
    CHECK(window_energy(p.view()) == doctest::Approx(window_energy(s.view())).epsilon(1e-12));
  }
}

TEST_CASE("profile and local maxima") {
  const auto p = make_profile({1, 3, 5, 4, 2});
  REQUIRE(p.delta.size() == 5);
  CHECK_FALSE(p.delta[0].has_value());
  CHECK_FALSE(p.delta[4].has_value());
  CHECK(*p.delta[1] == 2.0);
  CHECK(*p.delta[2] == 0.5);
  CHECK(*p.delta[3] == -1.5);
  CHECK(select_candidates(p, 0.6) == std::vector<std::size_t>{2});
  CHECK(select_candidates(p, 0.5).empty());
  CHECK(default_epsilon(p) == doctest::Approx(0.1));

  CHECK(select_candidates(make_profile({1, 2, 3, 4, 5, 6}), 100.0).empty());
  CHECK(select_candidates(make_profile({1, 2}), 100.0).empty());

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> e(30);
    for (double& v : e) v = u(rng);
    const auto prof = make_profile(e);
    const double eps = u(rng) * 0.3;
    const auto c = select_candidates(prof, eps);
    CHECK(c.size() <= e.size() - 2);
    for (std::size_t i : c) {
      REQUIRE(i >= 2);
      REQUIRE(i + 2 < e.size());
      CHECK(*prof.delta[i - 1] > 0.0);
      CHECK(*prof.delta[i] < eps);
      CHECK(*prof.delta[i + 1] < 0.0);
    }
    for (std::size_t i = 2; i + 2 < e.size(); ++i) {
      const bool hit = *prof.delta[i - 1] > 0.0 && *prof.delta[i] < eps && *prof.delta[i + 1] < 0.0;
      CHECK(hit == (std::find(c.begin(), c.end(), i) != c.end()));
    }
  }
}

TEST_CASE("energy profile windows") {
  const auto s = burst_sequence({50}, 40, 200, 2);
  const auto prof = energy_profile(s.view(), 40, 10);
  CHECK(prof.window_starts.front() == 0);
  CHECK(prof.window_starts.back() + 40 <= 200);
  CHECK(prof.size() == 17);
  for (std::size_t i = 0; i < prof.size(); ++i) {
    CHECK(prof.energy[i] == doctest::Approx(window_energy(FrameView(s.frames).subspan(prof.window_starts[i], 40))));
    CHECK(prof.energy[i] >= 0.0);
  }
}

TEST_CASE("centred segments") {
  CHECK(centred_segment(400, 40, 200, 1000) == std::pair<std::size_t, std::size_t>{320, 519});
  CHECK(centred_segment(10, 40, 200, 1000) == std::pair<std::size_t, std::size_t>{0, 199});
  CHECK(centred_segment(950, 40, 200, 1000) == std::pair<std::size_t, std::size_t>{800, 999});
  CHECK(centred_segment(0, 40, 200, 120) == std::pair<std::size_t, std::size_t>{0, 119});
}

TEST_CASE("motion bursts produce covering candidates") {
  const std::vector<std::size_t> bursts{150, 450, 750};
  const auto s = burst_sequence(bursts, 40, 1000, 3);
  CandidateFilterConfig cfg;
  const auto report = analyze_candidates(s, 40, 10, cfg, constant_classifier(Label::KNOB, 0.9, 0.05));
  CHECK(report.candidates.size() >= 3);
  for (std::size_t b : bursts) {
    const bool covered = std::any_of(report.candidates.begin(), report.candidates.end(), [&](const Candidate& c) {
      return c.segment_start <= b && b + 39 <= c.segment_end && c.segment_end - c.segment_start + 1 == 200;
    });
    CHECK(covered);
  }
  const auto events = detect_candidates(s, 40, 10, cfg, constant_classifier(Label::KNOB, 0.9, 0.05));
  CHECK(events.size() >= 3);
  for (std::size_t i = 1; i < events.size(); ++i) CHECK(events[i - 1].end_frame < events[i].start_frame);
  for (std::size_t b : bursts) {
    CHECK(std::any_of(events.begin(), events.end(), [&](const DetectionEvent& e) {
      return e.label == Label::KNOB && e.start_frame <= b + 20 && b + 20 <= e.end_frame;
    }));
  }
}

TEST_CASE("confidence filtering") {
  const auto s = burst_sequence({150, 450, 750}, 40, 1000, 4);
  auto kept_with = [&](double alpha, double beta, double p, double ng) {
    CandidateFilterConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = beta;
    const auto r = analyze_candidates(s, 40, 10, cfg, constant_classifier(Label::V, p, ng));
    return static_cast<std::size_t>(std::count_if(r.candidates.begin(), r.candidates.end(),
                                                  [](const Candidate& c) { return c.kept; }));
  };
  CandidateFilterConfig base;
  const auto all = analyze_candidates(s, 40, 10, base, constant_classifier(Label::V, 0.3, 0.7)).candidates.size();
  REQUIRE(all > 0);
  CHECK(kept_with(1.0, 0.0, 0.3, 0.7) == all);
  CHECK(kept_with(0.5, 0.0, 0.3, 0.7) == 0);
  CHECK(kept_with(1.0, 1.0, 0.99, 0.01) == 0);
  CHECK(kept_with(1.0, 0.3, 0.3, 0.7) == all);
  CHECK(kept_with(1.0, 0.31, 0.3, 0.7) == 0);

  // Raising beta or lowering alpha never keeps more candidates.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SegmentClassifier random_scores = [&](FrameView seg) {
    std::mt19937_64 local(seg.size() * 7919 + static_cast<std::size_t>(seg.front().timestamp_ms));
    ClassProbabilities p{};
    double sum = 0.0;
    for (double& v : p) sum += (v = u(local));
    for (double& v : p) v /= sum;
    return p;
  };
  std::size_t prev = SIZE_MAX;
  for (double beta : {0.0, 0.05, 0.08, 0.1, 0.2, 1.0}) {
    CandidateFilterConfig cfg;
    cfg.alpha = 1.0;
    cfg.beta = beta;
    const auto r = analyze_candidates(s, 40, 10, cfg, random_scores);
    const auto k = static_cast<std::size_t>(std::count_if(r.candidates.begin(), r.candidates.end(),
                                                          [](const Candidate& c) { return c.kept; }));
    CHECK(k <= prev);
    prev = k;
  }
  CHECK(prev == 0);
}

TEST_CASE("failing classifier skips the segment") {
  const auto s = burst_sequence({150, 450}, 40, 700, 5);
  const SegmentClassifier broken = [](FrameView) -> ClassProbabilities { throw Error("model not loaded"); };
  const auto r = analyze_candidates(s, 40, 10, {}, broken);
  CHECK(r.candidates.empty());
  CHECK(detect_candidates(s, 40, 10, {}, broken).empty());
}

TEST_CASE("short sequences are rejected") {
  const auto s = still_sequence(59);
  CHECK_THROWS_AS(detect_candidates(s, 40, 10, {}, constant_classifier(Label::V, 1.0, 0.0)), Error);
  CHECK(detect_candidates(still_sequence(60), 40, 10, {}, constant_classifier(Label::V, 1.0, 0.0)).empty());
}

TEST_CASE("overlapping events keep the more confident") {
  std::vector<Candidate> kept(3);
  kept[0].event_start = 0;
  kept[0].event_end = 50;
  kept[0].label = Label::V;
  kept[0].confidence = 0.6;
  kept[1].event_start = 40;
  kept[1].event_end = 90;
  kept[1].label = Label::OK;
  kept[1].confidence = 0.8;
  kept[2].event_start = 100;
  kept[2].event_end = 120;
  kept[2].label = Label::V;
  kept[2].confidence = 0.5;
  const auto e = suppress_overlaps(kept, "s");
  CHECK(e == std::vector<DetectionEvent>{{"s", Label::OK, 40, 90}, {"s", Label::V, 100, 120}});
}

TEST_CASE("equally confident overlapping events keep the higher energy") {
  std::vector<Candidate> kept(2);
  kept[0].event_start = 0;
  kept[0].event_end = 199;
  kept[0].label = Label::V;
  kept[0].confidence = 0.7;
  kept[0].energy = 0.4;
  kept[1].event_start = 80;
  kept[1].event_end = 279;
  kept[1].label = Label::V;
  kept[1].confidence = 0.7;
  kept[1].energy = 9.0;
  CHECK(suppress_overlaps(kept, "s") == std::vector<DetectionEvent>{{"s", Label::V, 80, 279}});
}
