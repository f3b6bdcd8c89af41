#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "hgr/baseline_dissim.hpp"
#include "hgr/eval.hpp"
#include "hgr/synth.hpp"
#include "support.hpp"

using namespace hgr;

namespace {

Dataset synth_set(std::size_t sequences, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.sequence_count = sequences;
  cfg.gestures_per_sequence = {4};
  cfg.seed = seed;
  return synth::synth_generate(cfg);
}

const Dataset& shared_set() {
  static const Dataset d = synth_set(108, 31);
  return d;
}

FrameWindow resampled_clip(Label l, std::uint64_t seed) {
  const auto clip = synth::gesture_clip(l, 45, 0.3, seed);
  return resample_sequence(clip, kResampleSteps);
}

GestureDictionary dictionary_from(const std::vector<FrameWindow>& reps) {
  GestureDictionary d;
  for (const auto& w : reps) {
    d.representation.push_back(d.entries.size());
    d.entries.push_back({Label::TAP, w, "x", 0, w.size()});
  }
  d.refresh_signatures();
  return d;
}

}  // namespace

TEST_CASE("dictionary from the training split") {
  const auto& data = shared_set();
  DictionaryConfig cfg;
  cfg.seed = 4;
  cfg.non_gesture_count = 100;
  const auto dict = build_dictionary(data.sequences, data.annotations, cfg);
  std::size_t gestures = 0, negatives = 0;
  std::array<std::size_t, kGestureCount> per_class{}, rep_per_class{};
  for (const auto& e : dict.entries) {
    CHECK(e.window.size() == kResampleSteps);
    if (e.label == Label::NON_GESTURE) {
      ++negatives;
    } else {
      ++gestures;
      ++per_class[index_of(e.label)];
    }
  }
  CHECK(gestures == 24 * 18);
  CHECK(negatives == 100);
  for (std::size_t c = 0; c < kGestureCount; ++c) {
    CHECK(per_class[c] == 24);
    CHECK(dict.class_mean_length[c] > 0.0);
  }

  std::vector<std::size_t> all(dict.representation);
  all.insert(all.end(), dict.training.begin(), dict.training.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(dict.entries.size());
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(all == expected);
  for (std::size_t i : dict.representation) {
    if (is_gesture(dict.entries[i].label)) ++rep_per_class[index_of(dict.entries[i].label)];
  }
  for (std::size_t c = 0; c < kGestureCount; ++c) CHECK(rep_per_class[c] == 12);
  CHECK(dict.rep_signatures.size() == dict.rep_count());
  CHECK(dict.feature_width() == 12 * dict.rep_count());

  const auto again = build_dictionary(data.sequences, data.annotations, cfg);
  CHECK(again.representation == dict.representation);
  REQUIRE(again.entries.size() == dict.entries.size());
  for (std::size_t i = 0; i < dict.entries.size(); ++i) {
    CHECK(again.entries[i].label == dict.entries[i].label);
    CHECK(again.entries[i].sequence_id == dict.entries[i].sequence_id);
    CHECK(again.entries[i].source_start == dict.entries[i].source_start);
    CHECK(again.entries[i].source_length == dict.entries[i].source_length);
  }

  DictionaryConfig none = cfg;
  none.non_gesture_count = 0;
  const auto no_negatives = build_dictionary(data.sequences, data.annotations, none);
  CHECK(std::none_of(no_negatives.entries.begin(), no_negatives.entries.end(),
                     [](const DictionaryEntry& e) { return e.label == Label::NON_GESTURE; }));
  CHECK_THROWS_AS(train_svms(no_negatives, {}), Error);

  CHECK_THROWS_AS(build_dictionary(data.sequences, std::span<const AnnotationSpan>(), cfg), Error);
}

TEST_CASE("dissimilarity vectors") {
  std::vector<FrameWindow> reps;
  for (std::uint64_t s = 0; s < 3; ++s) reps.push_back(resampled_clip(label_at(s * 5), 10 + s));
  const auto dict = dictionary_from(reps);
  CHECK(dict.feature_width() == 36);

  const auto self = dissimilarity_vector(reps[1], dict);
  REQUIRE(self.size() == 36);
  for (std::size_t k = 12; k < 24; ++k) CHECK(self[k] == 0.0);
  CHECK(std::accumulate(self.begin(), self.begin() + 12, 0.0) > 0.0);

  FrameWindow moved = reps[1];
  for (auto& f : moved)
    for (auto& p : f.positions) p += Vec3(10.0, 0.0, 0.0);
  const auto shifted = dissimilarity_vector(moved, dict);
  CHECK(shifted[12] == doctest::Approx(200.0).epsilon(1e-12));
  for (std::size_t k = 13; k < 24; ++k) CHECK(shifted[k] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  std::vector<FrameWindow> fifty;
  for (std::uint64_t s = 0; s < 50; ++s) fifty.push_back(resampled_clip(label_at(s % 18), s));
  CHECK(dissimilarity_vector(reps[0], dictionary_from(fifty)).size() == 600);

  CHECK_THROWS_AS(dissimilarity_vector(FrameView(reps[0]).first(19), dict), Error);
}

TEST_CASE("dissimilarity components by hand") {
  // Two representatives built from straight palm motions.
  auto line = [](double speed) {
    FrameWindow w;
    for (std::size_t t = 0; t < kResampleSteps; ++t)
      w.push_back(test::flat_frame(Vec3(speed * static_cast<double>(t), 100.0, 0.0), 20.0 * static_cast<double>(t)));
    return w;
  };
  const auto a = gesture_signature(line(1.0));
  const auto b = gesture_signature(line(3.0));
  CHECK(a.path_length == doctest::Approx(19.0));
  CHECK(b.path_length == doctest::Approx(57.0));
  const std::vector<GestureSignature> reps{b};
  const auto v = dissimilarity_vector(a, reps);
  double palm = 0.0;
  for (std::size_t t = 0; t < kResampleSteps; ++t) palm += 2.0 * static_cast<double>(t);
  CHECK(v[0] == doctest::Approx(palm));
  for (std::size_t k = 1; k <= 9; ++k) CHECK(v[k] == 0.0);
  CHECK(v[10] == doctest::Approx(38.0));
  CHECK(v[11] == doctest::Approx(19.0 * 2.0));
}

TEST_CASE("linear svm on a separable toy") {
  const std::vector<std::vector<double>> x{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  const std::vector<int> y{1, 1, -1, -1};
  SvmTrainConfig cfg;
  cfg.epochs = 400;
  cfg.reg = 1e-4;
  const auto m = train_linear_svm(x, y, cfg);
  const auto fit = evaluate_svm(m, x, y);
  CHECK(fit.accuracy == 1.0);
  CHECK(fit.hinge < 0.05);
  CHECK(m.weights[0] > 0.0);
  CHECK(std::abs(m.weights[1]) < 0.1 * m.weights[0]);
}

TEST_CASE("linear svm sanity on inseparable data") {
  const std::vector<std::vector<double>> x(10, std::vector<double>{0.5, 2.0});
  const std::vector<int> y{1, 1, 1, -1, -1, -1, -1, -1, -1, -1};
  const auto m = train_linear_svm(x, y, {});
  CHECK(evaluate_svm(m, x, y).accuracy <= 0.7);
  CHECK_THROWS_AS(train_linear_svm(x, std::vector<int>(10, 1), {}), Error);
  CHECK_THROWS_AS(train_linear_svm(x, std::span<const int>(y).first(3), {}), Error);
}

TEST_CASE("svm decisions are invariant to a consistent feature permutation") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 80; ++i) {
    const int label = i % 2 ? 1 : -1;
    x.push_back({n(rng) + label, n(rng), 3.0 * n(rng) - label, n(rng) * 0.1});
    y.push_back(label);
  }
  const std::array<std::size_t, 4> perm{2, 0, 3, 1};
  auto permute = [&](const std::vector<double>& v) {
    std::vector<double> out(4);
    for (std::size_t k = 0; k < 4; ++k) out[k] = v[perm[k]];
    return out;
  };
  std::vector<std::vector<double>> xp;
  for (const auto& v : x) xp.push_back(permute(v));
  const auto a = train_linear_svm(x, y, {});
  const auto b = train_linear_svm(xp, y, {});
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(b.decision(xp[i]) == doctest::Approx(a.decision(x[i])).epsilon(1e-9));
}

TEST_CASE("merging window hits") {
  const std::vector<WindowHit> three{{Label::V, 100, 50, 0.4}, {Label::V, 106, 50, 0.9}, {Label::V, 112, 50, 0.2}};
  const auto e = merge_hits(three, 6, "s");
  REQUIRE(e.size() == 1);
  CHECK(e[0].end_frame - e[0].start_frame + 1 == 62);
  CHECK(e[0] == DetectionEvent{"s", Label::V, 51, 112});

  const std::vector<WindowHit> gap{{Label::V, 100, 20, 0.4}, {Label::V, 130, 20, 0.4}};
  CHECK(merge_hits(gap, 6, "s").size() == 2);

  const std::vector<WindowHit> clash{{Label::V, 100, 50, 0.4}, {Label::OK, 110, 40, 0.8}, {Label::TAP, 300, 30, 0.1}};
  CHECK(merge_hits(clash, 6, "s") ==
        std::vector<DetectionEvent>{{"s", Label::OK, 71, 110}, {"s", Label::TAP, 271, 300}});
  CHECK(merge_hits({}, 6, "s").empty());
}

TEST_CASE("baseline training, detection and persistence") {
  const auto& data = shared_set();
  static const auto dict = build_dictionary(data.sequences, data.annotations, DictionaryConfig{});
  static const auto svms = train_svms(dict, SvmTrainConfig{.reg = 0.03});
  REQUIRE(svms.size() == kGestureCount);
  for (std::size_t c = 0; c < kGestureCount; ++c) {
    CHECK(svms[c].label == label_at(c));
    CHECK(svms[c].weights.size() == dict.feature_width());
  }

  SUBCASE("silent models detect nothing") {
    auto silent = svms;
    for (auto& m : silent) {
      std::fill(m.weights.begin(), m.weights.end(), 0.0);
      m.bias = -1.0;
    }
    CHECK(detect_sliding(data.sequences[0], silent, dict).empty());
  }

  SUBCASE("an embedded gesture is found") {
    const auto test = synth_set(6, 77);
    std::size_t found = 0, total = 0;
    for (const auto& a : test.annotations) {
      const auto* seq = test.find(a.sequence_id);
      const std::size_t from = a.start_frame >= 50 ? a.start_frame - 50 : 0;
      const std::size_t to = std::min(seq->size() - 1, a.end_frame + 50);
      const auto view = crop_window(*seq, from, to - from + 1);
      SkeletonSequence clip{seq->id, FrameWindow(view.begin(), view.end()), seq->frame_rate_hz};
      const GestureSpan truth{seq->id, a.label, a.start_frame - from, a.end_frame - from};
      const auto events = detect_sliding(clip, svms, dict);
      ++total;
      found += std::any_of(events.begin(), events.end(), [&](const DetectionEvent& e) {
        return e.label == truth.label && temporal_iou(e, truth) > 0.5;
      });
      for (const auto& e : events) CHECK(e.end_frame < clip.size());
    }
    CHECK(static_cast<double>(found) / static_cast<double>(total) >= 0.75);
  }

  SUBCASE("events do not overlap within a class") {
    const auto events = detect_sliding(data.sequences[3], svms, dict);
    for (std::size_t i = 0; i < events.size(); ++i)
      for (std::size_t j = i + 1; j < events.size(); ++j)
        if (events[i].label == events[j].label)
          CHECK((events[i].end_frame < events[j].start_frame || events[j].end_frame < events[i].start_frame));
  }

  SUBCASE("save and load") {
    BaselineModel model{dict, svms};
    const auto dir = test::scratch_dir("baseline");
    model.save(dir);
    const auto back = BaselineModel::load(dir);
    CHECK(back.svms.size() == svms.size());
    CHECK(detect_sliding(data.sequences[1], back.svms, back.dictionary) ==
          detect_sliding(data.sequences[1], svms, dict));
    const auto text = serialize_svms(svms);
    CHECK(serialize_svms(parse_svms(text)) == text);
    try {
      parse_svms("V;0.5;1,2\nOK;zz;1,2\n", "m");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
}

TEST_CASE("a class without positives is named") {
  const auto& data = shared_set();
  std::vector<AnnotationSpan> without_knob;
  for (const auto& a : data.annotations)
    if (a.label != Label::KNOB) without_knob.push_back(a);
  const auto dict = build_dictionary(data.sequences, without_knob, {});
  try {
    train_svms(dict, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("KNOB") != std::string::npos);
  }
}
