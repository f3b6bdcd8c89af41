#include <doctest.h>

#include <fstream>
#include <random>

#include "../common/matching_oracle.hpp"
#include "hgr/eval.hpp"
#include "support.hpp"

using namespace hgr;

namespace {

GestureSpan sp(Label l, std::size_t a, std::size_t b, const std::string& id = "s") { return {id, l, a, b}; }

const std::map<std::string, std::size_t> kLen{{"s", 100}};

}  // namespace

TEST_CASE("jaccard index") {
  const std::vector<GestureSpan> a{sp(Label::TAP, 10, 19)};
  CHECK(jaccard_index(a, a, 100, Label::TAP) == 1.0);
  const std::vector<GestureSpan> b{sp(Label::TAP, 15, 24)};
  CHECK(jaccard_index(a, b, 100, Label::TAP) == doctest::Approx(1.0 / 3.0));
  const std::vector<GestureSpan> c{sp(Label::TAP, 40, 49)};
  CHECK(jaccard_index(a, c, 100, Label::TAP) == 0.0);
  CHECK(jaccard_index(a, b, 100, Label::KNOB) == 1.0);
  const std::vector<GestureSpan> d{sp(Label::KNOB, 10, 19)};
  CHECK(jaccard_index(a, d, 100, Label::TAP) == 0.0);
}

TEST_CASE("jaccard index matches a frame-counting oracle and is symmetric") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pos(0, 59);
  std::uniform_int_distribution<int> n(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<GestureSpan> g, p;
    for (int k = n(rng); k > 0; --k) {
      auto x = pos(rng), y = pos(rng);
      g.push_back(sp(k % 2 ? Label::V : Label::OK, std::min(x, y), std::max(x, y)));
    }
    for (int k = n(rng); k > 0; --k) {
      auto x = pos(rng), y = pos(rng);
      p.push_back(sp(k % 2 ? Label::V : Label::OK, std::min(x, y), std::max(x, y)));
    }
    for (auto l : {Label::V, Label::OK}) {
      CHECK(jaccard_index(g, p, 60, l) == doctest::Approx(oracle::counted_jaccard(g, p, 60, l)));
      CHECK(jaccard_index(g, p, 60, l) == jaccard_index(p, g, 60, l));
    }
  }
}

TEST_CASE("temporal iou") {
  CHECK(temporal_iou(sp(Label::V, 0, 9), sp(Label::V, 2, 9)) == doctest::Approx(0.8));
  CHECK(temporal_iou(sp(Label::V, 0, 9), sp(Label::V, 0, 4)) == doctest::Approx(0.5));
  CHECK(temporal_iou(sp(Label::V, 0, 9), sp(Label::V, 10, 19)) == 0.0);
}

TEST_CASE("scripted scoring cases") {
  struct Case {
    const char* name;
    std::vector<GestureSpan> gt, pred;
    Label cls;
    double det, fp, mean_jaccard;
  };
  const std::vector<Case> cases{
      {"identical", {sp(Label::TAP, 10, 19)}, {sp(Label::TAP, 10, 19)}, Label::TAP, 1.0, 0.0, 1.0},
      {"iou 0.8", {sp(Label::TAP, 0, 9)}, {sp(Label::TAP, 2, 9)}, Label::TAP, 1.0, 0.0, 0.8},
      {"iou one third", {sp(Label::TAP, 10, 19)}, {sp(Label::TAP, 15, 24)}, Label::TAP, 0.0, 1.0, 1.0 / 3.0},
      {"iou exactly one half", {sp(Label::TAP, 0, 9)}, {sp(Label::TAP, 0, 4)}, Label::TAP, 0.0, 1.0, 0.5},
      {"iou 0.6", {sp(Label::TAP, 0, 9)}, {sp(Label::TAP, 0, 5)}, Label::TAP, 1.0, 0.0, 0.6},
      {"empty prediction", {sp(Label::TAP, 0, 9)}, {}, Label::TAP, 0.0, 0.0, 0.0},
      {"duplicate prediction", {sp(Label::TAP, 0, 9)}, {sp(Label::TAP, 0, 9), sp(Label::TAP, 1, 9)}, Label::TAP, 1.0,
       1.0, 1.0},
      {"one prediction over two gestures",
       {sp(Label::TAP, 0, 9), sp(Label::TAP, 20, 29)},
       {sp(Label::TAP, 0, 29)},
       Label::TAP, 0.0, 0.5, 20.0 / 30.0},
      {"two gestures, two hits",
       {sp(Label::TAP, 0, 9), sp(Label::TAP, 20, 29)},
       {sp(Label::TAP, 1, 9), sp(Label::TAP, 20, 28)},
       Label::TAP, 1.0, 0.0, 18.0 / 20.0},
      {"disjoint", {sp(Label::TAP, 0, 9)}, {sp(Label::TAP, 50, 59)}, Label::TAP, 0.0, 1.0, 0.0},
      {"late prediction after a miss",
       {sp(Label::TAP, 0, 9), sp(Label::TAP, 30, 39)},
       {sp(Label::TAP, 31, 39)},
       Label::TAP, 0.5, 0.0, 9.0 / 20.0},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const auto r = match_and_score(c.gt, c.pred, kLen);
    CHECK(r.per_class[index_of(c.cls)].detection_rate == doctest::Approx(c.det));
    CHECK(r.per_class[index_of(c.cls)].fp_rate == doctest::Approx(c.fp));
    CHECK(r.mean_jaccard == doctest::Approx(c.mean_jaccard));
  }
}

TEST_CASE("wrong label counts as a miss and a false positive of the predicted class") {
  const std::vector<GestureSpan> gt{sp(Label::TAP, 0, 9)};
  const std::vector<GestureSpan> pred{sp(Label::KNOB, 2, 9)};
  const auto r = match_and_score(gt, pred, kLen);
  CHECK(r.per_class[index_of(Label::TAP)].detection_rate == 0.0);
  CHECK(r.per_class[index_of(Label::KNOB)].fp_rate == 1.0);
  CHECK(r.per_class[index_of(Label::KNOB)].unmatched_pred == 1);
  CHECK(r.mean_jaccard == 0.0);
}

TEST_CASE("jaccard averages over classes present, then over sequences") {
  const std::map<std::string, std::size_t> len{{"a", 50}, {"b", 50}};
  const std::vector<GestureSpan> gt{sp(Label::OK, 0, 9, "a"), sp(Label::V, 20, 29, "a"), sp(Label::OK, 0, 9, "b")};
  const std::vector<GestureSpan> pred{sp(Label::OK, 0, 9, "a"), sp(Label::V, 22, 29, "a")};
  const auto r = match_and_score(gt, pred, len);
  CHECK(r.mean_jaccard == doctest::Approx(((1.0 + 0.8) / 2.0 + 0.0) / 2.0));
  CHECK(r.per_class[index_of(Label::OK)].jaccard == doctest::Approx(0.5));
  CHECK(r.per_class[index_of(Label::OK)].detection_rate == doctest::Approx(0.5));
  CHECK(r.per_class[index_of(Label::V)].detection_rate == 1.0);
}

TEST_CASE("unknown sequences and invalid spans are rejected") {
  const std::vector<GestureSpan> gt{sp(Label::OK, 0, 9)};
  CHECK_THROWS_AS(match_and_score(gt, std::vector<GestureSpan>{sp(Label::OK, 0, 9, "zzz")}, kLen), Error);
  CHECK_THROWS_AS(match_and_score(gt, std::vector<GestureSpan>{sp(Label::OK, 90, 100)}, kLen), Error);
}

namespace {

bool pairwise_disjoint(const std::vector<GestureSpan>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      if (v[i].start_frame <= v[j].end_frame && v[j].start_frame <= v[i].end_frame) return false;
    }
  }
  return true;
}

std::size_t greedy_count(const std::vector<GestureSpan>& g, const std::vector<GestureSpan>& p) {
  const auto m = greedy_match(g, p);
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](long x) { return x >= 0; }));
}

}  // namespace

TEST_CASE("greedy matching equals exhaustive optimal matching on small cases") {
  // Every set of up to three distinct intervals within 6 frames, one class.
  std::vector<GestureSpan> intervals;
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = a; b < 6; ++b) intervals.push_back(sp(Label::CROSS, a, b));
  }
  std::vector<std::vector<GestureSpan>> sets;
  const std::size_t n = intervals.size();
  for (std::size_t i = 0; i < n; ++i) {
    sets.push_back({intervals[i]});
    for (std::size_t j = i + 1; j < n; ++j) {
      sets.push_back({intervals[i], intervals[j]});
      for (std::size_t k = j + 1; k < n; ++k) sets.push_back({intervals[i], intervals[j], intervals[k]});
    }
  }
  std::size_t disjoint_cases = 0, disjoint_differing = 0, overlapping_differing = 0;
  for (const auto& g : sets) {
    const bool disjoint = pairwise_disjoint(g);
    for (const auto& p : sets) {
      const bool differs = greedy_count(g, p) != oracle::optimal_matches(g, p);
      if (disjoint) {
        ++disjoint_cases;
        disjoint_differing += differs;
      } else {
        overlapping_differing += differs;
      }
    }
  }
  MESSAGE("greedy below optimal on " << overlapping_differing << " cases with overlapping ground truth");
  CHECK(disjoint_cases > 10000);
  CHECK(disjoint_differing == 0);
}

TEST_CASE("greedy matching can fall short of optimal when ground truth overlaps") {
  const std::vector<GestureSpan> gt{sp(Label::CROSS, 0, 2), sp(Label::CROSS, 0, 3)};
  const std::vector<GestureSpan> pred{sp(Label::CROSS, 0, 3), sp(Label::CROSS, 1, 2)};
  CHECK(oracle::optimal_matches(gt, pred) == 2);
  CHECK(greedy_count(gt, pred) == 1);
  CHECK(greedy_match(gt, pred) == std::vector<long>{0, -1});
}

TEST_CASE("matching is one-to-one and independent of sequence order") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> pos(0, 79);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GestureSpan> gt, pred;
    for (const char* id : {"a", "b", "c"}) {
      for (int k = 0; k < 3; ++k) {
        auto x = pos(rng), y = pos(rng);
        gt.push_back(sp(k % 2 ? Label::LEFT : Label::RIGHT, std::min(x, y), std::max(x, y), id));
        x = pos(rng), y = pos(rng);
        pred.push_back(sp(k % 2 ? Label::LEFT : Label::RIGHT, std::min(x, y), std::max(x, y), id));
      }
    }
    const std::map<std::string, std::size_t> len{{"a", 80}, {"b", 80}, {"c", 80}};
    const auto r1 = match_and_score(gt, pred, len);
    std::vector<GestureSpan> gt2(gt.rbegin(), gt.rend()), pred2(pred.rbegin(), pred.rend());
    const auto r2 = match_and_score(gt2, pred2, len);
    CHECK(r1.matched == r2.matched);
    CHECK(r1.mean_jaccard == doctest::Approx(r2.mean_jaccard));
    for (std::size_t c = 0; c < kGestureCount; ++c) {
      CHECK(r1.per_class[c].matched <= std::min(r1.per_class[c].gt_count,
                                                r1.per_class[c].matched + r1.per_class[c].unmatched_pred));
    }
  }
}

TEST_CASE("perfect detector and reports") {
  const std::vector<GestureSpan> gt{sp(Label::ONE, 0, 9), sp(Label::EXPAND, 30, 49)};
  auto r = match_and_score(gt, gt, kLen);
  r.name = "perfect";
  CHECK(r.mean_detection_rate == 1.0);
  CHECK(r.mean_fp_rate == 0.0);
  CHECK(r.mean_jaccard == 1.0);
  const auto csv = report_csv(r);
  CHECK(csv.rfind("class,jaccard,det_rate,fp_rate,gt_count,matched,unmatched_pred\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(kGestureCount) + 2);
  const MetricsReport runs[] = {r};
  const auto json = report_json(runs);
  CHECK(json.find("\"perfect\"") != std::string::npos);
  CHECK(summary_table(runs).find("perfect") != std::string::npos);
}

TEST_CASE("reports are written next to missing directories") {
  const std::vector<GestureSpan> gt{sp(Label::ONE, 0, 9)};
  auto r = match_and_score(gt, gt, kLen);
  r.name = "nested";
  const auto stem = test::scratch_dir("eval_report") / "a" / "b" / "run";
  write_report(r, stem);
  std::ifstream csv(stem.string() + ".csv"), json(stem.string() + ".json");
  CHECK(csv.good());
  CHECK(json.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header == "class,jaccard,det_rate,fp_rate,gt_count,matched,unmatched_pred");
}
