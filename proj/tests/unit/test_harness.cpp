#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hgr/harness.hpp"
#include "hgr/synth.hpp"
#include "support.hpp"

using namespace hgr;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Dataset small_set(std::size_t sequences, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.sequence_count = sequences;
  cfg.seed = seed;
  return synth::synth_generate(cfg);
}

/// Labels a segment with the ground-truth gesture it overlaps most.
SegmentClassifier truth_classifier(const Dataset& data) {
  return [&data](FrameView seg) {
    ClassProbabilities p{};
    p[index_of(Label::NON_GESTURE)] = 0.9;
    for (const auto& seq : data.sequences) {
      const HandFrame* base = seq.frames.data();
      if (seg.data() < base || seg.data() >= base + seq.size()) continue;
      const auto start = static_cast<std::size_t>(seg.data() - base);
      const GestureSpan window{seq.id, Label::ONE, start, start + seg.size() - 1};
      double best = 0.0;
      for (const auto& a : data.annotations) {
        if (a.sequence_id != seq.id) continue;
        const double overlap = temporal_iou(window, GestureSpan{seq.id, Label::ONE, a.start_frame, a.end_frame});
        if (overlap > best) {
          best = overlap;
          p = ClassProbabilities{};
          p[index_of(a.label)] = 0.8;
          p[index_of(Label::NON_GESTURE)] = 0.2;
        }
      }
    }
    return p;
  };
}

}  // namespace

TEST_CASE("synthetic data is reproducible") {
  synth::SynthConfig cfg;
  cfg.sequence_count = 3;
  cfg.seed = 12;
  const auto a = test::scratch_dir("synth_a"), b = test::scratch_dir("synth_b");
  save_dataset(synth::synth_generate(cfg), a / "sequences", a / "annotations.txt");
  save_dataset(synth::synth_generate(cfg), b / "sequences", b / "annotations.txt");
  CHECK(slurp(a / "annotations.txt") == slurp(b / "annotations.txt"));
  for (const auto& f : std::filesystem::directory_iterator(a / "sequences")) {
    CHECK(slurp(f.path()) == slurp(b / "sequences" / f.path().filename()));
  }
  cfg.seed = 13;
  const auto c = test::scratch_dir("synth_c");
  save_dataset(synth::synth_generate(cfg), c / "sequences", c / "annotations.txt");
  CHECK(slurp(a / "annotations.txt") != slurp(c / "annotations.txt"));
}

TEST_CASE("synthetic bookkeeping") {
  synth::SynthConfig cfg;
  cfg.sequence_count = 5;
  cfg.gestures_per_sequence = {4};
  cfg.classes = {Label::PINCH, Label::CIRCLE, Label::OK};
  const auto d = synth::synth_generate(cfg);
  CHECK(d.sequences.size() == 5);
  CHECK(d.annotations.size() == 20);
  std::map<Label, std::size_t> counts;
  for (const auto& a : d.annotations) {
    ++counts[a.label];
    const auto* seq = d.find(a.sequence_id);
    REQUIRE(seq != nullptr);
    CHECK_NOTHROW(validate_span(a, seq->size()));
    const auto [lo, hi] = synth::gesture_length_range(a.label);
    CHECK(a.end_frame - a.start_frame + 1 >= lo);
    CHECK(a.end_frame - a.start_frame + 1 <= hi);
  }
  CHECK(counts.size() == 3);
  for (const auto& [l, n] : counts) CHECK((n == 6 || n == 7));

  cfg.gestures_per_sequence = {3, 4, 5};
  cfg.sequence_count = 30;
  std::set<std::size_t> per_sequence;
  const auto mixed = synth::synth_generate(cfg);
  for (const auto& s : mixed.sequences) {
    per_sequence.insert(static_cast<std::size_t>(std::count_if(
        mixed.annotations.begin(), mixed.annotations.end(), [&](const AnnotationSpan& a) { return a.sequence_id == s.id; })));
  }
  CHECK(per_sequence == std::set<std::size_t>{3, 4, 5});

  cfg.classes = {Label::NON_GESTURE};
  CHECK_THROWS_AS(synth::synth_generate(cfg), Error);
  cfg = synth::SynthConfig{};
  cfg.sequence_count = 0;
  CHECK_THROWS_AS(synth::synth_generate(cfg), Error);
}

TEST_CASE("pinch closes then opens") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto clip = synth::gesture_clip(Label::PINCH, 60, 0.0, seed);
    std::vector<double> gap;
    for (const auto& f : clip) {
      gap.push_back((f.positions[index_of(JointId::ThumbEnd)] - f.positions[index_of(JointId::IndexEnd)]).norm());
    }
    const auto lowest = static_cast<std::size_t>(std::min_element(gap.begin(), gap.end()) - gap.begin());
    CHECK(lowest > 0);
    CHECK(lowest + 1 < gap.size());
    for (std::size_t t = 1; t <= lowest; ++t) CHECK(gap[t] < gap[t - 1]);
    for (std::size_t t = lowest + 1; t < gap.size(); ++t) CHECK(gap[t] > gap[t - 1]);
  }
}

TEST_CASE("methods") {
  for (auto m : {Method::Baseline, Method::UDeepGRU, Method::TSGR, Method::Fsm, Method::Energy}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("transformer"), Error);
}

TEST_CASE("every pipeline shares the event contract") {
  const auto train = small_set(12, 3);
  const auto test = small_set(4, 4);

  RecognizerConfig rc;
  rc.widths = {16, 16};
  TrainProtocol tp;
  tp.epochs = 2;
  tp.lr = 3e-3;
  const auto r = train_recognizer(rc, tp, train);
  RecognizerConfig gc = rc;
  gc.kind = RecognizerKind::UDeepGRU;
  const auto g = train_recognizer(gc, tp, train);
  const auto baseline = train_baseline(train, {}, {});
  const auto templates = build_templates(train, 8);
  CHECK(templates.bins() == 8);
  CHECK(templates.templates().size() == kTrajectoryClasses.size());

  const std::vector<Recognizer> pair{r, g};
  auto runs = [&] {
    std::vector<PipelineRun> out;
    out.push_back(run_baseline(baseline, test.sequences));
    out.push_back(run_argmax(g, test.sequences));
    out.push_back(run_argmax(r, test.sequences));
    out.push_back(run_argmax(pair, test.sequences));
    out.push_back(run_fsm(r, test.sequences));
    out.push_back(run_fsm(pair, test.sequences));
    out.push_back(run_energy(recognizer_segment_classifier(r), &templates, test.sequences, {}));
    out.push_back(run_energy(recognizer_segment_classifier(r), nullptr, test.sequences, {}));
    return out;
  };
  const auto first = runs();
  const auto second = runs();
  REQUIRE(first.size() == second.size());
  std::set<std::string> names;
  for (std::size_t i = 0; i < first.size(); ++i) {
    const auto& run = first[i];
    CAPTURE(run.method);
    names.insert(run.method);
    CHECK(run.events == second[i].events);
    CHECK(run.total_seconds >= 0.0);
    CHECK(run.classifications > 0);
    for (const auto& e : run.events) {
      const auto* seq = test.find(e.sequence_id);
      REQUIRE(seq != nullptr);
      CHECK(e.start_frame <= e.end_frame);
      CHECK(e.end_frame < seq->size());
      CHECK(is_gesture(e.label));
    }
    const auto report = score_run(run, test);
    CHECK(report.name == run.method);
    CHECK(report.mean_jaccard >= 0.0);
    CHECK(report.mean_jaccard <= 1.0);
    CHECK(report.total_seconds == run.total_seconds);
  }
  CHECK(names.size() == first.size());
  CHECK(score_run(first[0], test).mean_jaccard == score_run(second[0], test).mean_jaccard);
}

TEST_CASE("histogram refinement of a segment classifier") {
  ClassTemplates t(2);
  t.set(Label::CIRCLE, OrientationHistogram{{0.5, 0.5}});
  const SegmentClassifier base = [](FrameView) {
    ClassProbabilities p{};
    p[index_of(Label::CIRCLE)] = 0.6;
    p[index_of(Label::NON_GESTURE)] = 0.4;
    return p;
  };
  const auto refined = with_histogram(base, t, 0.5);
  const auto seq = test::random_sequence(30, 2);
  const auto p = refined(seq.view());
  const double sim = cosine_similarity(trajectory_descriptor(seq.view(), 2), t.templates().at(Label::CIRCLE));
  CHECK(p[index_of(Label::CIRCLE)] == doctest::Approx(0.5 * 0.6 + 0.5 * sim));
  CHECK(p[index_of(Label::NON_GESTURE)] == 0.4);
}

TEST_CASE("grid search") {
  const auto val = small_set(4, 21);
  const auto clf = truth_classifier(val);

  SUBCASE("single point") {
    GridSpec spec;
    spec.alpha = {0.7};
    spec.beta = {0.3};
    spec.lambda = {1.0};
    const auto r = grid_search(spec, val, clf, nullptr);
    CHECK(spec.size() == 1);
    REQUIRE(r.table.size() == 1);
    CHECK(r.best.alpha == 0.7);
    CHECK(r.best.beta == 0.3);
    CHECK(r.best_score == r.table[0].mean_jaccard);
  }

  SUBCASE("a dominating point wins") {
    GridSpec spec;
    spec.alpha = {0.5};
    spec.beta = {1.0, 0.5, 0.95};
    const auto r = grid_search(spec, val, clf, nullptr);
    REQUIRE(r.table.size() == 3);
    CHECK(r.table[0].mean_jaccard == 0.0);
    CHECK(r.table[1].mean_jaccard > 0.0);
    CHECK(r.best.beta == 0.5);
    for (const auto& row : r.table) CHECK(r.best_score >= row.mean_jaccard);
  }

  SUBCASE("detection rate does not rise with beta") {
    GridSpec spec;
    spec.alpha = {1.0};
    spec.beta = {0.0, 0.2, 0.5, 0.79, 0.81, 1.0};
    const auto r = grid_search(spec, val, clf, nullptr);
    for (std::size_t i = 1; i < r.table.size(); ++i) {
      CHECK(r.table[i].point.beta > r.table[i - 1].point.beta);
      CHECK(r.table[i].detection_rate <= r.table[i - 1].detection_rate);
    }
    CHECK(r.table.back().detection_rate == 0.0);
    const auto csv = grid_table_csv(r);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.table.size() + 1);
  }

  SUBCASE("enumeration order and ties") {
    GridSpec spec;
    spec.alpha = {0.5, 0.6};
    spec.beta = {0.1, 0.2};
    spec.stride = {10, 5};
    const auto r = grid_search(spec, val, clf, nullptr);
    REQUIRE(r.table.size() == 8);
    CHECK(r.table[0].point.stride == 10);
    CHECK(r.table[1].point.beta == 0.2);
    CHECK(r.table[2].point.alpha == 0.6);
    CHECK(r.table[4].point.stride == 5);
    std::size_t first_best = 0;
    while (r.table[first_best].mean_jaccard != r.best_score) ++first_best;
    CHECK(r.table[first_best].point.stride == r.best.stride);
    CHECK(r.table[first_best].point.alpha == r.best.alpha);
    CHECK(r.table[first_best].point.beta == r.best.beta);
  }

  SUBCASE("errors") {
    GridSpec spec;
    spec.beta.clear();
    CHECK_THROWS_AS(grid_search(spec, val, clf, nullptr), Error);
    CHECK_THROWS_AS(grid_search(GridSpec{}, Dataset{}, clf, nullptr), Error);
  }
}

TEST_CASE("dataset importers") {
  const auto d = small_set(2, 8);
  const auto dir = test::scratch_dir("import");
  save_dataset(d, dir / "sequences", dir / "annotations.txt");
  const auto importer = make_importer("native");
  CHECK(importer->format() == "native");
  const auto back = importer->import(dir);
  CHECK(back.sequences.size() == 2);
  CHECK(back.annotations == d.annotations);
  CHECK_THROWS_AS(make_importer("csv"), Error);
  CHECK_THROWS_AS(importer->import(dir / "missing"), Error);
}

TEST_CASE("baseline regulariser selection") {
  const auto train = small_set(24, 41);
  const std::vector<double> regs{1e-3, 3e-2};
  const auto sel = select_baseline_reg(train, regs, {}, {}, 3);
  REQUIRE(sel.scores.size() == 2);
  CHECK(sel.scores[0].first == 1e-3);
  CHECK(sel.scores[1].first == 3e-2);
  const auto best = std::max_element(sel.scores.begin(), sel.scores.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  CHECK(sel.reg == best->first);
  CHECK(select_baseline_reg(train, regs, {}, {}, 3).scores == sel.scores);
  CHECK_THROWS_AS(select_baseline_reg(train, {}, {}, {}, 3), Error);
  CHECK_THROWS_AS(select_baseline_reg(train, regs, {}, {}, 24), Error);
  CHECK_THROWS_AS(select_baseline_reg(train, regs, {}, {}, 0), Error);
}
