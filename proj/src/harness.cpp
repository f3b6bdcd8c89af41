#include "hgr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include "hgr/text_io.hpp"

namespace hgr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void finish_timing(PipelineRun& run, Clock::time_point t0) {
  run.total_seconds = seconds_since(t0);
  run.mean_classification_seconds =
      run.classifications ? run.total_seconds / static_cast<double>(run.classifications) : 0.0;
}

template <typename Labeller>
PipelineRun run_labels(std::string method, std::span<const SkeletonSequence> sequences, Labeller&& labeller,
                       const FsmConfig* fsm) {
  PipelineRun run;
  run.method = std::move(method);
  const auto t0 = Clock::now();
  for (const auto& seq : sequences) {
    const std::vector<Label> labels = labeller(seq);
    run.classifications += labels.size();
    const auto events = fsm ? fsm_run(labels, *fsm, seq.id) : spans_from_labels(labels, seq.id);
    run.events.insert(run.events.end(), events.begin(), events.end());
  }
  finish_timing(run, t0);
  return run;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Baseline: return "baseline";
    case Method::UDeepGRU: return "udeepgru";
    case Method::TSGR: return "tsgr";
    case Method::Fsm: return "fsm";
    case Method::Energy: return "energy";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::Baseline, Method::UDeepGRU, Method::TSGR, Method::Fsm, Method::Energy}) {
    if (method_name(m) == name) return m;
  }
  throw Error("unknown method '" + std::string(name) + "'");
}

MetricsReport score_run(const PipelineRun& run, const Dataset& truth) {
  MetricsReport r = match_and_score(truth.annotations, run.events, truth.sequences);
  r.name = run.method;
  r.total_seconds = run.total_seconds;
  r.mean_classification_seconds = run.mean_classification_seconds;
  return r;
}

// ---------------------------------------------------------------------------

BaselineModel train_baseline(const Dataset& data, const DictionaryConfig& dictionary, const SvmTrainConfig& svm) {
  BaselineModel m;
  m.dictionary = build_dictionary(data.sequences, data.annotations, dictionary);
  m.svms = train_svms(m.dictionary, svm);
  return m;
}

PipelineRun run_baseline(const BaselineModel& model, std::span<const SkeletonSequence> sequences,
                         const SlidingConfig& config) {
  PipelineRun run;
  run.method = "baseline";
  const auto t0 = Clock::now();
  for (const auto& seq : sequences) {
    const auto events = detect_sliding(seq, model.svms, model.dictionary, config);
    run.events.insert(run.events.end(), events.begin(), events.end());
    run.classifications += (seq.size() + config.stride - 1) / config.stride;
  }
  finish_timing(run, t0);
  return run;
}

RegSelection select_baseline_reg(const Dataset& data, std::span<const double> candidates,
                                 const DictionaryConfig& dictionary, SvmTrainConfig svm,
                                 std::size_t validation_sequences) {
  if (candidates.empty()) throw Error("select_baseline_reg: no candidates");
  if (validation_sequences == 0 || validation_sequences >= data.sequences.size()) {
    throw Error("select_baseline_reg: need more sequences than the " + std::to_string(validation_sequences) +
                " held out");
  }
  std::vector<std::size_t> order(data.sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(svm.seed);
  std::shuffle(order.begin(), order.end(), rng);

  Dataset fit, validation;
  std::set<std::string> held;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& seq = data.sequences[order[i]];
    if (i < validation_sequences) {
      validation.sequences.push_back(seq);
      held.insert(seq.id);
    } else {
      fit.sequences.push_back(seq);
    }
  }
  for (const auto& a : data.annotations) (held.count(a.sequence_id) ? validation : fit).annotations.push_back(a);

  const auto dict = build_dictionary(fit.sequences, fit.annotations, dictionary);
  RegSelection out;
  double best = -1.0;
  for (double reg : candidates) {
    svm.reg = reg;
    const BaselineModel model{dict, train_svms(dict, svm)};
    const double score = score_run(run_baseline(model, validation.sequences), validation).mean_jaccard;
    out.scores.emplace_back(reg, score);
    if (score > best) {
      best = score;
      out.reg = reg;
    }
  }
  return out;
}

PipelineRun run_argmax(const Recognizer& r, std::span<const SkeletonSequence> sequences) {
  return run_labels(std::string(recognizer_name(r.config.kind)), sequences,
                    [&](const SkeletonSequence& s) { return predict_stream(r, s).labels; }, nullptr);
}

PipelineRun run_argmax(std::span<const Recognizer> ensemble, std::span<const SkeletonSequence> sequences) {
  if (ensemble.empty()) throw Error("run_argmax: empty ensemble");
  return run_labels(std::string(recognizer_name(ensemble.front().config.kind)) + "-ensemble", sequences,
                    [&](const SkeletonSequence& s) { return ensemble_predict(ensemble, s); }, nullptr);
}

PipelineRun run_fsm(const Recognizer& r, std::span<const SkeletonSequence> sequences, const FsmConfig& config) {
  config.validate();
  return run_labels(std::string(recognizer_name(r.config.kind)) + "+fsm", sequences,
                    [&](const SkeletonSequence& s) { return predict_stream(r, s).labels; }, &config);
}

PipelineRun run_fsm(std::span<const Recognizer> ensemble, std::span<const SkeletonSequence> sequences,
                    const FsmConfig& config) {
  if (ensemble.empty()) throw Error("run_fsm: empty ensemble");
  config.validate();
  return run_labels(std::string(recognizer_name(ensemble.front().config.kind)) + "-ensemble+fsm", sequences,
                    [&](const SkeletonSequence& s) { return ensemble_predict(ensemble, s); }, &config);
}

// ---------------------------------------------------------------------------

SegmentClassifier recognizer_segment_classifier(const Recognizer& r) {
  return [&r](FrameView segment) {
    if (segment.empty()) throw Error("segment classifier: empty segment");
    SkeletonSequence seq;
    seq.frames.assign(segment.begin(), segment.end());
    const auto pred = predict_stream(r, seq);
    ClassProbabilities p{};
    const auto mean = pred.probabilities.colwise().mean();
    for (std::size_t c = 0; c < kLabelCount; ++c) p[c] = mean(static_cast<long>(c));
    return p;
  };
}

SegmentClassifier with_histogram(SegmentClassifier base, const ClassTemplates& templates, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("with_histogram: lambda must be in [0, 1]");
  return [base = std::move(base), &templates, lambda](FrameView segment) {
    ClassProbabilities p = base(segment);
    std::size_t best = 0;
    for (std::size_t c = 1; c < kGestureCount; ++c) {
      if (p[c] > p[best]) best = c;
    }
    const auto refined =
        classify_by_histogram(trajectory_descriptor(segment, templates.bins()), templates, {label_at(best), p[best]}, lambda);
    p[index_of(refined.label)] = refined.score;
    return p;
  };
}

ClassTemplates build_templates(const Dataset& data, std::size_t bins) {
  std::vector<std::pair<Label, OrientationHistogram>> samples;
  for (const auto& a : data.annotations) {
    if (!is_trajectory_class(a.label)) continue;
    const SkeletonSequence* seq = data.find(a.sequence_id);
    if (!seq) throw Error("build_templates: unknown sequence '" + a.sequence_id + "'");
    samples.emplace_back(a.label, trajectory_descriptor(crop_window(*seq, a.start_frame, a.length()), bins));
  }
  if (samples.empty()) throw Error("build_templates: no trajectory gestures in the dataset");
  return ClassTemplates::build(samples);
}

PipelineRun run_energy(const SegmentClassifier& classifier, const ClassTemplates* templates,
                       std::span<const SkeletonSequence> sequences, const EnergyPipelineConfig& config) {
  PipelineRun run;
  run.method = templates ? "energy+hist" : "energy";
  double classify_seconds = 0.0;
  SegmentClassifier refined = templates ? with_histogram(classifier, *templates, config.lambda) : classifier;
  SegmentClassifier timed = [&](FrameView segment) {
    const auto t = Clock::now();
    auto p = refined(segment);
    classify_seconds += seconds_since(t);
    ++run.classifications;
    return p;
  };
  const auto t0 = Clock::now();
  for (const auto& seq : sequences) {
    const auto events = detect_candidates(seq, config.window_length, config.stride, config.filter, timed);
    run.events.insert(run.events.end(), events.begin(), events.end());
  }
  run.total_seconds = seconds_since(t0);
  run.mean_classification_seconds =
      run.classifications ? classify_seconds / static_cast<double>(run.classifications) : 0.0;
  return run;
}

// ---------------------------------------------------------------------------

std::size_t GridSpec::size() const {
  return alpha.size() * beta.size() * lambda.size() * epsilon.size() * stride.size() * window_length.size();
}

GridResult grid_search(const GridSpec& spec, const Dataset& validation, const SegmentClassifier& classifier,
                       const ClassTemplates* templates, const CandidateFilterConfig& base) {
  if (spec.size() == 0) throw Error("grid_search: empty grid");
  if (validation.sequences.empty()) throw Error("grid_search: empty validation set");

  std::map<std::pair<const HandFrame*, std::size_t>, ClassProbabilities> cache;
  SegmentClassifier cached = [&](FrameView segment) {
    const auto key = std::make_pair(segment.data(), segment.size());
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    return cache.emplace(key, classifier(segment)).first->second;
  };

  GridResult result;
  bool have_best = false;
  for (std::size_t L : spec.window_length) {
    for (std::size_t stride : spec.stride) {
      for (const auto& eps : spec.epsilon) {
        for (double lambda : spec.lambda) {
          for (double alpha : spec.alpha) {
            for (double beta : spec.beta) {
              EnergyPipelineConfig cfg;
              cfg.window_length = L;
              cfg.stride = stride;
              cfg.lambda = lambda;
              cfg.filter = base;
              cfg.filter.alpha = alpha;
              cfg.filter.beta = beta;
              cfg.filter.epsilon = eps;
              const auto run = run_energy(cached, templates, validation.sequences, cfg);
              const auto report = match_and_score(validation.annotations, run.events, validation.sequences);
              GridRow row{{alpha, beta, lambda, eps, stride, L},
                          report.mean_jaccard,
                          report.mean_detection_rate,
                          report.mean_fp_rate};
              if (!have_best || row.mean_jaccard > result.best_score) {
                result.best = row.point;
                result.best_score = row.mean_jaccard;
                have_best = true;
              }
              result.table.push_back(row);
            }
          }
        }
      }
    }
  }
  return result;
}

std::string grid_table_csv(const GridResult& result) {
  std::ostringstream out;
  out << "window_length,stride,epsilon,lambda,alpha,beta,mean_jaccard,det_rate,fp_rate\n";
  for (const auto& r : result.table) {
    out << r.point.window_length << ',' << r.point.stride << ','
        << (r.point.epsilon ? format_number(*r.point.epsilon) : std::string("auto")) << ','
        << format_number(r.point.lambda) << ',' << format_number(r.point.alpha) << ',' << format_number(r.point.beta)
        << ',' << format_number(r.mean_jaccard) << ',' << format_number(r.detection_rate) << ','
        << format_number(r.fp_rate) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

Dataset NativeImporter::import(const std::filesystem::path& root) const {
  return load_dataset(root / "sequences", root / "annotations.txt");
}

std::unique_ptr<DatasetImporter> make_importer(std::string_view format) {
  if (format == "native") return std::make_unique<NativeImporter>();
  throw Error("no importer for dataset format '" + std::string(format) + "'");
}

}  // namespace hgr
