#include "hgr/baseline_dissim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "hgr/eval.hpp"
#include "hgr/text_io.hpp"

namespace hgr {

GestureSignature gesture_signature(FrameView resampled) {
  if (resampled.size() != kResampleSteps) {
    throw Error("gesture_signature: expected " + std::to_string(kResampleSteps) + " frames, got " +
                std::to_string(resampled.size()));
  }
  GestureSignature s;
  for (std::size_t t = 0; t < kResampleSteps; ++t) {
    s.palm[t] = resampled[t].at(JointId::Palm);
    s.articulation[t] = articulation_distances(resampled[t]);
  }
  for (std::size_t t = 0; t + 1 < kResampleSteps; ++t) {
    s.speed[t] = (s.palm[t + 1] - s.palm[t]).norm();
    s.path_length += s.speed[t];
  }
  return s;
}

std::size_t GestureDictionary::window_length(Label c) const {
  const double l = class_mean_length[index_of(c)];
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(l)));
}

void GestureDictionary::refresh_signatures() {
  rep_signatures.clear();
  rep_signatures.reserve(representation.size());
  for (std::size_t i : representation) rep_signatures.push_back(gesture_signature(entries[i].window));
}

namespace {

struct Stretch {
  const SkeletonSequence* seq;
  std::size_t start;
  std::size_t length;
};

std::vector<Stretch> free_stretches(std::span<const SkeletonSequence> sequences,
                                    std::span<const AnnotationSpan> annotations) {
  std::vector<Stretch> out;
  for (const auto& seq : sequences) {
    std::vector<std::uint8_t> busy(seq.size(), 0);
    for (const auto& a : annotations) {
      if (a.sequence_id != seq.id) continue;
      for (std::size_t t = a.start_frame; t <= a.end_frame && t < seq.size(); ++t) busy[t] = 1;
    }
    std::size_t t = 0;
    while (t < seq.size()) {
      if (busy[t]) {
        ++t;
        continue;
      }
      std::size_t e = t;
      while (e < seq.size() && !busy[e]) ++e;
      out.push_back({&seq, t, e - t});
      t = e;
    }
  }
  return out;
}

bool sample_straddle(std::span<const SkeletonSequence> sequences, std::span<const AnnotationSpan> annotations,
                     std::size_t len, double max_iou, std::mt19937_64& rng, DictionaryEntry& out) {
  std::vector<double> weight;
  for (const auto& s : sequences) weight.push_back(s.size() >= len ? static_cast<double>(s.size() - len + 1) : 0.0);
  if (std::all_of(weight.begin(), weight.end(), [](double w) { return w == 0.0; })) return false;
  std::discrete_distribution<std::size_t> pick_seq(weight.begin(), weight.end());
  for (int attempt = 0; attempt < 200; ++attempt) {
    const SkeletonSequence& s = sequences[pick_seq(rng)];
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, s.size() - len)(rng);
    const GestureSpan crop{s.id, Label::NON_GESTURE, start, start + len - 1};
    bool touches = false, too_close = false;
    for (const auto& a : annotations) {
      if (a.sequence_id != s.id) continue;
      if (a.start_frame <= crop.end_frame && crop.start_frame <= a.end_frame) touches = true;
      if (temporal_iou(a, crop) >= max_iou) too_close = true;
    }
    if (touches && !too_close) {
      out.sequence_id = s.id;
      out.source_start = start;
      return true;
    }
  }
  return false;
}

}  // namespace

GestureDictionary build_dictionary(std::span<const SkeletonSequence> sequences,
                                   std::span<const AnnotationSpan> annotations, const DictionaryConfig& config) {
  if (annotations.empty()) throw Error("build_dictionary: no annotations");
  std::map<std::string_view, const SkeletonSequence*> by_id;
  for (const auto& s : sequences) by_id[s.id] = &s;

  GestureDictionary dict;
  std::array<double, kGestureCount> length_sum{};
  std::array<std::size_t, kGestureCount> length_count{};
  std::vector<std::size_t> gesture_lengths;
  for (const auto& a : annotations) {
    const auto it = by_id.find(a.sequence_id);
    if (it == by_id.end()) throw Error("build_dictionary: unknown sequence '" + a.sequence_id + "'");
    validate_span(a, it->second->size());
    const std::size_t len = a.length();
    if (len < 2) {
      spdlog::warn("skipping {} span of length {} in '{}'", label_name(a.label), len, a.sequence_id);
      continue;
    }
    DictionaryEntry e;
    e.label = a.label;
    e.window = resample_sequence(crop_window(*it->second, a.start_frame, len), kResampleSteps);
    e.sequence_id = a.sequence_id;
    e.source_start = a.start_frame;
    e.source_length = len;
    dict.entries.push_back(std::move(e));
    length_sum[index_of(a.label)] += static_cast<double>(len);
    ++length_count[index_of(a.label)];
    gesture_lengths.push_back(len);
  }
  for (std::size_t c = 0; c < kGestureCount; ++c) {
    dict.class_mean_length[c] = length_count[c] ? length_sum[c] / static_cast<double>(length_count[c]) : 0.0;
  }

  std::mt19937_64 rng(config.seed);
  const std::size_t negatives = config.non_gesture_count.value_or(dict.entries.size());
  const auto stretches = free_stretches(sequences, annotations);
  std::uniform_int_distribution<std::size_t> pick_length(0, gesture_lengths.size() - 1);
  const auto straddling = static_cast<std::size_t>(std::llround(config.straddle_fraction * static_cast<double>(negatives)));
  std::size_t skipped = 0;
  for (std::size_t n = 0; n < negatives; ++n) {
    const std::size_t len = gesture_lengths[pick_length(rng)];
    DictionaryEntry e;
    e.label = Label::NON_GESTURE;
    e.source_length = len;
    if (n < straddling) {
      if (!sample_straddle(sequences, annotations, len, config.straddle_max_iou, rng, e)) {
        ++skipped;
        continue;
      }
    } else {
      std::vector<double> weight(stretches.size(), 0.0);
      for (std::size_t i = 0; i < stretches.size(); ++i) {
        if (stretches[i].length >= len) weight[i] = static_cast<double>(stretches[i].length - len + 1);
      }
      if (std::all_of(weight.begin(), weight.end(), [](double w) { return w == 0.0; })) {
        ++skipped;
        continue;
      }
      std::discrete_distribution<std::size_t> pick_stretch(weight.begin(), weight.end());
      const Stretch& s = stretches[pick_stretch(rng)];
      std::uniform_int_distribution<std::size_t> pick_start(s.start, s.start + s.length - len);
      e.source_start = pick_start(rng);
      e.sequence_id = s.seq->id;
    }
    const SkeletonSequence& src = *by_id.at(e.sequence_id);
    e.window = resample_sequence(crop_window(src, e.source_start, len), kResampleSteps);
    dict.entries.push_back(std::move(e));
  }
  if (skipped > 0) {
    spdlog::warn("build_dictionary: {} non-gesture crops skipped, no unannotated stretch was long enough", skipped);
  }

  std::array<std::vector<std::size_t>, kLabelCount> by_class;
  for (std::size_t i = 0; i < dict.entries.size(); ++i) by_class[index_of(dict.entries[i].label)].push_back(i);
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto reps = static_cast<std::size_t>(
        std::ceil(config.representation_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < reps ? dict.representation : dict.training).push_back(members[k]);
    }
  }
  std::sort(dict.representation.begin(), dict.representation.end());
  std::sort(dict.training.begin(), dict.training.end());
  dict.refresh_signatures();
  return dict;
}

std::vector<double> dissimilarity_vector(const GestureSignature& q, std::span<const GestureSignature> reps) {
  std::vector<double> out(kDissimilarityBlock * reps.size(), 0.0);
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const GestureSignature& g = reps[r];
    double* block = out.data() + r * kDissimilarityBlock;
    for (std::size_t t = 0; t < kResampleSteps; ++t) {
      block[0] += (q.palm[t] - g.palm[t]).norm();
      for (std::size_t k = 0; k < kArticulationTraces; ++k) {
        block[1 + k] += std::abs(q.articulation[t][k] - g.articulation[t][k]);
      }
    }
    block[10] = std::abs(q.path_length - g.path_length);
    for (std::size_t t = 0; t + 1 < kResampleSteps; ++t) block[11] += std::abs(q.speed[t] - g.speed[t]);
  }
  return out;
}

std::vector<double> dissimilarity_vector(FrameView query, const GestureDictionary& dict) {
  if (dict.rep_signatures.size() != dict.representation.size()) {
    throw Error("dissimilarity_vector: dictionary signatures are stale");
  }
  return dissimilarity_vector(gesture_signature(query), dict.rep_signatures);
}

// ---------------------------------------------------------------------------
// Linear SVM

double LinearSvmModel::decision(std::span<const double> x) const {
  if (x.size() != weights.size()) throw Error("svm: feature width mismatch");
  return std::inner_product(weights.begin(), weights.end(), x.begin(), bias);
}

LinearSvmModel train_linear_svm(std::span<const std::vector<double>> x, std::span<const int> y,
                                const SvmTrainConfig& config, Label label) {
  if (x.empty() || x.size() != y.size()) throw Error("train_linear_svm: empty or mismatched training set");
  const std::size_t d = x.front().size();
  std::size_t npos = 0;
  for (int v : y) {
    if (v != 1 && v != -1) throw Error("train_linear_svm: labels must be +1 or -1");
    npos += v == 1;
  }
  const std::size_t nneg = y.size() - npos;
  if (npos == 0 || nneg == 0) throw Error("train_linear_svm: need both positive and negative samples");

  const FeatureStats stats = compute_feature_stats(x);
  std::vector<std::vector<double>> z(x.begin(), x.end());
  for (auto& v : z) apply_zscore(v, stats);

  const double n = static_cast<double>(y.size());
  const double wpos = config.balance_classes ? n / (2.0 * static_cast<double>(npos)) : 1.0;
  const double wneg = config.balance_classes ? n / (2.0 * static_cast<double>(nneg)) : 1.0;

  std::vector<double> w(d, 0.0);
  double b = 0.0;
  // Iterates of the second half of training are averaged.
  std::vector<double> w_avg(d, 0.0);
  double b_avg = 0.0;
  double averaged = 0.0;
  const std::size_t average_from = config.epochs / 2;
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  double t = 0.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const double eta = config.lr / (1.0 + config.lr * config.reg * t);
      t += 1.0;
      const auto& xi = z[i];
      const double f = std::inner_product(w.begin(), w.end(), xi.begin(), b);
      const double yi = y[i];
      const double shrink = 1.0 - eta * config.reg;
      for (double& wk : w) wk *= shrink;
      if (yi * f < 1.0) {
        const double step = eta * yi * (yi > 0 ? wpos : wneg);
        for (std::size_t k = 0; k < d; ++k) w[k] += step * xi[k];
        b += step;
      }
      if (epoch >= average_from) {
        averaged += 1.0;
        const double r = 1.0 / averaged;
        for (std::size_t k = 0; k < d; ++k) w_avg[k] += r * (w[k] - w_avg[k]);
        b_avg += r * (b - b_avg);
      }
    }
  }
  if (config.average) {
    w = std::move(w_avg);
    b = b_avg;
  }

  // Fold the standardisation into the model: w.(x - mu)/s + b.
  LinearSvmModel m;
  m.label = label;
  m.weights.resize(d);
  m.bias = b;
  for (std::size_t k = 0; k < d; ++k) {
    const double s = stats.stddev[k] < kSpreadEpsilon ? 0.0 : 1.0 / stats.stddev[k];
    m.weights[k] = w[k] * s;
    m.bias -= w[k] * s * stats.mean[k];
  }
  return m;
}

SvmFit evaluate_svm(const LinearSvmModel& model, std::span<const std::vector<double>> x, std::span<const int> y) {
  SvmFit fit;
  if (x.empty()) return fit;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = model.decision(x[i]);
    fit.hinge += std::max(0.0, 1.0 - y[i] * f);
    fit.accuracy += ((f > 0.0) == (y[i] > 0)) ? 1.0 : 0.0;
  }
  fit.hinge /= static_cast<double>(x.size());
  fit.accuracy /= static_cast<double>(x.size());
  return fit;
}

std::vector<LinearSvmModel> train_svms(const GestureDictionary& dict, const SvmTrainConfig& config) {
  std::vector<std::vector<double>> x;
  std::vector<Label> labels;
  bool has_negative_pool = false;
  for (std::size_t i : dict.training) {
    x.push_back(dissimilarity_vector(dict.entries[i].window, dict));
    labels.push_back(dict.entries[i].label);
    has_negative_pool = has_negative_pool || !is_gesture(dict.entries[i].label);
  }
  if (!has_negative_pool) throw Error("train_svms: the training entries contain no non-gesture samples");

  std::vector<LinearSvmModel> models;
  for (Label c : gesture_labels()) {
    std::vector<int> y(labels.size());
    std::size_t positives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      y[i] = labels[i] == c ? 1 : -1;
      positives += labels[i] == c;
    }
    if (positives == 0) {
      throw Error("train_svms: no training samples for class " + std::string(label_name(c)));
    }
    SvmTrainConfig cfg = config;
    cfg.seed = config.seed + index_of(c);
    models.push_back(train_linear_svm(x, y, cfg, c));
  }
  return models;
}

// ---------------------------------------------------------------------------
// Detection

std::vector<DetectionEvent> merge_hits(std::vector<WindowHit> hits, std::size_t stride,
                                       const std::string& sequence_id) {
  struct Scored {
    DetectionEvent event;
    double margin;
  };
  std::vector<Scored> events;
  std::stable_sort(hits.begin(), hits.end(), [](const WindowHit& a, const WindowHit& b) {
    return a.label != b.label ? index_of(a.label) < index_of(b.label) : a.end < b.end;
  });
  for (std::size_t i = 0; i < hits.size();) {
    // A run of consecutive hits of one class.
    std::size_t j = i;
    double margin = hits[i].margin;
    while (j + 1 < hits.size() && hits[j + 1].label == hits[i].label && hits[j + 1].end == hits[j].end + stride) {
      ++j;
      margin = std::max(margin, hits[j].margin);
    }
    const std::size_t start = hits[i].end + 1 - hits[i].length;
    Scored s{{sequence_id, hits[i].label, start, hits[j].end}, margin};
    // Same-class events that overlap an earlier run are merged into it.
    if (!events.empty() && events.back().event.label == s.event.label &&
        s.event.start_frame <= events.back().event.end_frame) {
      events.back().event.end_frame = std::max(events.back().event.end_frame, s.event.end_frame);
      events.back().margin = std::max(events.back().margin, margin);
    } else {
      events.push_back(s);
    }
    i = j + 1;
  }

  std::stable_sort(events.begin(), events.end(), [](const Scored& a, const Scored& b) { return a.margin > b.margin; });
  std::vector<DetectionEvent> out;
  for (const Scored& s : events) {
    const bool clash = std::any_of(out.begin(), out.end(), [&](const DetectionEvent& e) {
      return s.event.start_frame <= e.end_frame && e.start_frame <= s.event.end_frame;
    });
    if (!clash) out.push_back(s.event);
  }
  std::sort(out.begin(), out.end(), [](const DetectionEvent& a, const DetectionEvent& b) {
    return a.start_frame != b.start_frame ? a.start_frame < b.start_frame : index_of(a.label) < index_of(b.label);
  });
  return out;
}

std::vector<DetectionEvent> detect_sliding(const SkeletonSequence& seq, std::span<const LinearSvmModel> models,
                                           const GestureDictionary& dict, const SlidingConfig& config) {
  if (config.stride == 0) throw Error("detect_sliding: stride must be positive");
  std::vector<WindowHit> hits;
  // Classes sharing a window length share the dissimilarity vector.
  std::map<std::size_t, std::vector<const LinearSvmModel*>> by_length;
  for (const auto& m : models) by_length[dict.window_length(m.label)].push_back(&m);

  for (std::size_t t = 0; t < seq.size(); t += config.stride) {
    for (const auto& [len, group] : by_length) {
      if (t + 1 < len) continue;
      const auto window = resample_sequence(crop_window(seq, t + 1 - len, len), kResampleSteps);
      const auto x = dissimilarity_vector(window, dict);
      for (const LinearSvmModel* m : group) {
        const double score = m->decision(x);
        if (score > config.threshold) hits.push_back({m->label, t, len, score});
      }
    }
  }
  return merge_hits(std::move(hits), config.stride, seq.id);
}

// ---------------------------------------------------------------------------
// Persistence

std::string serialize_svms(std::span<const LinearSvmModel> models) {
  std::ostringstream out;
  for (const auto& m : models) {
    out << label_name(m.label) << ';' << format_number(m.bias) << ';';
    for (std::size_t k = 0; k < m.weights.size(); ++k) out << (k ? "," : "") << format_number(m.weights[k]);
    out << '\n';
  }
  return out.str();
}

std::vector<LinearSvmModel> parse_svms(std::string_view text, const std::string& source) {
  std::vector<LinearSvmModel> models;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto f = split(t, ';');
    if (f.size() != 3) throw ParseError(source, lineno, "expected 'class;bias;w0,w1,...'");
    LinearSvmModel m;
    try {
      m.label = parse_label(f[0]);
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
    m.bias = parse_number<double>(f[1], source, lineno);
    for (auto v : split(f[2], ',')) m.weights.push_back(parse_number<double>(v, source, lineno));
    models.push_back(std::move(m));
  }
  return models;
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void BaselineModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "svms.txt");
    if (!out) throw Error("cannot write " + (dir / "svms.txt").string());
    out << serialize_svms(svms);
  }
  std::ofstream out(dir / "dictionary.txt");
  if (!out) throw Error("cannot write " + (dir / "dictionary.txt").string());
  out << "hgr-dictionary 1\n";
  for (Label c : gesture_labels()) {
    out << "length;" << label_name(c) << ';' << format_number(dictionary.class_mean_length[index_of(c)]) << '\n';
  }
  for (std::size_t i : dictionary.representation) {
    const auto& e = dictionary.entries[i];
    out << "rep;" << label_name(e.label) << ';';
    bool first = true;
    for (const HandFrame& f : e.window) {
      for (const Vec3& p : f.positions) {
        for (int a = 0; a < 3; ++a) {
          out << (first ? "" : ",") << format_number(p[a]);
          first = false;
        }
      }
    }
    out << '\n';
  }
}

BaselineModel BaselineModel::load(const std::filesystem::path& dir) {
  BaselineModel model;
  model.svms = parse_svms(read_text(dir / "svms.txt"), (dir / "svms.txt").string());

  const std::string source = (dir / "dictionary.txt").string();
  std::istringstream in(read_text(dir / "dictionary.txt"));
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || trim(line) != "hgr-dictionary 1") {
    throw ParseError(source, 1, "missing 'hgr-dictionary 1' header");
  }
  ++lineno;
  auto& dict = model.dictionary;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto f = split(t, ';');
    if (f.size() != 3) throw ParseError(source, lineno, "expected three ';' separated fields");
    Label label;
    try {
      label = parse_label(f[1]);
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (f[0] == "length") {
      if (!is_gesture(label)) throw ParseError(source, lineno, "length given for NON_GESTURE");
      dict.class_mean_length[index_of(label)] = parse_number<double>(f[2], source, lineno);
    } else if (f[0] == "rep") {
      const auto values = split(f[2], ',');
      if (values.size() != kResampleSteps * kJointCount * 3) {
        throw ParseError(source, lineno, "representation gesture needs " +
                                             std::to_string(kResampleSteps * kJointCount * 3) + " values");
      }
      DictionaryEntry e;
      e.label = label;
      e.window.resize(kResampleSteps);
      std::size_t k = 0;
      for (std::size_t s = 0; s < kResampleSteps; ++s) {
        e.window[s].timestamp_ms = static_cast<double>(s);
        for (auto& p : e.window[s].positions) {
          for (int a = 0; a < 3; ++a) p[a] = parse_number<double>(values[k++], source, lineno);
        }
      }
      dict.representation.push_back(dict.entries.size());
      dict.entries.push_back(std::move(e));
    } else {
      throw ParseError(source, lineno, "unknown record '" + std::string(f[0]) + "'");
    }
  }
  dict.refresh_signatures();
  for (const auto& m : model.svms) {
    if (m.weights.size() != dict.feature_width()) {
      throw Error("baseline model: SVM for " + std::string(label_name(m.label)) + " has " +
                  std::to_string(m.weights.size()) + " weights, dictionary implies " +
                  std::to_string(dict.feature_width()));
    }
  }
  return model;
}

}  // namespace hgr
