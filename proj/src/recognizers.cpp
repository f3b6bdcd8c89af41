#include "hgr/recognizers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hgr/seqnet/optim.hpp"
#include "hgr/text_io.hpp"

namespace hgr {

namespace {

constexpr std::string_view kRecognizerMagic = "hgr-recognizer 1";
constexpr std::string_view kEnsembleMagic = "hgr-ensemble 1";

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    out += ids[i];
  }
  return out;
}

template <typename T>
std::string join_numbers(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) out += format_number(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(std::string_view text, const std::string& src, std::size_t line) {
  std::vector<T> out;
  if (trim(text).empty()) return out;
  for (auto tok : split(text, ',')) out.push_back(parse_number<T>(tok, src, line));
  return out;
}

std::vector<std::string> parse_ids(std::string_view text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  for (auto tok : split(text, ',')) out.emplace_back(tok);
  return out;
}

}  // namespace

std::string_view recognizer_name(RecognizerKind k) { return k == RecognizerKind::UDeepGRU ? "udeepgru" : "tsgr"; }

RecognizerKind parse_recognizer(std::string_view name) {
  if (name == "udeepgru") return RecognizerKind::UDeepGRU;
  if (name == "tsgr") return RecognizerKind::TSGR;
  throw Error("unknown recognizer '" + std::string(name) + "'");
}

std::vector<std::size_t> RecognizerConfig::resolved_widths() const {
  if (!widths.empty()) return widths;
  if (kind == RecognizerKind::UDeepGRU) return {128, 128, 128, 64};
  return {128, 128, 128, 128};
}

seqnet::SequenceNet build_network(const RecognizerConfig& config) {
  using namespace seqnet;
  const auto w = config.resolved_widths();
  if (std::any_of(w.begin(), w.end(), [](std::size_t x) { return x == 0; })) {
    throw Error("recognizer layer widths must be positive");
  }
  SequenceNet net;
  std::size_t in = recipe_width(config.recipe);
  if (config.kind == RecognizerKind::UDeepGRU) {
    if (w.size() < 2) throw Error("udeepgru needs a feature width and at least one GRU width");
    net.emplace<Dense>(in, w[0], true, Activation::Tanh);
    in = w[0];
    for (std::size_t i = 1; i < w.size(); ++i) {
      net.emplace<Gru>(in, w[i]);
      in = w[i];
    }
  } else {
    for (std::size_t i = 0; i < w.size(); ++i) {
      net.emplace<ShiftNode>(in, w[i], i == 0 ? Activation::Tanh : Activation::Relu);
      in = w[i];
    }
  }
  net.emplace<Dense>(in, kLabelCount, true, Activation::None);
  net.validate();
  net.init(config.seed);
  return net;
}

// ---------------------------------------------------------------------------

std::vector<Label> labels_from_spans(std::size_t sequence_length, std::span<const GestureSpan> spans,
                                     const std::string& sequence_id) {
  std::vector<Label> out(sequence_length, Label::NON_GESTURE);
  for (const auto& s : spans) {
    if (s.sequence_id != sequence_id) continue;
    validate_span(s, sequence_length);
    std::fill(out.begin() + static_cast<long>(s.start_frame), out.begin() + static_cast<long>(s.end_frame) + 1,
              s.label);
  }
  return out;
}

std::vector<GestureSpan> spans_from_labels(std::span<const Label> labels, const std::string& sequence_id) {
  std::vector<GestureSpan> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (!is_gesture(labels[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < labels.size() && labels[j + 1] == labels[i]) ++j;
    out.push_back({sequence_id, labels[i], i, j});
    i = j + 1;
  }
  return out;
}

double macro_frame_f1(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) throw Error("macro_frame_f1: streams differ in length");
  std::array<std::size_t, kLabelCount> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = index_of(truth[i]);
    const auto p = index_of(predicted[i]);
    if (t == p) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  double sum = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < kGestureCount; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    ++classes;
  }
  return classes == 0 ? 1.0 : sum / static_cast<double>(classes);
}

seqnet::Matrix recognizer_input(const SkeletonSequence& seq, FrameRecipe recipe, const FeatureStats& stats) {
  auto rows = frame_vectors(seq.view(), recipe);
  const long width = static_cast<long>(recipe_width(recipe));
  seqnet::Matrix x(static_cast<long>(rows.size()), width);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (!stats.empty()) apply_zscore(rows[t], stats);
    for (long j = 0; j < width; ++j) x(static_cast<long>(t), j) = rows[t][static_cast<std::size_t>(j)];
  }
  return x;
}

// ---------------------------------------------------------------------------

namespace {

void check_protocol(const TrainProtocol& p) {
  if (!(p.lr > 0.0) || p.batch == 0 || p.max_chunk == 0 || p.validation_sequences == 0 || p.epochs == 0) {
    throw Error("train protocol: lr, batch, max_chunk, validation_sequences and epochs must be positive");
  }
  if (p.jitter_mm < 0.0) throw Error("train protocol: jitter must be non-negative");
}

std::vector<Label> labels_of(const Dataset& data, const SkeletonSequence& seq) {
  return labels_from_spans(seq.size(), data.annotations, seq.id);
}

}  // namespace

Recognizer train_recognizer(const RecognizerConfig& config, const TrainProtocol& protocol, const Dataset& data,
                            const EpochCallback& on_epoch) {
  check_protocol(protocol);
  const std::size_t n = data.sequences.size();
  if (n <= protocol.validation_sequences) {
    throw Error("train_recognizer: " + std::to_string(n) + " sequences, need more than " +
                std::to_string(protocol.validation_sequences) + " to withhold a validation set");
  }

  std::mt19937_64 rng(protocol.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(protocol.validation_sequences));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(protocol.validation_sequences), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  Recognizer r;
  r.config = config;
  for (auto i : train_idx) r.training_ids.push_back(data.sequences[i].id);
  for (auto i : val_idx) r.validation_ids.push_back(data.sequences[i].id);

  std::vector<std::vector<double>> train_rows;
  for (auto i : train_idx) {
    auto rows = frame_vectors(data.sequences[i].view(), config.recipe);
    for (auto& row : rows) train_rows.push_back(std::move(row));
  }
  r.stats = compute_feature_stats(train_rows);
  train_rows.clear();

  std::vector<seqnet::LabeledSequence> chunks;
  for (auto i : train_idx) {
    const auto& seq = data.sequences[i];
    const seqnet::Matrix x = recognizer_input(seq, config.recipe, r.stats);
    const auto labels = labels_of(data, seq);
    for (std::size_t b = 0; b < seq.size(); b += protocol.max_chunk) {
      const std::size_t len = std::min(protocol.max_chunk, seq.size() - b);
      seqnet::LabeledSequence c;
      c.features = x.middleRows(static_cast<long>(b), static_cast<long>(len));
      for (std::size_t t = b; t < b + len; ++t) c.labels.push_back(static_cast<int>(index_of(labels[t])));
      chunks.push_back(std::move(c));
    }
  }
  if (chunks.empty()) throw Error("train_recognizer: training sequences contain no frames");

  std::vector<seqnet::Matrix> val_x;
  std::vector<std::vector<Label>> val_y;
  for (auto i : val_idx) {
    val_x.push_back(recognizer_input(data.sequences[i], config.recipe, r.stats));
    val_y.push_back(labels_of(data, data.sequences[i]));
  }

  // Position columns of the frame vector, for optional jitter.
  std::vector<long> position_cols;
  if (protocol.jitter_mm > 0.0) {
    const std::size_t per_joint = recipe_width(config.recipe) / kJointCount;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      for (std::size_t a = 0; a < 3; ++a) position_cols.push_back(static_cast<long>(j * per_joint + a));
    }
  }

  seqnet::SequenceNet net = build_network(config);
  r.net = net;
  r.best_f1 = -1.0;
  seqnet::Adam adam;
  const seqnet::FocalLossConfig focal{config.focal_gamma};
  std::vector<std::size_t> chunk_order(chunks.size());
  std::iota(chunk_order.begin(), chunk_order.end(), 0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= protocol.epochs; ++epoch) {
    std::shuffle(chunk_order.begin(), chunk_order.end(), rng);
    double loss_sum = 0.0;
    std::size_t frame_sum = 0;
    for (std::size_t b = 0; b < chunk_order.size(); b += protocol.batch) {
      std::vector<seqnet::LabeledSequence> jittered;
      std::vector<const seqnet::LabeledSequence*> batch;
      const std::size_t end = std::min(chunk_order.size(), b + protocol.batch);
      if (!position_cols.empty()) jittered.reserve(end - b);
      for (std::size_t k = b; k < end; ++k) {
        const auto& c = chunks[chunk_order[k]];
        if (position_cols.empty()) {
          batch.push_back(&c);
          continue;
        }
        jittered.push_back(c);
        auto& m = jittered.back().features;
        for (long col : position_cols) {
          const double sd = r.stats.stddev[static_cast<std::size_t>(col)];
          if (sd <= kSpreadEpsilon) continue;
          for (long t = 0; t < m.rows(); ++t) m(t, col) += protocol.jitter_mm * noise(rng) / sd;
        }
        batch.push_back(&jittered.back());
      }
      const auto step = seqnet::train_step(net, batch, config.loss, focal, adam, protocol.lr);
      loss_sum += step.loss * static_cast<double>(step.frames);
      frame_sum += step.frames;
    }

    double f1 = 0.0;
    for (std::size_t v = 0; v < val_x.size(); ++v) {
      seqnet::SequenceLayout layout = seqnet::SequenceLayout::from_lengths({static_cast<std::size_t>(val_x[v].rows())});
      f1 += macro_frame_f1(val_y[v], argmax_labels(net.predict_proba(val_x[v], layout)));
    }
    f1 /= static_cast<double>(val_x.size());

    EpochRecord rec{epoch, frame_sum ? loss_sum / static_cast<double>(frame_sum) : 0.0, f1};
    r.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (f1 > r.best_f1) {
      r.best_f1 = f1;
      r.best_epoch = epoch;
      r.net = net;
      since_best = 0;
    } else if (protocol.patience > 0 && ++since_best >= protocol.patience) {
      break;
    }
  }
  return r;
}

std::vector<Label> argmax_labels(const seqnet::Matrix& probabilities) {
  if (probabilities.cols() != static_cast<long>(kLabelCount)) {
    throw Error("argmax_labels: expected " + std::to_string(kLabelCount) + " columns");
  }
  const long ng = static_cast<long>(index_of(Label::NON_GESTURE));
  std::vector<Label> out(static_cast<std::size_t>(probabilities.rows()));
  for (long t = 0; t < probabilities.rows(); ++t) {
    long best = ng;
    for (long c = 0; c < probabilities.cols(); ++c) {
      if (probabilities(t, c) > probabilities(t, best)) best = c;
    }
    out[static_cast<std::size_t>(t)] = label_at(static_cast<std::size_t>(best));
  }
  return out;
}

StreamPrediction predict_stream(const Recognizer& r, const SkeletonSequence& seq) {
  StreamPrediction out;
  if (seq.size() == 0) {
    out.probabilities.resize(0, static_cast<long>(kLabelCount));
    return out;
  }
  const seqnet::Matrix x = recognizer_input(seq, r.config.recipe, r.stats);
  const auto layout = seqnet::SequenceLayout::from_lengths({seq.size()});
  out.probabilities = r.net.predict_proba(x, layout);
  out.labels = argmax_labels(out.probabilities);
  return out;
}

std::vector<Label> ensemble_average(std::span<const seqnet::Matrix> member_probabilities) {
  if (member_probabilities.empty()) throw Error("ensemble: no members");
  seqnet::Matrix mean = member_probabilities.front();
  for (std::size_t i = 1; i < member_probabilities.size(); ++i) {
    const auto& m = member_probabilities[i];
    if (m.rows() != mean.rows() || m.cols() != mean.cols()) {
      throw Error("ensemble: member " + std::to_string(i) + " has a different class set or length");
    }
    mean += m;
  }
  mean /= static_cast<double>(member_probabilities.size());
  return argmax_labels(mean);
}

std::vector<Label> ensemble_predict(std::span<const Recognizer> members, const SkeletonSequence& seq) {
  if (members.empty()) throw Error("ensemble: no members");
  std::vector<seqnet::Matrix> probs;
  for (const auto& m : members) {
    if (m.net.output_width() != kLabelCount) throw Error("ensemble: member with a different class set");
    probs.push_back(predict_stream(m, seq).probabilities);
  }
  return ensemble_average(probs);
}

Ensemble train_ensemble(const RecognizerConfig& config, const TrainProtocol& protocol, const Dataset& data,
                        std::size_t count, double subset_fraction, const EpochCallback& on_epoch) {
  if (count == 0) throw Error("train_ensemble: count must be positive");
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) throw Error("train_ensemble: subset fraction must be in (0, 1]");
  Ensemble e;
  e.subset_fraction = subset_fraction;
  e.seed = protocol.seed;
  const std::size_t n = data.sequences.size();
  const auto take = static_cast<std::size_t>(std::ceil(subset_fraction * static_cast<double>(n)));
  for (std::size_t m = 0; m < count; ++m) {
    std::mt19937_64 rng(protocol.seed + 7919 * (m + 1));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    Dataset part;
    for (auto i : idx) part.sequences.push_back(data.sequences[i]);
    for (const auto& a : data.annotations) {
      if (part.find(a.sequence_id)) part.annotations.push_back(a);
    }
    RecognizerConfig mc = config;
    mc.seed = config.seed + m;
    TrainProtocol mp = protocol;
    mp.seed = protocol.seed + m;
    e.members.push_back(train_recognizer(mc, mp, part, on_epoch));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Persistence

void Recognizer::save(std::ostream& out) const {
  out << kRecognizerMagic << '\n';
  out << "kind=" << recognizer_name(config.kind) << '\n';
  out << "recipe=" << recipe_name(config.recipe) << '\n';
  out << "widths=" << join_numbers(config.resolved_widths()) << '\n';
  out << "loss=" << seqnet::loss_name(config.loss) << '\n';
  out << "gamma=" << format_number(config.focal_gamma) << '\n';
  out << "seed=" << config.seed << '\n';
  out << "best_epoch=" << best_epoch << '\n';
  out << "best_f1=" << format_number(best_f1) << '\n';
  out << "training_ids=" << join_ids(training_ids) << '\n';
  out << "validation_ids=" << join_ids(validation_ids) << '\n';
  out << "stats_mean=" << join_numbers(stats.mean) << '\n';
  out << "stats_stddev=" << join_numbers(stats.stddev) << '\n';
  out << "network\n";
  net.save(out);
}

Recognizer Recognizer::load(std::istream& in) {
  const std::string src = "recognizer";
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || trim(line) != kRecognizerMagic) throw ParseError(src, 1, "not a recognizer bundle");
  ++lineno;
  std::map<std::string, std::string, std::less<>> kv;
  while (true) {
    if (!std::getline(in, line)) throw ParseError(src, lineno + 1, "missing network section");
    ++lineno;
    const auto t = trim(line);
    if (t == "network") break;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(src, lineno, "expected key=value");
    kv[std::string(t.substr(0, eq))] = std::string(t.substr(eq + 1));
  }
  auto get = [&](std::string_view key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(src, lineno, "missing key '" + std::string(key) + "'");
    return it->second;
  };
  Recognizer r;
  try {
    r.config.kind = parse_recognizer(get("kind"));
    r.config.recipe = parse_recipe(get("recipe"));
    r.config.loss = seqnet::parse_loss(get("loss"));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(src, lineno, e.what());
  }
  r.config.widths = parse_list<std::size_t>(get("widths"), src, lineno);
  r.config.focal_gamma = parse_number<double>(get("gamma"), src, lineno);
  r.config.seed = parse_number<std::uint64_t>(get("seed"), src, lineno);
  r.best_epoch = parse_number<std::size_t>(get("best_epoch"), src, lineno);
  r.best_f1 = parse_number<double>(get("best_f1"), src, lineno);
  r.training_ids = parse_ids(get("training_ids"));
  r.validation_ids = parse_ids(get("validation_ids"));
  r.stats.mean = parse_list<double>(get("stats_mean"), src, lineno);
  r.stats.stddev = parse_list<double>(get("stats_stddev"), src, lineno);
  if (r.stats.mean.size() != r.stats.stddev.size()) throw ParseError(src, lineno, "statistics length mismatch");
  r.net = seqnet::SequenceNet::load(in);
  if (r.net.input_width() != recipe_width(r.config.recipe) || r.net.output_width() != kLabelCount) {
    throw ParseError(src, lineno, "network shape does not match the recorded recipe");
  }
  if (!r.stats.empty() && r.stats.size() != recipe_width(r.config.recipe)) {
    throw ParseError(src, lineno, "statistics width does not match the recipe");
  }
  return r;
}

void Recognizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  save(out);
}

Recognizer Recognizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return load(in);
}

void Ensemble::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << kEnsembleMagic << '\n';
  out << "members=" << members.size() << '\n';
  out << "subset_fraction=" << format_number(subset_fraction) << '\n';
  out << "seed=" << seed << '\n';
  for (const auto& m : members) m.save(out);
}

Ensemble Ensemble::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  const std::string src = path.string();
  std::string line;
  if (!std::getline(in, line) || trim(line) != kEnsembleMagic) throw ParseError(src, 1, "not an ensemble file");
  auto value = [&](std::string_view key, std::size_t lineno) {
    if (!std::getline(in, line)) throw ParseError(src, lineno, "unexpected end of file");
    const auto t = trim(line);
    if (t.substr(0, key.size() + 1) != std::string(key) + "=") {
      throw ParseError(src, lineno, "expected '" + std::string(key) + "='");
    }
    return std::string(t.substr(key.size() + 1));
  };
  Ensemble e;
  const auto count = parse_number<std::size_t>(value("members", 2), src, 2);
  e.subset_fraction = parse_number<double>(value("subset_fraction", 3), src, 3);
  e.seed = parse_number<std::uint64_t>(value("seed", 4), src, 4);
  for (std::size_t i = 0; i < count; ++i) e.members.push_back(Recognizer::load(in));
  return e;
}

}  // namespace hgr
