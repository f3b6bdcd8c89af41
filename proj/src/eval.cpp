#include "hgr/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hgr {

FrameLabelVector rasterize(std::span<const GestureSpan> spans, std::size_t sequence_length, Label label) {
  FrameLabelVector v(sequence_length, 0);
  for (const auto& s : spans) {
    if (s.label != label) continue;
    validate_span(s, sequence_length);
    std::fill(v.begin() + static_cast<long>(s.start_frame), v.begin() + static_cast<long>(s.end_frame) + 1, 1);
  }
  return v;
}

double jaccard_index(std::span<const GestureSpan> gt, std::span<const GestureSpan> pred,
                     std::size_t sequence_length, Label label) {
  const auto g = rasterize(gt, sequence_length, label);
  const auto p = rasterize(pred, sequence_length, label);
  std::size_t inter = 0, uni = 0;
  for (std::size_t t = 0; t < sequence_length; ++t) {
    inter += (g[t] & p[t]);
    uni += (g[t] | p[t]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double temporal_iou(const GestureSpan& a, const GestureSpan& b) {
  const std::size_t lo = std::max(a.start_frame, b.start_frame);
  const std::size_t hi = std::min(a.end_frame, b.end_frame);
  const double inter = hi >= lo ? static_cast<double>(hi - lo + 1) : 0.0;
  const double uni = static_cast<double>(a.length() + b.length()) - inter;
  return inter / uni;
}

std::vector<long> greedy_match(std::span<const GestureSpan> gt, std::span<const GestureSpan> pred) {
  std::vector<std::size_t> pred_order(pred.size());
  std::iota(pred_order.begin(), pred_order.end(), 0);
  std::stable_sort(pred_order.begin(), pred_order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = pred[a];
    const auto& y = pred[b];
    return std::tie(x.sequence_id, x.start_frame, x.end_frame) <
           std::tie(y.sequence_id, y.start_frame, y.end_frame);
  });
  std::vector<std::size_t> gt_order(gt.size());
  std::iota(gt_order.begin(), gt_order.end(), 0);
  std::stable_sort(gt_order.begin(), gt_order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(gt[a].sequence_id, gt[a].start_frame) < std::tie(gt[b].sequence_id, gt[b].start_frame);
  });

  std::vector<long> match(pred.size(), -1);
  std::vector<bool> taken(gt.size(), false);
  for (const std::size_t pi : pred_order) {
    const auto& p = pred[pi];
    for (const std::size_t gi : gt_order) {
      const auto& g = gt[gi];
      if (taken[gi] || g.label != p.label || g.sequence_id != p.sequence_id) continue;
      if (temporal_iou(g, p) > kMatchIou) {
        taken[gi] = true;
        match[pi] = static_cast<long>(gi);
        break;
      }
    }
  }
  return match;
}

MetricsReport match_and_score(std::span<const GestureSpan> gt, std::span<const GestureSpan> pred,
                              const std::map<std::string, std::size_t>& sequence_lengths) {
  auto length_of = [&](const GestureSpan& s) {
    const auto it = sequence_lengths.find(s.sequence_id);
    if (it == sequence_lengths.end()) throw Error("span references unknown sequence '" + s.sequence_id + "'");
    validate_span(s, it->second);
    return it->second;
  };
  for (const auto& s : gt) length_of(s);
  for (const auto& s : pred) length_of(s);

  MetricsReport r;
  const auto match = greedy_match(gt, pred);
  for (const auto& g : gt) ++r.per_class[index_of(g.label)].gt_count;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto& c = r.per_class[index_of(pred[i].label)];
    if (match[i] >= 0) ++c.matched;
    else ++c.unmatched_pred;
  }

  // Jaccard per sequence, averaged over the classes present in either set.
  std::map<std::string, std::vector<GestureSpan>> gt_by_seq, pred_by_seq;
  for (const auto& g : gt) gt_by_seq[g.sequence_id].push_back(g);
  for (const auto& p : pred) pred_by_seq[p.sequence_id].push_back(p);
  std::array<double, kGestureCount> jaccard_sum{};
  double seq_sum = 0.0;
  std::size_t seq_count = 0;
  for (const auto& [id, len] : sequence_lengths) {
    const auto& gs = gt_by_seq[id];
    const auto& ps = pred_by_seq[id];
    double class_sum = 0.0;
    std::size_t class_count = 0;
    for (const Label l : gesture_labels()) {
      auto has = [l](const std::vector<GestureSpan>& v) {
        return std::any_of(v.begin(), v.end(), [l](const GestureSpan& s) { return s.label == l; });
      };
      if (!has(gs) && !has(ps)) continue;
      const double ji = jaccard_index(gs, ps, len, l);
      jaccard_sum[index_of(l)] += ji;
      ++r.per_class[index_of(l)].jaccard_samples;
      class_sum += ji;
      ++class_count;
    }
    if (class_count > 0) {
      seq_sum += class_sum / static_cast<double>(class_count);
      ++seq_count;
    }
  }
  r.mean_jaccard = seq_count > 0 ? seq_sum / static_cast<double>(seq_count) : 0.0;

  double det_sum = 0.0, fp_sum = 0.0;
  std::size_t det_n = 0, fp_n = 0;
  for (std::size_t k = 0; k < kGestureCount; ++k) {
    auto& c = r.per_class[k];
    c.jaccard = c.jaccard_samples > 0 ? jaccard_sum[k] / static_cast<double>(c.jaccard_samples) : 0.0;
    c.detection_rate = c.gt_count > 0 ? static_cast<double>(c.matched) / static_cast<double>(c.gt_count) : 0.0;
    c.fp_rate = static_cast<double>(c.unmatched_pred) / static_cast<double>(std::max<std::size_t>(1, c.gt_count));
    if (c.gt_count > 0) {
      det_sum += c.detection_rate;
      ++det_n;
    }
    if (c.gt_count > 0 || c.unmatched_pred > 0) {
      fp_sum += c.fp_rate;
      ++fp_n;
    }
    r.gt_count += c.gt_count;
    r.matched += c.matched;
    r.unmatched_pred += c.unmatched_pred;
  }
  r.mean_detection_rate = det_n > 0 ? det_sum / static_cast<double>(det_n) : 0.0;
  r.mean_fp_rate = fp_n > 0 ? fp_sum / static_cast<double>(fp_n) : 0.0;
  return r;
}

MetricsReport match_and_score(std::span<const GestureSpan> gt, std::span<const GestureSpan> pred,
                              std::span<const SkeletonSequence> sequences) {
  std::map<std::string, std::size_t> lengths;
  for (const auto& s : sequences) lengths[s.id] = s.size();
  return match_and_score(gt, pred, lengths);
}

// ---------------------------------------------------------------------------

std::string report_csv(const MetricsReport& report) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "class,jaccard,det_rate,fp_rate,gt_count,matched,unmatched_pred\n";
  for (const Label l : gesture_labels()) {
    const auto& c = report.per_class[index_of(l)];
    out << label_name(l) << ',' << c.jaccard << ',' << c.detection_rate << ',' << c.fp_rate << ','
        << c.gt_count << ',' << c.matched << ',' << c.unmatched_pred << '\n';
  }
  out << "MEAN," << report.mean_jaccard << ',' << report.mean_detection_rate << ',' << report.mean_fp_rate
      << ',' << report.gt_count << ',' << report.matched << ',' << report.unmatched_pred << '\n';
  return out.str();
}

std::string report_json(std::span<const MetricsReport> reports) {
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (const Label l : gesture_labels()) {
      const auto& c = r.per_class[index_of(l)];
      classes.push_back({{"class", label_name(l)},
                         {"jaccard", c.jaccard},
                         {"det_rate", c.detection_rate},
                         {"fp_rate", c.fp_rate},
                         {"gt_count", c.gt_count},
                         {"matched", c.matched},
                         {"unmatched_pred", c.unmatched_pred}});
    }
    runs.push_back({{"name", r.name},
                    {"classes", classes},
                    {"aggregate",
                     {{"jaccard", r.mean_jaccard},
                      {"det_rate", r.mean_detection_rate},
                      {"fp_rate", r.mean_fp_rate},
                      {"gt_count", r.gt_count},
                      {"matched", r.matched},
                      {"unmatched_pred", r.unmatched_pred}}},
                    {"timing",
                     {{"total_seconds", r.total_seconds},
                      {"mean_classification_seconds", r.mean_classification_seconds}}}});
  }
  return nlohmann::ordered_json{{"runs", runs}}.dump(2);
}

std::string summary_table(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  out << "method,det_rate,fp_rate,jaccard,total_time_s,class_time_s\n";
  for (const auto& r : reports) {
    out << r.name << ',' << r.mean_detection_rate << ',' << r.mean_fp_rate << ',' << r.mean_jaccard << ','
        << r.total_seconds << ',' << r.mean_classification_seconds << '\n';
  }
  return out.str();
}

void write_report(const MetricsReport& report, const std::filesystem::path& path_stem) {
  auto csv_path = path_stem;
  csv_path += ".csv";
  auto json_path = path_stem;
  json_path += ".json";
  if (path_stem.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_stem.parent_path(), ec);
  }
  std::ofstream csv(csv_path);
  std::ofstream json(json_path);
  if (!csv || !json) throw Error("cannot write report " + path_stem.string());
  csv << report_csv(report);
  json << report_json(std::span<const MetricsReport>(&report, 1)) << '\n';
}

}  // namespace hgr
