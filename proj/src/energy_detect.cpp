#include "hgr/energy_detect.hpp"

#include <algorithm>
#include <tuple>
#include <cmath>

#include <spdlog/spdlog.h>

namespace hgr {

namespace {

double guarded(double v) {
  if (std::abs(v) >= kEnergyDivEps) return v;
  return v < 0 ? -kEnergyDivEps : kEnergyDivEps;
}

double step_energy(const HandFrame& prev, const HandFrame& cur, EnergyKind kind) {
  double e = 0.0;
  for (std::size_t n = 0; n < kJointCount; ++n) {
    const Vec3& a = prev.positions[n];
    const Vec3& b = cur.positions[n];
    double s = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      double d;
      if (kind == EnergyKind::CoordinateRatio) {
        d = (b[axis] + kEnergyOffsetMm) / guarded(a[axis] + kEnergyOffsetMm) - 1.0;
      } else {
        d = b[axis] - a[axis];
      }
      s += d * d;
    }
    e += std::sqrt(s);
  }
  return e;
}

}  // namespace

std::vector<double> frame_energy(FrameView frames, EnergyKind kind) {
  std::vector<double> e(frames.size(), 0.0);
  for (std::size_t t = 1; t < frames.size(); ++t) e[t] = step_energy(frames[t - 1], frames[t], kind);
  return e;
}

double window_energy(FrameView window, EnergyKind kind) {
  if (window.size() < 2) throw Error("window_energy: window needs at least 2 frames");
  double e = 0.0;
  for (std::size_t t = 1; t < window.size(); ++t) e += step_energy(window[t - 1], window[t], kind);
  return e;
}

EnergyProfile make_profile(std::vector<double> energy, std::vector<std::size_t> window_starts,
                           std::size_t window_length, std::size_t stride) {
  EnergyProfile p;
  p.energy = std::move(energy);
  p.window_starts = std::move(window_starts);
  if (p.window_starts.empty()) {
    for (std::size_t i = 0; i < p.energy.size(); ++i) p.window_starts.push_back(i * stride);
  }
  p.window_length = window_length;
  p.stride = stride;
  p.delta.assign(p.energy.size(), std::nullopt);
  for (std::size_t i = 1; i + 1 < p.energy.size(); ++i) p.delta[i] = (p.energy[i + 1] - p.energy[i - 1]) / 2.0;
  return p;
}

EnergyProfile energy_profile(FrameView frames, std::size_t window_length, std::size_t stride,
                             EnergyKind kind) {
  if (window_length < 2) throw Error("energy_profile: window length must be at least 2");
  if (stride == 0) throw Error("energy_profile: stride must be positive");
  if (frames.size() < window_length) throw Error("energy_profile: sequence shorter than one window");
  const auto e = frame_energy(frames, kind);
  // prefix[t] = e[0] + ... + e[t-1]
  std::vector<double> prefix(e.size() + 1, 0.0);
  for (std::size_t t = 0; t < e.size(); ++t) prefix[t + 1] = prefix[t] + e[t];

  std::vector<double> energy;
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window_length <= frames.size(); s += stride) {
    // Steps s+1 .. s+L-1 lie inside the window.
    energy.push_back(prefix[s + window_length] - prefix[s + 1]);
    starts.push_back(s);
  }
  return make_profile(std::move(energy), std::move(starts), window_length, stride);
}

double default_epsilon(const EnergyProfile& profile) {
  double m = 0.0;
  for (const auto& d : profile.delta) {
    if (d) m = std::max(m, std::abs(*d));
  }
  return 0.05 * m;
}

std::vector<std::size_t> select_candidates(const EnergyProfile& profile, double epsilon) {
  std::vector<std::size_t> out;
  const auto& d = profile.delta;
  for (std::size_t i = 1; i + 1 < d.size(); ++i) {
    if (!d[i - 1] || !d[i] || !d[i + 1]) continue;
    if (*d[i - 1] > 0.0 && *d[i] < epsilon && *d[i + 1] < 0.0) out.push_back(i);
  }
  return out;
}

std::pair<std::size_t, std::size_t> centred_segment(std::size_t window_start, std::size_t window_length,
                                                    std::size_t segment_length, std::size_t sequence_length) {
  if (sequence_length == 0) throw Error("centred_segment: empty sequence");
  const std::size_t len = std::min(segment_length, sequence_length);
  const std::size_t centre = window_start + window_length / 2;
  std::size_t start = centre >= len / 2 ? centre - len / 2 : 0;
  if (start + len > sequence_length) start = sequence_length - len;
  return {start, start + len - 1};
}

CandidateReport analyze_candidates(const SkeletonSequence& seq, std::size_t window_length, std::size_t stride,
                                   const CandidateFilterConfig& config, const SegmentClassifier& classifier) {
  if (seq.size() < window_length + 2 * stride) {
    throw Error("detect_candidates: sequence '" + seq.id + "' is shorter than L + 2 * stride");
  }
  CandidateReport report;
  report.profile = energy_profile(seq.view(), window_length, stride, config.kind);
  report.epsilon = config.epsilon ? *config.epsilon : default_epsilon(report.profile);
  const auto per_frame = frame_energy(seq.view(), config.kind);

  for (std::size_t i : select_candidates(report.profile, report.epsilon)) {
    Candidate c;
    c.window_index = i;
    c.energy = report.profile.energy[i];
    std::tie(c.segment_start, c.segment_end) =
        centred_segment(report.profile.window_starts[i], window_length, config.segment_length, seq.size());

    const auto first = per_frame.begin() + static_cast<long>(c.segment_start);
    const auto last = per_frame.begin() + static_cast<long>(c.segment_end) + 1;
    const double peak = *std::max_element(first, last);
    c.event_start = c.segment_start;
    c.event_end = c.segment_end;
    if (peak > 0.0) {
      const double cut = config.trim_fraction * peak;
      auto above = [cut](double v) { return v > cut; };
      const auto lo = std::find_if(first, last, above);
      const auto hi = std::find_if(std::make_reverse_iterator(last), std::make_reverse_iterator(first), above);
      c.event_start = static_cast<std::size_t>(lo - per_frame.begin());
      c.event_end = static_cast<std::size_t>(hi.base() - per_frame.begin()) - 1;
    }

    ClassProbabilities p;
    try {
      p = classifier(crop_window(seq, c.segment_start, c.segment_end - c.segment_start + 1));
    } catch (const std::exception& e) {
      spdlog::warn("classifier failed on segment [{}, {}] of '{}': {}", c.segment_start, c.segment_end, seq.id,
                   e.what());
      continue;
    }
    c.non_gesture = p[index_of(Label::NON_GESTURE)];
    c.label = Label::ONE;
    c.confidence = p[0];
    for (std::size_t k = 1; k < kGestureCount; ++k) {
      if (p[k] > c.confidence) {
        c.confidence = p[k];
        c.label = label_at(k);
      }
    }
    c.kept = !(c.non_gesture > config.alpha) && !(c.confidence < config.beta);
    report.candidates.push_back(c);
  }
  return report;
}

std::vector<DetectionEvent> suppress_overlaps(const std::vector<Candidate>& kept, const std::string& sequence_id) {
  std::vector<const Candidate*> order;
  for (const Candidate& c : kept) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(),
                   [](const Candidate* a, const Candidate* b) {
                     return std::tie(a->confidence, a->energy) > std::tie(b->confidence, b->energy);
                   });
  std::vector<DetectionEvent> out;
  for (const Candidate* c : order) {
    const bool overlaps = std::any_of(out.begin(), out.end(), [&](const DetectionEvent& e) {
      return c->event_start <= e.end_frame && e.start_frame <= c->event_end;
    });
    if (!overlaps) out.push_back({sequence_id, c->label, c->event_start, c->event_end});
  }
  std::sort(out.begin(), out.end(),
            [](const DetectionEvent& a, const DetectionEvent& b) { return a.start_frame < b.start_frame; });
  return out;
}

std::vector<DetectionEvent> detect_candidates(const SkeletonSequence& seq, std::size_t window_length,
                                              std::size_t stride, const CandidateFilterConfig& config,
                                              const SegmentClassifier& classifier) {
  const CandidateReport report = analyze_candidates(seq, window_length, stride, config, classifier);
  std::vector<Candidate> kept;
  for (const Candidate& c : report.candidates) {
    if (c.kept) kept.push_back(c);
  }
  return suppress_overlaps(kept, seq.id);
}

}  // namespace hgr
