#include "hgr/online_fsm.hpp"

#include <algorithm>
#include <numeric>

namespace hgr {

void FsmConfig::validate() const {
  if (buffer_size == 0) throw Error("fsm: buffer_size must be positive");
  if (confirm_threshold == 0 || confirm_threshold > buffer_size) {
    throw Error("fsm: confirm_threshold must lie in [1, buffer_size]");
  }
  if (probation_windows == 0) throw Error("fsm: probation_windows must be positive");
  if (end_confirm == 0) throw Error("fsm: end_confirm must be positive");
  if (!(frame_rate_hz > 0.0)) throw Error("fsm: frame_rate_hz must be positive");
}

std::string_view phase_name(FsmPhase p) {
  switch (p) {
    case FsmPhase::S1_Idle: return "S1_Idle";
    case FsmPhase::S2_BeginCheck: return "S2_BeginCheck";
    case FsmPhase::S3_InGesture: return "S3_InGesture";
    case FsmPhase::S4_EndCheck: return "S4_EndCheck";
  }
  return "?";
}

namespace {

void vote(FsmState& s, Label l, std::size_t frame) {
  if (!is_gesture(l)) return;
  const auto i = index_of(l);
  if (s.votes[i] == 0) s.first_seen[i] = frame;
  ++s.votes[i];
}

Label majority(const FsmState& s) {
  std::size_t best = kGestureCount;
  for (std::size_t i = 0; i < kGestureCount; ++i) {
    if (s.votes[i] == 0) continue;
    if (best == kGestureCount || s.votes[i] > s.votes[best] ||
        (s.votes[i] == s.votes[best] && s.first_seen[i] < s.first_seen[best])) {
      best = i;
    }
  }
  return best == kGestureCount ? Label::NON_GESTURE : label_at(best);
}

void reset(FsmState& s) {
  s.phase = FsmPhase::S1_Idle;
  s.candidate.reset();
  s.probation = 0;
  s.empty_run = 0;
  s.votes.fill(0);
  s.first_seen.fill(0);
}

DetectionEvent close_event(const FsmState& s) {
  return DetectionEvent{s.sequence_id, *s.candidate, s.tentative_start, s.tentative_end};
}

}  // namespace

std::optional<DetectionEvent> fsm_step(FsmState& s, std::span<const Label> window, std::size_t newest_frame,
                                       const FsmConfig& config) {
  if (window.empty()) return std::nullopt;
  const Label newest = window.back();
  const bool positive = is_gesture(newest);
  const bool empty = std::none_of(window.begin(), window.end(), is_gesture);
  const std::size_t first_frame = newest_frame + 1 - window.size();

  s.history.push_back(positive);
  while (s.history.size() > config.buffer_size) s.history.pop_front();

  switch (s.phase) {
    case FsmPhase::S1_Idle: {
      const std::size_t skip = s.fresh_from > first_frame ? std::min(s.fresh_from - first_frame, window.size()) : 0;
      if (std::none_of(window.begin() + static_cast<long>(skip), window.end(), is_gesture)) return std::nullopt;
      s.phase = FsmPhase::S2_BeginCheck;
      s.probation = 1;
      s.votes.fill(0);
      // Restart the history so only windows since S2 entry count as evidence.
      s.history.assign(1, positive);
      bool first = true;
      for (std::size_t k = skip; k < window.size(); ++k) {
        if (!is_gesture(window[k])) continue;
        if (first) s.tentative_start = first_frame + k;
        first = false;
        vote(s, window[k], first_frame + k);
        s.last_gesture_frame = first_frame + k;
      }
      s.candidate = majority(s);
      break;
    }
    case FsmPhase::S2_BeginCheck: {
      ++s.probation;
      if (positive) {
        vote(s, newest, newest_frame);
        s.last_gesture_frame = newest_frame;
        s.candidate = majority(s);
      }
      break;
    }
    case FsmPhase::S3_InGesture: {
      if (positive) {
        vote(s, newest, newest_frame);
        s.last_gesture_frame = newest_frame;
        s.candidate = majority(s);
      }
      if (empty) {
        s.phase = FsmPhase::S4_EndCheck;
        s.tentative_end = s.last_gesture_frame;
        s.empty_run = 1;
      }
      return std::nullopt;
    }
    case FsmPhase::S4_EndCheck: {
      if (positive && newest == *s.candidate) {
        vote(s, newest, newest_frame);
        s.last_gesture_frame = newest_frame;
        s.phase = FsmPhase::S3_InGesture;
        s.empty_run = 0;
        return std::nullopt;
      }
      s.empty_run = empty ? s.empty_run + 1 : 0;
      break;
    }
  }

  if (s.phase == FsmPhase::S2_BeginCheck) {
    const auto positives = static_cast<std::size_t>(std::count(s.history.begin(), s.history.end(), true));
    if (positives >= config.confirm_threshold) {
      s.phase = FsmPhase::S3_InGesture;
    } else if (empty && std::accumulate(s.votes.begin(), s.votes.end(), std::size_t{0}) > 0) {
      s.phase = FsmPhase::S4_EndCheck;
      s.tentative_end = s.last_gesture_frame;
      s.empty_run = 1;
    } else if (s.probation >= config.probation_windows) {
      reset(s);
      s.fresh_from = newest_frame + 1;
    }
  }

  if (s.phase == FsmPhase::S4_EndCheck && s.empty_run >= config.end_confirm) {
    DetectionEvent e = close_event(s);
    reset(s);
    return e;
  }
  return std::nullopt;
}

OnlineFsm::OnlineFsm(FsmConfig config, std::string sequence_id) : config_(config) {
  config_.validate();
  state_.sequence_id = std::move(sequence_id);
}

std::optional<DetectionEvent> OnlineFsm::push(Label label) {
  buffer_.push_back(label);
  if (buffer_.size() > config_.buffer_size) buffer_.pop_front();
  scratch_.assign(buffer_.begin(), buffer_.end());
  return fsm_step(state_, scratch_, frames_++, config_);
}

std::optional<DetectionEvent> OnlineFsm::finish() {
  std::optional<DetectionEvent> out;
  if (state_.phase == FsmPhase::S3_InGesture || state_.phase == FsmPhase::S4_EndCheck) {
    state_.tentative_end = state_.last_gesture_frame;
    out = close_event(state_);
  }
  reset(state_);
  buffer_.clear();
  return out;
}

std::vector<DetectionEvent> fsm_run(std::span<const Label> labels, const FsmConfig& config,
                                    const std::string& sequence_id) {
  OnlineFsm fsm(config, sequence_id);
  std::vector<DetectionEvent> events;
  for (Label l : labels) {
    if (auto e = fsm.push(l)) events.push_back(std::move(*e));
  }
  if (auto e = fsm.finish()) events.push_back(std::move(*e));
  return events;
}

}  // namespace hgr
