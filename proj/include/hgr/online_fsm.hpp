#ifndef HGR_ONLINE_FSM_HPP_
#define HGR_ONLINE_FSM_HPP_

#include <array>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgr/core_model.hpp"

namespace hgr {

struct FsmConfig {
  std::size_t buffer_size = 10;        // frames per classification window
  std::size_t confirm_threshold = 5;   // positive windows needed to confirm
  std::size_t probation_windows = 10;  // windows allowed for confirmation
  std::size_t end_confirm = 25;        // consecutive empty windows to close
  double frame_rate_hz = 50.0;

  /// Throws Error when a field is out of range.
  void validate() const;
  /// end_confirm expressed in seconds at frame_rate_hz.
  double end_confirm_seconds() const { return static_cast<double>(end_confirm) / frame_rate_hz; }
};

enum class FsmPhase { S1_Idle, S2_BeginCheck, S3_InGesture, S4_EndCheck };

std::string_view phase_name(FsmPhase p);

struct FsmState {
  std::string sequence_id;
  FsmPhase phase = FsmPhase::S1_Idle;
  std::optional<Label> candidate;
  std::size_t tentative_start = 0;
  std::size_t tentative_end = 0;
  std::size_t last_gesture_frame = 0;
  std::size_t probation = 0;   // windows seen since entering S2
  std::size_t empty_run = 0;   // consecutive fully empty windows in S4
  std::size_t fresh_from = 0;  // S1 ignores gesture frames before this one
  std::deque<bool> history;    // positivity of the most recent windows
  // Per-class frame votes since S2 entry and the frame each class was first seen.
  std::array<std::size_t, kGestureCount> votes{};
  std::array<std::size_t, kGestureCount> first_seen{};
};

/// Advances the machine by one window. `window` holds the labels of the most
/// recent frames, oldest first, and `newest_frame` is the index of its last
/// frame. A window is positive when its newest frame is a gesture.
///
/// S1: any gesture frame in the window opens S2 with the tentative start at
///     the first such frame. Frames already judged by an expired probation
///     are ignored.
/// S2: confirm_threshold positive windows among the last buffer_size go to
///     S3; a fully empty window after positives since S2 entry goes to S4; otherwise
///     the machine returns to S1 once probation_windows have elapsed.
/// S3: a fully empty window goes to S4 with the tentative end at the last
///     gesture frame.
/// S4: a newest frame of the candidate class returns to S3; end_confirm
///     consecutive empty windows emit the event and return to S1. A window
///     containing only other gesture classes restarts the empty count.
std::optional<DetectionEvent> fsm_step(FsmState& state, std::span<const Label> window, std::size_t newest_frame,
                                       const FsmConfig& config);

/// Streaming wrapper that owns the label buffer.
class OnlineFsm {
 public:
  explicit OnlineFsm(FsmConfig config = {}, std::string sequence_id = {});

  /// Feeds one frame label; returns an event when one closes on this frame.
  std::optional<DetectionEvent> push(Label label);
  /// Closes the stream; a confirmed gesture still open is emitted and ends
  /// at the last gesture frame.
  std::optional<DetectionEvent> finish();

  const FsmState& state() const { return state_; }
  std::size_t frames_seen() const { return frames_; }

 private:
  FsmConfig config_;
  FsmState state_;
  std::deque<Label> buffer_;
  std::vector<Label> scratch_;
  std::size_t frames_ = 0;
};

std::vector<DetectionEvent> fsm_run(std::span<const Label> labels, const FsmConfig& config = {},
                                    const std::string& sequence_id = {});

}  // namespace hgr

#endif  // HGR_ONLINE_FSM_HPP_
