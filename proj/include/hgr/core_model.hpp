#ifndef HGR_CORE_MODEL_HPP_
#define HGR_CORE_MODEL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace hgr {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// ---------------------------------------------------------------------------
// Joints

inline constexpr std::size_t kJointCount = 20;

enum class JointId : std::uint8_t {
  Palm = 0,
  ThumbA, ThumbB, ThumbEnd,
  IndexA, IndexB, IndexC, IndexEnd,
  MiddleA, MiddleB, MiddleC, MiddleEnd,
  RingA, RingB, RingC, RingEnd,
  PinkyA, PinkyB, PinkyC, PinkyEnd,
};

constexpr std::size_t index_of(JointId j) { return static_cast<std::size_t>(j); }

/// Fingertips in anatomical order thumb -> pinky.
inline constexpr std::array<JointId, 5> kFingertips = {
    JointId::ThumbEnd, JointId::IndexEnd, JointId::MiddleEnd, JointId::RingEnd, JointId::PinkyEnd};

std::string_view joint_name(JointId j);

// ---------------------------------------------------------------------------
// Gesture classes

inline constexpr std::size_t kGestureCount = 18;
inline constexpr std::size_t kLabelCount = kGestureCount + 1;

enum class Label : std::uint8_t {
  ONE = 0, TWO, THREE, FOUR, OK, MENU, POINTING,
  LEFT, RIGHT, CIRCLE, V, CROSS,
  GRAB, PINCH, TAP, DENY, KNOB, EXPAND,
  NON_GESTURE,
};

enum class GestureKind { Static, CoarseDynamic, FineDynamic, None };

constexpr std::size_t index_of(Label l) { return static_cast<std::size_t>(l); }
constexpr Label label_at(std::size_t i) { return static_cast<Label>(i); }
constexpr bool is_gesture(Label l) { return l != Label::NON_GESTURE; }

GestureKind kind_of(Label l);
std::string_view label_name(Label l);
/// Parses an upper-case label name ("PINCH", "NON_GESTURE"). Throws Error.
Label parse_label(std::string_view name);
/// The 18 gesture labels in ordinal order.
std::array<Label, kGestureCount> gesture_labels();

// ---------------------------------------------------------------------------
// Frames and sequences

using Vec3 = Eigen::Vector3d;

struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
  double norm() const;
};

struct HandFrame {
  std::array<Vec3, kJointCount> positions;  // mm
  std::optional<std::array<Quat, kJointCount>> rotations;
  double timestamp_ms = 0.0;

  const Vec3& at(JointId j) const { return positions[index_of(j)]; }
  Vec3& at(JointId j) { return positions[index_of(j)]; }
};

using FrameView = std::span<const HandFrame>;
using FrameWindow = std::vector<HandFrame>;

struct SkeletonSequence {
  std::string id;
  std::vector<HandFrame> frames;
  double frame_rate_hz = 50.0;

  std::size_t size() const { return frames.size(); }
  bool has_rotations() const { return !frames.empty() && frames.front().rotations.has_value(); }
  FrameView view() const { return frames; }
};

/// Checks frame and sequence invariants; throws Error on violation.
void validate(const HandFrame& frame);
void validate(const SkeletonSequence& seq);

/// A labelled interval of frames, inclusive on both ends. Ground truth and
/// predictions share this type so the evaluator consumes both.
struct GestureSpan {
  std::string sequence_id;
  Label label = Label::NON_GESTURE;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;

  std::size_t length() const { return end_frame - start_frame + 1; }
  bool operator==(const GestureSpan&) const = default;
};

using AnnotationSpan = GestureSpan;
using DetectionEvent = GestureSpan;

// ---------------------------------------------------------------------------
// Windows

/// `length` consecutive frames of `seq` starting at `start`. Throws Error when
/// the range leaves the sequence.
FrameView crop_window(const SkeletonSequence& seq, std::size_t start, std::size_t length);

/// Linear resampling in frame-index time to exactly `target_steps` frames.
/// Endpoints are preserved; quaternions, when present, are interpolated and
/// renormalised.
FrameWindow resample_sequence(FrameView window, std::size_t target_steps);

// ---------------------------------------------------------------------------
// File I/O

/// Reads one `<id>.skel` file. The id is taken from the file stem.
SkeletonSequence read_sequence_file(const std::filesystem::path& path);
void write_sequence_file(const SkeletonSequence& seq, const std::filesystem::path& path);

/// Parses `sequence_id;LABEL;start;end` lines. When `sequences` is non-empty,
/// every span is checked against the matching sequence's frame range.
std::vector<GestureSpan> read_spans(const std::filesystem::path& path,
                                    std::span<const SkeletonSequence> sequences = {});
void write_spans(std::span<const GestureSpan> spans, const std::filesystem::path& path);

struct Dataset {
  std::vector<SkeletonSequence> sequences;
  std::vector<AnnotationSpan> annotations;

  const SkeletonSequence* find(std::string_view id) const;
};

/// Loads every `*.skel` file of `sequence_dir` (sorted by file name) and the
/// annotation file, validating cross references.
Dataset load_dataset(const std::filesystem::path& sequence_dir,
                     const std::filesystem::path& annotation_file);
void save_dataset(const Dataset& data, const std::filesystem::path& sequence_dir,
                  const std::filesystem::path& annotation_file);

/// Checks `0 <= start <= end < length` and a gesture label.
void validate_span(const GestureSpan& span, std::size_t sequence_length);

}  // namespace hgr

#endif  // HGR_CORE_MODEL_HPP_
