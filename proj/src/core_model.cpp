#include "hgr/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "hgr/text_io.hpp"

namespace hgr {

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "Palm",    "ThumbA",    "ThumbB",  "ThumbEnd", "IndexA",  "IndexB",  "IndexC",
    "IndexEnd", "MiddleA", "MiddleB", "MiddleC",  "MiddleEnd", "RingA", "RingB",
    "RingC",   "RingEnd",  "PinkyA",  "PinkyB",   "PinkyC",  "PinkyEnd"};

constexpr std::array<std::string_view, kLabelCount> kLabelNames = {
    "ONE",  "TWO",   "THREE", "FOUR",  "OK",  "MENU", "POINTING", "LEFT", "RIGHT", "CIRCLE",
    "V",    "CROSS", "GRAB",  "PINCH", "TAP", "DENY", "KNOB",     "EXPAND", "NON_GESTURE"};

}  // namespace

std::string_view joint_name(JointId j) { return kJointNames[index_of(j)]; }

GestureKind kind_of(Label l) {
  const auto i = index_of(l);
  if (i <= index_of(Label::POINTING)) return GestureKind::Static;
  if (i <= index_of(Label::CROSS)) return GestureKind::CoarseDynamic;
  if (i <= index_of(Label::EXPAND)) return GestureKind::FineDynamic;
  return GestureKind::None;
}

std::string_view label_name(Label l) { return kLabelNames[index_of(l)]; }

Label parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return label_at(i);
  }
  throw Error("unknown gesture label '" + std::string(name) + "'");
}

std::array<Label, kGestureCount> gesture_labels() {
  std::array<Label, kGestureCount> out{};
  for (std::size_t i = 0; i < kGestureCount; ++i) out[i] = label_at(i);
  return out;
}

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

void validate(const HandFrame& frame) {
  for (std::size_t j = 0; j < kJointCount; ++j) {
    if (!frame.positions[j].allFinite()) {
      throw Error("non-finite position for joint " + std::string(kJointNames[j]));
    }
  }
  if (frame.rotations) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (std::abs((*frame.rotations)[j].norm() - 1.0) > 1e-6) {
        throw Error("quaternion of joint " + std::string(kJointNames[j]) + " is not unit length");
      }
    }
  }
  if (!std::isfinite(frame.timestamp_ms)) throw Error("non-finite timestamp");
}

void validate(const SkeletonSequence& seq) {
  if (seq.frames.empty()) throw Error("sequence '" + seq.id + "' has no frames");
  if (!(seq.frame_rate_hz > 0.0)) throw Error("sequence '" + seq.id + "' has non-positive frame rate");
  const bool quat = seq.frames.front().rotations.has_value();
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    validate(seq.frames[i]);
    if (seq.frames[i].rotations.has_value() != quat) {
      throw Error("sequence '" + seq.id + "' mixes frames with and without rotations");
    }
    if (i > 0 && !(seq.frames[i].timestamp_ms > seq.frames[i - 1].timestamp_ms)) {
      throw Error("sequence '" + seq.id + "': timestamps not strictly increasing at frame " +
                  std::to_string(i));
    }
  }
}

void validate_span(const GestureSpan& span, std::size_t sequence_length) {
  if (!is_gesture(span.label)) throw Error("span on '" + span.sequence_id + "' uses NON_GESTURE");
  if (span.start_frame > span.end_frame || span.end_frame >= sequence_length) {
    throw Error("span " + std::string(label_name(span.label)) + " [" +
                std::to_string(span.start_frame) + ", " + std::to_string(span.end_frame) +
                "] out of range for sequence '" + span.sequence_id + "' of length " +
                std::to_string(sequence_length));
  }
}

FrameView crop_window(const SkeletonSequence& seq, std::size_t start, std::size_t length) {
  if (start > seq.size() || length > seq.size() - start) {
    throw Error("crop [" + std::to_string(start) + ", +" + std::to_string(length) +
                ") exceeds sequence '" + seq.id + "' of length " + std::to_string(seq.size()));
  }
  return seq.view().subspan(start, length);
}

namespace {

Quat nlerp(const Quat& a, const Quat& b, double s) {
  // Shortest arc.
  const double dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  const double sign = dot < 0.0 ? -1.0 : 1.0;
  Quat q{(1 - s) * a.w + s * sign * b.w, (1 - s) * a.x + s * sign * b.x,
         (1 - s) * a.y + s * sign * b.y, (1 - s) * a.z + s * sign * b.z};
  const double n = q.norm();
  q.w /= n;
  q.x /= n;
  q.y /= n;
  q.z /= n;
  return q;
}

}  // namespace

FrameWindow resample_sequence(FrameView window, std::size_t target_steps) {
  if (window.size() < 2) throw Error("resample needs at least 2 frames");
  if (target_steps < 2) throw Error("resample target must be at least 2 steps");

  FrameWindow out(target_steps);
  const double last = static_cast<double>(window.size() - 1);
  for (std::size_t k = 0; k < target_steps; ++k) {
    const double u = static_cast<double>(k) * last / static_cast<double>(target_steps - 1);
    auto i0 = static_cast<std::size_t>(std::floor(u));
    if (i0 >= window.size() - 1) i0 = window.size() - 2;
    const double s = u - static_cast<double>(i0);
    const HandFrame& a = window[i0];
    const HandFrame& b = window[i0 + 1];
    HandFrame& f = out[k];
    if (k == 0) {
      f = window.front();
      continue;
    }
    if (k + 1 == target_steps) {
      f = window.back();
      continue;
    }
    for (std::size_t j = 0; j < kJointCount; ++j) {
      f.positions[j] = (1.0 - s) * a.positions[j] + s * b.positions[j];
    }
    f.timestamp_ms = (1.0 - s) * a.timestamp_ms + s * b.timestamp_ms;
    if (a.rotations && b.rotations) {
      f.rotations.emplace();
      for (std::size_t j = 0; j < kJointCount; ++j) {
        (*f.rotations)[j] = nlerp((*a.rotations)[j], (*b.rotations)[j], s);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File I/O

SkeletonSequence read_sequence_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open sequence file " + path.string());
  const std::string src = path.string();

  SkeletonSequence seq;
  seq.id = path.stem().string();

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(src, 1, "missing header");
  ++lineno;

  std::map<std::string, std::string> header;
  for (const auto& field : split(trim(line), ';')) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw ParseError(src, lineno, "bad header field '" + std::string(field) + "'");
    header[std::string(field.substr(0, eq))] = std::string(field.substr(eq + 1));
  }
  for (const char* key : {"frames", "rate", "joints", "quat"}) {
    if (!header.count(key)) throw ParseError(src, lineno, std::string("header lacks '") + key + "'");
  }
  const auto frame_count = parse_number<std::size_t>(header["frames"], src, lineno);
  seq.frame_rate_hz = parse_number<double>(header["rate"], src, lineno);
  if (parse_number<std::size_t>(header["joints"], src, lineno) != kJointCount) {
    throw ParseError(src, lineno, "joints must be 20");
  }
  const auto quat_flag = parse_number<int>(header["quat"], src, lineno);
  if (quat_flag != 0 && quat_flag != 1) throw ParseError(src, lineno, "quat must be 0 or 1");
  const bool quat = quat_flag == 1;
  const std::size_t per_joint = quat ? 7 : 3;
  const std::size_t expected_fields = 1 + kJointCount * per_joint;

  seq.frames.reserve(frame_count);
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto fields = split(body, ';');
    if (fields.size() != expected_fields) {
      throw ParseError(src, lineno, "expected " + std::to_string(expected_fields) + " fields, got " +
                                        std::to_string(fields.size()));
    }
    HandFrame f;
    f.timestamp_ms = parse_number<double>(fields[0], src, lineno);
    if (quat) f.rotations.emplace();
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const std::size_t base = 1 + j * per_joint;
      for (int a = 0; a < 3; ++a) f.positions[j][a] = parse_number<double>(fields[base + a], src, lineno);
      if (quat) {
        Quat& q = (*f.rotations)[j];
        q.w = parse_number<double>(fields[base + 3], src, lineno);
        q.x = parse_number<double>(fields[base + 4], src, lineno);
        q.y = parse_number<double>(fields[base + 5], src, lineno);
        q.z = parse_number<double>(fields[base + 6], src, lineno);
      }
    }
    if (!seq.frames.empty() && !(f.timestamp_ms > seq.frames.back().timestamp_ms)) {
      throw ParseError(src, lineno, "timestamps not strictly increasing");
    }
    try {
      validate(f);
    } catch (const Error& e) {
      throw ParseError(src, lineno, e.what());
    }
    seq.frames.push_back(std::move(f));
  }
  if (seq.frames.size() != frame_count) {
    throw ParseError(src, lineno, "header declares " + std::to_string(frame_count) + " frames, found " +
                                      std::to_string(seq.frames.size()));
  }
  validate(seq);
  return seq;
}

void write_sequence_file(const SkeletonSequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write sequence file " + path.string());
  const bool quat = seq.has_rotations();
  out << "frames=" << seq.size() << ";rate=" << format_number(seq.frame_rate_hz)
      << ";joints=" << kJointCount << ";quat=" << (quat ? 1 : 0) << '\n';
  std::string line;
  for (const HandFrame& f : seq.frames) {
    line.clear();
    line += format_number(f.timestamp_ms);
    for (std::size_t j = 0; j < kJointCount; ++j) {
      for (int a = 0; a < 3; ++a) {
        line += ';';
        line += format_number(f.positions[j][a]);
      }
      if (quat) {
        const Quat& q = (*f.rotations)[j];
        for (double v : {q.w, q.x, q.y, q.z}) {
          line += ';';
          line += format_number(v);
        }
      }
    }
    out << line << '\n';
  }
}

std::vector<GestureSpan> read_spans(const std::filesystem::path& path,
                                    std::span<const SkeletonSequence> sequences) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotation file " + path.string());
  const std::string src = path.string();

  std::map<std::string, std::size_t, std::less<>> lengths;
  for (const auto& s : sequences) lengths[s.id] = s.size();

  std::vector<GestureSpan> spans;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split(body, ';');
    if (fields.size() != 4) throw ParseError(src, lineno, "expected 'sequence_id;LABEL;start;end'");
    GestureSpan span;
    span.sequence_id = std::string(fields[0]);
    try {
      span.label = parse_label(fields[1]);
    } catch (const Error& e) {
      throw ParseError(src, lineno, e.what());
    }
    span.start_frame = parse_number<std::size_t>(fields[2], src, lineno);
    span.end_frame = parse_number<std::size_t>(fields[3], src, lineno);
    if (!sequences.empty()) {
      const auto it = lengths.find(span.sequence_id);
      if (it == lengths.end()) {
        throw ParseError(src, lineno, "unknown sequence '" + span.sequence_id + "'");
      }
      try {
        validate_span(span, it->second);
      } catch (const Error& e) {
        throw ParseError(src, lineno, e.what());
      }
    } else if (span.start_frame > span.end_frame || !is_gesture(span.label)) {
      throw ParseError(src, lineno, "invalid span");
    }
    spans.push_back(std::move(span));
  }
  return spans;
}

void write_spans(std::span<const GestureSpan> spans, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write annotation file " + path.string());
  for (const auto& s : spans) {
    out << s.sequence_id << ';' << label_name(s.label) << ';' << s.start_frame << ';' << s.end_frame
        << '\n';
  }
}

const SkeletonSequence* Dataset::find(std::string_view id) const {
  for (const auto& s : sequences) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

Dataset load_dataset(const std::filesystem::path& sequence_dir,
                     const std::filesystem::path& annotation_file) {
  if (!std::filesystem::is_directory(sequence_dir)) {
    throw Error("sequence directory " + sequence_dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(sequence_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".skel") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Dataset data;
  data.sequences.reserve(files.size());
  for (const auto& f : files) data.sequences.push_back(read_sequence_file(f));
  data.annotations = read_spans(annotation_file, data.sequences);
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& sequence_dir,
                  const std::filesystem::path& annotation_file) {
  std::filesystem::create_directories(sequence_dir);
  for (const auto& s : data.sequences) write_sequence_file(s, sequence_dir / (s.id + ".skel"));
  if (annotation_file.has_parent_path()) std::filesystem::create_directories(annotation_file.parent_path());
  write_spans(data.annotations, annotation_file);
}

}  // namespace hgr
