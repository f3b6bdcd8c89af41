#include "hgr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hgr::synth {

namespace {

constexpr double kPi = std::numbers::pi;

struct FingerGeometry {
  Vec3 base;
  std::array<double, 3> segments;
};

// Index, middle, ring, pinky in the hand frame: x lateral (thumb at -x),
// y along the back of the hand, z towards the fingertips.
const std::array<FingerGeometry, 4> kFingers = {{
    {Vec3(-22.0, 0.0, 50.0), {40.0, 25.0, 20.0}},
    {Vec3(-3.0, 0.0, 55.0), {45.0, 28.0, 22.0}},
    {Vec3(15.0, 0.0, 50.0), {42.0, 27.0, 21.0}},
    {Vec3(31.0, -3.0, 42.0), {33.0, 20.0, 18.0}},
}};
const Vec3 kThumbBase(-30.0, -10.0, 5.0);
constexpr double kThumbProximal = 40.0;
constexpr double kThumbDistal = 32.0;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
double smooth(double v) {
  v = clamp01(v);
  return v * v * (3.0 - 2.0 * v);
}

Vec3 finger_direction(double bend, double spread) {
  return {std::cos(bend) * std::sin(spread), -std::sin(bend), std::cos(bend) * std::cos(spread)};
}

Eigen::Quaterniond bend_rotation(double bend, double spread) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(spread, Vec3::UnitY())) *
         Eigen::Quaterniond(Eigen::AngleAxisd(bend, Vec3::UnitX()));
}

Quat to_quat(const Eigen::Quaterniond& q) {
  const Eigen::Quaterniond n = q.normalized();
  return {n.w(), n.x(), n.y(), n.z()};
}

}  // namespace

HandPose blend(const HandPose& a, const HandPose& b, double w) {
  HandPose out;
  out.palm = (1.0 - w) * a.palm + w * b.palm;
  out.orientation = a.orientation.slerp(w, b.orientation);
  for (std::size_t i = 0; i < 5; ++i) {
    out.flex[i] = (1.0 - w) * a.flex[i] + w * b.flex[i];
    out.spread[i] = (1.0 - w) * a.spread[i] + w * b.spread[i];
  }
  out.pinch = (1.0 - w) * a.pinch + w * b.pinch;
  return out;
}

HandFrame pose_frame(const HandPose& pose, double timestamp_ms, bool rotations) {
  std::array<Vec3, kJointCount> local;
  std::array<Eigen::Quaterniond, kJointCount> rot;
  rot.fill(Eigen::Quaterniond::Identity());
  local[index_of(JointId::Palm)] = Vec3::Zero();

  for (std::size_t f = 0; f < 4; ++f) {
    const FingerGeometry& g = kFingers[f];
    const double flex = clamp01(pose.flex[f + 1]);
    const double spread = pose.spread[f + 1];
    const std::array<double, 3> bend = {flex * 75.0 * kPi / 180.0, flex * 170.0 * kPi / 180.0,
                                        flex * 235.0 * kPi / 180.0};
    const std::size_t a = index_of(JointId::IndexA) + 4 * f;
    local[a] = g.base;
    rot[a] = bend_rotation(bend[0], spread);
    for (std::size_t s = 0; s < 3; ++s) {
      local[a + s + 1] = local[a + s] + g.segments[s] * finger_direction(bend[s], spread);
      rot[a + s + 1] = bend_rotation(bend[std::min<std::size_t>(s + 1, 2)], spread);
    }
  }

  const double tf = clamp01(pose.flex[0]);
  const Vec3 d1 = ((1.0 - tf) * Vec3(-0.7, -0.1, 0.7) + tf * Vec3(0.2, -0.6, 0.6)).normalized();
  const Vec3 d2 = ((1.0 - tf) * Vec3(-0.4, -0.1, 0.9) + tf * Vec3(0.7, -0.5, 0.3)).normalized();
  Vec3 thumb_b = kThumbBase + kThumbProximal * d1;
  Vec3 thumb_end = thumb_b + kThumbDistal * d2;
  if (pose.pinch > 0.0) {
    const double c = clamp01(pose.pinch);
    const Vec3& index_tip = local[index_of(JointId::IndexEnd)];
    thumb_end = (1.0 - c) * thumb_end + c * index_tip;
    thumb_b = (1.0 - c) * thumb_b + c * (0.5 * (kThumbBase + thumb_end) + Vec3(0.0, -8.0, 0.0));
  }
  local[index_of(JointId::ThumbA)] = kThumbBase;
  local[index_of(JointId::ThumbB)] = thumb_b;
  local[index_of(JointId::ThumbEnd)] = thumb_end;
  const Eigen::Quaterniond thumb_rot = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), d1);
  rot[index_of(JointId::ThumbA)] = thumb_rot;
  rot[index_of(JointId::ThumbB)] = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), d2);
  rot[index_of(JointId::ThumbEnd)] = rot[index_of(JointId::ThumbB)];

  HandFrame frame;
  frame.timestamp_ms = timestamp_ms;
  const Eigen::Matrix3d r = pose.orientation.normalized().toRotationMatrix();
  for (std::size_t j = 0; j < kJointCount; ++j) frame.positions[j] = pose.palm + r * local[j];
  if (rotations) {
    std::array<Quat, kJointCount> q;
    for (std::size_t j = 0; j < kJointCount; ++j) q[j] = to_quat(pose.orientation * rot[j]);
    frame.rotations = q;
  }
  return frame;
}

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  if (sequence_count == 0) throw Error("synth: sequence_count must be positive");
  if (gestures_per_sequence.empty()) throw Error("synth: gestures_per_sequence is empty");
  for (std::size_t g : gestures_per_sequence) {
    if (g == 0) throw Error("synth: gestures per sequence must be positive");
  }
  if (!(noise_mm >= 0.0)) throw Error("synth: noise_mm must be non-negative");
  if (!(idle_amplitude_mm >= 0.0)) throw Error("synth: idle_amplitude_mm must be non-negative");
  if (!(idle_min_hz > 0.0) || idle_max_hz < idle_min_hz) throw Error("synth: invalid idle frequency range");
  if (min_gap == 0 || max_gap < min_gap) throw Error("synth: invalid gap range");
  if (!(frame_rate_hz > 0.0)) throw Error("synth: frame_rate_hz must be positive");
  for (Label l : classes) {
    if (!is_gesture(l)) throw Error("synth: NON_GESTURE cannot be generated as a gesture");
  }
}

std::pair<std::size_t, std::size_t> gesture_length_range(Label l) {
  switch (kind_of(l)) {
    case GestureKind::Static: return {75, 110};
    case GestureKind::CoarseDynamic: return {85, 130};
    case GestureKind::FineDynamic: return {75, 120};
    case GestureKind::None: break;
  }
  throw Error("synth: unknown gesture class " + std::string(label_name(l)));
}

namespace {

/// Per-instance variation of a gesture.
struct Variation {
  double amplitude = 1.0;
  double phase = 0.0;
};

/// Position along a polyline at arc-length fraction u.
Vec3 along(const std::vector<Vec3>& pts, double u) {
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) cum.push_back(cum.back() + (pts[i] - pts[i - 1]).norm());
  const double target = clamp01(u) * cum.back();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (target <= cum[i] || i + 1 == pts.size()) {
      const double seg = cum[i] - cum[i - 1];
      const double w = seg > 0.0 ? (target - cum[i - 1]) / seg : 0.0;
      return pts[i - 1] + w * (pts[i] - pts[i - 1]);
    }
  }
  return pts.back();
}

HandPose static_target(Label l, const HandPose& rest) {
  HandPose p = rest;
  p.pinch = 0.0;
  switch (l) {
    case Label::ONE: p.flex = {0.9, 0.0, 1.0, 1.0, 1.0}; break;
    case Label::TWO:
      p.flex = {0.9, 0.0, 0.0, 1.0, 1.0};
      p.spread[1] = -0.22;
      p.spread[2] = 0.18;
      break;
    case Label::THREE: p.flex = {0.0, 0.0, 0.0, 1.0, 1.0}; break;
    case Label::FOUR:
      p.flex = {0.95, 0.0, 0.0, 0.0, 0.0};
      p.spread = {0.0, -0.15, -0.03, 0.1, 0.25};
      break;
    case Label::OK:
      p.flex = {0.2, 0.5, 0.0, 0.0, 0.0};
      p.pinch = 0.97;
      break;
    case Label::MENU:
      p.flex = {0.0, 0.0, 0.0, 0.0, 0.0};
      p.orientation = rest.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(0.8 * kPi, Vec3::UnitZ()));
      break;
    case Label::POINTING:
      p.flex = {0.0, 0.0, 1.0, 1.0, 1.0};
      p.orientation = rest.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(0.55, Vec3::UnitX()));
      break;
    default: break;
  }
  return p;
}

/// Pose of gesture `l` at progress s in [0, 1], applied to the idle pose.
HandPose gesture_pose(Label l, double s, std::size_t length, const HandPose& rest, const Variation& v) {
  const double a = v.amplitude;
  switch (kind_of(l)) {
    case GestureKind::Static: {
      const double k = s * static_cast<double>(length - 1);
      const double ramp = 8.0;
      const double w = smooth(std::min(k / ramp, (static_cast<double>(length - 1) - k) / ramp));
      return blend(rest, static_target(l, rest), w);
    }
    case GestureKind::CoarseDynamic: {
      HandPose p = rest;
      Vec3 offset = Vec3::Zero();
      switch (l) {
        case Label::LEFT:
        case Label::RIGHT: {
          const double sign = l == Label::LEFT ? -1.0 : 1.0;
          const double out = s < 0.4 ? smooth(s / 0.4) : 1.0 - smooth((s - 0.4) / 0.6);
          offset = Vec3(sign * 150.0 * a * out, 0.0, 0.0);
          break;
        }
        case Label::CIRCLE: {
          const double phi = 2.0 * kPi * smooth(s);
          const double r = 60.0 * a;
          offset = Vec3(r * std::sin(phi), r * (1.0 - std::cos(phi)), 0.0);
          break;
        }
        case Label::V: {
          const double w = 80.0 * a, h = 150.0 * a;
          offset = along({Vec3(0, 0, 0), Vec3(w / 2, -h, 0), Vec3(w, 0, 0), Vec3(0, 0, 0)}, smooth(s));
          break;
        }
        case Label::CROSS: {
          const double w = 120.0 * a, h = 90.0 * a;
          offset = along({Vec3(0, 0, 0), Vec3(w, -h, 0), Vec3(w, 0, 0), Vec3(0, -h, 0), Vec3(0, 0, 0)}, smooth(s));
          break;
        }
        default: break;
      }
      p.palm = rest.palm + rest.orientation.toRotationMatrix() * Vec3(offset.x(), 0.0, 0.0) +
               Vec3(0.0, offset.y(), 0.0);
      return p;
    }
    case GestureKind::FineDynamic: {
      HandPose p = rest;
      const double edge = smooth(std::min(s / 0.12, (1.0 - s) / 0.12));
      switch (l) {
        case Label::GRAB: {
          HandPose open = rest, closed = rest;
          open.flex = {0.0, 0.0, 0.0, 0.0, 0.0};
          closed.flex = {0.8, 1.0, 1.0, 1.0, 1.0};
          if (s < 0.25) return blend(rest, open, smooth(s / 0.25));
          if (s < 0.55) return blend(open, closed, smooth((s - 0.25) / 0.3));
          if (s < 0.75) return closed;
          return blend(closed, rest, smooth((s - 0.75) / 0.25));
        }
        case Label::PINCH: {
          // Unique closure peak at s = 0.45 so the tip distance has a single minimum.
          const double w = s <= 0.45 ? s / 0.9 : 0.5 + (s - 0.45) / 1.1;
          p.pinch = 0.95 * std::sin(kPi * w);
          return p;
        }
        case Label::TAP: {
          auto bump = [](double x, double lo, double hi) {
            return x <= lo || x >= hi ? 0.0 : std::sin(kPi * (x - lo) / (hi - lo));
          };
          const double b = bump(s, 0.15, 0.45) + bump(s, 0.55, 0.85);
          p.flex[1] = rest.flex[1] + 0.6 * a * b;
          p.palm = rest.palm + Vec3(0.0, -12.0 * a * b, 0.0);
          return p;
        }
        case Label::DENY: {
          HandPose pose = rest;
          pose.flex = {0.8, 0.0, 0.95, 0.95, 0.95};
          HandPose q = blend(rest, pose, edge);
          q.spread[1] = rest.spread[1] + 0.45 * a * edge * std::sin(2.0 * kPi * 3.0 * s + v.phase);
          return q;
        }
        case Label::KNOB: {
          HandPose claw = rest;
          claw.flex = {0.5, 0.55, 0.55, 0.55, 0.55};
          HandPose q = blend(rest, claw, edge);
          const double roll = 0.9 * a * edge * std::sin(2.0 * kPi * 2.0 * s);
          q.orientation = rest.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(roll, Vec3::UnitZ()));
          return q;
        }
        case Label::EXPAND: {
          HandPose bunched = rest, wide = rest;
          bunched.flex = {0.7, 0.45, 0.45, 0.45, 0.45};
          bunched.spread = {0.0, 0.06, 0.0, -0.06, -0.1};
          wide.flex = {0.0, 0.0, 0.0, 0.0, 0.0};
          wide.spread = {0.0, -0.3, -0.02, 0.25, 0.5};
          if (s < 0.35) return blend(rest, bunched, smooth(s / 0.35));
          if (s < 0.7) return blend(bunched, wide, smooth((s - 0.35) / 0.35));
          return blend(wide, rest, smooth((s - 0.7) / 0.3));
        }
        default: break;
      }
      return p;
    }
    case GestureKind::None: break;
  }
  return rest;
}

struct IdleModel {
  std::array<std::array<double, 3>, 3> amp{};    // [axis][component]
  std::array<std::array<double, 3>, 3> freq{};
  std::array<std::array<double, 3>, 3> phase{};
  std::array<double, 3> finger_phase{};
  double finger_freq = 0.3;
  Vec3 home = Vec3(0.0, 200.0, 0.0);
  Eigen::Quaterniond tilt = Eigen::Quaterniond::Identity();

  IdleModel(std::mt19937_64& rng, double amplitude, double fmin, double fmax) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (auto& axis : amp) {
      for (double& a : axis) a = amplitude * (0.2 + 0.4 * u01(rng));
    }
    for (auto& axis : freq) {
      for (double& f : axis) f = fmin + (fmax - fmin) * u01(rng);
    }
    for (auto& axis : phase) {
      for (double& p : axis) p = 2.0 * kPi * u01(rng);
    }
    for (double& p : finger_phase) p = 2.0 * kPi * u01(rng);
    finger_freq = fmin + (fmax - fmin) * u01(rng);
    home += Vec3(40.0 * (u01(rng) - 0.5), 40.0 * (u01(rng) - 0.5), 40.0 * (u01(rng) - 0.5));
    const Vec3 axis = Vec3(u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5).normalized();
    tilt = Eigen::AngleAxisd(0.15 * u01(rng), axis);
  }

  HandPose at(double seconds) const {
    HandPose p;
    p.palm = home;
    for (int axis = 0; axis < 3; ++axis) {
      for (std::size_t k = 0; k < 3; ++k) {
        p.palm[axis] += amp[axis][k] * std::sin(2.0 * kPi * freq[axis][k] * seconds + phase[axis][k]);
      }
    }
    p.orientation = tilt;
    // Idle finger drift leaves thumb and index alone.
    for (std::size_t f = 2; f < 5; ++f) {
      p.flex[f] += 0.05 * std::sin(2.0 * kPi * finger_freq * seconds + finger_phase[f - 2]);
    }
    return p;
  }
};

struct Placement {
  Label label;
  std::size_t start;
  std::size_t length;
  Variation variation;
};

std::vector<HandFrame> render(std::size_t frame_count, const std::vector<Placement>& gestures, const IdleModel* idle,
                              const HandPose& still, double rate, double noise_mm, bool rotations,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::vector<HandFrame> frames(frame_count);
  std::size_t g = 0;
  for (std::size_t t = 0; t < frame_count; ++t) {
    const double seconds = static_cast<double>(t) / rate;
    const HandPose rest = idle ? idle->at(seconds) : still;
    while (g < gestures.size() && t > gestures[g].start + gestures[g].length - 1) ++g;
    HandPose pose = rest;
    if (g < gestures.size() && t >= gestures[g].start) {
      const Placement& p = gestures[g];
      const double s = static_cast<double>(t - p.start) / static_cast<double>(p.length - 1);
      pose = gesture_pose(p.label, s, p.length, rest, p.variation);
    }
    frames[t] = pose_frame(pose, 1000.0 * seconds, rotations);
    if (noise_mm > 0.0) {
      for (Vec3& q : frames[t].positions) {
        for (int a = 0; a < 3; ++a) q[a] += noise_mm * jitter(rng);
      }
    }
  }
  return frames;
}

Variation draw_variation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(0.85, 1.15), phase(-0.3, 0.3);
  return {amp(rng), phase(rng)};
}

}  // namespace

Dataset synth_generate(const SynthConfig& config) {
  config.validate();
  std::vector<Label> classes = config.classes;
  if (classes.empty()) {
    const auto all = gesture_labels();
    classes.assign(all.begin(), all.end());
  }
  std::mt19937_64 rng(config.seed);

  std::vector<std::size_t> per_sequence(config.sequence_count);
  std::uniform_int_distribution<std::size_t> pick_count(0, config.gestures_per_sequence.size() - 1);
  std::size_t total = 0;
  for (auto& n : per_sequence) {
    n = config.gestures_per_sequence[pick_count(rng)];
    total += n;
  }
  std::vector<Label> order;
  order.reserve(total);
  for (std::size_t i = 0; i < total; ++i) order.push_back(classes[i % classes.size()]);
  std::shuffle(order.begin(), order.end(), rng);

  Dataset data;
  std::uniform_int_distribution<std::size_t> gap(config.min_gap, config.max_gap);
  std::size_t next = 0;
  for (std::size_t s = 0; s < config.sequence_count; ++s) {
    std::string id = config.id_prefix;
    const std::string num = std::to_string(s);
    id += std::string(num.size() < 3 ? 3 - num.size() : 0, '0') + num;

    std::vector<Placement> gestures;
    std::size_t cursor = gap(rng);
    for (std::size_t k = 0; k < per_sequence[s]; ++k) {
      const Label l = order[next++];
      const auto [lo, hi] = gesture_length_range(l);
      const std::size_t len = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
      gestures.push_back({l, cursor, len, draw_variation(rng)});
      cursor += len + gap(rng);
    }
    const IdleModel idle(rng, config.idle_amplitude_mm, config.idle_min_hz, config.idle_max_hz);
    SkeletonSequence seq;
    seq.id = id;
    seq.frame_rate_hz = config.frame_rate_hz;
    seq.frames = render(cursor, gestures, &idle, HandPose{}, config.frame_rate_hz, config.noise_mm,
                        config.rotations, rng);
    for (const Placement& p : gestures) {
      data.annotations.push_back({id, p.label, p.start, p.start + p.length - 1});
    }
    data.sequences.push_back(std::move(seq));
  }
  return data;
}

FrameWindow gesture_clip(Label l, std::size_t length, double noise_mm, std::uint64_t seed, bool rotations) {
  if (!is_gesture(l)) throw Error("gesture_clip: NON_GESTURE has no template");
  if (length < 3) throw Error("gesture_clip: length must be at least 3");
  std::mt19937_64 rng(seed);
  const Variation v = draw_variation(rng);
  return render(length, {{l, 0, length, v}}, nullptr, HandPose{}, 50.0, noise_mm, rotations, rng);
}

}  // namespace hgr::synth
