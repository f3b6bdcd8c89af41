#include "hgr/seqnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hgr/core_model.hpp"

namespace hgr::seqnet {

namespace {

double loss_at(SequenceNet& net, const Matrix& x, const SequenceLayout& layout, std::span<const int> labels,
               LossKind loss, const FocalLossConfig& focal) {
  return compute_loss(net.forward(x, layout, Mode::Train), labels, loss, focal).loss;
}

struct Probe {
  double analytic;
  double central;
  bool kink;
};

// f(+h), f(0), f(-h) are evaluated by the caller; a kink shows up as a large
// disagreement between the two one-sided slopes relative to their size.
Probe compare(double analytic, double fp, double f0, double fm, double h) {
  const double forward = (fp - f0) / h;
  const double backward = (f0 - fm) / h;
  const double central = (fp - fm) / (2.0 * h);
  const double scale = std::max({std::abs(forward), std::abs(backward), 1e-6});
  return {analytic, central, std::abs(forward - backward) > 0.05 * scale};
}

double relative_error(double a, double n) { return std::abs(a - n) / std::max(kGradCheckFloor, std::abs(a) + std::abs(n)); }

}  // namespace

GradCheckResult grad_check(const SequenceNet& net_in, const Matrix& x, const SequenceLayout& layout,
                           std::span<const int> labels, LossKind loss, const FocalLossConfig& focal,
                           double step) {
  SequenceNet net = net_in;
  Trace trace;
  const Matrix logits = net.forward(x, layout, Mode::Train, &trace);
  const BatchLoss base = compute_loss(logits, labels, loss, focal);
  net.zero_grad();
  net.backward(base.grad_logits, layout, trace);

  GradCheckResult out;
  const double f0 = base.loss;
  for (Tensor* p : net.parameters()) {
    for (std::size_t k = 0; k < p->size(); ++k) {
      const double saved = p->values[k];
      p->values[k] = saved + step;
      const double fp = loss_at(net, x, layout, labels, loss, focal);
      p->values[k] = saved - step;
      const double fm = loss_at(net, x, layout, labels, loss, focal);
      p->values[k] = saved;
      const Probe probe = compare(p->grad[k], fp, f0, fm, step);
      const double err = relative_error(probe.analytic, probe.central);
      if (probe.kink && err >= 1e-4) {
        ++out.skipped;
        continue;
      }
      ++out.checked;
      if (err > out.max_relative_error) {
        out.max_relative_error = err;
        out.worst_parameter = p->name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return out;
}

GradCheckResult grad_check_input(const SequenceNet& net_in, const Matrix& x_in, const SequenceLayout& layout,
                                 std::span<const int> labels, LossKind loss, const FocalLossConfig& focal,
                                 double step) {
  SequenceNet net = net_in;
  Trace trace;
  const BatchLoss base = compute_loss(net.forward(x_in, layout, Mode::Train, &trace), labels, loss, focal);
  net.zero_grad();
  const Matrix gx = net.backward(base.grad_logits, layout, trace);

  GradCheckResult out;
  Matrix x = x_in;
  for (long i = 0; i < x.rows(); ++i) {
    for (long j = 0; j < x.cols(); ++j) {
      const double saved = x(i, j);
      x(i, j) = saved + step;
      const double fp = loss_at(net, x, layout, labels, loss, focal);
      x(i, j) = saved - step;
      const double fm = loss_at(net, x, layout, labels, loss, focal);
      x(i, j) = saved;
      const Probe probe = compare(gx(i, j), fp, base.loss, fm, step);
      const double err = relative_error(probe.analytic, probe.central);
      if (probe.kink && err >= 1e-4) {
        ++out.skipped;
        continue;
      }
      ++out.checked;
      if (err > out.max_relative_error) {
        out.max_relative_error = err;
        out.worst_parameter = "x[" + std::to_string(i) + "," + std::to_string(j) + "]";
      }
    }
  }
  return out;
}

std::string_view checked_stack_name(CheckedStack s) {
  switch (s) {
    case CheckedStack::Dense: return "dense";
    case CheckedStack::Gru: return "gru";
    case CheckedStack::ShiftStack: return "shift";
    case CheckedStack::BatchNorm: return "batch_norm";
    case CheckedStack::FocalHead: return "focal";
  }
  return "?";
}

CheckedStack parse_checked_stack(std::string_view name) {
  for (auto s : kCheckedStacks) {
    if (checked_stack_name(s) == name) return s;
  }
  throw Error("unknown layer stack '" + std::string(name) + "'");
}

GradCheckInstance make_grad_check_instance(CheckedStack stack, std::uint64_t seed) {
  constexpr std::size_t kIn = 4;
  constexpr std::size_t kHidden = 5;
  constexpr std::size_t kClasses = 3;
  std::mt19937_64 rng(seed);
  GradCheckInstance g;
  std::vector<std::size_t> lengths{6, 5};
  switch (stack) {
    case CheckedStack::Dense:
      g.net.emplace<Dense>(kIn, kHidden, true, Activation::Tanh);
      g.net.emplace<Dense>(kHidden, kClasses, true, Activation::None);
      break;
    case CheckedStack::Gru:
      g.net.emplace<Gru>(kIn, kHidden);
      g.net.emplace<Dense>(kHidden, kClasses, true, Activation::None);
      lengths = {8};
      break;
    case CheckedStack::ShiftStack:
      g.net.emplace<ShiftNode>(kIn, kHidden, Activation::Tanh);
      g.net.emplace<ShiftNode>(kHidden, kHidden, Activation::Relu);
      g.net.emplace<ShiftNode>(kHidden, kHidden, Activation::Relu);
      g.net.emplace<Dense>(kHidden, kClasses, true, Activation::None);
      lengths = {9, 7};
      break;
    case CheckedStack::BatchNorm:
      g.net.emplace<Dense>(kIn, kHidden, true, Activation::None);
      g.net.emplace<BatchNorm>(kHidden);
      g.net.emplace<Dense>(kHidden, kClasses, true, Activation::None);
      break;
    case CheckedStack::FocalHead:
      g.net.emplace<Dense>(kIn, kClasses, true, Activation::None);
      g.loss = LossKind::Focal;
      g.focal.gamma = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
      break;
  }
  g.net.init(rng());
  g.layout = SequenceLayout::from_lengths(lengths);
  std::normal_distribution<double> normal(0.0, 1.0);
  g.x.resize(static_cast<long>(g.layout.total_rows()), static_cast<long>(kIn));
  for (long i = 0; i < g.x.rows(); ++i) {
    for (long j = 0; j < g.x.cols(); ++j) g.x(i, j) = normal(rng);
  }
  std::uniform_int_distribution<int> cls(0, static_cast<int>(kClasses) - 1);
  for (std::size_t i = 0; i < g.layout.total_rows(); ++i) g.labels.push_back(cls(rng));
  return g;
}

GradCheckResult check_instance(const GradCheckInstance& g, double step) {
  GradCheckResult a = grad_check(g.net, g.x, g.layout, g.labels, g.loss, g.focal, step);
  const GradCheckResult b = grad_check_input(g.net, g.x, g.layout, g.labels, g.loss, g.focal, step);
  if (b.max_relative_error > a.max_relative_error) {
    a.max_relative_error = b.max_relative_error;
    a.worst_parameter = b.worst_parameter;
  }
  a.checked += b.checked;
  a.skipped += b.skipped;
  return a;
}

}  // namespace hgr::seqnet
