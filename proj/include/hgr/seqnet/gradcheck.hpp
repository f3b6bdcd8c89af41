#ifndef HGR_SEQNET_GRADCHECK_HPP_
#define HGR_SEQNET_GRADCHECK_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgr/seqnet/loss.hpp"
#include "hgr/seqnet/network.hpp"

namespace hgr::seqnet {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
  // Coordinates whose one-sided differences disagree, i.e. where the step
  // crosses a ReLU kink. They are excluded from the maximum.
  std::size_t skipped = 0;
};

inline constexpr double kGradCheckStep = 1e-4;
/// Denominator floor of the relative error. Central differences at the
/// default step carry roundoff near 1e-12, so parameters whose true gradient
/// is zero (a bias feeding batch norm) would otherwise report noise.
inline constexpr double kGradCheckFloor = 1e-6;

/// Compares analytic parameter gradients of the mean training-mode loss with
/// central finite differences for every parameter coordinate. Returns
/// max |gA - gN| / max(kGradCheckFloor, |gA| + |gN|). The network is not modified.
GradCheckResult grad_check(const SequenceNet& net, const Matrix& x, const SequenceLayout& layout,
                           std::span<const int> labels, LossKind loss, const FocalLossConfig& focal = {},
                           double step = kGradCheckStep);

/// Same comparison for the gradient with respect to the input.
GradCheckResult grad_check_input(const SequenceNet& net, const Matrix& x, const SequenceLayout& layout,
                                 std::span<const int> labels, LossKind loss, const FocalLossConfig& focal = {},
                                 double step = kGradCheckStep);

enum class CheckedStack { Dense, Gru, ShiftStack, BatchNorm, FocalHead };

std::string_view checked_stack_name(CheckedStack s);
CheckedStack parse_checked_stack(std::string_view name);
inline constexpr std::array<CheckedStack, 5> kCheckedStacks = {CheckedStack::Dense, CheckedStack::Gru,
                                                              CheckedStack::ShiftStack, CheckedStack::BatchNorm,
                                                              CheckedStack::FocalHead};

/// A small random network of the given kind with random packed inputs and
/// labels, all drawn from `seed`. GRU instances unroll 8 steps and the
/// shift stack has three nodes.
struct GradCheckInstance {
  SequenceNet net;
  Matrix x;
  SequenceLayout layout;
  std::vector<int> labels;
  LossKind loss = LossKind::CrossEntropy;
  FocalLossConfig focal;
};

GradCheckInstance make_grad_check_instance(CheckedStack stack, std::uint64_t seed);

/// Parameter and input checks of one instance, merged.
GradCheckResult check_instance(const GradCheckInstance& instance, double step = kGradCheckStep);

}  // namespace hgr::seqnet

#endif  // HGR_SEQNET_GRADCHECK_HPP_
