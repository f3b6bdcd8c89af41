#ifndef HGR_SEQNET_LOSS_HPP_
#define HGR_SEQNET_LOSS_HPP_

#include <span>
#include <string_view>
#include <vector>

#include "hgr/seqnet/tensor.hpp"

namespace hgr::seqnet {

enum class LossKind { Focal, CrossEntropy };

std::string_view loss_name(LossKind k);
LossKind parse_loss(std::string_view name);

struct FocalLossConfig {
  double gamma = 1.0;
};

/// Probabilities below this are clamped before the logarithm.
inline constexpr double kProbFloor = 1e-12;

/// Row-wise softmax, numerically stabilised.
Matrix softmax_rows(const Matrix& logits);

struct LossTerm {
  double loss = 0.0;
  std::vector<double> grad_logits;  // d loss / d logits, same length as p
};

/// -(1 - p_true)^gamma * log(p_true) for a softmax output `p`, with the
/// gradient taken through the softmax to the logits.
LossTerm focal_loss(std::span<const double> p, std::size_t true_class, double gamma);

struct BatchLoss {
  double loss = 0.0;   // mean over rows
  Matrix grad_logits;  // d mean-loss / d logits
};

/// Mean per-frame loss over all rows. Cross-entropy is focal loss with
/// gamma = 0.
BatchLoss compute_loss(const Matrix& logits, std::span<const int> labels, LossKind kind,
                       const FocalLossConfig& config = {});

}  // namespace hgr::seqnet

#endif  // HGR_SEQNET_LOSS_HPP_
