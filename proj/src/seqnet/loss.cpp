#include "hgr/seqnet/loss.hpp"

#include <cmath>
#include <string>

#include "hgr/core_model.hpp"

namespace hgr::seqnet {

std::string_view loss_name(LossKind k) { return k == LossKind::Focal ? "focal" : "cross_entropy"; }

LossKind parse_loss(std::string_view name) {
  if (name == "focal") return LossKind::Focal;
  if (name == "cross_entropy" || name == "ce") return LossKind::CrossEntropy;
  throw Error("unknown loss '" + std::string(name) + "'");
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (long i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

LossTerm focal_loss(std::span<const double> p, std::size_t true_class, double gamma) {
  if (true_class >= p.size()) throw Error("focal_loss: class index out of range");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error("focal_loss: gamma must be finite and >= 0");
  const double pt = std::max(p[true_class], kProbFloor);
  const double q = std::max(0.0, 1.0 - p[true_class]);
  const double log_pt = std::log(pt);

  LossTerm out;
  out.loss = -std::pow(q, gamma) * log_pt;

  // dL/dp_t, then through softmax: dp_t/dz_j = p_t (delta_tj - p_j).
  double dl_dpt = -std::pow(q, gamma) / pt;
  if (gamma > 0.0 && q > 0.0) dl_dpt += gamma * std::pow(q, gamma - 1.0) * log_pt;
  out.grad_logits.resize(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double delta = j == true_class ? 1.0 : 0.0;
    out.grad_logits[j] = dl_dpt * p[true_class] * (delta - p[j]);
  }
  return out;
}

BatchLoss compute_loss(const Matrix& logits, std::span<const int> labels, LossKind kind,
                       const FocalLossConfig& config) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw Error("compute_loss: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(logits.rows()) + " rows");
  }
  const double gamma = kind == LossKind::Focal ? config.gamma : 0.0;
  const Matrix p = softmax_rows(logits);
  BatchLoss out;
  out.grad_logits.resize(logits.rows(), logits.cols());
  const double scale = logits.rows() > 0 ? 1.0 / static_cast<double>(logits.rows()) : 0.0;
  std::vector<double> row(static_cast<std::size_t>(logits.cols()));
  for (long i = 0; i < logits.rows(); ++i) {
    for (long j = 0; j < logits.cols(); ++j) row[static_cast<std::size_t>(j)] = p(i, j);
    const auto term = focal_loss(row, static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]), gamma);
    out.loss += term.loss * scale;
    for (long j = 0; j < logits.cols(); ++j) out.grad_logits(i, j) = term.grad_logits[static_cast<std::size_t>(j)] * scale;
  }
  return out;
}

}  // namespace hgr::seqnet
