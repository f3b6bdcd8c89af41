#include "hgr/seqnet/optim.hpp"

#include <cmath>
#include <string>

#include "hgr/core_model.hpp"

namespace hgr::seqnet {

void Adam::step(const std::vector<Tensor*>& params, double lr) {
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw Error("adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (m_[i].size() != p.size()) throw Error("adam: shape of '" + p.name + "' changed between steps");
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = p.grad[k];
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.values[k] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

StepResult train_step(SequenceNet& net, const std::vector<const LabeledSequence*>& batch, LossKind loss,
                      const FocalLossConfig& focal, Adam& adam, double lr) {
  if (batch.empty()) throw Error("train_step: empty batch");
  std::vector<const Matrix*> inputs;
  std::vector<int> labels;
  for (const LabeledSequence* s : batch) {
    if (static_cast<std::size_t>(s->features.rows()) != s->labels.size()) {
      throw Error("train_step: label count does not match frame count");
    }
    inputs.push_back(&s->features);
    labels.insert(labels.end(), s->labels.begin(), s->labels.end());
  }
  auto [x, layout] = pack(inputs);

  Trace trace;
  const Matrix logits = net.forward(x, layout, Mode::Train, &trace);
  const BatchLoss l = compute_loss(logits, labels, loss, focal);
  if (!std::isfinite(l.loss)) {
    throw Error("train_step: non-finite loss (" + std::to_string(l.loss) + ") over " +
                std::to_string(labels.size()) + " frames");
  }
  net.zero_grad();
  net.backward(l.grad_logits, layout, trace);
  adam.step(net.parameters(), lr);
  return {l.loss, labels.size()};
}

}  // namespace hgr::seqnet
