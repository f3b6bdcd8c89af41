#ifndef HGR_SEQNET_OPTIM_HPP_
#define HGR_SEQNET_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "hgr/seqnet/loss.hpp"
#include "hgr/seqnet/network.hpp"

namespace hgr::seqnet {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are created lazily on the first
/// step and bound to the parameter order of that step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Tensor*>& params, double lr);
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// One frame-labelled training sequence.
struct LabeledSequence {
  Matrix features;          // T x d
  std::vector<int> labels;  // T class indices
};

struct StepResult {
  double loss = 0.0;
  std::size_t frames = 0;
};

/// Forward (training mode), loss, backpropagation through time and one Adam
/// update over a packed mini-batch. Throws Error on a non-finite loss.
StepResult train_step(SequenceNet& net, const std::vector<const LabeledSequence*>& batch, LossKind loss,
                      const FocalLossConfig& focal, Adam& adam, double lr);

}  // namespace hgr::seqnet

#endif  // HGR_SEQNET_OPTIM_HPP_
