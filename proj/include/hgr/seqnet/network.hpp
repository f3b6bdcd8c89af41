#ifndef HGR_SEQNET_NETWORK_HPP_
#define HGR_SEQNET_NETWORK_HPP_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "hgr/seqnet/layers.hpp"

namespace hgr::seqnet {

/// Per-forward record of every layer's cache, consumed by backward().
struct Trace {
  std::vector<LayerCache> caches;
};

/// A static chain of layers mapping T x d frame features to T x C logits.
/// Softmax is applied by the loss and by predict_proba().
class SequenceNet {
 public:
  SequenceNet() = default;
  SequenceNet(const SequenceNet& other);
  SequenceNet& operator=(const SequenceNet& other);
  SequenceNet(SequenceNet&&) noexcept = default;
  SequenceNet& operator=(SequenceNet&&) noexcept = default;

  SequenceNet& add(std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    add(std::move(layer));
    return ref;
  }

  /// Throws Error naming the first layer whose input width does not match
  /// its predecessor's output width.
  void validate() const;

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  /// Seeded uniform ±1/sqrt(fan_in) initialisation of every layer.
  void init(std::uint64_t seed);

  /// Logits for packed sequences. A training pass records caches into
  /// `trace` and folds batch statistics into running statistics.
  Matrix forward(const Matrix& x, const SequenceLayout& layout, Mode mode, Trace* trace = nullptr);
  /// Inference-mode logits; does not modify the network.
  Matrix infer(const Matrix& x, const SequenceLayout& layout) const;
  /// Inference-mode per-frame class probabilities (rows sum to 1).
  Matrix predict_proba(const Matrix& x, const SequenceLayout& layout) const;

  /// Backpropagates d loss / d logits; accumulates into parameter gradients
  /// and returns d loss / d input.
  Matrix backward(const Matrix& grad_logits, const SequenceLayout& layout, const Trace& trace);

  std::vector<Tensor*> parameters();
  std::vector<Tensor*> buffers();
  std::size_t parameter_count() const;
  void zero_grad();

  /// Versioned text checkpoint: header, layer descriptions, then every
  /// parameter and buffer as `tensor <layer> <name> <rows> <cols>` followed
  /// by its values on one line.
  void save(std::ostream& out) const;
  static SequenceNet load(std::istream& in);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Packs per-sequence feature matrices into one matrix and its layout.
std::pair<Matrix, SequenceLayout> pack(const std::vector<const Matrix*>& sequences);

}  // namespace hgr::seqnet

#endif  // HGR_SEQNET_NETWORK_HPP_
