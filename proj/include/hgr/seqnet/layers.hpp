#ifndef HGR_SEQNET_LAYERS_HPP_
#define HGR_SEQNET_LAYERS_HPP_

#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hgr/seqnet/tensor.hpp"

namespace hgr::seqnet {

enum class Mode { Train, Infer };
enum class Activation { None, Tanh, Relu };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

/// Per-call scratch a layer keeps between forward and backward.
struct LayerCache {
  Mode mode = Mode::Infer;
  std::vector<Matrix> slots;
  std::vector<LayerCache> children;
};

/// One stage of a static sequence network. Activations are packed row-wise;
/// `layout` tells recurrent and shifting layers where sequences start.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t input_width() const = 0;
  virtual std::size_t output_width() const = 0;

  virtual Matrix forward(const Matrix& x, const SequenceLayout& layout, Mode mode,
                         LayerCache& cache) const = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  virtual Matrix backward(const Matrix& grad_out, const SequenceLayout& layout,
                          const LayerCache& cache) = 0;
  /// Applies state updates gathered during a training forward pass.
  virtual void commit(const LayerCache& /*cache*/) {}

  virtual std::vector<Tensor*> parameters() = 0;
  /// Non-trainable state persisted with checkpoints.
  virtual std::vector<Tensor*> buffers() { return {}; }
  virtual void init(std::mt19937_64& rng) = 0;

  /// `kind key=value ...`; parsed back by make_layer().
  virtual std::string describe() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
};

std::unique_ptr<Layer> make_layer(std::string_view description);

// ---------------------------------------------------------------------------

/// y = act(x W^T + b)
class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, bool bias = true, Activation act = Activation::None);

  std::string_view kind() const override { return "dense"; }
  std::size_t input_width() const override { return weight_.cols; }
  std::size_t output_width() const override { return weight_.rows; }
  Matrix forward(const Matrix& x, const SequenceLayout& layout, Mode mode, LayerCache& cache) const override;
  Matrix backward(const Matrix& grad_out, const SequenceLayout& layout, const LayerCache& cache) override;
  std::vector<Tensor*> parameters() override;
  void init(std::mt19937_64& rng) override;
  std::string describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }
  Activation activation() const { return act_; }

 private:
  Tensor weight_;
  Tensor bias_;
  bool has_bias_;
  Activation act_;
};

/// Per-feature normalisation with learnable scale and shift. Training uses
/// batch statistics over all rows and folds them into running statistics
/// (running = momentum * running + (1 - momentum) * batch); inference uses
/// the running statistics only.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(std::size_t width, double momentum = 0.9, double eps = 1e-5);

  std::string_view kind() const override { return "batch_norm"; }
  std::size_t input_width() const override { return gamma_.cols; }
  std::size_t output_width() const override { return gamma_.cols; }
  Matrix forward(const Matrix& x, const SequenceLayout& layout, Mode mode, LayerCache& cache) const override;
  Matrix backward(const Matrix& grad_out, const SequenceLayout& layout, const LayerCache& cache) override;
  void commit(const LayerCache& cache) override;
  std::vector<Tensor*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Tensor*> buffers() override { return {&running_mean_, &running_var_}; }
  void init(std::mt19937_64& rng) override;
  std::string describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }

  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }

 private:
  Tensor gamma_, beta_;
  Tensor running_mean_, running_var_;
  double momentum_;
  double eps_;
};

// ---------------------------------------------------------------------------
// GRU

/// Weights of one GRU cell. Matrices are hidden x input (W_x*) and
/// hidden x hidden (W_h*); biases are 1 x hidden.
struct GruCellParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor w_xr, w_hr, w_xu, w_hu, w_xc, w_hc;
  Tensor b_xr, b_hr, b_xu, b_hu, b_xc, b_hc;

  GruCellParams() = default;
  GruCellParams(std::size_t input, std::size_t hidden);
  std::vector<Tensor*> all();
};

/// Gate values of one GRU transition.
struct GruStep {
  RowVector r;    // reset gate
  RowVector u;    // update gate
  RowVector c;    // candidate
  RowVector h;    // new hidden state
};

/// r = σ(W_xr x + b_xr + W_hr h + b_hr), u likewise,
/// c = tanh(W_xc x + b_xc + r ∘ (W_hc h + b_hc)), h' = u ∘ h + (1 - u) ∘ c.
GruStep gru_cell_forward(const GruCellParams& p, const RowVector& x, const RowVector& h_prev);

/// Unidirectional GRU over each sequence of the batch, h_0 = 0.
class Gru final : public Layer {
 public:
  Gru(std::size_t in, std::size_t hidden);

  std::string_view kind() const override { return "gru"; }
  std::size_t input_width() const override { return p_.input_size; }
  std::size_t output_width() const override { return p_.hidden_size; }
  Matrix forward(const Matrix& x, const SequenceLayout& layout, Mode mode, LayerCache& cache) const override;
  Matrix backward(const Matrix& grad_out, const SequenceLayout& layout, const LayerCache& cache) override;
  std::vector<Tensor*> parameters() override { return p_.all(); }
  void init(std::mt19937_64& rng) override;
  std::string describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Gru>(*this); }

  GruCellParams& params() { return p_; }
  const GruCellParams& params() const { return p_; }

 private:
  GruCellParams p_;
};

// ---------------------------------------------------------------------------
// Temporal shift

inline constexpr std::size_t kShiftDistance = 5;

/// Number of leading features replaced by past-frame features.
inline std::size_t shifted_features(std::size_t width) { return width / 2; }

/// out[t][0, k) = in[t - distance][0, k) (zero when t < distance),
/// out[t][k, d) = in[t][k, d), per sequence, with k = shifted_features(d).
Matrix temporal_shift(const Matrix& x, const SequenceLayout& layout, std::size_t distance = kShiftDistance);
/// Adjoint of temporal_shift.
Matrix temporal_shift_backward(const Matrix& grad, const SequenceLayout& layout,
                               std::size_t distance = kShiftDistance);

/// Shift node: act(BN(FC_shift(shift(f)) + FC_residual(f))), where
/// FC_residual has no bias.
class ShiftNode final : public Layer {
 public:
  ShiftNode(std::size_t in, std::size_t out, Activation act, std::size_t distance = kShiftDistance);

  std::string_view kind() const override { return "shift_node"; }
  std::size_t input_width() const override { return shift_fc_.input_width(); }
  std::size_t output_width() const override { return shift_fc_.output_width(); }
  Matrix forward(const Matrix& x, const SequenceLayout& layout, Mode mode, LayerCache& cache) const override;
  Matrix backward(const Matrix& grad_out, const SequenceLayout& layout, const LayerCache& cache) override;
  void commit(const LayerCache& cache) override;
  std::vector<Tensor*> parameters() override;
  std::vector<Tensor*> buffers() override { return norm_.buffers(); }
  void init(std::mt19937_64& rng) override;
  std::string describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ShiftNode>(*this); }

  std::size_t distance() const { return distance_; }
  Dense& shift_fc() { return shift_fc_; }
  Dense& residual_fc() { return residual_fc_; }
  BatchNorm& norm() { return norm_; }

 private:
  Dense shift_fc_;
  Dense residual_fc_;
  BatchNorm norm_;
  Activation act_;
  std::size_t distance_;
};

}  // namespace hgr::seqnet

#endif  // HGR_SEQNET_LAYERS_HPP_
