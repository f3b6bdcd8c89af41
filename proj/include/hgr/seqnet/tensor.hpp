#ifndef HGR_SEQNET_TENSOR_HPP_
#define HGR_SEQNET_TENSOR_HPP_

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hgr::seqnet {

/// Row-major dense matrix. Activations are stored one frame per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using RowVectorMap = Eigen::Map<RowVector>;
using ConstRowVectorMap = Eigen::Map<const RowVector>;

/// A trainable parameter: values and gradient of identical shape.
/// Vectors are stored with shape {1, n}.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(std::string name, std::size_t rows, std::size_t cols)
      : name(std::move(name)), rows(rows), cols(cols), values(rows * cols, 0.0), grad(rows * cols, 0.0) {}

  std::size_t size() const { return values.size(); }
  MatrixMap mat() { return {values.data(), static_cast<long>(rows), static_cast<long>(cols)}; }
  ConstMatrixMap mat() const { return {values.data(), static_cast<long>(rows), static_cast<long>(cols)}; }
  MatrixMap grad_mat() { return {grad.data(), static_cast<long>(rows), static_cast<long>(cols)}; }
  RowVectorMap vec() { return {values.data(), static_cast<long>(values.size())}; }
  ConstRowVectorMap vec() const { return {values.data(), static_cast<long>(values.size())}; }
  RowVectorMap grad_vec() { return {grad.data(), static_cast<long>(grad.size())}; }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
  /// Uniform in [-bound, bound].
  void init_uniform(double bound, std::mt19937_64& rng);
};

/// Row ranges of the sequences packed into one activation matrix:
/// sequence i occupies rows [offsets[i], offsets[i+1]).
struct SequenceLayout {
  std::vector<std::size_t> offsets{0};

  static SequenceLayout single(std::size_t length) { return SequenceLayout{{0, length}}; }
  static SequenceLayout from_lengths(const std::vector<std::size_t>& lengths);

  std::size_t sequence_count() const { return offsets.size() - 1; }
  std::size_t total_rows() const { return offsets.back(); }
  std::size_t begin(std::size_t i) const { return offsets[i]; }
  std::size_t length(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

}  // namespace hgr::seqnet

#endif  // HGR_SEQNET_TENSOR_HPP_
