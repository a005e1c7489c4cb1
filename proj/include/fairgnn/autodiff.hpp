#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fairgnn/tensor.hpp"

namespace fairgnn {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode differentiation record.
///
/// Nodes are appended in evaluation order, so the append order is already a
/// topological order and backward() is a single reverse sweep. A node needs a
/// gradient only if some ancestor leaf was created with requires_grad.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends an op result. `fn` reads grad(self) and accumulates into inputs.
  Var push(Tensor value, std::vector<std::size_t> inputs, Backprop fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient of the most recent backward() loss; zeros if unreached.
  Tensor grad(Var v) const;
  /// Accumulation target for backprop closures; allocates lazily.
  Tensor& grad_ref(std::size_t id);
  const Tensor& grad_at(std::size_t id) const { return nodes_[id].grad; }

  /// Clears all gradients, then differentiates the 1x1 node `loss`.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  /// Sign pattern of every input seen by a non-differentiable point
  /// (relu, leaky relu, abs). grad_check compares patterns to detect kinks.
  void record_kinks(const Tensor& input);
  const std::vector<signed char>& kink_signature() const { return kinks_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    Backprop backprop;
    bool requires_grad = false;
    bool touched = false;
  };
  std::vector<Node> nodes_;
  std::vector<signed char> kinks_;
};

namespace ops {

Var matmul(Var a, Var b);
/// Constant sparse matrix times dense variable.
Var spmm(std::shared_ptr<const SparseMatrix> s, Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// x (n x d) plus a 1 x d bias broadcast over rows.
Var add_bias(Var x, Var bias);
Var scale(Var x, double c);
/// x times a 1x1 variable.
Var mul_scalar(Var x, Var s);
/// Elementwise product with a constant mask (pre-drawn dropout mask).
Var dropout(Var x, const Tensor& mask);

Var relu(Var x);
Var leaky_relu(Var x, double slope = 0.2);
Var sigmoid(Var x);
Var tanh(Var x);
Var abs(Var x);

Var row_softmax(Var x);
Var concat_cols(std::span<const Var> parts);
/// Elementwise mean of equal-shaped variables.
Var average(std::span<const Var> parts);
Var select_rows(Var x, std::span<const std::size_t> rows);
Var select_col(Var x, std::size_t col);

/// Per-edge scores on `pattern`: e_k = dst[row(k)] + src[col(k)] + bias[k].
/// dst and src are n x 1; `bias` is an optional per-edge constant.
Var edge_scores(std::shared_ptr<const SparseMatrix> pattern, Var dst, Var src,
                std::span<const double> bias = {});
/// Softmax of per-edge values (nnz x 1) within each row of the pattern.
/// Entries outside the pattern are masked out and receive exactly zero mass.
Var masked_row_softmax(std::shared_ptr<const SparseMatrix> pattern, Var edge_values);
/// out[i] = sum_k vals[k] * x[col(k)] over row i of the pattern.
Var spmm_edges(std::shared_ptr<const SparseMatrix> pattern, Var edge_values, Var x);
/// Weighted neighbor mean: out[i] = sum_j a_ij x_j / sum_j a_ij; empty rows give 0.
Var row_mean_over_neighbors(const SparseMatrix& adjacency, Var x);

/// Mean softmax cross-entropy over `rows`; labels are class indices.
Var cross_entropy(Var logits, std::span<const int> labels, std::span<const std::size_t> rows);
/// Mean binary cross-entropy of an n x 1 logit column against targets in [0,1].
Var binary_cross_entropy(Var logits, std::span<const double> targets,
                         std::span<const std::size_t> rows);
Var squared_norm(Var x);
Var inner_product(Var a, Var b);
Var sum(Var x);
/// Population covariance of two n x 1 columns over `rows`.
Var covariance(Var a, Var b, std::span<const std::size_t> rows);
/// x - S (S^T x) for a constant S with orthonormal columns.
Var project_out(Var x, std::shared_ptr<const Tensor> basis);

}  // namespace ops

/// Dense softmax of each row (no tape).
Tensor softmax_rows(const Tensor& logits);

}  // namespace fairgnn
