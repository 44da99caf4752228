#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "tsproto/nn.hpp"
#include "tsproto/types.hpp"

namespace tsproto {

/** Handle to one tape node. */
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/**
 * Reverse-mode differentiation over matrix-valued operations. Nodes are
 * appended in evaluation order (already topological); backward() walks them
 * in reverse, each node scattering its gradient into its parents. Values
 * live on the tape for the lifetime of one forward/backward pair.
 */
class Tape {
 public:
  /** New input node. Gradients flow into it unless requires_grad is false. */
  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  const Matrix& value(Var v) const { return node(v).value; }
  /** Valid after backward(); zero-initialized for differentiable nodes. */
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_rowvec(Var a, Var row);
  Var tanh(Var a);
  Var relu(Var a);

  /** Stride-1 same convolution; x stacks B length-T sequences, w is (k*Cin) x F. */
  Var conv1d(Var x, Var w, Index B, Index T, int k);

  /**
   * Batch normalization over rows with trainable gain/shift (1 x F each).
   * Training mode uses batch statistics and updates the running buffers in
   * place; inference mode reads them.
   */
  Var batchnorm(Var x, Var gamma, Var beta, RowVector& run_mean,
                RowVector& run_var, bool training, double momentum, double eps);

  Var segment_mean(Var x, Index B, Index T);
  Var tile_rows(Var p, Index copies);

  /** Linear-interpolated row sampling of p (T x C) at positions (B x T'). */
  Var gather_rows(Var p, Var positions);

  /** Adds row b of `rows` (B x C) to every stamp of sample b. */
  Var add_segment_rowvec(Var x, Var rows, Index B, Index T);

  /** out(b) = sum_t w(b*T+t) * sum_c x(b*T+t, c); w is a fixed weight vector. */
  Var weighted_rowsum_segments(Var x, Vector w, Index B, Index T);

  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, Index first, Index count);

  /** Row-wise minimum with lowest-index ties; subgradient flows to the argmin. */
  Var min_cols(Var a, std::vector<Index>* argmin = nullptr);

  /** out(b) = a(b, index[b]). */
  Var select_cols(Var a, std::vector<Index> index);

  /** out(b) = log sum_k exp(-a(b, k)), computed stably. */
  Var logsumexp_neg_cols(Var a);

  /** Forward difference over rows: out has one row less than the input. */
  Var time_diff(Var p);

  /** Euclidean norm of each row; subgradient 0 at zero rows. */
  Var rownorm(Var a);

  Var sum(Var a);
  Var mean(Var a);

  /** Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node. */
  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&, int self)> backprop;
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  Matrix& grad_of(int id) { return nodes_[id].grad; }
  const Matrix& value_of(int id) const { return nodes_[id].value; }
  Var push(Matrix value, bool requires_grad,
           std::function<void(Tape&, int self)> backprop);

  std::deque<Node> nodes_;
};

}  // namespace tsproto
