#include "tsproto/tape.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

namespace tsproto {

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("Tape: invalid node handle");
  return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad)
    throw std::logic_error("Tape::grad: node does not require gradients");
  return n.grad;
}

Var Tape::push(Matrix value, bool requires_grad,
               std::function<void(Tape&, int)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  return push(std::move(value), requires_grad, {});
}

Var Tape::matmul(Var a, Var b) {
  Matrix out = value(a) * value(b);
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.requires_grad(a)) t.grad_of(a.id).noalias() += g * t.value_of(b.id).transpose();
    if (t.requires_grad(b)) t.grad_of(b.id).noalias() += t.value_of(a.id).transpose() * g;
  });
}

Var Tape::add(Var a, Var b) {
  Matrix out = value(a) + value(b);
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.requires_grad(a)) t.grad_of(a.id) += g;
    if (t.requires_grad(b)) t.grad_of(b.id) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  Matrix out = value(a) - value(b);
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.requires_grad(a)) t.grad_of(a.id) += g;
    if (t.requires_grad(b)) t.grad_of(b.id) -= g;
  });
}

Var Tape::cmul(Var a, Var b) {
  Matrix out = value(a).cwiseProduct(value(b));
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.requires_grad(a)) t.grad_of(a.id) += g.cwiseProduct(t.value_of(b.id));
    if (t.requires_grad(b)) t.grad_of(b.id) += g.cwiseProduct(t.value_of(a.id));
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a) * s;
  return push(std::move(out), requires_grad(a), [a, s](Tape& t, int self) {
    t.grad_of(a.id) += s * t.grad_of(self);
  });
}

Var Tape::add_rowvec(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
    throw std::invalid_argument("add_rowvec: row shape mismatch");
  Matrix out = value(a).rowwise() + value(row).row(0);
  const bool rg = requires_grad(a) || requires_grad(row);
  return push(std::move(out), rg, [a, row](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.requires_grad(a)) t.grad_of(a.id) += g;
    if (t.requires_grad(row)) t.grad_of(row.id) += g.colwise().sum();
  });
}

Var Tape::tanh(Var a) {
  Matrix out = value(a).array().tanh();
  return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
    const Matrix& y = t.value_of(self);
    t.grad_of(a.id).array() += (1.0 - y.array().square()) * t.grad_of(self).array();
  });
}

Var Tape::relu(Var a) {
  Matrix out = value(a).cwiseMax(0.0);
  return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
    const Matrix& y = t.value_of(self);
    t.grad_of(a.id).array() +=
        (y.array() > 0.0).select(t.grad_of(self), Matrix::Zero(y.rows(), y.cols())).array();
  });
}

Var Tape::conv1d(Var x, Var w, Index B, Index T, int k) {
  const Matrix col = nn::im2col(value(x), B, T, k);
  if (col.cols() != value(w).rows())
    throw std::invalid_argument("conv1d: weight shape mismatch");
  Matrix out = col * value(w);
  const bool rg = requires_grad(x) || requires_grad(w);
  return push(std::move(out), rg, [x, w, B, T, k](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    // The unfolded input is recomputed rather than kept alive on the tape.
    const Matrix col = nn::im2col(t.value_of(x.id), B, T, k);
    if (t.requires_grad(w)) t.grad_of(w.id).noalias() += col.transpose() * g;
    if (t.requires_grad(x)) {
      const Matrix dcol = g * t.value_of(w.id).transpose();
      nn::col2im_add(dcol, B, T, k, t.grad_of(x.id));
    }
  });
}

Var Tape::batchnorm(Var x, Var gamma, Var beta, RowVector& run_mean,
                    RowVector& run_var, bool training, double momentum,
                    double eps) {
  const RowVector g_row = value(gamma).row(0);
  const RowVector b_row = value(beta).row(0);
  auto stats = std::make_shared<nn::BatchNormStats>();
  Matrix out;
  if (training) {
    out = nn::batchnorm_train(value(x), g_row, b_row, run_mean, run_var, momentum,
                              eps, stats.get());
  } else {
    out = nn::batchnorm_infer(value(x), g_row, b_row, run_mean, run_var, eps);
    stats->mean = run_mean;
    stats->inv_std = (run_var.array() + eps).rsqrt();
  }
  const bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
  return push(std::move(out), rg,
              [x, gamma, beta, stats, training](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    const Matrix xhat = (t.value_of(x.id).rowwise() - stats->mean).array().rowwise() *
                        stats->inv_std.array();
    if (t.requires_grad(beta)) t.grad_of(beta.id) += g.colwise().sum();
    if (t.requires_grad(gamma))
      t.grad_of(gamma.id) += g.cwiseProduct(xhat).colwise().sum();
    if (!t.requires_grad(x)) return;
    const RowVector gain = t.value_of(gamma.id).row(0);
    Matrix dxhat = g.array().rowwise() * gain.array();
    if (training) {
      const double n = static_cast<double>(g.rows());
      const RowVector sum_d = dxhat.colwise().sum();
      const RowVector sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
      Matrix dx = n * dxhat;
      dx.rowwise() -= sum_d;
      dx.array() -= xhat.array().rowwise() * sum_dx.array();
      t.grad_of(x.id).array() += dx.array().rowwise() * (stats->inv_std / n).array();
    } else {
      t.grad_of(x.id).array() += dxhat.array().rowwise() * stats->inv_std.array();
    }
  });
}

Var Tape::segment_mean(Var x, Index B, Index T) {
  Matrix out = nn::segment_mean(value(x), B, T);
  return push(std::move(out), requires_grad(x), [x, B, T](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    Matrix& dx = t.grad_of(x.id);
    for (Index b = 0; b < B; ++b)
      dx.middleRows(b * T, T).rowwise() +=
          RowVector(g.row(b) / static_cast<double>(T));
  });
}

Var Tape::tile_rows(Var p, Index copies) {
  const Matrix& src = value(p);
  Matrix out(src.rows() * copies, src.cols());
  for (Index b = 0; b < copies; ++b) out.middleRows(b * src.rows(), src.rows()) = src;
  return push(std::move(out), requires_grad(p), [p, copies](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    const Index rows = t.value_of(p.id).rows();
    Matrix& dp = t.grad_of(p.id);
    for (Index b = 0; b < copies; ++b) dp += g.middleRows(b * rows, rows);
  });
}

Var Tape::gather_rows(Var p, Var positions) {
  const Index T = value(p).rows();
  auto index = std::make_shared<nn::GatherIndex>(
      nn::make_gather_index(value(positions), T));
  Matrix out = nn::gather_rows(value(p), *index);
  const bool rg = requires_grad(p) || requires_grad(positions);
  const Index q_cols = value(positions).cols();
  return push(std::move(out), rg, [p, positions, index, q_cols](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    const Matrix& proto = t.value_of(p.id);
    const bool need_p = t.requires_grad(p);
    const bool need_q = t.requires_grad(positions);
    Matrix* dp = need_p ? &t.grad_of(p.id) : nullptr;
    Matrix* dq = need_q ? &t.grad_of(positions.id) : nullptr;
    for (std::size_t r = 0; r < index->lo.size(); ++r) {
      const Index row = static_cast<Index>(r);
      const Index lo = index->lo[r];
      const double f = index->frac[r];
      if (need_p) {
        if (f == 0.0) {
          dp->row(lo) += g.row(row);
        } else {
          dp->row(lo) += (1.0 - f) * g.row(row);
          dp->row(lo + 1) += f * g.row(row);
        }
      }
      if (need_q && index->interior[r]) {
        // Right-sided slope of the interpolant in the position argument.
        (*dq)(row / q_cols, row % q_cols) +=
            (proto.row(lo + 1) - proto.row(lo)).dot(g.row(row));
      }
    }
  });
}

Var Tape::add_segment_rowvec(Var x, Var rows, Index B, Index T) {
  if (value(rows).rows() != B || value(rows).cols() != value(x).cols())
    throw std::invalid_argument("add_segment_rowvec: shape mismatch");
  Matrix out = value(x);
  for (Index b = 0; b < B; ++b)
    out.middleRows(b * T, T).rowwise() += RowVector(value(rows).row(b));
  const bool rg = requires_grad(x) || requires_grad(rows);
  return push(std::move(out), rg, [x, rows, B, T](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    if (t.requires_grad(x)) t.grad_of(x.id) += g;
    if (t.requires_grad(rows)) {
      Matrix& dr = t.grad_of(rows.id);
      for (Index b = 0; b < B; ++b) dr.row(b) += g.middleRows(b * T, T).colwise().sum();
    }
  });
}

Var Tape::weighted_rowsum_segments(Var x, Vector w, Index B, Index T) {
  if (value(x).rows() != B * T || w.size() != B * T)
    throw std::invalid_argument("weighted_rowsum_segments: shape mismatch");
  auto weights = std::make_shared<Vector>(std::move(w));
  Matrix out(B, 1);
  for (Index b = 0; b < B; ++b)
    out(b, 0) = value(x)
                    .middleRows(b * T, T)
                    .rowwise()
                    .sum()
                    .dot(weights->segment(b * T, T));
  return push(std::move(out), requires_grad(x), [x, weights, B, T](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    Matrix& dx = t.grad_of(x.id);
    for (Index b = 0; b < B; ++b)
      for (Index j = 0; j < T; ++j)
        dx.row(b * T + j).array() += (*weights)[b * T + j] * g(b, 0);
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const Index rows = value(parts.front()).rows();
  Index cols = 0;
  bool rg = false;
  for (Var v : parts) {
    if (value(v).rows() != rows)
      throw std::invalid_argument("concat_cols: row count mismatch");
    cols += value(v).cols();
    rg = rg || requires_grad(v);
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (Var v : parts) {
    out.middleCols(at, value(v).cols()) = value(v);
    at += value(v).cols();
  }
  auto sources = std::make_shared<std::vector<Var>>(parts);
  return push(std::move(out), rg, [sources](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    Index at = 0;
    for (Var v : *sources) {
      const Index n = t.value_of(v.id).cols();
      if (t.requires_grad(v)) t.grad_of(v.id) += g.middleCols(at, n);
      at += n;
    }
  });
}

Var Tape::slice_cols(Var a, Index first, Index count) {
  Matrix out = value(a).middleCols(first, count);
  return push(std::move(out), requires_grad(a), [a, first, count](Tape& t, int self) {
    t.grad_of(a.id).middleCols(first, count) += t.grad_of(self);
  });
}

Var Tape::min_cols(Var a, std::vector<Index>* argmin) {
  const Matrix& v = value(a);
  auto arg = std::make_shared<std::vector<Index>>(v.rows());
  Matrix out(v.rows(), 1);
  for (Index r = 0; r < v.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < v.cols(); ++c)
      if (v(r, c) < v(r, best)) best = c;
    (*arg)[r] = best;
    out(r, 0) = v(r, best);
  }
  if (argmin) *argmin = *arg;
  return push(std::move(out), requires_grad(a), [a, arg](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    Matrix& da = t.grad_of(a.id);
    for (Index r = 0; r < g.rows(); ++r) da(r, (*arg)[r]) += g(r, 0);
  });
}

Var Tape::select_cols(Var a, std::vector<Index> index) {
  const Matrix& v = value(a);
  if (static_cast<Index>(index.size()) != v.rows())
    throw std::invalid_argument("select_cols: index size mismatch");
  auto idx = std::make_shared<std::vector<Index>>(std::move(index));
  Matrix out(v.rows(), 1);
  for (Index r = 0; r < v.rows(); ++r) out(r, 0) = v(r, (*idx)[r]);
  return push(std::move(out), requires_grad(a), [a, idx](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    Matrix& da = t.grad_of(a.id);
    for (Index r = 0; r < g.rows(); ++r) da(r, (*idx)[r]) += g(r, 0);
  });
}

Var Tape::logsumexp_neg_cols(Var a) {
  const Matrix& v = value(a);
  auto softmax = std::make_shared<Matrix>(v.rows(), v.cols());
  Matrix out(v.rows(), 1);
  for (Index r = 0; r < v.rows(); ++r) {
    const double m = v.row(r).minCoeff();
    const Eigen::ArrayXd e = (-(v.row(r).array() - m)).exp();
    const double total = e.sum();
    softmax->row(r) = (e / total).matrix();
    out(r, 0) = std::log(total) - m;
  }
  return push(std::move(out), requires_grad(a), [a, softmax](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    t.grad_of(a.id).array() -= softmax->array().colwise() * g.col(0).array();
  });
}

Var Tape::time_diff(Var p) {
  const Matrix& v = value(p);
  const Index n = v.rows() - 1;
  Matrix out = v.bottomRows(n) - v.topRows(n);
  return push(std::move(out), requires_grad(p), [p, n](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    Matrix& dp = t.grad_of(p.id);
    dp.topRows(n) -= g;
    dp.bottomRows(n) += g;
  });
}

Var Tape::rownorm(Var a) {
  const Matrix& v = value(a);
  auto norms = std::make_shared<Vector>(v.rowwise().norm());
  Matrix out = *norms;
  return push(std::move(out), requires_grad(a), [a, norms](Tape& t, int self) {
    const Matrix& g = t.grad_of(self);
    Matrix& da = t.grad_of(a.id);
    const Matrix& v = t.value_of(a.id);
    for (Index r = 0; r < v.rows(); ++r) {
      const double n = (*norms)[r];
      if (n > 0.0) da.row(r) += (g(r, 0) / n) * v.row(r);
    }
  });
}

Var Tape::sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
    t.grad_of(a.id).array() += t.grad_of(self)(0, 0);
  });
}

Var Tape::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  Matrix out(1, 1);
  out(0, 0) = value(a).sum() / n;
  return push(std::move(out), requires_grad(a), [a, n](Tape& t, int self) {
    t.grad_of(a.id).array() += t.grad_of(self)(0, 0) / n;
  });
}

void Tape::backward(Var loss) {
  Node& top = node(loss);
  if (top.value.rows() != 1 || top.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1");
  if (!top.requires_grad)
    throw std::logic_error("backward: loss does not depend on any leaf");
  for (int id = 0; id <= loss.id; ++id) {
    Node& n = nodes_[id];
    if (n.requires_grad)
      n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.backprop) n.backprop(*this, id);
  }
}

}  // namespace tsproto
