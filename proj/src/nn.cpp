#include "tsproto/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace tsproto::nn {

Matrix im2col(const Matrix& x, Index B, Index T, int k) {
  const Index Cin = x.cols();
  if (x.rows() != B * T) throw std::invalid_argument("im2col: row count mismatch");
  const Index pad = conv_pad(k);
  Matrix out = Matrix::Zero(B * T, k * Cin);
  for (Index b = 0; b < B; ++b) {
    const Index base = b * T;
    for (int j = 0; j < k; ++j) {
      // Source stamp s = t + j - pad must stay inside this sequence.
      const Index t_lo = std::max<Index>(0, pad - j);
      const Index t_hi = std::min<Index>(T, T + pad - j);
      if (t_lo >= t_hi) continue;
      out.block(base + t_lo, j * Cin, t_hi - t_lo, Cin) =
          x.block(base + t_lo + j - pad, 0, t_hi - t_lo, Cin);
    }
  }
  return out;
}

void col2im_add(const Matrix& dcol, Index B, Index T, int k, Matrix& dx) {
  const Index Cin = dx.cols();
  if (dcol.rows() != B * T || dcol.cols() != k * Cin)
    throw std::invalid_argument("col2im_add: shape mismatch");
  const Index pad = conv_pad(k);
  for (Index b = 0; b < B; ++b) {
    const Index base = b * T;
    for (int j = 0; j < k; ++j) {
      const Index t_lo = std::max<Index>(0, pad - j);
      const Index t_hi = std::min<Index>(T, T + pad - j);
      if (t_lo >= t_hi) continue;
      dx.block(base + t_lo + j - pad, 0, t_hi - t_lo, Cin) +=
          dcol.block(base + t_lo, j * Cin, t_hi - t_lo, Cin);
    }
  }
}

Matrix batchnorm_train(const Matrix& x, const RowVector& gamma,
                       const RowVector& beta, RowVector& run_mean,
                       RowVector& run_var, double momentum, double eps,
                       BatchNormStats* stats) {
  const double n = static_cast<double>(x.rows());
  if (n < 2) throw std::invalid_argument("batchnorm_train: need at least 2 rows");
  RowVector mean = x.colwise().mean();
  RowVector var = (x.rowwise() - mean).array().square().colwise().mean();
  RowVector inv_std = (var.array() + eps).rsqrt();
  run_mean = momentum * run_mean + (1.0 - momentum) * mean;
  run_var = momentum * run_var + (1.0 - momentum) * (var * (n / (n - 1.0)));
  if (stats) {
    stats->mean = mean;
    stats->inv_std = inv_std;
  }
  Matrix xhat = (x.rowwise() - mean).array().rowwise() * inv_std.array();
  return (xhat.array().rowwise() * gamma.array()).rowwise() + beta.array();
}

Matrix batchnorm_infer(const Matrix& x, const RowVector& gamma,
                       const RowVector& beta, const RowVector& run_mean,
                       const RowVector& run_var, double eps) {
  RowVector inv_std = (run_var.array() + eps).rsqrt();
  Matrix xhat = (x.rowwise() - run_mean).array().rowwise() * inv_std.array();
  return (xhat.array().rowwise() * gamma.array()).rowwise() + beta.array();
}

Matrix segment_mean(const Matrix& x, Index B, Index T) {
  if (x.rows() != B * T) throw std::invalid_argument("segment_mean: row count mismatch");
  Matrix out(B, x.cols());
  for (Index b = 0; b < B; ++b) out.row(b) = x.middleRows(b * T, T).colwise().mean();
  return out;
}

GatherIndex make_gather_index(const Matrix& positions, Index T) {
  GatherIndex index;
  const Index n = positions.size();
  index.lo.resize(n);
  index.frac.resize(n);
  index.interior.resize(n);
  Index r = 0;
  for (Index b = 0; b < positions.rows(); ++b) {
    for (Index t = 0; t < positions.cols(); ++t, ++r) {
      const double q = positions(b, t);
      index.interior[r] = (q >= 1.0 && q < static_cast<double>(T)) ? 1 : 0;
      if (q <= 1.0) {
        index.lo[r] = 0;
        index.frac[r] = 0.0;
      } else if (q >= static_cast<double>(T)) {
        index.lo[r] = T - 1;
        index.frac[r] = 0.0;
      } else {
        const double floor_q = std::floor(q);
        index.lo[r] = static_cast<Index>(floor_q) - 1;
        index.frac[r] = q - floor_q;
      }
    }
  }
  return index;
}

Matrix gather_rows(const Matrix& prototype, const GatherIndex& index) {
  Matrix out(static_cast<Index>(index.lo.size()), prototype.cols());
  for (std::size_t r = 0; r < index.lo.size(); ++r) {
    const Index lo = index.lo[r];
    const double f = index.frac[r];
    if (f == 0.0)
      out.row(static_cast<Index>(r)) = prototype.row(lo);
    else
      out.row(static_cast<Index>(r)) =
          (1.0 - f) * prototype.row(lo) + f * prototype.row(lo + 1);
  }
  return out;
}

}  // namespace tsproto::nn
