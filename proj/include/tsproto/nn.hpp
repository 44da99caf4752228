#pragma once

#include <vector>

#include "tsproto/types.hpp"

namespace tsproto::nn {

/** Left padding of a stride-1 same convolution; window spans [t-pad, t-pad+k). */
constexpr Index conv_pad(int k) { return (k - 1) / 2; }

/**
 * Unfolds a batch of 1D sequences for convolution by matrix product.
 * `x` stacks B sequences of length T row-wise, one channel per column.
 * Output row b*T+t holds the k taps around stamp t, ordered tap-major
 * (column j*Cin + c), zero-padded at sequence borders.
 */
Matrix im2col(const Matrix& x, Index B, Index T, int k);

/** Adjoint of im2col: scatters column gradients back onto the sequences. */
void col2im_add(const Matrix& dcol, Index B, Index T, int k, Matrix& dx);

/** Per-feature batch statistics of the normalization layer. */
struct BatchNormStats {
  RowVector mean;
  RowVector inv_std;  // 1/sqrt(var + eps), biased variance
};

/**
 * Training-mode batch normalization over rows. Updates the running buffers
 * in place: run = momentum * run + (1 - momentum) * batch, with the
 * unbiased variance entering the running buffer.
 */
Matrix batchnorm_train(const Matrix& x, const RowVector& gamma,
                       const RowVector& beta, RowVector& run_mean,
                       RowVector& run_var, double momentum, double eps,
                       BatchNormStats* stats);

/** Inference-mode batch normalization with the running statistics. */
Matrix batchnorm_infer(const Matrix& x, const RowVector& gamma,
                       const RowVector& beta, const RowVector& run_mean,
                       const RowVector& run_var, double eps);

/** Mean over each sample's T rows: (B*T) x F -> B x F. */
Matrix segment_mean(const Matrix& x, Index B, Index T);

/** Row lookup indices of one fractional position set. */
struct GatherIndex {
  std::vector<Index> lo;          // base row per output row
  std::vector<double> frac;       // 0 => exact row copy; frac in [0,1)
  std::vector<unsigned char> interior;  // position in [1, T): slope P[lo+1]-P[lo]
};

/** Precomputes interpolation indices for 1-based positions clamped to [1, T]. */
GatherIndex make_gather_index(const Matrix& positions, Index T);

/**
 * Samples prototype rows at fractional positions. `positions` is B x T'
 * (1-based); the result stacks B blocks of T' rows. Integer positions copy
 * rows bit-exactly; positions are clamped to the grid.
 */
Matrix gather_rows(const Matrix& prototype, const GatherIndex& index);

}  // namespace tsproto::nn
