#include "tsproto/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace tsproto {

double masked_mse(const Matrix& x, const Matrix& r, const Mask& m) {
  if (x.rows() != r.rows() || x.cols() != r.cols() || m.length() != x.rows())
    throw std::invalid_argument("masked_mse: shape mismatch");
  const double mass = m.weights.sum();
  if (!(mass > 0.0)) throw std::invalid_argument("masked_mse: mask has no weight");
  const Vector per_stamp = (x - r).rowwise().squaredNorm();
  return per_stamp.dot(m.weights) / (mass * static_cast<double>(x.cols()));
}

Matrix reconstruction_errors(const std::vector<Matrix>& series,
                             const std::vector<Mask>& masks,
                             const PrototypeBank& bank, const ParamBatch* params,
                             const StageFlags& stage, const WarpSolver& solver) {
  const Index N = static_cast<Index>(series.size());
  const int K = bank.size();
  if (masks.size() != series.size())
    throw std::invalid_argument("reconstruction_errors: mask count mismatch");
  const bool warp = stage.time_warp && params;
  const bool offset = stage.offset && params;
  Matrix errors(N, K);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < N; ++i) {
    for (int k = 0; k < K; ++k) {
      Matrix recon;
      if (warp) {
        const Vector shift = params->get(i, k).time_shift;
        recon = apply_time_warp(bank.prototypes[k], solver.positions(shift));
      } else {
        recon = bank.prototypes[k];
      }
      if (offset) recon = apply_offset(recon, params->get(i, k).offset);
      errors(i, k) = masked_mse(series[i], recon, masks[i]);
    }
  }
  return errors;
}

std::vector<int> argmin_rows(const Matrix& errors) {
  std::vector<int> out(errors.rows());
  for (Index i = 0; i < errors.rows(); ++i) {
    int best = 0;
    for (Index k = 1; k < errors.cols(); ++k)
      if (errors(i, k) < errors(i, best)) best = static_cast<int>(k);
    out[i] = best;
  }
  return out;
}

std::vector<int> nearest_prototype(const std::vector<Matrix>& series,
                                   const std::vector<Mask>& masks,
                                   const PrototypeBank& bank) {
  WarpSolver dummy(WarpConfig::uniform(bank.length(), 2));
  return argmin_rows(
      reconstruction_errors(series, masks, bank, nullptr, StageFlags{}, dummy));
}

double loss_rec_unsup(const Matrix& errors) {
  return errors.rowwise().minCoeff().mean();
}

double loss_rec_sup(const Matrix& errors, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != errors.rows())
    throw std::invalid_argument("loss_rec_sup: label count mismatch");
  double total = 0.0;
  for (Index i = 0; i < errors.rows(); ++i) {
    const int k = labels[i] - 1;
    if (k < 0 || k >= errors.cols())
      throw std::invalid_argument("loss_rec_sup: label out of range");
    total += errors(i, k);
  }
  return total / static_cast<double>(errors.rows());
}

double loss_tv(const PrototypeBank& bank) {
  const Index T = bank.length();
  const Index C = bank.channels();
  double total = 0.0;
  for (const Matrix& p : bank.prototypes) {
    const Index n = T - 1;
    total += (p.bottomRows(n) - p.topRows(n)).rowwise().norm().sum();
  }
  return total / (static_cast<double>(bank.size()) * static_cast<double>(T - 1) *
                  static_cast<double>(C));
}

double loss_contrastive(const Matrix& errors, const std::vector<int>& labels,
                        Index T, Index C, bool normalized) {
  if (static_cast<Index>(labels.size()) != errors.rows())
    throw std::invalid_argument("loss_contrastive: label count mismatch");
  const double scale = normalized ? 1.0 : static_cast<double>(T * C);
  double total = 0.0;
  for (Index i = 0; i < errors.rows(); ++i) {
    const int k = labels[i] - 1;
    if (k < 0 || k >= errors.cols())
      throw std::invalid_argument("loss_contrastive: label out of range");
    const RowVector d = errors.row(i) * scale;
    const double m = d.minCoeff();
    total += d[k] + std::log((-(d.array() - m)).exp().sum()) - m;
  }
  return total / static_cast<double>(errors.rows());
}

TapedLoss build_training_loss(Tape& tape, PredictorWeights& weights,
                              const EncoderVars& enc_vars,
                              const std::vector<Var>& proto_vars, Var x_batch,
                              const std::vector<const Mask*>& batch_masks,
                              const std::vector<int>* labels,
                              const HyperParams& hp, double tv_weight,
                              const StageFlags& stage, const WarpSolver& solver,
                              Index B, Index T, bool training) {
  const int K = static_cast<int>(proto_vars.size());
  const Index C = weights.channels;
  const int M = weights.landmarks;
  if (static_cast<Index>(batch_masks.size()) != B)
    throw std::invalid_argument("build_training_loss: mask count mismatch");

  // Per-row loss weights: mask weight normalized per sample, then 1/C.
  Vector row_weights(B * T);
  for (Index b = 0; b < B; ++b) {
    const Mask& m = *batch_masks[b];
    const double mass = m.weights.sum();
    if (!(mass > 0.0))
      throw std::invalid_argument("build_training_loss: mask has no weight");
    row_weights.segment(b * T, T) =
        m.weights / (mass * static_cast<double>(C));
  }

  const bool need_encoder = stage.time_warp || stage.offset;
  Var z;
  Var basis_t;  // M x T warp position basis
  Var grid_row;
  if (need_encoder) {
    z = encoder_forward(tape, weights, enc_vars, x_batch, B, T, training);
    if (stage.time_warp) {
      basis_t = tape.constant(solver.position_basis().transpose());
      Matrix grid(1, T);
      for (Index t = 0; t < T; ++t) grid(0, t) = static_cast<double>(t + 1);
      grid_row = tape.constant(std::move(grid));
    }
  }

  std::vector<Var> per_prototype;
  per_prototype.reserve(K);
  const Index stride = C + M;
  for (int k = 0; k < K; ++k) {
    Var recon;
    if (stage.time_warp) {
      Var shifts = tape.scale(tape.slice_cols(z, k * stride + C, M), weights.warp_scale);
      Var positions = tape.add_rowvec(tape.matmul(shifts, basis_t), grid_row);
      recon = tape.gather_rows(proto_vars[k], positions);
    } else {
      recon = tape.tile_rows(proto_vars[k], B);
    }
    if (stage.offset) {
      Var offsets = tape.slice_cols(z, k * stride, C);
      recon = tape.add_segment_rowvec(recon, offsets, B, T);
    }
    Var diff = tape.sub(x_batch, recon);
    per_prototype.push_back(
        tape.weighted_rowsum_segments(tape.cmul(diff, diff), row_weights, B, T));
  }
  Var errors = tape.concat_cols(per_prototype);

  TapedLoss result;
  std::vector<Index> label_cols;
  if (labels) {
    label_cols.resize(labels->size());
    for (std::size_t i = 0; i < labels->size(); ++i) {
      const int k = (*labels)[i] - 1;
      if (k < 0 || k >= K)
        throw std::invalid_argument("build_training_loss: label out of range");
      label_cols[i] = k;
    }
    result.rec = tape.mean(tape.select_cols(errors, label_cols));
  } else {
    result.rec = tape.mean(tape.min_cols(errors, &result.argmin));
  }

  Var tv_sum;
  for (int k = 0; k < K; ++k) {
    Var term = tape.sum(tape.rownorm(tape.time_diff(proto_vars[k])));
    tv_sum = (k == 0) ? term : tape.add(tv_sum, term);
  }
  result.tv = tape.scale(tv_sum, 1.0 / (static_cast<double>(K) *
                                        static_cast<double>(T - 1) *
                                        static_cast<double>(C)));

  result.total = tape.add(result.rec, tape.scale(result.tv, tv_weight));
  if (stage.contrastive) {
    if (!labels)
      throw std::invalid_argument("build_training_loss: contrastive needs labels");
    Var scaled = hp.cont_normalized
                     ? errors
                     : tape.scale(errors, static_cast<double>(T * C));
    Var positive = tape.select_cols(scaled, label_cols);
    Var lse = tape.logsumexp_neg_cols(scaled);
    result.cont = tape.mean(tape.add(positive, lse));
    result.total = tape.add(result.total, tape.scale(result.cont, hp.nu_cont));
  }
  return result;
}

}  // namespace tsproto
