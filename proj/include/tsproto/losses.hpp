#pragma once

#include <vector>

#include "tsproto/core.hpp"
#include "tsproto/encoder.hpp"
#include "tsproto/tape.hpp"
#include "tsproto/warp.hpp"

namespace tsproto {

/** Which deformations (and loss terms) are active in a curriculum stage. */
struct StageFlags {
  bool time_warp = false;
  bool offset = false;
  bool contrastive = false;
};

/**
 * Mask-weighted reconstruction error:
 * (1/C) * sum_t (m[t] / sum m) * ||x[t] - r[t]||^2.
 * With an all-ones mask this is ||x - r||^2 / (T*C). Throws when the mask
 * has no weight.
 */
double masked_mse(const Matrix& x, const Matrix& r, const Mask& m);

/**
 * N x K matrix of masked reconstruction errors of every series against
 * every prototype. `params` supplies per-pair transforms; passing nullptr
 * (or disabling both stage flags) compares against the raw prototypes.
 */
Matrix reconstruction_errors(const std::vector<Matrix>& series,
                             const std::vector<Mask>& masks,
                             const PrototypeBank& bank, const ParamBatch* params,
                             const StageFlags& stage, const WarpSolver& solver);

/** Row-wise argmin with lowest-index ties: the assignment rule. */
std::vector<int> argmin_rows(const Matrix& errors);

/** Assignment of each series to its best raw prototype (no transforms). */
std::vector<int> nearest_prototype(const std::vector<Matrix>& series,
                                   const std::vector<Mask>& masks,
                                   const PrototypeBank& bank);

/** Mean over series of the best-prototype error. */
double loss_rec_unsup(const Matrix& errors);

/** Mean over series of the error against the true-class prototype. */
double loss_rec_sup(const Matrix& errors, const std::vector<int>& labels);

/**
 * Total variation of the bank: mean L2 norm (not squared) of consecutive
 * stamp differences, normalized by K * (T-1) * C.
 */
double loss_tv(const PrototypeBank& bank);

/**
 * Contrastive term: mean over series of d_y + log sum_k exp(-d_k), where
 * d_k is the reconstruction error scaled by T*C (or unscaled when
 * `normalized` is set).
 */
double loss_contrastive(const Matrix& errors, const std::vector<int>& labels,
                        Index T, Index C, bool normalized);

struct LossReport {
  double rec = 0.0;
  double tv = 0.0;
  double cont = 0.0;
  double total = 0.0;
};

/** Loss nodes of one training batch. */
struct TapedLoss {
  Var total;
  Var rec;
  Var tv;
  Var cont;  // invalid when the contrastive stage is off
  std::vector<Index> argmin;  // unsupervised assignment of the batch
};

/**
 * Builds the full training loss on the tape: encoder forward (when any
 * deformation is active), per-prototype reconstructions, the stage
 * reconstruction term, the total-variation term weighted by `tv_weight`,
 * and the contrastive term weighted by `hp.nu_cont` when active. `labels`
 * selects the supervised path; it holds 1-based classes.
 */
TapedLoss build_training_loss(Tape& tape, PredictorWeights& weights,
                              const EncoderVars& enc_vars,
                              const std::vector<Var>& proto_vars, Var x_batch,
                              const std::vector<const Mask*>& batch_masks,
                              const std::vector<int>* labels,
                              const HyperParams& hp, double tv_weight,
                              const StageFlags& stage, const WarpSolver& solver,
                              Index B, Index T, bool training);

}  // namespace tsproto
