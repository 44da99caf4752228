#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>

#include "tsproto/tape.hpp"
#include "tsproto/types.hpp"
#include "tsproto/warp.hpp"

namespace tsproto {

/** Convolutional feature extractor layout: three conv-norm-relu blocks. */
struct EncoderConfig {
  std::array<int, 3> filters{128, 256, 128};
  std::array<int, 3> kernels{8, 5, 3};
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
};

/** One conv block: convolution weights plus its normalization layer. */
struct ConvBlock {
  Matrix w;        // (k * Cin) x F
  Matrix b;        // 1 x F
  Matrix gamma;    // 1 x F
  Matrix beta;     // 1 x F
  RowVector run_mean;  // F
  RowVector run_var;   // F
};

/**
 * Transform predictor: conv blocks, global average pooling over time, and a
 * linear head mapping features to K * (C + M) values squashed by tanh.
 * Block weights use He initialization; the head starts at zero so every
 * predicted transform is the identity at initialization.
 */
struct PredictorWeights {
  EncoderConfig config;
  Index channels = 0;   // C
  int prototypes = 0;   // K
  int landmarks = 0;    // M
  double warp_scale = 7.0;

  std::array<ConvBlock, 3> blocks;
  Matrix head_w;  // F3 x K*(C+M)
  Matrix head_b;  // 1 x K*(C+M)

  Index params_per_prototype() const { return channels + landmarks; }
  Index head_dim() const { return prototypes * params_per_prototype(); }

  /** Visits trainable tensors in a fixed order (the checkpoint order). */
  void for_each_param(const std::function<void(const std::string&, Matrix&)>& fn);
  /** Visits the normalization running buffers. */
  void for_each_buffer(const std::function<void(const std::string&, RowVector&)>& fn);
};

PredictorWeights init_predictor(Index channels, int prototypes, int landmarks,
                                double warp_scale, const EncoderConfig& config,
                                std::uint64_t seed);

/**
 * Transform parameters for a batch, one set per (series, prototype) pair.
 * Offsets lie in [-1, 1] and time shifts in [-warp_scale, warp_scale].
 */
struct ParamBatch {
  int prototypes = 0;
  Index channels = 0;
  int landmarks = 0;
  Matrix values;  // B x K*(C+M); per prototype: C offsets then M shifts

  Index batch() const { return values.rows(); }
  TransformParams get(Index i, int k) const;
};

/** Applies the tanh bounds and warp scaling to a raw head output. */
ParamBatch make_param_batch(const PredictorWeights& weights, Matrix squashed);

/**
 * Inference-mode prediction (running statistics, no gradients). `batch`
 * stacks B series of length T row-wise.
 */
ParamBatch predict_params(const PredictorWeights& weights, const Matrix& batch,
                          Index B, Index T);

/** Tape handles of every trainable tensor. */
struct EncoderVars {
  std::array<Var, 3> conv_w;
  std::array<Var, 3> conv_b;
  std::array<Var, 3> gamma;
  std::array<Var, 3> beta;
  Var head_w;
  Var head_b;
};

EncoderVars encoder_leaves(Tape& tape, const PredictorWeights& weights);

/**
 * Taped forward pass returning the squashed head output (B x K*(C+M),
 * before warp scaling). Training mode updates the running statistics stored
 * in `weights`.
 */
Var encoder_forward(Tape& tape, PredictorWeights& weights, const EncoderVars& vars,
                    Var x, Index B, Index T, bool training);

}  // namespace tsproto
