#include "tsproto/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "tsproto/rng.hpp"

namespace tsproto {

void PredictorWeights::for_each_param(
    const std::function<void(const std::string&, Matrix&)>& fn) {
  for (int i = 0; i < 3; ++i) {
    const std::string tag = "block" + std::to_string(i + 1);
    fn(tag + ".w", blocks[i].w);
    fn(tag + ".b", blocks[i].b);
    fn(tag + ".gamma", blocks[i].gamma);
    fn(tag + ".beta", blocks[i].beta);
  }
  fn("head.w", head_w);
  fn("head.b", head_b);
}

void PredictorWeights::for_each_buffer(
    const std::function<void(const std::string&, RowVector&)>& fn) {
  for (int i = 0; i < 3; ++i) {
    const std::string tag = "block" + std::to_string(i + 1);
    fn(tag + ".run_mean", blocks[i].run_mean);
    fn(tag + ".run_var", blocks[i].run_var);
  }
}

PredictorWeights init_predictor(Index channels, int prototypes, int landmarks,
                                double warp_scale, const EncoderConfig& config,
                                std::uint64_t seed) {
  if (channels < 1 || prototypes < 1 || landmarks < 2)
    throw std::invalid_argument("init_predictor: bad dimensions");
  PredictorWeights weights;
  weights.config = config;
  weights.channels = channels;
  weights.prototypes = prototypes;
  weights.landmarks = landmarks;
  weights.warp_scale = warp_scale;

  Rng rng(seed);
  Index in = channels;
  for (int i = 0; i < 3; ++i) {
    ConvBlock& block = weights.blocks[i];
    const int k = config.kernels[i];
    const int f = config.filters[i];
    const double he = std::sqrt(2.0 / static_cast<double>(k * in));
    block.w.resize(k * in, f);
    for (Index r = 0; r < block.w.rows(); ++r)
      for (Index c = 0; c < block.w.cols(); ++c) block.w(r, c) = he * rng.normal();
    block.b = Matrix::Zero(1, f);
    block.gamma = Matrix::Ones(1, f);
    block.beta = Matrix::Zero(1, f);
    block.run_mean = RowVector::Zero(f);
    block.run_var = RowVector::Ones(f);
    in = f;
  }
  weights.head_w = Matrix::Zero(in, weights.head_dim());
  weights.head_b = Matrix::Zero(1, weights.head_dim());
  return weights;
}

TransformParams ParamBatch::get(Index i, int k) const {
  const Index base = static_cast<Index>(k) * (channels + landmarks);
  TransformParams params;
  params.offset = values.row(i).segment(base, channels).transpose();
  params.time_shift = values.row(i).segment(base + channels, landmarks).transpose();
  return params;
}

ParamBatch make_param_batch(const PredictorWeights& weights, Matrix squashed) {
  if (squashed.cols() != weights.head_dim())
    throw std::invalid_argument("make_param_batch: head width mismatch");
  ParamBatch batch;
  batch.prototypes = weights.prototypes;
  batch.channels = weights.channels;
  batch.landmarks = weights.landmarks;
  batch.values = std::move(squashed);
  const Index stride = weights.params_per_prototype();
  for (int k = 0; k < weights.prototypes; ++k)
    batch.values.middleCols(k * stride + weights.channels, weights.landmarks) *=
        weights.warp_scale;
  return batch;
}

ParamBatch predict_params(const PredictorWeights& weights, const Matrix& batch,
                          Index B, Index T) {
  if (batch.rows() != B * T || batch.cols() != weights.channels)
    throw std::invalid_argument("predict_params: batch shape mismatch");
  const EncoderConfig& cfg = weights.config;
  Matrix h = batch;
  for (int i = 0; i < 3; ++i) {
    const ConvBlock& block = weights.blocks[i];
    Matrix conv = nn::im2col(h, B, T, cfg.kernels[i]) * block.w;
    conv.rowwise() += RowVector(block.b.row(0));
    h = nn::batchnorm_infer(conv, block.gamma.row(0), block.beta.row(0),
                            block.run_mean, block.run_var, cfg.bn_eps)
            .cwiseMax(0.0);
  }
  Matrix pooled = nn::segment_mean(h, B, T);
  Matrix z = ((pooled * weights.head_w).rowwise() + RowVector(weights.head_b.row(0)))
                 .array()
                 .tanh();
  return make_param_batch(weights, std::move(z));
}

EncoderVars encoder_leaves(Tape& tape, const PredictorWeights& weights) {
  EncoderVars vars;
  for (int i = 0; i < 3; ++i) {
    vars.conv_w[i] = tape.leaf(weights.blocks[i].w);
    vars.conv_b[i] = tape.leaf(weights.blocks[i].b);
    vars.gamma[i] = tape.leaf(weights.blocks[i].gamma);
    vars.beta[i] = tape.leaf(weights.blocks[i].beta);
  }
  vars.head_w = tape.leaf(weights.head_w);
  vars.head_b = tape.leaf(weights.head_b);
  return vars;
}

Var encoder_forward(Tape& tape, PredictorWeights& weights, const EncoderVars& vars,
                    Var x, Index B, Index T, bool training) {
  const EncoderConfig& cfg = weights.config;
  Var h = x;
  for (int i = 0; i < 3; ++i) {
    Var conv = tape.conv1d(h, vars.conv_w[i], B, T, cfg.kernels[i]);
    conv = tape.add_rowvec(conv, vars.conv_b[i]);
    Var normed = tape.batchnorm(conv, vars.gamma[i], vars.beta[i],
                                weights.blocks[i].run_mean, weights.blocks[i].run_var,
                                training, cfg.bn_momentum, cfg.bn_eps);
    h = tape.relu(normed);
  }
  Var pooled = tape.segment_mean(h, B, T);
  Var logits = tape.add_rowvec(tape.matmul(pooled, vars.head_w), vars.head_b);
  return tape.tanh(logits);
}

}  // namespace tsproto
