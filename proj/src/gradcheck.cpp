#include "tsproto/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tsproto/losses.hpp"
#include "tsproto/rng.hpp"

namespace tsproto {

namespace {

// Central differences of a ~O(1) loss at step ~1e-5 carry rounding noise of
// order 1e-11; absolute differences below this floor are treated as matches.
constexpr double kNoiseFloor = 1e-7;

struct TrialSetup {
  Index T, C, B;
  int K, M;
  HyperParams hp;
  PrototypeBank bank;
  PredictorWeights weights;
  WarpConfig warp;
  Matrix x_batch;
  std::vector<Mask> masks;
  std::vector<int> labels;
};

TrialSetup draw_trial(const GradCheckOptions& opt, Rng& rng) {
  TrialSetup s;
  s.T = 8 + rng.uniform_int(opt.max_length - 7);
  s.C = 1 + rng.uniform_int(opt.max_channels);
  s.K = 1 + static_cast<int>(rng.uniform_int(opt.max_prototypes));
  s.M = 2 + static_cast<int>(rng.uniform_int(opt.max_landmarks - 1));
  s.B = 2 + rng.uniform_int(3);

  s.hp.prototypes = s.K;
  s.hp.landmarks = s.M;
  s.hp.lambda_tv = 0.5;
  s.hp.mu_tv = 0.5;
  s.hp.nu_cont = 0.1;
  s.hp.cont_normalized = rng.uniform() < 0.5;

  EncoderConfig enc;
  for (int i = 0; i < 3; ++i) {
    enc.filters[i] = 3 + static_cast<int>(rng.uniform_int(4));
    enc.kernels[i] = rng.uniform() < 0.5 ? 3 : 5;
  }
  s.weights = init_predictor(s.C, s.K, s.M, s.hp.warp_scale, enc, rng.next());

  // Move the head (zero-initialized) and the normalization parameters to a
  // generic point so their gradients are exercised away from symmetry.
  auto jitter = [&](Matrix& m, double scale) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) += scale * rng.normal();
  };
  jitter(s.weights.head_w, 0.1);
  jitter(s.weights.head_b, 0.1);
  for (ConvBlock& block : s.weights.blocks) {
    jitter(block.gamma, 0.1);
    jitter(block.beta, 0.1);
  }

  s.bank.prototypes.resize(s.K);
  for (Matrix& p : s.bank.prototypes) {
    p.resize(s.T, s.C);
    for (Index r = 0; r < s.T; ++r)
      for (Index c = 0; c < s.C; ++c) p(r, c) = rng.normal();
  }
  s.warp = WarpConfig::uniform(s.T, s.M);

  s.x_batch.resize(s.B * s.T, s.C);
  for (Index r = 0; r < s.x_batch.rows(); ++r)
    for (Index c = 0; c < s.C; ++c) s.x_batch(r, c) = rng.normal();

  s.masks.resize(s.B);
  for (Mask& m : s.masks) {
    m.weights.resize(s.T);
    for (Index t = 0; t < s.T; ++t)
      m.weights[t] = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.2, 1.0);
    m.weights[rng.uniform_int(s.T)] = 1.0;
    m.raw = false;
  }

  s.labels.resize(s.B);
  for (Index b = 0; b < s.B; ++b)
    s.labels[b] = 1 + static_cast<int>(rng.uniform_int(s.K));
  return s;
}

/** One full loss evaluation from scratch; `supervised` picks the variant. */
double eval_loss(TrialSetup& s, bool supervised, const WarpSolver& solver) {
  Tape tape;
  std::vector<Var> proto_vars(s.K);
  for (int k = 0; k < s.K; ++k) proto_vars[k] = tape.leaf(s.bank.prototypes[k]);
  EncoderVars enc_vars = encoder_leaves(tape, s.weights);
  Var x_var = tape.constant(s.x_batch);
  std::vector<const Mask*> mask_ptrs(s.B);
  for (Index b = 0; b < s.B; ++b) mask_ptrs[b] = &s.masks[b];
  StageFlags stage{true, true, supervised};
  const TapedLoss loss = build_training_loss(
      tape, s.weights, enc_vars, proto_vars, x_var, mask_ptrs,
      supervised ? &s.labels : nullptr, s.hp,
      supervised ? s.hp.mu_tv : s.hp.lambda_tv, stage, solver, s.B, s.T, true);
  return tape.value(loss.total)(0, 0);
}

struct CheckOutcome {
  bool ok = true;
  long comparisons = 0;
  double max_rel_error = 0.0;
  std::string message;
};

/** Compares reverse-mode and central-difference gradients of one variant. */
CheckOutcome check_variant(TrialSetup& s, bool supervised,
                           const GradCheckOptions& opt, Rng& rng) {
  const WarpSolver solver(s.warp);

  Tape tape;
  std::vector<Var> proto_vars(s.K);
  for (int k = 0; k < s.K; ++k) proto_vars[k] = tape.leaf(s.bank.prototypes[k]);
  EncoderVars enc_vars = encoder_leaves(tape, s.weights);
  Var x_var = tape.constant(s.x_batch);
  std::vector<const Mask*> mask_ptrs(s.B);
  for (Index b = 0; b < s.B; ++b) mask_ptrs[b] = &s.masks[b];
  StageFlags stage{true, true, supervised};
  const TapedLoss loss = build_training_loss(
      tape, s.weights, enc_vars, proto_vars, x_var, mask_ptrs,
      supervised ? &s.labels : nullptr, s.hp,
      supervised ? s.hp.mu_tv : s.hp.lambda_tv, stage, solver, s.B, s.T, true);
  tape.backward(loss.total);

  std::vector<std::string> names;
  std::vector<Matrix*> tensors;
  std::vector<Matrix> grads;
  for (int k = 0; k < s.K; ++k) {
    names.push_back("prototype" + std::to_string(k));
    tensors.push_back(&s.bank.prototypes[k]);
    grads.push_back(tape.grad(proto_vars[k]));
  }
  const std::vector<Var> enc_order = {
      enc_vars.conv_w[0], enc_vars.conv_b[0], enc_vars.gamma[0], enc_vars.beta[0],
      enc_vars.conv_w[1], enc_vars.conv_b[1], enc_vars.gamma[1], enc_vars.beta[1],
      enc_vars.conv_w[2], enc_vars.conv_b[2], enc_vars.gamma[2], enc_vars.beta[2],
      enc_vars.head_w,    enc_vars.head_b};
  std::size_t at = 0;
  s.weights.for_each_param([&](const std::string& name, Matrix& tensor) {
    names.push_back(name);
    tensors.push_back(&tensor);
    grads.push_back(tape.grad(enc_order[at++]));
  });

  CheckOutcome out;
  for (std::size_t idx = 0; idx < tensors.size(); ++idx) {
    Matrix& tensor = *tensors[idx];
    for (int probe = 0; probe < opt.coords_per_tensor; ++probe) {
      const Index r = rng.uniform_int(tensor.rows());
      const Index c = rng.uniform_int(tensor.cols());
      const double original = tensor(r, c);
      const double h = opt.step * std::max(1.0, std::abs(original));
      tensor(r, c) = original + h;
      const double up = eval_loss(s, supervised, solver);
      tensor(r, c) = original - h;
      const double down = eval_loss(s, supervised, solver);
      tensor(r, c) = original;

      const double fd = (up - down) / (2.0 * h);
      const double analytic = grads[idx](r, c);
      const double diff = std::abs(analytic - fd);
      const double scale = std::max(std::abs(analytic), std::abs(fd));
      const double rel = scale > 0.0 ? diff / scale : 0.0;
      // Differences below the finite-difference noise floor carry no signal
      // (e.g. a dead ReLU filter with an exactly zero analytic gradient).
      const bool match = diff <= kNoiseFloor || rel < opt.tolerance;
      if (!std::isfinite(diff) || !match) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%s %s(%ld,%ld): analytic %.6e vs fd %.6e (rel %.3e)",
                      supervised ? "sup" : "unsup", names[idx].c_str(),
                      static_cast<long>(r), static_cast<long>(c), analytic, fd,
                      rel);
        out.ok = false;
        out.message = buf;
        return out;
      }
      ++out.comparisons;
      if (diff > kNoiseFloor) out.max_rel_error = std::max(out.max_rel_error, rel);
    }
  }
  return out;
}

}  // namespace

GradCheckReport grad_check(const GradCheckOptions& opt) {
  Rng rng(opt.seed ^ 0x6a0dc4bb9d2f11e8ULL);
  GradCheckReport report;
  report.trials = opt.trials;

  for (int trial = 0; trial < opt.trials; ++trial) {
    bool passed = false;
    std::string last_message;
    for (int attempt = 0; attempt <= opt.retries && !passed; ++attempt) {
      if (attempt > 0 && attempt == 1) ++report.retried;
      TrialSetup setup = draw_trial(opt, rng);
      const CheckOutcome unsup = check_variant(setup, false, opt, rng);
      if (!unsup.ok) {
        last_message = unsup.message;
        continue;
      }
      const CheckOutcome sup = check_variant(setup, true, opt, rng);
      if (!sup.ok) {
        last_message = sup.message;
        continue;
      }
      report.comparisons += unsup.comparisons + sup.comparisons;
      report.max_rel_error = std::max(
          {report.max_rel_error, unsup.max_rel_error, sup.max_rel_error});
      passed = true;
    }
    if (!passed) {
      ++report.failures;
      report.messages.push_back("trial " + std::to_string(trial) + ": " +
                                last_message);
    }
  }
  return report;
}

}  // namespace tsproto
