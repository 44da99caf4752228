#pragma once

#include <vector>

#include "tsproto/types.hpp"

namespace tsproto {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/** First/second moment buffers, one pair per parameter tensor. */
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;

  void reset() {
    m.clear();
    v.clear();
    step = 0;
  }
};

/**
 * One bias-corrected update over a fixed parameter list. Buffers are
 * allocated on first use and must keep matching shapes afterwards. If any
 * gradient holds a non-finite value the whole step is skipped, a diagnostic
 * goes to stderr and the function returns false.
 */
bool adam_step(const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads, AdamState& state,
               double learning_rate, const AdamConfig& config = {});

}  // namespace tsproto
