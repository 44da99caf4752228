#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsproto/types.hpp"

namespace tsproto {

/** Settings of the finite-difference gradient check. */
struct GradCheckOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-3;   // largest accepted relative error
  double step = 1e-5;        // finite-difference step, scaled by |value|
  int coords_per_tensor = 2; // coordinates probed per parameter tensor
  int retries = 3;           // fresh configurations tried after a mismatch
  Index max_length = 40;     // T
  Index max_channels = 4;    // C
  int max_prototypes = 3;    // K
  int max_landmarks = 4;     // M
};

struct GradCheckReport {
  int trials = 0;
  int failures = 0;       // trials still mismatching after all retries
  int retried = 0;        // trials that hit a mismatch at least once
  long comparisons = 0;   // coordinate comparisons accepted
  double max_rel_error = 0.0;
  std::vector<std::string> messages;  // one line per failed trial

  bool pass() const { return trials > 0 && failures == 0; }
};

/**
 * Draws random small configurations and compares the reverse-mode gradients
 * of the full training loss (both the unsupervised and the supervised
 * variant) against central finite differences, for the prototypes, the
 * convolutional blocks, and the head. The loss has kinks (assignment
 * argmin, ReLU, interpolation cells), so a mismatching trial is retried
 * with a fresh configuration a bounded number of times before counting as
 * a failure.
 */
GradCheckReport grad_check(const GradCheckOptions& options);

}  // namespace tsproto
