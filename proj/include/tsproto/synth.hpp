#pragma once

#include <cstdint>
#include <vector>

#include "tsproto/core.hpp"

namespace tsproto {

/** Settings of the synthetic benchmark generator. */
struct SynthConfig {
  int k_true = 4;             // number of generating classes
  Index n_train = 4000;
  Index n_test = 2000;
  Index length = 180;         // T
  Index channels = 4;         // C
  double shift_range = 7.0;   // time-shift endpoints drawn within ± this, in stamps
  double offset_range = 0.3;  // per-channel offsets drawn within ± this
  double noise_sd = 0.05;
  double missing_rate = 0.0;  // independent per-stamp drop probability, in [0, 1)
  double test_shift_bias = 0.0;  // shifts the centre of the test-time shift law
  std::uint64_t seed = 0;
};

/** One sinusoid component: amplitude * sin(2*pi*cycles*u + phase), u in [0,1]. */
struct SinusoidParams {
  double amplitude;
  double cycles;
  double phase;
};

/**
 * Smooth class templates. Classes come in pairs that share two components per
 * channel and differ in a third, so classes are separable but confusable.
 */
struct SynthTemplates {
  // components[class][channel] = the sinusoids summed for that curve
  std::vector<std::vector<std::vector<SinusoidParams>>> components;
  Index length = 0;

  int classes() const { return static_cast<int>(components.size()); }

  /** Template value of class k, channel c at continuous grid position t in [1, T]. */
  double evaluate(int k, Index c, double t) const;

  /** Template of class k sampled on the integer grid, as a T x C matrix. */
  Matrix render(int k) const;
};

/** The hidden nuisance parameters of one generated sample. */
struct SampleTruth {
  double shift_start;  // time shift at the first stamp
  double shift_end;    // time shift at the last stamp
  Vector offsets;      // one additive offset per channel
};

/** A generated benchmark: labeled train/test pair plus the generating truth. */
struct SynthResult {
  Dataset train;
  Dataset test;
  SynthTemplates templates;
  std::vector<SampleTruth> train_truth;
  std::vector<SampleTruth> test_truth;
};

/**
 * Generates a labeled train/test pair. Each sample is its class template
 * evaluated at smoothly shifted times (the shift ramps linearly between two
 * endpoints drawn within ±shift_range), plus a per-channel offset, plus
 * Gaussian noise; stamps are dropped independently at missing_rate (values
 * zeroed, at least one stamp always kept). Labels cycle through the classes,
 * so both splits are balanced. Train and test use disjoint RNG streams;
 * test_shift_bias recentres the test shift law within the same support.
 * Deterministic given the config.
 */
SynthResult generate_synthetic(const SynthConfig& config);

}  // namespace tsproto
