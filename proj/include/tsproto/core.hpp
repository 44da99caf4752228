#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsproto/types.hpp"

namespace tsproto {

/**
 * Per-stamp observation weights of one series. Raw masks are binary
 * acquisition indicators; filtered masks carry real-valued confidence
 * weights produced by input filtering.
 */
struct Mask {
  Vector weights;
  bool raw = true;

  Index length() const { return weights.size(); }
  double total() const { return weights.sum(); }
};

enum class Split { train, val, test };

/** Per-channel first and second moments of the training split. */
struct ChannelStats {
  Vector mean;
  Vector stddev;

  Index channels() const { return mean.size(); }
};

/**
 * A set of multivariate series on a shared time grid. Series i is a T x C
 * matrix (rows = time stamps, columns = channels) with a mask of length T.
 * Labels, when present, are 1-based class ids.
 */
struct Dataset {
  std::vector<Matrix> series;
  std::vector<Mask> masks;
  std::vector<int> labels;
  Split split = Split::train;
  std::optional<ChannelStats> stats;

  Index size() const { return static_cast<Index>(series.size()); }
  Index length() const { return series.empty() ? 0 : series.front().rows(); }
  Index channels() const { return series.empty() ? 0 : series.front().cols(); }
  bool labeled() const { return !labels.empty(); }
  int num_classes() const;
};

/** K learnable prototype series, each T x C. */
struct PrototypeBank {
  std::vector<Matrix> prototypes;

  int size() const { return static_cast<int>(prototypes.size()); }
  Index length() const { return prototypes.empty() ? 0 : prototypes.front().rows(); }
  Index channels() const { return prototypes.empty() ? 0 : prototypes.front().cols(); }
};

/** Model and optimization settings with their default values. */
struct HyperParams {
  int prototypes = 32;            // K; supervised runs use the class count
  int landmarks = 0;              // M; 0 derives one landmark per 30 stamps
  double warp_scale = 7.0;        // largest admissible landmark shift, in stamps
  double lambda_tv = 1.0;         // total-variation weight, unsupervised
  double mu_tv = 1.0;             // total-variation weight, supervised
  double nu_cont = 0.01;          // contrastive weight
  double learning_rate = 1e-5;
  int batch_size = 2048;
  int validation_interval = 200;  // optimizer steps between validations
  int patience = 5;               // validations without improvement per stage
  int max_steps_per_stage = 0;    // 0 = unbounded
  bool cont_normalized = false;   // divide contrastive distances by T*C

  int landmarks_for(Index T) const;
};

/** Derives the landmark count from the grid length: one per 30 stamps, at least 2. */
int default_landmarks(Index T);

/**
 * Per-class prediction tallies. `correct` and `total` always equal the sums
 * of the per-class columns.
 */
struct ConfusionCounts {
  std::vector<long> per_class_correct;
  std::vector<long> per_class_total;
  long correct = 0;
  long total = 0;

  int num_classes() const { return static_cast<int>(per_class_total.size()); }
};

ConfusionCounts tally_predictions(const std::vector<int>& predicted,
                                  const std::vector<int>& truth,
                                  int num_classes);

/**
 * Checks structural consistency of a dataset and returns one message per
 * violation: shape mismatches, non-finite values, negative or non-binary raw
 * masks, all-zero masks, out-of-range labels. Empty result = valid.
 */
std::vector<std::string> validate_dataset(const Dataset& data);

/** A train/validation partition of one dataset. */
struct DatasetSplit {
  Dataset train;
  Dataset val;
};

/**
 * Carves a validation subset out of `data` by a seeded shuffle. `val_fraction`
 * is clamped so both parts keep at least one series; labels and stats carry
 * over. The split is deterministic in (data order, seed).
 */
DatasetSplit split_dataset(const Dataset& data, double val_fraction,
                           std::uint64_t seed);

}  // namespace tsproto
