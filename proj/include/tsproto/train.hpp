#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsproto/core.hpp"
#include "tsproto/encoder.hpp"
#include "tsproto/losses.hpp"
#include "tsproto/warp.hpp"

namespace tsproto {

enum class Mode { unsupervised, supervised };
enum class InitMode { ncc, kmeans };

struct KMeansResult {
  PrototypeBank bank;
  std::vector<int> assignment;
  double objective = 0.0;
  std::vector<double> objective_history;  // one entry per Lloyd iteration
};

/**
 * Full-batch Lloyd iteration under the masked squared distance. Clusters
 * emptied by an assignment step restart as a small random perturbation
 * (relative magnitude 1e-4) of the most populated cluster's centroid. The
 * objective is non-increasing except across such restarts.
 */
KMeansResult kmeans(const Dataset& data, int K, std::uint64_t seed,
                    int max_iters = 100);

/**
 * Prototype initialization: per-class masked centroids (ncc; requires labels
 * and K = class count) or K-means centroids.
 */
PrototypeBank init_prototypes(const Dataset& data, InitMode mode, int K,
                              std::uint64_t seed);

/** One validation snapshot in the training log. */
struct ValidationRecord {
  long step = 0;
  int stage = 0;
  LossReport train_batch;  // losses of the last training batch
  double val_metric = 0.0;
  bool improved = false;
};

/** Per-stage outcome, recorded when the stage exhausts its patience. */
struct StageSummary {
  int stage_index = 0;
  long steps = 0;
  double best_metric = 0.0;  // best validation metric inside the stage
};

/** Progress through the stage schedule. */
struct CurriculumState {
  int stage_index = 0;
  double best_metric = 0.0;  // best validation metric over the whole run
  bool has_best = false;
  int patience_counter = 0;
  long global_step = 0;
  std::vector<ValidationRecord> history;
  std::vector<StageSummary> stage_summaries;
};

/** Model, optimization settings, and training progress of one experiment. */
struct TrainRun {
  Mode mode = Mode::unsupervised;
  HyperParams hp;
  PrototypeBank bank;
  PredictorWeights weights;
  WarpConfig warp;
  StageFlags stage;            // transforms active in the checkpointed state
  CurriculumState curriculum;
  std::vector<int> class_ids;  // supervised: class of each prototype
  std::optional<ChannelStats> stats;
  std::uint64_t seed = 1;
  std::string log_path;
};

/**
 * Builds an initialized run: prototypes from NCC or K-means, identity
 * transform predictor, uniform landmark grid. Supervised mode requires
 * labels and sets K to the class count.
 */
TrainRun make_run(Mode mode, const HyperParams& hp, const EncoderConfig& encoder,
                  const Dataset& train, InitMode init, std::uint64_t seed);

/** Observer invoked at each stage end with the best-on-validation run so far. */
using StageObserver = std::function<void(const TrainRun& best_so_far)>;

/**
 * Curriculum training: raw prototypes, then the time warp, then the channel
 * offset, and (supervised only) the contrastive term. A stage ends when its
 * validation metric (MA supervised, reconstruction loss unsupervised) fails
 * to improve `patience` consecutive validations; the returned run holds the
 * best-on-validation state. Throws on divergence (non-finite loss).
 */
TrainRun train_curriculum(TrainRun run, const Dataset& train, const Dataset& val,
                          const StageObserver& on_stage_end = {});

/** Stage schedule of a mode, in training order. */
std::vector<StageFlags> stage_schedule(Mode mode);

struct Assignment {
  std::vector<int> prototype;  // 0-based index
  std::vector<double> error;
};

/**
 * Nearest prototype (after the run's transforms) per series, lowest index
 * on ties, with the reached reconstruction error.
 */
Assignment assign(const TrainRun& run, const Dataset& data);

/** Full N x K reconstruction error table under the run's transforms. */
Matrix run_errors(const TrainRun& run, const Dataset& data);

/** Encoder inference over a whole dataset, chunked by hp.batch_size. */
ParamBatch predict_params_dataset(const TrainRun& run, const Dataset& data);

/** Supervised class predictions: class id of the assigned prototype. */
std::vector<int> predict_labels(const TrainRun& run, const Dataset& data);

void save_checkpoint(const TrainRun& run, const std::string& path);
TrainRun load_checkpoint(const std::string& path);

}  // namespace tsproto
