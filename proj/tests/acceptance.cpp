// Acceptance gate: one PASS/FAIL line per criterion, exit code 0 only when
// every criterion passes. Criteria can be run selectively by listing their
// numbers on the command line, e.g. `acceptance 3 10`.
//
// Tolerances are pinned next to each check. The trend criteria (6-9) average
// over five seeds; criteria 6 and 8 share one set of unsupervised runs.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tsproto/aggregate.hpp"
#include "tsproto/baselines.hpp"
#include "tsproto/core.hpp"
#include "tsproto/eval.hpp"
#include "tsproto/gradcheck.hpp"
#include "tsproto/losses.hpp"
#include "tsproto/preprocess.hpp"
#include "tsproto/rng.hpp"
#include "tsproto/synth.hpp"
#include "tsproto/train.hpp"
#include "tsproto/warp.hpp"

using namespace tsproto;

namespace {

// ---------------------------------------------------------------------------
// Framework

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

std::string fmt(const char* pattern, ...) {
  char buffer[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buffer, sizeof buffer, pattern, args);
  va_end(args);
  return buffer;
}

/** Percentage points. */
double pts(double fraction) { return 100.0 * fraction; }

// ---------------------------------------------------------------------------
// Settings of the synthetic trend benchmarks (criteria 6-9)

constexpr int kTrendSeeds = 5;

/** Unsupervised benchmark shared by criteria 6 and 8. */
struct UnsupConstants {
  int clusters = 4;
  double val_fraction = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 128;
  int validation_interval = 40;
  int patience = 3;
  int max_steps_per_stage = 400;
  std::array<int, 3> filters{16, 32, 16};
};
constexpr UnsupConstants kUnsup;

/** Supervised benchmark of criterion 7. */
struct SupConstants {
  double test_shift_bias = 4.0;
  double noise_sd = 0.15;
  double val_fraction = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 128;
  int validation_interval = 40;
  int patience = 3;
  int max_steps_per_stage = 400;
  std::array<int, 3> filters{16, 32, 16};
};
constexpr SupConstants kSup;

// ---------------------------------------------------------------------------
// Shared evaluation helpers

std::vector<int> apply_map(const std::vector<int>& assignment,
                           const std::vector<int>& map) {
  std::vector<int> pred(assignment.size());
  for (std::size_t i = 0; i < assignment.size(); ++i)
    pred[i] = map[assignment[i]];
  return pred;
}

/** Majority-map MA of a clustering on the test split (map built on train). */
double clustering_ma(const std::vector<int>& train_assign,
                     const std::vector<int>& test_assign, const Dataset& train,
                     const Dataset& test, int clusters) {
  const std::vector<int> map =
      label_clusters_majority(train_assign, train.labels, clusters);
  return mean_accuracy(apply_map(test_assign, map), test.labels,
                       train.num_classes());
}

// ---------------------------------------------------------------------------
// Criterion 1: analytic gradients match central finite differences

Outcome criterion_gradients() {
  const auto start = std::chrono::steady_clock::now();
  GradCheckOptions options;
  options.trials = 100;
  options.seed = 20260815;
  options.tolerance = 1e-3;  // pinned: relative error < 1e-3
  options.max_length = 40;
  options.max_channels = 4;
  options.max_prototypes = 3;
  options.max_landmarks = 4;
  const GradCheckReport report = grad_check(options);
  const double elapsed = seconds_since(start);
  const bool in_time = elapsed < 120.0;  // pinned: < 2 min
  return {report.pass() && in_time,
          fmt("%d configs, %ld comparisons, max rel err %.2e, %.0f s",
              report.trials, report.comparisons, report.max_rel_error, elapsed)};
}

// ---------------------------------------------------------------------------
// Criterion 2: zero-initialized heads predict the identity transform

Outcome criterion_identity_at_init() {
  SynthConfig cfg;
  cfg.k_true = 4;
  cfg.n_train = 240;
  cfg.n_test = 80;
  cfg.length = 60;
  cfg.channels = 2;
  cfg.seed = 11;
  const SynthResult synth = generate_synthetic(cfg);

  EncoderConfig encoder;
  encoder.filters = {8, 8, 8};
  encoder.kernels = {5, 3, 3};
  HyperParams hp;
  hp.prototypes = 4;

  // Unsupervised: reconstructions must equal the raw prototypes bit for bit,
  // and assignment under the full transform must equal the k-means result.
  TrainRun unsup =
      make_run(Mode::unsupervised, hp, encoder, synth.train, InitMode::kmeans, 5);
  unsup.stage = StageFlags{true, true, false};
  const WarpSolver solver(unsup.warp);
  const ParamBatch params = predict_params_dataset(unsup, synth.train);
  bool bit_identical = true;
  for (Index i = 0; i < synth.train.size() && bit_identical; ++i)
    for (int k = 0; k < hp.prototypes; ++k) {
      const Matrix& proto = unsup.bank.prototypes[k];
      const Matrix rec = reconstruct(proto, params.get(i, k), solver);
      if (std::memcmp(rec.data(), proto.data(),
                      sizeof(double) * proto.size()) != 0) {
        bit_identical = false;
        break;
      }
    }

  const KMeansResult km = kmeans(synth.train, hp.prototypes, 5);
  const bool kmeans_match = assign(unsup, synth.train).prototype == km.assignment;

  // Supervised: class predictions must equal the nearest-centroid classifier.
  TrainRun sup =
      make_run(Mode::supervised, hp, encoder, synth.train, InitMode::ncc, 5);
  sup.stage = StageFlags{true, true, true};
  const CentroidModel ncc = ncc_fit(synth.train);
  const bool ncc_match =
      predict_labels(sup, synth.test) == ncc_predict(ncc, synth.test);

  return {bit_identical && kmeans_match && ncc_match,
          fmt("reconstructions bit-identical %s, k-means match %s, NCC match %s",
              bit_identical ? "yes" : "NO", kmeans_match ? "yes" : "NO",
              ncc_match ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// Criterion 3: warp interpolation accuracy and kernel side conditions

Outcome criterion_spline() {
  Rng rng(77);
  double worst_landmark = 0.0;  // |h(t_m) - t_m - beta_m|
  double worst_sum = 0.0;       // |sum w|
  double worst_moment = 0.0;    // |sum w * t_m|
  double worst_affine = 0.0;    // max |w| for constant shifts
  for (int trial = 0; trial < 1000; ++trial) {
    const int M = 2 + static_cast<int>(rng.uniform_int(11));  // 2..12
    const Index T = M + rng.uniform_int(189);                 // M..M+188
    const WarpConfig config = WarpConfig::uniform(T, M);

    Vector beta(M);
    for (int m = 0; m < M; ++m) beta[m] = rng.uniform(-7.0, 7.0);
    const WarpFunction h = fit_warp(config, beta);
    for (int m = 0; m < M; ++m) {
      const double t_m = config.landmarks[m];
      worst_landmark = std::max(worst_landmark, std::abs(h(t_m) - t_m - beta[m]));
    }
    worst_sum = std::max(worst_sum, std::abs(h.w.sum()));
    worst_moment = std::max(worst_moment, std::abs(h.w.dot(h.landmarks)));

    const Vector constant = Vector::Constant(M, rng.uniform(-7.0, 7.0));
    const WarpFunction affine = fit_warp(config, constant);
    worst_affine = std::max(worst_affine, affine.w.cwiseAbs().maxCoeff());
  }
  const bool pass = worst_landmark < 1e-8 &&  // pinned
                    worst_sum < 1e-9 && worst_moment < 1e-9 &&
                    worst_affine < 1e-9;
  return {pass, fmt("landmark err %.1e, |sum w| %.1e, |sum w*t| %.1e, "
                    "affine |w| %.1e",
                    worst_landmark, worst_sum, worst_moment, worst_affine)};
}

// ---------------------------------------------------------------------------
// Criterion 4: the three-landmark demo stretches the endpoints; the offset
// demo raises every value by the offset

Outcome criterion_demo() {
  const Index T = 180;
  const WarpConfig config = WarpConfig::uniform(T, 3);
  Vector beta(3);
  beta << -7.0, 0.0, 7.0;
  const WarpFunction h = fit_warp(config, beta);
  const double left = std::abs(h(1.0) - (1.0 - 7.0));
  const double right = std::abs(h(static_cast<double>(T)) -
                                (static_cast<double>(T) + 7.0));

  SynthConfig cfg;
  cfg.seed = 4;
  const SynthTemplates templates = generate_synthetic(cfg).templates;
  const Matrix proto = templates.render(0);
  const Matrix shifted = apply_offset(proto, Vector::Constant(proto.cols(), 0.3));
  const double offset_err = ((shifted - proto).array() - 0.3).abs().maxCoeff();

  // The demo shift pattern is affine, so the fitted warp is exactly linear
  // and the endpoint displacements are pinned as exact.
  const bool pass = left == 0.0 && right == 0.0 && offset_err < 1e-9;
  return {pass, fmt("endpoint errs %.1e / %.1e, offset err %.1e", left, right,
                    offset_err)};
}

// ---------------------------------------------------------------------------
// Criterion 5: the masked loss never sees unobserved stamps

Outcome criterion_masked_loss() {
  Rng rng(99);
  const Index T = 60, C = 3;
  double worst_invariance = 0.0;
  double worst_plain = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x(T, C), reference(T, C);
    for (Index t = 0; t < T; ++t)
      for (Index c = 0; c < C; ++c) {
        x(t, c) = rng.normal();
        reference(t, c) = rng.normal();
      }
    Vector weights = Vector::Ones(T);
    for (Index t = 0; t < T; ++t)
      if (rng.uniform() < 0.3) weights[t] = 0.0;
    weights[0] = 1.0;  // keep at least one observation
    const Mask mask{weights};

    Matrix poisoned = x;
    for (Index t = 0; t < T; ++t)
      if (weights[t] == 0.0)
        for (Index c = 0; c < C; ++c) poisoned(t, c) += rng.uniform(-1e3, 1e3);

    // Direct invariance of the raw masked loss.
    worst_invariance = std::max(
        worst_invariance,
        std::abs(masked_mse(x, reference, mask) -
                 masked_mse(poisoned, reference, mask)));

    // Invariance through Gaussian re-filtering of the gapped series.
    const auto [fx, fm] = gaussian_filter(x, mask, 5.0);
    const auto [fp, fpm] = gaussian_filter(poisoned, mask, 5.0);
    worst_invariance = std::max(
        worst_invariance, std::abs(masked_mse(fx, reference, fm) -
                                   masked_mse(fp, reference, fpm)));

    // All-ones mask: the masked loss is the plain MSE over T*C entries.
    const Mask ones{Vector::Ones(T)};
    const double plain =
        (x - reference).squaredNorm() / static_cast<double>(T * C);
    worst_plain = std::max(
        worst_plain, std::abs(masked_mse(x, reference, ones) - plain));
  }
  const bool pass = worst_invariance < 1e-9 && worst_plain < 1e-9;  // pinned
  return {pass, fmt("poisoning drift %.1e, all-ones vs plain MSE %.1e",
                    worst_invariance, worst_plain)};
}

// ---------------------------------------------------------------------------
// Criterion 6: five unsupervised benchmark runs

struct UnsupSeedResult {
  double kmeans_ma = 0.0;
  double warp_ma = 0.0;   // after the time-warp stage
  double final_ma = 0.0;  // after the offset stage
  double warp_rec = 0.0;  // test reconstruction loss, warp stage
  double final_rec = 0.0; // test reconstruction loss, final model
};

struct UnsupBenchmark {
  std::vector<UnsupSeedResult> seeds;
  double elapsed = 0.0;
};

const UnsupBenchmark& unsup_benchmark() {
  static std::optional<UnsupBenchmark> cached;
  if (cached) return *cached;
  const auto start = std::chrono::steady_clock::now();

  UnsupBenchmark bench;
  for (int s = 1; s <= kTrendSeeds; ++s) {
    SynthConfig cfg;  // benchmark defaults: 4 classes, 4000/2000, 180x4
    cfg.seed = static_cast<std::uint64_t>(s);
    const SynthResult synth = generate_synthetic(cfg);
    const int K = kUnsup.clusters;
    UnsupSeedResult result;
    const DatasetSplit split =
        split_dataset(synth.train, kUnsup.val_fraction, cfg.seed);

    // Plain k-means baseline on the same training split and seed the model
    // initializes from, labeled through the train-side majority map.
    const KMeansResult km = kmeans(split.train, K, cfg.seed);
    const std::vector<int> km_train =
        nearest_prototype(synth.train.series, synth.train.masks, km.bank);
    const std::vector<int> km_test =
        nearest_prototype(synth.test.series, synth.test.masks, km.bank);
    result.kmeans_ma =
        clustering_ma(km_train, km_test, synth.train, synth.test, K);

    // Deformable-prototype clustering with the staged curriculum.
    HyperParams hp;
    hp.prototypes = K;
    hp.learning_rate = kUnsup.learning_rate;
    hp.batch_size = kUnsup.batch_size;
    hp.validation_interval = kUnsup.validation_interval;
    hp.patience = kUnsup.patience;
    hp.max_steps_per_stage = kUnsup.max_steps_per_stage;
    EncoderConfig encoder;
    encoder.filters = kUnsup.filters;
    TrainRun run = make_run(Mode::unsupervised, hp, encoder, split.train,
                            InitMode::kmeans, cfg.seed);
    std::vector<TrainRun> stage_best;
    const TrainRun final = train_curriculum(
        std::move(run), split.train, split.val,
        [&stage_best](const TrainRun& best) { stage_best.push_back(best); });

    const auto evaluate = [&](const TrainRun& model, double* ma, double* rec) {
      const Assignment train_assign = assign(model, synth.train);
      const Assignment test_assign = assign(model, synth.test);
      *ma = clustering_ma(train_assign.prototype, test_assign.prototype,
                          synth.train, synth.test, K);
      *rec = loss_rec_unsup(run_errors(model, synth.test));
    };
    evaluate(stage_best.at(1), &result.warp_ma, &result.warp_rec);
    evaluate(final, &result.final_ma, &result.final_rec);

    std::printf("    seed %d: kmeans %.1f, warp %.1f, final %.1f MA pts; "
                "rec %.4f -> %.4f\n",
                s, pts(result.kmeans_ma), pts(result.warp_ma),
                pts(result.final_ma), result.warp_rec, result.final_rec);
    std::fflush(stdout);
    bench.seeds.push_back(result);
  }
  bench.elapsed = seconds_since(start);
  cached = std::move(bench);
  return *cached;
}

double mean_of(const std::vector<UnsupSeedResult>& seeds,
               double UnsupSeedResult::*field) {
  double total = 0.0;
  for (const UnsupSeedResult& r : seeds) total += r.*field;
  return total / static_cast<double>(seeds.size());
}

Outcome criterion_unsup_trend() {
  const UnsupBenchmark& bench = unsup_benchmark();
  const double kmeans_ma = pts(mean_of(bench.seeds, &UnsupSeedResult::kmeans_ma));
  const double warp_ma = pts(mean_of(bench.seeds, &UnsupSeedResult::warp_ma));
  const double warp_rec = mean_of(bench.seeds, &UnsupSeedResult::warp_rec);
  const double final_rec = mean_of(bench.seeds, &UnsupSeedResult::final_rec);
  const double rec_drop = (warp_rec - final_rec) / warp_rec;

  const bool ma_gap = warp_ma >= kmeans_ma + 5.0;    // pinned: +5 points
  const bool rec_gain = rec_drop >= 0.10;            // pinned: >= 10% relative
  const bool in_time = bench.elapsed < 1800.0;       // pinned: < 30 min
  return {ma_gap && rec_gain && in_time,
          fmt("warp MA %.1f vs k-means %.1f pts, offset cuts rec %.0f%%, %.0f s",
              warp_ma, kmeans_ma, 100.0 * rec_drop, bench.elapsed)};
}

// ---------------------------------------------------------------------------
// Criterion 7: supervised benchmark under a shifted test distribution

struct SupSeedResult {
  double ncc_ma = 0.0;
  double offset_ma = 0.0;     // warp+offset stage model on the shifted test set
  double stage2_best = 0.0;   // best validation MA, offset stage
  double stage3_best = 0.0;   // best validation MA, contrastive stage
};

struct SupBenchmark {
  std::vector<SupSeedResult> seeds;
  double elapsed = 0.0;
};

const SupBenchmark& sup_benchmark() {
  static std::optional<SupBenchmark> cached;
  if (cached) return *cached;
  const auto start = std::chrono::steady_clock::now();

  SupBenchmark bench;
  for (int s = 1; s <= kTrendSeeds; ++s) {
    SynthConfig cfg;
    cfg.test_shift_bias = kSup.test_shift_bias;
    cfg.noise_sd = kSup.noise_sd;
    cfg.seed = static_cast<std::uint64_t>(s);
    const SynthResult synth = generate_synthetic(cfg);
    SupSeedResult result;

    const CentroidModel ncc = ncc_fit(synth.train);
    result.ncc_ma = mean_accuracy(ncc_predict(ncc, synth.test),
                                  synth.test.labels, synth.train.num_classes());

    HyperParams hp;
    hp.learning_rate = kSup.learning_rate;
    hp.batch_size = kSup.batch_size;
    hp.validation_interval = kSup.validation_interval;
    hp.patience = kSup.patience;
    hp.max_steps_per_stage = kSup.max_steps_per_stage;
    EncoderConfig encoder;
    encoder.filters = kSup.filters;
    const DatasetSplit split =
        split_dataset(synth.train, kSup.val_fraction, cfg.seed);
    TrainRun run = make_run(Mode::supervised, hp, encoder, split.train,
                            InitMode::ncc, cfg.seed);
    std::vector<TrainRun> stage_best;
    const TrainRun final = train_curriculum(
        std::move(run), split.train, split.val,
        [&stage_best](const TrainRun& best) { stage_best.push_back(best); });

    result.offset_ma =
        mean_accuracy(predict_labels(stage_best.at(2), synth.test),
                      synth.test.labels, synth.train.num_classes());
    result.stage2_best = final.curriculum.stage_summaries.at(2).best_metric;
    result.stage3_best = final.curriculum.stage_summaries.at(3).best_metric;

    std::printf("    seed %d: NCC %.1f, warp+offset %.1f MA pts; "
                "val MA %.2f -> %.2f with contrastive\n",
                s, pts(result.ncc_ma), pts(result.offset_ma),
                pts(result.stage2_best), pts(result.stage3_best));
    std::fflush(stdout);
    bench.seeds.push_back(result);
  }
  bench.elapsed = seconds_since(start);
  cached = std::move(bench);
  return *cached;
}

Outcome criterion_sup_trend() {
  const SupBenchmark& bench = sup_benchmark();
  double ncc = 0.0, offset = 0.0, contrastive_gain = 0.0;
  for (const SupSeedResult& r : bench.seeds) {
    ncc += pts(r.ncc_ma);
    offset += pts(r.offset_ma);
    contrastive_gain += pts(r.stage3_best) - pts(r.stage2_best);
  }
  const double n = static_cast<double>(bench.seeds.size());
  ncc /= n;
  offset /= n;
  contrastive_gain /= n;

  const bool ma_gap = offset >= ncc + 3.0;    // pinned: +3 points
  const bool cont_up = contrastive_gain > 0.0;  // pinned: strictly positive
  return {ma_gap && cont_up,
          fmt("warp+offset MA %.1f vs NCC %.1f pts, contrastive val gain "
              "%+.2f pts, %.0f s",
              offset, ncc, contrastive_gain, bench.elapsed)};
}

// ---------------------------------------------------------------------------
// Criterion 8: cluster labeling from a limited annotation budget
//
// The annotation-budget trend needs clusters with moderate impurity: pure
// clusters make every labeling map identical, and 50/50-merged clusters make
// any choice of label equally costly. High observation noise with more
// clusters than classes produces overlapping clusters whose majority label is
// reliable while the single sample closest to the centroid is not; taking
// the majority over the five closest samples restores the reliability.

Outcome criterion_limited_labels() {
  constexpr int kClusters = 16;
  double majority = 0.0, closest5 = 0.0, closest1 = 0.0;
  for (int s = 1; s <= kTrendSeeds; ++s) {
    SynthConfig cfg;
    cfg.noise_sd = 2.4;
    cfg.seed = static_cast<std::uint64_t>(s);
    const SynthResult synth = generate_synthetic(cfg);
    const int classes = synth.train.num_classes();

    const KMeansResult km = kmeans(synth.train, kClusters, cfg.seed);
    std::vector<double> errors(static_cast<std::size_t>(synth.train.size()));
    for (Index i = 0; i < synth.train.size(); ++i)
      errors[static_cast<std::size_t>(i)] =
          masked_mse(synth.train.series[static_cast<std::size_t>(i)],
                     km.bank.prototypes[static_cast<std::size_t>(
                         km.assignment[static_cast<std::size_t>(i)])],
                     synth.train.masks[static_cast<std::size_t>(i)]);
    const std::vector<int> test_assign =
        nearest_prototype(synth.test.series, synth.test.masks, km.bank);
    const auto map_ma = [&](const std::vector<int>& map) {
      return pts(mean_accuracy(apply_map(test_assign, map), synth.test.labels,
                               classes));
    };
    majority += map_ma(label_clusters_majority(km.assignment,
                                               synth.train.labels, kClusters));
    closest5 += map_ma(label_clusters_limited(km.assignment, errors,
                                              synth.train.labels, kClusters, 5,
                                              Selection::closest, cfg.seed));
    closest1 += map_ma(label_clusters_limited(km.assignment, errors,
                                              synth.train.labels, kClusters, 1,
                                              Selection::closest, cfg.seed));
  }
  const double n = static_cast<double>(kTrendSeeds);
  majority /= n;
  closest5 /= n;
  closest1 /= n;

  const bool five_close = closest5 >= majority - 2.0;  // pinned: within 2 points
  const bool one_degrades = majority - closest1 >= 2.0;  // pinned: >= 2 points
  return {five_close && one_degrades,
          fmt("majority %.1f, closest-5 %.1f, closest-1 %.1f MA pts", majority,
              closest5, closest1)};
}

// ---------------------------------------------------------------------------
// Criterion 9: gap filling helps the nearest-centroid classifier
//
// A scarce, noisy training set makes centroid quality the bottleneck: with
// half the stamps missing, per-stamp centroids from 8 samples per class are
// dominated by noise, and smoothing-based filling repairs them. Gap-fill
// variants fill the training side (centroid computation); "input filtering"
// additionally smooths the series being classified.

Outcome criterion_gap_fill() {
  double none_ma = 0.0, previous_ma = 0.0, gaussian_ma = 0.0;
  bool input_ok = true;
  double worst_input_drop = -1e9;
  for (int s = 1; s <= kTrendSeeds; ++s) {
    SynthConfig cfg;
    cfg.n_train = 32;
    cfg.noise_sd = 1.5;
    cfg.missing_rate = 0.5;
    cfg.seed = static_cast<std::uint64_t>(s);
    const SynthResult synth = generate_synthetic(cfg);

    const auto ncc_ma = [](const Dataset& train, const Dataset& test) {
      const CentroidModel model = ncc_fit(train);
      return mean_accuracy(ncc_predict(model, test), test.labels,
                           train.num_classes());
    };
    PreprocessConfig pre;
    pre.sigma = 3.0;
    pre.gap_fill = GapFill::previous;
    const Dataset train_previous = apply_gap_fill(synth.train, pre);
    pre.gap_fill = GapFill::gaussian;
    const Dataset train_gaussian = apply_gap_fill(synth.train, pre);
    const Dataset test_gaussian = apply_gap_fill(synth.test, pre);

    none_ma += pts(ncc_ma(synth.train, synth.test));
    previous_ma += pts(ncc_ma(train_previous, synth.test));
    const double gauss = pts(ncc_ma(train_gaussian, synth.test));
    const double gauss_input = pts(ncc_ma(train_gaussian, test_gaussian));
    gaussian_ma += gauss;
    worst_input_drop = std::max(worst_input_drop, gauss - gauss_input);
    input_ok = input_ok && (gauss_input >= gauss - 0.5);  // pinned: <= 0.5 pts
  }
  const double n = static_cast<double>(kTrendSeeds);
  none_ma /= n;
  previous_ma /= n;
  gaussian_ma /= n;

  const bool beats_none = gaussian_ma >= none_ma + 1.0;      // pinned: +1 point
  const bool beats_prev = gaussian_ma >= previous_ma + 1.0;  // pinned: +1 point
  return {beats_none && beats_prev && input_ok,
          fmt("gaussian %.1f vs none %.1f / previous %.1f MA pts, worst input "
              "filtering drop %.2f pts",
              gaussian_ma, none_ma, previous_ma, worst_input_drop)};
}

// ---------------------------------------------------------------------------
// Criterion 10: raster aggregation against exhaustive oracles

IntMatrix random_raster(Index h, Index w, int lo, int hi, Rng& rng) {
  IntMatrix m(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c)
      m(r, c) = lo + static_cast<int>(rng.uniform_int(hi - lo + 1));
  return m;
}

IntMatrix brute_aggregate(const IntMatrix& labels, const IntMatrix& instances) {
  std::map<int, std::map<int, int>> votes;
  for (Index r = 0; r < labels.rows(); ++r)
    for (Index c = 0; c < labels.cols(); ++c)
      if (instances(r, c) != 0 && labels(r, c) >= 0)
        ++votes[instances(r, c)][labels(r, c)];
  IntMatrix out = labels;
  for (Index r = 0; r < labels.rows(); ++r)
    for (Index c = 0; c < labels.cols(); ++c) {
      const int id = instances(r, c);
      if (id == 0 || labels(r, c) < 0 || votes[id].empty()) continue;
      int best = -1, best_count = 0;
      for (const auto& [label, count] : votes[id])
        if (count > best_count) {
          best = label;
          best_count = count;
        }
      out(r, c) = best;
    }
  return out;
}

IntMatrix brute_window(const IntMatrix& labels, int window) {
  const int hw = window / 2;
  IntMatrix out = labels;
  for (Index r = 0; r < labels.rows(); ++r)
    for (Index c = 0; c < labels.cols(); ++c) {
      std::map<int, int> votes;
      for (Index rr = std::max<Index>(0, r - hw);
           rr <= std::min<Index>(labels.rows() - 1, r + hw); ++rr)
        for (Index cc = std::max<Index>(0, c - hw);
             cc <= std::min<Index>(labels.cols() - 1, c + hw); ++cc)
          if (labels(rr, cc) >= 0) ++votes[labels(rr, cc)];
      int best = -1, best_count = 0;
      for (const auto& [label, count] : votes)
        if (count > best_count) {
          best = label;
          best_count = count;
        }
      out(r, c) = best;
    }
  return out;
}

/** Connected components of equal id tuples by min-label propagation. */
IntMatrix brute_intersect(const std::vector<IntMatrix>& frames) {
  const Index H = frames.front().rows();
  const Index W = frames.front().cols();
  const auto same_tuple = [&](Index r1, Index c1, Index r2, Index c2) {
    for (const IntMatrix& f : frames)
      if (f(r1, c1) != f(r2, c2)) return false;
    return true;
  };
  IntMatrix comp(H, W);
  for (Index r = 0; r < H; ++r)
    for (Index c = 0; c < W; ++c) comp(r, c) = static_cast<int>(r * W + c);
  for (Index pass = 0; pass < H * W; ++pass) {
    bool changed = false;
    for (Index r = 0; r < H; ++r)
      for (Index c = 0; c < W; ++c) {
        const Index nr[4] = {r - 1, r + 1, r, r};
        const Index nc[4] = {c, c, c - 1, c + 1};
        for (int d = 0; d < 4; ++d) {
          if (nr[d] < 0 || nr[d] >= H || nc[d] < 0 || nc[d] >= W) continue;
          if (!same_tuple(r, c, nr[d], nc[d])) continue;
          const int low = std::min(comp(r, c), comp(nr[d], nc[d]));
          if (comp(r, c) != low || comp(nr[d], nc[d]) != low) {
            comp(r, c) = comp(nr[d], nc[d]) = low;
            changed = true;
          }
        }
      }
    if (!changed) break;
  }
  std::map<int, int> renumber;
  IntMatrix out(H, W);
  for (Index r = 0; r < H; ++r)
    for (Index c = 0; c < W; ++c) {
      const auto [it, fresh] =
          renumber.emplace(comp(r, c), static_cast<int>(renumber.size()) + 1);
      out(r, c) = it->second;
      (void)fresh;
    }
  return out;
}

IntMatrix brute_filter_assign(const IntMatrix& fine,
                              const std::vector<IntMatrix>& frames) {
  const Index H = fine.rows();
  const Index W = fine.cols();
  std::set<int> alive;
  for (Index r = 1; r + 1 < H; ++r)
    for (Index c = 1; c + 1 < W; ++c) {
      bool solid = true;
      for (Index dr = -1; dr <= 1; ++dr)
        for (Index dc = -1; dc <= 1; ++dc)
          solid = solid && fine(r + dr, c + dc) == fine(r, c);
      if (solid) alive.insert(fine(r, c));
    }
  if (alive.empty()) return IntMatrix::Constant(H, W, 1);

  std::map<int, std::pair<Index, Index>> representative;
  for (Index r = 0; r < H; ++r)
    for (Index c = 0; c < W; ++c)
      representative.emplace(fine(r, c), std::make_pair(r, c));

  const auto hamming = [&](int a, int b) {
    int d = 0;
    const auto [ra, ca] = representative.at(a);
    const auto [rb, cb] = representative.at(b);
    for (const IntMatrix& f : frames)
      if (f(ra, ca) != f(rb, cb)) ++d;
    return d;
  };
  std::map<int, int> reassign;
  for (const auto& [id, pixel] : representative) {
    (void)pixel;
    if (alive.count(id)) {
      reassign[id] = id;
      continue;
    }
    int best_id = *alive.begin(), best_d = std::numeric_limits<int>::max();
    for (int candidate : alive)  // ascending: lowest id wins ties
      if (hamming(id, candidate) < best_d) {
        best_d = hamming(id, candidate);
        best_id = candidate;
      }
    reassign[id] = best_id;
  }
  IntMatrix out(H, W);
  for (Index r = 0; r < H; ++r)
    for (Index c = 0; c < W; ++c) out(r, c) = reassign.at(fine(r, c));
  return out;
}

Outcome criterion_aggregation() {
  int checks = 0, failures = 0;
  const auto expect = [&](bool ok) {
    ++checks;
    if (!ok) ++failures;
  };

  // Crafted votes: ties, all-void instances, id-0 pixels, void survivors.
  IntMatrix labels(6, 6), instances(6, 6);
  labels << 1, 1, 2, -1, 3, 3,
            1, 2, 2, -1, 3, -1,
            -1, -1, 2, 2, 0, 0,
            4, 4, -1, 2, 0, 1,
            4, -1, -1, -1, 1, 1,
            4, 4, 4, -1, 1, 2;
  instances << 1, 1, 1, 2, 3, 3,
               1, 1, 1, 2, 3, 3,
               2, 2, 1, 1, 0, 0,
               4, 4, 4, 1, 0, 5,
               4, 4, 4, 5, 5, 5,
               4, 4, 4, 5, 5, 5;
  expect(aggregate_instances(labels, instances) ==
         brute_aggregate(labels, instances));
  expect(aggregate_sliding_window(labels, 5) == brute_window(labels, 5));

  // Crafted frames: a solid region, an eroded strip, and a split block.
  IntMatrix frame_a(6, 6), frame_b(6, 6);
  frame_a << 1, 1, 1, 2, 3, 3,
             1, 1, 1, 2, 3, 3,
             1, 1, 1, 2, 3, 3,
             1, 1, 1, 2, 3, 3,
             1, 1, 1, 2, 3, 3,
             1, 1, 1, 2, 3, 3;
  frame_b << 1, 1, 1, 1, 1, 1,
             1, 1, 1, 1, 1, 1,
             1, 1, 1, 1, 1, 1,
             2, 2, 2, 2, 2, 2,
             2, 2, 2, 2, 2, 2,
             2, 2, 2, 2, 2, 2;
  const std::vector<IntMatrix> crafted = {frame_a, frame_b};
  expect(intersect_instance_maps(crafted) == brute_intersect(crafted));
  expect(filter_and_assign(brute_intersect(crafted), crafted) ==
         brute_filter_assign(brute_intersect(crafted), crafted));

  // Seeded 6x6 rasters exercise the same paths across random layouts.
  Rng rng(20260815);
  for (int trial = 0; trial < 25; ++trial) {
    const IntMatrix rl = random_raster(6, 6, -1, 3, rng);
    const IntMatrix ri = random_raster(6, 6, 0, 3, rng);
    expect(aggregate_instances(rl, ri) == brute_aggregate(rl, ri));
    expect(aggregate_sliding_window(rl, 5) == brute_window(rl, 5));

    const std::vector<IntMatrix> frames = {random_raster(6, 6, 1, 2, rng),
                                           random_raster(6, 6, 1, 2, rng)};
    const IntMatrix fine = intersect_instance_maps(frames);
    expect(fine == brute_intersect(frames));
    expect(filter_and_assign(fine, frames) == brute_filter_assign(fine, frames));
  }
  return {failures == 0, fmt("%d exact comparisons, %d failures", checks,
                             failures)};
}

// ---------------------------------------------------------------------------
// Criterion 11: accuracy metrics exact; k-means objective non-increasing

Outcome criterion_metrics() {
  Rng rng(123);
  int failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 2 + static_cast<int>(rng.uniform_int(5));
    const Index n = 30 + rng.uniform_int(200);
    // Leave the last class out of the truth every third trial.
    const int truth_lo = (trial % 3 == 0) ? K - 1 : K;
    std::vector<int> truth(n), pred(n);
    for (Index i = 0; i < n; ++i) {
      truth[i] = 1 + static_cast<int>(rng.uniform_int(truth_lo));
      pred[i] = 1 + static_cast<int>(rng.uniform_int(K));
    }

    long correct = 0;
    std::vector<long> per_total(K, 0), per_correct(K, 0);
    for (Index i = 0; i < n; ++i) {
      ++per_total[truth[i] - 1];
      if (pred[i] == truth[i]) {
        ++correct;
        ++per_correct[truth[i] - 1];
      }
    }
    const double brute_oa =
        static_cast<double>(correct) / static_cast<double>(n);
    double recall_sum = 0.0;
    int present = 0;
    for (int k = 0; k < K; ++k)
      if (per_total[k] > 0) {
        recall_sum += static_cast<double>(per_correct[k]) /
                      static_cast<double>(per_total[k]);
        ++present;
      }
    const double brute_ma = recall_sum / static_cast<double>(present);

    if (overall_accuracy(pred, truth) != brute_oa) ++failures;  // pinned: exact
    if (mean_accuracy(pred, truth, K) != brute_ma) ++failures;  // pinned: exact
  }

  bool monotone = true;
  for (int trial = 0; trial < 10; ++trial) {
    const Index N = 40 + rng.uniform_int(60);
    const int K = 2 + static_cast<int>(rng.uniform_int(3));
    Dataset data;
    for (Index i = 0; i < N; ++i) {
      Matrix x(20, 2);
      const double level = static_cast<double>(rng.uniform_int(K));
      for (Index t = 0; t < 20; ++t)
        for (Index c = 0; c < 2; ++c) x(t, c) = level + 0.5 * rng.normal();
      data.series.push_back(x);
      data.masks.push_back(Mask{Vector::Ones(20)});
    }
    const KMeansResult km = kmeans(data, K, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 1; i < km.objective_history.size(); ++i)
      monotone = monotone &&
                 km.objective_history[i] <=
                     km.objective_history[i - 1] +
                         1e-12 * std::max(1.0, km.objective_history[i - 1]);
  }
  return {failures == 0 && monotone,
          fmt("20 tallies, %d metric mismatches; objective monotone %s",
              failures, monotone ? "yes" : "NO")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Entry> entries = {
      {1, "analytic gradients match finite differences", criterion_gradients},
      {2, "identity transforms at initialization", criterion_identity_at_init},
      {3, "warp interpolation and side conditions", criterion_spline},
      {4, "landmark demo endpoints and offset demo", criterion_demo},
      {5, "masked loss ignores unobserved stamps", criterion_masked_loss},
      {6, "unsupervised: warping beats k-means, offset cuts reconstruction",
       criterion_unsup_trend},
      {7, "supervised: beats NCC under test-time shift; contrastive helps",
       criterion_sup_trend},
      {8, "limited annotation budgets label clusters", criterion_limited_labels},
      {9, "gap filling improves NCC on missing data", criterion_gap_fill},
      {10, "raster aggregation matches exhaustive oracles",
       criterion_aggregation},
      {11, "accuracy metrics exact; k-means objective monotone",
       criterion_metrics},
  };

  int ran = 0, passed = 0;
  for (const Entry& entry : entries) {
    if (!only.empty() && only.count(entry.id) == 0) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = entry.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    passed += outcome.pass ? 1 : 0;
    std::printf("[%2d] %s  %-62s (%6.1f s)  %s\n", entry.id,
                outcome.pass ? "PASS" : "FAIL", entry.name,
                seconds_since(start), outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %d/%d criteria passed\n", passed, ran);
  return passed == ran ? 0 : 1;
}
