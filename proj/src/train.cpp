#include "tsproto/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tsproto/adam.hpp"
#include "tsproto/baselines.hpp"
#include "tsproto/eval.hpp"
#include "tsproto/rng.hpp"

namespace tsproto {

KMeansResult kmeans(const Dataset& data, int K, std::uint64_t seed, int max_iters) {
  const Index N = data.size();
  if (N < K) throw std::invalid_argument("kmeans: fewer series than clusters");
  if (K < 1) throw std::invalid_argument("kmeans: K must be positive");

  Rng rng(seed);
  std::vector<Index> order(N);
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);

  KMeansResult result;
  result.bank.prototypes.reserve(K);
  for (int k = 0; k < K; ++k) result.bank.prototypes.push_back(data.series[order[k]]);

  std::vector<int> previous;
  for (int iter = 0; iter < max_iters; ++iter) {
    result.assignment = nearest_prototype(data.series, data.masks, result.bank);

    double objective = 0.0;
    for (Index i = 0; i < N; ++i)
      objective += masked_mse(data.series[i], result.bank.prototypes[result.assignment[i]],
                              data.masks[i]);
    result.objective = objective / static_cast<double>(N);
    result.objective_history.push_back(result.objective);
    if (result.assignment == previous) break;
    previous = result.assignment;

    std::vector<std::vector<Index>> members(K);
    for (Index i = 0; i < N; ++i) members[result.assignment[i]].push_back(i);
    int most_populated = 0;
    for (int k = 1; k < K; ++k)
      if (members[k].size() > members[most_populated].size()) most_populated = k;
    for (int k = 0; k < K; ++k) {
      if (!members[k].empty()) {
        result.bank.prototypes[k] =
            masked_centroid(data.series, data.masks, members[k]);
      } else {
        const Matrix& base = result.bank.prototypes[most_populated];
        Matrix noise(base.rows(), base.cols());
        for (Index r = 0; r < noise.rows(); ++r)
          for (Index c = 0; c < noise.cols(); ++c) noise(r, c) = rng.normal();
        const double magnitude = 1e-4 * base.norm();
        const double norm = noise.norm();
        if (norm > 0.0) noise *= magnitude / norm;
        result.bank.prototypes[k] = base + noise;
      }
    }
  }
  return result;
}

PrototypeBank init_prototypes(const Dataset& data, InitMode mode, int K,
                              std::uint64_t seed) {
  if (mode == InitMode::kmeans) return kmeans(data, K, seed).bank;
  if (!data.labeled())
    throw std::invalid_argument("init_prototypes: ncc mode requires labels");
  const CentroidModel model = ncc_fit(data);
  if (model.size() != K)
    throw std::invalid_argument("init_prototypes: K must equal the class count");
  PrototypeBank bank;
  bank.prototypes = model.centroids;
  return bank;
}

std::vector<StageFlags> stage_schedule(Mode mode) {
  std::vector<StageFlags> stages;
  stages.push_back(StageFlags{false, false, false});
  stages.push_back(StageFlags{true, false, false});
  stages.push_back(StageFlags{true, true, false});
  if (mode == Mode::supervised) stages.push_back(StageFlags{true, true, true});
  return stages;
}

TrainRun make_run(Mode mode, const HyperParams& hp, const EncoderConfig& encoder,
                  const Dataset& train, InitMode init, std::uint64_t seed) {
  TrainRun run;
  run.mode = mode;
  run.hp = hp;
  run.seed = seed;
  const Index T = train.length();
  const Index C = train.channels();
  int K = hp.prototypes;
  if (mode == Mode::supervised) {
    if (!train.labeled())
      throw std::invalid_argument("make_run: supervised mode requires labels");
    K = train.num_classes();
    run.class_ids.resize(K);
    for (int k = 0; k < K; ++k) run.class_ids[k] = k + 1;
  }
  run.hp.prototypes = K;
  const int M = hp.landmarks_for(T);
  run.hp.landmarks = M;
  run.bank = init_prototypes(train, init, K, seed);
  run.weights = init_predictor(C, K, M, hp.warp_scale, encoder, seed);
  run.warp = WarpConfig::uniform(T, M);
  run.stats = train.stats;
  return run;
}

ParamBatch predict_params_dataset(const TrainRun& run, const Dataset& data) {
  const Index N = data.size();
  const Index T = data.length();
  const Index C = data.channels();
  ParamBatch all;
  all.prototypes = run.weights.prototypes;
  all.channels = C;
  all.landmarks = run.weights.landmarks;
  all.values.resize(N, run.weights.head_dim());
  const Index chunk = std::max<Index>(1, run.hp.batch_size);
  for (Index start = 0; start < N; start += chunk) {
    const Index B = std::min<Index>(chunk, N - start);
    Matrix batch(B * T, C);
    for (Index b = 0; b < B; ++b)
      batch.middleRows(b * T, T) = data.series[start + b];
    all.values.middleRows(start, B) =
        predict_params(run.weights, batch, B, T).values;
  }
  return all;
}

Matrix run_errors(const TrainRun& run, const Dataset& data) {
  const WarpSolver solver(run.warp);
  if (run.stage.time_warp || run.stage.offset) {
    const ParamBatch params = predict_params_dataset(run, data);
    return reconstruction_errors(data.series, data.masks, run.bank, &params,
                                 run.stage, solver);
  }
  return reconstruction_errors(data.series, data.masks, run.bank, nullptr,
                               run.stage, solver);
}

Assignment assign(const TrainRun& run, const Dataset& data) {
  const Matrix errors = run_errors(run, data);
  Assignment result;
  result.prototype = argmin_rows(errors);
  result.error.resize(errors.rows());
  for (Index i = 0; i < errors.rows(); ++i)
    result.error[i] = errors(i, result.prototype[i]);
  return result;
}

std::vector<int> predict_labels(const TrainRun& run, const Dataset& data) {
  if (run.class_ids.empty())
    throw std::invalid_argument("predict_labels: run has no class mapping");
  const Assignment a = assign(run, data);
  std::vector<int> labels(a.prototype.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = run.class_ids[a.prototype[i]];
  return labels;
}

namespace {

/** Strict-improvement tracker; ties count as failures. */
struct PatienceGate {
  bool maximize;
  double best;
  int failures = 0;

  explicit PatienceGate(bool maximize_metric)
      : maximize(maximize_metric),
        best(maximize_metric ? -std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::infinity()) {}

  bool update(double metric) {
    const bool improved = maximize ? metric > best : metric < best;
    if (improved) {
      best = metric;
      failures = 0;
    } else {
      ++failures;
    }
    return improved;
  }
};

double validation_metric(const TrainRun& run, const Dataset& val,
                         const StageFlags& stage) {
  TrainRun probe = run;  // cheap: matrices are copied once per validation
  probe.stage = stage;
  if (run.mode == Mode::supervised) {
    const std::vector<int> pred = predict_labels(probe, val);
    return mean_accuracy(pred, val.labels, static_cast<int>(run.class_ids.size()));
  }
  return loss_rec_unsup(run_errors(probe, val));
}

void append_log(const std::string& path, const ValidationRecord& record,
                bool write_header) {
  if (path.empty()) return;
  std::FILE* out = std::fopen(path.c_str(), write_header ? "w" : "a");
  if (!out) return;
  if (write_header)
    std::fprintf(out, "step,stage,train_rec,train_tv,train_cont,train_total,"
                      "val_metric,improved\n");
  std::fprintf(out, "%ld,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n", record.step,
               record.stage, record.train_batch.rec, record.train_batch.tv,
               record.train_batch.cont, record.train_batch.total,
               record.val_metric, record.improved ? 1 : 0);
  std::fclose(out);
}

}  // namespace

TrainRun train_curriculum(TrainRun run, const Dataset& train, const Dataset& val,
                          const StageObserver& on_stage_end) {
  const Index N = train.size();
  const Index T = train.length();
  const Index C = train.channels();
  const int K = run.bank.size();
  if (N < 2) throw std::invalid_argument("train_curriculum: need at least 2 series");
  if (run.mode == Mode::supervised && !train.labeled())
    throw std::invalid_argument("train_curriculum: supervised mode requires labels");

  const WarpSolver solver(run.warp);
  const std::vector<StageFlags> stages = stage_schedule(run.mode);
  const bool maximize = run.mode == Mode::supervised;
  const Index batch_size = std::min<Index>(std::max(2, run.hp.batch_size), N);

  Rng rng(run.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order(N);
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);
  Index cursor = 0;

  AdamState adam;
  PatienceGate global(maximize);
  TrainRun best = run;
  LossReport last_batch;
  bool logged = false;

  for (int stage_index = run.curriculum.stage_index;
       stage_index < static_cast<int>(stages.size()); ++stage_index) {
    const StageFlags stage = stages[stage_index];
    run.stage = stage;
    run.curriculum.stage_index = stage_index;
    PatienceGate gate(maximize);
    long steps_in_stage = 0;
    bool stage_done = false;

    while (true) {
      // Validation (also at stage entry, establishing the stage baseline).
      const double metric = validation_metric(run, val, stage);
      const bool improved = gate.update(metric);
      run.curriculum.patience_counter = gate.failures;
      if (global.update(metric)) {
        run.curriculum.best_metric = metric;
        run.curriculum.has_best = true;
        best = run;
      }
      ValidationRecord record{run.curriculum.global_step, stage_index, last_batch,
                              metric, improved};
      run.curriculum.history.push_back(record);
      append_log(run.log_path, record, !logged);
      logged = true;
      stage_done = gate.failures >= run.hp.patience ||
                   (run.hp.max_steps_per_stage > 0 &&
                    steps_in_stage >= run.hp.max_steps_per_stage);
      if (stage_done) {
        run.curriculum.stage_summaries.push_back(
            StageSummary{stage_index, steps_in_stage, gate.best});
        if (on_stage_end)
          on_stage_end(run.curriculum.has_best ? best : run);
        break;
      }

      for (int step = 0; step < run.hp.validation_interval; ++step) {
        if (cursor + batch_size > N) {
          rng.shuffle(order);
          cursor = 0;
        }
        Matrix x_batch(batch_size * T, C);
        std::vector<const Mask*> batch_masks(batch_size);
        std::vector<int> batch_labels(batch_size);
        for (Index b = 0; b < batch_size; ++b) {
          const Index i = order[cursor + b];
          x_batch.middleRows(b * T, T) = train.series[i];
          batch_masks[b] = &train.masks[i];
          if (run.mode == Mode::supervised) batch_labels[b] = train.labels[i];
        }
        cursor += batch_size;

        Tape tape;
        std::vector<Var> proto_vars(K);
        for (int k = 0; k < K; ++k) proto_vars[k] = tape.leaf(run.bank.prototypes[k]);
        EncoderVars enc_vars = encoder_leaves(tape, run.weights);
        Var x_var = tape.constant(x_batch);
        const double tv_weight =
            run.mode == Mode::supervised ? run.hp.mu_tv : run.hp.lambda_tv;
        const TapedLoss loss = build_training_loss(
            tape, run.weights, enc_vars, proto_vars, x_var, batch_masks,
            run.mode == Mode::supervised ? &batch_labels : nullptr, run.hp,
            tv_weight, stage, solver, batch_size, T, true);

        last_batch.rec = tape.value(loss.rec)(0, 0);
        last_batch.tv = tape.value(loss.tv)(0, 0);
        last_batch.cont = loss.cont.valid() ? tape.value(loss.cont)(0, 0) : 0.0;
        last_batch.total = tape.value(loss.total)(0, 0);
        if (!std::isfinite(last_batch.total))
          throw std::runtime_error(
              "train_curriculum: loss diverged (non-finite) at step " +
              std::to_string(run.curriculum.global_step));

        tape.backward(loss.total);

        std::vector<Matrix*> params;
        std::vector<const Matrix*> grads;
        for (int k = 0; k < K; ++k) {
          params.push_back(&run.bank.prototypes[k]);
          grads.push_back(&tape.grad(proto_vars[k]));
        }
        std::vector<Var> enc_order = {enc_vars.conv_w[0], enc_vars.conv_b[0],
                                      enc_vars.gamma[0],  enc_vars.beta[0],
                                      enc_vars.conv_w[1], enc_vars.conv_b[1],
                                      enc_vars.gamma[1],  enc_vars.beta[1],
                                      enc_vars.conv_w[2], enc_vars.conv_b[2],
                                      enc_vars.gamma[2],  enc_vars.beta[2],
                                      enc_vars.head_w,    enc_vars.head_b};
        std::size_t at = 0;
        run.weights.for_each_param([&](const std::string&, Matrix& tensor) {
          params.push_back(&tensor);
          grads.push_back(&tape.grad(enc_order[at++]));
        });
        adam_step(params, grads, adam, run.hp.learning_rate);
        ++run.curriculum.global_step;
        ++steps_in_stage;
      }
    }
  }

  if (run.curriculum.has_best) {
    best.curriculum = run.curriculum;
    best.log_path = run.log_path;
    return best;
  }
  return run;
}

}  // namespace tsproto
