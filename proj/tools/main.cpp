#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "tsproto/aggregate.hpp"
#include "tsproto/baselines.hpp"
#include "tsproto/dataset_io.hpp"
#include "tsproto/eval.hpp"
#include "tsproto/gradcheck.hpp"
#include "tsproto/preprocess.hpp"
#include "tsproto/synth.hpp"
#include "tsproto/train.hpp"

namespace fs = std::filesystem;
using namespace tsproto;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

Dataset load_dataset(const std::string& path) {
  Dataset data = read_dataset(path);
  const std::vector<std::string> violations = validate_dataset(data);
  if (!violations.empty()) {
    std::string msg = path + ": invalid dataset";
    for (std::size_t i = 0; i < violations.size() && i < 5; ++i)
      msg += "\n  " + violations[i];
    if (violations.size() > 5)
      msg += "\n  (" + std::to_string(violations.size() - 5) + " more)";
    throw std::runtime_error(msg);
  }
  return data;
}

fs::path prepare_out_dir(const std::string& out, const CLI::App* sub) {
  fs::path dir(out);
  fs::create_directories(dir);
  std::ofstream cfg(dir / "config_used.cfg");
  cfg << "# " << sub->get_name() << "\n" << sub->config_to_str(true, false);
  return dir;
}

/** One plot curve: x/y coordinates plus a stroke color. */
struct Polyline {
  std::vector<double> x;
  std::vector<double> y;
  std::string color;
};

const char* palette(int i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#17becf", "#e377c2"};
  return colors[i % 8];
}

/** Minimal SVG writer: raw polyline elements, data scaled into a fixed box. */
void write_svg(const fs::path& path, const std::vector<Polyline>& curves) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const Polyline& c : curves)
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (first) {
        xmin = xmax = c.x[i];
        ymin = ymax = c.y[i];
        first = false;
      }
      xmin = std::min(xmin, c.x[i]);
      xmax = std::max(xmax, c.x[i]);
      ymin = std::min(ymin, c.y[i]);
      ymax = std::max(ymax, c.y[i]);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double W = 960, H = 420, pad = 10;

  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W
      << " " << H << "\">\n";
  for (const Polyline& c : curves) {
    out << "  <polyline fill=\"none\" stroke=\"" << c.color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      const double px = pad + (c.x[i] - xmin) / (xmax - xmin) * (W - 2 * pad);
      const double py = H - pad - (c.y[i] - ymin) / (ymax - ymin) * (H - 2 * pad);
      out << (i ? " " : "") << px << "," << py;
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

void write_prototype_artifacts(const fs::path& dir, const PrototypeBank& bank) {
  std::ofstream csv(dir / "prototypes.csv");
  csv << "prototype,channel,t,value\n";
  std::vector<Polyline> curves;
  for (int k = 0; k < bank.size(); ++k) {
    const Matrix& p = bank.prototypes[k];
    for (Index c = 0; c < p.cols(); ++c) {
      Polyline line;
      line.color = palette(k);
      for (Index t = 0; t < p.rows(); ++t) {
        csv << k << "," << c << "," << t + 1 << "," << p(t, c) << "\n";
        line.x.push_back(static_cast<double>(t + 1));
        line.y.push_back(p(t, c));
      }
      curves.push_back(std::move(line));
    }
  }
  write_svg(dir / "prototypes.svg", curves);
}

void write_predictions(const fs::path& path, const Assignment& a,
                       const std::vector<int>* labels) {
  std::ofstream out(path);
  out << (labels ? "index,prototype,error,label\n" : "index,prototype,error\n");
  for (std::size_t i = 0; i < a.prototype.size(); ++i) {
    out << i << "," << a.prototype[i] << "," << a.error[i];
    if (labels) out << "," << (*labels)[i];
    out << "\n";
  }
}

void report_metrics(std::ostream& out, const std::vector<int>& pred,
                    const std::vector<int>& truth) {
  int num_classes = 0;
  for (int y : truth) num_classes = std::max(num_classes, y);
  for (int y : pred) num_classes = std::max(num_classes, y);
  out << "overall_accuracy " << overall_accuracy(pred, truth) << "\n";
  out << "mean_accuracy " << mean_accuracy(pred, truth, num_classes) << "\n";
  const IntMatrix cm = confusion_matrix(pred, truth, num_classes);
  out << "confusion (rows = truth)\n";
  for (Index r = 0; r < cm.rows(); ++r) {
    for (Index c = 0; c < cm.cols(); ++c) out << (c ? "," : "") << cm(r, c);
    out << "\n";
  }
}

long parameter_count(PredictorWeights& weights, const PrototypeBank& bank) {
  long n = 0;
  for (const Matrix& p : bank.prototypes) n += p.size();
  weights.for_each_param(
      [&](const std::string&, Matrix& tensor) { n += tensor.size(); });
  return n;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

struct PreprocessOpts {
  std::string input, out, gap_fill = "none", stats_from;
  double sigma = 7.0, cloud_threshold = 0.0;
  int window = 7, cloud_band = -1;
  bool normalize_flag = false, binary = false;
};

void add_preprocess(CLI::App& app, PreprocessOpts& o) {
  CLI::App* sub = app.add_subcommand(
      "preprocess", "Cloud screening, gap filling, and normalization");
  sub->set_config("--config");
  sub->add_option("--input", o.input, "Input dataset")->required();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--gap-fill", o.gap_fill, "Gap-fill method")
      ->check(CLI::IsMember({"none", "previous", "moving_average", "gaussian"}))
      ->capture_default_str();
  sub->add_option("--sigma", o.sigma, "Gaussian filter width (stamps)")
      ->capture_default_str();
  sub->add_option("--window", o.window, "Moving-average halfwidth (stamps)")
      ->capture_default_str();
  sub->add_flag("--normalize", o.normalize_flag,
                "Standardize channels with training statistics");
  sub->add_option("--stats-from", o.stats_from,
                  "Dataset supplying normalization statistics (default: input)");
  sub->add_option("--cloud-band", o.cloud_band,
                  "Channel screened for clouds (-1 disables)")
      ->capture_default_str();
  sub->add_option("--cloud-threshold", o.cloud_threshold,
                  "Mask stamps whose cloud band exceeds this")
      ->capture_default_str();
  sub->add_flag("--binary", o.binary, "Write the binary dataset format");
}

GapFill parse_gap_fill(const std::string& name) {
  if (name == "previous") return GapFill::previous;
  if (name == "moving_average") return GapFill::moving_average;
  if (name == "gaussian") return GapFill::gaussian;
  return GapFill::none;
}

void run_preprocess(const PreprocessOpts& o, const CLI::App* sub) {
  const fs::path dir = prepare_out_dir(o.out, sub);
  Dataset data = load_dataset(o.input);
  if (o.cloud_band >= 0)
    for (Index i = 0; i < data.size(); ++i)
      data.masks[i] = threshold_clouds(data.series[i], data.masks[i],
                                       o.cloud_band, o.cloud_threshold);
  PreprocessConfig cfg;
  cfg.gap_fill = parse_gap_fill(o.gap_fill);
  cfg.sigma = o.sigma;
  cfg.window_halfwidth = o.window;
  data = apply_gap_fill(data, cfg);
  if (o.normalize_flag) {
    const ChannelStats stats = compute_channel_stats(
        o.stats_from.empty() ? data : load_dataset(o.stats_from));
    data = normalize(data, stats);
  }
  const fs::path out_file = dir / (o.binary ? "preprocessed.bin" : "preprocessed.txt");
  if (o.binary)
    write_dataset_binary(data, out_file.string());
  else
    write_dataset(data, out_file.string());
  std::cout << "wrote " << out_file.string() << " (" << data.size()
            << " series, T=" << data.length() << ", C=" << data.channels()
            << ")\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
  SynthConfig cfg;
  std::string out;
  bool binary = false;
};

void add_synth(CLI::App& app, SynthOpts& o) {
  CLI::App* sub =
      app.add_subcommand("synth", "Generate the synthetic benchmark pair");
  sub->set_config("--config");
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--classes", o.cfg.k_true)->capture_default_str();
  sub->add_option("--train-count", o.cfg.n_train)->capture_default_str();
  sub->add_option("--test-count", o.cfg.n_test)->capture_default_str();
  sub->add_option("--length", o.cfg.length)->capture_default_str();
  sub->add_option("--channels", o.cfg.channels)->capture_default_str();
  sub->add_option("--shift-range", o.cfg.shift_range)->capture_default_str();
  sub->add_option("--offset-range", o.cfg.offset_range)->capture_default_str();
  sub->add_option("--noise-sd", o.cfg.noise_sd)->capture_default_str();
  sub->add_option("--missing-rate", o.cfg.missing_rate)->capture_default_str();
  sub->add_option("--test-shift-bias", o.cfg.test_shift_bias)
      ->capture_default_str();
  sub->add_option("--seed", o.cfg.seed)->capture_default_str();
  sub->add_flag("--binary", o.binary, "Write the binary dataset format");
}

void write_truth(const fs::path& path, const Dataset& data,
                 const std::vector<SampleTruth>& truth) {
  std::ofstream out(path);
  out << "index,label,shift_start,shift_end";
  const Index C = truth.empty() ? 0 : truth.front().offsets.size();
  for (Index c = 0; c < C; ++c) out << ",offset_" << c;
  out << "\n";
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out << i << "," << data.labels[i] << "," << truth[i].shift_start << ","
        << truth[i].shift_end;
    for (Index c = 0; c < C; ++c) out << "," << truth[i].offsets[c];
    out << "\n";
  }
}

void run_synth(const SynthOpts& o, const CLI::App* sub) {
  const fs::path dir = prepare_out_dir(o.out, sub);
  const SynthResult result = generate_synthetic(o.cfg);
  const char* ext = o.binary ? ".bin" : ".txt";
  auto write = [&](const Dataset& d, const std::string& stem) {
    const fs::path p = dir / (stem + ext);
    if (o.binary)
      write_dataset_binary(d, p.string());
    else
      write_dataset(d, p.string());
  };
  write(result.train, "train");
  write(result.test, "test");
  write_truth(dir / "train_truth.csv", result.train, result.train_truth);
  write_truth(dir / "test_truth.csv", result.test, result.test_truth);

  PrototypeBank templates;
  for (int k = 0; k < result.templates.classes(); ++k)
    templates.prototypes.push_back(result.templates.render(k));
  std::ofstream csv(dir / "templates.csv");
  csv << "class,channel,t,value\n";
  std::vector<Polyline> curves;
  for (int k = 0; k < templates.size(); ++k)
    for (Index c = 0; c < templates.prototypes[k].cols(); ++c) {
      Polyline line;
      line.color = palette(k);
      for (Index t = 0; t < templates.prototypes[k].rows(); ++t) {
        csv << k + 1 << "," << c << "," << t + 1 << ","
            << templates.prototypes[k](t, c) << "\n";
        line.x.push_back(static_cast<double>(t + 1));
        line.y.push_back(templates.prototypes[k](t, c));
      }
      curves.push_back(std::move(line));
    }
  write_svg(dir / "templates.svg", curves);
  std::cout << "wrote " << result.train.size() << " train / "
            << result.test.size() << " test series to " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// train / cluster / sweep-k (shared options)
// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string input, val_path, out, init;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
  HyperParams hp;
  std::vector<int> filters{128, 256, 128};
  std::vector<int> kernels{8, 5, 3};
  std::vector<int> k_list;  // sweep-k only
};

CLI::App* add_training_options(CLI::App& app, const std::string& name,
                               const std::string& help, TrainOpts& o,
                               bool supervised) {
  o.init = supervised ? "ncc" : "kmeans";
  CLI::App* sub = app.add_subcommand(name, help);
  sub->set_config("--config");
  sub->add_option("--input", o.input, "Training dataset")->required();
  sub->add_option("--val", o.val_path,
                  "Validation dataset (default: carved from input)");
  sub->add_option("--val-fraction", o.val_fraction,
                  "Validation share when carving from input")
      ->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--seed", o.seed)->capture_default_str();
  sub->add_option("--init", o.init, "Prototype initialization")
      ->check(CLI::IsMember({"kmeans", "ncc"}))
      ->capture_default_str();
  if (!supervised)
    sub->add_option("--k", o.hp.prototypes, "Number of prototypes")
        ->capture_default_str();
  sub->add_option("--landmarks", o.hp.landmarks,
                  "Warp landmarks (0 = one per 30 stamps)")
      ->capture_default_str();
  sub->add_option("--warp-scale", o.hp.warp_scale)->capture_default_str();
  sub->add_option("--lambda-tv", o.hp.lambda_tv)->capture_default_str();
  sub->add_option("--mu-tv", o.hp.mu_tv)->capture_default_str();
  sub->add_option("--nu-cont", o.hp.nu_cont)->capture_default_str();
  sub->add_option("--lr", o.hp.learning_rate)->capture_default_str();
  sub->add_option("--batch-size", o.hp.batch_size)->capture_default_str();
  sub->add_option("--val-interval", o.hp.validation_interval)
      ->capture_default_str();
  sub->add_option("--patience", o.hp.patience)->capture_default_str();
  sub->add_option("--max-steps-per-stage", o.hp.max_steps_per_stage)
      ->capture_default_str();
  sub->add_flag("--cont-normalized", o.hp.cont_normalized,
                "Divide contrastive distances by T*C");
  sub->add_option("--filters", o.filters, "Encoder filters")->expected(3);
  sub->add_option("--kernels", o.kernels, "Encoder kernel sizes")->expected(3);
  return sub;
}

EncoderConfig encoder_config(const TrainOpts& o) {
  EncoderConfig enc;
  for (int i = 0; i < 3; ++i) {
    enc.filters[i] = o.filters[i];
    enc.kernels[i] = o.kernels[i];
  }
  return enc;
}

void run_training(const TrainOpts& o, const CLI::App* sub, Mode mode) {
  const fs::path dir = prepare_out_dir(o.out, sub);
  const Dataset input = load_dataset(o.input);
  Dataset train_ds, val_ds;
  if (!o.val_path.empty()) {
    train_ds = input;
    val_ds = load_dataset(o.val_path);
  } else {
    DatasetSplit split = split_dataset(input, o.val_fraction, o.seed);
    train_ds = std::move(split.train);
    val_ds = std::move(split.val);
  }

  const InitMode init = o.init == "ncc" ? InitMode::ncc : InitMode::kmeans;
  TrainRun run = make_run(mode, o.hp, encoder_config(o), train_ds, init, o.seed);
  run.log_path = (dir / "train_log.csv").string();
  TrainRun trained = train_curriculum(run, train_ds, val_ds);

  save_checkpoint(trained, (dir / "model.ckpt").string());
  write_prototype_artifacts(dir, trained.bank);

  std::ofstream metrics(dir / "metrics.txt");
  metrics << "best_val_metric " << trained.curriculum.best_metric << "\n";
  for (const StageSummary& s : trained.curriculum.stage_summaries)
    metrics << "stage " << s.stage_index << " steps " << s.steps
            << " best_metric " << s.best_metric << "\n";
  if (mode == Mode::supervised) {
    const std::vector<int> pred = predict_labels(trained, val_ds);
    metrics << "validation metrics\n";
    report_metrics(metrics, pred, val_ds.labels);
  } else {
    const Assignment train_assign = assign(trained, train_ds);
    write_predictions(dir / "assignments.csv", train_assign, nullptr);
    metrics << "val_reconstruction " << trained.curriculum.best_metric << "\n";
    if (train_ds.labeled() && val_ds.labeled()) {
      const std::vector<int> map = label_clusters_majority(
          train_assign.prototype, train_ds.labels, trained.bank.size());
      const Assignment val_assign = assign(trained, val_ds);
      std::vector<int> pred(val_assign.prototype.size());
      for (std::size_t i = 0; i < pred.size(); ++i)
        pred[i] = map[val_assign.prototype[i]];
      metrics << "validation metrics (majority-labeled clusters)\n";
      report_metrics(metrics, pred, val_ds.labels);
    }
  }
  std::cout << "best validation metric " << trained.curriculum.best_metric
            << " after " << trained.curriculum.global_step << " steps; model in "
            << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictOpts {
  std::string model, input, out;
  bool raw_input = false;
};

void add_predict(CLI::App& app, PredictOpts& o) {
  CLI::App* sub = app.add_subcommand(
      "predict", "Assign series to the prototypes of a trained model");
  sub->set_config("--config");
  sub->add_option("--model", o.model, "Checkpoint path")->required();
  sub->add_option("--input", o.input, "Dataset to assign")->required();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_flag("--raw-input", o.raw_input,
                "Skip normalization even when the model carries statistics");
}

void run_predict(const PredictOpts& o, const CLI::App* sub) {
  const fs::path dir = prepare_out_dir(o.out, sub);
  const TrainRun run = load_checkpoint(o.model);
  Dataset data = load_dataset(o.input);
  if (run.stats && !o.raw_input) data = normalize(data, *run.stats);

  const Assignment a = assign(run, data);
  std::vector<int> pred;
  if (!run.class_ids.empty()) {
    pred.resize(a.prototype.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
      pred[i] = run.class_ids[a.prototype[i]];
  }
  write_predictions(dir / "predictions.csv", a, pred.empty() ? nullptr : &pred);

  if (data.labeled() && !pred.empty()) {
    std::ofstream metrics(dir / "metrics.txt");
    report_metrics(metrics, pred, data.labels);
    report_metrics(std::cout, pred, data.labels);
  } else {
    std::cout << "assigned " << data.size() << " series to "
              << run.bank.size() << " prototypes\n";
  }
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

struct BaselineOpts {
  std::string method, train, input, out;
  int k = 8, band = -1;
  std::uint64_t seed = 1;
};

void add_baseline(CLI::App& app, BaselineOpts& o) {
  CLI::App* sub =
      app.add_subcommand("baseline", "Reference classifiers and clustering");
  sub->set_config("--config");
  sub->add_option("--method", o.method, "Baseline method")
      ->check(CLI::IsMember({"ncc", "knn-euclid", "knn-dtw", "kmeans"}))
      ->required();
  sub->add_option("--train", o.train, "Training dataset")->required();
  sub->add_option("--input", o.input, "Dataset to predict")->required();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--k", o.k, "Clusters (kmeans)")->capture_default_str();
  sub->add_option("--band", o.band, "DTW band halfwidth (-1 = none)")
      ->capture_default_str();
  sub->add_option("--seed", o.seed)->capture_default_str();
}

void run_baseline(const BaselineOpts& o, const CLI::App* sub) {
  const fs::path dir = prepare_out_dir(o.out, sub);
  const Dataset train = load_dataset(o.train);
  const Dataset input = load_dataset(o.input);
  std::vector<int> pred;

  if (o.method == "ncc") {
    const CentroidModel model = ncc_fit(train);
    pred = ncc_predict(model, input);
    PrototypeBank bank;
    bank.prototypes = model.centroids;
    write_prototype_artifacts(dir, bank);
  } else if (o.method == "kmeans") {
    const KMeansResult km = kmeans(train, o.k, o.seed);
    PrototypeBank bank = km.bank;
    write_prototype_artifacts(dir, bank);
    std::ofstream hist(dir / "kmeans_objective.csv");
    hist << "iteration,objective\n";
    for (std::size_t i = 0; i < km.objective_history.size(); ++i)
      hist << i << "," << km.objective_history[i] << "\n";
    const std::vector<int> input_assign =
        nearest_prototype(input.series, input.masks, km.bank);
    if (train.labeled()) {
      const std::vector<int> map =
          label_clusters_majority(km.assignment, train.labels, o.k);
      pred.resize(input_assign.size());
      for (std::size_t i = 0; i < pred.size(); ++i)
        pred[i] = map[input_assign[i]];
    } else {
      std::ofstream out(dir / "predictions.csv");
      out << "index,cluster\n";
      for (std::size_t i = 0; i < input_assign.size(); ++i)
        out << i << "," << input_assign[i] << "\n";
      std::cout << "clustered " << input.size() << " series into " << o.k
                << " clusters (objective " << km.objective << ")\n";
      return;
    }
  } else {
    const Metric metric = o.method == "knn-dtw" ? Metric::dtw : Metric::euclidean;
    pred.resize(input.size());
    for (Index i = 0; i < input.size(); ++i)
      pred[i] =
          knn1_predict(train, input.series[i], input.masks[i], metric, o.band);
  }

  std::ofstream out(dir / "predictions.csv");
  out << "index,label\n";
  for (std::size_t i = 0; i < pred.size(); ++i) out << i << "," << pred[i] << "\n";
  if (input.labeled()) {
    std::ofstream metrics(dir / "metrics.txt");
    report_metrics(metrics, pred, input.labels);
    report_metrics(std::cout, pred, input.labels);
  }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
  std::string truth, pred, out;
};

void add_eval(CLI::App& app, EvalOpts& o) {
  CLI::App* sub = app.add_subcommand(
      "eval", "Score a prediction file against dataset labels");
  sub->set_config("--config");
  sub->add_option("--truth", o.truth, "Labeled dataset")->required();
  sub->add_option("--pred", o.pred,
                  "Predictions (CSV; last field per row is the label)")
      ->required();
  sub->add_option("--out", o.out, "Output directory (optional)");
}

std::vector<int> read_prediction_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.find_last_of(',');
    const std::string field =
        comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      labels.push_back(std::stoi(field));
    } catch (const std::exception&) {
      if (labels.empty()) continue;  // header row
      throw std::runtime_error(path + ": bad prediction line: " + line);
    }
  }
  return labels;
}

void run_eval(const EvalOpts& o, const CLI::App* sub) {
  const Dataset truth = load_dataset(o.truth);
  if (!truth.labeled()) throw std::runtime_error(o.truth + ": dataset has no labels");
  const std::vector<int> pred = read_prediction_labels(o.pred);
  if (static_cast<Index>(pred.size()) != truth.size())
    throw std::runtime_error("prediction count " + std::to_string(pred.size()) +
                             " does not match dataset size " +
                             std::to_string(truth.size()));
  report_metrics(std::cout, pred, truth.labels);
  if (!o.out.empty()) {
    const fs::path dir = prepare_out_dir(o.out, sub);
    std::ofstream metrics(dir / "metrics.txt");
    report_metrics(metrics, pred, truth.labels);
  }
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

struct AggregateOpts {
  std::string op, labels, instances, out;
  std::vector<std::string> frames;
  int window = 5;
  bool binary = false;
};

void add_aggregate(CLI::App& app, AggregateOpts& o) {
  CLI::App* sub = app.add_subcommand(
      "aggregate", "Spatial label aggregation over instance rasters");
  sub->set_config("--config");
  sub->add_option("--op", o.op, "Operation")
      ->check(CLI::IsMember({"vote", "window", "intersect", "filter"}))
      ->required();
  sub->add_option("--labels", o.labels, "Label raster (vote, window)");
  sub->add_option("--instances", o.instances, "Instance raster (vote)");
  sub->add_option("--frames", o.frames, "Instance rasters (intersect, filter)");
  sub->add_option("--window", o.window, "Window size (window)")
      ->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_flag("--binary", o.binary, "Write the binary raster format");
}

void run_aggregate(const AggregateOpts& o, const CLI::App* sub) {
  const fs::path dir = prepare_out_dir(o.out, sub);
  IntMatrix result;
  if (o.op == "vote") {
    if (o.labels.empty() || o.instances.empty())
      throw std::runtime_error("vote requires --labels and --instances");
    result = aggregate_instances(read_raster(o.labels), read_raster(o.instances));
  } else if (o.op == "window") {
    if (o.labels.empty()) throw std::runtime_error("window requires --labels");
    result = aggregate_sliding_window(read_raster(o.labels), o.window);
  } else {
    if (o.frames.size() < 2)
      throw std::runtime_error(o.op + " requires at least 2 --frames");
    std::vector<IntMatrix> frames;
    for (const std::string& f : o.frames) frames.push_back(read_raster(f));
    const IntMatrix fine = intersect_instance_maps(frames);
    result = o.op == "intersect" ? fine : filter_and_assign(fine, frames);
  }
  const fs::path out_file = dir / (o.binary ? "result.bin" : "result.txt");
  if (o.binary)
    write_raster_binary(result, out_file.string());
  else
    write_raster(result, out_file.string());
  std::cout << "wrote " << out_file.string() << " (" << result.rows() << "x"
            << result.cols() << ")\n";
}

// ---------------------------------------------------------------------------
// warp-demo
// ---------------------------------------------------------------------------

struct WarpDemoOpts {
  Index length = 60;
  std::vector<double> shifts{-7.0, 0.0, 7.0};
  double offset = 0.3;
  std::string out;
};

void add_warp_demo(CLI::App& app, WarpDemoOpts& o) {
  CLI::App* sub = app.add_subcommand(
      "warp-demo", "Visualize one landmark warp and channel offset");
  sub->set_config("--config");
  sub->add_option("--length", o.length, "Grid length")->capture_default_str();
  sub->add_option("--shifts", o.shifts, "Landmark shifts")->expected(-1);
  sub->add_option("--offset", o.offset, "Channel offset")->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->required();
}

void run_warp_demo(const WarpDemoOpts& o, const CLI::App* sub) {
  const fs::path dir = prepare_out_dir(o.out, sub);
  const int M = static_cast<int>(o.shifts.size());
  if (M < 2) throw std::runtime_error("warp-demo needs at least 2 shifts");
  const WarpConfig cfg = WarpConfig::uniform(o.length, M);
  Vector beta(M);
  for (int m = 0; m < M; ++m) beta[m] = o.shifts[m];
  const WarpSolver solver(cfg);
  const WarpFunction h = solver.fit(beta);

  std::ofstream warp_csv(dir / "warp.csv");
  warp_csv << "t,h,displacement\n";
  Polyline identity, warped_axis;
  identity.color = "#999999";
  warped_axis.color = palette(0);
  for (Index t = 1; t <= o.length; ++t) {
    const double ht = h(static_cast<double>(t));
    warp_csv << t << "," << ht << "," << ht - t << "\n";
    identity.x.push_back(t);
    identity.y.push_back(t);
    warped_axis.x.push_back(t);
    warped_axis.y.push_back(ht);
  }
  write_svg(dir / "warp.svg", {identity, warped_axis});

  // Demo curve: one smooth prototype, its warped version, and the offset.
  Matrix proto(o.length, 1);
  for (Index t = 0; t < o.length; ++t)
    proto(t, 0) = std::sin(4.0 * std::numbers::pi * static_cast<double>(t) /
                           static_cast<double>(o.length - 1));
  const Matrix warped = apply_time_warp(proto, solver.positions(beta));
  const Matrix shifted = apply_offset(warped, Vector::Constant(1, o.offset));
  std::ofstream demo_csv(dir / "demo.csv");
  demo_csv << "t,prototype,warped,warped_offset\n";
  Polyline p0, p1, p2;
  p0.color = palette(0);
  p1.color = palette(1);
  p2.color = palette(2);
  for (Index t = 0; t < o.length; ++t) {
    demo_csv << t + 1 << "," << proto(t, 0) << "," << warped(t, 0) << ","
             << shifted(t, 0) << "\n";
    p0.x.push_back(t + 1);
    p0.y.push_back(proto(t, 0));
    p1.x.push_back(t + 1);
    p1.y.push_back(warped(t, 0));
    p2.x.push_back(t + 1);
    p2.y.push_back(shifted(t, 0));
  }
  write_svg(dir / "demo.svg", {p0, p1, p2});

  std::cout << "h(1) = " << h(1.0) << ", h(" << o.length << ") = "
            << h(static_cast<double>(o.length)) << "\n";
  for (int m = 0; m < M; ++m)
    std::cout << "landmark " << cfg.landmarks[m] << ": shift " << beta[m]
              << ", h - t = " << h(cfg.landmarks[m]) - cfg.landmarks[m] << "\n";
}

// ---------------------------------------------------------------------------
// grad-check
// ---------------------------------------------------------------------------

struct GradCheckOpts {
  GradCheckOptions options;
  std::string out;
};

void add_grad_check(CLI::App& app, GradCheckOpts& o) {
  o.options.trials = 20;
  CLI::App* sub = app.add_subcommand(
      "grad-check", "Compare reverse-mode gradients with finite differences");
  sub->set_config("--config");
  sub->add_option("--trials", o.options.trials)->capture_default_str();
  sub->add_option("--seed", o.options.seed)->capture_default_str();
  sub->add_option("--tolerance", o.options.tolerance)->capture_default_str();
  sub->add_option("--out", o.out, "Output directory (optional)");
}

void run_grad_check(const GradCheckOpts& o, const CLI::App* sub) {
  const GradCheckReport report = grad_check(o.options);
  std::ostringstream text;
  text << "trials " << report.trials << "\n"
       << "comparisons " << report.comparisons << "\n"
       << "max_rel_error " << report.max_rel_error << "\n"
       << "retried " << report.retried << "\n"
       << "failures " << report.failures << "\n";
  for (const std::string& msg : report.messages) text << msg << "\n";
  std::cout << text.str();
  if (!o.out.empty()) {
    const fs::path dir = prepare_out_dir(o.out, sub);
    std::ofstream(dir / "gradcheck.txt") << text.str();
  }
  if (!report.pass()) throw std::runtime_error("gradient check failed");
}

// ---------------------------------------------------------------------------
// sweep-k
// ---------------------------------------------------------------------------

void run_sweep_k(const TrainOpts& o, const CLI::App* sub) {
  if (o.k_list.empty()) throw std::runtime_error("sweep-k requires --k-list");
  const fs::path dir = prepare_out_dir(o.out, sub);
  const Dataset input = load_dataset(o.input);
  if (!input.labeled())
    throw std::runtime_error("sweep-k needs labels to score cluster maps");
  DatasetSplit split = split_dataset(input, o.val_fraction, o.seed);

  std::ofstream csv(dir / "sweep.csv");
  csv << "k,parameters,val_reconstruction,val_mean_accuracy\n";
  std::cout << "k,parameters,val_reconstruction,val_mean_accuracy\n";
  for (int K : o.k_list) {
    HyperParams hp = o.hp;
    hp.prototypes = K;
    TrainRun run = make_run(Mode::unsupervised, hp, encoder_config(o),
                            split.train, InitMode::kmeans, o.seed);
    run.log_path = (dir / ("train_log_k" + std::to_string(K) + ".csv")).string();
    TrainRun trained = train_curriculum(run, split.train, split.val);

    const Assignment train_assign = assign(trained, split.train);
    const std::vector<int> map = label_clusters_majority(
        train_assign.prototype, split.train.labels, trained.bank.size());
    const Assignment val_assign = assign(trained, split.val);
    std::vector<int> pred(val_assign.prototype.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
      pred[i] = map[val_assign.prototype[i]];
    const double ma =
        mean_accuracy(pred, split.val.labels, input.num_classes());
    const long params = parameter_count(trained.weights, trained.bank);
    csv << K << "," << params << "," << trained.curriculum.best_metric << ","
        << ma << "\n";
    std::cout << K << "," << params << "," << trained.curriculum.best_metric
              << "," << ma << "\n";
  }
}

// CLI11 applies `set_config` files only on the root command, so subcommand
// config files are expanded into argv tokens before parsing.  File entries
// fill in only options that were not given explicitly, which keeps the
// documented precedence: command-line flags override file values.
std::vector<std::string> expand_config_file(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty()) return args;

  const auto given = [&args](const std::string& flag) {
    return std::any_of(
        args.begin(), args.end(), [&flag](const std::string& arg) {
          return arg == flag || arg.rfind(flag + "=", 0) == 0;
        });
  };

  for (const CLI::ConfigItem& item : CLI::ConfigTOML{}.from_file(path)) {
    if (!item.parents.empty())
      throw CLI::FileError(path + ": expected flat key=value lines, got '" +
                           item.fullname() + "'");
    const std::string flag = "--" + item.name;
    if (given(flag)) continue;
    if (item.inputs.size() == 1) {
      args.push_back(flag + "=" + item.inputs.front());
    } else {
      args.push_back(flag);
      args.insert(args.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformable-prototype time-series classification and clustering"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for linear algebra")
      ->capture_default_str();

  PreprocessOpts preprocess_opts;
  add_preprocess(app, preprocess_opts);
  SynthOpts synth_opts;
  add_synth(app, synth_opts);
  TrainOpts train_opts, cluster_opts, sweep_opts;
  add_training_options(app, "train",
                       "Supervised curriculum training (one prototype per class)",
                       train_opts, true);
  add_training_options(app, "cluster", "Unsupervised curriculum training",
                       cluster_opts, false);
  CLI::App* sweep_sub = add_training_options(
      app, "sweep-k", "Rerun unsupervised training over a list of K",
      sweep_opts, false);
  sweep_sub->add_option("--k-list", sweep_opts.k_list, "Prototype counts")
      ->expected(-1)
      ->required();
  PredictOpts predict_opts;
  add_predict(app, predict_opts);
  BaselineOpts baseline_opts;
  add_baseline(app, baseline_opts);
  EvalOpts eval_opts;
  add_eval(app, eval_opts);
  AggregateOpts aggregate_opts;
  add_aggregate(app, aggregate_opts);
  WarpDemoOpts warp_demo_opts;
  add_warp_demo(app, warp_demo_opts);
  GradCheckOpts grad_check_opts;
  add_grad_check(app, grad_check_opts);

  try {
    std::vector<std::string> args = expand_config_file(argc, argv);
    std::reverse(args.begin(), args.end());  // parse(vector) pops from the back
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (threads > 0) {
    Eigen::setNbThreads(threads);
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
  }

  try {
    for (const CLI::App* sub : app.get_subcommands()) {
      const std::string& name = sub->get_name();
      if (name == "preprocess") run_preprocess(preprocess_opts, sub);
      else if (name == "synth") run_synth(synth_opts, sub);
      else if (name == "train") run_training(train_opts, sub, Mode::supervised);
      else if (name == "cluster") run_training(cluster_opts, sub, Mode::unsupervised);
      else if (name == "sweep-k") run_sweep_k(sweep_opts, sub);
      else if (name == "predict") run_predict(predict_opts, sub);
      else if (name == "baseline") run_baseline(baseline_opts, sub);
      else if (name == "eval") run_eval(eval_opts, sub);
      else if (name == "aggregate") run_aggregate(aggregate_opts, sub);
      else if (name == "warp-demo") run_warp_demo(warp_demo_opts, sub);
      else if (name == "grad-check") run_grad_check(grad_check_opts, sub);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
