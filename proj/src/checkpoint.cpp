#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsproto/train.hpp"

namespace tsproto {

namespace {

using nlohmann::json;

void write_blob(std::ostream& out, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
}

void read_blob(std::istream& in, Matrix& m, const std::string& path) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      double v;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof(double)))
        throw std::runtime_error(path + ": truncated checkpoint tensor");
      m(r, c) = v;
    }
}

}  // namespace

void save_checkpoint(const TrainRun& run, const std::string& path) {
  std::vector<std::pair<std::string, const Matrix*>> tensors;
  std::vector<Matrix> owned;  // row-vector buffers and stats lifted to matrices
  owned.reserve(16);

  for (int k = 0; k < run.bank.size(); ++k)
    tensors.emplace_back("prototype" + std::to_string(k), &run.bank.prototypes[k]);
  auto& weights = const_cast<PredictorWeights&>(run.weights);
  weights.for_each_param([&](const std::string& name, Matrix& tensor) {
    tensors.emplace_back(name, &tensor);
  });
  weights.for_each_buffer([&](const std::string& name, RowVector& buffer) {
    owned.emplace_back(buffer);
    tensors.emplace_back(name, &owned.back());
  });
  if (run.stats) {
    owned.emplace_back(run.stats->mean);
    tensors.emplace_back("stats.mean", &owned.back());
    owned.emplace_back(run.stats->stddev);
    tensors.emplace_back("stats.stddev", &owned.back());
  }

  json manifest;
  manifest["format"] = "tsproto";
  manifest["version"] = 1;
  manifest["mode"] = run.mode == Mode::supervised ? "supervised" : "unsupervised";
  manifest["T"] = run.warp.T;
  manifest["C"] = run.weights.channels;
  manifest["K"] = run.bank.size();
  manifest["M"] = run.weights.landmarks;
  manifest["warp_scale"] = run.weights.warp_scale;
  manifest["stage"] = {{"time_warp", run.stage.time_warp},
                       {"offset", run.stage.offset},
                       {"contrastive", run.stage.contrastive}};
  manifest["stage_index"] = run.curriculum.stage_index;
  manifest["global_step"] = run.curriculum.global_step;
  manifest["best_metric"] = run.curriculum.best_metric;
  manifest["has_best"] = run.curriculum.has_best;
  manifest["seed"] = run.seed;
  manifest["class_ids"] = run.class_ids;
  manifest["landmarks"] = std::vector<double>(
      run.warp.landmarks.data(), run.warp.landmarks.data() + run.warp.landmarks.size());
  manifest["hyper"] = {{"prototypes", run.hp.prototypes},
                       {"landmarks", run.hp.landmarks},
                       {"warp_scale", run.hp.warp_scale},
                       {"lambda_tv", run.hp.lambda_tv},
                       {"mu_tv", run.hp.mu_tv},
                       {"nu_cont", run.hp.nu_cont},
                       {"learning_rate", run.hp.learning_rate},
                       {"batch_size", run.hp.batch_size},
                       {"validation_interval", run.hp.validation_interval},
                       {"patience", run.hp.patience},
                       {"max_steps_per_stage", run.hp.max_steps_per_stage},
                       {"cont_normalized", run.hp.cont_normalized}};
  manifest["encoder"] = {{"filters", run.weights.config.filters},
                         {"kernels", run.weights.config.kernels},
                         {"bn_momentum", run.weights.config.bn_momentum},
                         {"bn_eps", run.weights.config.bn_eps}};
  manifest["has_stats"] = run.stats.has_value();
  json tensor_list = json::array();
  for (const auto& [name, tensor] : tensors)
    tensor_list.push_back(
        {{"name", name}, {"rows", tensor->rows()}, {"cols", tensor->cols()}});
  manifest["tensors"] = tensor_list;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << manifest.dump() << "\n";
  for (const auto& [name, tensor] : tensors) write_blob(out, *tensor);
  if (!out) throw std::runtime_error(path + ": write failed");
}

TrainRun load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing manifest");
  json manifest;
  try {
    manifest = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": bad manifest: " + e.what());
  }
  if (manifest.value("format", "") != "tsproto")
    throw std::runtime_error(path + ": not a checkpoint file");

  TrainRun run;
  run.mode = manifest.at("mode") == "supervised" ? Mode::supervised
                                                 : Mode::unsupervised;
  const Index T = manifest.at("T");
  const Index C = manifest.at("C");
  const int K = manifest.at("K");
  const int M = manifest.at("M");
  run.stage.time_warp = manifest.at("stage").at("time_warp");
  run.stage.offset = manifest.at("stage").at("offset");
  run.stage.contrastive = manifest.at("stage").at("contrastive");
  run.curriculum.stage_index = manifest.at("stage_index");
  run.curriculum.global_step = manifest.at("global_step");
  run.curriculum.best_metric = manifest.at("best_metric");
  run.curriculum.has_best = manifest.at("has_best");
  run.seed = manifest.at("seed");
  run.class_ids = manifest.at("class_ids").get<std::vector<int>>();

  const json& hyper = manifest.at("hyper");
  run.hp.prototypes = hyper.at("prototypes");
  run.hp.landmarks = hyper.at("landmarks");
  run.hp.warp_scale = hyper.at("warp_scale");
  run.hp.lambda_tv = hyper.at("lambda_tv");
  run.hp.mu_tv = hyper.at("mu_tv");
  run.hp.nu_cont = hyper.at("nu_cont");
  run.hp.learning_rate = hyper.at("learning_rate");
  run.hp.batch_size = hyper.at("batch_size");
  run.hp.validation_interval = hyper.at("validation_interval");
  run.hp.patience = hyper.at("patience");
  run.hp.max_steps_per_stage = hyper.at("max_steps_per_stage");
  run.hp.cont_normalized = hyper.at("cont_normalized");

  EncoderConfig encoder;
  encoder.filters = manifest.at("encoder").at("filters").get<std::array<int, 3>>();
  encoder.kernels = manifest.at("encoder").at("kernels").get<std::array<int, 3>>();
  encoder.bn_momentum = manifest.at("encoder").at("bn_momentum");
  encoder.bn_eps = manifest.at("encoder").at("bn_eps");
  run.weights = init_predictor(C, K, M, run.hp.warp_scale, encoder, 0);

  run.warp.T = T;
  const std::vector<double> landmarks =
      manifest.at("landmarks").get<std::vector<double>>();
  run.warp.landmarks =
      Eigen::Map<const Vector>(landmarks.data(), static_cast<Index>(landmarks.size()));

  std::vector<std::pair<std::string, Matrix*>> slots;
  run.bank.prototypes.assign(K, Matrix());
  for (int k = 0; k < K; ++k)
    slots.emplace_back("prototype" + std::to_string(k), &run.bank.prototypes[k]);
  run.weights.for_each_param([&](const std::string& name, Matrix& tensor) {
    slots.emplace_back(name, &tensor);
  });
  std::vector<Matrix> buffer_mats(6);
  {
    int at = 0;
    run.weights.for_each_buffer([&](const std::string& name, RowVector&) {
      slots.emplace_back(name, &buffer_mats[at++]);
    });
  }
  const bool has_stats = manifest.at("has_stats");
  Matrix stats_mean, stats_std;
  if (has_stats) {
    slots.emplace_back("stats.mean", &stats_mean);
    slots.emplace_back("stats.stddev", &stats_std);
  }

  const json& tensor_list = manifest.at("tensors");
  if (tensor_list.size() != slots.size())
    throw std::runtime_error(path + ": tensor manifest does not match layout");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const json& entry = tensor_list[i];
    if (entry.at("name") != slots[i].first)
      throw std::runtime_error(path + ": unexpected tensor " +
                               entry.at("name").get<std::string>());
    slots[i].second->resize(entry.at("rows").get<Index>(),
                            entry.at("cols").get<Index>());
    read_blob(in, *slots[i].second, path);
  }
  {
    int at = 0;
    run.weights.for_each_buffer([&](const std::string&, RowVector& buffer) {
      buffer = buffer_mats[at++].row(0);
    });
  }
  if (has_stats) {
    ChannelStats stats;
    stats.mean = stats_mean.col(0);
    stats.stddev = stats_std.col(0);
    run.stats = stats;
  }
  return run;
}

}  // namespace tsproto
