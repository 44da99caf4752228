#include "tsproto/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tsproto/rng.hpp"

namespace tsproto {

int Dataset::num_classes() const {
  int k = 0;
  for (int y : labels) k = std::max(k, y);
  return k;
}

int default_landmarks(Index T) {
  return std::max(2, static_cast<int>(std::lround(static_cast<double>(T) / 30.0)));
}

int HyperParams::landmarks_for(Index T) const {
  return landmarks > 0 ? landmarks : default_landmarks(T);
}

ConfusionCounts tally_predictions(const std::vector<int>& predicted,
                                  const std::vector<int>& truth,
                                  int num_classes) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("tally_predictions: size mismatch");
  ConfusionCounts counts;
  counts.per_class_correct.assign(num_classes, 0);
  counts.per_class_total.assign(num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    int y = truth[i];
    if (y < 1 || y > num_classes)
      throw std::invalid_argument("tally_predictions: label out of range");
    ++counts.per_class_total[y - 1];
    ++counts.total;
    if (predicted[i] == y) {
      ++counts.per_class_correct[y - 1];
      ++counts.correct;
    }
  }
  return counts;
}

namespace {

bool is_binary(const Vector& v) {
  return ((v.array() == 0.0) || (v.array() == 1.0)).all();
}

}  // namespace

std::vector<std::string> validate_dataset(const Dataset& data) {
  std::vector<std::string> violations;
  auto report = [&](const std::string& msg) { violations.push_back(msg); };

  if (data.series.empty()) {
    report("dataset is empty");
    return violations;
  }
  if (data.masks.size() != data.series.size())
    report("mask count does not match series count");
  if (data.labeled() && data.labels.size() != data.series.size())
    report("label count does not match series count");

  const Index T = data.length();
  const Index C = data.channels();
  if (T < 2) report("series 0: grid length below 2");
  if (C < 1) report("series 0: no channels");

  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const std::string tag = "series " + std::to_string(i) + ": ";
    const Matrix& x = data.series[i];
    if (x.rows() != T || x.cols() != C) {
      report(tag + "shape mismatch");
      continue;
    }
    if (!x.allFinite()) report(tag + "non-finite value");
    if (i < data.masks.size()) {
      const Mask& m = data.masks[i];
      if (m.weights.size() != T) {
        report(tag + "mask length mismatch");
        continue;
      }
      if (!m.weights.allFinite())
        report(tag + "non-finite mask weight");
      else if ((m.weights.array() < 0.0).any())
        report(tag + "negative mask weight");
      else if (m.raw && !is_binary(m.weights))
        report(tag + "raw mask not binary");
      if (m.weights.sum() <= 0.0) report(tag + "mask has no observed stamp");
    }
    if (data.labeled() && i < data.labels.size() && data.labels[i] < 1)
      report(tag + "label below 1");
  }
  if (data.stats) {
    if (data.stats->mean.size() != C || data.stats->stddev.size() != C)
      report("channel stats shape mismatch");
    else if ((data.stats->stddev.array() < 0.0).any())
      report("negative channel stddev");
  }
  return violations;
}

DatasetSplit split_dataset(const Dataset& data, double val_fraction,
                           std::uint64_t seed) {
  const Index N = data.size();
  if (N < 2)
    throw std::invalid_argument("split_dataset: need at least 2 series");
  Index n_val = static_cast<Index>(std::llround(val_fraction * static_cast<double>(N)));
  n_val = std::clamp<Index>(n_val, 1, N - 1);

  Rng rng(seed);
  std::vector<Index> order(N);
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);

  DatasetSplit out;
  out.train.split = Split::train;
  out.val.split = Split::val;
  out.train.stats = data.stats;
  out.val.stats = data.stats;
  for (Index pos = 0; pos < N; ++pos) {
    Dataset& part = pos < n_val ? out.val : out.train;
    const Index i = order[pos];
    part.series.push_back(data.series[i]);
    part.masks.push_back(data.masks[i]);
    if (data.labeled()) part.labels.push_back(data.labels[i]);
  }
  return out;
}

}  // namespace tsproto
