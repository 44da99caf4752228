#include "tsproto/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "tsproto/rng.hpp"

namespace tsproto {

double overall_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || truth.empty())
    throw std::invalid_argument("overall_accuracy: bad input sizes");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (pred[i] == truth[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double mean_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                     int num_classes) {
  const ConfusionCounts counts = tally_predictions(pred, truth, num_classes);
  double total = 0.0;
  int present = 0;
  for (int k = 0; k < num_classes; ++k) {
    if (counts.per_class_total[k] == 0) {
      std::fprintf(stderr, "warning: class %d absent from truth, dropped from MA\n",
                   k + 1);
      continue;
    }
    total += static_cast<double>(counts.per_class_correct[k]) /
             static_cast<double>(counts.per_class_total[k]);
    ++present;
  }
  if (present == 0) throw std::invalid_argument("mean_accuracy: no class present");
  return total / static_cast<double>(present);
}

IntMatrix confusion_matrix(const std::vector<int>& pred,
                           const std::vector<int>& truth, int num_classes) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("confusion_matrix: size mismatch");
  IntMatrix counts = IntMatrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i] - 1;
    const int p = pred[i] - 1;
    if (t < 0 || t >= num_classes)
      throw std::invalid_argument("confusion_matrix: truth label out of range");
    if (p >= 0 && p < num_classes) ++counts(t, p);
  }
  return counts;
}

namespace {

int modal_class(const std::vector<long>& votes) {
  int best = -1;
  long best_count = 0;
  for (std::size_t k = 0; k < votes.size(); ++k) {
    if (votes[k] > best_count) {
      best_count = votes[k];
      best = static_cast<int>(k);
    }
  }
  return best;  // -1 when there were no votes
}

int global_modal_class(const std::vector<int>& labels) {
  int max_label = 0;
  for (int y : labels) max_label = std::max(max_label, y);
  std::vector<long> votes(max_label, 0);
  for (int y : labels) ++votes[y - 1];
  return modal_class(votes) + 1;
}

}  // namespace

std::vector<int> label_clusters_majority(const std::vector<int>& assignment,
                                         const std::vector<int>& labels,
                                         int num_clusters) {
  if (assignment.size() != labels.size() || labels.empty())
    throw std::invalid_argument("label_clusters_majority: bad input sizes");
  int max_label = 0;
  for (int y : labels) max_label = std::max(max_label, y);
  std::vector<std::vector<long>> votes(num_clusters, std::vector<long>(max_label, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = assignment[i];
    if (c < 0 || c >= num_clusters)
      throw std::invalid_argument("label_clusters_majority: assignment out of range");
    ++votes[c][labels[i] - 1];
  }
  const int fallback = global_modal_class(labels);
  std::vector<int> map(num_clusters);
  for (int c = 0; c < num_clusters; ++c) {
    const int winner = modal_class(votes[c]);
    if (winner < 0) {
      std::fprintf(stderr, "warning: cluster %d empty, labeled with global class %d\n",
                   c, fallback);
      map[c] = fallback;
    } else {
      map[c] = winner + 1;
    }
  }
  return map;
}

std::vector<int> label_clusters_limited(const std::vector<int>& assignment,
                                        const std::vector<double>& errors,
                                        const std::vector<int>& labels,
                                        int num_clusters, int k_per_cluster,
                                        Selection selection, std::uint64_t seed) {
  if (assignment.size() != labels.size() || assignment.size() != errors.size())
    throw std::invalid_argument("label_clusters_limited: bad input sizes");
  if (k_per_cluster < 1)
    throw std::invalid_argument("label_clusters_limited: k must be positive");
  int max_label = 0;
  for (int y : labels) max_label = std::max(max_label, y);

  std::vector<std::vector<std::size_t>> members(num_clusters);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int c = assignment[i];
    if (c < 0 || c >= num_clusters)
      throw std::invalid_argument("label_clusters_limited: assignment out of range");
    members[c].push_back(i);
  }

  Rng rng(seed);
  const int fallback = global_modal_class(labels);
  std::vector<int> map(num_clusters);
  for (int c = 0; c < num_clusters; ++c) {
    std::vector<std::size_t> chosen = members[c];
    if (chosen.empty()) {
      std::fprintf(stderr, "warning: cluster %d empty, labeled with global class %d\n",
                   c, fallback);
      map[c] = fallback;
      continue;
    }
    const std::size_t budget =
        std::min<std::size_t>(chosen.size(), static_cast<std::size_t>(k_per_cluster));
    if (selection == Selection::closest) {
      std::stable_sort(chosen.begin(), chosen.end(),
                       [&](std::size_t a, std::size_t b) { return errors[a] < errors[b]; });
    } else {
      rng.shuffle(chosen);
    }
    std::vector<long> votes(max_label, 0);
    for (std::size_t j = 0; j < budget; ++j) ++votes[labels[chosen[j]] - 1];
    map[c] = modal_class(votes) + 1;
  }
  return map;
}

}  // namespace tsproto
