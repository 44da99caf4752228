#pragma once

#include <cstdint>
#include <vector>

#include "tsproto/core.hpp"

namespace tsproto {

/** Fraction of correct predictions. Labels are 1-based. */
double overall_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

/**
 * Class-averaged accuracy over `num_classes` classes. Classes absent from
 * the truth are excluded from the average with a warning.
 */
double mean_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                     int num_classes);

/** K x K count matrix, rows = truth class, columns = predicted class. */
IntMatrix confusion_matrix(const std::vector<int>& pred,
                           const std::vector<int>& truth, int num_classes);

enum class Selection { closest, random };

/**
 * Majority-vote map from cluster index to 1-based class. Empty clusters get
 * the global modal class (with a warning); ties resolve to the lowest class.
 */
std::vector<int> label_clusters_majority(const std::vector<int>& assignment,
                                         const std::vector<int>& labels,
                                         int num_clusters);

/**
 * Cluster labeling from a limited annotation budget: per cluster, the
 * majority label of its k lowest-error members (closest) or of a uniform
 * random subset (random). Clusters with fewer than k members use all of
 * them; empty clusters fall back to the global modal class.
 */
std::vector<int> label_clusters_limited(const std::vector<int>& assignment,
                                        const std::vector<double>& errors,
                                        const std::vector<int>& labels,
                                        int num_clusters, int k_per_cluster,
                                        Selection selection, std::uint64_t seed);

}  // namespace tsproto
