#pragma once

#include <vector>

#include "tsproto/core.hpp"

namespace tsproto {

/** Per-class mean series of a labeled dataset. */
struct CentroidModel {
  std::vector<Matrix> centroids;  // one per class, ordered by class id
  std::vector<int> classes;       // 1-based ids, ascending

  int size() const { return static_cast<int>(classes.size()); }
};

/**
 * Mask-weighted mean of the selected series. Stamp t of sample i carries
 * weight m_i[t] / sum_t' m_i[t']; the mean self-normalizes over samples.
 * Stamps with zero total weight give a zero row.
 */
Matrix masked_centroid(const std::vector<Matrix>& series,
                       const std::vector<Mask>& masks,
                       const std::vector<Index>& members);

/** Nearest-centroid classifier fit. Every class needs at least one sample. */
CentroidModel ncc_fit(const Dataset& labeled);

/** Class of the closest centroid under masked MSE; lowest class on ties. */
int ncc_predict(const CentroidModel& model, const Matrix& x, const Mask& m);
std::vector<int> ncc_predict(const CentroidModel& model, const Dataset& data);

enum class Metric { euclidean, dtw };

/**
 * Label of the nearest training series. The euclidean metric is the masked
 * MSE; dtw drops each series' zero-weight stamps and aligns the rest.
 * Sub-sampling the training set is the caller's concern.
 */
int knn1_predict(const Dataset& train, const Matrix& x, const Mask& m,
                 Metric metric, int band = -1);

/**
 * Classic dynamic time warping over squared Euclidean stamp distances with
 * unit steps; unnormalized total cost. `band` (when >= 0) restricts
 * alignment to a Sakoe-Chiba corridor of that halfwidth.
 */
double dtw_distance(const Matrix& a, const Matrix& b, int band = -1);

/** DTW after removing stamps with zero mask weight from both series. */
double dtw_distance_masked(const Matrix& a, const Mask& ma, const Matrix& b,
                           const Mask& mb, int band = -1);

}  // namespace tsproto
