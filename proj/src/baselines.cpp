#include "tsproto/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "tsproto/losses.hpp"

namespace tsproto {

Matrix masked_centroid(const std::vector<Matrix>& series,
                       const std::vector<Mask>& masks,
                       const std::vector<Index>& members) {
  if (members.empty()) throw std::invalid_argument("masked_centroid: empty member set");
  const Index T = series[members.front()].rows();
  const Index C = series[members.front()].cols();
  Matrix num = Matrix::Zero(T, C);
  Vector den = Vector::Zero(T);
  for (Index i : members) {
    const double mass = masks[i].weights.sum();
    if (!(mass > 0.0)) throw std::invalid_argument("masked_centroid: empty mask");
    const Vector w = masks[i].weights / mass;
    num += w.asDiagonal() * series[i];
    den += w;
  }
  Matrix centroid = Matrix::Zero(T, C);
  for (Index t = 0; t < T; ++t)
    if (den[t] > 0.0) centroid.row(t) = num.row(t) / den[t];
  return centroid;
}

CentroidModel ncc_fit(const Dataset& labeled) {
  if (!labeled.labeled()) throw std::invalid_argument("ncc_fit: labels required");
  std::map<int, std::vector<Index>> by_class;
  for (Index i = 0; i < labeled.size(); ++i) by_class[labeled.labels[i]].push_back(i);
  CentroidModel model;
  for (const auto& [cls, members] : by_class) {
    model.classes.push_back(cls);
    model.centroids.push_back(masked_centroid(labeled.series, labeled.masks, members));
  }
  return model;
}

int ncc_predict(const CentroidModel& model, const Matrix& x, const Mask& m) {
  if (model.size() == 0) throw std::invalid_argument("ncc_predict: empty model");
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int k = 0; k < model.size(); ++k) {
    const double err = masked_mse(x, model.centroids[k], m);
    if (err < best_err) {
      best_err = err;
      best = k;
    }
  }
  return model.classes[best];
}

std::vector<int> ncc_predict(const CentroidModel& model, const Dataset& data) {
  std::vector<int> out(data.size());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < data.size(); ++i)
    out[i] = ncc_predict(model, data.series[i], data.masks[i]);
  return out;
}

namespace {

Matrix drop_masked_rows(const Matrix& x, const Mask& m) {
  Index kept = 0;
  for (Index t = 0; t < m.length(); ++t)
    if (m.weights[t] > 0.0) ++kept;
  Matrix out(kept, x.cols());
  Index r = 0;
  for (Index t = 0; t < m.length(); ++t)
    if (m.weights[t] > 0.0) out.row(r++) = x.row(t);
  return out;
}

}  // namespace

double dtw_distance(const Matrix& a, const Matrix& b, int band) {
  const Index n = a.rows(), m = b.rows();
  if (n == 0 || m == 0) throw std::invalid_argument("dtw_distance: empty series");
  if (a.cols() != b.cols()) throw std::invalid_argument("dtw_distance: channel mismatch");
  constexpr double inf = std::numeric_limits<double>::infinity();
  Vector prev = Vector::Constant(m + 1, inf);
  Vector curr(m + 1);
  prev[0] = 0.0;
  for (Index i = 1; i <= n; ++i) {
    curr.setConstant(inf);
    Index j_lo = 1, j_hi = m;
    if (band >= 0) {
      // Corridor scaled to rectangular alignments.
      const double center = static_cast<double>(i) * m / n;
      j_lo = std::max<Index>(1, static_cast<Index>(std::ceil(center - band)));
      j_hi = std::min<Index>(m, static_cast<Index>(std::floor(center + band)));
    }
    for (Index j = j_lo; j <= j_hi; ++j) {
      const double cost = (a.row(i - 1) - b.row(j - 1)).squaredNorm();
      curr[j] = cost + std::min({prev[j], curr[j - 1], prev[j - 1]});
    }
    std::swap(prev, curr);
  }
  return prev[m];
}

double dtw_distance_masked(const Matrix& a, const Mask& ma, const Matrix& b,
                           const Mask& mb, int band) {
  return dtw_distance(drop_masked_rows(a, ma), drop_masked_rows(b, mb), band);
}

int knn1_predict(const Dataset& train, const Matrix& x, const Mask& m,
                 Metric metric, int band) {
  if (train.size() == 0 || !train.labeled())
    throw std::invalid_argument("knn1_predict: labeled train set required");
  int best_label = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < train.size(); ++i) {
    double d;
    if (metric == Metric::euclidean) {
      // Compare only where both series carry weight.
      Mask both;
      both.weights = m.weights.cwiseProduct(train.masks[i].weights);
      both.raw = m.raw && train.masks[i].raw;
      if (!(both.weights.sum() > 0.0)) continue;
      d = masked_mse(x, train.series[i], both);
    } else {
      d = dtw_distance_masked(x, m, train.series[i], train.masks[i], band);
    }
    if (d < best) {
      best = d;
      best_label = train.labels[i];
    }
  }
  return best_label != 0 ? best_label : train.labels.front();
}

}  // namespace tsproto
