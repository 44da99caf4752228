#include "tsproto/warp.hpp"

#include <cmath>
#include <stdexcept>

namespace tsproto {

namespace {

inline double cube_abs(double r) {
  const double a = std::abs(r);
  return a * a * a;
}

}  // namespace

WarpConfig WarpConfig::uniform(Index T, int M) {
  if (T < 2) throw std::invalid_argument("WarpConfig: grid length below 2");
  if (M < 2) throw std::invalid_argument("WarpConfig: need at least 2 landmarks");
  if (M > T) throw std::invalid_argument("WarpConfig: more landmarks than stamps");
  WarpConfig config;
  config.T = T;
  config.landmarks.resize(M);
  for (int m = 0; m < M; ++m)
    config.landmarks[m] =
        1.0 + static_cast<double>(T - 1) * static_cast<double>(m) / (M - 1);
  return config;
}

double WarpFunction::operator()(double t) const {
  double d = a_d + b_d * t;
  for (Index m = 0; m < w.size(); ++m) d += w[m] * cube_abs(t - landmarks[m]);
  return t + d;
}

WarpSolver::WarpSolver(WarpConfig config) : config_(std::move(config)) {
  const Index T = config_.T;
  const int M = config_.num_landmarks();
  if (T < 2 || M < 2) throw std::invalid_argument("WarpSolver: bad geometry");
  for (int m = 1; m < M; ++m)
    if (!(config_.landmarks[m] > config_.landmarks[m - 1]))
      throw std::invalid_argument("WarpSolver: landmarks not strictly increasing");

  const double span = static_cast<double>(T - 1);
  Vector tau(M);  // landmarks scaled to [0, 1]
  for (int m = 0; m < M; ++m) tau[m] = (config_.landmarks[m] - 1.0) / span;

  // Bordered kernel system: [S Q; Q^T 0] [w; a; b] = [targets; 0; 0].
  Matrix system = Matrix::Zero(M + 2, M + 2);
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) system(i, j) = cube_abs(tau[i] - tau[j]);
    system(i, M) = 1.0;
    system(i, M + 1) = tau[i];
    system(M, i) = 1.0;
    system(M + 1, i) = tau[i];
  }
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible())
    throw std::invalid_argument("WarpSolver: singular interpolation system");
  inverse_ = lu.inverse();

  grid_.resize(T);
  for (Index t = 0; t < T; ++t) grid_[t] = static_cast<double>(t + 1);

  Matrix features(T, M + 2);  // kernel features of the scaled grid
  for (Index t = 0; t < T; ++t) {
    const double u = static_cast<double>(t) / span;
    for (int m = 0; m < M; ++m) features(t, m) = cube_abs(u - tau[m]);
    features(t, M) = 1.0;
    features(t, M + 1) = u;
  }
  basis_.noalias() = features * inverse_.leftCols(M);
}

WarpFunction WarpSolver::fit(const Vector& time_shift) const {
  const int M = config_.num_landmarks();
  if (time_shift.size() != M)
    throw std::invalid_argument("WarpSolver::fit: shift size mismatch");
  Vector rhs = Vector::Zero(M + 2);
  rhs.head(M) = time_shift;
  const Vector coeffs = inverse_ * rhs;  // [w; a; b] in scaled coordinates

  // Map d(u) = a + b u + sum w |u - tau|^3 with u = (t-1)/span back to t.
  const double span = static_cast<double>(config_.T - 1);
  WarpFunction h;
  h.landmarks = config_.landmarks;
  h.w = coeffs.head(M) / (span * span * span);
  h.b_d = coeffs[M + 1] / span;
  h.a_d = coeffs[M] - coeffs[M + 1] / span;
  return h;
}

Vector WarpSolver::positions(const Vector& time_shift) const {
  if (time_shift.size() != basis_.cols())
    throw std::invalid_argument("WarpSolver::positions: shift size mismatch");
  return grid_ + basis_ * time_shift;
}

WarpFunction fit_warp(const WarpConfig& config, const Vector& time_shift) {
  return WarpSolver(config).fit(time_shift);
}

Matrix apply_time_warp(const Matrix& prototype, const Vector& positions) {
  const Index T = prototype.rows();
  Matrix out(positions.size(), prototype.cols());
  for (Index t = 0; t < positions.size(); ++t) {
    const double q = positions[t];
    if (q <= 1.0) {
      out.row(t) = prototype.row(0);
    } else if (q >= static_cast<double>(T)) {
      out.row(t) = prototype.row(T - 1);
    } else {
      const double floor_q = std::floor(q);
      const Index lo = static_cast<Index>(floor_q) - 1;
      const double frac = q - floor_q;
      if (frac == 0.0)
        out.row(t) = prototype.row(lo);
      else
        out.row(t) = (1.0 - frac) * prototype.row(lo) + frac * prototype.row(lo + 1);
    }
  }
  return out;
}

Matrix apply_time_warp(const Matrix& prototype, const WarpFunction& h) {
  Vector positions(prototype.rows());
  for (Index t = 0; t < prototype.rows(); ++t)
    positions[t] = h(static_cast<double>(t + 1));
  return apply_time_warp(prototype, positions);
}

Matrix apply_offset(const Matrix& prototype, const Vector& offset) {
  if (offset.size() != prototype.cols())
    throw std::invalid_argument("apply_offset: channel count mismatch");
  return prototype.rowwise() + offset.transpose();
}

Matrix reconstruct(const Matrix& prototype, const TransformParams& params,
                   const WarpSolver& solver) {
  return apply_offset(apply_time_warp(prototype, solver.positions(params.time_shift)),
                      params.offset);
}

}  // namespace tsproto
