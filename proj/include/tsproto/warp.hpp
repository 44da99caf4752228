#pragma once

#include "tsproto/types.hpp"

namespace tsproto {

/** Uniform landmark grid for the time warp. */
struct WarpConfig {
  Index T = 0;
  Vector landmarks;  // M strictly increasing stamps, first = 1, last = T

  int num_landmarks() const { return static_cast<int>(landmarks.size()); }

  /** M landmarks uniformly spaced over [1, T]. Requires T >= 2, M >= 2. */
  static WarpConfig uniform(Index T, int M);
};

/** Per-series transform parameters predicted by the encoder. */
struct TransformParams {
  Vector offset;      // per-channel additive offset
  Vector time_shift;  // per-landmark displacement, in stamps
};

/**
 * Smooth monotone-in-spirit time change h(t) = t + d(t) where d is the
 * natural cubic interpolant of the landmark displacements:
 * d(t) = a_d + b_d t + sum_m w[m] |t - landmark[m]|^3 with the side
 * conditions sum w = 0 and sum w * landmark = 0.
 */
struct WarpFunction {
  double a_d = 0.0;
  double b_d = 0.0;
  Vector w;
  Vector landmarks;

  double operator()(double t) const;

  // Coefficients of h itself, h(t) = a + b t + sum w |t - landmark|^3.
  double a() const { return a_d; }
  double b() const { return 1.0 + b_d; }
};

/**
 * Factorizes the interpolation system for one (T, M) geometry once; fitting
 * a warp is then a matrix-vector product. Solved in [0, 1]-scaled
 * coordinates to keep the cubic kernel system well conditioned.
 */
class WarpSolver {
 public:
  explicit WarpSolver(WarpConfig config);

  const WarpConfig& config() const { return config_; }

  /** Interpolating warp with h(landmark[m]) = landmark[m] + time_shift[m]. */
  WarpFunction fit(const Vector& time_shift) const;

  /**
   * T x M basis of the warp restricted to the integer grid:
   * positions(shift) = (1, ..., T)^T + basis * shift. Zero shift therefore
   * maps the grid to itself exactly.
   */
  const Matrix& position_basis() const { return basis_; }

  /** h evaluated on the integer grid 1..T without forming a WarpFunction. */
  Vector positions(const Vector& time_shift) const;

 private:
  WarpConfig config_;
  Matrix inverse_;  // (M+2)x(M+2) inverse of the bordered kernel system
  Matrix basis_;    // T x M
  Vector grid_;     // 1..T
};

/** Fits the warp for one displacement vector (convenience over WarpSolver). */
WarpFunction fit_warp(const WarpConfig& config, const Vector& time_shift);

/**
 * Samples prototype rows at fractional positions with linear interpolation.
 * Positions are 1-based; they are clamped to [1, T]. Integer positions copy
 * the row bit-exactly.
 */
Matrix apply_time_warp(const Matrix& prototype, const Vector& positions);
Matrix apply_time_warp(const Matrix& prototype, const WarpFunction& h);

/** Adds a per-channel constant to every stamp. */
Matrix apply_offset(const Matrix& prototype, const Vector& offset);

/** Full deformation: time warp followed by the channel offset. */
Matrix reconstruct(const Matrix& prototype, const TransformParams& params,
                   const WarpSolver& solver);

}  // namespace tsproto
