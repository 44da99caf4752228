#pragma once

#include <utility>

#include "tsproto/core.hpp"

namespace tsproto {

/** Filtered mask weights below this threshold are zeroed. */
constexpr double kMaskEpsilon = 1e-6;

enum class GapFill { none, previous, moving_average, gaussian };

struct PreprocessConfig {
  GapFill gap_fill = GapFill::none;
  double sigma = 7.0;           // Gaussian filter width, in stamps
  int window_halfwidth = 7;     // moving-average halfwidth, in stamps
  bool normalize = false;
  int cloud_band = -1;          // channel screened for clouds; -1 disables
  double cloud_threshold = 0.0;
};

/**
 * Zeroes the mask at stamps whose `band` channel exceeds `threshold`.
 * Never re-enables a stamp: the output mask is pointwise <= `observed`.
 */
Mask threshold_clouds(const Matrix& series, const Mask& observed, Index band,
                      double threshold);

/**
 * Fills each missing stamp with the closest previous observed stamp.
 * Leading stamps with no previous observation stay zero with mask 0.
 * Requires a raw (binary) mask.
 */
std::pair<Matrix, Mask> gap_fill_previous(const Matrix& x_raw, const Mask& m_raw);

/**
 * Replaces every stamp by the average of observed values inside a centered
 * window of halfwidth `hw`, divided by the full window size 2*hw+1. The
 * output mask carries the observed fraction of each window; windows with no
 * observation give value 0 and mask 0. Requires a raw mask. Values at
 * masked stamps of the input never influence the output.
 */
std::pair<Matrix, Mask> gap_fill_moving_average(const Matrix& x_raw,
                                                const Mask& m_raw, int hw);

/**
 * Gaussian input filtering: the output mask is the mask correlated with an
 * unnormalized Gaussian kernel exp(-(dt)^2 / (2 sigma^2)) truncated at 4
 * sigma, and the output value is the matching weighted average of observed
 * values. Stamps whose filtered weight falls below kMaskEpsilon give value 0
 * and mask 0. Values at masked stamps of the input never influence the
 * output. Each output value is a convex combination of observed inputs.
 */
std::pair<Matrix, Mask> gaussian_filter(const Matrix& x_raw, const Mask& m_raw,
                                        double sigma);

/** Applies the configured gap-fill / filtering step to every series. */
Dataset apply_gap_fill(const Dataset& data, const PreprocessConfig& config);

/**
 * Mask-weighted per-channel mean and standard deviation over a dataset;
 * the caller passes the training split.
 */
ChannelStats compute_channel_stats(const Dataset& train);

/**
 * Per-channel standardization with training-split statistics. Channels with
 * zero deviation are left unchanged (a warning is printed once). The stats
 * are stored on the result so the transform can be inverted.
 */
Dataset normalize(const Dataset& data, const ChannelStats& stats);

/** Inverse of normalize for the same stats. */
Dataset denormalize(const Dataset& data, const ChannelStats& stats);

}  // namespace tsproto
