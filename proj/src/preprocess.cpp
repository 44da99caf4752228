#include "tsproto/preprocess.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tsproto {

namespace {

void require_raw(const Mask& m, const char* who) {
  if (!m.raw) throw std::invalid_argument(std::string(who) + ": raw mask required");
}

}  // namespace

Mask threshold_clouds(const Matrix& series, const Mask& observed, Index band,
                      double threshold) {
  if (band < 0 || band >= series.cols())
    throw std::invalid_argument("threshold_clouds: band out of range");
  if (observed.length() != series.rows())
    throw std::invalid_argument("threshold_clouds: mask length mismatch");
  Mask out = observed;
  for (Index t = 0; t < series.rows(); ++t)
    if (series(t, band) > threshold) out.weights[t] = 0.0;
  return out;
}

std::pair<Matrix, Mask> gap_fill_previous(const Matrix& x_raw, const Mask& m_raw) {
  require_raw(m_raw, "gap_fill_previous");
  const Index T = x_raw.rows();
  Matrix x = Matrix::Zero(T, x_raw.cols());
  Mask m;
  m.weights = Vector::Zero(T);
  m.raw = true;
  Index last = -1;
  for (Index t = 0; t < T; ++t) {
    if (m_raw.weights[t] != 0.0) last = t;
    if (last >= 0) {
      x.row(t) = x_raw.row(last);
      m.weights[t] = 1.0;
    }
  }
  return {std::move(x), std::move(m)};
}

std::pair<Matrix, Mask> gap_fill_moving_average(const Matrix& x_raw,
                                                const Mask& m_raw, int hw) {
  require_raw(m_raw, "gap_fill_moving_average");
  if (hw < 0) throw std::invalid_argument("gap_fill_moving_average: negative window");
  const Index T = x_raw.rows();
  Matrix x = Matrix::Zero(T, x_raw.cols());
  Mask m;
  m.weights = Vector::Zero(T);
  m.raw = false;
  const double norm = 2.0 * hw + 1.0;
  for (Index t = 0; t < T; ++t) {
    const Index lo = std::max<Index>(0, t - hw);
    const Index hi = std::min<Index>(T - 1, t + hw);
    double weight = 0.0;
    RowVector acc = RowVector::Zero(x_raw.cols());
    for (Index s = lo; s <= hi; ++s) {
      if (m_raw.weights[s] == 0.0) continue;
      weight += 1.0;
      acc += x_raw.row(s);
    }
    if (weight > 0.0) {
      x.row(t) = acc / weight;
      m.weights[t] = weight / norm;
    }
  }
  return {std::move(x), std::move(m)};
}

std::pair<Matrix, Mask> gaussian_filter(const Matrix& x_raw, const Mask& m_raw,
                                        double sigma) {
  if (m_raw.length() != x_raw.rows())
    throw std::invalid_argument("gaussian_filter: mask length mismatch");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_filter: sigma must be positive");
  const Index T = x_raw.rows();
  const Index reach = static_cast<Index>(std::ceil(4.0 * sigma));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Matrix x = Matrix::Zero(T, x_raw.cols());
  Mask m;
  m.weights = Vector::Zero(T);
  m.raw = false;
  for (Index t = 0; t < T; ++t) {
    const Index lo = std::max<Index>(0, t - reach);
    const Index hi = std::min<Index>(T - 1, t + reach);
    double weight = 0.0;
    RowVector acc = RowVector::Zero(x_raw.cols());
    for (Index s = lo; s <= hi; ++s) {
      const double w = m_raw.weights[s];
      if (w == 0.0) continue;
      const double g = w * std::exp(-static_cast<double>((s - t) * (s - t)) * inv);
      weight += g;
      acc += g * x_raw.row(s);
    }
    if (weight >= kMaskEpsilon) {
      x.row(t) = acc / weight;
      m.weights[t] = weight;
    }
  }
  return {std::move(x), std::move(m)};
}

Dataset apply_gap_fill(const Dataset& data, const PreprocessConfig& config) {
  Dataset out = data;
  for (Index i = 0; i < data.size(); ++i) {
    std::pair<Matrix, Mask> filled;
    switch (config.gap_fill) {
      case GapFill::none:
        continue;
      case GapFill::previous:
        filled = gap_fill_previous(data.series[i], data.masks[i]);
        break;
      case GapFill::moving_average:
        filled = gap_fill_moving_average(data.series[i], data.masks[i],
                                         config.window_halfwidth);
        break;
      case GapFill::gaussian:
        filled = gaussian_filter(data.series[i], data.masks[i], config.sigma);
        break;
    }
    out.series[i] = std::move(filled.first);
    out.masks[i] = std::move(filled.second);
  }
  return out;
}

ChannelStats compute_channel_stats(const Dataset& train) {
  const Index C = train.channels();
  Vector sum = Vector::Zero(C);
  Vector sumsq = Vector::Zero(C);
  double mass = 0.0;
  for (Index i = 0; i < train.size(); ++i) {
    const Matrix& x = train.series[i];
    const Vector& w = train.masks[i].weights;
    sum.noalias() += x.transpose() * w;
    sumsq.noalias() += x.array().square().matrix().transpose() * w;
    mass += w.sum();
  }
  if (mass <= 0.0)
    throw std::invalid_argument("compute_channel_stats: no observed stamp");
  ChannelStats stats;
  stats.mean = sum / mass;
  stats.stddev = (sumsq / mass - stats.mean.array().square().matrix())
                     .cwiseMax(0.0)
                     .cwiseSqrt();
  return stats;
}

namespace {

Dataset shift_scale(const Dataset& data, const ChannelStats& stats, bool forward) {
  if (stats.channels() != data.channels())
    throw std::invalid_argument("normalize: channel count mismatch");
  static bool warned = false;
  Dataset out = data;
  for (Index c = 0; c < stats.channels(); ++c) {
    const double sd = stats.stddev[c];
    if (sd == 0.0) {
      if (!warned) {
        std::fprintf(stderr,
                     "warning: channel %lld has zero deviation, left unchanged\n",
                     static_cast<long long>(c));
        warned = true;
      }
      continue;
    }
    for (auto& x : out.series) {
      if (forward)
        x.col(c) = (x.col(c).array() - stats.mean[c]) / sd;
      else
        x.col(c) = x.col(c).array() * sd + stats.mean[c];
    }
  }
  out.stats = stats;
  return out;
}

}  // namespace

Dataset normalize(const Dataset& data, const ChannelStats& stats) {
  return shift_scale(data, stats, true);
}

Dataset denormalize(const Dataset& data, const ChannelStats& stats) {
  return shift_scale(data, stats, false);
}

}  // namespace tsproto
