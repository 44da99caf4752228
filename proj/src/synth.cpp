#include "tsproto/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tsproto/rng.hpp"

namespace tsproto {

double SynthTemplates::evaluate(int k, Index c, double t) const {
  const double u = (t - 1.0) / static_cast<double>(length - 1);
  double value = 0.0;
  for (const SinusoidParams& s : components[k][c])
    value += s.amplitude *
             std::sin(2.0 * std::numbers::pi * s.cycles * u + s.phase);
  return value;
}

Matrix SynthTemplates::render(int k) const {
  const Index C = static_cast<Index>(components[k].size());
  Matrix out(length, C);
  for (Index t = 0; t < length; ++t)
    for (Index c = 0; c < C; ++c)
      out(t, c) = evaluate(k, c, static_cast<double>(t + 1));
  return out;
}

namespace {

void check_config(const SynthConfig& cfg) {
  if (cfg.k_true < 2)
    throw std::invalid_argument("generate_synthetic: need at least 2 classes");
  if (cfg.n_train < 1 || cfg.n_test < 1)
    throw std::invalid_argument("generate_synthetic: empty split requested");
  if (cfg.length < 2 || cfg.channels < 1)
    throw std::invalid_argument("generate_synthetic: degenerate grid");
  if (cfg.shift_range < 0.0 || cfg.offset_range < 0.0 || cfg.noise_sd < 0.0)
    throw std::invalid_argument("generate_synthetic: negative range");
  if (cfg.missing_rate < 0.0 || cfg.missing_rate >= 1.0)
    throw std::invalid_argument(
        "generate_synthetic: missing_rate must lie in [0, 1)");
  if (std::abs(cfg.test_shift_bias) > cfg.shift_range)
    throw std::invalid_argument(
        "generate_synthetic: |test_shift_bias| exceeds shift_range");
}

SynthTemplates draw_templates(const SynthConfig& cfg, Rng& rng) {
  SynthTemplates tpl;
  tpl.length = cfg.length;
  tpl.components.resize(cfg.k_true);

  // Classes are paired: both members of a pair share two slow components per
  // channel and add one fast distinguishing component of their own, so the
  // within-pair distance is small relative to the overall signal.  The
  // distinguishing component is fast enough that a time shift within the
  // configured range decorrelates it: telling pair members apart requires
  // temporal alignment, and rigid pointwise distances conflate timing with
  // identity.
  const int pairs = (cfg.k_true + 1) / 2;
  for (int p = 0; p < pairs; ++p) {
    std::vector<std::vector<SinusoidParams>> shared(cfg.channels);
    for (Index c = 0; c < cfg.channels; ++c)
      for (int j = 0; j < 2; ++j)
        shared[c].push_back(SinusoidParams{rng.uniform(0.5, 1.0),
                                           rng.uniform(1.0, 2.5),
                                           rng.uniform(0.0, 2.0 * std::numbers::pi)});
    for (int member = 0; member < 2; ++member) {
      const int k = 2 * p + member;
      if (k >= cfg.k_true) break;
      tpl.components[k] = shared;
      for (Index c = 0; c < cfg.channels; ++c)
        tpl.components[k][c].push_back(
            SinusoidParams{rng.uniform(0.3, 0.6), rng.uniform(6.0, 9.0),
                           rng.uniform(0.0, 2.0 * std::numbers::pi)});
    }
  }
  return tpl;
}

void fill_split(const SynthConfig& cfg, const SynthTemplates& tpl, Index count,
                double shift_centre, std::uint64_t stream, Dataset* out,
                std::vector<SampleTruth>* truth) {
  Rng rng(stream);
  const Index T = cfg.length;
  const Index C = cfg.channels;
  const double half_width = cfg.shift_range - std::abs(shift_centre);

  out->series.reserve(count);
  out->masks.reserve(count);
  out->labels.reserve(count);
  truth->reserve(count);
  for (Index i = 0; i < count; ++i) {
    const int k = static_cast<int>(i % cfg.k_true);
    SampleTruth sample;
    sample.shift_start = shift_centre + rng.uniform(-half_width, half_width);
    sample.shift_end = shift_centre + rng.uniform(-half_width, half_width);
    sample.offsets.resize(C);
    for (Index c = 0; c < C; ++c)
      sample.offsets[c] = rng.uniform(-cfg.offset_range, cfg.offset_range);

    Matrix x(T, C);
    for (Index t = 0; t < T; ++t) {
      const double u = static_cast<double>(t) / static_cast<double>(T - 1);
      const double warped =
          static_cast<double>(t + 1) +
          sample.shift_start + (sample.shift_end - sample.shift_start) * u;
      for (Index c = 0; c < C; ++c)
        x(t, c) = tpl.evaluate(k, c, warped) + sample.offsets[c] +
                  cfg.noise_sd * rng.normal();
    }

    Mask mask;
    mask.weights = Vector::Ones(T);
    for (Index t = 0; t < T; ++t)
      if (rng.uniform() < cfg.missing_rate) mask.weights[t] = 0.0;
    if (mask.weights.sum() == 0.0) mask.weights[rng.uniform_int(T)] = 1.0;
    for (Index t = 0; t < T; ++t)
      if (mask.weights[t] == 0.0) x.row(t).setZero();

    out->series.push_back(std::move(x));
    out->masks.push_back(std::move(mask));
    out->labels.push_back(k + 1);
    truth->push_back(std::move(sample));
  }
}

}  // namespace

SynthResult generate_synthetic(const SynthConfig& cfg) {
  check_config(cfg);
  SynthResult result;

  Rng template_rng(cfg.seed ^ 0xa5a5c3d2e1f00a11ULL);
  result.templates = draw_templates(cfg, template_rng);

  result.train.split = Split::train;
  result.test.split = Split::test;
  fill_split(cfg, result.templates, cfg.n_train, 0.0,
             cfg.seed ^ 0x517ea17b0c0ffee1ULL, &result.train,
             &result.train_truth);
  fill_split(cfg, result.templates, cfg.n_test, cfg.test_shift_bias,
             cfg.seed ^ 0x7e57da7a5eed0002ULL, &result.test,
             &result.test_truth);
  return result;
}

}  // namespace tsproto
