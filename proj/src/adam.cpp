#include "tsproto/adam.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tsproto {

bool adam_step(const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads, AdamState& state,
               double learning_rate, const AdamConfig& config) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i]->allFinite()) {
      std::fprintf(stderr,
                   "warning: non-finite gradient in tensor %zu, step %ld skipped\n",
                   i, state.step + 1);
      return false;
    }
  }
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.emplace_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state does not match parameter list");

  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    params[i]->array() -= learning_rate * (m.array() / bc1) /
                          ((v.array() / bc2).sqrt() + config.eps);
  }
  return true;
}

}  // namespace tsproto
