#pragma once

#include <cmath>

#include "sparc/nn/params.hpp"

namespace sparc::nn {

struct AdamHyper {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over the entries named in `grads`.
/// Validates gradients before touching any state: a non-finite gradient
/// aborts the whole step with TrainingError and leaves params unchanged.
template <typename T>
void adam_step(ParameterSet<T>& params, const GradSet<T>& grads,
               const AdamHyper& h) {
  for (const auto& g : grads.items()) {
    const auto& e = params.entry(g.name);
    if (!e.value.same_shape(g.grad))
      throw ConfigError("adam: gradient shape mismatch at " + g.name);
    if (!g.grad.all_finite())
      throw TrainingError("adam: non-finite gradient at " + g.name);
  }
  const std::uint64_t t = ++params.adam_steps;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(h.beta1), ob1 = static_cast<T>(1.0 - h.beta1);
  const T b2 = static_cast<T>(h.beta2), ob2 = static_cast<T>(1.0 - h.beta2);
  const T lr_c = static_cast<T>(h.lr / bc1);
  const T ibc2 = static_cast<T>(1.0 / bc2);
  const T eps_c = static_cast<T>(h.eps);
  for (const auto& g : grads.items()) {
    auto& e = params.entry(g.name);
    if (!e.has_moments) {
      e.m = Tensor<T>(e.value.shape);
      e.v = Tensor<T>(e.value.shape);
      e.has_moments = true;
    }
    T* th = e.value.ptr();
    T* m = e.m.ptr();
    T* v = e.v.ptr();
    const T* gr = g.grad.ptr();
    const std::size_t n = e.value.numel();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + ob1 * gr[i];
      v[i] = b2 * v[i] + ob2 * gr[i] * gr[i];
      th[i] -= lr_c * m[i] / (std::sqrt(v[i] * ibc2) + eps_c);
    }
  }
}

/// Scales grads so their global L2 norm is at most max_norm.
/// Returns the pre-clip norm.
template <typename T>
double clip_global_norm(GradSet<T>& grads, double max_norm) {
  const double norm = std::sqrt(grads.global_norm_sq());
  if (norm > max_norm && norm > 0.0)
    grads.scale(static_cast<T>(max_norm / norm));
  return norm;
}

}  // namespace sparc::nn
