#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "sparc/nn/stack.hpp"

namespace sparc::nn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double input_rel_err = 0.0;
  std::vector<std::pair<std::string, double>> per_param;
};

inline double rel_err(double a, double n) {
  const double diff = std::abs(a - n);
  const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
  return diff == 0.0 ? 0.0 : diff / denom;
}

/// Compares analytic gradients of L = sum(probe * stack(x)) against central
/// finite differences for every parameter element and every input element.
/// Double precision only; report-only (never throws on large error).
inline GradCheckReport grad_check(const Stack<double>& stack,
                                  ParameterSet<double>& ps,
                                  const Tensor<double>& x,
                                  const Tensor<double>& probe,
                                  double eps = 1e-5) {
  const auto loss = [&]() {
    Tensor<double> y = stack.forward(ps, x);
    double s = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
    return s;
  };

  Tape<double> tape;
  stack.forward(ps, x, &tape);
  GradSet<double> gs;
  Tensor<double> dx = stack.backward(ps, tape, probe, &gs);

  GradCheckReport rep;
  for (const auto& name : stack.param_names()) {
    auto& val = ps.value(name);
    const Tensor<double>* g = gs.find(name);
    double worst = 0.0;
    for (std::size_t i = 0; i < val.numel(); ++i) {
      const double keep = val[i];
      val[i] = keep + eps;
      const double lp = loss();
      val[i] = keep - eps;
      const double lm = loss();
      val[i] = keep;
      const double numeric = (lp - lm) / (2 * eps);
      worst = std::max(worst, rel_err(g ? (*g)[i] : 0.0, numeric));
    }
    rep.per_param.emplace_back(name, worst);
    rep.max_rel_err = std::max(rep.max_rel_err, worst);
  }

  Tensor<double> xx = x;
  for (std::size_t i = 0; i < xx.numel(); ++i) {
    const double keep = xx[i];
    auto eval = [&](double v) {
      xx[i] = v;
      Tensor<double> y = stack.forward(ps, xx);
      double s = 0;
      for (std::size_t k = 0; k < y.numel(); ++k) s += probe[k] * y[k];
      return s;
    };
    const double numeric = (eval(keep + eps) - eval(keep - eps)) / (2 * eps);
    xx[i] = keep;
    rep.input_rel_err = std::max(rep.input_rel_err, rel_err(dx[i], numeric));
  }
  rep.max_rel_err = std::max(rep.max_rel_err, rep.input_rel_err);
  return rep;
}

}  // namespace sparc::nn
