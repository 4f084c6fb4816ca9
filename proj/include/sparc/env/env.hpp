#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sparc/env/context.hpp"

namespace sparc::env {

enum class MetricKind { Return, LapTime };

struct StepResult {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;
  bool success = false;    // goal reached / lap completed
  double lap_time = 0.0;   // valid when success on LapTime envs
};

/// A contextual environment instance. Single-threaded; many instances may
/// run on distinct workers. Dynamics are deterministic given (context,
/// seed, action sequence); stochasticity lives in the initial state.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string name() const = 0;
  virtual int obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;
  virtual MetricKind metric_kind() const = 0;
  virtual const ContextSpec& context_spec() const = 0;

  virtual bool context_valid(const Context& c) const = 0;
  virtual std::vector<double> reset(const Context& c, std::uint64_t seed) = 0;
  virtual StepResult step(const std::vector<double>& action) = 0;

  /// Hand-coded reference controller, stateless over the observation.
  virtual std::vector<double> scripted_action(
      const std::vector<double>& obs) const = 0;

  /// Fresh unreset instance with identical parameters.
  virtual std::unique_ptr<Env> clone_fresh() const = 0;

  /// Zero-shot dynamics-shift knob: scales drag-like constants by `factor`
  /// and thrust-like constants by 1/factor.
  virtual void perturb_dynamics(double factor) = 0;
};

using EnvOverrides = std::map<std::string, double>;

std::unique_ptr<Env> make_env(const std::string& name,
                              const EnvOverrides& overrides = {});

}  // namespace sparc::env
