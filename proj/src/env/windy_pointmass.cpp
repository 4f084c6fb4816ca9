#include "sparc/env/windy_pointmass.hpp"

#include <cmath>

#include "sparc/nn/rng.hpp"

namespace sparc::env {

WindyPointMass::WindyPointMass(const Params& p) : params_(p) {
  const double w = p.wind_halfwidth;
  spec_.names = {"wind_x", "wind_z"};
  spec_.ind_ranges = {{-w, w}, {-w, w}};
  spec_.ood_eval_ranges = {{-2 * w, 2 * w}, {-2 * w, 2 * w}};
  spec_.grid_resolution = p.grid_resolution;
  spec_.validate();
}

bool WindyPointMass::context_valid(const Context& c) const {
  if (c.values.size() != 2) return false;
  return std::isfinite(c.values[0]) && std::isfinite(c.values[1]);
}

std::vector<double> WindyPointMass::reset(const Context& c,
                                          std::uint64_t seed) {
  if (!context_valid(c)) throw ConfigError("windy_pointmass: bad context");
  wind_[0] = c.values[0];
  wind_[1] = c.values[1];
  Rng rng(seed);
  const double theta = rng.uniform(0.0, 6.283185307179586477);
  const double r = params_.spawn_radius * std::sqrt(rng.uniform());
  pos_[0] = r * std::cos(theta);
  pos_[1] = r * std::sin(theta);
  vel_[0] = vel_[1] = 0.0;
  steps_ = 0;
  episode_over_ = false;
  return observe();
}

StepResult WindyPointMass::step(const std::vector<double>& action) {
  if (episode_over_) throw UsageError("windy_pointmass: step after done");
  if (action.size() != 2 || !std::isfinite(action[0]) ||
      !std::isfinite(action[1]))
    throw TrainingError("windy_pointmass: non-finite action");
  const double ax = std::clamp(action[0], -1.0, 1.0);
  const double az = std::clamp(action[1], -1.0, 1.0);
  const double k = params_.f_max / params_.mass;
  vel_[0] = (1.0 - params_.drag) * vel_[0] + params_.dt * (ax * k + wind_[0]);
  vel_[1] = (1.0 - params_.drag) * vel_[1] + params_.dt * (az * k + wind_[1]);
  pos_[0] += params_.dt * vel_[0];
  pos_[1] += params_.dt * vel_[1];
  ++steps_;

  StepResult r;
  const double dist = std::hypot(pos_[0], pos_[1]);
  r.reward = -dist * params_.dt;
  if (dist < params_.goal_radius) {
    r.reward += params_.goal_bonus;
    r.done = true;
    r.success = true;
  } else if (steps_ >= params_.horizon) {
    r.done = true;
  }
  episode_over_ = r.done;
  r.obs = observe();
  return r;
}

std::vector<double> WindyPointMass::scripted_action(
    const std::vector<double>& obs) const {
  // Proportional navigation toward the goal, wind-agnostic.
  return {std::clamp(params_.scripted_kp * obs[0], -1.0, 1.0),
          std::clamp(params_.scripted_kp * obs[1], -1.0, 1.0)};
}

std::unique_ptr<Env> WindyPointMass::clone_fresh() const {
  return std::make_unique<WindyPointMass>(params_);
}

void WindyPointMass::perturb_dynamics(double factor) {
  if (factor <= 0.0) throw ConfigError("perturb factor must be positive");
  params_.drag *= factor;
  params_.f_max /= factor;
}

std::vector<double> WindyPointMass::observe() const {
  // Goal-relative position and velocity; wind is never observed.
  return {-pos_[0], -pos_[1], vel_[0], vel_[1]};
}

WindyPointMass::Params WindyPointMass::params_from(const EnvOverrides& ov) {
  Params p;
  for (const auto& [k, v] : ov) {
    if (k == "dt") p.dt = v;
    else if (k == "horizon") p.horizon = static_cast<int>(v);
    else if (k == "f_max") p.f_max = v;
    else if (k == "drag") p.drag = v;
    else if (k == "mass") p.mass = v;
    else if (k == "goal_radius") p.goal_radius = v;
    else if (k == "spawn_radius") p.spawn_radius = v;
    else if (k == "goal_bonus") p.goal_bonus = v;
    else if (k == "wind_halfwidth") p.wind_halfwidth = v;
    else if (k == "scripted_kp") p.scripted_kp = v;
    else if (k == "grid_resolution") p.grid_resolution = static_cast<int>(v);
    else throw ConfigError("windy_pointmass: unknown env key: " + k);
  }
  return p;
}

}  // namespace sparc::env
