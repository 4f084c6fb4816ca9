#include "sparc/env/linear_racer.hpp"

#include <cmath>

#include "sparc/nn/rng.hpp"

namespace sparc::env {

LinearRacer::LinearRacer(const Params& p) : params_(p) {
  if (params_.segments.empty() ||
      params_.segments.back().first != params_.length)
    throw ConfigError("linear_racer: segments must cover the track");
  double prev = 0.0;
  for (const auto& [end, lim] : params_.segments) {
    if (end <= prev || lim <= 0.0)
      throw ConfigError("linear_racer: bad segment table");
    prev = end;
  }
  spec_.names = {"power_scale", "mass_scale"};
  spec_.ind_ranges = {{p.ind_lo, p.ind_hi}, {p.ind_lo, p.ind_hi}};
  spec_.ood_eval_ranges = {{p.eval_lo, p.eval_hi}, {p.eval_lo, p.eval_hi}};
  spec_.grid_resolution = p.grid_resolution;
  spec_.validate();
}

bool LinearRacer::context_valid(const Context& c) const {
  if (c.values.size() != 2) return false;
  return std::isfinite(c.values[0]) && std::isfinite(c.values[1]) &&
         c.values[0] > 0.0 && c.values[1] > 0.0;
}

std::size_t LinearRacer::segment_at(double pos) const {
  for (std::size_t i = 0; i < params_.segments.size(); ++i)
    if (pos < params_.segments[i].first) return i;
  return params_.segments.size() - 1;
}

double LinearRacer::limit_at(double pos) const {
  return params_.segments[segment_at(pos)].second;
}

std::vector<double> LinearRacer::reset(const Context& c, std::uint64_t seed) {
  if (!context_valid(c))
    throw ConfigError("linear_racer: invalid context (scales must be > 0)");
  power_scale_ = c.values[0];
  mass_scale_ = c.values[1];
  Rng rng(seed);
  pos_ = 0.0;
  v_ = rng.uniform(0.0, params_.v0_max);
  steps_ = 0;
  viol_run_ = 0;
  episode_over_ = false;
  return observe();
}

StepResult LinearRacer::step(const std::vector<double>& action) {
  if (episode_over_) throw UsageError("linear_racer: step after done");
  if (action.size() != 1 || !std::isfinite(action[0]))
    throw TrainingError("linear_racer: non-finite action");
  const double throttle = std::clamp(action[0], -1.0, 1.0);
  const double thrust = throttle * params_.power * power_scale_ /
                        (params_.mass * mass_scale_ * std::max(v_, params_.v_floor));
  const double accel = thrust - params_.c_d * v_ * v_;
  v_ = std::max(0.0, v_ + params_.dt * accel);
  const double dp = params_.dt * v_;
  pos_ += dp;
  ++steps_;

  StepResult r;
  const double limit = limit_at(std::min(pos_, params_.length - 1e-9));
  const double excess = v_ - limit;
  r.reward = params_.progress_scale * dp -
             params_.excess_penalty * std::max(0.0, excess) * params_.dt;
  if (v_ > params_.violation_ratio * limit)
    ++viol_run_;
  else
    viol_run_ = 0;

  if (viol_run_ > params_.violation_steps) {
    r.done = true;  // failed lap
  } else if (pos_ >= params_.length) {
    r.done = true;
    r.success = true;
    const double frac = dp > 0.0 ? 1.0 - (pos_ - params_.length) / dp : 1.0;
    r.lap_time = (steps_ - 1 + frac) * params_.dt;
  } else if (steps_ >= params_.horizon) {
    r.done = true;
  }
  episode_over_ = r.done;
  r.obs = observe();
  return r;
}

std::vector<double> LinearRacer::observe() const {
  const double pos = std::min(pos_, params_.length);
  const std::size_t seg = segment_at(std::min(pos, params_.length - 1e-9));
  const double limit = params_.segments[seg].second;
  const double seg_end = params_.segments[seg].first;
  const double next_limit = seg + 1 < params_.segments.size()
                                ? params_.segments[seg + 1].second
                                : limit;
  return {v_ * 0.1, limit * 0.1, next_limit * 0.1, (seg_end - pos) * 0.01,
          (params_.length - pos) * 0.01};
}

std::vector<double> LinearRacer::scripted_action(
    const std::vector<double>& obs) const {
  const double v = obs[0] * 10.0;
  const double limit = obs[1] * 10.0;
  const double next_limit = obs[2] * 10.0;
  const double dist_next = obs[3] * 100.0;
  double target = limit;
  if (next_limit < limit && v > next_limit) {
    const double braking =
        (v * v - next_limit * next_limit) / (2.0 * params_.scripted_brake_decel);
    if (dist_next <= braking + 2.0 * v * params_.dt) target = next_limit;
  }
  return {std::clamp(params_.scripted_gain * (target - v), -1.0, 1.0)};
}

std::unique_ptr<Env> LinearRacer::clone_fresh() const {
  return std::make_unique<LinearRacer>(params_);
}

void LinearRacer::perturb_dynamics(double factor) {
  if (factor <= 0.0) throw ConfigError("perturb factor must be positive");
  params_.c_d *= factor;
  params_.power /= factor;
}

LinearRacer::Params LinearRacer::params_from(const EnvOverrides& ov) {
  Params p;
  for (const auto& [k, v] : ov) {
    if (k == "dt") p.dt = v;
    else if (k == "horizon") p.horizon = static_cast<int>(v);
    else if (k == "length") p.length = v;
    else if (k == "power") p.power = v;
    else if (k == "c_d") p.c_d = v;
    else if (k == "v_floor") p.v_floor = v;
    else if (k == "mass") p.mass = v;
    else if (k == "violation_ratio") p.violation_ratio = v;
    else if (k == "violation_steps") p.violation_steps = static_cast<int>(v);
    else if (k == "progress_scale") p.progress_scale = v;
    else if (k == "excess_penalty") p.excess_penalty = v;
    else if (k == "v0_max") p.v0_max = v;
    else if (k == "ind_lo") p.ind_lo = v;
    else if (k == "ind_hi") p.ind_hi = v;
    else if (k == "eval_lo") p.eval_lo = v;
    else if (k == "eval_hi") p.eval_hi = v;
    else if (k == "grid_resolution") p.grid_resolution = static_cast<int>(v);
    else if (k == "scripted_gain") p.scripted_gain = v;
    else if (k == "scripted_brake_decel") p.scripted_brake_decel = v;
    else throw ConfigError("linear_racer: unknown env key: " + k);
  }
  return p;
}

}  // namespace sparc::env
