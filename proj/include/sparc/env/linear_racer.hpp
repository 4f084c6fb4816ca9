#pragma once

#include "sparc/env/env.hpp"

namespace sparc::env {

/// 1-D track with piecewise speed limits. Per step:
///   dv = throttle * power * power_scale / (mass * mass_scale * max(v, v_floor))
///        - c_d * v^2,
/// v clamped at 0. Exceeding the local limit by more than 20% for more than
/// 10 consecutive steps fails the lap. Reward is scaled progress minus a
/// limit-violation penalty. Context is (power_scale, mass_scale); IND is
/// [0.75, 1.25] per axis, evaluation covers [0.5, 1.5].
class LinearRacer final : public Env {
 public:
  struct Params {
    double dt = 0.1;
    int horizon = 600;
    double length = 400.0;
    // (segment end position, speed limit); last end must equal length
    std::vector<std::pair<double, double>> segments = {
        {100.0, 25.0}, {160.0, 10.0}, {260.0, 20.0}, {310.0, 8.0},
        {400.0, 25.0}};
    double power = 60.0;
    double c_d = 0.004;
    double v_floor = 4.0;
    double mass = 1.0;
    double violation_ratio = 1.2;
    int violation_steps = 10;
    double progress_scale = 0.1;
    double excess_penalty = 0.5;  // per (m/s over limit) per second
    double v0_max = 5.0;
    double ind_lo = 0.75, ind_hi = 1.25;
    double eval_lo = 0.50, eval_hi = 1.50;
    int grid_resolution = 21;
    // scripted follower
    double scripted_gain = 0.5;
    double scripted_brake_decel = 1.8;  // conservative braking estimate
  };

  LinearRacer() : LinearRacer(Params()) {}
  explicit LinearRacer(const Params& p);

  std::string name() const override { return "linear_racer"; }
  int obs_dim() const override { return 5; }
  int action_dim() const override { return 1; }
  int horizon() const override { return params_.horizon; }
  MetricKind metric_kind() const override { return MetricKind::LapTime; }
  const ContextSpec& context_spec() const override { return spec_; }

  bool context_valid(const Context& c) const override;
  std::vector<double> reset(const Context& c, std::uint64_t seed) override;
  StepResult step(const std::vector<double>& action) override;
  std::vector<double> scripted_action(
      const std::vector<double>& obs) const override;
  std::unique_ptr<Env> clone_fresh() const override;
  void perturb_dynamics(double factor) override;

  const Params& params() const { return params_; }
  double limit_at(double pos) const;

  static Params params_from(const EnvOverrides& ov);

 private:
  std::vector<double> observe() const;
  std::size_t segment_at(double pos) const;

  Params params_;
  ContextSpec spec_;
  double power_scale_ = 1.0, mass_scale_ = 1.0;
  double pos_ = 0.0, v_ = 0.0;
  int steps_ = 0;
  int viol_run_ = 0;
  bool episode_over_ = true;
};

}  // namespace sparc::env
