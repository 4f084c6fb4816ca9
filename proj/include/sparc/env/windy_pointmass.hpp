#pragma once

#include "sparc/env/env.hpp"

namespace sparc::env {

/// 2-D point mass steered toward a goal at the origin under constant wind.
/// Per step: v' = (1 - drag) * v + dt * (a * f_max / mass + wind),
///           p' = p + dt * v'.
/// Reward is -dist * dt plus a bonus on entering the goal disk. Context is
/// the wind vector (wind_x, wind_z) in acceleration units; IND winds live
/// in [-w, w] per axis, the evaluation box doubles that to [-2w, 2w].
class WindyPointMass final : public Env {
 public:
  struct Params {
    double dt = 0.05;
    int horizon = 400;
    double f_max = 5.0;
    double drag = 0.05;        // per-step velocity decay factor
    double mass = 1.0;
    double goal_radius = 0.5;
    double spawn_radius = 4.0;
    double goal_bonus = 10.0;
    double wind_halfwidth = 2.5;  // w; eval box uses 2w
    double scripted_kp = 1.0;
    int grid_resolution = 21;
  };

  WindyPointMass() : WindyPointMass(Params()) {}
  explicit WindyPointMass(const Params& p);

  std::string name() const override { return "windy_pointmass"; }
  int obs_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  int horizon() const override { return params_.horizon; }
  MetricKind metric_kind() const override { return MetricKind::Return; }
  const ContextSpec& context_spec() const override { return spec_; }

  bool context_valid(const Context& c) const override;
  std::vector<double> reset(const Context& c, std::uint64_t seed) override;
  StepResult step(const std::vector<double>& action) override;
  std::vector<double> scripted_action(
      const std::vector<double>& obs) const override;
  std::unique_ptr<Env> clone_fresh() const override;
  void perturb_dynamics(double factor) override;

  const Params& params() const { return params_; }

  static Params params_from(const EnvOverrides& ov);

 private:
  std::vector<double> observe() const;

  Params params_;
  ContextSpec spec_;
  double wind_[2] = {0, 0};
  double pos_[2] = {0, 0};
  double vel_[2] = {0, 0};
  int steps_ = 0;
  bool episode_over_ = true;
};

}  // namespace sparc::env
