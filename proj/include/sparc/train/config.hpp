#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "sparc/env/env.hpp"
#include "sparc/qrsac/qrsac.hpp"

namespace sparc::train {

/// Declarative run configuration. Flat key-value text with one section per
/// concern; hyperparameter defaults follow the training table (small-task
/// column). Parsing rejects unknown keys except under [env], whose numeric
/// keys pass through to the environment, and [meta], which is ignored.
struct RunConfig {
  // [run]
  std::string method = "sparc";
  std::string env = "windy_pointmass";
  std::uint64_t seed = 0;
  std::uint64_t total_updates = 100000;
  std::uint64_t eval_every = 5000;
  int eval_episodes = 4;
  std::string rollout_policy = "adapter";  // adapter | expert
  std::string precision = "f32";           // f32 | f64
  std::uint64_t log_every = 1;

  // [hyper]
  int batch_size = 32;
  int history_len = 50;
  double lr_adapter = 3e-4;
  double lr_sac = 3e-4;
  double tau = 0.005;
  double critic_clip_norm = 10.0;
  double gamma = 0.99;
  double entropy_alpha = 0.01;
  int n_quantiles = 32;
  int trunk_width = 256;
  int latent_width = 32;
  int hist_embed_width = 32;
  int conv_filters = 32;

  // [train]
  std::uint64_t warmup_steps = 1000;
  std::uint64_t buffer_capacity = 100000;
  double updates_per_step = 1.0;
  int copy_every = 1;
  double rma_phase1_fraction = 2.0 / 3.0;

  // [rollout]
  int workers = 4;
  std::uint64_t snapshot_cadence = 200;
  std::uint64_t queue_capacity = 4096;

  // [env]
  env::EnvOverrides env_overrides;

  // [eval]
  int grid_resolution = 21;
  int episodes_per_cell = 3;

  policy::Method method_enum() const { return policy::parse_method(method); }
  policy::PolicyWidths widths() const {
    return {trunk_width, latent_width, hist_embed_width, conv_filters};
  }
  qrsac::Hyper hyper() const {
    qrsac::Hyper h;
    h.lr_sac = lr_sac;
    h.lr_adapter = lr_adapter;
    h.gamma = gamma;
    h.tau = tau;
    h.entropy_alpha = entropy_alpha;
    h.critic_clip_norm = critic_clip_norm;
    h.copy_every = copy_every;
    h.n_quantiles = n_quantiles;
    return h;
  }
  void validate() const;

  static RunConfig parse_file(const std::string& path);
  static RunConfig parse_string(const std::string& text);
  /// Applies a "section.key=value" override.
  void set_override(const std::string& spec);
  /// Deterministic resolved emission (no [meta]).
  std::string emit() const;
  /// emit() plus a [meta] section (code version, start time).
  std::string manifest(const std::string& started_at) const;
};

}  // namespace sparc::train
