#pragma once

#include <functional>
#include <iosfwd>
#include <optional>

#include <json.hpp>

#include "sparc/env/env.hpp"
#include "sparc/env/history.hpp"

namespace sparc::eval {

/// Deterministic acting policy under evaluation. `act` receives whatever
/// the method's input contract admits: ctx is null when the context is
/// withheld, hist is null for history-free policies.
struct EvalPolicy {
  std::string name;
  int hist_len = 1;
  bool needs_hist = false;
  bool needs_ctx = false;
  std::function<std::vector<double>(const std::vector<double>& obs,
                                    const env::HistoryBuffer* hist,
                                    const env::Context* ctx)>
      act;
};

/// Scripted reference controller wrapped as an EvalPolicy.
EvalPolicy scripted_policy(const env::Env& proto);

struct EvalCell {
  std::vector<double> context;
  bool is_ood = false;
  bool valid = true;
  double mean_metric = 0.0;   // mean return, or mean successful lap time
  double success_pct = 0.0;   // share of successful episodes, in percent
  double ratio = 0.0;         // scripted-normalized value (see normalized_ratio)
  int n_episodes = 0;
};

struct GridSummary {
  double mean_metric = 0, sem_metric = 0;
  double success_pct = 0;
  double mean_ratio = 0, sem_ratio = 0;
  int n_cells = 0;
};

struct EvalGrid {
  std::vector<std::string> axis_names;
  std::vector<double> axis1, axis2;
  env::MetricKind metric_kind = env::MetricKind::Return;
  std::vector<EvalCell> cells;  // row-major, axis2 fastest
  std::vector<std::string> log;

  GridSummary summarize(bool ood) const;
  nlohmann::ordered_json summary_json() const;
  void to_csv(std::ostream& os) const;
  static EvalGrid from_csv(std::istream& is);
};

/// agent/scripted on success; the failure penalty constant otherwise.
/// scripted_metric must be positive (the reference completed).
double normalized_ratio(double agent_metric, double scripted_metric,
                        bool success);

inline constexpr double kFailurePenaltyRatio = 2.0;

/// Scripted reference metric per grid cell, computed once and cached as
/// CSV (`axis1,axis2,metric,success`) when cache_path is non-empty.
std::vector<std::pair<double, bool>> scripted_reference(
    const env::Env& proto, const std::vector<env::GridCell>& cells,
    int episodes_per_cell, std::uint64_t seed, const std::string& cache_path);

/// Evaluates `pol` over the environment's full context lattice.
/// Deterministic given `seed`; cells fan out over kernel threads.
EvalGrid evaluate_grid(const env::Env& proto, const EvalPolicy& pol,
                       int episodes_per_cell, std::uint64_t seed,
                       const std::string& scripted_cache_path = "");

/// Cellwise a - b (positive: first argument better on that cell).
EvalGrid delta_grid(const EvalGrid& a, const EvalGrid& b);

/// Delta CSV: same schema minus the success columns, with a header comment
/// recording both source hashes.
void write_delta_csv(std::ostream& os, const EvalGrid& delta,
                     std::uint64_t hash_a, std::uint64_t hash_b);

/// FNV-1a over a byte string (stable across runs; used for provenance).
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace sparc::eval
