#include "sparc/eval/pareto.hpp"

#include <numeric>

namespace sparc::eval {

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw ConfigError("pareto: metric vectors differ in length");
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

std::size_t pareto_select(const std::vector<CheckpointScore>& scores) {
  if (scores.empty()) throw ConfigError("pareto: no checkpoints to select");
  std::size_t best = scores.size();
  double best_mean = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < scores.size() && !dominated; ++j)
      if (j != i && dominates(scores[j].metrics, scores[i].metrics))
        dominated = true;
    if (dominated) continue;
    const double mean =
        std::accumulate(scores[i].metrics.begin(), scores[i].metrics.end(),
                        0.0) /
        static_cast<double>(scores[i].metrics.size());
    if (best == scores.size() || mean > best_mean ||
        (mean == best_mean && scores[i].step >= scores[best].step)) {
      best = i;
      best_mean = mean;
    }
  }
  return best;
}

}  // namespace sparc::eval
