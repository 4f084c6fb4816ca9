#include "sparc/env/context.hpp"

#include <cmath>

namespace sparc::env {

void ContextSpec::validate() const {
  if (names.empty()) throw ConfigError("context spec: no features");
  if (ind_ranges.size() != names.size() ||
      ood_eval_ranges.size() != names.size())
    throw ConfigError("context spec: range count mismatch");
  if (grid_resolution < 2)
    throw ConfigError("context spec: grid resolution must be >= 2");
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& [ilo, ihi] = ind_ranges[i];
    const auto& [olo, ohi] = ood_eval_ranges[i];
    if (!(ilo <= ihi) || !(olo <= ohi))
      throw ConfigError("context spec: inverted range for " + names[i]);
    if (ilo < olo || ihi > ohi)
      throw ConfigError("context spec: IND range not inside eval range for " +
                        names[i]);
  }
}

bool ContextSpec::in_ind_box(const Context& c) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (c.values[i] < ind_ranges[i].first || c.values[i] > ind_ranges[i].second)
      return false;
  return true;
}

Context sample_ind_context(const ContextSpec& spec, Rng& rng) {
  Context c;
  c.values.reserve(spec.dim());
  for (const auto& [lo, hi] : spec.ind_ranges)
    c.values.push_back(rng.uniform(lo, hi));
  return c;
}

std::vector<GridCell> eval_grid_contexts(const ContextSpec& spec) {
  spec.validate();
  const int res = spec.grid_resolution;
  const std::size_t d = spec.dim();
  std::vector<std::vector<double>> axes(d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto& [lo, hi] = spec.ood_eval_ranges[i];
    for (int k = 0; k < res; ++k)
      axes[i].push_back(lo + (hi - lo) * k / (res - 1));
  }
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= axes[i].size();
  std::vector<GridCell> cells;
  cells.reserve(total);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t n = 0; n < total; ++n) {
    GridCell cell;
    cell.context.values.resize(d);
    for (std::size_t i = 0; i < d; ++i) cell.context.values[i] = axes[i][idx[i]];
    cell.is_ood = !spec.in_ind_box(cell.context);
    cells.push_back(std::move(cell));
    for (std::size_t i = d; i-- > 0;) {  // row-major advance, last axis fastest
      if (++idx[i] < axes[i].size()) break;
      idx[i] = 0;
    }
  }
  return cells;
}

}  // namespace sparc::env
