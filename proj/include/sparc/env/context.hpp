#pragma once

#include <string>
#include <vector>

#include "sparc/common.hpp"
#include "sparc/nn/rng.hpp"

namespace sparc::env {

/// Privileged environment parameters, one real value per named feature.
struct Context {
  std::vector<double> values;
};

/// Per-feature training (IND) and evaluation (OOD superset) intervals plus
/// the lattice resolution used to build evaluation grids.
struct ContextSpec {
  std::vector<std::string> names;
  std::vector<std::pair<double, double>> ind_ranges;
  std::vector<std::pair<double, double>> ood_eval_ranges;
  int grid_resolution = 21;

  std::size_t dim() const { return names.size(); }
  void validate() const;
  bool in_ind_box(const Context& c) const;
};

/// Independent uniform draw per feature over its IND interval.
Context sample_ind_context(const ContextSpec& spec, Rng& rng);

struct GridCell {
  Context context;
  bool is_ood = false;
};

/// Full lattice over the evaluation ranges at grid_resolution points per
/// axis. A cell is IND iff every coordinate lies inside the IND interval.
std::vector<GridCell> eval_grid_contexts(const ContextSpec& spec);

}  // namespace sparc::env
