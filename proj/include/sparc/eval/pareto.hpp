#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparc/common.hpp"

namespace sparc::eval {

/// Per-checkpoint metric vector over the predetermined IND evaluation
/// settings (all metrics oriented higher-is-better).
struct CheckpointScore {
  std::uint64_t step = 0;
  std::vector<double> metrics;
  std::string path;
};

/// True iff a dominates b: a >= b on every metric and a > b on at least one.
bool dominates(const std::vector<double>& a, const std::vector<double>& b);

/// Index of the selected checkpoint: a non-dominated point with the highest
/// metric mean; ties broken toward the latest step.
std::size_t pareto_select(const std::vector<CheckpointScore>& scores);

}  // namespace sparc::eval
