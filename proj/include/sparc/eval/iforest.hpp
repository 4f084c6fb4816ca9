#pragma once

#include <vector>

#include "sparc/nn/rng.hpp"

namespace sparc::eval {

struct AnomalySplit {
  std::vector<double> scores;  // in (0, 1); higher = more anomalous
  std::vector<bool> is_ood;    // exactly ceil(rho * n) rows marked
};

/// Expected path length of an unsuccessful BST search, c(n). Exact
/// harmonic sums for small n, the asymptotic expansion beyond.
double avg_path_length(std::size_t n);

/// Isolation forest: random axis (skipping constant-range axes), uniform
/// split point, path-length scores s = 2^(-E[h]/c(subsample)). The top
/// rho-fraction by score is marked OOD (ties broken by row index).
AnomalySplit isolation_forest_split(
    const std::vector<std::vector<double>>& features, double rho, int trees,
    int subsample, Rng& rng);

}  // namespace sparc::eval
