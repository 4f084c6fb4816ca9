#include "sparc/eval/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparc/common.hpp"

namespace sparc::eval {

double avg_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  double harmonic;
  if (n <= 1024) {
    harmonic = 0.0;
    for (std::size_t i = 1; i + 1 <= n; ++i)
      harmonic += 1.0 / static_cast<double>(i);
  } else {
    const double m = static_cast<double>(n - 1);
    harmonic = std::log(m) + 0.5772156649015328606 + 1.0 / (2.0 * m);
  }
  return 2.0 * harmonic -
         2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
}

namespace {

struct Node {
  int axis = -1;
  double split = 0;
  int left = -1, right = -1;
  std::size_t size = 0;  // leaf population
};

struct Tree {
  std::vector<Node> nodes;
};

int build(Tree& tree, const std::vector<std::vector<double>>& rows,
          std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
          int depth, int max_depth, Rng& rng) {
  const int me = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  const std::size_t n = hi - lo;
  if (n <= 1 || depth >= max_depth) {
    tree.nodes[me].size = n;
    return me;
  }
  const std::size_t dims = rows[idx[lo]].size();
  // candidate axes: those with a spread in this node's sample
  std::vector<int> axes;
  std::vector<std::pair<double, double>> ranges(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    double mn = rows[idx[lo]][d], mx = mn;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      mn = std::min(mn, rows[idx[i]][d]);
      mx = std::max(mx, rows[idx[i]][d]);
    }
    ranges[d] = {mn, mx};
    if (mx > mn) axes.push_back(static_cast<int>(d));
  }
  if (axes.empty()) {  // duplicated points: isolate no further
    tree.nodes[me].size = n;
    return me;
  }
  const int axis = axes[rng.uniform_index(axes.size())];
  const double split =
      rng.uniform(ranges[axis].first, ranges[axis].second);
  auto mid_it = std::stable_partition(
      idx.begin() + lo, idx.begin() + hi,
      [&](std::size_t r) { return rows[r][axis] < split; });
  const std::size_t mid = static_cast<std::size_t>(mid_it - idx.begin());
  if (mid == lo || mid == hi) {  // degenerate split (boundary draw)
    tree.nodes[me].size = n;
    return me;
  }
  tree.nodes[me].axis = axis;
  tree.nodes[me].split = split;
  tree.nodes[me].left = build(tree, rows, idx, lo, mid, depth + 1, max_depth,
                              rng);
  tree.nodes[me].right = build(tree, rows, idx, mid, hi, depth + 1, max_depth,
                               rng);
  return me;
}

double path_length(const Tree& tree, const std::vector<double>& x) {
  int node = 0;
  double depth = 0;
  while (tree.nodes[node].axis >= 0) {
    node = x[tree.nodes[node].axis] < tree.nodes[node].split
               ? tree.nodes[node].left
               : tree.nodes[node].right;
    depth += 1.0;
  }
  return depth + avg_path_length(tree.nodes[node].size);
}

}  // namespace

AnomalySplit isolation_forest_split(
    const std::vector<std::vector<double>>& features, double rho, int trees,
    int subsample, Rng& rng) {
  const std::size_t n = features.size();
  if (n < 5) throw ConfigError("isolation forest: need at least 5 rows");
  if (rho <= 0.0 || rho > 1.0)
    throw ConfigError("isolation forest: rho must be in (0, 1]");
  for (const auto& row : features) {
    if (row.size() != features.front().size())
      throw ConfigError("isolation forest: ragged feature matrix");
    for (double v : row)
      if (!std::isfinite(v))
        throw ConfigError("isolation forest: non-finite feature");
  }
  const std::size_t psi = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::max(2, subsample)));
  const int max_depth =
      static_cast<int>(std::ceil(std::log2(static_cast<double>(psi))));

  std::vector<double> pathsum(n, 0.0);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (int t = 0; t < trees; ++t) {
    // subsample without replacement (partial Fisher-Yates)
    for (std::size_t i = 0; i < psi; ++i) {
      const std::size_t j = i + rng.uniform_index(n - i);
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> idx(pool.begin(), pool.begin() + psi);
    Tree tree;
    build(tree, features, idx, 0, psi, 0, max_depth, rng);
    for (std::size_t i = 0; i < n; ++i)
      pathsum[i] += path_length(tree, features[i]);
  }

  AnomalySplit split;
  split.scores.resize(n);
  const double norm = avg_path_length(psi);
  for (std::size_t i = 0; i < n; ++i)
    split.scores[i] =
        std::pow(2.0, -(pathsum[i] / trees) / norm);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    if (split.scores[a] != split.scores[b])
      return split.scores[a] > split.scores[b];
    return a < b;
  });
  const auto k = static_cast<std::size_t>(
      std::ceil(rho * static_cast<double>(n)));
  split.is_ood.assign(n, false);
  for (std::size_t i = 0; i < k && i < n; ++i) split.is_ood[order[i]] = true;
  return split;
}

}  // namespace sparc::eval
