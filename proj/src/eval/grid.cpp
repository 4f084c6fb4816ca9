#include "sparc/eval/grid.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sparc/nn/kernels.hpp"
#include "sparc/nn/rng.hpp"

namespace sparc::eval {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct EpisodeOutcome {
  double ret = 0;
  bool success = false;
  double lap_time = 0;
};

EpisodeOutcome run_episode(env::Env& e, const EvalPolicy& pol,
                           const env::Context& ctx, std::uint64_t seed) {
  env::HistoryBuffer hist(pol.hist_len, e.obs_dim(), e.action_dim());
  auto obs = e.reset(ctx, seed);
  EpisodeOutcome out;
  while (true) {
    auto a = pol.act(obs, pol.needs_hist ? &hist : nullptr,
                     pol.needs_ctx ? &ctx : nullptr);
    auto r = e.step(a);
    hist.push(obs, a);
    obs = r.obs;
    out.ret += r.reward;
    if (r.done) {
      out.success = r.success;
      out.lap_time = r.lap_time;
      break;
    }
  }
  return out;
}

/// Per-cell aggregate under the env's metric convention.
struct CellStats {
  double metric = 0;     // mean return / mean successful lap time
  double success_pct = 0;
  bool any_success = false;
  bool valid = true;
};

CellStats eval_cell(const env::Env& proto, const EvalPolicy& pol,
                    const env::Context& ctx, int episodes,
                    std::uint64_t seed, std::size_t cell_index) {
  CellStats st;
  auto e = proto.clone_fresh();
  if (!e->context_valid(ctx)) {
    st.valid = false;
    return st;
  }
  double ret_sum = 0, lap_sum = 0;
  int successes = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    const auto s = seed_stream(
        seed, "grid/" + std::to_string(cell_index) + "/" + std::to_string(ep));
    auto out = run_episode(*e, pol, ctx, s);
    ret_sum += out.ret;
    if (out.success) {
      ++successes;
      lap_sum += out.lap_time;
    }
  }
  st.any_success = successes > 0;
  st.success_pct = 100.0 * successes / episodes;
  if (proto.metric_kind() == env::MetricKind::LapTime)
    st.metric = successes > 0 ? lap_sum / successes
                              : std::numeric_limits<double>::quiet_NaN();
  else
    st.metric = ret_sum / episodes;
  return st;
}

}  // namespace

double normalized_ratio(double agent_metric, double scripted_metric,
                        bool success) {
  if (!(scripted_metric > 0.0))
    throw ConfigError("normalized_ratio: reference metric must be positive");
  return success ? agent_metric / scripted_metric : kFailurePenaltyRatio;
}

EvalPolicy scripted_policy(const env::Env& proto) {
  EvalPolicy pol;
  pol.name = "scripted";
  pol.hist_len = 1;
  auto env_ptr = std::shared_ptr<env::Env>(proto.clone_fresh());
  pol.act = [env_ptr](const std::vector<double>& obs,
                      const env::HistoryBuffer*, const env::Context*) {
    return env_ptr->scripted_action(obs);
  };
  return pol;
}

std::vector<std::pair<double, bool>> scripted_reference(
    const env::Env& proto, const std::vector<env::GridCell>& cells,
    int episodes_per_cell, std::uint64_t seed,
    const std::string& cache_path) {
  if (!cache_path.empty() && std::filesystem::exists(cache_path)) {
    std::ifstream is(cache_path);
    std::string line;
    std::getline(is, line);  // header
    std::vector<std::pair<double, bool>> out;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string a, b, m, s;
      std::getline(ls, a, ',');
      std::getline(ls, b, ',');
      std::getline(ls, m, ',');
      std::getline(ls, s, ',');
      out.emplace_back(std::stod(m), s == "1");
    }
    if (out.size() == cells.size()) return out;
  }
  auto pol = scripted_policy(proto);
  std::vector<std::pair<double, bool>> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto st = eval_cell(proto, pol, cells[i].context, episodes_per_cell, seed,
                        i);
    out[i] = {st.metric, st.any_success};
  }
  if (!cache_path.empty()) {
    std::ofstream os(cache_path, std::ios::trunc);
    os << "axis1,axis2,metric,success\n";
    for (std::size_t i = 0; i < cells.size(); ++i)
      os << fmt(cells[i].context.values[0]) << ","
         << fmt(cells[i].context.values[1]) << "," << fmt(out[i].first) << ","
         << (out[i].second ? 1 : 0) << "\n";
  }
  return out;
}

EvalGrid evaluate_grid(const env::Env& proto, const EvalPolicy& pol,
                       int episodes_per_cell, std::uint64_t seed,
                       const std::string& scripted_cache_path) {
  if (episodes_per_cell <= 0)
    throw ConfigError("evaluate_grid: episodes_per_cell must be positive");
  const auto& spec = proto.context_spec();
  if (spec.dim() != 2)
    throw ConfigError("evaluate_grid: expected a 2-axis context spec");
  auto cells = env::eval_grid_contexts(spec);

  EvalGrid grid;
  grid.axis_names = spec.names;
  grid.metric_kind = proto.metric_kind();
  const int res = spec.grid_resolution;
  for (int k = 0; k < res; ++k) {
    grid.axis1.push_back(spec.ood_eval_ranges[0].first +
                         (spec.ood_eval_ranges[0].second -
                          spec.ood_eval_ranges[0].first) *
                             k / (res - 1));
    grid.axis2.push_back(spec.ood_eval_ranges[1].first +
                         (spec.ood_eval_ranges[1].second -
                          spec.ood_eval_ranges[1].first) *
                             k / (res - 1));
  }
  auto reference = scripted_reference(proto, cells, episodes_per_cell,
                                      seed_stream(seed, "scripted"),
                                      scripted_cache_path);
  grid.cells.resize(cells.size());

  const int nt = nn::kernel_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) if (nt > 1) schedule(dynamic)
#endif
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto st = eval_cell(proto, pol, cells[i].context, episodes_per_cell, seed,
                        i);
    EvalCell& c = grid.cells[i];
    c.context = cells[i].context.values;
    c.is_ood = cells[i].is_ood;
    c.valid = st.valid;
    c.n_episodes = st.valid ? episodes_per_cell : 0;
    if (!st.valid) continue;
    c.mean_metric = st.metric;
    c.success_pct = st.success_pct;
    if (proto.metric_kind() == env::MetricKind::LapTime) {
      const auto& [ref_metric, ref_ok] = reference[i];
      if (!ref_ok) {
        if (!cells[i].is_ood)
          throw ConfigError(
              "evaluate_grid: scripted reference failed an IND cell");
        c.valid = false;
        continue;
      }
      c.ratio = normalized_ratio(c.mean_metric, ref_metric, st.any_success);
    } else {
      // return-metric environments: scripted-relative return index
      c.ratio = c.mean_metric - reference[i].first;
    }
  }
  // fixed-order log pass (kept out of the parallel loop)
  for (std::size_t i = 0; i < grid.cells.size(); ++i)
    if (!grid.cells[i].valid)
      grid.log.push_back("cell " + std::to_string(i) +
                         " excluded from aggregates");
  return grid;
}

GridSummary EvalGrid::summarize(bool ood) const {
  GridSummary s;
  std::vector<double> metrics, ratios;
  double succ = 0;
  for (const auto& c : cells) {
    if (!c.valid || c.is_ood != ood) continue;
    if (std::isfinite(c.mean_metric)) metrics.push_back(c.mean_metric);
    ratios.push_back(c.ratio);
    succ += c.success_pct;
    ++s.n_cells;
  }
  if (s.n_cells == 0) return s;
  auto mean_sem = [](const std::vector<double>& v, double& mean, double& sem) {
    if (v.empty()) {
      mean = sem = 0;
      return;
    }
    mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    sem = v.size() > 1 ? std::sqrt(var / (static_cast<double>(v.size()) - 1) /
                                   static_cast<double>(v.size()))
                       : 0.0;
  };
  mean_sem(metrics, s.mean_metric, s.sem_metric);
  mean_sem(ratios, s.mean_ratio, s.sem_ratio);
  s.success_pct = succ / s.n_cells;
  return s;
}

nlohmann::ordered_json EvalGrid::summary_json() const {
  nlohmann::ordered_json j;
  for (bool ood : {false, true}) {
    auto s = summarize(ood);
    nlohmann::ordered_json js;
    js["n_cells"] = s.n_cells;
    js["mean_metric"] = s.mean_metric;
    js["sem_metric"] = s.sem_metric;
    js["success_pct"] = s.success_pct;
    js["mean_ratio"] = s.mean_ratio;
    js["sem_ratio"] = s.sem_ratio;
    j[ood ? "ood" : "ind"] = js;
  }
  return j;
}

void EvalGrid::to_csv(std::ostream& os) const {
  os << "axis1,axis2,is_ood,mean_metric,success_pct,ratio,n_episodes\n";
  for (const auto& c : cells)
    os << fmt(c.context.at(0)) << "," << fmt(c.context.at(1)) << ","
       << (c.is_ood ? 1 : 0) << "," << fmt(c.mean_metric) << ","
       << fmt(c.success_pct) << "," << fmt(c.ratio) << "," << c.n_episodes
       << "\n";
}

EvalGrid EvalGrid::from_csv(std::istream& is) {
  EvalGrid g;
  std::string line;
  if (!std::getline(is, line))
    throw ConfigError("grid csv: empty file");
  while (line.rfind("#", 0) == 0) std::getline(is, line);
  if (line != "axis1,axis2,is_ood,mean_metric,success_pct,ratio,n_episodes")
    throw ConfigError("grid csv: unexpected header: " + line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    EvalCell c;
    auto next = [&]() {
      if (!std::getline(ls, tok, ','))
        throw ConfigError("grid csv: short row: " + line);
      return tok;
    };
    c.context.push_back(std::stod(next()));
    c.context.push_back(std::stod(next()));
    c.is_ood = next() == "1";
    c.mean_metric = std::stod(next());
    c.success_pct = std::stod(next());
    c.ratio = std::stod(next());
    c.n_episodes = std::stoi(next());
    g.cells.push_back(std::move(c));
  }
  return g;
}

EvalGrid delta_grid(const EvalGrid& a, const EvalGrid& b) {
  if (a.cells.size() != b.cells.size())
    throw ConfigError("delta_grid: cell counts differ");
  EvalGrid d;
  d.axis_names = a.axis_names;
  d.axis1 = a.axis1;
  d.axis2 = a.axis2;
  d.metric_kind = a.metric_kind;
  d.cells.resize(a.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const auto& ca = a.cells[i];
    const auto& cb = b.cells[i];
    if (ca.context != cb.context || ca.is_ood != cb.is_ood)
      throw ConfigError("delta_grid: axis mismatch at cell " +
                        std::to_string(i));
    EvalCell& c = d.cells[i];
    c.context = ca.context;
    c.is_ood = ca.is_ood;
    c.valid = ca.valid && cb.valid;
    c.mean_metric = ca.mean_metric - cb.mean_metric;
    c.ratio = ca.ratio - cb.ratio;
    c.n_episodes = std::min(ca.n_episodes, cb.n_episodes);
  }
  return d;
}

void write_delta_csv(std::ostream& os, const EvalGrid& delta,
                     std::uint64_t hash_a, std::uint64_t hash_b) {
  os << "# delta = first - second (positive: first method better)\n";
  os << "# source_hash_a=" << hash_a << " source_hash_b=" << hash_b << "\n";
  os << "axis1,axis2,is_ood,mean_metric,ratio\n";
  for (const auto& c : delta.cells)
    os << fmt(c.context.at(0)) << "," << fmt(c.context.at(1)) << ","
       << (c.is_ood ? 1 : 0) << "," << fmt(c.mean_metric) << ","
       << fmt(c.ratio) << "\n";
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sparc::eval
