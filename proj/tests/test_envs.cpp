#include <doctest.h>

#include <cmath>
#include <cstring>

#include "sparc/env/env.hpp"
#include "sparc/env/history.hpp"
#include "sparc/env/linear_racer.hpp"
#include "sparc/env/windy_pointmass.hpp"

using namespace sparc;
using namespace sparc::env;

namespace {
// df = 9, alpha = 0.01
constexpr double kChiSq9At01 = 21.666;

double chi_square_10bins(const std::vector<int>& counts, double expected) {
  double stat = 0;
  for (int c : counts) {
    const double d = c - expected;
    stat += d * d / expected;
  }
  return stat;
}
}  // namespace

TEST_CASE("IND context sampler is uniform per axis") {
  LinearRacer racer;
  const auto& spec = racer.context_spec();
  Rng rng(101);
  const int n = 100000;
  std::vector<int> bins10(10, 0), bins4(4, 0);
  for (int i = 0; i < n; ++i) {
    Context c = sample_ind_context(spec, rng);
    for (double v : c.values) {
      CHECK(v >= 0.75);
      CHECK(v <= 1.25);
    }
    const double u = (c.values[0] - 0.75) / 0.5;
    ++bins10[std::min(9, static_cast<int>(u * 10))];
    ++bins4[std::min(3, static_cast<int>(u * 4))];
  }
  CHECK(chi_square_10bins(bins10, n / 10.0) < kChiSq9At01);
  // four equiprobable cells, each ~ 1/4
  for (int c : bins4) CHECK(std::abs(c / double(n) - 0.25) < 0.01);
}

TEST_CASE("eval grid lattice, 21x21 = 441, IND xor OOD") {
  WindyPointMass env;
  auto cells = eval_grid_contexts(env.context_spec());
  CHECK(cells.size() == 441);
  const auto& spec = env.context_spec();
  int ood = 0;
  for (const auto& cell : cells) {
    const bool ind = spec.in_ind_box(cell.context);
    CHECK(ind == !cell.is_ood);  // partition
    if (cell.is_ood) ++ood;
  }
  // IND half-width w, eval half-width 2w, 21 points: coordinates with
  // |x| <= w are the 11 middle lattice points per axis.
  CHECK(ood == 441 - 11 * 11);
}

TEST_CASE("degenerate spec: IND covering the eval box has zero OOD cells") {
  ContextSpec spec;
  spec.names = {"a", "b"};
  spec.ind_ranges = {{0, 1}, {0, 1}};
  spec.ood_eval_ranges = {{0, 1}, {0, 1}};
  spec.grid_resolution = 5;
  for (const auto& cell : eval_grid_contexts(spec)) CHECK(!cell.is_ood);
}

TEST_CASE("reset determinism and spawn disk") {
  WindyPointMass env;
  Context c{{1.0, -0.5}};
  auto o1 = env.reset(c, 77);
  auto o2 = env.reset(c, 77);
  CHECK(o1 == o2);
  for (int i = 0; i < 10000; ++i) {
    auto obs = env.reset(c, 1000 + i);
    const double r = std::hypot(obs[0], obs[1]);
    CHECK(r <= env.params().spawn_radius);
  }
}

TEST_CASE("racer initial speed lies in the configured interval") {
  LinearRacer env;
  Context c{{1.0, 1.0}};
  for (int i = 0; i < 2000; ++i) {
    auto obs = env.reset(c, 31 + i);
    const double v = obs[0] * 10.0;
    CHECK(v >= 0.0);
    CHECK(v <= env.params().v0_max);
  }
}

TEST_CASE("point mass drag closed form: zero action, zero wind") {
  WindyPointMass env;
  Context c{{0.0, 0.0}};
  env.reset(c, 5);
  // give it some velocity first
  auto r = env.step({1.0, -0.3});
  const double vx = r.obs[2], vz = r.obs[3];
  auto r2 = env.step({0.0, 0.0});
  const double d = env.params().drag;
  CHECK(r2.obs[2] == (1.0 - d) * vx);
  CHECK(r2.obs[3] == (1.0 - d) * vz);
}

TEST_CASE("racer full-throttle acceleration scales as power/mass") {
  // with c_d = 0 the thrust term is exactly (ps/ms) * base
  EnvOverrides ov{{"c_d", 0.0}, {"v0_max", 0.0}};
  auto base = LinearRacer(LinearRacer::params_from(ov));
  auto scaled = LinearRacer(LinearRacer::params_from(ov));
  base.reset(Context{{1.0, 1.0}}, 3);
  scaled.reset(Context{{1.25, 0.75}}, 3);
  auto rb = base.step({1.0});
  auto rs = scaled.step({1.0});
  const double vb = rb.obs[0] * 10.0, vs = rs.obs[0] * 10.0;
  CHECK(vs == doctest::Approx((1.25 / 0.75) * vb).epsilon(1e-12));
}

TEST_CASE("horizon rule terminates both environments") {
  WindyPointMass pm(WindyPointMass::params_from({{"goal_radius", 1e-9}}));
  pm.reset(Context{{0.0, 0.0}}, 1);
  int steps = 0;
  while (true) {
    auto r = pm.step({0.0, 0.0});
    ++steps;
    if (r.done) {
      CHECK(!r.success);
      break;
    }
  }
  CHECK(steps == pm.params().horizon);

  LinearRacer lr(LinearRacer::params_from({{"v0_max", 0.0}}));
  lr.reset(Context{{1.0, 1.0}}, 1);
  steps = 0;
  while (true) {
    auto r = lr.step({0.0});
    ++steps;
    if (r.done) {
      CHECK(!r.success);
      break;
    }
  }
  CHECK(steps == lr.params().horizon);
}

TEST_CASE("scripted controllers: zero at goal, saturated below limit") {
  WindyPointMass pm;
  auto a = pm.scripted_action({0.0, 0.0, 1.0, -2.0});
  CHECK(a[0] == 0.0);
  CHECK(a[1] == 0.0);

  LinearRacer lr;
  // v = 5 on a straight with limit 25 and no slower segment nearby
  auto t = lr.scripted_action({0.5, 2.5, 2.5, 1.0, 4.0});
  CHECK(t[0] == 1.0);
}

TEST_CASE("scripted racer completes the lap across the whole eval grid") {
  LinearRacer proto;
  auto cells = eval_grid_contexts(proto.context_spec());
  for (const auto& cell : cells) {
    LinearRacer env;
    auto obs = env.reset(cell.context, 9);
    bool success = false;
    double lap = 0;
    while (true) {
      auto r = env.step(env.scripted_action(obs));
      obs = r.obs;
      if (r.done) {
        success = r.success;
        lap = r.lap_time;
        break;
      }
    }
    CAPTURE(cell.context.values[0]);
    CAPTURE(cell.context.values[1]);
    CHECK(success);
    CHECK(lap > 0.0);
    CHECK(std::isfinite(lap));
  }
}

TEST_CASE("racer limit violation for >10 consecutive steps fails the lap") {
  // long fast stretch into a slow zone at full throttle: overspeed persists
  LinearRacer env(LinearRacer::params_from({{"v0_max", 0.0}}));
  env.reset(Context{{1.5, 0.5}}, 2);
  StepResult r;
  bool done = false;
  while (!done) {
    r = env.step({1.0});
    done = r.done;
  }
  CHECK(!r.success);
}

TEST_CASE("trajectory determinism is bitwise") {
  WindyPointMass a, b;
  Context c{{0.7, -1.1}};
  auto oa = a.reset(c, 42);
  auto ob = b.reset(c, 42);
  CHECK(oa == ob);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> act{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto ra = a.step(act);
    auto rb = b.step(act);
    CHECK(std::memcmp(ra.obs.data(), rb.obs.data(), sizeof(double) * 4) == 0);
    CHECK(ra.reward == rb.reward);
    if (ra.done) break;
  }
}

TEST_CASE("context changes returns for the same action sequence") {
  WindyPointMass a, b;
  a.reset(Context{{2.0, 0.0}}, 7);
  b.reset(Context{{-2.0, 0.0}}, 7);
  double ra = 0, rb = 0;
  for (int i = 0; i < 50; ++i) {
    ra += a.step({0.3, 0.1}).reward;
    rb += b.step({0.3, 0.1}).reward;
  }
  CHECK(ra != rb);
}

TEST_CASE("non-finite action raises a training error") {
  WindyPointMass env;
  env.reset(Context{{0, 0}}, 1);
  CHECK_THROWS_AS(env.step({std::nan(""), 0.0}), TrainingError);
}

TEST_CASE("history buffer basics") {
  HistoryBuffer h(4, 2, 1);
  auto w = h.window();
  for (double v : w) CHECK(v == 0.0);

  for (int i = 1; i <= 4; ++i)
    h.push({i * 1.0, i * 10.0}, {i * 100.0});
  w = h.window();
  for (double v : w) CHECK(v != 0.0);

  // after H+3 pushes the window holds pushes 4..H+3 in order
  for (int i = 5; i <= 7; ++i) h.push({i * 1.0, i * 10.0}, {i * 100.0});
  w = h.window();  // channels (2+1) x 4, channel-major
  for (int l = 0; l < 4; ++l) {
    const double expect = 4 + l;
    CHECK(w[0 * 4 + l] == expect);
    CHECK(w[1 * 4 + l] == expect * 10);
    CHECK(w[2 * 4 + l] == expect * 100);
  }

  h.reset();
  for (double v : h.window()) CHECK(v == 0.0);
}

TEST_CASE("history buffer equals naive oracle over 1e5 random ops") {
  const int H = 7, O = 3, A = 2;
  HistoryBuffer buf(H, O, A);
  std::vector<std::pair<std::vector<double>, std::vector<double>>> naive;
  Rng rng(909);
  for (int op = 0; op < 100000; ++op) {
    if (rng.uniform() < 0.002) {
      buf.reset();
      naive.clear();
    } else {
      std::vector<double> o(O), a(A);
      for (auto& v : o) v = rng.normal();
      for (auto& v : a) v = rng.normal();
      buf.push(o, a);
      naive.emplace_back(o, a);
    }
    if (op % 997 == 0) {
      const auto w = buf.window();
      for (int l = 0; l < H; ++l) {
        const std::int64_t p = static_cast<std::int64_t>(naive.size()) - H + l;
        for (int c = 0; c < O + A; ++c) {
          const double expect =
              p < 0 ? 0.0
                    : (c < O ? naive[p].first[c] : naive[p].second[c - O]);
          REQUIRE(w[static_cast<std::size_t>(c) * H + l] == expect);
        }
      }
    }
  }
}

TEST_CASE("perturb-dynamics changes trajectories but keeps determinism") {
  WindyPointMass a, b;
  b.perturb_dynamics(1.5);
  a.reset(Context{{1.0, 0.0}}, 3);
  b.reset(Context{{1.0, 0.0}}, 3);
  auto ra = a.step({0.5, 0.5});
  auto rb = b.step({0.5, 0.5});
  CHECK(ra.obs != rb.obs);
}

TEST_CASE("factory builds both environments and rejects unknown names") {
  CHECK(make_env("windy_pointmass")->obs_dim() == 4);
  CHECK(make_env("linear_racer")->action_dim() == 1);
  CHECK_THROWS_AS(make_env("mujoco"), ConfigError);
  CHECK_THROWS_AS(make_env("windy_pointmass", {{"bogus", 1.0}}), ConfigError);
}
