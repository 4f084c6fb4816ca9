#include <doctest.h>

#include <cmath>

#include "sparc/nn/checkpoint.hpp"
#include "sparc/nn/grad_check.hpp"
#include "sparc/qrsac/qrsac.hpp"

using namespace sparc;
using namespace sparc::qrsac;
using nn::ParameterSet;

using nn::Tensor;
using policy::CondMode;
using policy::Method;
using policy::PolicyWidths;

namespace {

Tensor<double> randt(std::vector<std::size_t> shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.normal();
  return t;
}

Batch<double> random_batch(int B, int O, int A, int C, int H, Rng& rng) {
  Batch<double> b;
  b.B = B;
  b.obs = randt({static_cast<std::size_t>(B), static_cast<std::size_t>(O)}, rng);
  b.obs2 = randt(b.obs.shape, rng);
  b.act = randt({static_cast<std::size_t>(B), static_cast<std::size_t>(A)}, rng);
  for (auto& v : b.act.data) v = std::tanh(v);
  b.rew = randt({static_cast<std::size_t>(B)}, rng);
  b.done = Tensor<double>({static_cast<std::size_t>(B)});
  for (int i = 0; i < B; ++i) b.done[i] = rng.uniform() < 0.1 ? 1.0 : 0.0;
  b.ctx = randt({static_cast<std::size_t>(B), static_cast<std::size_t>(C)}, rng);
  b.hist = randt({static_cast<std::size_t>(B),
                  static_cast<std::size_t>(O + A),
                  static_cast<std::size_t>(H)}, rng);
  b.hist2 = randt(b.hist.shape, rng);
  return b;
}

double checksum(const ParameterSet<double>& ps, const std::string& prefix) {
  double s = 0;
  for (const auto& e : ps.entries())
    if (e.name.rfind(prefix, 0) == 0)
      for (double v : e.value.data) s += v;
  return s;
}

std::vector<std::vector<double>> values_of(const ParameterSet<double>& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& e : ps.entries()) out.push_back(e.value.data);
  return out;
}

}  // namespace

TEST_CASE("quantile levels are strictly increasing midpoints in (0,1)") {
  auto tau = quantile_levels(32);
  CHECK(tau.size() == 32);
  CHECK(tau.front() == doctest::Approx(1.0 / 64));
  CHECK(tau.back() == doctest::Approx(63.0 / 64));
  for (std::size_t i = 1; i < tau.size(); ++i) CHECK(tau[i] > tau[i - 1]);
}

TEST_CASE("zero critic outputs zero quantiles; mean is arithmetic mean") {
  Rng rng(31);
  CriticNet<double> critic(CondMode::EncodedContext, 3, 2, 2, 10, 32);
  ParameterSet<double> ps;
  critic.init_params(ps, rng);
  for (auto& e : ps.entries()) e.value.fill(0);
  Tensor<double> obs = randt({1, 3}, rng), act = randt({1, 2}, rng);
  Tensor<double> ctx = randt({1, 2}, rng);
  auto f = critic.forward(ps, obs, act, &ctx, nullptr);
  CHECK(f.quantiles.shape == std::vector<std::size_t>{1, 32});
  for (std::size_t i = 0; i < 32; ++i) CHECK(f.quantiles[i] == 0.0);
  CHECK(quantile_mean(f.quantiles, 0) == 0.0);

  Tensor<double> q({1, 4}, {1.0, 2.0, 3.0, 6.0});
  CHECK(quantile_mean(q, 0) == doctest::Approx(3.0));
}

TEST_CASE("critic target bootstrap identities") {
  Tensor<double> rew({1}, {1.0});
  Tensor<double> done({1}, {1.0});
  Tensor<double> q1({1, 2}, {5.0, 7.0});
  Tensor<double> q2({1, 2}, {6.0, 3.0});
  auto y = critic_target(rew, done, q1, q2, {0.3}, 0.99, 0.01);
  CHECK(y[0] == 1.0);  // terminal: bootstrap off
  CHECK(y[1] == 1.0);

  done[0] = 0.0;
  rew[0] = 0.0;
  Tensor<double> qa({1, 2}, {1.0, 2.0});
  Tensor<double> qb({1, 2}, {1.0, 2.0});
  auto y2 = critic_target(rew, done, qa, qb, {0.0}, 0.99, 0.0);
  CHECK(y2[0] == doctest::Approx(0.99));
  CHECK(y2[1] == doctest::Approx(1.98));

  // elementwise twin min
  rew[0] = 1.0;
  auto y3 = critic_target(rew, done, q1, q2, {0.0}, 0.99, 0.0);
  CHECK(y3[0] == doctest::Approx(1.0 + 0.99 * 5.0));
  CHECK(y3[1] == doctest::Approx(1.0 + 0.99 * 3.0));
}

TEST_CASE("quantile huber hand-computed cases") {
  Tensor<double> q({1, 1}, {0.0});
  Tensor<double> y({1, 1}, {1.0});
  auto [l1, d1] = quantile_huber_loss(q, y, 1.0);
  CHECK(l1 == doctest::Approx(0.25));  // |0.5 - 0| * 0.5 * 1^2
  auto [l2, d2] = quantile_huber_loss(q, Tensor<double>({1, 1}, {-1.0}), 1.0);
  CHECK(l2 == doctest::Approx(0.25));  // median symmetry
  auto [l0, d0] = quantile_huber_loss(y, y, 1.0);
  CHECK(l0 == 0.0);
  CHECK(d0[0] == 0.0);
}

TEST_CASE("quantile huber is nonnegative, zero iff exact fit at N=1") {
  Rng rng(32);
  for (int it = 0; it < 200; ++it) {
    Tensor<double> q = randt({2, 4}, rng);
    Tensor<double> y = randt({2, 4}, rng);
    auto [l, d] = quantile_huber_loss(q, y, 1.0);
    CHECK(l >= 0.0);
  }
  Tensor<double> q({1, 1}, {0.3});
  auto [lz, dz] = quantile_huber_loss(q, q, 1.0);
  CHECK(lz == 0.0);
  auto [lnz, dnz] =
      quantile_huber_loss(q, Tensor<double>({1, 1}, {0.31}), 1.0);
  CHECK(lnz > 0.0);
}

TEST_CASE("full critic loss gradient matches finite differences (N=2)") {
  Rng rng(33);
  CriticNet<double> critic(CondMode::EncodedContext, 2, 1, 2, 4, 2,
                           PolicyWidths{6, 3, 3, 3});
  ParameterSet<double> ps;
  critic.init_params(ps, rng);
  Tensor<double> obs = randt({3, 2}, rng), act = randt({3, 1}, rng);
  Tensor<double> ctx = randt({3, 2}, rng);
  Tensor<double> y = randt({3, 2}, rng);

  auto f = critic.forward(ps, obs, act, &ctx, nullptr, true);
  auto [loss, dq] = quantile_huber_loss(f.quantiles, y, 1.0);
  nn::GradSet<double> gs;
  critic.backward(ps, f, dq, &gs);

  const double eps = 1e-5;
  double worst = 0;
  for (auto& e : ps.entries()) {
    const auto* g = gs.find(e.name);
    REQUIRE(g != nullptr);
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      const double keep = e.value[i];
      e.value[i] = keep + eps;
      auto lp = quantile_huber_loss(
          critic.forward(ps, obs, act, &ctx, nullptr).quantiles, y, 1.0);
      e.value[i] = keep - eps;
      auto lm = quantile_huber_loss(
          critic.forward(ps, obs, act, &ctx, nullptr).quantiles, y, 1.0);
      e.value[i] = keep;
      worst = std::max(
          worst, nn::rel_err((*g)[i], (lp.first - lm.first) / (2 * eps)));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("tanh log-prob densities integrate to one on a 1-D grid") {
  // numeric change-of-variables oracle for the squash correction
  for (double m : {0.0, 0.4}) {
    for (double ls : {std::log(0.5), std::log(1.3)}) {
      const int n = 20001;
      double integral = 0;
      const double lo = -1.0 + 1e-9, hi = 1.0 - 1e-9;
      for (int i = 0; i < n; ++i) {
        const double a = lo + (hi - lo) * i / (n - 1);
        const double u = std::atanh(a);
        const double sigma = std::exp(ls);
        const double logn = -0.5 * std::pow((u - m) / sigma, 2) - ls -
                            0.5 * std::log(2 * 3.14159265358979323846);
        const double logp = logn - std::log(1.0 - a * a + policy::kSquashEps);
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;  // trapezoid
        integral += w * std::exp(logp) * (hi - lo) / (n - 1);
      }
      CHECK(integral == doctest::Approx(1.0).epsilon(2e-3));
    }
  }
  // sample_action's reported log-prob equals the same formula
  Tensor<double> mean({1, 1}, {0.4});
  Tensor<double> log_std({1, 1}, {std::log(0.5)});
  Rng rng(34);
  auto s = policy::sample_action(mean, log_std, &rng, false);
  const double u = s.pre_squash[0], a = s.action[0];
  const double expect =
      -0.5 * std::pow((u - 0.4) / 0.5, 2) - std::log(0.5) -
      0.5 * std::log(2 * 3.14159265358979323846) -
      std::log(1.0 - a * a + policy::kSquashEps);
  CHECK(s.log_prob[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("bundle structure: only_obs carries no psi/phi parameters") {
  auto oo = make_bundle<double>(Method::OnlyObs, 3, 2, 2, 10, 32, 7);
  for (const auto& e : oo.p_actor.entries()) {
    CHECK(e.name.find("context_encoder") == std::string::npos);
    CHECK(e.name.find("history_adapter") == std::string::npos);
  }
  CHECK(!oo.has_adapter());

  auto sp = make_bundle<double>(Method::Sparc, 3, 2, 2, 10, 32, 7);
  CHECK(sp.has_adapter());
  CHECK(sp.p_actor.has("context_encoder.0.w"));
  CHECK(sp.p_adapter.has("history_adapter.0.w"));
  // default quantile count per the hyper table
  CHECK(sp.critic->n_quantiles() == 32);
  // targets start as exact critic copies
  CHECK(sp.p_t1.value("decision.4.w").data == sp.p_c1.value("decision.4.w").data);
}

TEST_CASE("update_step runs, tau=0 leaves targets bitwise unchanged") {
  Rng rng(35);
  const int O = 3, A = 2, C = 2, H = 6;
  auto nets = make_bundle<double>(Method::Sparc, O, A, C, H, 8, 11,
                                  PolicyWidths{16, 4, 4, 4});
  auto batch = random_batch(8, O, A, C, H, rng);
  Hyper h;
  h.tau = 0.0;
  auto t1_before = nn::serialize_set_bytes("t1", nets.p_t1, 0);
  Rng up(36);
  auto rep = update_step(nets, batch, h, up, 1, UpdatePhase::Full);
  CHECK(!rep.skipped);
  CHECK(std::isfinite(rep.critic_loss));
  CHECK(std::isfinite(rep.actor_loss));
  CHECK(std::isfinite(rep.adapter_loss));
  CHECK(nn::serialize_set_bytes("t1", nets.p_t1, 0) == t1_before);

  // with tau > 0 targets move
  Hyper h2;
  auto rep2 = update_step(nets, batch, h2, up, 2, UpdatePhase::Full);
  CHECK(!rep2.skipped);
  CHECK(nn::serialize_set_bytes("t1", nets.p_t1, 0) != t1_before);
}

TEST_CASE("alg ordering: adapter regression sees the post-actor psi") {
  Rng rng(37);
  const int O = 3, A = 2, C = 2, H = 6;
  auto nets = make_bundle<double>(Method::Sparc, O, A, C, H, 8, 12,
                                  PolicyWidths{16, 4, 4, 4});
  auto batch = random_batch(8, O, A, C, H, rng);
  Hyper h;
  double psi_post_critic = 0, psi_post_actor = 0, psi_pre_adapter = 0;
  Rng up(38);
  update_step<double>(nets, batch, h, up, 1, UpdatePhase::Full,
                      [&](const char* phase) {
                        const double cs =
                            checksum(nets.p_actor, "context_encoder.");
                        if (std::string(phase) == "post_critic")
                          psi_post_critic = cs;
                        else if (std::string(phase) == "post_actor")
                          psi_post_actor = cs;
                        else if (std::string(phase) == "pre_adapter")
                          psi_pre_adapter = cs;
                      });
  CHECK(psi_pre_adapter == psi_post_actor);     // same-step psi
  CHECK(psi_post_actor != psi_post_critic);     // actor update moved psi
}

TEST_CASE("constant critics and zero entropy give a frozen actor") {
  Rng rng(39);
  const int O = 2, A = 1, C = 2, H = 4;
  auto nets = make_bundle<double>(Method::Sparc, O, A, C, H, 4, 13,
                                  PolicyWidths{8, 3, 3, 3});
  for (auto* ps : {&nets.p_c1, &nets.p_c2, &nets.p_t1, &nets.p_t2})
    for (auto& e : ps->entries()) e.value.fill(0);
  auto batch = random_batch(6, O, A, C, H, rng);
  batch.rew.fill(0);
  batch.done.fill(1.0);  // y = r = 0 keeps zero critics exactly zero
  Hyper h;
  h.entropy_alpha = 0.0;
  auto actor_before = values_of(nets.p_actor);
  auto critic_before = values_of(nets.p_c1);
  Rng up(40);
  auto rep = update_step(nets, batch, h, up, 1, UpdatePhase::Full);
  CHECK(!rep.skipped);
  CHECK(rep.actor_loss == 0.0);
  CHECK(values_of(nets.p_c1) == critic_before);
  CHECK(values_of(nets.p_actor) == actor_before);
}

TEST_CASE("non-finite batch marks the step skipped") {
  Rng rng(41);
  const int O = 2, A = 1, C = 2, H = 4;
  auto nets = make_bundle<double>(Method::Sparc, O, A, C, H, 4, 14,
                                  PolicyWidths{8, 3, 3, 3});
  auto batch = random_batch(6, O, A, C, H, rng);
  batch.rew[0] = std::numeric_limits<double>::quiet_NaN();
  Hyper h;
  Rng up(42);
  auto rep = update_step(nets, batch, h, up, 1, UpdatePhase::Full);
  CHECK(rep.skipped);
}

TEST_CASE("bandit oracle: better action's mean-Q pulls ahead by 0.5+") {
  Rng rng(43);
  const int O = 1, A = 1, C = 1, H = 2;
  auto nets = make_bundle<double>(Method::OnlyObs, O, A, C, H, 8, 15,
                                  PolicyWidths{24, 4, 4, 4});
  // single state, two deterministic actions: a=+1 pays 1, a=-1 pays 0
  const int B = 32;
  Batch<double> batch;
  batch.B = B;
  batch.obs = Tensor<double>({B, 1});
  batch.obs2 = Tensor<double>({B, 1});
  batch.act = Tensor<double>({B, 1});
  batch.rew = Tensor<double>({B});
  batch.done = Tensor<double>({B});
  batch.ctx = Tensor<double>({B, 1});
  batch.hist = Tensor<double>({B, 2, H});
  batch.hist2 = Tensor<double>({B, 2, H});
  for (int i = 0; i < B; ++i) {
    const double a = i % 2 == 0 ? 1.0 : -1.0;
    batch.act[i] = a;
    batch.rew[i] = a > 0 ? 1.0 : 0.0;
    batch.done[i] = 1.0;
  }
  Hyper h;
  h.lr_sac = 1e-3;
  Rng up(44);
  for (int step = 1; step <= 2000; ++step)
    update_step(nets, batch, h, up, step, UpdatePhase::SacOnly);

  Tensor<double> obs({1, 1});
  Tensor<double> a_good({1, 1}, {1.0});
  Tensor<double> a_bad({1, 1}, {-1.0});
  const double qg = quantile_mean(
      nets.critic->forward(nets.p_c1, obs, a_good, nullptr, nullptr).quantiles,
      0);
  const double qb = quantile_mean(
      nets.critic->forward(nets.p_c1, obs, a_bad, nullptr, nullptr).quantiles,
      0);
  CHECK(qg - qb >= 0.5);
}
