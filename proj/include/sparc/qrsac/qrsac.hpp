#pragma once

#include <functional>
#include <memory>

#include "sparc/nn/adam.hpp"
#include "sparc/qrsac/critic.hpp"

namespace sparc::qrsac {

using policy::ActionSample;
using policy::Method;
using policy::PolicyNet;

/// Quantile midpoints tau_i = (2i - 1) / 2N, i = 1..N.
inline std::vector<double> quantile_levels(int n) {
  std::vector<double> tau(n);
  for (int i = 0; i < n; ++i) tau[i] = (2.0 * i + 1.0) / (2.0 * n);
  return tau;
}

template <typename T>
double quantile_mean(const Tensor<T>& q, int row) {
  const int n = static_cast<int>(q.shape.at(1));
  double s = 0;
  for (int i = 0; i < n; ++i) s += static_cast<double>(q[row * n + i]);
  return s / n;
}

/// y_j = r + gamma * (1 - done) * (q_min_j - alpha * log_prob_next), with
/// q_min the elementwise min over the twin target critics' quantiles.
template <typename T>
Tensor<T> critic_target(const Tensor<T>& rew, const Tensor<T>& done,
                        const Tensor<T>& q1_next, const Tensor<T>& q2_next,
                        const std::vector<double>& log_prob_next, double gamma,
                        double alpha_ent) {
  const std::size_t B = q1_next.shape.at(0), N = q1_next.shape.at(1);
  Tensor<T> y({B, N});
  for (std::size_t b = 0; b < B; ++b) {
    const double r = static_cast<double>(rew[b]);
    const double mask = 1.0 - static_cast<double>(done[b]);
    for (std::size_t j = 0; j < N; ++j) {
      const double qm = std::min(static_cast<double>(q1_next[b * N + j]),
                                 static_cast<double>(q2_next[b * N + j]));
      y[b * N + j] =
          static_cast<T>(r + gamma * mask * (qm - alpha_ent * log_prob_next[b]));
    }
  }
  return y;
}

/// Quantile-Huber loss: mean over batch and all (i, j) pairs of
/// |tau_i - 1{u<0}| * L_kappa(u) / kappa with u = y_j - q_i.
/// Returns the loss and d loss / d q.
template <typename T>
std::pair<double, Tensor<T>> quantile_huber_loss(const Tensor<T>& pred,
                                                 const Tensor<T>& target,
                                                 double kappa = 1.0) {
  if (kappa <= 0.0) throw ConfigError("quantile huber: kappa must be > 0");
  if (pred.shape != target.shape)
    throw ConfigError("quantile huber: shape mismatch");
  const std::size_t B = pred.shape.at(0), N = pred.shape.at(1);
  const auto tau = quantile_levels(static_cast<int>(N));
  Tensor<T> dq(pred.shape);
  double loss = 0;
  const double norm = 1.0 / (static_cast<double>(B) * N * N);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < N; ++i) {
      double g = 0;
      const double q = static_cast<double>(pred[b * N + i]);
      for (std::size_t j = 0; j < N; ++j) {
        const double u = static_cast<double>(target[b * N + j]) - q;
        const double au = std::abs(u);
        const double huber =
            au <= kappa ? 0.5 * u * u : kappa * (au - 0.5 * kappa);
        const double w = std::abs(tau[i] - (u < 0 ? 1.0 : 0.0));
        loss += w * huber / kappa;
        const double dhuber = std::clamp(u, -kappa, kappa);  // d huber / d u
        g += -w * dhuber / kappa;                            // d/dq = -d/du
      }
      dq[b * N + i] = static_cast<T>(g * norm);
    }
  return {loss * norm, std::move(dq)};
}

struct Hyper {
  double lr_sac = 3e-4;
  double lr_adapter = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  double entropy_alpha = 0.01;
  double kappa = 1.0;
  double critic_clip_norm = 10.0;
  int copy_every = 1;  // adapter trunk refresh cadence, in updates
  int n_quantiles = 32;
};

/// Which updates a training step performs.
///   Full        - critic + actor + adapter regression + copy (single-phase)
///   SacOnly     - critic + actor (two-phase phase 1, baselines)
///   AdapterOnly - adapter regression against a frozen encoder (phase 2)
enum class UpdatePhase { Full, SacOnly, AdapterOnly };

/// All networks and parameters of one learner.
template <typename T>
struct NetBundle {
  Method method;
  std::unique_ptr<PolicyNet<T>> actor;    // pi_ex, or the baseline policy
  std::unique_ptr<PolicyNet<T>> adapter;  // pi_ad (sparc / rma only)
  std::unique_ptr<CriticNet<T>> critic;   // shared wiring for twins+targets
  ParameterSet<T> p_actor, p_adapter, p_c1, p_c2, p_t1, p_t2;

  bool has_adapter() const { return adapter != nullptr; }

  /// The parameters used to act in the environment for a given role.
  const ParameterSet<T>& rollout_params(bool use_adapter) const {
    return use_adapter && has_adapter() ? p_adapter : p_actor;
  }
  const PolicyNet<T>& rollout_policy(bool use_adapter) const {
    return use_adapter && has_adapter() ? *adapter : *actor;
  }
};

template <typename T>
NetBundle<T> make_bundle(Method method, int obs_dim, int act_dim, int ctx_dim,
                         int hist_len, int n_quantiles,
                         std::uint64_t base_seed,
                         policy::PolicyWidths w = policy::PolicyWidths::desk()) {
  using policy::CondMode;
  NetBundle<T> b;
  b.method = method;
  CondMode actor_mode, critic_mode;
  bool with_adapter = false;
  switch (method) {
    case Method::Sparc:
    case Method::Rma:
      actor_mode = CondMode::EncodedContext;
      critic_mode = CondMode::EncodedContext;
      with_adapter = true;
      break;
    case Method::OnlyObs:
      actor_mode = critic_mode = CondMode::None;
      break;
    case Method::HistoryInput:
      actor_mode = critic_mode = CondMode::History;
      break;
    case Method::Oracle:
      actor_mode = critic_mode = CondMode::RawContext;
      break;
    default:
      throw ConfigError("make_bundle: bad method");
  }
  b.actor = std::make_unique<PolicyNet<T>>(actor_mode, obs_dim, act_dim,
                                           ctx_dim, hist_len, w);
  if (with_adapter)
    b.adapter = std::make_unique<PolicyNet<T>>(CondMode::History, obs_dim,
                                               act_dim, ctx_dim, hist_len, w);
  b.critic = std::make_unique<CriticNet<T>>(critic_mode, obs_dim, act_dim,
                                            ctx_dim, hist_len, n_quantiles, w);
  {
    Rng r(seed_stream(base_seed, "init/actor"));
    b.actor->init_params(b.p_actor, r);
  }
  if (with_adapter) {
    Rng r(seed_stream(base_seed, "init/adapter"));
    b.adapter->init_params(b.p_adapter, r);
  }
  {
    Rng r1(seed_stream(base_seed, "init/critic1"));
    b.critic->init_params(b.p_c1, r1);
    Rng r2(seed_stream(base_seed, "init/critic2"));
    b.critic->init_params(b.p_c2, r2);
  }
  // targets start as exact copies of the online critics
  {
    Rng r1(seed_stream(base_seed, "init/critic1"));
    b.critic->init_params(b.p_t1, r1);
    Rng r2(seed_stream(base_seed, "init/critic2"));
    b.critic->init_params(b.p_t2, r2);
  }
  return b;
}

/// Sampled minibatch, already assembled into batch tensors.
/// hist/hist2 are (B, obs+act, H) windows; hist2 is the post-step window.
template <typename T>
struct Batch {
  Tensor<T> obs, act, rew, done, obs2, ctx, hist, hist2;
  int B = 0;
};

struct StepReport {
  double critic_loss = 0;
  double actor_loss = 0;
  double adapter_loss = 0;
  double entropy = 0;
  double critic_grad_norm = 0;
  bool skipped = false;
};

/// Test-mode instrumentation: called with a phase label after each stage of
/// an update ("post_critic", "post_actor", "pre_adapter", ...).
using UpdateHooks = std::function<void(const char*)>;

namespace detail {

template <typename T>
const Tensor<T>* cond_ctx(const PolicyNet<T>& net, const Batch<T>& batch) {
  using policy::CondMode;
  return (net.mode() == CondMode::EncodedContext ||
          net.mode() == CondMode::RawContext)
             ? &batch.ctx
             : nullptr;
}

}  // namespace detail

/// One Algorithm-style training step, in order: twin critic update, actor
/// update, adapter regression, Polyak target blend, trunk copy into the
/// adapter. Non-finite losses or gradients abort the step (skipped=true).
template <typename T>
StepReport update_step(NetBundle<T>& nets, const Batch<T>& batch,
                       const Hyper& h, Rng& update_rng,
                       std::uint64_t update_index,
                       UpdatePhase phase = UpdatePhase::Full,
                       const UpdateHooks& hooks = {}) {
  using policy::CondMode;
  StepReport rep;
  const int B = batch.B;
  const int N = nets.critic->n_quantiles();
  const double inv_b = 1.0 / B;
  nn::AdamHyper sac_opt;
  sac_opt.lr = h.lr_sac;
  nn::AdamHyper ad_opt;
  ad_opt.lr = h.lr_adapter;

  const bool do_sac = phase != UpdatePhase::AdapterOnly;
  const bool do_adapter =
      nets.has_adapter() && phase != UpdatePhase::SacOnly;

  try {
    const CondMode amode = nets.actor->mode();
    const Tensor<T>* ctx = detail::cond_ctx(*nets.actor, batch);
    const Tensor<T>* hist =
        amode == CondMode::History ? &batch.hist : nullptr;
    const Tensor<T>* hist2 =
        amode == CondMode::History ? &batch.hist2 : nullptr;

    if (do_sac) {
      // --- twin critic update -------------------------------------------
      auto f2 = nets.actor->forward(nets.p_actor, batch.obs2, ctx, hist2);
      auto a2 = policy::sample_action(f2.mean, f2.log_std, &update_rng, false);
      auto t1 = nets.critic->forward(nets.p_t1, batch.obs2, a2.action, ctx,
                                     hist2);
      auto t2 = nets.critic->forward(nets.p_t2, batch.obs2, a2.action, ctx,
                                     hist2);
      Tensor<T> y = critic_target(batch.rew, batch.done, t1.quantiles,
                                  t2.quantiles, a2.log_prob, h.gamma,
                                  h.entropy_alpha);

      auto c1 = nets.critic->forward(nets.p_c1, batch.obs, batch.act, ctx,
                                     &batch.hist, true);
      auto c2 = nets.critic->forward(nets.p_c2, batch.obs, batch.act, ctx,
                                     &batch.hist, true);
      auto [l1, dq1] = quantile_huber_loss(c1.quantiles, y, h.kappa);
      auto [l2, dq2] = quantile_huber_loss(c2.quantiles, y, h.kappa);
      rep.critic_loss = l1 + l2;
      if (!std::isfinite(rep.critic_loss))
        throw TrainingError("critic loss non-finite");
      GradSet<T> g1, g2;
      nets.critic->backward(nets.p_c1, c1, dq1, &g1);
      nets.critic->backward(nets.p_c2, c2, dq2, &g2);
      // Table-style global clip over the critics' combined gradient.
      const double norm =
          std::sqrt(g1.global_norm_sq() + g2.global_norm_sq());
      rep.critic_grad_norm = norm;
      if (norm > h.critic_clip_norm && norm > 0) {
        const T s = static_cast<T>(h.critic_clip_norm / norm);
        g1.scale(s);
        g2.scale(s);
      }
      adam_step(nets.p_c1, g1, sac_opt);
      adam_step(nets.p_c2, g2, sac_opt);
      if (hooks) hooks("post_critic");

      // --- actor update --------------------------------------------------
      auto fa = nets.actor->forward(nets.p_actor, batch.obs, ctx, hist, true);
      auto sa = policy::sample_action(fa.mean, fa.log_std, &update_rng, false);
      auto q1 = nets.critic->forward(nets.p_c1, batch.obs, sa.action, ctx,
                                     &batch.hist, true);
      auto q2 = nets.critic->forward(nets.p_c2, batch.obs, sa.action, ctx,
                                     &batch.hist, true);
      double actor_loss = 0, entropy = 0;
      std::vector<int> argmin(B);
      for (int b = 0; b < B; ++b) {
        const double m1 = quantile_mean(q1.quantiles, b);
        const double m2 = quantile_mean(q2.quantiles, b);
        argmin[b] = m2 < m1 ? 1 : 0;
        actor_loss +=
            inv_b * (h.entropy_alpha * sa.log_prob[b] - std::min(m1, m2));
        entropy += -inv_b * sa.log_prob[b];
      }
      rep.actor_loss = actor_loss;
      rep.entropy = entropy;
      if (!std::isfinite(actor_loss))
        throw TrainingError("actor loss non-finite");

      // d loss / d action via the argmin critic (no critic param grads)
      Tensor<T> up1 = Tensor<T>::zeros_like(q1.quantiles);
      Tensor<T> up2 = Tensor<T>::zeros_like(q2.quantiles);
      const T dmean = static_cast<T>(-inv_b / N);
      for (int b = 0; b < B; ++b) {
        Tensor<T>& up = argmin[b] == 0 ? up1 : up2;
        for (int i = 0; i < N; ++i) up[b * N + i] = dmean;
      }
      Tensor<T> da1, da2;
      nets.critic->backward(nets.p_c1, q1, up1, nullptr, &da1);
      nets.critic->backward(nets.p_c2, q2, up2, nullptr, &da2);

      const int A = nets.actor->act_dim();
      Tensor<T> d_mean({static_cast<std::size_t>(B),
                        static_cast<std::size_t>(A)});
      Tensor<T> d_log_std(d_mean.shape);
      for (int b = 0; b < B; ++b)
        for (int j = 0; j < A; ++j) {
          const std::size_t k = static_cast<std::size_t>(b) * A + j;
          const double a = static_cast<double>(sa.action[k]);
          const double one_m_a2 = 1.0 - a * a;
          const double g = one_m_a2 + policy::kSquashEps;
          const double sigeps = std::exp(static_cast<double>(fa.log_std[k])) *
                                static_cast<double>(sa.eps[k]);
          const double dq_da =
              static_cast<double>(da1[k]) + static_cast<double>(da2[k]);
          const double dlp_du = 2.0 * a * one_m_a2 / g;  // tanh correction
          const double dl_du =
              inv_b * h.entropy_alpha * dlp_du + dq_da * one_m_a2;
          d_mean[k] = static_cast<T>(dl_du);
          d_log_std[k] = static_cast<T>(dl_du * sigeps -
                                        inv_b * h.entropy_alpha);
        }
      GradSet<T> ga;
      nets.actor->backward(nets.p_actor, fa, d_mean, d_log_std, &ga);
      adam_step(nets.p_actor, ga, sac_opt);
      if (hooks) hooks("post_actor");
    }

    // --- history-adapter regression (Eq.-2 style, target detached) ------
    if (do_adapter) {
      if (hooks) hooks("pre_adapter");
      Tensor<T> z = nets.actor->context_latent(nets.p_actor, batch.ctx);
      Tape<T> tape;
      Tensor<T> zh =
          nets.adapter->adapter_latent(nets.p_adapter, batch.hist, &tape);
      auto [al, dz] = policy::adapter_loss_grad(z, zh);
      rep.adapter_loss = al;
      if (!std::isfinite(al)) throw TrainingError("adapter loss non-finite");
      GradSet<T> gphi;
      nets.adapter->adapter_latent_backward(nets.p_adapter, tape, dz, gphi);
      adam_step(nets.p_adapter, gphi, ad_opt);
      if (hooks) hooks("post_adapter");
    }

    if (do_sac && h.tau > 0.0) {
      polyak_blend(nets.p_t1, nets.p_c1, h.tau);
      polyak_blend(nets.p_t2, nets.p_c2, h.tau);
    }
    if (hooks) hooks("post_polyak");

    if (nets.has_adapter() && phase == UpdatePhase::Full &&
        h.copy_every > 0 && update_index % h.copy_every == 0) {
      copy_entries(nets.p_adapter, nets.p_actor,
                   PolicyNet<T>::shared_prefixes());
      if (hooks) hooks("post_copy");
    }
  } catch (const TrainingError&) {
    rep.skipped = true;
  }
  return rep;
}

}  // namespace sparc::qrsac
