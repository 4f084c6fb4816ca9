#pragma once

#include "sparc/policy/policy.hpp"

namespace sparc::qrsac {

using policy::CondMode;
using policy::PolicyWidths;
using nn::GradSet;
using nn::IOShape;
using nn::LayerSpec;
using nn::ParameterSet;
using nn::Stack;
using nn::Tape;
using nn::Tensor;

/// Distributional critic: observation+action encoder, the same optional
/// conditioning as the policy (encoded context, raw context, or history),
/// and a decision trunk with an identity head of n_quantiles outputs.
template <typename T>
class CriticNet {
 public:
  CriticNet(CondMode mode, int obs_dim, int act_dim, int ctx_dim, int hist_len,
            int n_quantiles, PolicyWidths w = PolicyWidths::desk())
      : mode_(mode), obs_dim_(obs_dim), act_dim_(act_dim), ctx_dim_(ctx_dim),
        hist_len_(hist_len), n_(n_quantiles), w_(w) {
    const int oa = obs_dim + act_dim;
    oa_enc_ = Stack<T>("oa_encoder", IOShape::vec(oa),
                       {LayerSpec::dense(oa, w.trunk), LayerSpec::relu(),
                        LayerSpec::dense(w.trunk, w.trunk), LayerSpec::relu()});
    if (mode == CondMode::EncodedContext)
      ctx_enc_ = Stack<T>("context_encoder", IOShape::vec(ctx_dim),
                          {LayerSpec::dense(ctx_dim, w.latent),
                           LayerSpec::relu(),
                           LayerSpec::dense(w.latent, w.latent),
                           LayerSpec::relu()});
    if (mode == CondMode::History)
      hist_enc_ = Stack<T>(
          "history_adapter", IOShape::chans(obs_dim + act_dim, hist_len),
          policy::history_adapter_layers(obs_dim + act_dim, hist_len, w));
    decision_ = Stack<T>(
        "decision", IOShape::vec(decision_input_dim()),
        {LayerSpec::dense(decision_input_dim(), w.trunk), LayerSpec::relu(),
         LayerSpec::dense(w.trunk, w.trunk), LayerSpec::relu(),
         LayerSpec::dense(w.trunk, n_quantiles)});
  }

  CondMode mode() const { return mode_; }
  int n_quantiles() const { return n_; }
  int latent_dim() const {
    switch (mode_) {
      case CondMode::None: return 0;
      case CondMode::RawContext: return ctx_dim_;
      default: return w_.latent;
    }
  }
  int decision_input_dim() const { return w_.trunk + latent_dim(); }

  void init_params(ParameterSet<T>& ps, Rng& rng) const {
    oa_enc_.init_params(ps, rng);
    if (ctx_enc_) ctx_enc_->init_params(ps, rng);
    if (hist_enc_) hist_enc_->init_params(ps, rng);
    decision_.init_params(ps, rng);
  }

  struct Forward {
    Tensor<T> quantiles;  // (B, N)
    Tape<T> oa_tape, cond_tape, dec_tape;
    int B = 0;
    bool has_tape = false;
  };

  Forward forward(const ParameterSet<T>& ps, const Tensor<T>& obs,
                  const Tensor<T>& act, const Tensor<T>* ctx,
                  const Tensor<T>* hist, bool with_tape = false) const {
    Forward f;
    f.B = static_cast<int>(obs.shape.at(0));
    f.has_tape = with_tape;
    const int B = f.B;
    Tensor<T> oa({static_cast<std::size_t>(B),
                  static_cast<std::size_t>(obs_dim_ + act_dim_)});
    for (int b = 0; b < B; ++b) {
      for (int i = 0; i < obs_dim_; ++i)
        oa[b * (obs_dim_ + act_dim_) + i] = obs[b * obs_dim_ + i];
      for (int i = 0; i < act_dim_; ++i)
        oa[b * (obs_dim_ + act_dim_) + obs_dim_ + i] = act[b * act_dim_ + i];
    }
    Tensor<T> ell = oa_enc_.forward(ps, oa, with_tape ? &f.oa_tape : nullptr);
    Tensor<T> latent;
    switch (mode_) {
      case CondMode::None: break;
      case CondMode::RawContext:
        if (!ctx) throw ConfigError("critic: raw context required");
        latent = *ctx;
        break;
      case CondMode::EncodedContext:
        if (!ctx) throw ConfigError("critic: context required");
        latent =
            ctx_enc_->forward(ps, *ctx, with_tape ? &f.cond_tape : nullptr);
        break;
      case CondMode::History:
        if (!hist) throw ConfigError("critic: history required");
        latent =
            hist_enc_->forward(ps, *hist, with_tape ? &f.cond_tape : nullptr);
        break;
    }
    const int W = w_.trunk, L = latent_dim();
    Tensor<T> dec_in({static_cast<std::size_t>(B),
                      static_cast<std::size_t>(W + L)});
    for (int b = 0; b < B; ++b) {
      for (int i = 0; i < W; ++i) dec_in[b * (W + L) + i] = ell[b * W + i];
      for (int i = 0; i < L; ++i)
        dec_in[b * (W + L) + W + i] = latent[b * L + i];
    }
    f.quantiles =
        decision_.forward(ps, dec_in, with_tape ? &f.dec_tape : nullptr);
    return f;
  }

  /// Backward from d_quantiles. Parameter grads go to gs when non-null;
  /// d_action, when non-null, receives the gradient w.r.t. the action
  /// input (the actor's pathway into the critic).
  void backward(const ParameterSet<T>& ps, Forward& f,
                const Tensor<T>& d_quantiles, GradSet<T>* gs,
                Tensor<T>* d_action = nullptr) const {
    if (!f.has_tape) throw UsageError("critic backward without tape");
    const int B = f.B, W = w_.trunk, L = latent_dim();
    Tensor<T> d_in = decision_.backward(ps, f.dec_tape, d_quantiles, gs);
    Tensor<T> d_ell({static_cast<std::size_t>(B),
                     static_cast<std::size_t>(W)});
    Tensor<T> d_latent({static_cast<std::size_t>(B),
                        static_cast<std::size_t>(L == 0 ? 1 : L)});
    for (int b = 0; b < B; ++b) {
      for (int i = 0; i < W; ++i) d_ell[b * W + i] = d_in[b * (W + L) + i];
      for (int i = 0; i < L; ++i)
        d_latent[b * L + i] = d_in[b * (W + L) + W + i];
    }
    Tensor<T> d_oa =
        oa_enc_.backward(ps, f.oa_tape, d_ell, gs, d_action != nullptr);
    if (d_action) {
      *d_action = Tensor<T>({static_cast<std::size_t>(B),
                             static_cast<std::size_t>(act_dim_)});
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < act_dim_; ++i)
          (*d_action)[b * act_dim_ + i] =
              d_oa[b * (obs_dim_ + act_dim_) + obs_dim_ + i];
    }
    if (mode_ == CondMode::EncodedContext)
      ctx_enc_->backward(ps, f.cond_tape, d_latent, gs, false);
    else if (mode_ == CondMode::History)
      hist_enc_->backward(ps, f.cond_tape, d_latent, gs, false);
  }

 private:
  CondMode mode_;
  int obs_dim_, act_dim_, ctx_dim_, hist_len_, n_;
  PolicyWidths w_;
  Stack<T> oa_enc_;
  std::optional<Stack<T>> ctx_enc_;
  std::optional<Stack<T>> hist_enc_;
  Stack<T> decision_;
};

}  // namespace sparc::qrsac
