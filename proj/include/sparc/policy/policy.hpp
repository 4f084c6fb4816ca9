#pragma once

#include <optional>
#include <string>

#include "sparc/nn/stack.hpp"

namespace sparc::policy {

using nn::GradSet;
using nn::IOShape;
using nn::LayerSpec;
using nn::ParameterSet;
using nn::Stack;
using nn::Tape;
using nn::Tensor;

enum class Method { Sparc, Rma, OnlyObs, HistoryInput, Oracle };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Sparc: return "sparc";
    case Method::Rma: return "rma";
    case Method::OnlyObs: return "only_obs";
    case Method::HistoryInput: return "history_input";
    case Method::Oracle: return "oracle";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::Sparc, Method::Rma, Method::OnlyObs,
                   Method::HistoryInput, Method::Oracle})
    if (s == method_name(m)) return m;
  throw ConfigError("unknown method: " + s);
}

/// The set of inputs each method receives during training and at test time.
struct MethodContract {
  bool train_hist = false, train_ctx = false;
  bool test_hist = false, test_ctx = false;  // obs always present
};

inline MethodContract contract_for(Method m) {
  switch (m) {
    case Method::Sparc:
    case Method::Rma: return {true, true, true, false};
    case Method::OnlyObs: return {false, false, false, false};
    case Method::HistoryInput: return {true, false, true, false};
    case Method::Oracle: return {false, true, false, true};
  }
  return {};
}

/// How a network is conditioned beyond the observation.
enum class CondMode { None, EncodedContext, RawContext, History };

struct PolicyWidths {
  int trunk = 256;      // W: obs encoder and decision widths
  int latent = 32;      // context/history latent dimension
  int hist_embed = 32;  // per-step embedding of (o, a) pairs
  int conv_filters = 32;

  static PolicyWidths desk() { return {256, 32, 32, 32}; }
  static PolicyWidths gt() { return {2048, 64, 64, 32}; }
};

inline constexpr double kLogStdLo = -6.907755278982137;  // ln 1e-3
inline constexpr double kLogStdHi = 2.302585092994046;   // ln 10

/// History adapter stack: per-step embedding (kernel-1 conv), a strided
/// temporal conv, two kernel-5 refiners, then a dense projection to the
/// latent. Output length after the stride-4 stage is ceil(H/4).
inline std::vector<LayerSpec> history_adapter_layers(int in_ch, int hist_len,
                                                     const PolicyWidths& w) {
  const int l2 = nn::conv_out_len(hist_len, 4);
  return {LayerSpec::conv1d(in_ch, w.hist_embed, 1, 1),
          LayerSpec::relu(),
          LayerSpec::conv1d(w.hist_embed, w.conv_filters, 8, 4),
          LayerSpec::relu(),
          LayerSpec::conv1d(w.conv_filters, w.conv_filters, 5, 1),
          LayerSpec::relu(),
          LayerSpec::conv1d(w.conv_filters, w.conv_filters, 5, 1),
          LayerSpec::relu(),
          LayerSpec::flatten(),
          LayerSpec::dense(w.conv_filters * l2, w.latent),
          LayerSpec::relu()};
}

/// Actor network: observation encoder, optional context encoder psi or
/// history adapter phi, decision trunk ending in a tanh head that emits
/// 2 * action_dim values (pre-squash mean, then a tanh-coded log-std).
template <typename T>
class PolicyNet {
 public:
  PolicyNet(CondMode mode, int obs_dim, int act_dim, int ctx_dim, int hist_len,
            PolicyWidths w = PolicyWidths::desk())
      : mode_(mode), obs_dim_(obs_dim), act_dim_(act_dim), ctx_dim_(ctx_dim),
        hist_len_(hist_len), w_(w) {
    obs_enc_ = Stack<T>("obs_encoder", IOShape::vec(obs_dim),
                        {LayerSpec::dense(obs_dim, w.trunk), LayerSpec::relu(),
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
          history_adapter_layers(obs_dim + act_dim, hist_len, w));
    decision_ = Stack<T>(
        "decision", IOShape::vec(decision_input_dim()),
        {LayerSpec::dense(decision_input_dim(), w.trunk), LayerSpec::relu(),
         LayerSpec::dense(w.trunk, w.trunk), LayerSpec::relu(),
         LayerSpec::dense(w.trunk, 2 * act_dim), LayerSpec::tanh_act()});
  }

  CondMode mode() const { return mode_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int ctx_dim() const { return ctx_dim_; }
  int hist_len() const { return hist_len_; }
  const PolicyWidths& widths() const { return w_; }

  int latent_dim() const {
    switch (mode_) {
      case CondMode::None: return 0;
      case CondMode::RawContext: return ctx_dim_;
      default: return w_.latent;
    }
  }
  int decision_input_dim() const { return w_.trunk + latent_dim(); }

  void init_params(ParameterSet<T>& ps, Rng& rng) const {
    obs_enc_.init_params(ps, rng);
    if (ctx_enc_) ctx_enc_->init_params(ps, rng);
    if (hist_enc_) hist_enc_->init_params(ps, rng);
    decision_.init_params(ps, rng);
  }

  /// Weights shared with the adapter policy (Fig-style trunk copy).
  static std::vector<std::string> shared_prefixes() {
    return {"obs_encoder.", "decision."};
  }

  struct Forward {
    Tensor<T> mean, log_std;  // each (B, A)
    Tensor<T> latent;         // (B, latent_dim); empty in None mode
    Tape<T> obs_tape, cond_tape, dec_tape;
    int B = 0;
    bool has_tape = false;
  };

  Forward forward(const ParameterSet<T>& ps, const Tensor<T>& obs,
                  const Tensor<T>* ctx, const Tensor<T>* hist,
                  bool with_tape = false) const {
    Forward f;
    f.B = static_cast<int>(obs.shape.at(0));
    f.has_tape = with_tape;
    Tensor<T> latent;
    switch (mode_) {
      case CondMode::None:
        break;
      case CondMode::RawContext:
        if (!ctx) throw ConfigError("policy: raw context required");
        latent = *ctx;
        break;
      case CondMode::EncodedContext:
        if (!ctx) throw ConfigError("policy: context required");
        latent = ctx_enc_->forward(ps, *ctx, with_tape ? &f.cond_tape : nullptr);
        break;
      case CondMode::History:
        if (!hist) throw ConfigError("policy: history required");
        if (hist->shape.size() != 3 ||
            hist->shape[2] != static_cast<std::size_t>(hist_len_))
          throw ConfigError("policy: history window must have length " +
                            std::to_string(hist_len_));
        latent =
            hist_enc_->forward(ps, *hist, with_tape ? &f.cond_tape : nullptr);
        break;
    }
    f.latent = latent;
    trunk_forward(ps, obs, latent, f);
    return f;
  }

  /// Trunk with an externally supplied latent (also a test seam for the
  /// expert/adapter parameter-sharing consistency check).
  Forward forward_with_latent(const ParameterSet<T>& ps, const Tensor<T>& obs,
                              const Tensor<T>& latent) const {
    Forward f;
    f.B = static_cast<int>(obs.shape.at(0));
    f.latent = latent;
    trunk_forward(ps, obs, latent, f);
    return f;
  }

  /// Backward through head, decision, obs encoder and the conditioning
  /// encoder. d_latent_out, when non-null, receives the gradient w.r.t.
  /// the latent (before the conditioning encoder consumes it).
  void backward(const ParameterSet<T>& ps, Forward& f, const Tensor<T>& d_mean,
                const Tensor<T>& d_log_std, GradSet<T>* gs,
                Tensor<T>* d_latent_out = nullptr) const {
    if (!f.has_tape) throw UsageError("policy backward without tape");
    const int B = f.B, A = act_dim_;
    Tensor<T> d_out({static_cast<std::size_t>(B),
                     static_cast<std::size_t>(2 * A)});
    const T slope = static_cast<T>(0.5 * (kLogStdHi - kLogStdLo));
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < A; ++j) {
        d_out[b * 2 * A + j] = d_mean[b * A + j];
        d_out[b * 2 * A + A + j] = d_log_std[b * A + j] * slope;
      }
    Tensor<T> d_in = decision_.backward(ps, f.dec_tape, d_out, gs);
    const int W = w_.trunk, L = latent_dim();
    Tensor<T> d_obs_latent({static_cast<std::size_t>(B),
                            static_cast<std::size_t>(W)});
    Tensor<T> d_latent({static_cast<std::size_t>(B),
                        static_cast<std::size_t>(L == 0 ? 1 : L)});
    for (int b = 0; b < B; ++b) {
      for (int i = 0; i < W; ++i)
        d_obs_latent[b * W + i] = d_in[b * (W + L) + i];
      for (int i = 0; i < L; ++i)
        d_latent[b * L + i] = d_in[b * (W + L) + W + i];
    }
    obs_enc_.backward(ps, f.obs_tape, d_obs_latent, gs, false);
    if (L > 0 && d_latent_out) *d_latent_out = d_latent;
    if (mode_ == CondMode::EncodedContext)
      ctx_enc_->backward(ps, f.cond_tape, d_latent, gs, false);
    else if (mode_ == CondMode::History)
      hist_enc_->backward(ps, f.cond_tape, d_latent, gs, false);
  }

  /// psi only: context -> z. No tape; used as the (detached) Eq.-2 target.
  Tensor<T> context_latent(const ParameterSet<T>& ps,
                           const Tensor<T>& ctx) const {
    if (mode_ != CondMode::EncodedContext)
      throw ConfigError("policy: no context encoder in this mode");
    return ctx_enc_->forward(ps, ctx);
  }

  /// phi only: history window -> z_hat.
  Tensor<T> adapter_latent(const ParameterSet<T>& ps, const Tensor<T>& hist,
                           Tape<T>* tape = nullptr) const {
    if (mode_ != CondMode::History)
      throw ConfigError("policy: no history adapter in this mode");
    return hist_enc_->forward(ps, hist, tape);
  }

  void adapter_latent_backward(const ParameterSet<T>& ps, Tape<T>& tape,
                               const Tensor<T>& d_zhat, GradSet<T>& gs) const {
    hist_enc_->backward(ps, tape, d_zhat, &gs, false);
  }

  const Stack<T>& decision_stack() const { return decision_; }
  const Stack<T>& obs_stack() const { return obs_enc_; }
  const Stack<T>* history_stack() const {
    return hist_enc_ ? &*hist_enc_ : nullptr;
  }
  const Stack<T>* context_stack() const {
    return ctx_enc_ ? &*ctx_enc_ : nullptr;
  }

 private:
  void trunk_forward(const ParameterSet<T>& ps, const Tensor<T>& obs,
                     const Tensor<T>& latent, Forward& f) const {
    const int B = f.B;
    Tensor<T> ell =
        obs_enc_.forward(ps, obs, f.has_tape ? &f.obs_tape : nullptr);
    const int W = w_.trunk, L = latent_dim();
    Tensor<T> dec_in({static_cast<std::size_t>(B),
                      static_cast<std::size_t>(W + L)});
    if (L > 0 && latent.numel() != static_cast<std::size_t>(B) * L)
      throw ConfigError("policy: latent dim mismatch");
    for (int b = 0; b < B; ++b) {
      for (int i = 0; i < W; ++i) dec_in[b * (W + L) + i] = ell[b * W + i];
      for (int i = 0; i < L; ++i)
        dec_in[b * (W + L) + W + i] = latent[b * L + i];
    }
    Tensor<T> out =
        decision_.forward(ps, dec_in, f.has_tape ? &f.dec_tape : nullptr);
    const int A = act_dim_;
    f.mean = Tensor<T>({static_cast<std::size_t>(B),
                        static_cast<std::size_t>(A)});
    f.log_std = Tensor<T>(f.mean.shape);
    const T lo = static_cast<T>(kLogStdLo);
    const T slope = static_cast<T>(0.5 * (kLogStdHi - kLogStdLo));
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < A; ++j) {
        f.mean[b * A + j] = out[b * 2 * A + j];
        const T t = out[b * 2 * A + A + j];  // in (-1, 1) after tanh
        f.log_std[b * A + j] = lo + (t + T(1)) * slope;
      }
  }

  CondMode mode_;
  int obs_dim_, act_dim_, ctx_dim_, hist_len_;
  PolicyWidths w_;
  Stack<T> obs_enc_;
  std::optional<Stack<T>> ctx_enc_;
  std::optional<Stack<T>> hist_enc_;
  Stack<T> decision_;
};

template <typename T>
struct ActionSample {
  Tensor<T> action;      // tanh(u), strictly inside (-1, 1)
  Tensor<T> pre_squash;  // u
  Tensor<T> eps;         // standard normal draws (zero when deterministic)
  std::vector<double> log_prob;  // per batch row
};

inline constexpr double kSquashEps = 1e-6;

/// Draws a = tanh(mean + exp(log_std) * eps); deterministic mode returns
/// tanh(mean). Log-probs include the tanh change-of-variables correction.
template <typename T>
ActionSample<T> sample_action(const Tensor<T>& mean, const Tensor<T>& log_std,
                              Rng* rng, bool deterministic) {
  const std::size_t B = mean.shape.at(0), A = mean.shape.at(1);
  ActionSample<T> s;
  s.pre_squash = Tensor<T>(mean.shape);
  s.eps = Tensor<T>(mean.shape);
  s.action = Tensor<T>(mean.shape);
  s.log_prob.assign(B, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    double lp = 0.0;
    for (std::size_t j = 0; j < A; ++j) {
      const std::size_t k = b * A + j;
      const double ls = static_cast<double>(log_std[k]);
      double e = 0.0;
      if (!deterministic) {
        if (!rng) throw UsageError("sample_action: stochastic draw needs rng");
        e = rng->normal();
      }
      const double u = static_cast<double>(mean[k]) + std::exp(ls) * e;
      const double a = std::tanh(u);
      s.eps[k] = static_cast<T>(e);
      s.pre_squash[k] = static_cast<T>(u);
      s.action[k] = static_cast<T>(a);
      lp += -0.5 * e * e - ls - 0.5 * std::log(2.0 * 3.14159265358979323846) -
            std::log(1.0 - a * a + kSquashEps);
    }
    s.log_prob[b] = lp;
  }
  return s;
}

/// Eq.-2 regression loss: mean over batch and latent dims of (z - z_hat)^2.
/// z is the detached target; the gradient returned is w.r.t. z_hat only.
template <typename T>
double adapter_loss(const Tensor<T>& z, const Tensor<T>& z_hat) {
  if (!z.same_shape(z_hat)) throw ConfigError("adapter_loss: shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < z.numel(); ++i) {
    const double d = static_cast<double>(z[i]) - static_cast<double>(z_hat[i]);
    s += d * d;
  }
  return s / static_cast<double>(z.numel());
}

template <typename T>
std::pair<double, Tensor<T>> adapter_loss_grad(const Tensor<T>& z,
                                               const Tensor<T>& z_hat) {
  const double loss = adapter_loss(z, z_hat);
  Tensor<T> d(z_hat.shape);
  const double scale = 2.0 / static_cast<double>(z.numel());
  for (std::size_t i = 0; i < z.numel(); ++i)
    d[i] = static_cast<T>(scale * (static_cast<double>(z_hat[i]) -
                                   static_cast<double>(z[i])));
  return {loss, std::move(d)};
}

}  // namespace sparc::policy
