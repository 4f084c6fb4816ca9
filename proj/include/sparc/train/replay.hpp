#pragma once

#include <mutex>
#include <vector>

#include "sparc/nn/rng.hpp"
#include "sparc/qrsac/qrsac.hpp"

namespace sparc::train {

/// One stored experience tuple. The history window `hist` is the
/// (obs+act) x H channel-major window recorded *before* (obs, act) was
/// appended, and `ctx` is the episode's sampled context.
struct Transition {
  std::vector<double> obs, act, obs2, hist, ctx;
  double reward = 0.0;
  bool done = false;
  // provenance, for telemetry and ordering audits
  int worker_id = 0;
  std::uint64_t episode_step = 0;
  std::uint64_t snapshot_version = 0;
};

/// FIFO ring of transitions in struct-of-arrays form, sampled uniformly
/// with replacement. Push and sample may come from different threads of
/// control; both serialize on an internal mutex.
template <typename T>
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim, int ctx_dim,
               int hist_len)
      : cap_(capacity), O_(obs_dim), A_(act_dim), C_(ctx_dim), H_(hist_len),
        hist_row_(static_cast<std::size_t>(obs_dim + act_dim) * hist_len) {
    if (capacity == 0) throw ConfigError("replay: zero capacity");
    obs_.resize(cap_ * O_);
    act_.resize(cap_ * A_);
    obs2_.resize(cap_ * O_);
    ctx_.resize(cap_ * C_);
    hist_.resize(cap_ * hist_row_);
    rew_.resize(cap_);
    done_.resize(cap_);
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lk(mu_);
    return std::min(count_, cap_);
  }
  std::size_t capacity() const { return cap_; }
  std::uint64_t pushed_total() const {
    std::lock_guard<std::mutex> lk(mu_);
    return count_;
  }

  void push(const Transition& tr) {
    if (tr.obs.size() != static_cast<std::size_t>(O_) ||
        tr.act.size() != static_cast<std::size_t>(A_) ||
        tr.ctx.size() != static_cast<std::size_t>(C_) ||
        tr.hist.size() != hist_row_)
      throw ConfigError("replay: transition dims mismatch");
    std::lock_guard<std::mutex> lk(mu_);
    const std::size_t i = count_ % cap_;
    copy_row(obs_, i, O_, tr.obs);
    copy_row(act_, i, A_, tr.act);
    copy_row(obs2_, i, O_, tr.obs2);
    copy_row(ctx_, i, C_, tr.ctx);
    for (std::size_t k = 0; k < hist_row_; ++k)
      hist_[i * hist_row_ + k] = static_cast<T>(tr.hist[k]);
    rew_[i] = static_cast<T>(tr.reward);
    done_[i] = tr.done ? T(1) : T(0);
    ++count_;
  }

  /// Uniform sample with replacement; also assembles the post-step history
  /// window hist2 = hist shifted left with (obs, act) appended.
  qrsac::Batch<T> sample(int B, Rng& rng) const {
    std::lock_guard<std::mutex> lk(mu_);
    const std::size_t n = std::min(count_, cap_);
    if (n < static_cast<std::size_t>(B))
      throw UsageError("replay: sampling before the buffer holds a batch");
    qrsac::Batch<T> batch;
    batch.B = B;
    const auto ub = static_cast<std::size_t>(B);
    batch.obs = nn::Tensor<T>({ub, static_cast<std::size_t>(O_)});
    batch.act = nn::Tensor<T>({ub, static_cast<std::size_t>(A_)});
    batch.obs2 = nn::Tensor<T>({ub, static_cast<std::size_t>(O_)});
    batch.ctx = nn::Tensor<T>({ub, static_cast<std::size_t>(C_)});
    batch.rew = nn::Tensor<T>({ub});
    batch.done = nn::Tensor<T>({ub});
    batch.hist = nn::Tensor<T>({ub, static_cast<std::size_t>(O_ + A_),
                                static_cast<std::size_t>(H_)});
    batch.hist2 = nn::Tensor<T>(batch.hist.shape);
    for (int b = 0; b < B; ++b) {
      const std::size_t i = rng.uniform_index(n);
      for (int k = 0; k < O_; ++k) {
        batch.obs[b * O_ + k] = obs_[i * O_ + k];
        batch.obs2[b * O_ + k] = obs2_[i * O_ + k];
      }
      for (int k = 0; k < A_; ++k) batch.act[b * A_ + k] = act_[i * A_ + k];
      for (int k = 0; k < C_; ++k) batch.ctx[b * C_ + k] = ctx_[i * C_ + k];
      batch.rew[b] = rew_[i];
      batch.done[b] = done_[i];
      const T* h = hist_.data() + i * hist_row_;
      T* h1 = batch.hist.ptr() + static_cast<std::size_t>(b) * hist_row_;
      T* h2 = batch.hist2.ptr() + static_cast<std::size_t>(b) * hist_row_;
      for (int c = 0; c < O_ + A_; ++c) {
        for (int l = 0; l < H_; ++l) h1[c * H_ + l] = h[c * H_ + l];
        for (int l = 0; l + 1 < H_; ++l) h2[c * H_ + l] = h[c * H_ + l + 1];
        h2[c * H_ + H_ - 1] = c < O_ ? obs_[i * O_ + c]
                                     : act_[i * A_ + (c - O_)];
      }
    }
    return batch;
  }

 private:
  void copy_row(std::vector<T>& dst, std::size_t i, int dim,
                const std::vector<double>& src) {
    for (int k = 0; k < dim; ++k)
      dst[i * dim + k] = static_cast<T>(src[k]);
  }

  std::size_t cap_;
  int O_, A_, C_, H_;
  std::size_t hist_row_;
  std::vector<T> obs_, act_, obs2_, ctx_, hist_, rew_, done_;
  std::uint64_t count_ = 0;
  mutable std::mutex mu_;
};

}  // namespace sparc::train
