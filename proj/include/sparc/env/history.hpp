#pragma once

#include <cstring>
#include <vector>

#include "sparc/common.hpp"

namespace sparc::env {

/// Fixed-length window of the last H observation-action pairs. Slots are
/// zero-initialised; pre-episode positions stay zero until H pushes have
/// happened. The window is exposed channel-major for the history adapter:
/// (obs features, then action features) x H, most recent in the last column.
class HistoryBuffer {
 public:
  HistoryBuffer(int capacity, int obs_dim, int act_dim)
      : H_(capacity), obs_dim_(obs_dim), act_dim_(act_dim),
        slot_(obs_dim + act_dim),
        ring_(static_cast<std::size_t>(capacity) * slot_, 0.0) {
    if (capacity < 1) throw ConfigError("history: capacity must be >= 1");
  }

  int capacity() const { return H_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  std::uint64_t pushes() const { return count_; }

  void reset() {
    std::fill(ring_.begin(), ring_.end(), 0.0);
    count_ = 0;
  }

  void push(const std::vector<double>& o, const std::vector<double>& a) {
    if (static_cast<int>(o.size()) != obs_dim_ ||
        static_cast<int>(a.size()) != act_dim_)
      throw ConfigError("history: push dims do not match buffer");
    double* s = ring_.data() + (count_ % H_) * slot_;
    std::memcpy(s, o.data(), sizeof(double) * obs_dim_);
    std::memcpy(s + obs_dim_, a.data(), sizeof(double) * act_dim_);
    ++count_;
  }

  /// Writes the (obs_dim+act_dim) x H window into dst, row-major over
  /// channels. Column l holds push (count - H + l); missing pushes are zero.
  template <typename T>
  void window_channels(T* dst) const {
    const int C = slot_;
    for (int l = 0; l < H_; ++l) {
      const std::int64_t p =
          static_cast<std::int64_t>(count_) - H_ + l;  // push index
      if (p < 0) {
        for (int c = 0; c < C; ++c) dst[static_cast<std::size_t>(c) * H_ + l] = T(0);
      } else {
        const double* s = ring_.data() + (static_cast<std::uint64_t>(p) % H_) * slot_;
        for (int c = 0; c < C; ++c)
          dst[static_cast<std::size_t>(c) * H_ + l] = static_cast<T>(s[c]);
      }
    }
  }

  std::vector<double> window() const {
    std::vector<double> out(static_cast<std::size_t>(slot_) * H_);
    window_channels(out.data());
    return out;
  }

 private:
  int H_, obs_dim_, act_dim_, slot_;
  std::vector<double> ring_;
  std::uint64_t count_ = 0;
};

}  // namespace sparc::env
