#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <thread>

#include "sparc/train/trainer.hpp"

namespace sparc::rollout {

using train::Transition;

/// Bounded many-producer / one-consumer queue. On overflow the oldest
/// unconsumed item is dropped and counted; producers may also wait for
/// space first (soft backpressure), which makes drops rare in practice.
class TransitionQueue {
 public:
  explicit TransitionQueue(std::size_t capacity) : cap_(capacity) {
    if (capacity == 0) throw ConfigError("queue: zero capacity");
  }

  void push(Transition tr) {
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (q_.size() >= cap_) {
        q_.pop_front();
        ++dropped_;
      }
      q_.push_back(std::move(tr));
      ++pushed_;
    }
    cv_pop_.notify_one();
  }

  /// Blocks while the queue is full (or until stop); then pushes.
  void push_backpressure(Transition tr, const std::atomic<bool>& stop) {
    {
      std::unique_lock<std::mutex> lk(mu_);
      cv_push_.wait(lk, [&] { return q_.size() < cap_ || stop.load(); });
      if (q_.size() >= cap_) {
        q_.pop_front();
        ++dropped_;
      }
      q_.push_back(std::move(tr));
      ++pushed_;
    }
    cv_pop_.notify_one();
  }

  /// Pops one item; returns false when stopped and empty.
  bool pop_wait(Transition& out, const std::atomic<bool>& stop) {
    std::unique_lock<std::mutex> lk(mu_);
    cv_pop_.wait(lk, [&] { return !q_.empty() || stop.load(); });
    if (q_.empty()) return false;
    out = std::move(q_.front());
    q_.pop_front();
    lk.unlock();
    cv_push_.notify_one();
    return true;
  }

  void notify_all() {
    cv_pop_.notify_all();
    cv_push_.notify_all();
  }

  std::uint64_t pushed() const {
    std::lock_guard<std::mutex> lk(mu_);
    return pushed_;
  }
  std::uint64_t dropped() const {
    std::lock_guard<std::mutex> lk(mu_);
    return dropped_;
  }
  std::size_t size() const {
    std::lock_guard<std::mutex> lk(mu_);
    return q_.size();
  }

 private:
  std::size_t cap_;
  std::deque<Transition> q_;
  std::uint64_t pushed_ = 0, dropped_ = 0;
  mutable std::mutex mu_;
  std::condition_variable cv_pop_, cv_push_;
};

/// Published parameter snapshot; immutable once shared.
template <typename T>
struct Snapshot {
  std::uint64_t version = 0;
  nn::ParameterSet<T> params;
};

/// Single-writer / many-reader channel. Readers always observe a whole
/// snapshot (shared_ptr swap under a lock; never a torn mix of versions).
template <typename T>
class SnapshotChannel {
 public:
  void publish(const nn::ParameterSet<T>& params, std::uint64_t version) {
    auto snap = std::make_shared<Snapshot<T>>();
    snap->version = version;
    snap->params = params;
    std::lock_guard<std::mutex> lk(mu_);
    if (latest_ && version <= latest_->version)
      throw UsageError("snapshot: version must strictly increase");
    latest_ = std::move(snap);
  }

  std::shared_ptr<const Snapshot<T>> latest() const {
    std::lock_guard<std::mutex> lk(mu_);
    return latest_;
  }

 private:
  std::shared_ptr<Snapshot<T>> latest_;
  mutable std::mutex mu_;
};

template <typename T>
struct AsyncStats {
  std::uint64_t pushed = 0, dropped = 0, env_steps = 0;
};

/// Spawns `n` rollout workers streaming transitions into the learner's
/// buffer while the learner updates in the calling thread. With one worker
/// and snapshot cadence 1 the driver runs in lockstep and reproduces the
/// synchronous loop bit for bit.
template <typename T>
AsyncStats<T> run_async(train::Learner<T>& learner, const env::Env& proto,
                        train::TelemetryLog* telemetry, int n_workers) {
  if (n_workers < 1) throw ConfigError("rollout: need at least one worker");
  const auto& cfg = learner.cfg();
  const bool lockstep = n_workers == 1 && cfg.snapshot_cadence == 1;

  TransitionQueue queue(cfg.queue_capacity);
  SnapshotChannel<T> snapshots;
  snapshots.publish(learner.rollout_params(), 0);
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> global_steps{0};

  // lockstep handshake state
  std::mutex ls_mu;
  std::condition_variable ls_cv;
  std::uint64_t produced = 0, processed = 0;

  const policy::PolicyNet<T>& net = learner.rollout_net();
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    threads.emplace_back([&, w] {
      // worker streams are derived from base_seed ^ worker id
      const std::uint64_t wseed = cfg.seed ^ static_cast<std::uint64_t>(w);
      train::EpisodeActor actor(proto.clone_fresh(), cfg.history_len,
                                seed_stream(wseed, "worker/env"),
                                seed_stream(wseed, "worker/act"), w);
      std::shared_ptr<const Snapshot<T>> snap = snapshots.latest();
      std::uint64_t since_refresh = 0;
      while (!stop.load()) {
        if (lockstep) {
          std::unique_lock<std::mutex> lk(ls_mu);
          ls_cv.wait(lk,
                     [&] { return processed == produced || stop.load(); });
          if (stop.load()) break;
        }
        if (since_refresh >= cfg.snapshot_cadence || lockstep) {
          snap = snapshots.latest();
          since_refresh = 0;
        }
        const bool warmup =
            global_steps.fetch_add(1) < cfg.warmup_steps;
        auto tr = actor.collect(
            [&](const std::vector<double>& obs, const env::Context& ctx,
                const env::HistoryBuffer& hist) {
              if (warmup)
                return train::uniform_action(
                    actor.environment().action_dim(), actor.act_rng());
              return train::policy_act(net, snap->params, obs, &ctx, &hist,
                                       false, &actor.act_rng());
            },
            snap->version, telemetry);
        ++since_refresh;
        queue.push_backpressure(std::move(tr), stop);
        if (lockstep) {
          std::lock_guard<std::mutex> lk(ls_mu);
          ++produced;
        }
      }
    });
  }

  Transition tr;
  while (!learner.finished()) {
    if (!queue.pop_wait(tr, stop)) break;
    learner.ingest(tr);
    bool updated = false;
    while (learner.update_due()) {
      learner.do_update();
      updated = true;
    }
    if (updated)
      snapshots.publish(learner.rollout_params(), learner.updates_done());
    if (lockstep) {
      {
        std::lock_guard<std::mutex> lk(ls_mu);
        ++processed;
      }
      ls_cv.notify_all();
    }
  }
  stop.store(true);
  queue.notify_all();
  ls_cv.notify_all();
  for (auto& t : threads) t.join();

  AsyncStats<T> stats;
  stats.pushed = queue.pushed();
  stats.dropped = queue.dropped();
  stats.env_steps = global_steps.load();
  return stats;
}

}  // namespace sparc::rollout
