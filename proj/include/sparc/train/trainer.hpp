#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "sparc/env/history.hpp"
#include "sparc/eval/pareto.hpp"
#include "sparc/nn/checkpoint.hpp"
#include "sparc/train/config.hpp"
#include "sparc/train/replay.hpp"

namespace sparc::train {

using policy::Method;
using policy::PolicyNet;
using qrsac::NetBundle;
using qrsac::UpdatePhase;

/// Single-step action selection over env-space (double) inputs.
template <typename T>
std::vector<double> policy_act(const PolicyNet<T>& net,
                               const nn::ParameterSet<T>& ps,
                               const std::vector<double>& obs,
                               const env::Context* ctx,
                               const env::HistoryBuffer* hist,
                               bool deterministic, Rng* rng) {
  using policy::CondMode;
  const int O = net.obs_dim(), A = net.act_dim();
  nn::Tensor<T> o({1, static_cast<std::size_t>(O)});
  for (int i = 0; i < O; ++i) o[i] = static_cast<T>(obs[i]);
  nn::Tensor<T> c, h;
  const nn::Tensor<T>* cp = nullptr;
  const nn::Tensor<T>* hp = nullptr;
  if (net.mode() == CondMode::EncodedContext ||
      net.mode() == CondMode::RawContext) {
    if (!ctx) throw ConfigError("policy_act: context withheld from a policy "
                                "that requires it");
    c = nn::Tensor<T>({1, static_cast<std::size_t>(net.ctx_dim())});
    for (int i = 0; i < net.ctx_dim(); ++i)
      c[i] = static_cast<T>(ctx->values[i]);
    cp = &c;
  }
  if (net.mode() == CondMode::History) {
    if (!hist) throw ConfigError("policy_act: history withheld from a policy "
                                 "that requires it");
    h = nn::Tensor<T>({1, static_cast<std::size_t>(O + A),
                       static_cast<std::size_t>(net.hist_len())});
    hist->window_channels(h.ptr());
    hp = &h;
  }
  auto f = net.forward(ps, o, cp, hp);
  auto s = policy::sample_action(f.mean, f.log_std, rng, deterministic);
  std::vector<double> a(A);
  for (int i = 0; i < A; ++i) a[i] = static_cast<double>(s.action[i]);
  return a;
}

/// One full episode with deterministic actions; returns the episode return.
template <typename T>
double rollout_return(env::Env& e, const PolicyNet<T>& net,
                      const nn::ParameterSet<T>& ps, const env::Context& ctx,
                      std::uint64_t seed) {
  env::HistoryBuffer hist(net.hist_len(), e.obs_dim(), e.action_dim());
  auto obs = e.reset(ctx, seed);
  double ret = 0;
  while (true) {
    auto a = policy_act(net, ps, obs, &ctx, &hist, true, nullptr);
    auto r = e.step(a);
    hist.push(obs, a);
    ret += r.reward;
    obs = r.obs;
    if (r.done) break;
  }
  return ret;
}

/// Episode telemetry shared between sync and async drivers.
class TelemetryLog {
 public:
  explicit TelemetryLog(const std::string& path) {
    if (!path.empty()) {
      os_.open(path, std::ios::trunc);
      if (!os_) throw ConfigError("cannot open telemetry log: " + path);
    }
  }
  void write(const nlohmann::ordered_json& j) {
    if (!os_.is_open()) return;
    std::lock_guard<std::mutex> lk(mu_);
    os_ << j.dump() << "\n";
  }
  void flush() {
    if (os_.is_open()) os_.flush();
  }

 private:
  std::ofstream os_;
  std::mutex mu_;
};

/// Owns one environment instance plus its history and RNG streams, and
/// produces Transitions. Used by the synchronous driver and by each
/// rollout worker.
class EpisodeActor {
 public:
  EpisodeActor(std::unique_ptr<env::Env> e, int hist_len,
               std::uint64_t env_seed, std::uint64_t act_seed, int id)
      : env_(std::move(e)),
        hist_(hist_len, env_->obs_dim(), env_->action_dim()),
        env_rng_(env_seed), act_rng_(act_seed), id_(id) {}

  env::Env& environment() { return *env_; }
  Rng& act_rng() { return act_rng_; }
  Rng& env_rng() { return env_rng_; }
  int id() const { return id_; }
  const env::Context& context() const { return ctx_; }
  const env::HistoryBuffer& history() const { return hist_; }
  std::uint64_t steps_produced() const { return steps_; }

  /// Collects one transition; `act` maps (obs, ctx, hist) to an action.
  template <typename ActFn>
  Transition collect(ActFn&& act, std::uint64_t snapshot_version,
                     TelemetryLog* telemetry) {
    if (need_reset_) {
      ctx_ = env::sample_ind_context(env_->context_spec(), env_rng_);
      obs_ = env_->reset(ctx_, env_rng_.next_u64());
      hist_.reset();
      ep_return_ = 0;
      ep_len_ = 0;
      need_reset_ = false;
    }
    Transition tr;
    tr.obs = obs_;
    tr.act = act(obs_, ctx_, hist_);
    tr.hist = hist_.window();
    tr.ctx = ctx_.values;
    tr.worker_id = id_;
    tr.episode_step = static_cast<std::uint64_t>(ep_len_);
    tr.snapshot_version = snapshot_version;
    auto r = env_->step(tr.act);
    hist_.push(obs_, tr.act);
    tr.reward = r.reward;
    tr.obs2 = r.obs;
    tr.done = r.done;
    obs_ = r.obs;
    ep_return_ += r.reward;
    ++ep_len_;
    ++steps_;
    if (r.done) {
      if (telemetry) {
        nlohmann::ordered_json j;
        j["worker"] = id_;
        j["context"] = ctx_.values;
        j["return"] = ep_return_;
        j["length"] = ep_len_;
        j["snapshot_version"] = snapshot_version;
        telemetry->write(j);
      }
      need_reset_ = true;
    }
    return tr;
  }

 private:
  std::unique_ptr<env::Env> env_;
  env::HistoryBuffer hist_;
  Rng env_rng_, act_rng_;
  int id_;
  env::Context ctx_;
  std::vector<double> obs_;
  double ep_return_ = 0;
  int ep_len_ = 0;
  bool need_reset_ = true;
  std::uint64_t steps_ = 0;
};

/// Uniform random action in [-1, 1]^dim (warmup exploration).
inline std::vector<double> uniform_action(int dim, Rng& rng) {
  std::vector<double> a(dim);
  for (auto& v : a) v = rng.uniform(-1.0, 1.0);
  return a;
}

/// The learner: owns all networks, the replay buffer, the update loop,
/// training-time evaluation and checkpointing. Single thread of control;
/// rollout workers interact via ingest() and parameter snapshots only.
template <typename T>
class Learner {
 public:
  struct Options {
    RunConfig cfg;
    std::string out_dir;          // empty: no file output
    UpdatePhase phase = UpdatePhase::Full;
    bool eval_with_adapter = true;
    std::string ckpt_prefix = "ckpt";
    std::string stream_tag = "";  // distinguishes rma phases
    std::uint64_t total_updates = 0;  // 0: take from cfg
  };

  Learner(Options opt, const env::Env& proto)
      : opt_(std::move(opt)),
        cfg_(opt_.cfg),
        total_(opt_.total_updates ? opt_.total_updates : cfg_.total_updates),
        bundle_(qrsac::make_bundle<T>(
            cfg_.method_enum(), proto.obs_dim(), proto.action_dim(),
            static_cast<int>(proto.context_spec().dim()), cfg_.history_len,
            cfg_.n_quantiles,
            seed_stream(cfg_.seed, opt_.stream_tag + "init"),
            cfg_.widths())),
        buffer_(cfg_.buffer_capacity, proto.obs_dim(), proto.action_dim(),
                static_cast<int>(proto.context_spec().dim()),
                cfg_.history_len),
        batch_rng_(seed_stream(cfg_.seed, opt_.stream_tag + "batch")),
        update_rng_(seed_stream(cfg_.seed, opt_.stream_tag + "update")),
        eval_env_(proto.clone_fresh()) {
    hyper_ = cfg_.hyper();
    if (!opt_.out_dir.empty()) {
      namespace fs = std::filesystem;
      fs::create_directories(fs::path(opt_.out_dir) / "checkpoints");
      train_log_.open(opt_.out_dir + "/train.jsonl", std::ios::app);
      eval_log_.open(opt_.out_dir + "/eval.jsonl", std::ios::app);
    }
    // the three predetermined IND evaluation settings: box centre and the
    // two corners on the main diagonal
    const auto& spec = proto.context_spec();
    env::Context centre, lo, hi;
    for (const auto& [a, b] : spec.ind_ranges) {
      centre.values.push_back(0.5 * (a + b));
      lo.values.push_back(a);
      hi.values.push_back(b);
    }
    eval_settings_ = {centre, lo, hi};
  }

  const RunConfig& cfg() const { return cfg_; }
  NetBundle<T>& bundle() { return bundle_; }
  const NetBundle<T>& bundle() const { return bundle_; }
  ReplayBuffer<T>& buffer() { return buffer_; }
  std::uint64_t env_steps() const { return env_steps_; }
  std::uint64_t updates_done() const { return updates_; }
  std::uint64_t total_updates() const { return total_; }
  std::uint64_t skipped_updates() const { return skipped_; }
  bool finished() const { return updates_ >= total_; }
  bool in_warmup() const { return env_steps_ < cfg_.warmup_steps; }
  const std::vector<eval::CheckpointScore>& scores() const { return scores_; }

  const PolicyNet<T>& rollout_net() const {
    return bundle_.rollout_policy(cfg_.rollout_policy == "adapter");
  }
  const nn::ParameterSet<T>& rollout_params() const {
    return bundle_.rollout_params(cfg_.rollout_policy == "adapter");
  }

  void ingest(const Transition& tr) {
    buffer_.push(tr);
    ++env_steps_;
  }

  bool update_due() const {
    if (finished()) return false;
    if (env_steps_ < cfg_.warmup_steps) return false;
    if (buffer_.size() < static_cast<std::size_t>(cfg_.batch_size))
      return false;
    const auto due = static_cast<std::uint64_t>(
        static_cast<double>(env_steps_ - cfg_.warmup_steps) *
        cfg_.updates_per_step);
    return updates_ < due;
  }

  qrsac::StepReport do_update(const qrsac::UpdateHooks& hooks = {}) {
    auto batch = buffer_.sample(cfg_.batch_size, batch_rng_);
    ++updates_;
    auto rep = qrsac::update_step(bundle_, batch, hyper_, update_rng_,
                                  updates_, opt_.phase, hooks);
    if (rep.skipped) ++skipped_;
    if (train_log_.is_open() && updates_ % cfg_.log_every == 0) {
      nlohmann::ordered_json j;
      j["step"] = updates_;
      j["critic_loss"] = rep.critic_loss;
      j["actor_loss"] = rep.actor_loss;
      j["adapter_loss"] = rep.adapter_loss;
      j["entropy"] = rep.entropy;
      j["buffer_size"] = buffer_.size();
      train_log_ << j.dump() << "\n";
    }
    last_report_ = rep;
    if (cfg_.eval_every > 0 &&
        (updates_ % cfg_.eval_every == 0 || updates_ == total_))
      eval_and_checkpoint();
    return rep;
  }

  /// Deterministic evaluation of the deployable policy on the three IND
  /// settings; appends a CheckpointScore and saves a checkpoint file.
  void eval_and_checkpoint() {
    eval::CheckpointScore score;
    score.step = updates_;
    const auto& net = eval_net();
    const auto& ps = eval_params();
    for (std::size_t s = 0; s < eval_settings_.size(); ++s) {
      double mean = 0;
      for (int e = 0; e < cfg_.eval_episodes; ++e) {
        const auto tag = opt_.stream_tag + "traineval/" +
                         std::to_string(updates_) + "/" + std::to_string(s) +
                         "/" + std::to_string(e);
        mean += rollout_return(*eval_env_, net, ps, eval_settings_[s],
                               seed_stream(cfg_.seed, tag));
      }
      score.metrics.push_back(mean / cfg_.eval_episodes);
    }
    if (!opt_.out_dir.empty()) {
      score.path = opt_.out_dir + "/checkpoints/" + opt_.ckpt_prefix + "_" +
                   std::to_string(updates_) + ".bin";
      save_checkpoint(score.path);
    }
    if (eval_log_.is_open()) {
      nlohmann::ordered_json j;
      j["step"] = updates_;
      j["means"] = score.metrics;
      eval_log_ << j.dump() << "\n";
      eval_log_.flush();
    }
    scores_.push_back(std::move(score));
  }

  void save_checkpoint(const std::string& path) const {
    nlohmann::ordered_json meta;
    meta["method"] = cfg_.method;
    meta["env"] = cfg_.env;
    meta["obs_dim"] = eval_env_->obs_dim();
    meta["act_dim"] = eval_env_->action_dim();
    meta["ctx_dim"] = eval_env_->context_spec().dim();
    meta["history_len"] = cfg_.history_len;
    meta["n_quantiles"] = cfg_.n_quantiles;
    meta["widths"] = {cfg_.trunk_width, cfg_.latent_width,
                      cfg_.hist_embed_width, cfg_.conv_filters};
    std::vector<std::pair<std::string, const nn::ParameterSet<T>*>> sets;
    sets.emplace_back("actor", &bundle_.p_actor);
    if (bundle_.has_adapter()) sets.emplace_back("adapter", &bundle_.p_adapter);
    sets.emplace_back("critic1", &bundle_.p_c1);
    sets.emplace_back("critic2", &bundle_.p_c2);
    sets.emplace_back("target1", &bundle_.p_t1);
    sets.emplace_back("target2", &bundle_.p_t2);
    nn::save_checkpoint_file<T>(path, sets, updates_, meta);
  }

  const PolicyNet<T>& eval_net() const {
    return opt_.eval_with_adapter && bundle_.has_adapter() ? *bundle_.adapter
                                                           : *bundle_.actor;
  }
  const nn::ParameterSet<T>& eval_params() const {
    return opt_.eval_with_adapter && bundle_.has_adapter() ? bundle_.p_adapter
                                                           : bundle_.p_actor;
  }

  void flush_logs() {
    if (train_log_.is_open()) train_log_.flush();
    if (eval_log_.is_open()) eval_log_.flush();
  }

  qrsac::StepReport last_report() const { return last_report_; }
  qrsac::Hyper& hyper() { return hyper_; }

 private:
  Options opt_;
  RunConfig cfg_;
  std::uint64_t total_;
  NetBundle<T> bundle_;
  ReplayBuffer<T> buffer_;
  Rng batch_rng_, update_rng_;
  std::unique_ptr<env::Env> eval_env_;
  qrsac::Hyper hyper_;
  std::vector<env::Context> eval_settings_;
  std::vector<eval::CheckpointScore> scores_;
  std::ofstream train_log_, eval_log_;
  std::uint64_t env_steps_ = 0, updates_ = 0, skipped_ = 0;
  qrsac::StepReport last_report_;
};

/// The in-line training loop: collect one transition, then run every due
/// update, until the update budget is exhausted.
template <typename T>
void run_sync(Learner<T>& learner, EpisodeActor& actor,
              TelemetryLog* telemetry) {
  const auto& cfg = learner.cfg();
  while (!learner.finished()) {
    auto tr = actor.collect(
        [&](const std::vector<double>& obs, const env::Context& ctx,
            const env::HistoryBuffer& hist) {
          if (learner.in_warmup())
            return uniform_action(actor.environment().action_dim(),
                                  actor.act_rng());
          return policy_act(learner.rollout_net(), learner.rollout_params(),
                            obs, &ctx, &hist, false, &actor.act_rng());
        },
        learner.updates_done(), telemetry);
    (void)cfg;
    learner.ingest(tr);
    while (learner.update_due()) learner.do_update();
  }
}

struct TrainResult {
  std::string out_dir;
  eval::CheckpointScore selected;     // Pareto-selected deployable checkpoint
  eval::CheckpointScore phase1_selected;  // rma only
  std::uint64_t skipped_updates = 0;
  std::uint64_t env_steps = 0;
  std::vector<eval::CheckpointScore> scores;
};

}  // namespace sparc::train
