#pragma once

#include <chrono>

#include "sparc/rollout/async.hpp"

namespace sparc::train {

namespace detail {

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <typename T>
void load_bundle_params(qrsac::NetBundle<T>& nets,
                        nn::Checkpoint<T>& ck) {
  auto assign = [&](const char* name, nn::ParameterSet<T>& dst) {
    auto& src = ck.set(name);
    auto& de = dst.entries();
    auto& se = src.entries();
    if (de.size() != se.size())
      throw ConfigError(std::string("checkpoint set ") + name +
                        " does not match the network layout");
    for (std::size_t i = 0; i < de.size(); ++i)
      if (de[i].name != se[i].name || !de[i].value.same_shape(se[i].value))
        throw ConfigError(std::string("checkpoint set ") + name +
                          " mismatch at " + de[i].name);
    dst = std::move(src);
  };
  assign("actor", nets.p_actor);
  if (nets.has_adapter()) assign("adapter", nets.p_adapter);
  assign("critic1", nets.p_c1);
  assign("critic2", nets.p_c2);
  assign("target1", nets.p_t1);
  assign("target2", nets.p_t2);
}

template <typename T>
void drive(Learner<T>& learner, const env::Env& proto, TelemetryLog* tel) {
  const auto& cfg = learner.cfg();
  if (cfg.workers == 0) {
    const std::uint64_t wseed = cfg.seed;  // worker 0 stream
    EpisodeActor actor(proto.clone_fresh(), cfg.history_len,
                       seed_stream(wseed, "worker/env"),
                       seed_stream(wseed, "worker/act"), 0);
    run_sync(learner, actor, tel);
  } else {
    rollout::run_async(learner, proto, tel, cfg.workers);
  }
  if (learner.scores().empty()) learner.eval_and_checkpoint();
  learner.flush_logs();
}

}  // namespace detail

template <typename T>
TrainResult train_run_impl(const RunConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const Method method = cfg.method_enum();
  auto proto = env::make_env(cfg.env, cfg.env_overrides);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream mf(out_dir + "/manifest.ini", std::ios::trunc);
    mf << cfg.manifest(detail::timestamp_utc());
    for (const char* f : {"train.jsonl", "eval.jsonl", "telemetry.jsonl"})
      if (fs::exists(fs::path(out_dir) / f))
        fs::remove(fs::path(out_dir) / f);
  }
  TelemetryLog telemetry(out_dir.empty() ? "" : out_dir + "/telemetry.jsonl");

  TrainResult result;
  result.out_dir = out_dir;

  if (method == Method::Rma) {
    if (out_dir.empty())
      throw ConfigError("rma: two-phase training needs an output directory "
                        "for phase-1 checkpoint selection");
    const auto b1 = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(cfg.total_updates) *
                     cfg.rma_phase1_fraction));
    const auto b2 = cfg.total_updates - b1;
    if (b1 == 0 || b2 == 0)
      throw ConfigError("rma: phase budgets must both be positive");

    // phase 1: train the context-conditioned policy, rollouts by itself
    RunConfig cfg1 = cfg;
    cfg1.rollout_policy = "expert";
    typename Learner<T>::Options o1;
    o1.cfg = cfg1;
    o1.out_dir = out_dir;
    o1.phase = UpdatePhase::SacOnly;
    o1.eval_with_adapter = false;
    o1.ckpt_prefix = "p1";
    o1.stream_tag = "";  // shares single-phase streams (collapse identity)
    o1.total_updates = b1;
    Learner<T> phase1(std::move(o1), *proto);
    detail::drive(phase1, *proto, &telemetry);
    const auto& s1 = phase1.scores();
    const std::size_t star = eval::pareto_select(s1);
    result.phase1_selected = s1[star];
    result.skipped_updates += phase1.skipped_updates();
    result.env_steps += phase1.env_steps();

    // phase 2: freeze the selected encoder, regress the history adapter
    // on experience collected by the adapter policy (fresh buffer)
    RunConfig cfg2 = cfg;
    cfg2.rollout_policy = "adapter";
    typename Learner<T>::Options o2;
    o2.cfg = cfg2;
    o2.out_dir = out_dir;
    o2.phase = UpdatePhase::AdapterOnly;
    o2.eval_with_adapter = true;
    o2.ckpt_prefix = "ckpt";
    o2.stream_tag = "p2/";
    o2.total_updates = b2;
    Learner<T> phase2(std::move(o2), *proto);
    if (result.phase1_selected.path.empty())
      throw ConfigError("rma: phase 2 started without a selected phase-1 "
                        "checkpoint");
    auto ck = nn::load_checkpoint_file<T>(result.phase1_selected.path);
    detail::load_bundle_params(phase2.bundle(), ck);
    copy_entries(phase2.bundle().p_adapter, phase2.bundle().p_actor,
                 PolicyNet<T>::shared_prefixes());
    detail::drive(phase2, *proto, &telemetry);
    result.scores = phase2.scores();
    result.selected = result.scores[eval::pareto_select(result.scores)];
    result.skipped_updates += phase2.skipped_updates();
    result.env_steps += phase2.env_steps();
  } else {
    typename Learner<T>::Options opt;
    opt.cfg = cfg;
    opt.out_dir = out_dir;
    opt.phase =
        method == Method::Sparc ? UpdatePhase::Full : UpdatePhase::SacOnly;
    opt.eval_with_adapter = method == Method::Sparc;
    Learner<T> learner(std::move(opt), *proto);
    detail::drive(learner, *proto, &telemetry);
    result.scores = learner.scores();
    result.selected = result.scores[eval::pareto_select(result.scores)];
    result.skipped_updates = learner.skipped_updates();
    result.env_steps = learner.env_steps();
  }

  if (!out_dir.empty()) {
    nlohmann::ordered_json j;
    j["method"] = cfg.method;
    j["env"] = cfg.env;
    j["seed"] = cfg.seed;
    j["selected_step"] = result.selected.step;
    j["selected_path"] = result.selected.path;
    j["selected_metrics"] = result.selected.metrics;
    if (method == Method::Rma) {
      j["phase1_selected_step"] = result.phase1_selected.step;
      j["phase1_selected_path"] = result.phase1_selected.path;
    }
    j["skipped_updates"] = result.skipped_updates;
    j["env_steps"] = result.env_steps;
    std::ofstream os(out_dir + "/summary.json", std::ios::trunc);
    os << j.dump(2) << "\n";
  }
  return result;
}

/// Entry point used by the CLI and the test harnesses. Dispatches on the
/// configured precision (training defaults to f32; f64 for test rigs).
inline TrainResult train_run(const RunConfig& cfg, const std::string& out_dir,
                             bool force = true) {
  cfg.validate();
  if (!out_dir.empty() && !force &&
      std::filesystem::exists(std::filesystem::path(out_dir) /
                              "manifest.ini"))
    throw ConfigError("output directory already holds a run (use --force): " +
                      out_dir);
  if (cfg.precision == "f64") return train_run_impl<double>(cfg, out_dir);
  return train_run_impl<float>(cfg, out_dir);
}

}  // namespace sparc::train
