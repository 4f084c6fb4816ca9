#pragma once

#include <memory>

#include "sparc/eval/grid.hpp"
#include "sparc/nn/checkpoint.hpp"
#include "sparc/train/trainer.hpp"

namespace sparc::eval {

/// Loads a training checkpoint and wraps its deployable policy as an
/// EvalPolicy honoring the method's test-time input contract: the adapter
/// for single/two-phase runs (obs + history), the raw policy otherwise.
/// `withhold_context` simulates deployment without privileged context and
/// is a contract violation for the context-at-test-time method.
inline EvalPolicy eval_policy_from_checkpoint(const std::string& path,
                                              bool withhold_context = false) {
  auto ck = std::make_shared<nn::Checkpoint<double>>(
      nn::load_checkpoint_file<double>(path));
  const auto& meta = ck->meta;
  const auto method = policy::parse_method(meta.at("method"));
  const int O = meta.at("obs_dim"), A = meta.at("act_dim");
  const int C = meta.at("ctx_dim"), H = meta.at("history_len");
  policy::PolicyWidths w = policy::PolicyWidths::desk();
  if (meta.contains("widths")) {
    const auto& jw = meta.at("widths");
    w = {jw.at(0), jw.at(1), jw.at(2), jw.at(3)};
  }
  const auto contract = policy::contract_for(method);
  if (contract.test_ctx && withhold_context)
    throw ConfigError("eval: the " + std::string(policy::method_name(method)) +
                      " method requires context at test time");

  policy::CondMode mode;
  std::string set_name = "actor";
  switch (method) {
    case policy::Method::Sparc:
    case policy::Method::Rma:
      mode = policy::CondMode::History;
      set_name = "adapter";
      break;
    case policy::Method::OnlyObs: mode = policy::CondMode::None; break;
    case policy::Method::HistoryInput: mode = policy::CondMode::History; break;
    case policy::Method::Oracle: mode = policy::CondMode::RawContext; break;
    default: throw ConfigError("eval: bad method in checkpoint");
  }

  auto net = std::make_shared<policy::PolicyNet<double>>(mode, O, A, C, H, w);
  auto params = std::make_shared<nn::ParameterSet<double>>(
      std::move(ck->set(set_name)));

  EvalPolicy pol;
  pol.name = policy::method_name(method);
  pol.hist_len = H;
  pol.needs_hist = contract.test_hist;
  pol.needs_ctx = contract.test_ctx;
  pol.act = [net, params](const std::vector<double>& obs,
                          const env::HistoryBuffer* hist,
                          const env::Context* ctx) {
    return train::policy_act(*net, *params, obs, ctx, hist, true, nullptr);
  };
  return pol;
}

}  // namespace sparc::eval
