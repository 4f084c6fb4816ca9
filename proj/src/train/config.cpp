#include "sparc/train/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace sparc::train {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::vector<Field>& fields() {
  auto str = [](std::string RunConfig::* p) {
    return Field{nullptr, nullptr,
                 [p](RunConfig& c, const std::string& v) { c.*p = v; },
                 [p](const RunConfig& c) { return c.*p; }};
  };
  auto u64 = [](std::uint64_t RunConfig::* p) {
    return Field{nullptr, nullptr,
                 [p](RunConfig& c, const std::string& v) { c.*p = std::stoull(v); },
                 [p](const RunConfig& c) { return std::to_string(c.*p); }};
  };
  auto i32 = [](int RunConfig::* p) {
    return Field{nullptr, nullptr,
                 [p](RunConfig& c, const std::string& v) { c.*p = std::stoi(v); },
                 [p](const RunConfig& c) { return std::to_string(c.*p); }};
  };
  auto f64 = [](double RunConfig::* p) {
    return Field{nullptr, nullptr,
                 [p](RunConfig& c, const std::string& v) { c.*p = std::stod(v); },
                 [p](const RunConfig& c) { return fmt_double(c.*p); }};
  };
  auto named = [](Field f, const char* sec, const char* key) {
    f.section = sec;
    f.key = key;
    return f;
  };
  static const std::vector<Field> v = {
      named(str(&RunConfig::method), "run", "method"),
      named(str(&RunConfig::env), "run", "env"),
      named(u64(&RunConfig::seed), "run", "seed"),
      named(u64(&RunConfig::total_updates), "run", "total_updates"),
      named(u64(&RunConfig::eval_every), "run", "eval_every"),
      named(i32(&RunConfig::eval_episodes), "run", "eval_episodes"),
      named(str(&RunConfig::rollout_policy), "run", "rollout_policy"),
      named(str(&RunConfig::precision), "run", "precision"),
      named(u64(&RunConfig::log_every), "run", "log_every"),
      named(i32(&RunConfig::batch_size), "hyper", "batch_size"),
      named(i32(&RunConfig::history_len), "hyper", "history_len"),
      named(f64(&RunConfig::lr_adapter), "hyper", "lr_adapter"),
      named(f64(&RunConfig::lr_sac), "hyper", "lr_sac"),
      named(f64(&RunConfig::tau), "hyper", "tau"),
      named(f64(&RunConfig::critic_clip_norm), "hyper", "critic_clip_norm"),
      named(f64(&RunConfig::gamma), "hyper", "gamma"),
      named(f64(&RunConfig::entropy_alpha), "hyper", "entropy_alpha"),
      named(i32(&RunConfig::n_quantiles), "hyper", "n_quantiles"),
      named(i32(&RunConfig::trunk_width), "hyper", "trunk_width"),
      named(i32(&RunConfig::latent_width), "hyper", "latent_width"),
      named(i32(&RunConfig::hist_embed_width), "hyper", "hist_embed_width"),
      named(i32(&RunConfig::conv_filters), "hyper", "conv_filters"),
      named(u64(&RunConfig::warmup_steps), "train", "warmup_steps"),
      named(u64(&RunConfig::buffer_capacity), "train", "buffer_capacity"),
      named(f64(&RunConfig::updates_per_step), "train", "updates_per_step"),
      named(i32(&RunConfig::copy_every), "train", "copy_every"),
      named(f64(&RunConfig::rma_phase1_fraction), "train",
            "rma_phase1_fraction"),
      named(i32(&RunConfig::workers), "rollout", "workers"),
      named(u64(&RunConfig::snapshot_cadence), "rollout", "snapshot_cadence"),
      named(u64(&RunConfig::queue_capacity), "rollout", "queue_capacity"),
      named(i32(&RunConfig::grid_resolution), "eval", "grid_resolution"),
      named(i32(&RunConfig::episodes_per_cell), "eval", "episodes_per_cell"),
  };
  return v;
}

const Field* find_field(const std::string& sec, const std::string& key) {
  for (const auto& f : fields())
    if (sec == f.section && key == f.key) return &f;
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  policy::parse_method(method);  // throws on bad method
  if (precision != "f32" && precision != "f64")
    throw ConfigError("config: precision must be f32 or f64");
  if (rollout_policy != "adapter" && rollout_policy != "expert")
    throw ConfigError("config: rollout_policy must be adapter or expert");
  if (rollout_policy == "expert" && method != "sparc" && method != "rma")
    throw ConfigError("config: rollout_policy=expert needs a context policy");
  if (history_len < 1) throw ConfigError("config: history_len must be >= 1");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (total_updates == 0) throw ConfigError("config: total_updates is zero");
  if (workers < 0) throw ConfigError("config: workers must be >= 0");
  if (updates_per_step <= 0)
    throw ConfigError("config: updates_per_step must be positive");
  if (rma_phase1_fraction <= 0 || rma_phase1_fraction >= 1)
    throw ConfigError("config: rma_phase1_fraction must be in (0,1)");
}

RunConfig RunConfig::parse_string(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section == "meta") continue;
    if (section == "env") {
      try {
        cfg.env_overrides[key] = std::stod(val);
      } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": [env] values must be numeric");
      }
      continue;
    }
    const Field* f = find_field(section, key);
    if (!f)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": unknown key [" + section + "] " + key);
    try {
      f->set(cfg, val);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": bad value for [" + section + "] " + key);
    }
  }
  return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_string(ss.str());
}

void RunConfig::set_override(const std::string& spec) {
  const auto eq = spec.find('=');
  const auto dot = spec.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override must be section.key=value: " + spec);
  const std::string sec = trim(spec.substr(0, dot));
  const std::string key = trim(spec.substr(dot + 1, eq - dot - 1));
  const std::string val = trim(spec.substr(eq + 1));
  if (sec == "env") {
    env_overrides[key] = std::stod(val);
    return;
  }
  const Field* f = find_field(sec, key);
  if (!f) throw ConfigError("unknown config key: " + sec + "." + key);
  f->set(*this, val);
}

std::string RunConfig::emit() const {
  std::ostringstream os;
  std::string cur;
  for (const auto& f : fields()) {
    if (cur != f.section) {
      if (!cur.empty()) os << "\n";
      cur = f.section;
      os << "[" << cur << "]\n";
    }
    os << f.key << " = " << f.get(*this) << "\n";
  }
  os << "\n[env]\n";
  for (const auto& [k, v] : env_overrides)
    os << k << " = " << fmt_double(v) << "\n";
  return os.str();
}

std::string RunConfig::manifest(const std::string& started_at) const {
  std::ostringstream os;
  os << emit();
  os << "\n[meta]\n";
  os << "code_version = " << SPARC_VERSION << "\n";
  os << "started_at = " << started_at << "\n";
  return os.str();
}

}  // namespace sparc::train
