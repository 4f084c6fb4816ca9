#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparc/nn/params.hpp"

namespace sparc::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format stores raw little-endian values");

/// Checkpoint container: magic line, 8-byte LE header length, JSON header
/// (format version, dtype, global step, per-set name/shape tables, free-form
/// meta), then the raw values: per set, per entry, value data followed by
/// Adam moments when present.
inline constexpr char kCheckpointMagic[] = "SPRCKPT1\n";

template <typename T>
void write_checkpoint(std::ostream& os,
                      const std::vector<std::pair<std::string,
                                                  const ParameterSet<T>*>>& sets,
                      std::uint64_t global_step,
                      const nlohmann::ordered_json& meta = {}) {
  nlohmann::ordered_json hdr;
  hdr["version"] = 1;
  hdr["dtype"] = sizeof(T) == 8 ? "f64" : "f32";
  hdr["step"] = global_step;
  hdr["meta"] = meta.is_null() ? nlohmann::ordered_json::object() : meta;
  auto jsets = nlohmann::ordered_json::array();
  for (const auto& [name, ps] : sets) {
    nlohmann::ordered_json js;
    js["name"] = name;
    js["adam_steps"] = ps->adam_steps;
    auto ents = nlohmann::ordered_json::array();
    for (const auto& e : ps->entries()) {
      nlohmann::ordered_json je;
      je["name"] = e.name;
      je["shape"] = e.value.shape;
      je["moments"] = e.has_moments;
      ents.push_back(je);
    }
    js["entries"] = ents;
    jsets.push_back(js);
  }
  hdr["sets"] = jsets;

  const std::string hs = hdr.dump();
  const std::uint64_t hlen = hs.size();
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  os.write(reinterpret_cast<const char*>(&hlen), 8);
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, ps] : sets) {
    (void)name;
    for (const auto& e : ps->entries()) {
      os.write(reinterpret_cast<const char*>(e.value.ptr()),
               static_cast<std::streamsize>(sizeof(T) * e.value.numel()));
      if (e.has_moments) {
        os.write(reinterpret_cast<const char*>(e.m.ptr()),
                 static_cast<std::streamsize>(sizeof(T) * e.m.numel()));
        os.write(reinterpret_cast<const char*>(e.v.ptr()),
                 static_cast<std::streamsize>(sizeof(T) * e.v.numel()));
      }
    }
  }
}

template <typename T>
struct Checkpoint {
  std::vector<std::pair<std::string, ParameterSet<T>>> sets;
  std::uint64_t step = 0;
  nlohmann::json meta;

  ParameterSet<T>& set(const std::string& name) {
    for (auto& [n, ps] : sets)
      if (n == name) return ps;
    throw ConfigError("checkpoint: no parameter set named " + name);
  }
};

namespace detail {
template <typename T, typename S>
void read_values(std::istream& is, Tensor<T>& t) {
  std::vector<S> raw(t.numel());
  is.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(sizeof(S) * raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) t[i] = static_cast<T>(raw[i]);
}
}  // namespace detail

template <typename T>
Checkpoint<T> read_checkpoint(std::istream& is) {
  char magic[sizeof(kCheckpointMagic) - 1];
  is.read(magic, sizeof(magic));
  if (!is || std::string_view(magic, sizeof(magic)) !=
                 std::string_view(kCheckpointMagic, sizeof(magic)))
    throw ConfigError("checkpoint: bad magic");
  std::uint64_t hlen = 0;
  is.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw ConfigError("checkpoint: truncated header");
  const auto hdr = nlohmann::json::parse(hs);
  if (hdr.at("version").get<int>() != 1)
    throw ConfigError("checkpoint: unsupported version");
  const bool f64 = hdr.at("dtype").get<std::string>() == "f64";

  Checkpoint<T> ck;
  ck.step = hdr.at("step").get<std::uint64_t>();
  ck.meta = hdr.value("meta", nlohmann::json::object());
  for (const auto& js : hdr.at("sets")) {
    ParameterSet<T> ps;
    ps.adam_steps = js.at("adam_steps").get<std::uint64_t>();
    for (const auto& je : js.at("entries")) {
      auto shape = je.at("shape").get<std::vector<std::size_t>>();
      auto& val = ps.add(je.at("name").get<std::string>(), shape);
      if (f64)
        detail::read_values<T, double>(is, val);
      else
        detail::read_values<T, float>(is, val);
      if (je.at("moments").get<bool>()) {
        auto& e = ps.entry(je.at("name").get<std::string>());
        e.m = Tensor<T>(shape);
        e.v = Tensor<T>(shape);
        e.has_moments = true;
        if (f64) {
          detail::read_values<T, double>(is, e.m);
          detail::read_values<T, double>(is, e.v);
        } else {
          detail::read_values<T, float>(is, e.m);
          detail::read_values<T, float>(is, e.v);
        }
      }
    }
    if (!is) throw ConfigError("checkpoint: truncated data");
    ck.sets.emplace_back(js.at("name").get<std::string>(), std::move(ps));
  }
  return ck;
}

template <typename T>
void save_checkpoint_file(const std::string& path,
                          const std::vector<std::pair<std::string,
                                                      const ParameterSet<T>*>>& sets,
                          std::uint64_t step,
                          const nlohmann::ordered_json& meta = {}) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot open for write: " + path);
  write_checkpoint(os, sets, step, meta);
}

template <typename T>
Checkpoint<T> load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint: " + path);
  return read_checkpoint<T>(is);
}

/// Serialized bytes of a single parameter set (used to compare worker
/// snapshots against learner checkpoints).
template <typename T>
std::string serialize_set_bytes(const std::string& name,
                                const ParameterSet<T>& ps,
                                std::uint64_t step) {
  std::ostringstream os(std::ios::binary);
  write_checkpoint<T>(os, {{name, &ps}}, step);
  return os.str();
}

}  // namespace sparc::nn
