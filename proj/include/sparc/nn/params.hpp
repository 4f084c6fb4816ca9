#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sparc/common.hpp"
#include "sparc/nn/tensor.hpp"

namespace sparc::nn {

/// Named gradients, shape-matching a subset of a ParameterSet's entries.
template <typename T>
class GradSet {
 public:
  struct Item {
    std::string name;
    Tensor<T> grad;
  };

  Tensor<T>& at_or_add(const std::string& name,
                       const std::vector<std::size_t>& shape) {
    auto it = index_.find(name);
    if (it != index_.end()) {
      if (items_[it->second].grad.shape != shape)
        throw ConfigError("gradset: shape mismatch for " + name);
      return items_[it->second].grad;
    }
    index_.emplace(name, items_.size());
    items_.push_back({name, Tensor<T>(shape)});
    return items_.back().grad;
  }

  const Tensor<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &items_[it->second].grad;
  }

  std::vector<Item>& items() { return items_; }
  const std::vector<Item>& items() const { return items_; }
  bool empty() const { return items_.empty(); }

  bool all_finite() const {
    for (const auto& it : items_)
      if (!it.grad.all_finite()) return false;
    return true;
  }

  double global_norm_sq() const {
    double s = 0;
    for (const auto& it : items_)
      for (T v : it.grad.data) s += static_cast<double>(v) * v;
    return s;
  }

  void scale(T factor) {
    for (auto& it : items_)
      for (T& v : it.grad.data) v *= factor;
  }

 private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Ordered map name -> tensor, with per-entry Adam moment accumulators and
/// a step counter shared by the set. Entry order is insertion order and is
/// part of the checkpoint format.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> m, v;  // Adam moments, allocated on first update
    bool has_moments = false;
  };

  Tensor<T>& add(const std::string& name, std::vector<std::size_t> shape) {
    if (index_.count(name)) throw ConfigError("duplicate parameter: " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, Tensor<T>(std::move(shape)), {}, {}, false});
    return entries_.back().value;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Entry& entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return entries_[it->second];
  }
  const Entry& entry(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->entry(name);
  }

  Tensor<T>& value(const std::string& name) { return entry(name).value; }
  const Tensor<T>& value(const std::string& name) const {
    return entry(name).value;
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  std::uint64_t adam_steps = 0;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// target <- (1 - tau) * target + tau * online, elementwise over every
/// entry. Layouts must match exactly (same order, names, shapes).
template <typename T>
void polyak_blend(ParameterSet<T>& target, const ParameterSet<T>& online,
                  double tau) {
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("polyak: tau out of (0,1]");
  const auto& on = online.entries();
  auto& tg = target.entries();
  if (tg.size() != on.size()) throw ConfigError("polyak: layout mismatch");
  const T a = static_cast<T>(1.0 - tau);
  const T b = static_cast<T>(tau);
  for (std::size_t k = 0; k < tg.size(); ++k) {
    if (tg[k].name != on[k].name || !tg[k].value.same_shape(on[k].value))
      throw ConfigError("polyak: layout mismatch at " + tg[k].name);
    T* t = tg[k].value.ptr();
    const T* o = on[k].value.ptr();
    const std::size_t n = tg[k].value.numel();
    if (tau == 1.0) {
      std::copy(o, o + n, t);
    } else {
      for (std::size_t i = 0; i < n; ++i) t[i] = a * t[i] + b * o[i];
    }
  }
}

/// Copies every src entry whose name starts with one of the prefixes into
/// dst (bit-identical values) and resets the Adam moments of the copied
/// entries. Entries outside the filter are untouched. Idempotent.
template <typename T>
void copy_entries(ParameterSet<T>& dst, const ParameterSet<T>& src,
                  const std::vector<std::string>& name_prefixes) {
  for (const auto& se : src.entries()) {
    bool match = false;
    for (const auto& p : name_prefixes)
      if (se.name.rfind(p, 0) == 0) {
        match = true;
        break;
      }
    if (!match) continue;
    if (!dst.has(se.name))
      throw ConfigError("copy_entries: missing in destination: " + se.name);
    auto& de = dst.entry(se.name);
    if (!de.value.same_shape(se.value))
      throw ConfigError("copy_entries: shape mismatch at " + se.name);
    de.value.data = se.value.data;
    if (de.has_moments) {
      de.m.fill(T(0));
      de.v.fill(T(0));
    }
  }
}

}  // namespace sparc::nn
