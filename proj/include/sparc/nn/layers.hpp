#pragma once

#include <string>
#include <vector>

#include "sparc/common.hpp"

namespace sparc::nn {

/// Shape of a (batched) activation: either a flat vector of `dim` features
/// or `ch` channels of length `len` (the batch axis is implicit).
struct IOShape {
  bool is_2d = false;
  int dim = 0;
  int ch = 0;
  int len = 0;

  static IOShape vec(int d) { return {false, d, 0, 0}; }
  static IOShape chans(int c, int l) { return {true, 0, c, l}; }
  int numel() const { return is_2d ? ch * len : dim; }
  bool operator==(const IOShape&) const = default;
  std::string str() const {
    return is_2d ? std::to_string(ch) + "x" + std::to_string(len)
                 : std::to_string(dim);
  }
};

/// Same-padding output length: ceil(L / stride).
inline int conv_out_len(int lin, int stride) {
  return (lin + stride - 1) / stride;
}

/// Left pad for same-padding (right pad is total - left).
inline int conv_pad_left(int lin, int kernel, int stride) {
  const int out = conv_out_len(lin, stride);
  int total = (out - 1) * stride + kernel - lin;
  if (total < 0) total = 0;
  return total / 2;
}

struct LayerSpec {
  enum class Kind { Dense, Conv1d, Relu, Tanh, Flatten };
  Kind kind = Kind::Relu;
  int in_dim = 0, out_dim = 0;                      // dense
  int in_ch = 0, out_ch = 0, kernel = 0, stride = 1;  // conv1d

  static LayerSpec dense(int in, int out) {
    LayerSpec s;
    s.kind = Kind::Dense;
    s.in_dim = in;
    s.out_dim = out;
    return s;
  }
  static LayerSpec conv1d(int in_ch, int out_ch, int kernel, int stride) {
    LayerSpec s;
    s.kind = Kind::Conv1d;
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{}; }
  static LayerSpec tanh_act() {
    LayerSpec s;
    s.kind = Kind::Tanh;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = Kind::Flatten;
    return s;
  }

  bool trainable() const {
    return kind == Kind::Dense || kind == Kind::Conv1d;
  }

  /// Output shape given the input shape; throws ConfigError on mismatch.
  IOShape out_shape(const IOShape& in, int layer_index) const {
    const auto err = [&](const std::string& what) {
      throw ConfigError("layer " + std::to_string(layer_index) + ": " + what +
                        " (input " + in.str() + ")");
    };
    switch (kind) {
      case Kind::Dense:
        if (in.is_2d || in.dim != in_dim) err("dense expects dim " +
                                              std::to_string(in_dim));
        return IOShape::vec(out_dim);
      case Kind::Conv1d: {
        if (!in.is_2d || in.ch != in_ch)
          err("conv1d expects " + std::to_string(in_ch) + " channels");
        return IOShape::chans(out_ch, conv_out_len(in.len, stride));
      }
      case Kind::Flatten:
        if (!in.is_2d) err("flatten expects channels x length input");
        return IOShape::vec(in.ch * in.len);
      case Kind::Relu:
      case Kind::Tanh:
        return in;
    }
    err("unknown layer kind");
    return in;
  }
};

}  // namespace sparc::nn
