#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sparc/nn/kernels.hpp"
#include "sparc/nn/layers.hpp"
#include "sparc/nn/params.hpp"
#include "sparc/nn/rng.hpp"
#include "sparc/nn/tensor.hpp"

namespace sparc::nn {

/// Recording of one forward pass through a Stack; consumed by backward.
template <typename T>
struct Tape {
  std::vector<Tensor<T>> acts;  // acts[0] = input, acts[i+1] = layer i output
  int batch = 0;
  bool consumed = false;
};

/// A named feed-forward stack of layers whose parameters live in a shared
/// ParameterSet under "<name>.<index>.w|b". Stacks are immutable wiring;
/// all state is in the ParameterSet, so one Stack can serve online and
/// target parameter sets alike.
template <typename T>
class Stack {
 public:
  Stack() = default;
  Stack(std::string name, IOShape input, std::vector<LayerSpec> layers)
      : name_(std::move(name)), input_(input), layers_(std::move(layers)) {
    IOShape cur = input_;
    shapes_.push_back(cur);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      cur = layers_[i].out_shape(cur, static_cast<int>(i));
      shapes_.push_back(cur);
    }
  }

  const std::string& name() const { return name_; }
  const IOShape& input_shape() const { return input_; }
  const IOShape& output_shape() const { return shapes_.back(); }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  std::string param_name(std::size_t i, const char* which) const {
    return name_ + "." + std::to_string(i) + "." + which;
  }

  /// Registers parameters with uniform fan-in init: U(-1/sqrt(fan_in), +).
  void init_params(ParameterSet<T>& ps, Rng& rng) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (!l.trainable()) continue;
      std::size_t fan_in, n_w, n_b;
      std::vector<std::size_t> wshape;
      if (l.kind == LayerSpec::Kind::Dense) {
        fan_in = static_cast<std::size_t>(l.in_dim);
        wshape = {static_cast<std::size_t>(l.in_dim),
                  static_cast<std::size_t>(l.out_dim)};
        n_b = static_cast<std::size_t>(l.out_dim);
      } else {
        fan_in = static_cast<std::size_t>(l.in_ch) * l.kernel;
        wshape = {static_cast<std::size_t>(l.out_ch),
                  static_cast<std::size_t>(l.in_ch),
                  static_cast<std::size_t>(l.kernel)};
        n_b = static_cast<std::size_t>(l.out_ch);
      }
      n_w = numel_of(wshape);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      auto& w = ps.add(param_name(i, "w"), wshape);
      for (std::size_t k = 0; k < n_w; ++k)
        w[k] = static_cast<T>(rng.uniform(-bound, bound));
      auto& b = ps.add(param_name(i, "b"), {n_b});
      for (std::size_t k = 0; k < n_b; ++k)
        b[k] = static_cast<T>(rng.uniform(-bound, bound));
    }
  }

  /// All parameter names of this stack, in layer order.
  std::vector<std::string> param_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i].trainable()) {
        out.push_back(param_name(i, "w"));
        out.push_back(param_name(i, "b"));
      }
    return out;
  }

  Tensor<T> forward(const ParameterSet<T>& ps, const Tensor<T>& x,
                    Tape<T>* tape = nullptr) const {
    const int B = check_input(x);
    if (tape) {
      tape->acts.clear();
      tape->acts.reserve(layers_.size() + 1);
      tape->batch = B;
      tape->consumed = false;
      tape->acts.push_back(x);
      for (std::size_t i = 0; i < layers_.size(); ++i)
        tape->acts.push_back(apply(ps, i, tape->acts.back(), B));
      return tape->acts.back();
    }
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      cur = apply(ps, i, cur, B);
    return cur;
  }

  /// Backpropagates `upstream` (grad w.r.t. the stack output, shape equal
  /// to forward's output) through the tape. Accumulates parameter grads
  /// into `gs` when non-null and returns the grad w.r.t. the input
  /// (empty when need_input_grad is false).
  Tensor<T> backward(const ParameterSet<T>& ps, Tape<T>& tape,
                     const Tensor<T>& upstream, GradSet<T>* gs,
                     bool need_input_grad = true) const {
    if (tape.consumed) throw UsageError(name_ + ": tape already consumed");
    if (tape.acts.size() != layers_.size() + 1)
      throw UsageError(name_ + ": tape does not match stack");
    tape.consumed = true;
    const int B = tape.batch;
    Tensor<T> up = upstream;
    for (std::size_t ii = layers_.size(); ii-- > 0;) {
      const auto& l = layers_[ii];
      const Tensor<T>& in = tape.acts[ii];
      const Tensor<T>& out = tape.acts[ii + 1];
      if (up.numel() != out.numel())
        throw ConfigError(name_ + ": upstream shape mismatch at layer " +
                          std::to_string(ii));
      const bool want_down = need_input_grad || ii > 0;
      Tensor<T> down;
      switch (l.kind) {
        case LayerSpec::Kind::Dense: {
          const auto& w = ps.value(param_name(ii, "w"));
          if (want_down) {
            down = Tensor<T>(in.shape);
            kern::dense_backward_input(up.ptr(), w.ptr(), down.ptr(), B,
                                       l.in_dim, l.out_dim);
          }
          if (gs) {
            auto& dw = gs->at_or_add(param_name(ii, "w"), w.shape);
            auto& db = gs->at_or_add(param_name(ii, "b"),
                                     {static_cast<std::size_t>(l.out_dim)});
            kern::dense_backward_params(in.ptr(), up.ptr(), dw.ptr(), db.ptr(),
                                        B, l.in_dim, l.out_dim);
          }
          break;
        }
        case LayerSpec::Kind::Conv1d: {
          const auto& w = ps.value(param_name(ii, "w"));
          const int lin = static_cast<int>(in.shape[2]);
          const int lout = static_cast<int>(out.shape[2]);
          const int pad = conv_pad_left(lin, l.kernel, l.stride);
          if (want_down) {
            down = Tensor<T>(in.shape);
            kern::conv1d_backward_input(up.ptr(), w.ptr(), down.ptr(), B,
                                        l.in_ch, lin, l.out_ch, l.kernel,
                                        l.stride, pad, lout);
          }
          if (gs) {
            auto& dw = gs->at_or_add(param_name(ii, "w"), w.shape);
            auto& db = gs->at_or_add(param_name(ii, "b"),
                                     {static_cast<std::size_t>(l.out_ch)});
            kern::conv1d_backward_params(in.ptr(), up.ptr(), dw.ptr(),
                                         db.ptr(), B, l.in_ch, lin, l.out_ch,
                                         l.kernel, l.stride, pad, lout);
          }
          break;
        }
        case LayerSpec::Kind::Relu:
          down = Tensor<T>(in.shape);
          kern::relu_backward(up.ptr(), out.ptr(), down.ptr(), up.numel());
          break;
        case LayerSpec::Kind::Tanh:
          down = Tensor<T>(in.shape);
          kern::tanh_backward(up.ptr(), out.ptr(), down.ptr(), up.numel());
          break;
        case LayerSpec::Kind::Flatten:
          down = Tensor<T>(in.shape, up.data);
          break;
      }
      up = std::move(down);
    }
    return up;
  }

 private:
  int check_input(const Tensor<T>& x) const {
    if (input_.is_2d) {
      if (x.shape.size() != 3 ||
          x.shape[1] != static_cast<std::size_t>(input_.ch) ||
          x.shape[2] != static_cast<std::size_t>(input_.len))
        throw ConfigError(name_ + ": layer 0: expected input (B," +
                          input_.str() + "), got " + shape_str(x));
    } else {
      if (x.shape.size() != 2 ||
          x.shape[1] != static_cast<std::size_t>(input_.dim))
        throw ConfigError(name_ + ": layer 0: expected input (B," +
                          input_.str() + "), got " + shape_str(x));
    }
    return static_cast<int>(x.shape[0]);
  }

  Tensor<T> apply(const ParameterSet<T>& ps, std::size_t i, const Tensor<T>& x,
                  int B) const {
    const auto& l = layers_[i];
    const IOShape& os = shapes_[i + 1];
    switch (l.kind) {
      case LayerSpec::Kind::Dense: {
        Tensor<T> y({static_cast<std::size_t>(B),
                     static_cast<std::size_t>(os.dim)});
        kern::dense_forward(x.ptr(), ps.value(param_name(i, "w")).ptr(),
                            ps.value(param_name(i, "b")).ptr(), y.ptr(), B,
                            l.in_dim, l.out_dim);
        return y;
      }
      case LayerSpec::Kind::Conv1d: {
        const int lin = static_cast<int>(x.shape[2]);
        const int lout = conv_out_len(lin, l.stride);
        const int pad = conv_pad_left(lin, l.kernel, l.stride);
        Tensor<T> y({static_cast<std::size_t>(B),
                     static_cast<std::size_t>(l.out_ch),
                     static_cast<std::size_t>(lout)});
        kern::conv1d_forward(x.ptr(), ps.value(param_name(i, "w")).ptr(),
                             ps.value(param_name(i, "b")).ptr(), y.ptr(), B,
                             l.in_ch, lin, l.out_ch, l.kernel, l.stride, pad,
                             lout);
        return y;
      }
      case LayerSpec::Kind::Relu: {
        Tensor<T> y(x.shape);
        kern::relu_forward(x.ptr(), y.ptr(), x.numel());
        return y;
      }
      case LayerSpec::Kind::Tanh: {
        Tensor<T> y(x.shape);
        kern::tanh_forward(x.ptr(), y.ptr(), x.numel());
        return y;
      }
      case LayerSpec::Kind::Flatten: {
        Tensor<T> y({static_cast<std::size_t>(B),
                     static_cast<std::size_t>(os.dim)});
        y.data = x.data;
        return y;
      }
    }
    throw ConfigError(name_ + ": unknown layer kind");
  }

  std::string name_;
  IOShape input_;
  std::vector<LayerSpec> layers_;
  std::vector<IOShape> shapes_;
};

}  // namespace sparc::nn
