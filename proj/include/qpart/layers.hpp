#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qpart/ops.hpp"
#include "qpart/rng.hpp"
#include "qpart/tensor.hpp"

namespace qpart::nn {

using diff::GraphT;
using diff::Group;
using diff::ParamT;
using diff::Shape;
using diff::TensorT;

// Uniform fan-in init, like torch's default for conv/linear layers.
template <typename S>
void init_uniform(ParamT<S>& p, double bound, Rng& rng) {
  for (auto& v : *p.value) v = static_cast<S>(rng.uniform(-bound, bound));
}

// Walk a module's state in a fixed order: params plus non-trainable buffers.
template <typename S>
struct StateVisitor {
  std::function<void(ParamT<S>&)> param;
  std::function<void(const std::string&, std::vector<S>&)> buffer;
};

template <typename S>
struct Conv2d {
  ParamT<S> w, b;
  int stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(const std::string& name, int cin, int cout, int k, int stride_, int pad_, Rng& rng)
      : w(name + ".w", {cout, cin, k, k}, Group::backbone),
        b(name + ".b", {cout}, Group::backbone),
        stride(stride_),
        pad(pad_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin) * k * k);
    init_uniform(w, bound, rng);
    init_uniform(b, bound, rng);
  }

  TensorT<S> forward(GraphT<S>& g, const TensorT<S>& x) {
    return diff::conv2d(x, g.use(w), g.use(b), stride, pad);
  }

  void visit(StateVisitor<S>& v) {
    v.param(w);
    v.param(b);
  }
};

template <typename S>
struct ConvTranspose2d {
  ParamT<S> w, b;
  int stride = 1, pad = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(const std::string& name, int cin, int cout, int k, int stride_, int pad_,
                  Rng& rng)
      : w(name + ".w", {cin, cout, k, k}, Group::backbone),
        b(name + ".b", {cout}, Group::backbone),
        stride(stride_),
        pad(pad_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin) * k * k);
    init_uniform(w, bound, rng);
    init_uniform(b, bound, rng);
  }

  TensorT<S> forward(GraphT<S>& g, const TensorT<S>& x) {
    return diff::conv_transpose2d(x, g.use(w), g.use(b), stride, pad);
  }

  void visit(StateVisitor<S>& v) {
    v.param(w);
    v.param(b);
  }
};

template <typename S>
struct Linear {
  ParamT<S> w, b;  // w: (in, out) so rows of x multiply straight through

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng,
         Group group = Group::backbone)
      : w(name + ".w", {in, out}, group), b(name + ".b", {out}, group) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    init_uniform(w, bound, rng);
    init_uniform(b, bound, rng);
  }

  TensorT<S> forward(GraphT<S>& g, const TensorT<S>& x) {
    return diff::add_rowvec(diff::matmul(x, g.use(w)), g.use(b));
  }

  void visit(StateVisitor<S>& v) {
    v.param(w);
    v.param(b);
  }
};

// Per-channel batch normalization with affine scale/shift. The affine params
// carry the group tag used for test-time differential learning rates; the
// running statistics are plain buffers.
template <typename S>
struct BatchNorm {
  std::string name;
  ParamT<S> gamma, beta;
  std::vector<S> running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNorm() = default;
  BatchNorm(const std::string& name_, int channels, Group group)
      : name(name_),
        gamma(name_ + ".gamma", {channels}, group),
        beta(name_ + ".beta", {channels}, group),
        running_mean(channels, S(0)),
        running_var(channels, S(1)) {
    std::fill(gamma.value->begin(), gamma.value->end(), S(1));
  }

  TensorT<S> forward(GraphT<S>& g, const TensorT<S>& x, bool train) {
    return diff::batchnorm(x, g.use(gamma), g.use(beta), running_mean, running_var, train,
                           momentum, eps);
  }

  void visit(StateVisitor<S>& v) {
    v.param(gamma);
    v.param(beta);
    v.buffer(name + ".running_mean", running_mean);
    v.buffer(name + ".running_var", running_var);
  }
};

}  // namespace qpart::nn
