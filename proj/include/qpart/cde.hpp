#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qpart/layers.hpp"
#include "qpart/ops.hpp"
#include "qpart/spline.hpp"
#include "qpart/tensor.hpp"

// Controlled differential equation dz = f(z,t) dV(t), integrated as
// dz/dt = f(z,t) * V'(t) with classic fixed-step RK4. The control path V is
// the natural cubic spline of the latent sequence; both the spline fit and
// every solver step are recorded on the gradient graph, so backpropagation
// reaches the initial condition, the field parameters and the spline knots.

namespace qpart::cde {

using diff::GraphT;
using diff::Shape;
using diff::TensorT;

struct CDEConfig {
  int substeps_per_interval = 4;
};

// Natural-cubic fit as a graph op.
// values: (B*T, D) sample-major rows -> coefficients (B, T-1, 4, D) flattened.
// Backward applies the transpose of the (linear) fit per sample and channel.
template <typename S>
TensorT<S> spline_fit_op(const TensorT<S>& values, const std::vector<double>& times) {
  spline::check_times(times);
  const int T = static_cast<int>(times.size());
  if (values.shape.size() != 2 || values.shape[0] % T != 0)
    throw diff::ShapeError("spline_fit: rows of " + diff::shape_str(values.shape) +
                           " not divisible into sequences of length " + std::to_string(T));
  const int B = values.shape[0] / T;
  const int D = values.shape[1];
  auto* g = values.graph;
  if (!values.on_graph()) throw std::logic_error("spline_fit: values must be on a graph");

  const std::size_t per_sample = static_cast<std::size_t>(T - 1) * 4 * D;
  std::vector<double> ybuf(T), cbuf(static_cast<std::size_t>(T - 1) * 4);
  std::vector<S> out(static_cast<std::size_t>(B) * per_sample);
  for (int b = 0; b < B; ++b)
    for (int d = 0; d < D; ++d) {
      for (int t = 0; t < T; ++t)
        ybuf[t] = static_cast<double>((*values.data)[(static_cast<std::size_t>(b) * T + t) * D + d]);
      spline::fit_channel(times, ybuf.data(), 1, cbuf.data(), 1);
      for (int i = 0; i < T - 1; ++i)
        for (int k = 0; k < 4; ++k)
          out[b * per_sample + (static_cast<std::size_t>(i) * 4 + k) * D + d] =
              static_cast<S>(cbuf[i * 4 + k]);
    }
  const int iv = values.node;
  return g->record(
      {B, T - 1, 4, D}, std::move(out), [iv, times, B, T, D](GraphT<S>& g, int self) {
        const auto& go = g.gbuf(self);
        auto& gv = g.gbuf(iv);
        const std::size_t per_sample = static_cast<std::size_t>(T - 1) * 4 * D;
        std::vector<double> gc(static_cast<std::size_t>(T - 1) * 4), gy(T);
        for (int b = 0; b < B; ++b)
          for (int d = 0; d < D; ++d) {
            for (int i = 0; i < T - 1; ++i)
              for (int k = 0; k < 4; ++k)
                gc[i * 4 + k] = go[b * per_sample + (static_cast<std::size_t>(i) * 4 + k) * D + d];
            std::fill(gy.begin(), gy.end(), 0.0);
            spline::fit_channel_transpose(times, gc.data(), 1, gy.data(), 1);
            for (int t = 0; t < T; ++t)
              gv[(static_cast<std::size_t>(b) * T + t) * D + d] += gy[t];
          }
      });
}

// V'(t) per sample from the fitted coefficients: (B, D). Linear in coeffs.
template <typename S>
TensorT<S> spline_deriv_op(const TensorT<S>& coeffs, const std::vector<double>& times, double t) {
  if (coeffs.shape.size() != 4 || coeffs.shape[2] != 4 ||
      coeffs.shape[1] != static_cast<int>(times.size()) - 1)
    throw diff::ShapeError("spline_deriv: bad coefficient shape " +
                           diff::shape_str(coeffs.shape));
  const int B = coeffs.shape[0], I = coeffs.shape[1], D = coeffs.shape[3];
  const int i = spline::locate_interval(times, t);
  const double d = t - times[i];
  auto* g = coeffs.graph;
  const std::size_t per_sample = static_cast<std::size_t>(I) * 4 * D;
  std::vector<S> out(static_cast<std::size_t>(B) * D);
  for (int b = 0; b < B; ++b)
    for (int ch = 0; ch < D; ++ch) {
      const std::size_t base = b * per_sample + static_cast<std::size_t>(i) * 4 * D + ch;
      const double c1 = static_cast<double>((*coeffs.data)[base + 1 * D]);
      const double c2 = static_cast<double>((*coeffs.data)[base + 2 * D]);
      const double c3 = static_cast<double>((*coeffs.data)[base + 3 * D]);
      out[static_cast<std::size_t>(b) * D + ch] =
          static_cast<S>(c1 + d * (2.0 * c2 + 3.0 * d * c3));
    }
  const int ic = coeffs.node;
  return g->record({B, D}, std::move(out), [ic, B, I, D, i, d](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& gc = g.gbuf(ic);
    const std::size_t per_sample = static_cast<std::size_t>(I) * 4 * D;
    for (int b = 0; b < B; ++b)
      for (int ch = 0; ch < D; ++ch) {
        const double gout = go[static_cast<std::size_t>(b) * D + ch];
        const std::size_t base = b * per_sample + static_cast<std::size_t>(i) * 4 * D + ch;
        gc[base + 1 * D] += gout;
        gc[base + 2 * D] += gout * 2.0 * d;
        gc[base + 3 * D] += gout * 3.0 * d * d;
      }
  });
}

namespace detail {
template <typename S>
void check_finite(const TensorT<S>& state, int interval, int substep) {
  for (S v : *state.data)
    if (!std::isfinite(static_cast<double>(v)))
      throw std::runtime_error("cde: non-finite state at interval " + std::to_string(interval) +
                               ", substep " + std::to_string(substep));
}
}  // namespace detail

// Field: (GraphT<S>&, state (B,D), t) -> (B,D).
// Returns the solution at every knot; row 0 is exactly z0.
template <typename S, typename Field>
std::vector<TensorT<S>> integrate_trajectory_rows(GraphT<S>& g, Field&& field,
                                                  const TensorT<S>& coeffs,
                                                  const TensorT<S>& z0,
                                                  const std::vector<double>& times,
                                                  const CDEConfig& cfg) {
  if (cfg.substeps_per_interval < 1)
    throw std::invalid_argument("cde: substeps_per_interval must be >= 1");
  if (coeffs.shape.size() != 4 || coeffs.shape[1] != static_cast<int>(times.size()) - 1)
    throw diff::ShapeError("cde: path knots disagree with times");
  if (z0.shape.size() != 2 || z0.shape[1] != coeffs.shape[3] || z0.shape[0] != coeffs.shape[0])
    throw diff::ShapeError("cde: z0 shape " + diff::shape_str(z0.shape) +
                           " disagrees with path " + diff::shape_str(coeffs.shape));
  std::vector<TensorT<S>> rows;
  rows.reserve(times.size());
  TensorT<S> state = z0;
  rows.push_back(state);
  for (int i = 0; i + 1 < static_cast<int>(times.size()); ++i) {
    const double h = (times[i + 1] - times[i]) / cfg.substeps_per_interval;
    for (int s = 0; s < cfg.substeps_per_interval; ++s) {
      const double ta = times[i] + s * h;
      const double tm = ta + 0.5 * h;
      const double tb = ta + h;
      TensorT<S> vpa = spline_deriv_op(coeffs, times, ta);
      TensorT<S> vpm = spline_deriv_op(coeffs, times, tm);
      TensorT<S> vpb = spline_deriv_op(coeffs, times, tb);
      TensorT<S> k1 = diff::mul(field(g, state, ta), vpa);
      TensorT<S> k2 = diff::mul(field(g, diff::add(state, diff::scale(k1, 0.5 * h)), tm), vpm);
      TensorT<S> k3 = diff::mul(field(g, diff::add(state, diff::scale(k2, 0.5 * h)), tm), vpm);
      TensorT<S> k4 = diff::mul(field(g, diff::add(state, diff::scale(k3, h)), tb), vpb);
      TensorT<S> incr =
          diff::add(diff::add(k1, k4), diff::scale(diff::add(k2, k3), 2.0));
      state = diff::add(state, diff::scale(incr, h / 6.0));
      detail::check_finite(state, i, s);
    }
    rows.push_back(state);
  }
  return rows;
}

// t-major stack of the trajectory rows: (T*B, D); for B == 1 this is the
// spec-shaped T x D solution matrix.
template <typename S>
TensorT<S> stack_rows(const std::vector<TensorT<S>>& rows) {
  return diff::concat_rows(rows);
}

// Two-layer perceptron vector field with a BatchNorm on the hidden layer;
// input is the flattened state concatenated with scalar time.
template <typename S>
struct VectorFieldT {
  nn::Linear<S> in;
  nn::BatchNorm<S> bn;
  nn::Linear<S> out;
  bool train_mode = false;

  VectorFieldT() = default;
  VectorFieldT(const std::string& name, int dim, int hidden, Rng& rng)
      : in(name + ".in", dim + 1, hidden, rng),
        bn(name + ".bn", hidden, diff::Group::aperiodic_bn),
        out(name + ".out", hidden, dim, rng) {
    // start near the zero field so early training stays close to the
    // identity trajectory
    for (auto& v : *out.w.value) v = static_cast<S>(static_cast<double>(v) * 0.01);
    std::fill(out.b.value->begin(), out.b.value->end(), S(0));
  }

  TensorT<S> operator()(GraphT<S>& g, const TensorT<S>& state, double t) {
    const int B = state.shape[0];
    TensorT<S> tcol = diff::make_full<S>({B, 1}, static_cast<S>(t));
    TensorT<S> h = in.forward(g, diff::concat_cols(state, g.leaf(tcol)));
    h = bn.forward(g, h, train_mode);
    h = diff::tanh_(h);
    return out.forward(g, h);
  }

  void visit(nn::StateVisitor<S>& v) {
    in.visit(v);
    bn.visit(v);
    out.visit(v);
  }
};

}  // namespace qpart::cde
