#pragma once

// Central finite-difference gradient checks, run on the 64-bit engine
// instantiation so roundoff stays far below the 1e-3 gate.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qpart/ops.hpp"
#include "qpart/rng.hpp"
#include "qpart/tensor.hpp"

namespace fdtest {

using DGraph = qpart::diff::GraphT<double>;
using DTensor = qpart::diff::TensorT<double>;
using qpart::diff::Shape;

inline double rel_err(double g, double fd) {
  const double scale = std::max({std::abs(g), std::abs(fd), 1e-6});
  return std::abs(g - fd) / scale;
}

// Builder receives a fresh graph plus leaves created from `values` and must
// return a scalar loss tensor.
using BuildFn =
    std::function<DTensor(DGraph&, std::vector<DTensor>&)>;

inline double fd_max_rel_err(const BuildFn& build, const std::vector<Shape>& shapes,
                             std::vector<std::vector<double>> values, double h = 1e-4) {
  DGraph g;
  std::vector<DTensor> leaves;
  for (std::size_t i = 0; i < shapes.size(); ++i) leaves.push_back(g.leaf(shapes[i], values[i]));
  DTensor loss = build(g, leaves);
  g.backward(loss);
  std::vector<std::vector<double>> grads;
  for (const auto& l : leaves) grads.push_back(g.grad_of(l.node));

  auto eval = [&](const std::vector<std::vector<double>>& vals) {
    DGraph gg;
    std::vector<DTensor> ll;
    for (std::size_t i = 0; i < shapes.size(); ++i) ll.push_back(gg.leaf(shapes[i], vals[i]));
    return build(gg, ll).scalar();
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < values[i].size(); ++j) {
      const double keep = values[i][j];
      values[i][j] = keep + h;
      const double fp = eval(values);
      values[i][j] = keep - h;
      const double fm = eval(values);
      values[i][j] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      worst = std::max(worst, rel_err(grads[i][j], fd));
    }
  }
  return worst;
}

// Random values in [lo, hi]; values inside the exclusion band around zero are
// pushed out of it (keeps kinked activations away from their kink).
inline std::vector<double> random_values(qpart::Rng& rng, std::size_t n, double lo, double hi,
                                         double exclude = 0.0) {
  std::vector<double> v(n);
  for (auto& x : v) {
    x = rng.uniform(lo, hi);
    if (exclude > 0.0 && std::abs(x) < exclude) x = x < 0 ? x - exclude : x + exclude;
  }
  return v;
}

struct PrimitiveCheck {
  std::string name;
  double max_rel_err;
};

// One randomized check round per primitive.
inline void run_primitive_round(qpart::Rng& rng, std::vector<PrimitiveCheck>& out) {
  using namespace qpart::diff;
  auto track = [&](const std::string& name, double err) {
    for (auto& p : out)
      if (p.name == name) {
        p.max_rel_err = std::max(p.max_rel_err, err);
        return;
      }
    out.push_back({name, err});
  };

  const Shape e{2, 3};
  auto rv = [&](std::size_t n, double lo, double hi, double ex = 0.0) {
    return random_values(rng, n, lo, hi, ex);
  };

  track("add", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(add(l[0], l[1]), {});
        },
        {e, e}, {rv(6, -2, 2), rv(6, -2, 2)}));
  track("subtract", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(sub(l[0], l[1]), {});
        },
        {e, e}, {rv(6, -2, 2), rv(6, -2, 2)}));
  track("multiply", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(mul(l[0], l[1]), {});
        },
        {e, e}, {rv(6, -2, 2), rv(6, -2, 2)}));
  track("scale_offset", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(offset(scale(l[0], 1.7), -0.3), {});
        },
        {e}, {rv(6, -2, 2)}));
  track("relu", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(relu(l[0]), {});
        },
        {e}, {rv(6, -2, 2, 0.05)}));
  track("tanh", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(tanh_(l[0]), {});
        },
        {e}, {rv(6, -2, 2)}));
  track("softplus", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(softplus(l[0]), {});
        },
        {e}, {rv(6, -4, 4)}));
  track("sin", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(sin_(l[0]), {});
        },
        {e}, {rv(6, -3, 3)}));
  track("cos", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(cos_(l[0]), {});
        },
        {e}, {rv(6, -3, 3)}));
  track("rsqrt", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(rsqrt(l[0]), {});
        },
        {e}, {rv(6, 0.5, 3)}));
  track("matmul", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(matmul(l[0], l[1]), {});
        },
        {{3, 4}, {4, 2}}, {rv(12, -2, 2), rv(8, -2, 2)}));
  track("add_rowvec", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(mul(add_rowvec(l[0], l[1]), add_rowvec(l[0], l[1])), {});
        },
        {{3, 4}, {4}}, {rv(12, -2, 2), rv(4, -2, 2)}));
  const Shape x4{2, 3, 4, 4};
  const Shape c1{3};
  track("chan_mul", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(chan_mul(l[0], l[1]), {});
        },
        {x4, c1}, {rv(96, -2, 2), rv(3, -2, 2)}));
  track("chan_add", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(mul(chan_add(l[0], l[1]), chan_add(l[0], l[1])), {});
        },
        {x4, c1}, {rv(96, -2, 2), rv(3, -2, 2)}));
  track("chan_sub", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(mul(chan_sub(l[0], l[1]), chan_sub(l[0], l[1])), {});
        },
        {x4, c1}, {rv(96, -2, 2), rv(3, -2, 2)}));
  track("conv2d", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(mul(conv2d(l[0], l[1], l[2], 2, 1), conv2d(l[0], l[1], l[2], 2, 1)), {});
        },
        {{2, 2, 5, 5}, {3, 2, 3, 3}, {3}}, {rv(100, -1, 1), rv(54, -1, 1), rv(3, -1, 1)}));
  track("conv_transpose2d", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(mul(conv_transpose2d(l[0], l[1], l[2], 2, 1),
                          conv_transpose2d(l[0], l[1], l[2], 2, 1)),
                      {});
        },
        {{2, 2, 3, 3}, {2, 3, 4, 4}, {3}}, {rv(36, -1, 1), rv(96, -1, 1), rv(3, -1, 1)}));
  track("batchnorm_train", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          std::vector<double> rm(3, 0.0), rvr(3, 1.0);
          return mean(mul(batchnorm(l[0], l[1], l[2], rm, rvr, true),
                          offset(l[0], 0.5)),
                      {});
        },
        {x4, c1, c1}, {rv(96, -2, 2), rv(3, 0.5, 1.5), rv(3, -0.5, 0.5)}));
  track("batchnorm_eval", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          std::vector<double> rm{0.1, -0.2, 0.3}, rvr{1.2, 0.8, 1.5};
          return mean(mul(batchnorm(l[0], l[1], l[2], rm, rvr, false),
                          offset(l[0], 0.5)),
                      {});
        },
        {x4, c1, c1}, {rv(96, -2, 2), rv(3, 0.5, 1.5), rv(3, -0.5, 0.5)}));
  track("mean_axes", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(mul(mean(l[0], {0, 2}), mean(l[0], {0, 2})), {});
        },
        {{2, 3, 4}}, {rv(24, -2, 2)}));
  track("squared_error", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return squared_error_mean(l[0], l[1]);
        },
        {e, e}, {rv(6, -2, 2), rv(6, -2, 2)}));
  track("sub_bcast_scalar", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          auto d = sub_bcast_scalar(l[0], mean(l[0], {}));
          return mean(mul(d, d), {});
        },
        {{5, 1}}, {rv(5, -2, 2)}));
  track("reshape", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          return mean(mul(reshape(l[0], {3, 2}), reshape(l[0], {3, 2})), {});
        },
        {e}, {rv(6, -2, 2)}));
  track("gather_rows", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          auto gth = gather_rows(l[0], {2, 0, 2, 1});
          return mean(mul(gth, gth), {});
        },
        {{3, 4}}, {rv(12, -2, 2)}));
  track("concat_rows", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          auto cat = concat_rows<double>({l[0], l[1]});
          return mean(mul(cat, cat), {});
        },
        {{2, 3}, {4, 3}}, {rv(6, -2, 2), rv(12, -2, 2)}));
  track("concat_cols", fd_max_rel_err([](DGraph&, std::vector<DTensor>& l) {
          auto cat = concat_cols(l[0], l[1]);
          return mean(mul(cat, cat), {});
        },
        {{3, 2}, {3, 4}}, {rv(6, -2, 2), rv(12, -2, 2)}));
}

inline std::vector<PrimitiveCheck> run_all_primitive_checks(int rounds, std::uint64_t seed) {
  qpart::Rng rng(seed);
  std::vector<PrimitiveCheck> out;
  for (int r = 0; r < rounds; ++r) run_primitive_round(rng, out);
  return out;
}

}  // namespace fdtest
