#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qpart/cde.hpp"
#include "qpart/layers.hpp"
#include "qpart/ops.hpp"
#include "qpart/rng.hpp"
#include "qpart/tensor.hpp"

// Quasi-period network: per-frame conv encoder, helix-parameterized periodic
// head, CDE-driven aperiodic branch over the residual, transposed-conv
// decoder and a GAP+MLP regression head.

namespace qpart::qpnet {

using diff::GraphT;
using diff::Group;
using diff::ParamT;
using diff::Shape;
using diff::TensorT;

struct ModelConfig {
  int frames = 16;          // T
  int frame_size = 16;      // H = W
  int latent_channels = 8;  // c
  int latent_size = 4;      // h = w
  int enc_hidden = 16;      // encoder mid width
  int field_hidden = 64;    // vector-field hidden width
  int reg_hidden = 32;      // regression head hidden width
  int substeps = 4;         // RK4 substeps per frame interval

  void validate() const {
    if (frames < 2 || frame_size < 4 || latent_channels < 1 || latent_size < 1 ||
        enc_hidden < 1 || field_hidden < 1 || reg_hidden < 1 || substeps < 1)
      throw std::invalid_argument("ModelConfig: all sizes must be positive");
    if (frame_size != latent_size * 4)
      throw std::invalid_argument(
          "ModelConfig: two stride-2 blocks need frame_size == 4*latent_size");
  }

  int latent_dim() const { return latent_channels * latent_size * latent_size; }

  // normalized frame times t_k = k/T, inside [0, 1)
  std::vector<double> times() const {
    std::vector<double> t(frames);
    for (int k = 0; k < frames; ++k) t[k] = static_cast<double>(k) / frames;
    return t;
  }
};

template <typename S>
struct HelixParamsT {
  TensorT<S> f, phi, b, v;  // each (B, c, h, w)
};

// Evaluation of the helix trajectory cos(2pi(f t - phi)) + sin(2pi(f t - phi))
// + v t + b at every frame time; one fused graph node, differentiable in all
// four parameter fields. Output rows are sample-major: row b*T + t.
template <typename S>
TensorT<S> helix_eval(GraphT<S>& g, const HelixParamsT<S>& p, const std::vector<double>& times) {
  const Shape& sh = p.f.shape;
  if (sh != p.phi.shape || sh != p.b.shape || sh != p.v.shape || sh.size() != 4)
    throw diff::ShapeError("helix_eval: parameter fields must share shape (B,c,h,w)");
  const int B = sh[0];
  const std::size_t CHW = diff::numel(sh) / B;
  const int T = static_cast<int>(times.size());
  const double two_pi = 2.0 * 3.14159265358979323846;
  std::vector<S> out(static_cast<std::size_t>(B) * T * CHW);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t) {
      const double tau = times[t];
      const std::size_t obase = (static_cast<std::size_t>(b) * T + t) * CHW;
      const std::size_t pbase = static_cast<std::size_t>(b) * CHW;
      for (std::size_t j = 0; j < CHW; ++j) {
        const double fv = static_cast<double>((*p.f.data)[pbase + j]);
        const double ph = static_cast<double>((*p.phi.data)[pbase + j]);
        const double theta = two_pi * (fv * tau - ph);
        out[obase + j] = static_cast<S>(std::cos(theta) + std::sin(theta) +
                                        static_cast<double>((*p.v.data)[pbase + j]) * tau +
                                        static_cast<double>((*p.b.data)[pbase + j]));
      }
    }
  const int i_f = p.f.node, i_phi = p.phi.node, i_b = p.b.node, i_v = p.v.node;
  auto df = p.f.data, dphi = p.phi.data;
  Shape out_shape{B * T, sh[1], sh[2], sh[3]};
  return g.record(
      std::move(out_shape), std::move(out),
      [i_f, i_phi, i_b, i_v, df, dphi, times, B, CHW, two_pi](GraphT<S>& g, int self) {
        const auto& go = g.gbuf(self);
        const int T = static_cast<int>(times.size());
        auto* gf = i_f >= 0 ? &g.gbuf(i_f) : nullptr;
        auto* gphi = i_phi >= 0 ? &g.gbuf(i_phi) : nullptr;
        auto* gb = i_b >= 0 ? &g.gbuf(i_b) : nullptr;
        auto* gv = i_v >= 0 ? &g.gbuf(i_v) : nullptr;
        for (int b = 0; b < B; ++b)
          for (int t = 0; t < T; ++t) {
            const double tau = times[t];
            const std::size_t obase = (static_cast<std::size_t>(b) * T + t) * CHW;
            const std::size_t pbase = static_cast<std::size_t>(b) * CHW;
            for (std::size_t j = 0; j < CHW; ++j) {
              const double gout = go[obase + j];
              if (gout == 0.0) continue;
              const double fv = static_cast<double>((*df)[pbase + j]);
              const double ph = static_cast<double>((*dphi)[pbase + j]);
              const double theta = two_pi * (fv * tau - ph);
              const double c = std::cos(theta), s = std::sin(theta);
              if (gf) (*gf)[pbase + j] += gout * (c - s) * two_pi * tau;
              if (gphi) (*gphi)[pbase + j] += gout * (s - c) * two_pi;
              if (gv) (*gv)[pbase + j] += gout * tau;
              if (gb) (*gb)[pbase + j] += gout;
            }
          }
      });
}

// 1x1 conv -> BN -> relu -> 1x1 conv; BN affine carries the periodic group.
template <typename S>
struct ProjHeadT {
  nn::Conv2d<S> c1;
  nn::BatchNorm<S> bn;
  nn::Conv2d<S> c2;

  ProjHeadT() = default;
  ProjHeadT(const std::string& name, int channels, Rng& rng)
      : c1(name + ".c1", channels, channels, 1, 1, 0, rng),
        bn(name + ".bn", channels, Group::periodic_bn),
        c2(name + ".c2", channels, channels, 1, 1, 0, rng) {}

  TensorT<S> forward(GraphT<S>& g, const TensorT<S>& x, bool train) {
    return c2.forward(g, diff::relu(bn.forward(g, c1.forward(g, x), train)));
  }

  void visit(nn::StateVisitor<S>& v) {
    c1.visit(v);
    bn.visit(v);
    c2.visit(v);
  }
};

template <typename S>
struct ModelOutputT {
  TensorT<S> y_hat;      // (B, 1)
  TensorT<S> x_rec;      // (B*T, 1, H, W)
  TensorT<S> z_period;   // (B*T, c, h, w); empty when decomposition bypassed
  TensorT<S> z_aperiod;  // (B*T, c, h, w)
  TensorT<S> loss_reg;   // scalar; empty without targets
  TensorT<S> loss_rec;   // scalar
  TensorT<S> loss_total;
};

template <typename S>
struct ModelT {
  ModelConfig cfg;
  std::uint64_t init_seed = 0;

  nn::Conv2d<S> enc1;
  nn::BatchNorm<S> ebn1;
  nn::Conv2d<S> enc2;
  nn::BatchNorm<S> ebn2;
  ProjHeadT<S> head_f, head_phi, head_b, head_v;
  cde::VectorFieldT<S> field;
  nn::ConvTranspose2d<S> dec1;
  nn::BatchNorm<S> dbn1;
  nn::ConvTranspose2d<S> dec2;
  nn::Linear<S> reg1, reg2;

  // copying would alias parameter storage across replicas
  ModelT(const ModelT&) = delete;
  ModelT& operator=(const ModelT&) = delete;
  ModelT(ModelT&&) = default;
  ModelT& operator=(ModelT&&) = default;

  explicit ModelT(const ModelConfig& cfg_, std::uint64_t seed) : cfg(cfg_), init_seed(seed) {
    cfg.validate();
    Rng rng(Rng::derive(seed, 0x11));
    const int c = cfg.latent_channels, mid = cfg.enc_hidden;
    enc1 = nn::Conv2d<S>("enc1", 1, mid, 3, 2, 1, rng);
    ebn1 = nn::BatchNorm<S>("ebn1", mid, Group::base_bn);
    enc2 = nn::Conv2d<S>("enc2", mid, c, 3, 2, 1, rng);
    ebn2 = nn::BatchNorm<S>("ebn2", c, Group::base_bn);
    head_f = ProjHeadT<S>("head_f", c, rng);
    head_phi = ProjHeadT<S>("head_phi", c, rng);
    head_b = ProjHeadT<S>("head_b", c, rng);
    head_v = ProjHeadT<S>("head_v", c, rng);
    field = cde::VectorFieldT<S>("field", cfg.latent_dim(), cfg.field_hidden, rng);
    dec1 = nn::ConvTranspose2d<S>("dec1", c, mid, 4, 2, 1, rng);
    dbn1 = nn::BatchNorm<S>("dbn1", mid, Group::base_bn);
    dec2 = nn::ConvTranspose2d<S>("dec2", mid, 1, 4, 2, 1, rng);
    reg1 = nn::Linear<S>("reg1", c, cfg.reg_hidden, rng);
    reg2 = nn::Linear<S>("reg2", cfg.reg_hidden, 1, rng);
    // start predictions mid-range so the first regression steps are tame
    (*reg2.b.value)[0] = S(47.5);
  }

  void visit(nn::StateVisitor<S>& v) {
    enc1.visit(v);
    ebn1.visit(v);
    enc2.visit(v);
    ebn2.visit(v);
    head_f.visit(v);
    head_phi.visit(v);
    head_b.visit(v);
    head_v.visit(v);
    field.visit(v);
    dec1.visit(v);
    dbn1.visit(v);
    dec2.visit(v);
    reg1.visit(v);
    reg2.visit(v);
  }

  std::vector<ParamT<S>*> params() {
    std::vector<ParamT<S>*> out;
    nn::StateVisitor<S> v;
    v.param = [&](ParamT<S>& p) { out.push_back(&p); };
    v.buffer = [](const std::string&, std::vector<S>&) {};
    visit(v);
    return out;
  }

  // per-frame conv stack; frames ride the conv batch axis
  TensorT<S> encode(GraphT<S>& g, const TensorT<S>& x, bool train) {
    if (x.shape.size() != 4 || x.shape[1] != 1 || x.shape[2] != cfg.frame_size ||
        x.shape[3] != cfg.frame_size || x.shape[0] % cfg.frames != 0)
      throw diff::ShapeError("encode: expected (B*T,1," + std::to_string(cfg.frame_size) + "," +
                             std::to_string(cfg.frame_size) + "), got " +
                             diff::shape_str(x.shape));
    TensorT<S> h = diff::relu(ebn1.forward(g, enc1.forward(g, x), train));
    return diff::relu(ebn2.forward(g, enc2.forward(g, h), train));
  }

  // temporal mean, then four independent heads; frequencies floored at 0.25
  HelixParamsT<S> project_periodic_params(GraphT<S>& g, const TensorT<S>& z, bool train) {
    const int B = z.shape[0] / cfg.frames;
    const int c = cfg.latent_channels, hs = cfg.latent_size;
    TensorT<S> zb = diff::reshape(z, {B, cfg.frames, c * hs * hs});
    TensorT<S> zmean = diff::reshape(diff::mean(zb, {1}), {B, c, hs, hs});
    HelixParamsT<S> p;
    p.f = diff::offset(diff::softplus(head_f.forward(g, zmean, train)), 0.25);
    p.phi = head_phi.forward(g, zmean, train);
    p.b = head_b.forward(g, zmean, train);
    p.v = head_v.forward(g, zmean, train);
    return p;
  }

  // residual -> spline -> CDE; returns sample-major (B*T, c, h, w)
  TensorT<S> aperiodic_encode(GraphT<S>& g, const TensorT<S>& z_res, bool train) {
    const int T = cfg.frames;
    const int B = z_res.shape[0] / T;
    const int D = cfg.latent_dim();
    const std::vector<double> times = cfg.times();
    TensorT<S> z2 = diff::reshape(z_res, {B * T, D});
    TensorT<S> coeffs = cde::spline_fit_op(z2, times);
    std::vector<int> first_rows(B);
    for (int b = 0; b < B; ++b) first_rows[b] = b * T;
    TensorT<S> z0 = diff::gather_rows(z2, first_rows);
    field.train_mode = train;
    cde::CDEConfig cc{cfg.substeps};
    auto rows = cde::integrate_trajectory_rows(
        g, [this](GraphT<S>& gg, const TensorT<S>& s, double t) { return field(gg, s, t); },
        coeffs, z0, times, cc);
    TensorT<S> stacked = cde::stack_rows(rows);  // (T*B, D) t-major
    std::vector<int> perm(static_cast<std::size_t>(B) * T);
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t) perm[static_cast<std::size_t>(b) * T + t] = t * B + b;
    TensorT<S> ordered = diff::gather_rows(stacked, perm);
    return diff::reshape(ordered, {B * T, cfg.latent_channels, cfg.latent_size, cfg.latent_size});
  }

  TensorT<S> decode(GraphT<S>& g, const TensorT<S>& z_sum, bool train) {
    TensorT<S> h = diff::relu(dbn1.forward(g, dec1.forward(g, z_sum), train));
    return dec2.forward(g, h);
  }

  // GAP over time and space (channels kept) -> two-layer perceptron
  TensorT<S> predict_ef(GraphT<S>& g, const TensorT<S>& z_sum, bool /*train*/) {
    const int B = z_sum.shape[0] / cfg.frames;
    const int c = cfg.latent_channels, hs = cfg.latent_size;
    TensorT<S> zb = diff::reshape(z_sum, {B, cfg.frames, c, hs, hs});
    TensorT<S> gap = diff::mean(zb, {1, 3, 4});  // (B, c)
    TensorT<S> h = diff::relu(reg1.forward(g, gap));
    return reg2.forward(g, h);  // (B, 1)
  }

  // Full pipeline. `y` holds one EF percent target per sample; empty target
  // list skips the regression loss. `bypass_decomposition` routes the raw
  // latent straight to the decoder and regression head.
  ModelOutputT<S> forward_full(GraphT<S>& g, const TensorT<S>& x, const std::vector<S>& y,
                               bool train, bool bypass_decomposition = false) {
    const int B = x.shape[0] / cfg.frames;
    ModelOutputT<S> out;
    TensorT<S> z = encode(g, x, train);
    TensorT<S> z_sum;
    if (bypass_decomposition) {
      z_sum = z;
    } else {
      HelixParamsT<S> hp = project_periodic_params(g, z, train);
      out.z_period = helix_eval(g, hp, cfg.times());
      TensorT<S> z_res = diff::sub(z, out.z_period);
      out.z_aperiod = aperiodic_encode(g, z_res, train);
      z_sum = diff::add(out.z_period, out.z_aperiod);
    }
    out.x_rec = decode(g, z_sum, train);
    out.y_hat = predict_ef(g, z_sum, train);
    TensorT<S> target = x;
    target.graph = nullptr;
    target.node = -1;  // same pixels, detached
    out.loss_rec = diff::squared_error_mean(out.x_rec, target);
    if (!y.empty()) {
      if (static_cast<int>(y.size()) != B)
        throw diff::ShapeError("forward_full: " + std::to_string(y.size()) + " targets for " +
                               std::to_string(B) + " samples");
      TensorT<S> yt = diff::make_tensor<S>({B, 1}, std::vector<S>(y));
      out.loss_reg = diff::squared_error_mean(out.y_hat, yt);
      out.loss_total = diff::add(out.loss_reg, out.loss_rec);
    } else {
      out.loss_total = out.loss_rec;
    }
    return out;
  }
};

using Model = ModelT<float>;

}  // namespace qpart::qpnet
