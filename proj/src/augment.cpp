#include "qpart/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "qpart/rng.hpp"

namespace qpart::aug {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

inline float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("augment: " + msg);
}

// bilinear sample with zero fill outside the frame
inline double sample_bilinear(const float* img, int H, int W, double y, double x) {
  if (y < -1 || y > H || x < -1 || x > W) return 0.0;
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  auto at = [&](int iy, int ix) -> double {
    if (iy < 0 || iy >= H || ix < 0 || ix >= W) return 0.0;
    return img[iy * W + ix];
  };
  return at(y0, x0) * (1 - fy) * (1 - fx) + at(y0, x0 + 1) * (1 - fy) * fx +
         at(y0 + 1, x0) * fy * (1 - fx) + at(y0 + 1, x0 + 1) * fy * fx;
}

// displacement field from a coarse node grid, bilinearly upsampled
struct WarpField {
  int H, W, gh, gw;
  std::vector<double> dx, dy;  // gh*gw nodes

  WarpField(int H_, int W_, int grid, double amplitude, std::uint64_t seed)
      : H(H_), W(W_), gh(grid), gw(grid), dx(grid * grid), dy(grid * grid) {
    Rng rng(seed);
    for (auto& v : dx) v = rng.uniform(-amplitude, amplitude);
    for (auto& v : dy) v = rng.uniform(-amplitude, amplitude);
  }

  void displacement(double y, double x, double& oy, double& ox) const {
    const double gy = y / (H - 1) * (gh - 1);
    const double gx = x / (W - 1) * (gw - 1);
    const int y0 = std::min(static_cast<int>(gy), gh - 2);
    const int x0 = std::min(static_cast<int>(gx), gw - 2);
    const double fy = gy - y0, fx = gx - x0;
    auto lerp = [&](const std::vector<double>& f) {
      return f[y0 * gw + x0] * (1 - fy) * (1 - fx) + f[y0 * gw + x0 + 1] * (1 - fy) * fx +
             f[(y0 + 1) * gw + x0] * fy * (1 - fx) + f[(y0 + 1) * gw + x0 + 1] * fy * fx;
    };
    oy = lerp(dy);
    ox = lerp(dx);
  }
};

void warp_frames(const WarpField& field, const std::vector<float>& x, std::vector<float>& out,
                 int T, int H, int W) {
  for (int t = 0; t < T; ++t) {
    const float* src = x.data() + static_cast<std::size_t>(t) * H * W;
    float* dst = out.data() + static_cast<std::size_t>(t) * H * W;
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix) {
        double oy, ox;
        field.displacement(iy, ix, oy, ox);
        dst[iy * W + ix] = clamp01(sample_bilinear(src, H, W, iy + oy, ix + ox));
      }
  }
}

}  // namespace

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::gamma: return "gamma";
    case Kind::speckle: return "speckle";
    case Kind::shadow: return "shadow";
    case Kind::elastic: return "elastic";
    case Kind::rotate: return "rotate";
    case Kind::hflip: return "hflip";
    case Kind::gaussian_blur: return "gaussian_blur";
    case Kind::grid_distort: return "grid_distort";
  }
  return "?";
}

Kind kind_from_name(const std::string& name) {
  for (Kind k : {Kind::gamma, Kind::speckle, Kind::shadow, Kind::elastic, Kind::rotate,
                 Kind::hflip, Kind::gaussian_blur, Kind::grid_distort})
    if (name == kind_name(k)) return k;
  throw std::invalid_argument("augment: unknown kind '" + name + "'");
}

std::vector<float> apply(const AugSpec& spec, const std::vector<float>& x, int T, int H, int W) {
  if (x.size() != static_cast<std::size_t>(T) * H * W)
    throw std::invalid_argument("augment: pixel buffer does not match T*H*W");
  std::vector<float> out(x.size());
  const std::size_t fsz = static_cast<std::size_t>(H) * W;

  switch (spec.kind) {
    case Kind::gamma: {
      check(spec.params.size() == 1, "gamma needs one parameter");
      const double g = spec.params[0];
      check(g >= 0.7 && g <= 1.5, "gamma exponent out of [0.7, 1.5]");
      for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = clamp01(std::pow(static_cast<double>(x[i]), g));
      return out;
    }
    case Kind::speckle: {
      check(spec.params.size() == 1, "speckle needs one parameter");
      const double sigma = spec.params[0];
      check(sigma >= 0.0 && sigma <= 0.15, "speckle sigma out of [0, 0.15]");
      std::vector<double> field(fsz);
      Rng rng(spec.seed);
      for (auto& v : field) v = rng.normal();
      for (int t = 0; t < T; ++t)
        for (std::size_t i = 0; i < fsz; ++i)
          out[t * fsz + i] = clamp01(x[t * fsz + i] * (1.0 + sigma * field[i]));
      return out;
    }
    case Kind::shadow: {
      check(spec.params.size() == 3, "shadow needs three parameters");
      const double half_angle = spec.params[0], azimuth = spec.params[1], att = spec.params[2];
      check(half_angle >= 5 * kDeg && half_angle <= 25 * kDeg, "shadow half-angle out of range");
      check(azimuth >= 45 * kDeg && azimuth <= 135 * kDeg, "shadow azimuth out of range");
      check(att >= 0.3 && att <= 0.7, "shadow attenuation out of [0.3, 0.7]");
      // wedge from the probe apex at top-center
      const double ax = (W - 1) / 2.0, ay = -0.5;
      std::vector<float> mask(fsz, 1.f);
      for (int iy = 0; iy < H; ++iy)
        for (int ix = 0; ix < W; ++ix) {
          const double psi = std::atan2(iy - ay, ix - ax);
          if (std::abs(psi - azimuth) <= half_angle)
            mask[iy * W + ix] = static_cast<float>(att);
        }
      for (int t = 0; t < T; ++t)
        for (std::size_t i = 0; i < fsz; ++i) out[t * fsz + i] = clamp01(x[t * fsz + i] * mask[i]);
      return out;
    }
    case Kind::elastic: {
      check(spec.params.size() == 1, "elastic needs one parameter");
      const double amp = spec.params[0];
      check(amp > 0 && amp <= 2.0, "elastic amplitude out of (0, 2]");
      WarpField field(H, W, 4, amp, spec.seed);
      warp_frames(field, x, out, T, H, W);
      return out;
    }
    case Kind::grid_distort: {
      check(spec.params.size() == 1, "grid_distort needs one parameter");
      const double amp = spec.params[0];
      check(amp > 0 && amp <= 1.5, "grid_distort amplitude out of (0, 1.5]");
      WarpField field(H, W, 3, amp, spec.seed);
      warp_frames(field, x, out, T, H, W);
      return out;
    }
    case Kind::rotate: {
      check(spec.params.size() == 1, "rotate needs one parameter");
      const double ang = spec.params[0];
      check(std::abs(ang) <= 10 * kDeg + 1e-12, "rotation angle out of +-10 degrees");
      const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
      const double ca = std::cos(ang), sa = std::sin(ang);
      for (int t = 0; t < T; ++t) {
        const float* src = x.data() + t * fsz;
        float* dst = out.data() + t * fsz;
        for (int iy = 0; iy < H; ++iy)
          for (int ix = 0; ix < W; ++ix) {
            const double ry = iy - cy, rx = ix - cx;
            const double sy = cy + (sa * rx + ca * ry);
            const double sx = cx + (ca * rx - sa * ry);
            dst[iy * W + ix] = clamp01(sample_bilinear(src, H, W, sy, sx));
          }
      }
      return out;
    }
    case Kind::hflip: {
      check(spec.params.empty(), "hflip takes no parameters");
      for (int t = 0; t < T; ++t)
        for (int iy = 0; iy < H; ++iy)
          for (int ix = 0; ix < W; ++ix)
            out[t * fsz + iy * W + ix] = x[t * fsz + iy * W + (W - 1 - ix)];
      return out;
    }
    case Kind::gaussian_blur: {
      check(spec.params.size() == 1, "gaussian_blur needs one parameter");
      const double sigma = spec.params[0];
      check(sigma >= 0.5 && sigma <= 1.0, "blur sigma out of [0.5, 1.0]");
      const int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
      std::vector<double> kernel(2 * radius + 1);
      for (int i = -radius; i <= radius; ++i)
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
      std::vector<float> tmp(fsz);
      for (int t = 0; t < T; ++t) {
        const float* src = x.data() + t * fsz;
        float* dst = out.data() + t * fsz;
        // horizontal, renormalized at borders
        for (int iy = 0; iy < H; ++iy)
          for (int ix = 0; ix < W; ++ix) {
            double acc = 0, wsum = 0;
            for (int k = -radius; k <= radius; ++k) {
              const int j = ix + k;
              if (j < 0 || j >= W) continue;
              acc += kernel[k + radius] * src[iy * W + j];
              wsum += kernel[k + radius];
            }
            tmp[iy * W + ix] = static_cast<float>(acc / wsum);
          }
        for (int iy = 0; iy < H; ++iy)
          for (int ix = 0; ix < W; ++ix) {
            double acc = 0, wsum = 0;
            for (int k = -radius; k <= radius; ++k) {
              const int j = iy + k;
              if (j < 0 || j >= H) continue;
              acc += kernel[k + radius] * tmp[j * W + ix];
              wsum += kernel[k + radius];
            }
            dst[iy * W + ix] = clamp01(acc / wsum);
          }
      }
      return out;
    }
  }
  throw std::logic_error("augment: unhandled kind");
}

std::vector<float> apply_chain(const AugChain& chain, const std::vector<float>& x, int T, int H,
                               int W) {
  std::vector<float> cur = x;
  for (const auto& spec : chain.specs) cur = apply(spec, cur, T, H, W);
  return cur;
}

namespace {

AugSpec draw_geometric(Rng& rng) {
  AugSpec s;
  switch (rng.uniform_int(4)) {
    case 0:
      s.kind = Kind::hflip;
      break;
    case 1:
      s.kind = Kind::rotate;
      s.params = {rng.uniform(-10 * kDeg, 10 * kDeg)};
      break;
    case 2:
      s.kind = Kind::elastic;
      s.params = {rng.uniform(0.5, 2.0)};
      break;
    default:
      s.kind = Kind::grid_distort;
      s.params = {rng.uniform(0.4, 1.5)};
      break;
  }
  s.seed = rng.next_u64();
  return s;
}

AugSpec draw_intensity(Rng& rng) {
  AugSpec s;
  switch (rng.uniform_int(3)) {
    case 0:
      s.kind = Kind::gamma;
      s.params = {rng.uniform(0.7, 1.5)};
      break;
    case 1:
      s.kind = Kind::shadow;
      s.params = {rng.uniform(5 * kDeg, 25 * kDeg), rng.uniform(45 * kDeg, 135 * kDeg),
                  rng.uniform(0.3, 0.7)};
      break;
    default:
      s.kind = Kind::gaussian_blur;
      s.params = {rng.uniform(0.5, 1.0)};
      break;
  }
  s.seed = rng.next_u64();
  return s;
}

AugSpec draw_noise(Rng& rng) {
  AugSpec s;
  s.kind = Kind::speckle;
  s.params = {rng.uniform(0.02, 0.15)};
  s.seed = rng.next_u64();
  return s;
}

}  // namespace

std::vector<AugChain> sample_chains(std::uint64_t seed, int K) {
  if (K < 2) throw std::invalid_argument("sample_chains: K must be >= 2");
  std::vector<AugChain> chains(K);
  for (int k = 0; k < K; ++k) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(k)));
    const bool inc_geo = rng.uniform() < 0.5;
    const bool inc_int = rng.uniform() < 0.5;
    const bool inc_noise = rng.uniform() < 0.5;
    int forced = -1;
    if (!inc_geo && !inc_int && !inc_noise) forced = rng.uniform_int(3);
    AugChain& c = chains[k];
    if (inc_geo || forced == 0) c.specs.push_back(draw_geometric(rng));
    if (inc_int || forced == 1) c.specs.push_back(draw_intensity(rng));
    if (inc_noise || forced == 2) c.specs.push_back(draw_noise(rng));
  }
  return chains;
}

std::string chain_to_json(const AugChain& chain) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& s : chain.specs)
    j.push_back({{"kind", kind_name(s.kind)}, {"params", s.params}, {"seed", s.seed}});
  return j.dump();
}

AugChain chain_from_json(const std::string& text) {
  AugChain c;
  for (const auto& js : nlohmann::json::parse(text)) {
    AugSpec s;
    s.kind = kind_from_name(js.at("kind").get<std::string>());
    s.params = js.at("params").get<std::vector<double>>();
    s.seed = js.at("seed").get<std::uint64_t>();
    c.specs.push_back(std::move(s));
  }
  return c;
}

}  // namespace qpart::aug
