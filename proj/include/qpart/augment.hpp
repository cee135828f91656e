#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Domain-specific test-time augmentations. Every transform is applied
// identically to all frames of a clip (the motion pattern carries the
// target, so per-frame randomness is off the table), preserves shape, and
// clamps back into [0, 1].

namespace qpart::aug {

enum class Kind {
  gamma,
  speckle,
  shadow,
  elastic,
  rotate,
  hflip,
  gaussian_blur,
  grid_distort
};

const char* kind_name(Kind k);
Kind kind_from_name(const std::string& name);

// Parameter conventions (validated in apply):
//   gamma:         params = {exponent in [0.7, 1.5]}
//   speckle:       params = {sigma in [0, 0.15]}, noise field from seed
//   shadow:        params = {half_angle_rad in [5deg, 25deg],
//                            azimuth_rad in [45deg, 135deg],
//                            attenuation in [0.3, 0.7]}
//   elastic:       params = {amplitude_px in (0, 2]}, 4x4 grid from seed
//   rotate:        params = {angle_rad in [-10deg, 10deg]}
//   hflip:         params = {}
//   gaussian_blur: params = {sigma_px in [0.5, 1.0]}
//   grid_distort:  params = {amplitude_px in (0, 1.5]}, 3x3 grid from seed
struct AugSpec {
  Kind kind = Kind::gamma;
  std::vector<double> params;
  std::uint64_t seed = 0;
};

// Ordered geometric -> intensity -> noise.
struct AugChain {
  std::vector<AugSpec> specs;
};

std::vector<float> apply(const AugSpec& spec, const std::vector<float>& x, int frames, int height,
                         int width);
std::vector<float> apply_chain(const AugChain& chain, const std::vector<float>& x, int frames,
                               int height, int width);

// K stochastic chains with sub-seeds split deterministically from seed.
// Each of the three categories is included with probability 1/2 (at least
// one always), drawing one transform uniformly inside the category.
std::vector<AugChain> sample_chains(std::uint64_t seed, int K);

std::string chain_to_json(const AugChain& chain);
AugChain chain_from_json(const std::string& text);

}  // namespace qpart::aug
