#pragma once

#include <cstdint>
#include <vector>

#include "qpart/model.hpp"
#include "qpart/synthdata.hpp"

namespace qpart::qpnet {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 4;
  double base_lr = 5e-4;
  int warmup_epochs = 10;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool verbose = false;
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean L_total per epoch
};

// SGD with momentum + warmup/cosine schedule over the source cohort.
// Deterministic for a fixed seed; aborts on a non-finite loss.
TrainStats train_model(Model& m, const std::vector<synth::VideoSample>& data,
                       const TrainConfig& tc);

// Builds the (B*T, 1, H, W) pixel buffer for a batch of samples.
std::vector<float> batch_pixels(const std::vector<synth::VideoSample>& data,
                                const std::vector<int>& idx);

}  // namespace qpart::qpnet
