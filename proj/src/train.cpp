#include "qpart/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "qpart/optim.hpp"
#include "qpart/rng.hpp"

namespace qpart::qpnet {

std::vector<float> batch_pixels(const std::vector<synth::VideoSample>& data,
                                const std::vector<int>& idx) {
  std::vector<float> out;
  if (idx.empty()) return out;
  out.reserve(idx.size() * data[idx[0]].pixels.size());
  for (int i : idx) out.insert(out.end(), data[i].pixels.begin(), data[i].pixels.end());
  return out;
}

TrainStats train_model(Model& m, const std::vector<synth::VideoSample>& data,
                       const TrainConfig& tc) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (tc.batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
  for (const auto& s : data)
    if (s.frames != m.cfg.frames || s.frame_size != m.cfg.frame_size)
      throw std::invalid_argument("train: sample geometry disagrees with model config");

  TrainStats stats;
  auto params = m.params();
  const int n = static_cast<int>(data.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = diff::lr_schedule(epoch, tc.epochs, tc.warmup_epochs, tc.base_lr);
    const std::map<diff::Group, double> lrs{{diff::Group::backbone, lr},
                                            {diff::Group::base_bn, lr},
                                            {diff::Group::periodic_bn, lr},
                                            {diff::Group::aperiodic_bn, lr}};
    // deterministic per-epoch shuffle
    Rng shuffle_rng(Rng::derive(tc.seed, 0x5f00 + epoch));
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    double loss_sum = 0.0;
    int steps = 0;
    for (int start = 0; start < n; start += tc.batch_size, ++steps) {
      const int bsz = std::min(tc.batch_size, n - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + bsz);
      std::vector<float> xv = batch_pixels(data, idx);
      std::vector<float> y(bsz);
      for (int b = 0; b < bsz; ++b) y[b] = static_cast<float>(data[idx[b]].ef_true);

      diff::Graph g;
      auto x = g.leaf({bsz * m.cfg.frames, 1, m.cfg.frame_size, m.cfg.frame_size}, std::move(xv));
      auto out = m.forward_full(g, x, y, true);
      const double loss = out.loss_total.scalar();
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(steps));
      loss_sum += loss;
      diff::zero_grads(params);
      g.backward(out.loss_total);
      diff::sgd_step(params, lrs, tc.momentum, tc.weight_decay);
    }
    stats.epoch_loss.push_back(loss_sum / std::max(steps, 1));
    if (tc.verbose)
      std::fprintf(stderr, "epoch %3d  lr %.5f  loss %.4f\n", epoch, lr, stats.epoch_loss.back());
  }
  return stats;
}

}  // namespace qpart::qpnet
