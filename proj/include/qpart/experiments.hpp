#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpart/metrics.hpp"
#include "qpart/theorem.hpp"
#include "qpart/ttt.hpp"

// Analysis harnesses that drive the model end to end: the six-row ablation
// grid over {QP-Net, LR, VM}, the K sweep, and the empirical side of the
// theorem diagnostics.

namespace qpart::analysis {

struct AblationRow {
  bool qpnet = false, lr = false, vm = false;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

// Six flag rows per seed: (-,-,-), (Q,-,-), (Q,L,-), (-,-,V), (Q,-,V), (Q,L,V).
std::vector<AblationRow> ablation_run(const qpnet::ModelConfig& cfg,
                                      const qpnet::ModelState& state,
                                      const std::vector<synth::VideoSample>& samples,
                                      const ttt::AdaptConfig& acfg,
                                      const std::vector<std::uint64_t>& seeds, int workers = 1);

void ablation_to_csv(const std::string& path, const std::vector<AblationRow>& rows);

// MAE of a flag row averaged over seeds.
double ablation_mean_mae(const std::vector<AblationRow>& rows, bool qpnet, bool lr, bool vm);

struct KSweepRow {
  int K = 0;
  std::string cohort;
  std::uint64_t seed = 0;
  double mae = 0, rmse = 0, mape = 0;
  double seconds = 0;
};

std::vector<KSweepRow> k_sweep(const qpnet::ModelConfig& cfg, const qpnet::ModelState& state,
                               const std::vector<synth::VideoSample>& samples,
                               const ttt::AdaptConfig& base_cfg, const std::vector<int>& Ks,
                               const std::vector<std::uint64_t>& seeds, int workers = 1);

void ksweep_to_csv(const std::string& path, const std::vector<KSweepRow>& rows);

double ksweep_mean_mae(const std::vector<KSweepRow>& rows, int K);

// View predictions from the fixed (non-adapted) model over augmentation
// chains; feeds analyze_view_predictions.
EmpiricalTheoremReport verify_theorem1_empirical(const qpnet::ModelConfig& cfg,
                                                 const qpnet::ModelState& state,
                                                 const std::vector<synth::VideoSample>& samples,
                                                 int K, std::uint64_t seed, int workers = 1,
                                                 int max_samples = 0);

}  // namespace qpart::analysis
