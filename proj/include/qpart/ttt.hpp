#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qpart/augment.hpp"
#include "qpart/checkpoint.hpp"
#include "qpart/model.hpp"
#include "qpart/synthdata.hpp"

// Episodic test-time training: per sample, K augmented views are forwarded
// with train-mode batch norm, L_test = L_var + L_rec is minimized for a few
// steps over the BN affine parameters only (differential learning rates per
// branch), and the final prediction is the view mean from an eval-mode pass.

namespace qpart::ttt {

using diff::Group;

struct AdaptConfig {
  int K = 8;
  int steps = 10;
  double lr_base = 1e-4;       // remaining BN params
  double lr_periodic = 1e-5;   // BN in the projection heads
  double lr_aperiodic = 1e-3;  // BN in the CDE vector field
  bool episodic = true;

  void validate() const;
};

// Ablation switches (Table-3-style rows); defaults are the full method.
struct AblationFlags {
  bool qpnet = true;  // false: bypass the decomposition
  bool lr = true;     // false: one base rate for every BN group
  bool vm = true;     // false: L_test = L_rec only
};

struct StepLosses {
  double l_var = 0, l_rec = 0, l_test = 0;
};

struct AdaptReport {
  std::vector<StepLosses> per_step;  // steps+1 entries; [0] = pre-adaptation
  double y_hat_source = 0;           // clean eval-mode prediction, no adaptation
  double y_hat_final = 0;            // mean over views after adaptation
  std::vector<double> y_views_final;
  bool divergent = false;
};

// Population variance (divide by K) of the K predictions; differentiable.
template <typename S>
diff::TensorT<S> variance_loss(const diff::TensorT<S>& preds) {
  if (diff::numel(preds.shape) < 2)
    throw std::invalid_argument("variance_loss: need at least 2 predictions");
  auto m = diff::mean(preds, {});
  auto d = diff::sub_bcast_scalar(preds, m);
  return diff::mean(diff::mul(d, d), {});
}

// The three trainable groups of BN affine params. Throws if a BN affine
// param is not tagged with one of them, or a non-BN param is.
std::map<Group, std::vector<diff::Param*>> collect_param_groups(qpnet::Model& m);

// Clean single-sample prediction (eval mode, no adaptation).
double predict_clean(qpnet::Model& m, const synth::VideoSample& sample, bool bypass_qpnet = false);

// Per-view predictions of a stack of pre-augmented views (eval mode).
std::vector<double> predict_views(qpnet::Model& m, const std::vector<float>& views_pixels,
                                  int n_views, bool bypass_qpnet = false);

AdaptReport adapt(qpnet::Model& m, const synth::VideoSample& sample, const AdaptConfig& cfg,
                  std::uint64_t seed, const qpnet::ModelState& checkpoint_state,
                  const AblationFlags& flags = {});

struct PredRow {
  std::string id;
  std::string cohort;
  double y_true = 0;
  double y_hat = 0;
  std::string mode;
  std::uint64_t seed = 0;
  int steps = 0;
  int K = 0;
  double lvar_first = 0;
  double lvar_last = 0;
  bool has_lvar = false;
};

enum class EvalMode { source_only, ttt };

// Per-sample evaluation over a cohort; episodic samples restore from the
// shared checkpoint state and are processed independently (parallel across
// workers, merged in dataset order).
std::vector<PredRow> evaluate_cohort(const qpnet::ModelConfig& cfg,
                                     const qpnet::ModelState& checkpoint_state,
                                     const std::vector<synth::VideoSample>& samples,
                                     const AdaptConfig& acfg, EvalMode mode, std::uint64_t seed,
                                     int workers = 1, const AblationFlags& flags = {});

void write_predictions_csv(const std::string& path, const std::vector<PredRow>& rows);
std::vector<PredRow> read_predictions_csv(const std::string& path);

}  // namespace qpart::ttt
