#include "qpart/theorem.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "qpart/rng.hpp"

namespace qpart::analysis {

void TheoremSimConfig::validate() const {
  if (K < 2) throw std::invalid_argument("theorem sim: K must be >= 2");
  if (sigma < 0) throw std::invalid_argument("theorem sim: sigma must be >= 0");
  if (trials < 1000) throw std::invalid_argument("theorem sim: need at least 1000 trials");
}

TheoremReport verify_theorem1(const TheoremSimConfig& cfg) {
  cfg.validate();
  Rng rng(Rng::derive(cfg.seed, 0x7e0));
  const double y = 50.0;

  double sum_lvar = 0, sum_lvar2 = 0;
  double sum_lreg = 0, sum_lreg2 = 0;
  double sum_chain = 0, sum_chain2 = 0;
  std::vector<double> preds(cfg.K);
  for (int t = 0; t < cfg.trials; ++t) {
    double mean = 0;
    for (int k = 0; k < cfg.K; ++k) {
      preds[k] = y + cfg.sigma * rng.normal();
      mean += preds[k];
    }
    mean /= cfg.K;
    double lvar = 0;
    for (int k = 0; k < cfg.K; ++k) {
      const double d = preds[k] - mean;
      lvar += d * d;
    }
    lvar /= cfg.K;
    const double lreg = (mean - y) * (mean - y);
    const double chain = (cfg.K - 1) * lreg - lvar;
    sum_lvar += lvar;
    sum_lvar2 += lvar * lvar;
    sum_lreg += lreg;
    sum_lreg2 += lreg * lreg;
    sum_chain += chain;
    sum_chain2 += chain * chain;
  }

  const double n = cfg.trials;
  auto se = [&](double sum, double sum2) {
    const double m = sum / n;
    const double var = std::max(0.0, sum2 / n - m * m);
    return std::sqrt(var / n);
  };

  TheoremReport r;
  r.K = cfg.K;
  r.sigma = cfg.sigma;
  r.trials = cfg.trials;
  r.e_lvar_est = sum_lvar / n;
  r.e_lvar_se = se(sum_lvar, sum_lvar2);
  r.e_lvar_analytic = cfg.sigma * cfg.sigma * (cfg.K - 1.0) / cfg.K;
  r.e_lreg_est = sum_lreg / n;
  r.e_lreg_se = se(sum_lreg, sum_lreg2);
  r.e_lreg_analytic = cfg.sigma * cfg.sigma / cfg.K;
  r.bound_est = 2.0 * r.e_lvar_est / cfg.K;
  r.bound_analytic = 2.0 * cfg.sigma * cfg.sigma * (cfg.K - 1.0) / (cfg.K * cfg.K);
  r.chain_est = sum_chain / n;
  r.chain_se = se(sum_chain, sum_chain2);
  r.lvar_within_3se = std::abs(r.e_lvar_est - r.e_lvar_analytic) <= 3.0 * r.e_lvar_se;
  r.lreg_within_3se = std::abs(r.e_lreg_est - r.e_lreg_analytic) <= 3.0 * r.e_lreg_se;
  r.bound_holds = r.e_lreg_est <= r.bound_est;
  r.chain_within_3se = std::abs(r.chain_est) <= 3.0 * r.chain_se;
  if (cfg.sigma == 0.0) {
    // all quantities are exactly zero; the 3-SE gates degenerate to equality
    r.lvar_within_3se = r.e_lvar_est == 0.0;
    r.lreg_within_3se = r.e_lreg_est == 0.0;
    r.bound_holds = true;
    r.chain_within_3se = r.chain_est == 0.0;
  }
  return r;
}

std::string theorem_report_to_json(const TheoremReport& r) {
  nlohmann::ordered_json j;
  j["K"] = r.K;
  j["sigma"] = r.sigma;
  j["trials"] = r.trials;
  j["e_lvar"] = {{"estimate", r.e_lvar_est}, {"se", r.e_lvar_se}, {"analytic", r.e_lvar_analytic}};
  j["e_lreg"] = {{"estimate", r.e_lreg_est}, {"se", r.e_lreg_se}, {"analytic", r.e_lreg_analytic}};
  j["bound"] = {{"estimate", r.bound_est}, {"analytic", r.bound_analytic}};
  j["chain"] = {{"estimate", r.chain_est}, {"se", r.chain_se}};
  j["lvar_within_3se"] = r.lvar_within_3se;
  j["lreg_within_3se"] = r.lreg_within_3se;
  j["bound_holds"] = r.bound_holds;
  j["chain_within_3se"] = r.chain_within_3se;
  return j.dump(2);
}

EmpiricalTheoremReport analyze_view_predictions(
    const std::vector<std::vector<double>>& view_preds, const std::vector<double>& clean_preds,
    const std::vector<double>& y_true) {
  const std::size_t n = view_preds.size();
  if (n == 0 || clean_preds.size() != n || y_true.size() != n)
    throw std::invalid_argument("analyze_view_predictions: inconsistent inputs");
  const int K = static_cast<int>(view_preds.front().size());
  if (K < 2) throw std::invalid_argument("analyze_view_predictions: K must be >= 2");

  EmpiricalTheoremReport r;
  r.n = static_cast<int>(n);
  r.K = K;

  double mse = 0, lvar_sum = 0, bias_truth = 0, bias_clean = 0, rmse_clean = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(view_preds[i].size()) != K)
      throw std::invalid_argument("analyze_view_predictions: ragged prediction matrix");
    double mean = 0;
    for (double v : view_preds[i]) mean += v;
    mean /= K;
    double lvar = 0;
    for (double v : view_preds[i]) lvar += (v - mean) * (v - mean);
    lvar /= K;
    mse += (mean - y_true[i]) * (mean - y_true[i]);
    lvar_sum += lvar;
    bias_truth += mean - y_true[i];
    bias_clean += mean - clean_preds[i];
    rmse_clean += (clean_preds[i] - y_true[i]) * (clean_preds[i] - y_true[i]);
  }
  r.mse_view_mean = mse / n;
  r.mean_lvar = lvar_sum / n;
  r.bound = 2.0 * r.mean_lvar / K;
  r.ratio = r.bound > 0 ? r.mse_view_mean / r.bound : INFINITY;
  r.bias_vs_truth = std::abs(bias_truth / n);
  r.bias_vs_clean = std::abs(bias_clean / n);
  r.rmse_clean = std::sqrt(rmse_clean / n);
  r.vacuous = r.mean_lvar < 1e-12 && r.mse_view_mean > 1e-12;

  // Inter-view correlation of the augmentation-induced deviations. The
  // shared per-sample signal is removed by subtracting the clean prediction
  // (subtracting the row mean instead would bake in a -1/(K-1) artifact).
  std::vector<std::vector<double>> resid(n, std::vector<double>(K));
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k) resid[i][k] = view_preds[i][k] - clean_preds[i];
  std::vector<double> rm(K, 0.0), rv(K, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k) rm[k] += resid[i][k];
  for (int k = 0; k < K; ++k) rm[k] /= n;
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k) {
      const double d = resid[i][k] - rm[k];
      rv[k] += d * d;
    }
  double acc_abs = 0, max_abs = 0;
  int pairs = 0;
  for (int k = 0; k < K; ++k)
    for (int j = k + 1; j < K; ++j) {
      double cov = 0;
      for (std::size_t i = 0; i < n; ++i) cov += (resid[i][k] - rm[k]) * (resid[i][j] - rm[j]);
      const double denom = std::sqrt(rv[k] * rv[j]);
      const double rho = denom > 0 ? cov / denom : 0.0;
      acc_abs += std::abs(rho);
      max_abs = std::max(max_abs, std::abs(rho));
      ++pairs;
    }
  r.mean_abs_view_corr = pairs ? acc_abs / pairs : 0.0;
  r.max_abs_view_corr = max_abs;
  return r;
}

std::string empirical_report_to_json(const EmpiricalTheoremReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["K"] = r.K;
  j["mse_view_mean"] = r.mse_view_mean;
  j["mean_lvar"] = r.mean_lvar;
  j["bound"] = r.bound;
  j["ratio"] = r.ratio;
  j["bias_vs_truth"] = r.bias_vs_truth;
  j["bias_vs_clean"] = r.bias_vs_clean;
  j["mean_abs_view_corr"] = r.mean_abs_view_corr;
  j["max_abs_view_corr"] = r.max_abs_view_corr;
  j["rmse_clean"] = r.rmse_clean;
  j["vacuous"] = r.vacuous;
  return j.dump(2);
}

}  // namespace qpart::analysis
