#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Monte Carlo verification of the variance -> regression-error bound:
// under unbiased, independent view predictions with variance sigma^2,
//   E[L_var] = sigma^2 (K-1)/K,   E[L_reg] = sigma^2 / K,
// hence E[L_reg] = E[L_var]/(K-1) <= 2 E[L_var]/K for K >= 2.

namespace qpart::analysis {

struct TheoremSimConfig {
  int K = 8;
  double sigma = 1.0;
  int trials = 100000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TheoremReport {
  int K = 0;
  double sigma = 0;
  int trials = 0;
  double e_lvar_est = 0, e_lvar_se = 0, e_lvar_analytic = 0;
  double e_lreg_est = 0, e_lreg_se = 0, e_lreg_analytic = 0;
  double bound_est = 0;       // 2 * e_lvar_est / K
  double bound_analytic = 0;  // 2 * sigma^2 (K-1) / K^2
  // chain statistic (K-1) L_reg - L_var, which has zero mean
  double chain_est = 0, chain_se = 0;
  bool lvar_within_3se = false;
  bool lreg_within_3se = false;
  bool bound_holds = false;
  bool chain_within_3se = false;
};

TheoremReport verify_theorem1(const TheoremSimConfig& cfg);
std::string theorem_report_to_json(const TheoremReport& r);

// Empirical (diagnostic) side: given per-sample per-view predictions from a
// fixed model, compare MSE of the view mean against 2*mean(L_var)/K and
// report the Assumption 1/2 residuals. Informational, not asserted.
struct EmpiricalTheoremReport {
  int n = 0, K = 0;
  double mse_view_mean = 0;  // E[(ybar - y)^2] estimate
  double mean_lvar = 0;
  double bound = 0;  // 2 * mean_lvar / K
  double ratio = 0;  // mse / bound (ratio <= 1 means the bound held)
  double bias_vs_truth = 0;      // |mean over samples,views of (yhat_k - y)|
  double bias_vs_clean = 0;      // |mean over samples of (mean_k yhat_k - yhat_clean)|
  double mean_abs_view_corr = 0; // mean |rho| over view pairs
  double max_abs_view_corr = 0;
  double rmse_clean = 0;
  bool vacuous = false;  // L_var ~ 0 while MSE > 0 (assumptions violated)
};

EmpiricalTheoremReport analyze_view_predictions(const std::vector<std::vector<double>>& view_preds,
                                                const std::vector<double>& clean_preds,
                                                const std::vector<double>& y_true);

std::string empirical_report_to_json(const EmpiricalTheoremReport& r);

}  // namespace qpart::analysis
