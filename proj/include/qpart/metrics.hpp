#pragma once

#include <string>
#include <vector>

namespace qpart::analysis {

double mae(const std::vector<double>& y_true, const std::vector<double>& y_hat);
double rmse(const std::vector<double>& y_true, const std::vector<double>& y_hat);
// fraction, not percent (Table-1 convention)
double mape(const std::vector<double>& y_true, const std::vector<double>& y_hat);

struct AurocEntry {
  double threshold = 0;
  double auroc = 0.5;
  bool evaluable = false;  // both classes present
  int n_pos = 0, n_neg = 0;
};

struct MaurocResult {
  std::vector<AurocEntry> per_threshold;
  double mauroc = 0;  // mean over evaluable thresholds
  int evaluated = 0;
};

// Binary screening at each EF threshold: y_true < thr is the positive
// (dysfunction) class, scored by -y_hat. Tie-aware Mann-Whitney AUROC.
// Degenerate thresholds are skipped and flagged; all degenerate -> error.
MaurocResult mauroc(const std::vector<double>& y_true, const std::vector<double>& y_hat,
                    const std::vector<double>& thresholds = {35, 40, 45, 50});

struct MetricsReport {
  double mae = 0, rmse = 0, mape = 0;
  MaurocResult roc;
  int n = 0;
  std::string cohort;
  std::string mode;
};

MetricsReport compute_metrics(const std::vector<double>& y_true,
                              const std::vector<double>& y_hat, const std::string& cohort = "",
                              const std::string& mode = "");

std::string metrics_to_json(const MetricsReport& r);

}  // namespace qpart::analysis
