#include "qpart/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace qpart::analysis {

namespace {
void check_sizes(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || a.size() != b.size())
    throw std::invalid_argument("metrics: need equal-length nonempty vectors");
}
}  // namespace

double mae(const std::vector<double>& y_true, const std::vector<double>& y_hat) {
  check_sizes(y_true, y_hat);
  double acc = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) acc += std::abs(y_true[i] - y_hat[i]);
  return acc / y_true.size();
}

double rmse(const std::vector<double>& y_true, const std::vector<double>& y_hat) {
  check_sizes(y_true, y_hat);
  double acc = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_hat[i];
    acc += d * d;
  }
  return std::sqrt(acc / y_true.size());
}

double mape(const std::vector<double>& y_true, const std::vector<double>& y_hat) {
  check_sizes(y_true, y_hat);
  double acc = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == 0) throw std::invalid_argument("mape: zero ground-truth value");
    acc += std::abs((y_true[i] - y_hat[i]) / y_true[i]);
  }
  return acc / y_true.size();
}

MaurocResult mauroc(const std::vector<double>& y_true, const std::vector<double>& y_hat,
                    const std::vector<double>& thresholds) {
  check_sizes(y_true, y_hat);
  MaurocResult res;
  double sum = 0;
  for (double thr : thresholds) {
    AurocEntry e;
    e.threshold = thr;
    std::vector<double> scores;  // higher = more positive
    std::vector<int> labels;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      labels.push_back(y_true[i] < thr ? 1 : 0);
      scores.push_back(-y_hat[i]);
    }
    e.n_pos = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
    e.n_neg = static_cast<int>(labels.size()) - e.n_pos;
    if (e.n_pos > 0 && e.n_neg > 0) {
      // average ranks with tie handling
      std::vector<std::size_t> idx(scores.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(),
                [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
      std::vector<double> rank(scores.size());
      std::size_t i = 0;
      while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
        i = j + 1;
      }
      double rank_sum_pos = 0;
      for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k]) rank_sum_pos += rank[k];
      e.auroc = (rank_sum_pos - e.n_pos * (e.n_pos + 1.0) / 2.0) /
                (static_cast<double>(e.n_pos) * e.n_neg);
      e.evaluable = true;
      sum += e.auroc;
      ++res.evaluated;
    }
    res.per_threshold.push_back(e);
  }
  if (res.evaluated == 0)
    throw std::invalid_argument("mauroc: every threshold is degenerate (one class only)");
  res.mauroc = sum / res.evaluated;
  return res;
}

MetricsReport compute_metrics(const std::vector<double>& y_true,
                              const std::vector<double>& y_hat, const std::string& cohort,
                              const std::string& mode) {
  MetricsReport r;
  r.mae = mae(y_true, y_hat);
  r.rmse = rmse(y_true, y_hat);
  r.mape = mape(y_true, y_hat);
  r.roc = mauroc(y_true, y_hat);
  r.n = static_cast<int>(y_true.size());
  r.cohort = cohort;
  r.mode = mode;
  return r;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  if (!r.cohort.empty()) j["cohort"] = r.cohort;
  if (!r.mode.empty()) j["mode"] = r.mode;
  j["mae"] = r.mae;
  j["rmse"] = r.rmse;
  j["mape"] = r.mape;
  j["mauroc"] = r.roc.mauroc;
  j["auroc"] = nlohmann::ordered_json::array();
  for (const auto& e : r.roc.per_threshold)
    j["auroc"].push_back({{"threshold", e.threshold},
                          {"auroc", e.evaluable ? e.auroc : 0.0},
                          {"evaluable", e.evaluable},
                          {"n_pos", e.n_pos},
                          {"n_neg", e.n_neg}});
  return j.dump(2);
}

}  // namespace qpart::analysis
