#include "qpart/experiments.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "qpart/rng.hpp"

namespace qpart::analysis {

namespace {

MetricsReport metrics_of(const std::vector<ttt::PredRow>& rows, const std::string& mode) {
  std::vector<double> yt, yh;
  for (const auto& r : rows) {
    yt.push_back(r.y_true);
    yh.push_back(r.y_hat);
  }
  return compute_metrics(yt, yh, rows.empty() ? "" : rows.front().cohort, mode);
}

}  // namespace

std::vector<AblationRow> ablation_run(const qpnet::ModelConfig& cfg,
                                      const qpnet::ModelState& state,
                                      const std::vector<synth::VideoSample>& samples,
                                      const ttt::AdaptConfig& acfg,
                                      const std::vector<std::uint64_t>& seeds, int workers) {
  // Table-3 row pattern
  const std::vector<std::array<bool, 3>> grid = {{false, false, false}, {true, false, false},
                                                 {true, true, false},   {false, false, true},
                                                 {true, false, true},   {true, true, true}};
  std::vector<AblationRow> out;
  for (std::uint64_t seed : seeds) {
    for (const auto& flags3 : grid) {
      ttt::AblationFlags flags;
      flags.qpnet = flags3[0];
      flags.lr = flags3[1];
      flags.vm = flags3[2];
      auto rows = ttt::evaluate_cohort(cfg, state, samples, acfg, ttt::EvalMode::ttt, seed,
                                       workers, flags);
      AblationRow row;
      row.qpnet = flags.qpnet;
      row.lr = flags.lr;
      row.vm = flags.vm;
      row.seed = seed;
      row.metrics = metrics_of(rows, "ttt");
      out.push_back(std::move(row));
    }
  }
  return out;
}

void ablation_to_csv(const std::string& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "qpnet,lr,vm,seed,cohort,n,mae,mape,rmse,mauroc\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.qpnet << ',' << r.lr << ',' << r.vm << ',' << r.seed << ',' << r.metrics.cohort
        << ',' << r.metrics.n << ',' << r.metrics.mae << ',' << r.metrics.mape << ','
        << r.metrics.rmse << ',' << r.metrics.roc.mauroc << '\n';
}

double ablation_mean_mae(const std::vector<AblationRow>& rows, bool qpnet, bool lr, bool vm) {
  double acc = 0;
  int n = 0;
  for (const auto& r : rows)
    if (r.qpnet == qpnet && r.lr == lr && r.vm == vm) {
      acc += r.metrics.mae;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("ablation_mean_mae: no matching rows");
  return acc / n;
}

std::vector<KSweepRow> k_sweep(const qpnet::ModelConfig& cfg, const qpnet::ModelState& state,
                               const std::vector<synth::VideoSample>& samples,
                               const ttt::AdaptConfig& base_cfg, const std::vector<int>& Ks,
                               const std::vector<std::uint64_t>& seeds, int workers) {
  std::vector<KSweepRow> out;
  for (int K : Ks) {
    for (std::uint64_t seed : seeds) {
      ttt::AdaptConfig acfg = base_cfg;
      acfg.K = K;
      const auto t0 = std::chrono::steady_clock::now();
      auto rows =
          ttt::evaluate_cohort(cfg, state, samples, acfg, ttt::EvalMode::ttt, seed, workers);
      const auto t1 = std::chrono::steady_clock::now();
      MetricsReport m = metrics_of(rows, "ttt");
      KSweepRow row;
      row.K = K;
      row.cohort = m.cohort;
      row.seed = seed;
      row.mae = m.mae;
      row.rmse = m.rmse;
      row.mape = m.mape;
      row.seconds = std::chrono::duration<double>(t1 - t0).count();
      out.push_back(std::move(row));
    }
  }
  return out;
}

void ksweep_to_csv(const std::string& path, const std::vector<KSweepRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "K,cohort,seed,mae,mape,rmse,seconds\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.K << ',' << r.cohort << ',' << r.seed << ',' << r.mae << ',' << r.mape << ','
        << r.rmse << ',' << r.seconds << '\n';
}

double ksweep_mean_mae(const std::vector<KSweepRow>& rows, int K) {
  double acc = 0;
  int n = 0;
  for (const auto& r : rows)
    if (r.K == K) {
      acc += r.mae;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("ksweep_mean_mae: no rows for K");
  return acc / n;
}

EmpiricalTheoremReport verify_theorem1_empirical(const qpnet::ModelConfig& cfg,
                                                 const qpnet::ModelState& state,
                                                 const std::vector<synth::VideoSample>& samples,
                                                 int K, std::uint64_t seed, int workers,
                                                 int max_samples) {
  if (samples.empty()) throw std::invalid_argument("empirical theorem: no samples");
  const std::size_t n =
      max_samples > 0 ? std::min<std::size_t>(max_samples, samples.size()) : samples.size();

  std::vector<std::vector<double>> view_preds(n);
  std::vector<double> clean(n), y(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;

  auto worker_fn = [&]() {
    try {
      qpnet::Model model(cfg, 0);
      qpnet::load_state(model, state);
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        const auto& s = samples[i];
        const auto chains =
            aug::sample_chains(Rng::derive(seed, synth::fnv1a64(s.id.data(), s.id.size())), K);
        std::vector<float> views;
        views.reserve(chains.size() * s.pixels.size());
        for (const auto& chain : chains) {
          auto v = aug::apply_chain(chain, s.pixels, s.frames, s.frame_size, s.frame_size);
          views.insert(views.end(), v.begin(), v.end());
        }
        view_preds[i] = ttt::predict_views(model, views, K);
        clean[i] = ttt::predict_clean(model, s);
        y[i] = s.ef_true;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(error_mu);
      if (!error) error = std::current_exception();
    }
  };

  workers = std::max(1, workers);
  if (workers == 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return analyze_view_predictions(view_preds, clean, y);
}

}  // namespace qpart::analysis
