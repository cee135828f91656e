#include "qpart/ttt.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "qpart/optim.hpp"
#include "qpart/rng.hpp"

namespace qpart::ttt {

void AdaptConfig::validate() const {
  if (K < 2) throw std::invalid_argument("adapt: K must be >= 2");
  if (steps < 0) throw std::invalid_argument("adapt: steps must be >= 0");
  if (lr_base < 0 || lr_periodic < 0 || lr_aperiodic < 0)
    throw std::invalid_argument("adapt: learning rates must be >= 0");
}

std::map<Group, std::vector<diff::Param*>> collect_param_groups(qpnet::Model& m) {
  std::map<Group, std::vector<diff::Param*>> groups{{Group::periodic_bn, {}},
                                                    {Group::aperiodic_bn, {}},
                                                    {Group::base_bn, {}}};
  for (diff::Param* p : m.params()) {
    const bool is_bn_affine = p->name.size() > 6 && (p->name.find(".gamma") != std::string::npos ||
                                                     p->name.find(".beta") != std::string::npos);
    if (is_bn_affine) {
      if (p->group == Group::backbone)
        throw std::runtime_error("collect_param_groups: BN param '" + p->name +
                                 "' lacks a group tag");
      groups[p->group].push_back(p);
    } else if (p->group != Group::backbone) {
      throw std::runtime_error("collect_param_groups: non-BN param '" + p->name +
                               "' carries BN group");
    }
  }
  return groups;
}

namespace {

diff::Tensor views_leaf(diff::Graph& g, const qpnet::ModelConfig& cfg,
                        const std::vector<float>& pixels, int n) {
  return g.leaf({n * cfg.frames, 1, cfg.frame_size, cfg.frame_size},
                std::vector<float>(pixels));
}

std::vector<float> build_views(const synth::VideoSample& sample,
                               const std::vector<aug::AugChain>& chains) {
  std::vector<float> out;
  out.reserve(chains.size() * sample.pixels.size());
  for (const auto& chain : chains) {
    auto v = aug::apply_chain(chain, sample.pixels, sample.frames, sample.frame_size,
                              sample.frame_size);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::map<Group, double> lr_map(const AdaptConfig& cfg, const AblationFlags& flags) {
  const double base = cfg.lr_base;
  return {{Group::periodic_bn, flags.lr ? cfg.lr_periodic : base},
          {Group::aperiodic_bn, flags.lr ? cfg.lr_aperiodic : base},
          {Group::base_bn, base},
          {Group::backbone, 0.0}};
}

}  // namespace

double predict_clean(qpnet::Model& m, const synth::VideoSample& sample, bool bypass_qpnet) {
  diff::Graph g;
  auto x = views_leaf(g, m.cfg, sample.pixels, 1);
  auto out = m.forward_full(g, x, {}, false, bypass_qpnet);
  return out.y_hat.scalar();
}

std::vector<double> predict_views(qpnet::Model& m, const std::vector<float>& views_pixels,
                                  int n_views, bool bypass_qpnet) {
  diff::Graph g;
  auto x = views_leaf(g, m.cfg, views_pixels, n_views);
  auto out = m.forward_full(g, x, {}, false, bypass_qpnet);
  std::vector<double> preds(n_views);
  for (int k = 0; k < n_views; ++k) preds[k] = static_cast<double>((*out.y_hat.data)[k]);
  return preds;
}

AdaptReport adapt(qpnet::Model& m, const synth::VideoSample& sample, const AdaptConfig& cfg,
                  std::uint64_t seed, const qpnet::ModelState& checkpoint_state,
                  const AblationFlags& flags) {
  cfg.validate();
  if (cfg.episodic) qpnet::load_state(m, checkpoint_state);

  AdaptReport report;
  report.y_hat_source = predict_clean(m, sample, !flags.qpnet);

  const auto chains = aug::sample_chains(seed, cfg.K);
  const std::vector<float> views = build_views(sample, chains);
  const auto lrs = lr_map(cfg, flags);
  auto params = m.params();

  // a non-finite forward (the CDE solver throws on divergence) or a
  // non-finite loss both end the episode: flag, restore, bail out
  try {
    for (int step = 0; step < cfg.steps; ++step) {
      diff::Graph g;
      auto x = views_leaf(g, m.cfg, views, cfg.K);
      auto out = m.forward_full(g, x, {}, true, !flags.qpnet);
      auto lvar = variance_loss(out.y_hat);
      auto ltest = flags.vm ? diff::add(lvar, out.loss_rec) : out.loss_rec;
      StepLosses losses{lvar.scalar(), out.loss_rec.scalar(), ltest.scalar()};
      if (!std::isfinite(losses.l_test)) throw std::runtime_error("non-finite test loss");
      report.per_step.push_back(losses);
      diff::zero_grads(params);
      g.backward(ltest);
      diff::sgd_step(params, lrs, 0.0, 0.0);
    }

    // final eval-mode pass over the views; the prediction is their mean
    diff::Graph g;
    auto x = views_leaf(g, m.cfg, views, cfg.K);
    auto out = m.forward_full(g, x, {}, false, !flags.qpnet);
    auto lvar = variance_loss(out.y_hat);
    auto ltest = flags.vm ? diff::add(lvar, out.loss_rec) : out.loss_rec;
    StepLosses losses{lvar.scalar(), out.loss_rec.scalar(), ltest.scalar()};
    if (!std::isfinite(losses.l_test)) throw std::runtime_error("non-finite test loss");
    report.per_step.push_back(losses);
    report.y_views_final.resize(cfg.K);
    double acc = 0;
    for (int k = 0; k < cfg.K; ++k) {
      report.y_views_final[k] = static_cast<double>((*out.y_hat.data)[k]);
      acc += report.y_views_final[k];
    }
    report.y_hat_final = acc / cfg.K;
  } catch (const std::runtime_error&) {
    report.divergent = true;
    qpnet::load_state(m, checkpoint_state);
  }
  return report;
}

std::vector<PredRow> evaluate_cohort(const qpnet::ModelConfig& cfg,
                                     const qpnet::ModelState& checkpoint_state,
                                     const std::vector<synth::VideoSample>& samples,
                                     const AdaptConfig& acfg, EvalMode mode, std::uint64_t seed,
                                     int workers, const AblationFlags& flags) {
  acfg.validate();
  if (samples.empty()) throw std::invalid_argument("evaluate_cohort: no samples");
  workers = std::max(1, workers);

  std::vector<PredRow> rows(samples.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;

  auto worker_fn = [&]() {
    try {
      qpnet::Model model(cfg, 0);
      qpnet::load_state(model, checkpoint_state);
      for (std::size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) {
        const auto& s = samples[i];
        PredRow row;
        row.id = s.id;
        row.cohort = s.cohort;
        row.y_true = s.ef_true;
        row.seed = seed;
        row.K = acfg.K;
        if (mode == EvalMode::source_only) {
          row.mode = "source_only";
          row.steps = 0;
          qpnet::load_state(model, checkpoint_state);
          row.y_hat = predict_clean(model, s, !flags.qpnet);
        } else {
          row.mode = "ttt";
          row.steps = acfg.steps;
          const std::uint64_t sample_seed =
              Rng::derive(seed, synth::fnv1a64(s.id.data(), s.id.size()));
          AdaptReport rep = adapt(model, s, acfg, sample_seed, checkpoint_state, flags);
          row.y_hat = rep.divergent ? rep.y_hat_source : rep.y_hat_final;
          if (!rep.per_step.empty()) {
            row.lvar_first = rep.per_step.front().l_var;
            row.lvar_last = rep.per_step.back().l_var;
            row.has_lvar = true;
          }
        }
        rows[i] = std::move(row);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(error_mu);
      if (!error) error = std::current_exception();
    }
  };

  if (workers == 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return rows;
}

void write_predictions_csv(const std::string& path, const std::vector<PredRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "id,cohort,y_true,y_hat,mode,seed,steps,K,lvar_first,lvar_last\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.id << ',' << r.cohort << ',' << r.y_true << ',' << r.y_hat << ',' << r.mode << ','
        << r.seed << ',' << r.steps << ',' << r.K << ',';
    if (r.has_lvar) out << r.lvar_first;
    out << ',';
    if (r.has_lvar) out << r.lvar_last;
    out << '\n';
  }
}

std::vector<PredRow> read_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty predictions file " + path);
  std::vector<PredRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    PredRow r;
    std::getline(ss, r.id, ',');
    std::getline(ss, r.cohort, ',');
    std::getline(ss, field, ',');
    r.y_true = std::stod(field);
    std::getline(ss, field, ',');
    r.y_hat = std::stod(field);
    std::getline(ss, r.mode, ',');
    std::getline(ss, field, ',');
    r.seed = std::stoull(field);
    std::getline(ss, field, ',');
    r.steps = std::stoi(field);
    std::getline(ss, field, ',');
    r.K = std::stoi(field);
    std::getline(ss, field, ',');
    if (!field.empty()) {
      r.lvar_first = std::stod(field);
      r.has_lvar = true;
    }
    std::getline(ss, field, ',');
    if (!field.empty()) r.lvar_last = std::stod(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace qpart::ttt
