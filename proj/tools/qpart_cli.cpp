// Command-line entry point: data generation, training, evaluation with and
// without test-time training, theorem verification, the ablation grid, the
// K sweep, and metric reports. All randomness flows from --seed; every run
// writes a resolved-config snapshot next to its outputs.
//
// Exit codes: 0 success, 1 usage error, 2 runtime/numerics error.
// QPART_OUT_DIR, when set, re-roots relative output paths.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qpart/checkpoint.hpp"
#include "qpart/experiments.hpp"
#include "qpart/metrics.hpp"
#include "qpart/synthdata.hpp"
#include "qpart/theorem.hpp"
#include "qpart/train.hpp"
#include "qpart/ttt.hpp"

namespace {

using nlohmann::ordered_json;

std::string resolve_out(const std::string& path) {
  if (path.empty()) return path;
  const char* root = std::getenv("QPART_OUT_DIR");
  if (!root || *root == '\0') return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(root) / p).string();
}

void write_text(const std::string& path, const std::string& text) {
  const auto dir = std::filesystem::path(path).parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
}

void write_snapshot(const std::string& next_to, const ordered_json& resolved) {
  write_text(next_to + ".config.json", resolved.dump(2));
}

std::string data_manifest(const std::string& data_dir) { return data_dir + "/manifest.json"; }

qpart::ttt::AdaptConfig adapt_config(int k, int steps, double lr_base, double lr_periodic,
                                     double lr_aperiodic) {
  qpart::ttt::AdaptConfig cfg;
  cfg.K = k;
  cfg.steps = steps;
  cfg.lr_base = lr_base;
  cfg.lr_periodic = lr_periodic;
  cfg.lr_aperiodic = lr_aperiodic;
  return cfg;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, int n) {
  std::vector<std::uint64_t> seeds(n);
  for (int i = 0; i < n; ++i) seeds[i] = base + i;
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-periodic test-time training workbench"};
  app.require_subcommand(1);

  // ---- gen-data
  auto* gen = app.add_subcommand("gen-data", "render the synthetic cohorts");
  std::string gen_spec, gen_out;
  std::uint64_t gen_seed = 0;
  gen->add_option("--spec", gen_spec, "cohort spec JSON ({\"cohorts\": [...]}); default cohorts when omitted");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "dataset seed");

  // ---- train
  auto* tr = app.add_subcommand("train", "train the source model");
  std::string tr_data, tr_out, tr_cohort = "source_train";
  int tr_epochs = 30, tr_batch = 4, tr_warmup = 10, tr_latent_channels = 8;
  double tr_lr = 5e-4;
  std::uint64_t tr_seed = 0;
  bool tr_verbose = false;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--out", tr_out, "checkpoint prefix (writes .json + .bin)")->required();
  tr->add_option("--seed", tr_seed, "training seed");
  tr->add_option("--cohort", tr_cohort, "training cohort name");
  tr->add_option("--batch", tr_batch, "batch size");
  tr->add_option("--lr", tr_lr, "base learning rate");
  tr->add_option("--warmup", tr_warmup, "warmup epochs");
  tr->add_option("--latent-channels", tr_latent_channels, "latent channels c");
  tr->add_flag("--verbose", tr_verbose, "per-epoch loss to stderr");

  // ---- eval
  auto* ev = app.add_subcommand("eval", "evaluate a cohort (source_only or ttt)");
  std::string ev_ckpt, ev_data, ev_cohort, ev_mode = "source_only", ev_out;
  int ev_k = 8, ev_steps = 10, ev_workers = 1;
  double ev_lr_base = 1e-4, ev_lr_periodic = 1e-5, ev_lr_aperiodic = 1e-3;
  std::uint64_t ev_seed = 0;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint prefix")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--cohort", ev_cohort, "cohort name")->required();
  ev->add_option("--mode", ev_mode, "source_only | ttt")
      ->check(CLI::IsMember({"source_only", "ttt"}));
  ev->add_option("--k", ev_k, "augmented views per sample");
  ev->add_option("--steps", ev_steps, "adaptation steps");
  ev->add_option("--out", ev_out, "predictions CSV")->required();
  ev->add_option("--seed", ev_seed, "evaluation seed");
  ev->add_option("--workers", ev_workers, "parallel workers");
  ev->add_option("--lr-base", ev_lr_base, "BN base learning rate");
  ev->add_option("--lr-periodic", ev_lr_periodic, "periodic-BN learning rate");
  ev->add_option("--lr-aperiodic", ev_lr_aperiodic, "aperiodic-BN learning rate");

  // ---- verify-theorem
  auto* vt = app.add_subcommand("verify-theorem", "Monte Carlo check of the variance bound");
  int vt_k = 8, vt_trials = 100000, vt_workers = 1, vt_max_samples = 0;
  double vt_sigma = 1.0;
  std::uint64_t vt_seed = 0;
  bool vt_empirical = false;
  std::string vt_out, vt_ckpt, vt_data, vt_cohort = "source_val";
  vt->add_option("--k", vt_k, "number of augmented views K");
  vt->add_option("--sigma", vt_sigma, "view-prediction noise sigma");
  vt->add_option("--trials", vt_trials, "Monte Carlo trials");
  vt->add_option("--seed", vt_seed, "simulation seed");
  vt->add_option("--out", vt_out, "report JSON (stdout when omitted)");
  vt->add_flag("--empirical", vt_empirical, "run the model-based diagnostic instead");
  vt->add_option("--ckpt", vt_ckpt, "checkpoint prefix (empirical)");
  vt->add_option("--data", vt_data, "dataset directory (empirical)");
  vt->add_option("--cohort", vt_cohort, "cohort (empirical)");
  vt->add_option("--max-samples", vt_max_samples, "cap samples (empirical)");
  vt->add_option("--workers", vt_workers, "parallel workers (empirical)");

  // ---- ablate
  auto* ab = app.add_subcommand("ablate", "six-row ablation grid over {QP-Net, LR, VM}");
  std::string ab_ckpt, ab_data, ab_cohort, ab_out;
  int ab_seeds = 3, ab_k = 8, ab_steps = 10, ab_workers = 1;
  std::uint64_t ab_seed = 0;
  ab->add_option("--ckpt", ab_ckpt, "checkpoint prefix")->required();
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--cohort", ab_cohort, "cohort name")->required();
  ab->add_option("--seeds", ab_seeds, "number of seeds (base .. base+n-1)");
  ab->add_option("--seed", ab_seed, "base seed");
  ab->add_option("--k", ab_k, "augmented views per sample");
  ab->add_option("--steps", ab_steps, "adaptation steps");
  ab->add_option("--out", ab_out, "results CSV")->required();
  ab->add_option("--workers", ab_workers, "parallel workers");

  // ---- sweep-k
  auto* sk = app.add_subcommand("sweep-k", "MAE/MAPE/RMSE per K");
  std::string sk_ckpt, sk_data, sk_cohort, sk_out, sk_ks = "2,4,8,16";
  int sk_seeds = 3, sk_steps = 10, sk_workers = 1;
  std::uint64_t sk_seed = 0;
  sk->add_option("--ckpt", sk_ckpt, "checkpoint prefix")->required();
  sk->add_option("--data", sk_data, "dataset directory")->required();
  sk->add_option("--cohort", sk_cohort, "cohort name")->required();
  sk->add_option("--ks", sk_ks, "comma-separated K values");
  sk->add_option("--seeds", sk_seeds, "number of seeds");
  sk->add_option("--seed", sk_seed, "base seed");
  sk->add_option("--steps", sk_steps, "adaptation steps");
  sk->add_option("--out", sk_out, "results CSV")->required();
  sk->add_option("--workers", sk_workers, "parallel workers");

  // ---- report
  auto* rp = app.add_subcommand("report", "metrics + mAUROC from a predictions CSV");
  std::string rp_pred, rp_out;
  rp->add_option("--pred", rp_pred, "predictions CSV")->required();
  rp->add_option("--out", rp_out, "metrics JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      gen_out = resolve_out(gen_out);
      std::vector<qpart::synth::CohortSpec> specs;
      if (gen_spec.empty()) {
        specs = qpart::synth::default_cohort_specs();
      } else {
        std::ifstream in(gen_spec);
        if (!in) throw std::runtime_error("cannot open spec " + gen_spec);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        specs = qpart::synth::cohort_specs_from_json_text(text);
      }
      qpart::synth::generate_cohorts(specs, gen_seed, gen_out);
      ordered_json snap{{"command", "gen-data"},
                        {"seed", gen_seed},
                        {"spec_file", gen_spec.empty() ? "<default>" : gen_spec},
                        {"cohorts", nlohmann::json::parse(
                                        qpart::synth::cohort_specs_to_json_text(specs))["cohorts"]}};
      write_text(gen_out + "/run_config.json", snap.dump(2));
      std::cout << "wrote " << gen_out << "/manifest.json\n";
    } else if (*tr) {
      tr_out = resolve_out(tr_out);
      qpart::synth::DatasetReader reader(data_manifest(tr_data));
      auto samples = reader.read_cohort(tr_cohort);
      qpart::qpnet::ModelConfig mcfg;
      mcfg.frames = reader.manifest().frames;
      mcfg.frame_size = reader.manifest().frame_size;
      mcfg.latent_size = mcfg.frame_size / 4;
      mcfg.latent_channels = tr_latent_channels;
      qpart::qpnet::Model model(mcfg, tr_seed);
      qpart::qpnet::TrainConfig tc;
      tc.epochs = tr_epochs;
      tc.batch_size = tr_batch;
      tc.base_lr = tr_lr;
      tc.warmup_epochs = tr_warmup;
      tc.seed = tr_seed;
      tc.verbose = tr_verbose;
      auto stats = qpart::qpnet::train_model(model, samples, tc);
      const auto dir = std::filesystem::path(
          qpart::qpnet::checkpoint_manifest_path(tr_out)).parent_path();
      if (!dir.empty()) std::filesystem::create_directories(dir);
      qpart::qpnet::save_checkpoint(model, tr_out);
      ordered_json snap{{"command", "train"},   {"data", tr_data},       {"cohort", tr_cohort},
                        {"epochs", tr_epochs},  {"batch", tr_batch},     {"lr", tr_lr},
                        {"warmup", tr_warmup},  {"seed", tr_seed},
                        {"latent_channels", tr_latent_channels}};
      if (!stats.epoch_loss.empty()) snap["final_epoch_loss"] = stats.epoch_loss.back();
      write_snapshot(qpart::qpnet::checkpoint_manifest_path(tr_out), snap);
      std::cout << "wrote " << qpart::qpnet::checkpoint_manifest_path(tr_out) << "\n";
    } else if (*ev) {
      ev_out = resolve_out(ev_out);
      auto model = qpart::qpnet::load_checkpoint(ev_ckpt);
      auto state = qpart::qpnet::dump_state(model);
      qpart::synth::DatasetReader reader(data_manifest(ev_data));
      auto samples = reader.read_cohort(ev_cohort);
      auto acfg = adapt_config(ev_k, ev_steps, ev_lr_base, ev_lr_periodic, ev_lr_aperiodic);
      const auto mode = ev_mode == "ttt" ? qpart::ttt::EvalMode::ttt
                                         : qpart::ttt::EvalMode::source_only;
      auto rows = qpart::ttt::evaluate_cohort(model.cfg, state, samples, acfg, mode, ev_seed,
                                              ev_workers);
      const auto dir = std::filesystem::path(ev_out).parent_path();
      if (!dir.empty()) std::filesystem::create_directories(dir);
      qpart::ttt::write_predictions_csv(ev_out, rows);
      ordered_json snap{{"command", "eval"}, {"ckpt", ev_ckpt},   {"data", ev_data},
                        {"cohort", ev_cohort}, {"mode", ev_mode}, {"k", ev_k},
                        {"steps", ev_steps}, {"seed", ev_seed},   {"workers", ev_workers},
                        {"lr_base", ev_lr_base}, {"lr_periodic", ev_lr_periodic},
                        {"lr_aperiodic", ev_lr_aperiodic}};
      write_snapshot(ev_out, snap);
      std::cout << "wrote " << ev_out << "\n";
    } else if (*vt) {
      if (!vt_out.empty()) vt_out = resolve_out(vt_out);
      std::string text;
      ordered_json snap{{"command", "verify-theorem"}, {"k", vt_k}, {"seed", vt_seed}};
      if (vt_empirical) {
        if (vt_ckpt.empty() || vt_data.empty())
          throw std::invalid_argument("--empirical needs --ckpt and --data");
        auto model = qpart::qpnet::load_checkpoint(vt_ckpt);
        auto state = qpart::qpnet::dump_state(model);
        qpart::synth::DatasetReader reader(data_manifest(vt_data));
        auto samples = reader.read_cohort(vt_cohort);
        auto rep = qpart::analysis::verify_theorem1_empirical(model.cfg, state, samples, vt_k,
                                                              vt_seed, vt_workers,
                                                              vt_max_samples);
        text = qpart::analysis::empirical_report_to_json(rep);
        snap["empirical"] = true;
        snap["ckpt"] = vt_ckpt;
        snap["data"] = vt_data;
        snap["cohort"] = vt_cohort;
      } else {
        qpart::analysis::TheoremSimConfig cfg;
        cfg.K = vt_k;
        cfg.sigma = vt_sigma;
        cfg.trials = vt_trials;
        cfg.seed = vt_seed;
        text = qpart::analysis::theorem_report_to_json(qpart::analysis::verify_theorem1(cfg));
        snap["sigma"] = vt_sigma;
        snap["trials"] = vt_trials;
      }
      if (vt_out.empty()) {
        std::cout << text << "\n";
      } else {
        write_text(vt_out, text);
        write_snapshot(vt_out, snap);
        std::cout << "wrote " << vt_out << "\n";
      }
    } else if (*ab) {
      ab_out = resolve_out(ab_out);
      auto model = qpart::qpnet::load_checkpoint(ab_ckpt);
      auto state = qpart::qpnet::dump_state(model);
      qpart::synth::DatasetReader reader(data_manifest(ab_data));
      auto samples = reader.read_cohort(ab_cohort);
      auto acfg = adapt_config(ab_k, ab_steps, 1e-4, 1e-5, 1e-3);
      auto rows = qpart::analysis::ablation_run(model.cfg, state, samples, acfg,
                                                seed_list(ab_seed, ab_seeds), ab_workers);
      const auto dir = std::filesystem::path(ab_out).parent_path();
      if (!dir.empty()) std::filesystem::create_directories(dir);
      qpart::analysis::ablation_to_csv(ab_out, rows);
      write_snapshot(ab_out, ordered_json{{"command", "ablate"},
                                          {"ckpt", ab_ckpt},
                                          {"data", ab_data},
                                          {"cohort", ab_cohort},
                                          {"seeds", ab_seeds},
                                          {"seed", ab_seed},
                                          {"k", ab_k},
                                          {"steps", ab_steps}});
      std::cout << "wrote " << ab_out << "\n";
    } else if (*sk) {
      sk_out = resolve_out(sk_out);
      auto model = qpart::qpnet::load_checkpoint(sk_ckpt);
      auto state = qpart::qpnet::dump_state(model);
      qpart::synth::DatasetReader reader(data_manifest(sk_data));
      auto samples = reader.read_cohort(sk_cohort);
      std::vector<int> Ks;
      {
        std::stringstream ss(sk_ks);
        std::string tok;
        while (std::getline(ss, tok, ',')) Ks.push_back(std::stoi(tok));
      }
      auto acfg = adapt_config(8, sk_steps, 1e-4, 1e-5, 1e-3);
      auto rows = qpart::analysis::k_sweep(model.cfg, state, samples, acfg, Ks,
                                           seed_list(sk_seed, sk_seeds), sk_workers);
      const auto dir = std::filesystem::path(sk_out).parent_path();
      if (!dir.empty()) std::filesystem::create_directories(dir);
      qpart::analysis::ksweep_to_csv(sk_out, rows);
      write_snapshot(sk_out, ordered_json{{"command", "sweep-k"},
                                          {"ckpt", sk_ckpt},
                                          {"data", sk_data},
                                          {"cohort", sk_cohort},
                                          {"ks", sk_ks},
                                          {"seeds", sk_seeds},
                                          {"seed", sk_seed},
                                          {"steps", sk_steps}});
      std::cout << "wrote " << sk_out << "\n";
    } else if (*rp) {
      rp_out = resolve_out(rp_out);
      auto rows = qpart::ttt::read_predictions_csv(rp_pred);
      if (rows.empty()) throw std::runtime_error("no prediction rows in " + rp_pred);
      std::vector<double> yt, yh;
      for (const auto& r : rows) {
        yt.push_back(r.y_true);
        yh.push_back(r.y_hat);
      }
      auto m = qpart::analysis::compute_metrics(yt, yh, rows.front().cohort, rows.front().mode);
      write_text(rp_out, qpart::analysis::metrics_to_json(m));
      write_snapshot(rp_out, ordered_json{{"command", "report"}, {"pred", rp_pred}});
      std::cout << "wrote " << rp_out << "\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
