#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "qpart/checkpoint.hpp"
#include "qpart/train.hpp"
#include "qpart/ttt.hpp"

using namespace qpart;
using diff::Graph;
using diff::Group;

namespace {

qpnet::ModelConfig tiny_config() {
  qpnet::ModelConfig cfg;
  cfg.frames = 4;
  cfg.frame_size = 8;
  cfg.latent_channels = 2;
  cfg.latent_size = 2;
  cfg.enc_hidden = 4;
  cfg.field_hidden = 8;
  cfg.reg_hidden = 4;
  cfg.substeps = 2;
  return cfg;
}

synth::CohortSpec tiny_cohort(const char* name = "tiny") {
  synth::CohortSpec s;
  s.name = name;
  s.frames = 4;
  s.frame_size = 8;
  s.n_samples = 4;
  s.base_radius_lo = 1.4;
  s.base_radius_hi = 1.9;
  s.drift_amplitude = 0.2;
  s.aspect_jitter = 0.1;
  return s;
}

std::vector<synth::VideoSample> tiny_samples(int n, std::uint64_t seed) {
  auto spec = tiny_cohort();
  std::vector<synth::VideoSample> out;
  for (int i = 0; i < n; ++i) {
    auto s = synth::render_sequence(spec, Rng::derive(seed, i));
    s.id = spec.name + "/" + std::to_string(i);
    out.push_back(std::move(s));
  }
  return out;
}

double variance_value(const std::vector<float>& preds) {
  Graph g;
  auto t = g.leaf({static_cast<int>(preds.size()), 1}, std::vector<float>(preds));
  return ttt::variance_loss(t).scalar();
}

}  // namespace

TEST_CASE("variance loss on the worked examples") {
  CHECK(variance_value({3, 3, 3}) == doctest::Approx(0.0));
  CHECK(variance_value({1, 2, 3}) == doctest::Approx(2.0 / 3.0));
  CHECK(variance_value({0, 4}) == doctest::Approx(4.0));
  Graph g;
  auto one = g.leaf({1, 1}, {3.f});
  CHECK_THROWS_AS(ttt::variance_loss(one), std::invalid_argument);
}

TEST_CASE("variance loss is permutation- and shift-invariant") {
  Rng rng(6);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<float> preds(8);
    for (auto& p : preds) p = static_cast<float>(rng.uniform(20, 80));
    const double base = variance_value(preds);
    auto shuffled = preds;
    for (int i = 7; i > 0; --i) std::swap(shuffled[i], shuffled[rng.uniform_int(i + 1)]);
    CHECK(variance_value(shuffled) == doctest::Approx(base).epsilon(1e-4));
    auto shifted = preds;
    for (auto& p : shifted) p += 5.f;
    CHECK(variance_value(shifted) == doctest::Approx(base).epsilon(2e-3));
  }
}

TEST_CASE("variance loss is differentiable with the population-variance gradient") {
  Graph g;
  auto preds = g.leaf({3, 1}, {1.f, 2.f, 3.f});
  auto lvar = ttt::variance_loss(preds);
  g.backward(lvar);
  const auto grad = g.grad_of(preds.node);
  // d/dy_k (1/K) sum (y - ybar)^2 = (2/K)(y_k - ybar)
  CHECK(grad[0] == doctest::Approx(2.0 / 3.0 * (1 - 2)));
  CHECK(grad[1] == doctest::Approx(0.0));
  CHECK(grad[2] == doctest::Approx(2.0 / 3.0 * (3 - 2)));
}

TEST_CASE("param groups partition BN affine params, backbone stays frozen") {
  auto cfg = tiny_config();
  qpnet::Model m(cfg, 5);
  auto groups = ttt::collect_param_groups(m);
  REQUIRE(groups.size() == 3);

  // hand count from the architecture: four projection heads with one BN of
  // 2c affine scalars each; the vector field BN has 2*field_hidden; base
  // BN layers are enc(2*mid + 2c) + decoder(2*mid)
  const int c = cfg.latent_channels, mid = cfg.enc_hidden, hf = cfg.field_hidden;
  auto scalar_count = [](const std::vector<diff::Param*>& ps) {
    std::size_t n = 0;
    for (auto* p : ps) n += p->size();
    return n;
  };
  CHECK(groups[Group::periodic_bn].size() == 8);  // 4 heads x {gamma, beta}
  CHECK(scalar_count(groups[Group::periodic_bn]) == static_cast<std::size_t>(4 * 2 * c));
  CHECK(scalar_count(groups[Group::aperiodic_bn]) == static_cast<std::size_t>(2 * hf));
  CHECK(scalar_count(groups[Group::base_bn]) ==
        static_cast<std::size_t>(2 * mid + 2 * c + 2 * mid));

  // pairwise disjoint and BN-only
  std::set<std::string> seen;
  for (const auto& [grp, ps] : groups)
    for (auto* p : ps) {
      CHECK(seen.insert(p->name).second);
      const bool is_bn = p->name.find(".gamma") != std::string::npos ||
                         p->name.find(".beta") != std::string::npos;
      CHECK(is_bn);
    }
  for (auto* p : m.params())
    if (p->group == Group::backbone) {
      CHECK(p->name.find(".gamma") == std::string::npos);
      CHECK(p->name.find(".beta") == std::string::npos);
    }
}

TEST_CASE("steps=0 adapt returns the view-mean prediction and leaves the model untouched") {
  auto cfg = tiny_config();
  qpnet::Model m(cfg, 9);
  auto state = qpnet::dump_state(m);
  auto sample = tiny_samples(1, 11)[0];
  ttt::AdaptConfig acfg;
  acfg.K = 4;
  acfg.steps = 0;
  auto report = ttt::adapt(m, sample, acfg, 21, state);
  REQUIRE(report.per_step.size() == 1);
  REQUIRE(report.y_views_final.size() == 4);
  double mean = 0;
  for (double v : report.y_views_final) mean += v;
  mean /= 4;
  CHECK(report.y_hat_final == doctest::Approx(mean).epsilon(1e-9));
  CHECK(!report.divergent);
  auto after = qpnet::dump_state(m);
  CHECK(after.values == state.values);
}

TEST_CASE("zero learning rates keep per-step losses constant") {
  auto cfg = tiny_config();
  qpnet::Model m(cfg, 13);
  auto state = qpnet::dump_state(m);
  auto sample = tiny_samples(1, 17)[0];
  ttt::AdaptConfig acfg;
  acfg.K = 4;
  acfg.steps = 4;
  acfg.lr_base = acfg.lr_periodic = acfg.lr_aperiodic = 0.0;
  auto report = ttt::adapt(m, sample, acfg, 23, state);
  REQUIRE(report.per_step.size() == 5);
  // train-mode entries (0..steps-1) are all equal; the last entry is the
  // eval-mode pass and may differ
  for (int i = 1; i < 4; ++i) {
    CHECK(report.per_step[i].l_var == doctest::Approx(report.per_step[0].l_var).epsilon(1e-6));
    CHECK(report.per_step[i].l_rec == doctest::Approx(report.per_step[0].l_rec).epsilon(1e-6));
  }
  // zero step size leaves every parameter untouched
  qpnet::Model ref(cfg, 13);
  qpnet::load_state(ref, state);
  auto pa = m.params();
  auto pr = ref.params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i]->value == *pr[i]->value);
}

TEST_CASE("adapt changes only BN affine parameters") {
  auto cfg = tiny_config();
  qpnet::Model m(cfg, 19);
  auto state = qpnet::dump_state(m);
  auto sample = tiny_samples(1, 29)[0];
  ttt::AdaptConfig acfg;
  acfg.K = 4;
  acfg.steps = 3;
  auto report = ttt::adapt(m, sample, acfg, 31, state);
  CHECK(!report.divergent);

  qpnet::Model ref(cfg, 19);
  qpnet::load_state(ref, state);
  auto ps_adapted = m.params();
  auto ps_ref = ref.params();
  bool bn_changed = false;
  for (std::size_t i = 0; i < ps_adapted.size(); ++i) {
    const bool is_bn = ps_adapted[i]->group != Group::backbone;
    if (is_bn) {
      if (*ps_adapted[i]->value != *ps_ref[i]->value) bn_changed = true;
    } else {
      CHECK(*ps_adapted[i]->value == *ps_ref[i]->value);  // bit-identical
    }
  }
  CHECK(bn_changed);
}

TEST_CASE("huge learning rate marks the report divergent and restores the checkpoint") {
  auto cfg = tiny_config();
  qpnet::Model m(cfg, 23);
  auto state = qpnet::dump_state(m);
  auto sample = tiny_samples(1, 37)[0];
  ttt::AdaptConfig acfg;
  acfg.K = 4;
  acfg.steps = 6;
  acfg.lr_base = acfg.lr_periodic = acfg.lr_aperiodic = 1e18;
  auto report = ttt::adapt(m, sample, acfg, 41, state);
  CHECK(report.divergent);
  CHECK(qpnet::dump_state(m).values == state.values);
}

TEST_CASE("episodic evaluation is order-invariant") {
  auto cfg = tiny_config();
  qpnet::Model m(cfg, 27);
  auto state = qpnet::dump_state(m);
  auto samples = tiny_samples(4, 43);
  ttt::AdaptConfig acfg;
  acfg.K = 3;
  acfg.steps = 2;

  auto rows = ttt::evaluate_cohort(cfg, state, samples, acfg, ttt::EvalMode::ttt, 7);
  auto shuffled = samples;
  std::swap(shuffled[0], shuffled[3]);
  std::swap(shuffled[1], shuffled[2]);
  auto rows2 = ttt::evaluate_cohort(cfg, state, shuffled, acfg, ttt::EvalMode::ttt, 7);
  for (const auto& r : rows) {
    auto it = std::find_if(rows2.begin(), rows2.end(),
                           [&](const ttt::PredRow& q) { return q.id == r.id; });
    REQUIRE(it != rows2.end());
    CHECK(it->y_hat == r.y_hat);  // bit-identical
    CHECK(it->lvar_first == r.lvar_first);
    CHECK(it->lvar_last == r.lvar_last);
  }

  // parallel workers agree with the serial path
  auto rows4 = ttt::evaluate_cohort(cfg, state, samples, acfg, ttt::EvalMode::ttt, 7, 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows4[i].id == rows[i].id);
    CHECK(rows4[i].y_hat == rows[i].y_hat);
  }
}

TEST_CASE("source_only on memorized training data reaches near-zero MAE") {
  // 16px frames so the contraction signal actually resolves
  qpnet::ModelConfig cfg;
  cfg.frames = 8;
  cfg.frame_size = 16;
  cfg.latent_channels = 4;
  cfg.latent_size = 4;
  cfg.enc_hidden = 8;
  cfg.field_hidden = 16;
  cfg.reg_hidden = 8;
  cfg.substeps = 2;
  qpnet::Model m(cfg, 31);
  synth::CohortSpec spec;
  spec.name = "mem";
  spec.frames = 8;
  spec.frame_size = 16;
  spec.base_radius_lo = 3.8;
  spec.base_radius_hi = 5.0;
  spec.drift_amplitude = 0.4;
  std::vector<synth::VideoSample> samples;
  for (int i = 0; i < 3; ++i) {
    auto s = synth::render_sequence(spec, Rng::derive(47, i));
    s.id = "mem/" + std::to_string(i);
    samples.push_back(std::move(s));
  }
  qpnet::TrainConfig tc;
  tc.epochs = 300;
  tc.batch_size = 3;
  tc.base_lr = 1e-3;
  tc.warmup_epochs = 10;
  tc.seed = 3;
  qpnet::train_model(m, samples, tc);
  auto state = qpnet::dump_state(m);
  ttt::AdaptConfig acfg;
  auto rows =
      ttt::evaluate_cohort(cfg, state, samples, acfg, ttt::EvalMode::source_only, 0);
  double mae = 0;
  for (const auto& r : rows) mae += std::abs(r.y_true - r.y_hat);
  mae /= rows.size();
  INFO("memorization MAE ", mae);
  CHECK(mae < 3.0);
}

TEST_CASE("checkpoint save/load round trip is bit-exact") {
  auto cfg = tiny_config();
  qpnet::Model m(cfg, 35);
  // move running stats off their defaults
  auto sample = tiny_samples(1, 51)[0];
  {
    Graph g;
    auto x = g.leaf({cfg.frames, 1, cfg.frame_size, cfg.frame_size},
                    std::vector<float>(sample.pixels));
    m.forward_full(g, x, {50.f}, true);
  }
  const std::string prefix =
      (std::filesystem::temp_directory_path() / "qpart_ckpt_test").string();
  qpnet::save_checkpoint(m, prefix);
  auto loaded = qpnet::load_checkpoint(prefix);
  CHECK(qpnet::dump_state(loaded).values == qpnet::dump_state(m).values);
  CHECK(loaded.cfg.frames == cfg.frames);
  CHECK(loaded.init_seed == 35);

  // epochs=0 training equals initialization
  qpnet::Model fresh(cfg, 99);
  auto init_state = qpnet::dump_state(fresh);
  qpnet::TrainConfig tc;
  tc.epochs = 0;
  tc.seed = 99;
  qpnet::train_model(fresh, tiny_samples(2, 53), tc);
  CHECK(qpnet::dump_state(fresh).values == init_state.values);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto cfg = tiny_config();
  auto samples = tiny_samples(4, 57);
  qpnet::TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 2;
  tc.base_lr = 5e-4;
  tc.warmup_epochs = 1;
  tc.seed = 11;
  qpnet::Model a(cfg, 11), b(cfg, 11);
  qpnet::train_model(a, samples, tc);
  qpnet::train_model(b, samples, tc);
  CHECK(qpnet::dump_state(a).values == qpnet::dump_state(b).values);
}
