#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "rankatt/errors.hpp"
#include "rankatt/eval.hpp"
#include "rankatt/synth.hpp"
#include "rankatt/train.hpp"

using namespace rankatt;
namespace fs = std::filesystem;

namespace {

DataError::Kind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.kind();
  }
  FAIL("expected a DataError");
  return DataError::Kind::bad_record;
}

fs::path temp_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "rankatt_train_test" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// n videos "v0" (best) .. "v{n-1}" (worst) on a strict ladder, with enough
// per-segment structure that attention gradients do not vanish, plus the
// full closed set of ordered pairs.
struct Ladder {
  Dataset data;
  std::vector<PairAnnotation> pairs;
};

Ladder ladder(std::size_t n, std::size_t t, std::size_t d) {
  Ladder out;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix f(t, d);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < d; ++c)
        f.at(r, c) = static_cast<double>(n - i) + 0.6 * static_cast<double>(r) +
                     0.1 * static_cast<double>(c);
    out.data.add({"v" + std::to_string(i), "task", std::move(f), ""});
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      out.pairs.push_back(
          {"v" + std::to_string(i), "v" + std::to_string(j)});
  return out;
}

std::vector<std::vector<double>> snapshot(const std::vector<ParamView>& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& p : ps) out.emplace_back(p.value, p.value + p.size);
  return out;
}

bool matches(const std::vector<ParamView>& ps,
             const std::vector<std::vector<double>>& snap) {
  if (ps.size() != snap.size()) return false;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].size != snap[i].size()) return false;
    if (std::memcmp(ps[i].value, snap[i].data(),
                    ps[i].size * sizeof(double)) != 0)
      return false;
  }
  return true;
}

bool same_params(RankModel& a, RankModel& b) {
  return matches(a.all_params(), snapshot(b.all_params()));
}

// Small planted dataset shared by the end-to-end cases.
SynthDataset quick_synth(std::uint64_t seed) {
  SynthSpec spec;
  spec.n_videos = 8;
  spec.segments = 6;
  spec.feature_dim = 4;
  spec.n_pro_prototypes = 1;
  spec.n_con_prototypes = 1;
  spec.n_bg_prototypes = 3;
  spec.pro_rate = 1.5;
  spec.con_rate = 1.5;
  spec.noise_std = 0.2;
  spec.reversal_rate = 0.0;
  spec.seed = seed;
  return generate(spec);
}

TrainConfig quick_cfg() {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_size = 4;
  cfg.epochs = 3;
  cfg.filters = 2;
  cfg.hidden_dim = 3;
  cfg.noise_sigma = 0.02;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("TrainConfig::validate rejects degenerate settings") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  SUBCASE("lr") {
    cfg.lr = 0.0;
    CHECK(kind_of([&] { cfg.validate(); }) == DataError::Kind::degenerate);
    cfg.lr = -1e-3;
    CHECK(kind_of([&] { cfg.validate(); }) == DataError::Kind::degenerate);
  }
  SUBCASE("batch size") {
    cfg.batch_size = 0;
    CHECK(kind_of([&] { cfg.validate(); }) == DataError::Kind::degenerate);
  }
  SUBCASE("epochs") {
    cfg.epochs = 0;
    CHECK(kind_of([&] { cfg.validate(); }) == DataError::Kind::degenerate);
  }
  SUBCASE("model size") {
    cfg.filters = 0;
    CHECK(kind_of([&] { cfg.validate(); }) == DataError::Kind::degenerate);
    cfg.filters = 1;
    cfg.hidden_dim = 0;
    CHECK(kind_of([&] { cfg.validate(); }) == DataError::Kind::degenerate);
  }
  SUBCASE("noise") {
    cfg.noise_sigma = -0.01;
    CHECK(kind_of([&] { cfg.validate(); }) == DataError::Kind::degenerate);
  }
  SUBCASE("loss margins are checked too") {
    cfg.loss.margin_rank_aware = cfg.loss.margin_disparity;
    CHECK_THROWS_AS(cfg.validate(), NumericError);
  }
}

TEST_CASE("phase_weights: ranking trains the rank hinges only") {
  for (bool d : {false, true})
    for (bool r : {false, true})
      for (bool v : {false, true}) {
        const TermWeights w = phase_weights(Phase::ranking, {d, r, v});
        CHECK(w.rank_plus == 1.0);
        CHECK(w.rank_minus == 1.0);
        CHECK(w.rank_uniform == 1.0);
        CHECK(w.disparity == 0.0);
        CHECK(w.rank_aware == 0.0);
        CHECK(w.diversity == 0.0);
      }
}

TEST_CASE("phase_weights: attention phase honours the ablation flags") {
  SUBCASE("everything on") {
    const TermWeights w = phase_weights(Phase::attention, {true, true, true});
    CHECK(w.rank_plus == 0.0);
    CHECK(w.rank_minus == 0.0);
    CHECK(w.rank_uniform == 0.0);
    CHECK(w.disparity == 1.0);
    CHECK(w.rank_aware == 1.0);
    CHECK(w.diversity == 1.0);
  }
  SUBCASE("single-term ablations drop just that term") {
    TermWeights w = phase_weights(Phase::attention, {false, true, true});
    CHECK(w.disparity == 0.0);
    CHECK(w.rank_aware == 1.0);
    CHECK(w.rank_plus == 0.0);
    w = phase_weights(Phase::attention, {true, false, false});
    CHECK(w.disparity == 1.0);
    CHECK(w.rank_aware == 0.0);
    CHECK(w.diversity == 0.0);
    CHECK(w.rank_plus == 0.0);
  }
  SUBCASE("the rank hinges never leak into the attention phase") {
    for (bool v : {false, true}) {
      const TermWeights w = phase_weights(Phase::attention, {false, false, v});
      CHECK(w.rank_plus == 0.0);
      CHECK(w.rank_minus == 0.0);
      CHECK(w.rank_uniform == 0.0);
      CHECK(w.disparity == 0.0);
      CHECK(w.rank_aware == 0.0);
      CHECK(w.diversity == (v ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("ablation_weights masks exactly the ablated terms") {
  TermWeights w = ablation_weights({true, true, true});
  CHECK(w.rank_plus == 1.0);
  CHECK(w.disparity == 1.0);
  CHECK(w.rank_aware == 1.0);
  CHECK(w.diversity == 1.0);

  w = ablation_weights({false, false, false});
  CHECK(w.rank_plus == 1.0);
  CHECK(w.rank_minus == 1.0);
  CHECK(w.rank_uniform == 1.0);
  CHECK(w.disparity == 0.0);
  CHECK(w.rank_aware == 0.0);
  CHECK(w.diversity == 0.0);

  w = ablation_weights({true, false, true});
  CHECK(w.disparity == 1.0);
  CHECK(w.rank_aware == 0.0);
  CHECK(w.diversity == 1.0);
}

TEST_CASE("phase_step: satisfied ranking margins leave every bit alone") {
  RankModel model = RankModel::init({1, 1, 1, 1}, 7);
  for (AffineLayer* l :
       {&model.rank_high, &model.rank_low, &model.rank_uniform}) {
    l->w.at(0, 0) = 1.0;
    l->b[0] = 0.0;
  }
  Matrix better(1, 1, 100.0);
  Matrix worse(1, 1, 1.0);
  const auto before = snapshot(model.all_params());

  AdamState opt;
  opt.lr = 0.5;
  opt.init(model.ranking_params());
  const PairLossBreakdown raw = phase_step(
      model, opt, Phase::ranking, {{&better, &worse}}, LossConfig{}, {});

  // Scores land at 100 vs 1 on every branch, so all three rank hinges are
  // slack; the step count still advances but no parameter may move.
  CHECK(raw.rank_plus == 0.0);
  CHECK(raw.rank_minus == 0.0);
  CHECK(raw.rank_uniform == 0.0);
  CHECK(raw.rank_aware == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(opt.step == 1);
  CHECK(matches(model.all_params(), before));
}

TEST_CASE("phase_step: a single segment gives attention nothing to do") {
  // T=1 means the softmax is the constant 1 whatever the filter weights,
  // and a 1x1 row-stochastic matrix is orthonormal, so the whole attention
  // gradient is exactly zero even with every hinge active.
  RankModel model = RankModel::init({1, 1, 1, 1}, 7);
  for (AffineLayer* l :
       {&model.rank_high, &model.rank_low, &model.rank_uniform}) {
    l->w.at(0, 0) = 1.0;
    l->b[0] = 0.0;
  }
  Matrix better(1, 1, 1.0);
  Matrix worse(1, 1, 2.0);
  const auto before = snapshot(model.all_params());

  AdamState opt;
  opt.init(model.attention_params());
  const PairLossBreakdown raw = phase_step(
      model, opt, Phase::attention, {{&better, &worse}}, LossConfig{}, {});

  CHECK(raw.rank_plus == doctest::Approx(2.0).epsilon(1e-12));
  // Per-branch disparity: 0.1 - (1 - 2) + (1 - 2).
  CHECK(raw.disp_plus == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(raw.disp_minus == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(raw.rank_aware == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(raw.div_plus == 0.0);
  CHECK(raw.div_minus == 0.0);
  CHECK(matches(model.all_params(), before));
}

TEST_CASE("phase_step: the inactive parameter set is frozen bit-for-bit") {
  Rng rng(100);
  Matrix better(4, 3);
  Matrix worse(4, 3);
  for (auto& v : better.data) v = rng.uniform(-1, 1);
  for (auto& v : worse.data) v = rng.uniform(-1, 1);
  const std::vector<PairBatchItem> batch{{&better, &worse}};

  SUBCASE("ranking step") {
    RankModel model = RankModel::init({3, 2, 2, 4}, 11);
    const auto att_before = snapshot(model.attention_params());
    const auto rank_before = snapshot(model.ranking_params());
    AdamState opt;
    opt.lr = 1e-2;
    opt.init(model.ranking_params());
    phase_step(model, opt, Phase::ranking, batch, LossConfig{}, {});
    CHECK(matches(model.attention_params(), att_before));
    CHECK_FALSE(matches(model.ranking_params(), rank_before));
  }
  SUBCASE("attention step") {
    RankModel model = RankModel::init({3, 2, 2, 4}, 11);
    const auto att_before = snapshot(model.attention_params());
    const auto rank_before = snapshot(model.ranking_params());
    AdamState opt;
    opt.lr = 1e-2;
    opt.init(model.attention_params());
    phase_step(model, opt, Phase::attention, batch, LossConfig{}, {});
    CHECK(matches(model.ranking_params(), rank_before));
    CHECK_FALSE(matches(model.attention_params(), att_before));
  }
}

TEST_CASE("phase_step: first Adam update matches the closed form") {
  // One segment, one feature: pooling is the identity, so with w=0.1, b=0
  // on every rank layer and inputs 2 vs 1 each hinge is 0.9 and each weight
  // gradient is exactly -1 (the bias gradients cancel). Adam's first step
  // is then lr * g / (|g| + eps) regardless of the moment constants.
  RankModel model = RankModel::init({1, 2, 1, 1}, 3);
  for (AffineLayer* l :
       {&model.rank_high, &model.rank_low, &model.rank_uniform}) {
    l->w.at(0, 0) = 0.1;
    l->b[0] = 0.0;
  }
  Matrix better(1, 1, 2.0);
  Matrix worse(1, 1, 1.0);

  AdamState opt;
  opt.lr = 0.5;
  opt.init(model.ranking_params());
  const PairLossBreakdown raw = phase_step(
      model, opt, Phase::ranking, {{&better, &worse}}, LossConfig{}, {});

  CHECK(raw.rank_plus == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(raw.rank_minus == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(raw.rank_uniform == doctest::Approx(0.9).epsilon(1e-12));

  const double expected = 0.1 + 0.5 / (1.0 + 1e-8);
  for (AffineLayer* l :
       {&model.rank_high, &model.rank_low, &model.rank_uniform}) {
    CHECK(l->w.at(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(l->b[0] == 0.0);  // zero gradient must be an exact Adam no-op
  }
}

TEST_CASE("phase_step: rejects an empty batch, flags non-finite losses") {
  RankModel model = RankModel::init({1, 1, 1, 1}, 1);
  AdamState opt;
  opt.init(model.ranking_params());

  CHECK(kind_of([&] {
          phase_step(model, opt, Phase::ranking, {}, LossConfig{}, {});
        }) == DataError::Kind::degenerate);

  model.rank_high.w.at(0, 0) = 1.0;
  Matrix better(1, 1, -1e308);  // overflows the plus hinge to +inf
  Matrix worse(1, 1, 1e308);
  CHECK_THROWS_AS(phase_step(model, opt, Phase::ranking, {{&better, &worse}},
                             LossConfig{}, {}),
                  NumericError);
}

TEST_CASE("train: input validation") {
  Ladder lad = ladder(3, 2, 2);
  TrainConfig cfg = quick_cfg();
  cfg.epochs = 1;

  CHECK(kind_of([&] { train(Dataset{}, lad.pairs, cfg); }) ==
        DataError::Kind::empty_split);
  CHECK(kind_of([&] { train(lad.data, {}, cfg); }) ==
        DataError::Kind::empty_split);
  CHECK(kind_of([&] { train(lad.data, {{"v0", "ghost"}}, cfg); }) ==
        DataError::Kind::unknown_id);
  cfg.epochs = 0;
  CHECK(kind_of([&] { train(lad.data, lad.pairs, cfg); }) ==
        DataError::Kind::degenerate);
}

TEST_CASE("train: phase schedule follows the alternation period") {
  Ladder lad = ladder(4, 2, 2);
  TrainConfig cfg = quick_cfg();
  cfg.batch_size = 16;
  cfg.noise_sigma = 0.0;
  cfg.filters = 1;
  cfg.hidden_dim = 2;

  auto phases = [&](std::size_t period, std::size_t epochs) {
    cfg.alternation_period = period;
    cfg.epochs = epochs;
    const TrainResult res = train(lad.data, lad.pairs, cfg);
    REQUIRE(res.history.epochs.size() == epochs);
    std::string s;
    for (std::size_t i = 0; i < epochs; ++i) {
      CHECK(res.history.epochs[i].epoch == i + 1);
      s += res.history.epochs[i].phase == Phase::ranking ? 'r' : 'a';
    }
    return s;
  };

  CHECK(phases(1, 6) == "rarara");
  CHECK(phases(2, 6) == "rraarr");
  CHECK(phases(3, 7) == "rrraaar");
}

TEST_CASE("train: period 0 alternates per batch, ranking first") {
  Ladder lad = ladder(4, 2, 2);  // 6 pairs
  TrainConfig cfg = quick_cfg();
  cfg.batch_size = 2;  // 3 batches per epoch
  cfg.epochs = 2;
  cfg.alternation_period = 0;
  cfg.noise_sigma = 0.0;

  struct Step {
    std::size_t epoch;
    Phase phase;
    std::size_t batch;
  };
  std::vector<Step> steps;
  const TrainResult res =
      train(lad.data, lad.pairs, cfg, {},
            [&](std::size_t epoch, Phase phase, std::size_t batch,
                const RankModel&) { steps.push_back({epoch, phase, batch}); });

  REQUIRE(steps.size() == 6);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    CHECK(steps[i].epoch == i / 3 + 1);
    CHECK(steps[i].batch == i % 3);
    CHECK(steps[i].phase ==
          (i % 3 % 2 == 0 ? Phase::ranking : Phase::attention));
  }
  // The epoch records label per-batch epochs as ranking.
  for (const auto& rec : res.history.epochs) {
    CHECK(rec.phase == Phase::ranking);
  }
}

TEST_CASE("train: byte-identical across runs with one seed") {
  const SynthDataset ds = quick_synth(9);
  const TrainConfig cfg = quick_cfg();
  const fs::path a = temp_dir("det_a");
  const fs::path b = temp_dir("det_b");

  TrainResult ra = train(ds.data, ds.pairs, cfg, a);
  TrainResult rb = train(ds.data, ds.pairs, cfg, b);

  CHECK(same_params(ra.model, rb.model));
  CHECK(file_bytes(a / "model.rskm") == file_bytes(b / "model.rskm"));
  CHECK(file_bytes(a / "train_log.jsonl") == file_bytes(b / "train_log.jsonl"));
  REQUIRE(ra.history.epochs.size() == rb.history.epochs.size());
  for (std::size_t i = 0; i < ra.history.epochs.size(); ++i) {
    CHECK(ra.history.epochs[i].loss.total == rb.history.epochs[i].loss.total);
  }

  TrainConfig other = cfg;
  other.seed = cfg.seed + 1;
  TrainResult rc = train(ds.data, ds.pairs, other, temp_dir("det_c"));
  CHECK_FALSE(same_params(ra.model, rc.model));
}

TEST_CASE("train: augmentation noise changes the trajectory") {
  const SynthDataset ds = quick_synth(9);
  TrainConfig clean = quick_cfg();
  clean.noise_sigma = 0.0;
  TrainConfig noisy = quick_cfg();
  noisy.noise_sigma = 0.05;

  TrainResult rc = train(ds.data, ds.pairs, clean);
  TrainResult rn = train(ds.data, ds.pairs, noisy);
  CHECK_FALSE(same_params(rc.model, rn.model));
}

TEST_CASE("train: loss descends on planted data") {
  SynthSpec spec;
  spec.n_videos = 10;
  spec.segments = 12;
  spec.feature_dim = 6;
  spec.n_pro_prototypes = 2;
  spec.n_con_prototypes = 2;
  spec.n_bg_prototypes = 6;
  spec.pro_rate = 2.5;
  spec.con_rate = 2.5;
  spec.noise_std = 0.15;
  spec.reversal_rate = 0.05;
  spec.seed = 3;
  const SynthDataset ds = generate(spec);

  TrainConfig cfg;
  cfg.lr = 2e-3;
  cfg.batch_size = 8;
  cfg.epochs = 30;
  cfg.filters = 2;
  cfg.hidden_dim = 6;
  cfg.noise_sigma = 0.01;
  cfg.seed = 4;
  const TrainResult res = train(ds.data, ds.pairs, cfg);

  auto mean_total = [&](std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i)
      s += res.history.epochs[i].loss.total;
    return s / static_cast<double>(to - from);
  };
  CHECK(mean_total(24, 30) < mean_total(0, 6));
}

TEST_CASE("train: the epoch log holds the loss seen during the epoch") {
  // One batch and no noise: every forward in epoch 1 happens at the initial
  // parameters, so the logged breakdown must equal an independent replay.
  Ladder lad = ladder(4, 2, 2);
  TrainConfig cfg = quick_cfg();
  cfg.batch_size = 64;
  cfg.epochs = 1;
  cfg.noise_sigma = 0.0;
  const TrainResult res = train(lad.data, lad.pairs, cfg);

  ModelConfig mcfg;
  mcfg.feature_dim = 2;
  mcfg.hidden_dim = cfg.hidden_dim;
  mcfg.filters = cfg.filters;
  mcfg.default_segments = 2;
  const RankModel init = RankModel::init(mcfg, cfg.seed);

  PairLossBreakdown sum;
  for (const auto& p : lad.pairs) {
    PairTrace trace;
    sum += pair_forward(init, lad.data.at(p.better).features,
                        lad.data.at(p.worse).features, cfg.loss, trace);
  }
  sum *= 1.0 / static_cast<double>(lad.pairs.size());
  const PairLossBreakdown expected =
      apply_weights(sum, cfg.loss, TermWeights::all());

  const EpochRecord& rec = res.history.epochs.at(0);
  CHECK(rec.loss.total == doctest::Approx(expected.total).epsilon(1e-12));
  CHECK(rec.loss.rank_plus ==
        doctest::Approx(expected.rank_plus).epsilon(1e-12));
  CHECK(rec.loss.div_plus == doctest::Approx(expected.div_plus).epsilon(1e-12));

  // train_accuracy is measured after the epoch's updates, i.e. on the model
  // that train() returns.
  RankModel scored = res.model;
  CHECK(rec.train_accuracy ==
        pairwise_accuracy(scored, lad.data, lad.pairs).pairwise_accuracy);
}

TEST_CASE("train: ablating diversity equals a zero diversity weight") {
  const SynthDataset ds = quick_synth(9);
  TrainConfig flag_off = quick_cfg();
  flag_off.epochs = 4;
  flag_off.ablation.diversity = false;
  TrainConfig zero_lambda = quick_cfg();
  zero_lambda.epochs = 4;
  zero_lambda.loss.lambda_diversity = 0.0;

  TrainResult ra = train(ds.data, ds.pairs, flag_off);
  TrainResult rb = train(ds.data, ds.pairs, zero_lambda);

  CHECK(same_params(ra.model, rb.model));
  for (std::size_t i = 0; i < 4; ++i) {
    const EpochRecord& a = ra.history.epochs[i];
    const EpochRecord& b = rb.history.epochs[i];
    // Identical trajectories, identical totals; only the logging of the
    // (everywhere unweighted) diversity value differs.
    CHECK(a.loss.total == b.loss.total);
    CHECK(a.loss.div_plus == 0.0);
    CHECK(a.loss.div_minus == 0.0);
    CHECK(b.loss.div_plus > 0.0);
  }
}

TEST_CASE("train: rank-only ablation logs zeros and freezes attention") {
  Ladder lad = ladder(4, 2, 2);
  TrainConfig cfg = quick_cfg();
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.noise_sigma = 0.0;
  cfg.ablation = {false, false, false};
  TrainResult res = train(lad.data, lad.pairs, cfg);

  for (const auto& rec : res.history.epochs) {
    CHECK(rec.loss.disp_plus == 0.0);
    CHECK(rec.loss.disp_minus == 0.0);
    CHECK(rec.loss.rank_aware == 0.0);
    CHECK(rec.loss.div_plus == 0.0);
    CHECK(rec.loss.div_minus == 0.0);
    CHECK(rec.loss.total ==
          doctest::Approx(rec.loss.rank_plus + rec.loss.rank_minus +
                          rec.loss.rank_uniform)
              .epsilon(1e-12));
  }

  // With every attention-phase term ablated that phase has nothing to
  // optimize: the attention modules stay at their initialization while the
  // ranking layers still move.
  ModelConfig mcfg;
  mcfg.feature_dim = 2;
  mcfg.hidden_dim = cfg.hidden_dim;
  mcfg.filters = cfg.filters;
  mcfg.default_segments = 2;
  RankModel init = RankModel::init(mcfg, cfg.seed);
  CHECK(matches(res.model.attention_params(),
                snapshot(init.attention_params())));
  CHECK_FALSE(
      matches(res.model.ranking_params(), snapshot(init.ranking_params())));
}

TEST_CASE("train: attention rows stay stochastic throughout") {
  const SynthDataset ds = quick_synth(9);
  TrainConfig cfg = quick_cfg();
  cfg.epochs = 4;
  const Matrix& probe = ds.data.videos.front().features;

  double worst = 0.0;
  train(ds.data, ds.pairs, cfg, {},
        [&](std::size_t, Phase, std::size_t, const RankModel& m) {
          const ModuleAttention att = module_attention(probe, m.att_high);
          for (std::size_t k = 0; k < att.a.rows; ++k) {
            double row = 0.0;
            for (std::size_t t = 0; t < att.a.cols; ++t) row += att.a.at(k, t);
            worst = std::max(worst, std::abs(row - 1.0));
          }
        });
  CHECK(worst < 1e-9);
}

TEST_CASE("train: checkpoint cadence and names") {
  Ladder lad = ladder(4, 2, 2);
  TrainConfig cfg = quick_cfg();
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.checkpoint_interval = 2;
  const fs::path dir = temp_dir("ckpt");
  const TrainResult res = train(lad.data, lad.pairs, cfg, dir);

  CHECK(fs::exists(dir / "checkpoint-000002.rskm"));
  CHECK(fs::exists(dir / "checkpoint-000004.rskm"));
  CHECK(fs::exists(dir / "model.rskm"));
  CHECK_FALSE(fs::exists(dir / "checkpoint-000001.rskm"));
  CHECK_FALSE(fs::exists(dir / "checkpoint-000003.rskm"));
  CHECK_FALSE(fs::exists(dir / "checkpoint-000005.rskm"));

  const auto& eps = res.history.epochs;
  REQUIRE(eps.size() == 5);
  CHECK(eps[0].checkpoint.empty());
  CHECK(eps[1].checkpoint == "checkpoint-000002.rskm");
  CHECK(eps[2].checkpoint.empty());
  CHECK(eps[3].checkpoint == "checkpoint-000004.rskm");
  CHECK(eps[4].checkpoint == "model.rskm");

  RankModel mid = load_checkpoint(dir / "checkpoint-000002.rskm");
  CHECK(mid.cfg.feature_dim == 2);
  CHECK(mid.cfg.filters == cfg.filters);

  // The final file holds exactly the returned parameters.
  const fs::path again = dir / "again.rskm";
  save_checkpoint(res.model, again);
  CHECK(file_bytes(again) == file_bytes(dir / "model.rskm"));

  // And the log mirrors the records.
  std::ifstream is(dir / "train_log.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    ++n;
    CHECK(j.at("epoch").get<std::size_t>() == n);
    CHECK(j.at("phase").is_string());
    CHECK(j.contains("total"));
    CHECK(j.contains("train_accuracy"));
    CHECK(j.contains("checkpoint") == (n == 2 || n == 4 || n == 5));
  }
  CHECK(n == 5);
}

TEST_CASE("train config files round-trip") {
  TrainConfig cfg;
  cfg.loss.margin = 1.25;
  cfg.loss.margin_disparity = 0.05;
  cfg.loss.margin_rank_aware = 0.4;
  cfg.loss.lambda_diversity = 0.2;
  cfg.lr = 0.000325;
  cfg.batch_size = 7;
  cfg.epochs = 9;
  cfg.filters = 2;
  cfg.hidden_dim = 5;
  cfg.noise_sigma = 0.125;
  cfg.seed = 424242;
  cfg.alternation_period = 3;
  cfg.ablation = {false, true, false};
  cfg.checkpoint_interval = 6;

  const fs::path dir = temp_dir("cfg");
  save_train_config(cfg, dir / "train.cfg");
  const TrainConfig back = load_train_config(dir / "train.cfg");
  CHECK(format_train_config(back) == format_train_config(cfg));
  CHECK(back.seed == 424242);
  CHECK(back.ablation.disparity == false);
  CHECK(back.ablation.rank_aware == true);
  CHECK(back.lr == cfg.lr);

  SUBCASE("comments and blank lines are skipped") {
    std::ofstream(dir / "partial.cfg") << "# tuned\n\nlr=0.5\n";
    const TrainConfig p = load_train_config(dir / "partial.cfg");
    CHECK(p.lr == 0.5);
    CHECK(p.epochs == TrainConfig{}.epochs);
  }
  SUBCASE("unknown keys are rejected") {
    std::ofstream(dir / "bad.cfg") << "lr=0.5\nbogus=3\n";
    try {
      load_train_config(dir / "bad.cfg");
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(e.kind() == DataError::Kind::bad_record);
      CHECK(std::string(e.what()).find("unknown config key") !=
            std::string::npos);
    }
  }
  SUBCASE("malformed values are rejected") {
    std::ofstream(dir / "v1.cfg") << "epochs=soon\n";
    CHECK(kind_of([&] { load_train_config(dir / "v1.cfg"); }) ==
          DataError::Kind::bad_record);
    std::ofstream(dir / "v2.cfg") << "epochs=-3\n";
    CHECK(kind_of([&] { load_train_config(dir / "v2.cfg"); }) ==
          DataError::Kind::bad_record);
    std::ofstream(dir / "v3.cfg") << "disparity=maybe\n";
    CHECK(kind_of([&] { load_train_config(dir / "v3.cfg"); }) ==
          DataError::Kind::bad_record);
    std::ofstream(dir / "v4.cfg") << "lr\n";
    CHECK(kind_of([&] { load_train_config(dir / "v4.cfg"); }) ==
          DataError::Kind::bad_record);
  }
  SUBCASE("missing file") {
    CHECK(kind_of([&] { load_train_config(dir / "nope.cfg"); }) ==
          DataError::Kind::missing_file);
  }
}

TEST_CASE("write_history: one JSON record per epoch") {
  TrainHistory h;
  EpochRecord r1;
  r1.epoch = 1;
  r1.phase = Phase::ranking;
  r1.loss.rank_plus = 0.5;
  r1.loss.total = 1.5;
  r1.train_accuracy = 0.25;
  EpochRecord r2;
  r2.epoch = 2;
  r2.phase = Phase::attention;
  r2.loss.total = 1.0;
  r2.checkpoint = "model.rskm";
  h.epochs = {r1, r2};

  const fs::path path = temp_dir("hist") / "log.jsonl";
  write_history(h, path);

  std::ifstream is(path);
  std::string line;
  REQUIRE(std::getline(is, line));
  nlohmann::json j = nlohmann::json::parse(line);
  CHECK(j.at("epoch") == 1);
  CHECK(j.at("phase") == "ranking");
  CHECK(j.at("rank_plus").get<double>() == doctest::Approx(0.5));
  CHECK(j.at("total").get<double>() == doctest::Approx(1.5));
  CHECK(j.at("train_accuracy").get<double>() == doctest::Approx(0.25));
  CHECK_FALSE(j.contains("checkpoint"));

  REQUIRE(std::getline(is, line));
  j = nlohmann::json::parse(line);
  CHECK(j.at("epoch") == 2);
  CHECK(j.at("phase") == "attention");
  CHECK(j.at("checkpoint") == "model.rskm");
  CHECK_FALSE(std::getline(is, line));
}
