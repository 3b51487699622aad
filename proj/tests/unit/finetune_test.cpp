#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gfm/common/binary_io.hpp"
#include "gfm/finetune/gapfill.hpp"
#include "gfm/finetune/seg_model.hpp"
#include "gfm/finetune/segmentation.hpp"
#include "gfm/finetune/sweep.hpp"
#include "gfm/mae/pretrain.hpp"
#include "gfm/nn/checkpoint.hpp"
#include "gfm/raster/synthetic.hpp"
#include "support/grad_cases_model.hpp"
#include "support/grad_harness.hpp"
#include "support/store_fixture.hpp"

namespace gfm::finetune {
namespace {

using testing::fresh_dir;

SegHeadConfig small_head(std::size_t classes = 2) {
  SegHeadConfig h;
  h.classes = classes;
  h.neck = {16, 16, 8, 8};
  return h;
}

struct WaterFixture {
  raster::BandStats stats;
  SegData train, val;
};

const WaterFixture& water() {
  static const WaterFixture f = [] {
    WaterFixture w;
    const auto tr = make_water_scenes(8, 64, 3, 1);
    const auto va = make_water_scenes(4, 64, 3, 2);
    w.stats = raster::compute_band_stats(tr.chips);
    w.train = standardize(tr, w.stats);
    w.val = standardize(va, w.stats);
    return w;
  }();
  return f;
}

std::vector<std::uint8_t> random_labels(Rng& rng, std::size_t n, std::size_t k, double ignore_p) {
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = rng.uniform() < ignore_p ? 255 : static_cast<std::uint8_t>(rng.uniform_int(k));
  return v;
}

// ---------------------------------------------------------------- config

TEST(SegHeadConfig, ValidatesAndRoundTrips) {
  SegHeadConfig h = small_head(3);
  h.loss = SegLoss::kDice;
  h.class_weights = {1.0, 0.5, 1.5};
  EXPECT_EQ(SegHeadConfig::from_json(h.to_json()).to_json(), h.to_json());
  h.classes = 1;
  EXPECT_THROW(h.validate(), ConfigError);
  h = small_head();
  h.class_weights = {1.0};
  EXPECT_THROW(h.validate(), ConfigError);
  h = small_head();
  h.ignore_label = 1;
  EXPECT_THROW(h.validate(), ConfigError);
  EXPECT_THROW(SegHeadConfig::from_json({{"neck", {1, 2, 3}}}), ConfigError);
}

TEST(Regime, ParseAndFreezeRule) {
  EXPECT_EQ(FinetuneRegime::parse("frozen").name(), "frozen");
  EXPECT_EQ(FinetuneRegime::parse("random").name(), "random");
  EXPECT_EQ(FinetuneRegime::parse("pretrained").name(), "pretrained");
  EXPECT_THROW(FinetuneRegime::parse("warm"), ConfigError);
  FinetuneRegime bad{EncoderInit::kRandom, false};
  EXPECT_THROW(bad.validate(), ConfigError);
}

// ---------------------------------------------------------------- shapes

TEST(SegModel, NeckInputConcatenatesTimesteps) {
  EXPECT_EQ(neck_input_channels(mae::MaeConfig{}), 2304u);
}

TEST(SegModel, FullResolutionLogits) {
  mae::MaeConfig cfg;
  cfg.enc_dim = 16;
  cfg.enc_depth = 1;
  cfg.enc_heads = 1;
  cfg.dec_dim = 16;
  cfg.dec_depth = 1;
  cfg.dec_heads = 1;
  cfg.mlp_ratio = 1;
  SegHeadConfig h = small_head();
  h.neck = {8, 4, 4, 4};
  SegModel<float> model(cfg, h, 1);
  std::vector<float> input(cfg.t * cfg.c * cfg.h * cfg.w, 0.1f);
  const auto logits = model.forward(input);
  EXPECT_EQ(logits.shape(), (nn::Shape{2, 224, 224}));
}

TEST(SegModel, RejectsNonSixteenPatches) {
  auto cfg = mae::MaeConfig::tiny();
  cfg.ph = cfg.pw = 8;
  EXPECT_THROW(SegModel<float>(cfg, small_head(), 1), ConfigError);
}

TEST(SegModel, InputSizeMismatchIsShapeError) {
  SegModel<float> model(mae::MaeConfig::tiny(), small_head(), 1);
  std::vector<float> input(10);
  EXPECT_THROW(model.forward(input), ShapeError);
}

// ---------------------------------------------------------------- gradients

TEST(SegGradient, MatchesCentralDifferences) {
  for (const char* name : {"seg_cross_entropy", "seg_dice", "gapfill_rmse"}) {
    const auto& cases = testing::grad::model_cases();
    const auto it = std::find_if(cases.begin(), cases.end(), [&](const auto& c) { return std::string(c.name) == name; });
    ASSERT_NE(it, cases.end());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto report = it->run(seed);
      EXPECT_LT(report.worst, testing::kGradTolerance) << name << " seed " << seed << " " << report.worst_name;
    }
  }
}

// ---------------------------------------------------------------- losses and steps

TEST(SegLossContract, IgnoredPixelsAffectNothing) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto labels = random_labels(rng, 64, 3, 0.3);
    nn::Tensor<float> logits({3, 8, 8});
    for (auto& v : logits.values()) v = static_cast<float>(rng.normal());
    auto poked = logits;
    for (std::size_t p = 0; p < 64; ++p) {
      if (labels[p] != 255) continue;
      for (std::size_t c = 0; c < 3; ++c) poked.data()[c * 64 + p] = static_cast<float>(rng.normal() * 50);
    }
    const std::vector<std::vector<std::uint8_t>> l{labels};
    for (auto kind : {SegLoss::kWeightedCe, SegLoss::kDice}) {
      SegHeadConfig h = small_head(3);
      h.loss = kind;
      const auto a = seg_loss(h, {&logits, 1}, l);
      const auto b = seg_loss(h, {&poked, 1}, l);
      EXPECT_EQ(a.value, b.value);
      EXPECT_EQ(a.grads[0], b.grads[0]);
    }
  }
}

TEST(FinetuneStep, AllIgnoredIsDegenerate) {
  SegModel<float> model(mae::MaeConfig::tiny(), small_head(), 1);
  const auto& w = water();
  std::vector<std::vector<float>> inputs{w.train.inputs[0]};
  std::vector<std::vector<std::uint8_t>> labels{std::vector<std::uint8_t>(64 * 64, 255)};
  EXPECT_THROW(finetune_seg_step(model, inputs, labels, 1e-3, {}), DegenerateInputError);
}

TEST(FinetuneStep, FrozenEncoderBytesInvariant) {
  const auto cfg = mae::MaeConfig::tiny();
  mae::MaeModel<float> pre(cfg, 5);
  const auto dir = fresh_dir("ft_frozen");
  nn::save_checkpoint(pre.params(), dir, {}, false);
  const auto ckpt = nn::load_checkpoint(dir);

  SegModel<float> model(cfg, small_head(), 1);
  apply_regime(model, FinetuneRegime::parse("frozen"), &ckpt);
  std::map<std::string, nn::Tensor<float>> before;
  for (const auto& [name, p] : model.params().entries()) before.emplace(name, p.value);
  EXPECT_EQ(before.at("encoder.norm.weight"), ckpt.entries.at("encoder.norm.weight").value);

  const auto& w = water();
  for (int step = 0; step < 10; ++step) {
    std::vector<std::vector<float>> inputs{w.train.inputs[step % 4]};
    std::vector<std::vector<std::uint8_t>> labels{w.train.labels[step % 4]};
    finetune_seg_step(model, inputs, labels, 1e-3, {});
  }
  bool head_moved = false;
  for (const auto& [name, p] : model.params().entries()) {
    if (name.rfind("encoder.", 0) == 0 || name.rfind("decoder.", 0) == 0) {
      ASSERT_EQ(std::memcmp(p.value.data(), before.at(name).data(), p.value.size() * sizeof(float)), 0)
          << name;
    } else {
      head_moved |= !(p.value == before.at(name));
    }
  }
  EXPECT_TRUE(head_moved);
}

TEST(FinetuneStep, PretrainedRegimeNeedsCheckpoint) {
  SegModel<float> model(mae::MaeConfig::tiny(), small_head(), 1);
  EXPECT_THROW(apply_regime(model, FinetuneRegime::parse("pretrained"), nullptr), ConfigError);
  EXPECT_NO_THROW(apply_regime(model, FinetuneRegime::parse("random"), nullptr));
}

TEST(FinetuneStep, CheckpointShapeMismatchNamesShapes) {
  auto other = mae::MaeConfig::tiny();
  other.enc_dim = 32;
  other.enc_heads = 2;
  mae::MaeModel<float> pre(other, 1);
  const auto dir = fresh_dir("ft_mismatch");
  nn::save_checkpoint(pre.params(), dir, {}, false);
  const auto ckpt = nn::load_checkpoint(dir);
  SegModel<float> model(mae::MaeConfig::tiny(), small_head(), 1);
  try {
    apply_regime(model, FinetuneRegime::parse("pretrained"), &ckpt);
    FAIL();
  } catch (const CompatibilityError& e) {
    EXPECT_NE(std::string(e.what()).find("[32"), std::string::npos) << e.what();
  }
}

TEST(FinetuneStep, LearnsWaterMaskOnTrainingSet) {
  const auto& w = water();
  auto head = small_head();
  head.class_weights = inverse_frequency_weights(w.train.labels, 2);
  SegModel<float> model(mae::MaeConfig::tiny(), head, 3);
  SegTrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 4;
  tc.lr = 3e-3;
  const auto history = train_segmentation(model, w.train, {}, tc);
  EXPECT_EQ(history.size(), 50u);
  const double miou = metrics::summarize(evaluate_seg(model, w.train)).miou;
  EXPECT_GT(miou, 0.9);
}

TEST(ReloadResave, CheckpointBytesIdentical) {
  const auto cfg = mae::MaeConfig::tiny();
  mae::MaeModel<float> a(cfg, 1);
  const auto& w = water();
  std::vector<std::vector<float>> batch{w.train.inputs[0]};
  std::vector<mae::MaskPlan> plans{mae::pretrain_plan(cfg, 0, 0, 0)};
  mae::PretrainConfig pc;
  mae::pretrain_step(a, batch, plans, pc.schedule(), 0, pc.adamw);
  const auto root = fresh_dir("resave");
  nn::save_checkpoint(a.params(), root / "one", {{"seed", 1}}, true);
  const auto ckpt = nn::load_checkpoint(root / "one");
  mae::MaeModel<float> b(cfg, 99);
  nn::apply_checkpoint(ckpt, b.params(), {}, true);
  nn::save_checkpoint(b.params(), root / "two", ckpt.meta, true);
  for (const char* f : {"ckpt.json", "ckpt.bin"}) {
    EXPECT_EQ(read_file(root / "one" / f), read_file(root / "two" / f)) << f;
  }
}

// ---------------------------------------------------------------- inference

TEST(Argmax, MatchesBruteForceAndBreaksTiesLow) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng.uniform_int(4);
    nn::Tensor<float> logits({k, 5, 7});
    for (auto& v : logits.values()) v = static_cast<float>(rng.normal());
    const auto got = argmax_labels(logits);
    for (std::size_t p = 0; p < 35; ++p) {
      std::size_t best = 0;
      for (std::size_t c = 0; c < k; ++c) {
        if (logits.data()[c * 35 + p] > logits.data()[best * 35 + p]) best = c;
      }
      EXPECT_EQ(got[p], best);
    }
  }
  nn::Tensor<float> tie({3, 1, 2}, {0.5f, 1.0f, 2.0f, 1.0f, 2.0f, 0.0f});
  const auto l = argmax_labels(tie);
  EXPECT_EQ(l[0], 1);
  EXPECT_EQ(l[1], 0);
}

TEST(ClassWeights, InverseFrequencyMeanOne) {
  std::vector<std::vector<std::uint8_t>> labels{{0, 0, 0, 1, 255}, {0, 0, 0, 0}};
  const auto w = inverse_frequency_weights(labels, 2);
  EXPECT_NEAR((w[0] + w[1]) / 2.0, 1.0, 1e-12);
  EXPECT_NEAR(w[1] / w[0], 7.0, 1e-12);
  std::vector<std::vector<std::uint8_t>> bad{{0, 3}};
  EXPECT_THROW(inverse_frequency_weights(bad, 2), LabelError);
}

// ---------------------------------------------------------------- gap filling

struct GapFixture {
  raster::BandStats stats;
  GapScenes scenes;
  std::vector<GapSample> samples;
};

const GapFixture& gaps() {
  static const GapFixture f = [] {
    GapFixture g;
    g.scenes = make_gap_scenes(6, 64, 3, 0.2, 4);
    g.stats = raster::compute_band_stats(g.scenes.chips);
    g.samples = standardize(g.scenes, g.stats);
    return g;
  }();
  return f;
}

TEST(GapFill, WeightsCoverOnlyMiddleBadPixels) {
  const auto cfg = mae::MaeConfig::tiny();
  const auto& g = gaps();
  const auto weights = gap_pixel_weights(cfg, g.scenes.masks[0], 1);
  const auto dense = nn::unpatchify(weights, cfg.geometry());
  const auto flags = mae::bad_pixel_flags(g.scenes.masks[0][1]);
  const std::size_t plane = 64 * 64;
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t c = 0; c < 6; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        const float expect = t == 1 && flags[i] ? 1.0f : 0.0f;
        ASSERT_EQ(dense[(t * 6 + c) * plane + i], expect);
      }
    }
  }
}

TEST(GapFill, ClearMiddleTimestepIsSkipped) {
  mae::MaeModel<float> model(mae::MaeConfig::tiny(), 1);
  const auto& g = gaps();
  GapSample clear = g.samples[0];
  for (auto& m : clear.masks) std::fill(m.codes.begin(), m.codes.end(), std::uint8_t{raster::kClear});
  std::vector<GapSample> batch{clear, g.samples[1]};
  const auto r = cloudgap_finetune_step(model, batch, 1e-3, {});
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.used, 1u);
  ASSERT_TRUE(r.loss.has_value());
  std::vector<GapSample> only_clear{clear};
  const auto none = cloudgap_finetune_step(model, only_clear, 1e-3, {});
  EXPECT_FALSE(none.loss.has_value());
  EXPECT_EQ(none.skipped, 1u);
}

TEST(GapFill, PerfectReconstructionHasZeroLoss) {
  const auto cfg = mae::MaeConfig::tiny();
  const auto& g = gaps();
  const auto target = mae::patch_targets(cfg, g.samples[0].input);
  const auto weights = gap_pixel_weights(cfg, g.samples[0].masks, 1);
  EXPECT_EQ(nn::masked_rmse<float>({&target, 1}, {&target, 1}, {&weights, 1}).value, 0.0f);
}

TEST(GapFill, AllClearPassesThrough) {
  mae::MaeModel<float> model(mae::MaeConfig::tiny(), 1);
  const auto& g = gaps();
  auto masks = g.scenes.masks[0];
  for (auto& m : masks) std::fill(m.codes.begin(), m.codes.end(), std::uint8_t{raster::kClear});
  const auto out = infer_gapfill(g.scenes.chips[0], masks, model, g.stats);
  EXPECT_EQ(out.to_float(), g.scenes.chips[0].to_float());
}

TEST(GapFill, ClearPixelsBitUnchanged) {
  mae::MaeModel<float> model(mae::MaeConfig::tiny(), 1);
  const auto& g = gaps();
  for (std::size_t s = 0; s < g.scenes.chips.size(); ++s) {
    const auto out = infer_gapfill(g.scenes.chips[s], g.scenes.masks[s], model, g.stats).to_float();
    const auto in = g.scenes.chips[s].to_float();
    const auto flags = mae::bad_pixel_flags(g.scenes.masks[s][1]);
    const std::size_t plane = 64 * 64;
    std::size_t changed = 0;
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t c = 0; c < 6; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t k = (t * 6 + c) * plane + i;
          if (t == 1 && flags[i]) {
            changed += out[k] != in[k];
          } else {
            ASSERT_EQ(std::bit_cast<std::uint32_t>(out[k]), std::bit_cast<std::uint32_t>(in[k]));
          }
        }
      }
    }
    EXPECT_GT(changed, 0u);
  }
}

TEST(GapFill, FineTuningReducesHeldOutRmse) {
  const auto cfg = mae::MaeConfig::tiny();
  const auto train_scenes = make_gap_scenes(64, 64, 3, 0.2, 20);
  const auto held_scenes = make_gap_scenes(16, 64, 3, 0.2, 21);
  const auto stats = raster::compute_band_stats(train_scenes.chips);
  const auto train = standardize(train_scenes, stats);
  const auto held = standardize(held_scenes, stats);
  mae::MaeModel<float> model(cfg, 2);
  const double before = gap_rmse(model, held);
  for (int step = 0; step < 100; ++step) {
    std::vector<GapSample> batch;
    for (int i = 0; i < 32; ++i) batch.push_back(train[(step * 32 + i) % train.size()]);
    cloudgap_finetune_step(model, batch, 1e-3, {});
  }
  EXPECT_LT(gap_rmse(model, held), before);
}

// ---------------------------------------------------------------- sweep

TEST(Sweep, SubsampleSizesAndErrors) {
  EXPECT_EQ(subsample_indices(10, 0.5, 1).size(), 5u);
  EXPECT_EQ(subsample_indices(10, 0.25, 1).size(), 2u);
  EXPECT_EQ(subsample_indices(10, 1.0, 1), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_THROW(subsample_indices(10, 0.05, 1), ArgumentError);
  EXPECT_THROW(subsample_indices(10, 0.0, 1), ArgumentError);
  EXPECT_THROW(subsample_indices(10, 1.5, 1), ArgumentError);
  const auto a = subsample_indices(100, 0.3, 7);
  EXPECT_EQ(a, subsample_indices(100, 0.3, 7));
  EXPECT_NE(a, subsample_indices(100, 0.3, 8));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), a.size());
}

TEST(Sweep, FullFractionEqualsPlainRunAndCsv) {
  const auto& w = water();
  auto head = small_head();
  auto factory = [&](std::uint64_t seed) { return SegModel<float>(mae::MaeConfig::tiny(), head, seed); };
  SegTrainConfig tc;
  tc.epochs = 2;
  tc.seed = 5;
  const std::vector<double> fractions{1.0, 0.5};
  const std::vector<std::uint64_t> seeds{3};
  const auto rows = run_data_efficiency_sweep(w.train, w.val, fractions, seeds, factory, tc, 2);

  SegModel<float> plain = factory(3);
  SegTrainConfig pc = tc;
  pc.seed = derive_seed(tc.seed, 3);
  train_segmentation(plain, w.train, {}, pc);
  const double expected = metrics::summarize(evaluate_seg(plain, w.val)).miou;
  bool found = false;
  for (const auto& r : rows) {
    if (r.fraction == 1.0 && r.metric == "mIoU") {
      EXPECT_EQ(r.value, expected);
      found = true;
    }
    if (r.fraction == 0.5 && r.metric == "train_samples") {
      EXPECT_EQ(r.value, 4.0);
    }
  }
  EXPECT_TRUE(found);

  const auto full = with_summary(rows);
  const auto csv = sweep_csv(full);
  EXPECT_EQ(csv.rfind("fraction,seed,metric,value\n", 0), 0u);
  EXPECT_NE(csv.find(",mean,mIoU,"), std::string::npos);
  EXPECT_NE(csv.find(",std,mIoU,0\n"), std::string::npos);
}

TEST(Sweep, ValidationKeptApart) {
  const auto& w = water();
  for (const auto& v : w.val.inputs) {
    for (const auto& t : w.train.inputs) EXPECT_NE(v, t);
  }
}

}  // namespace
}  // namespace gfm::finetune
