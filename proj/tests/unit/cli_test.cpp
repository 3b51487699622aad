#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "gfm/cli/app.hpp"
#include "gfm/cli/commands.hpp"
#include "gfm/cli/config.hpp"
#include "gfm/cli/plot.hpp"
#include "gfm/common/error.hpp"
#include "support/store_fixture.hpp"

namespace gfm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::fresh_dir;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string config_error(const json& j) {
  try {
    RunConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Small enough to run the whole pipeline in a few seconds.
RunConfig quick(const fs::path& out) {
  RunConfig c;
  c.out = out;
  c.synth.tiles = 16;
  c.synth.tile_size = 128;
  c.train.steps = 10;
  c.train.batch_size = 4;
  c.finetune.scenes = 4;
  c.finetune.val_scenes = 2;
  c.finetune.train.epochs = 2;
  c.finetune.gapfill_steps = 2;
  c.finetune.gapfill_scenes = 2;
  c.eval.scenes = 2;
  c.eval.gap_scenes = 2;
  c.sweep.fractions = {1.0, 0.5};
  c.sweep.seeds = {0};
  return c;
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "gfm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::size_t count(const std::string& text, const std::regex& re) {
  return static_cast<std::size_t>(
      std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

// ---------------------------------------------------------------- config

TEST(RunConfig, DefaultsValidateAndRoundTrip) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.model.enc_dim, 64u);
  const auto back = RunConfig::from_json(json::parse(c.to_json().dump()));
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
  EXPECT_EQ(back.hash(), c.hash());
}

TEST(RunConfig, PartialSectionsMergeOverDefaults) {
  const auto c = RunConfig::from_json({{"seed", 9}, {"model", {{"encoder", {{"depth", 3}}}}}, {"train", {{"steps", 7}}}});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.model.enc_depth, 3u);
  EXPECT_EQ(c.model.enc_dim, 64u);
  EXPECT_EQ(c.model.h, 64u);
  EXPECT_EQ(c.train.steps, 7u);
  EXPECT_EQ(c.train.batch_size, RunConfig{}.train.batch_size);
}

TEST(RunConfig, SchemaViolationsNameJsonPointer) {
  EXPECT_EQ(config_error({{"model", {{"encoder", {{"dimm", 3}}}}}}), "/model/encoder/dimm: unknown key");
  EXPECT_EQ(config_error({{"bogus", 1}}), "/bogus: unknown key");
  EXPECT_NE(config_error({{"train", {{"steps", "many"}}}}).find("/train/steps: expected a non-negative integer"),
            std::string::npos);
  EXPECT_NE(config_error({{"train", {{"steps", -3}}}}).find("/train/steps"), std::string::npos);
  EXPECT_NE(config_error({{"sweep", {{"fractions", {0.5, "x"}}}}}).find("/sweep/fractions"), std::string::npos);
  EXPECT_NE(config_error({{"synth", 3}}).find("/synth: expected an object"), std::string::npos);
  EXPECT_NE(config_error(json::array()).find("/: expected an object"), std::string::npos);
  EXPECT_EQ(config_error({{"a/b", 1}}), "/a~1b: unknown key");
}

TEST(RunConfig, RangeViolationsNameJsonPointer) {
  EXPECT_NE(config_error({{"sampler", {{"budget", 99}}}}).find("/sampler/budget"), std::string::npos);
  EXPECT_NE(config_error({{"filter", {{"window", 32}}}}).find("/filter/window"), std::string::npos);
  EXPECT_NE(config_error({{"finetune", {{"regime", "warm"}}}}).find("/finetune/regime"), std::string::npos);
  EXPECT_NE(config_error({{"model", {{"mask_ratio", 1.5}}}}).find("/model"), std::string::npos);
  EXPECT_NE(config_error({{"finetune", {{"train", {{"epochs", 0}}}}}}).find("/finetune/train"), std::string::npos);
  EXPECT_NE(config_error({{"sweep", {{"fractions", {0.0}}}}}).find("/sweep/fractions"), std::string::npos);
}

TEST(RunConfig, HashIgnoresOutputDirectory) {
  RunConfig a, b;
  b.out = "elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 1;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 8u);
}

// ---------------------------------------------------------------- plot

TEST(Plot, ThreeRowCsvGivesThreePoints) {
  const auto dir = fresh_dir("cli_plot");
  spit(dir / "in.csv", "step,loss\n0,1.5\n1,0.9\n2,0.7\n");
  plot_csv(dir / "in.csv", "", {}, dir / "out.svg");
  const auto svg = slurp(dir / "out.svg");
  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, std::regex("<path class=\"series\"[^>]* d=\"([^\"]*)\"")));
  const std::string d = m[1];
  EXPECT_EQ(count(d, std::regex("[ML] ?-?[0-9.]+ -?[0-9.]+")), 3u);
  EXPECT_EQ(count(svg, std::regex("<circle class=\"point\"")), 3u);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Plot, HigherValuesSitHigherOnTheCanvas) {
  const std::vector<Series> s{{"y", {0, 1}, {0, 10}}};
  const auto svg = render_svg(s, {"t", "x", "y"});
  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, std::regex("d=\"M([0-9.]+) ([0-9.]+) L([0-9.]+) ([0-9.]+)\"")));
  EXPECT_LT(std::stod(m[1]), std::stod(m[3]));
  EXPECT_GT(std::stod(m[2]), std::stod(m[4]));  // SVG y grows downward
}

TEST(Plot, CsvErrors) {
  const auto csv = parse_csv("a,b\n1,2\n3,oops\n");
  EXPECT_THROW(csv.column("c"), ArgumentError);
  try {
    csv.numbers(1);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_THROW(parse_csv(""), EmptyInputError);
  const std::vector<Series> none{{"y", {}, {}}};
  EXPECT_THROW(render_svg(none, {}), EmptyInputError);
  const std::vector<Series> bad{{"y", {1, 2}, {1}}};
  EXPECT_THROW(render_svg(bad, {}), ShapeError);
}

TEST(Plot, EscapesMarkup) {
  const std::vector<Series> s{{"a<b", {0}, {1}}};
  const auto svg = render_svg(s, {"x & y", "", ""});
  EXPECT_NE(svg.find("x &amp; y"), std::string::npos);
  EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
}

// ---------------------------------------------------------------- stages

TEST(Stages, MissingPrerequisiteNamesProducingStage) {
  Context ctx{quick(fresh_dir("cli_missing")), 1};
  auto expect_stage = [&](const std::string& stage, const std::string& producer) {
    try {
      run_stage(stage, ctx);
      ADD_FAILURE() << stage << " did not throw";
    } catch (const StageError& e) {
      EXPECT_NE(std::string(e.what()).find("stage '" + producer + "'"), std::string::npos) << e.what();
    }
  };
  expect_stage("sample", "synth");
  expect_stage("filter", "sample");
  expect_stage("pack", "filter");
  expect_stage("pretrain", "pack");
  expect_stage("finetune", "pretrain");
  expect_stage("eval", "finetune");
  expect_stage("sweep", "pretrain");
  EXPECT_THROW(run_stage("plot", ctx), StageError);
  EXPECT_THROW(run_stage("deploy", ctx), ArgumentError);
}

TEST(Stages, PackIsIdempotent) {
  Context ctx{quick(fresh_dir("cli_pack")), 2};
  for (const char* s : {"synth", "sample", "filter", "pack"}) run_stage(s, ctx);
  const auto first = hash_path(ctx.cfg.out / paths::kStore);
  run_stage("pack", ctx);
  EXPECT_EQ(hash_path(ctx.cfg.out / paths::kStore), first);
  const auto m = json::parse(slurp(ctx.cfg.out / paths::kManifests / "pack.json"));
  EXPECT_EQ(m.at("stage"), "pack");
  EXPECT_EQ(m.at("inputs").at(paths::kIndex), hash_path(ctx.cfg.out / paths::kIndex));
  EXPECT_TRUE(m.contains("inputs_hash"));
  EXPECT_TRUE(m.at("wall_time_s").is_number());
  EXPECT_EQ(m.at("outputs"), json::array({paths::kStore}));
}

TEST(Stages, RandomRegimeNeedsNoPretraining) {
  RunConfig cfg = quick(fresh_dir("cli_random"));
  cfg.finetune.regime = "random";
  Context ctx{cfg, 1};
  const auto summary = run_stage("finetune", ctx);
  EXPECT_EQ(summary.at("regime"), "random");
  EXPECT_FALSE(fs::exists(ctx.cfg.out / paths::kGapfillCkpt));
  EXPECT_NO_THROW(run_stage("eval", ctx));
  const auto report = json::parse(slurp(ctx.cfg.out / paths::kMetricsJson));
  EXPECT_TRUE(report.at("rmse").is_null());
}

TEST(Stages, SmokePipelineEmitsReportAndIsDeterministic) {
  const auto root = fresh_dir("cli_smoke");
  Context a{quick(root / "a"), 1}, b{quick(root / "b"), 2};
  const auto summary = cmd_pipeline(a);
  for (const auto& s : stage_names()) EXPECT_TRUE(summary.contains(s)) << s;
  cmd_pipeline(b);

  const auto text = slurp(a.cfg.out / paths::kMetricsJson);
  EXPECT_EQ(text, slurp(b.cfg.out / paths::kMetricsJson));
  const auto report = json::parse(text);
  EXPECT_GE(report.at("mIoU").get<double>(), 0.0);
  EXPECT_LE(report.at("mIoU").get<double>(), 1.0);
  EXPECT_EQ(report.at("config_hash"), a.cfg.hash());
  EXPECT_TRUE(report.at("rmse").is_number());
  EXPECT_GE(report.at("rmse").get<double>(), report.at("mae").get<double>());
  EXPECT_EQ(report.at("per_class").size(), 2u);
  for (const char* svg : {"pretrain_loss.svg", "finetune.svg", "sweep.svg"}) {
    EXPECT_TRUE(fs::exists(a.cfg.out / paths::kPlots / svg)) << svg;
  }
  for (const auto& s : stage_names()) {
    EXPECT_TRUE(fs::exists(a.cfg.out / paths::kManifests / (s + ".json"))) << s;
  }
  EXPECT_EQ(slurp(a.cfg.out / paths::kSweepCsv), slurp(b.cfg.out / paths::kSweepCsv));
}

// ---------------------------------------------------------------- exit codes

TEST(ExitCodes, UsageConfigDomainAndSuccess) {
  const auto dir = fresh_dir("cli_exit");
  EXPECT_EQ(run_args({"--no-such-flag", "synth"}), 2);
  EXPECT_EQ(run_args({}), 2);
  EXPECT_EQ(run_args({"--workers", "0", "synth"}), 2);

  spit(dir / "bad.json", R"({"train": {"stepz": 3}})");
  EXPECT_EQ(run_args({"--config", (dir / "bad.json").string(), "config"}), 2);
  spit(dir / "broken.json", "{ not json");
  EXPECT_EQ(run_args({"--config", (dir / "broken.json").string(), "config"}), 2);

  EXPECT_EQ(run_args({"--out", (dir / "empty").string(), "eval"}), 1);
  EXPECT_EQ(run_args({"config"}), 0);

  spit(dir / "p.csv", "x,y\n0,1\n1,2\n");
  EXPECT_EQ(run_args({"plot", "--input", (dir / "p.csv").string(), "--output", (dir / "p.svg").string()}), 0);
  EXPECT_TRUE(fs::exists(dir / "p.svg"));
  EXPECT_EQ(run_args({"plot", "--input", (dir / "p.csv").string(), "--y", "zz"}), 1);
}

}  // namespace
}  // namespace gfm::cli
