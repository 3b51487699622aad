#include "gfm/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "gfm/cli/plot.hpp"
#include "gfm/common/checksum.hpp"
#include "gfm/common/error.hpp"
#include "gfm/common/log.hpp"
#include "gfm/common/rng.hpp"
#include "gfm/common/thread_pool.hpp"
#include "gfm/finetune/gapfill.hpp"
#include "gfm/finetune/sweep.hpp"
#include "gfm/metrics/metrics.hpp"
#include "gfm/nn/checkpoint.hpp"
#include "gfm/raster/chip_io.hpp"
#include "gfm/raster/synthetic.hpp"
#include "gfm/sampler/sampler.hpp"
#include "gfm/store/chunk_store.hpp"

namespace gfm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum SeedTag : std::uint64_t {
  kSynthTag = 0x53594e,
  kClimateTag,
  kSampleTag,
  kMaeTag,
  kPretrainTag,
  kWaterTrainTag,
  kWaterValTag,
  kSegModelTag,
  kSegTrainTag,
  kGapTrainTag,
  kGapModelTag,
  kEvalTag,
  kEvalGapTag,
  kSweepTag,
};

std::uint64_t seed_for(const Context& ctx, SeedTag tag, std::uint64_t extra = 0) {
  return derive_seed(ctx.cfg.seed, tag, extra);
}

fs::path at(const Context& ctx, const char* rel) { return ctx.cfg.out / rel; }

void need(const Context& ctx, const std::string& stage, const char* rel, const std::string& producer) {
  if (!fs::exists(at(ctx, rel))) {
    throw StageError(stage + ": missing " + (ctx.cfg.out / rel).string() + " from stage '" + producer +
                     "'; run `gfm " + producer + "` first");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::uint32_t crc_file(const fs::path& path, std::uint32_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> buf(1 << 16);
  std::uint32_t crc = seed;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<std::size_t>(in.gcount());
    if (n) crc = crc32(std::as_bytes(std::span(buf.data(), n)), crc);
  }
  return crc;
}

// Times a stage and writes manifests/<stage>.json when done.
class Manifest {
 public:
  Manifest(const Context& ctx, std::string stage)
      : ctx_(ctx), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    log::info("stage start", {{"stage", stage_}});
  }

  void input(const char* rel) {
    const auto p = at(ctx_, rel);
    if (fs::exists(p)) inputs_[rel] = hash_path(p);
  }
  void output(const char* rel) { outputs_.push_back(rel); }

  json finish(json summary) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::ordered_json m;
    m["stage"] = stage_;
    m["seed"] = ctx_.cfg.seed;
    m["config_hash"] = ctx_.cfg.hash();
    m["workers"] = ctx_.workers;
    m["inputs"] = inputs_;
    std::string joined;
    for (const auto& [k, v] : inputs_) joined += k + "=" + v + ";";
    m["inputs_hash"] = hex32(crc32(joined));
    m["outputs"] = outputs_;
    m["summary"] = summary;
    m["wall_time_s"] = secs;
    write_text(ctx_.cfg.out / paths::kManifests / (stage_ + ".json"), m.dump(2) + "\n");
    log::info("stage done", {{"stage", stage_}, {"wall_time_s", secs}, {"summary", summary}});
    return summary;
  }

 private:
  const Context& ctx_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
};

template <typename F>
auto parallel_map(std::size_t n, std::size_t workers, F&& fn) {
  using R = std::invoke_result_t<F, std::size_t>;
  ThreadPool pool(std::max<std::size_t>(1, std::min(workers, n)));
  std::vector<std::future<R>> futures;
  futures.reserve(n);
  for (std::size_t i = 0; i < n; ++i) futures.push_back(pool.submit([&fn, i] { return fn(i); }));
  std::vector<R> out;
  out.reserve(n);
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

std::optional<nn::Checkpoint> load_if_present(const fs::path& dir) {
  if (!fs::exists(dir)) return std::nullopt;
  return nn::load_checkpoint(dir);
}

raster::BandStats stats_from_meta(const nn::Checkpoint& ckpt, const std::string& what) {
  if (!ckpt.meta.contains("band_stats")) {
    throw FormatError(what + " checkpoint has no band_stats in its metadata");
  }
  return raster::band_stats_from_json(ckpt.meta.at("band_stats"));
}

finetune::WaterScenes water(const Context& ctx, std::size_t count, SeedTag tag) {
  const auto& m = ctx.cfg.model;
  return finetune::make_water_scenes(count, static_cast<std::uint32_t>(m.h),
                                     static_cast<std::uint32_t>(m.t), seed_for(ctx, tag));
}

// Band statistics shared by the fine-tuning stages: the pretraining store's
// when a pretrained encoder is in play, otherwise the training scenes'.
raster::BandStats finetune_stats(const nn::Checkpoint* pretrained, const finetune::WaterScenes& train) {
  if (pretrained) return stats_from_meta(*pretrained, "pretrain");
  return raster::compute_band_stats(train.chips);
}

}  // namespace

std::string hash_path(const fs::path& path) {
  if (!fs::is_directory(path)) return hex32(crc_file(path, 0));
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint32_t crc = 0;
  for (const auto& f : files) {
    crc = crc32(fs::relative(f, path).generic_string(), crc);
    crc = crc_file(f, crc);
  }
  return hex32(crc);
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> kNames{"synth",    "sample", "filter", "pack", "pretrain",
                                               "finetune", "eval",   "sweep",  "plot"};
  return kNames;
}

json cmd_synth(const Context& ctx) {
  Manifest man(ctx, "synth");
  const auto& s = ctx.cfg.synth;
  const fs::path dir = at(ctx, paths::kTiles);
  fs::remove_all(dir);
  fs::create_directories(dir);

  struct Made {
    raster::TileId id;
    double cloudy = 0.0;
  };
  const auto made = parallel_map(s.tiles, ctx.workers, [&](std::size_t i) {
    auto [chip, masks] = raster::generate_synthetic_tile(seed_for(ctx, kSynthTag, i), s.tile_size,
                                                         s.timesteps, s.cloud_fraction);
    const auto& code = chip.origin().tile.tile_code;
    raster::write_chip(chip, dir / (code + ".chip"));
    raster::write_quality_masks(masks, dir / (code + ".qmask"));
    std::size_t bad = 0, total = 0;
    for (const auto& m : masks) {
      for (auto c : m.codes) bad += c != raster::kClear;
      total += m.codes.size();
    }
    return Made{chip.origin().tile, static_cast<double>(bad) / static_cast<double>(total)};
  });

  std::vector<raster::TileId> ids;
  std::set<std::string> seen;
  double cloudy = 0.0;
  for (const auto& m : made) {
    if (!seen.insert(m.id.tile_code).second) {
      throw StateError("synth: tile code " + m.id.tile_code + " generated twice; change the seed");
    }
    ids.push_back(m.id);
    cloudy += m.cloudy;
  }
  const auto grid = sampler::make_synthetic_climate_grid(seed_for(ctx, kClimateTag), ids);
  sampler::write_climate_grid(grid, at(ctx, paths::kClimate));
  man.output(paths::kTiles);
  man.output(paths::kClimate);
  return man.finish({{"tiles", ids.size()}, {"mean_bad_fraction", cloudy / static_cast<double>(ids.size())}});
}

json cmd_sample(const Context& ctx) {
  need(ctx, "sample", paths::kClimate, "synth");
  Manifest man(ctx, "sample");
  man.input(paths::kClimate);
  const auto grid = sampler::read_climate_grid(at(ctx, paths::kClimate));
  const auto groups = sampler::assign_groups(grid, ctx.cfg.sampler.mean_bins, ctx.cfg.sampler.p99_bins);
  if (groups.degenerate) log::warn("quantile bins collapsed", {{"stage", "sample"}});
  const auto tiles = sampler::stratified_sample(groups, ctx.cfg.sampler.budget, seed_for(ctx, kSampleTag));
  sampler::write_sample(tiles, at(ctx, paths::kSample));
  man.output(paths::kSample);
  return man.finish({{"sampled", tiles.size()}, {"groups", groups.group_count}, {"degenerate", groups.degenerate}});
}

json cmd_filter(const Context& ctx) {
  need(ctx, "filter", paths::kSample, "sample");
  Manifest man(ctx, "filter");
  man.input(paths::kSample);
  const auto codes = sampler::read_sample(at(ctx, paths::kSample));
  const fs::path dir = at(ctx, paths::kTiles);
  for (const auto& code : codes) {
    if (!fs::exists(dir / (code + ".qmask"))) {
      throw StageError("filter: quality masks for tile " + code + " missing from stage 'synth'");
    }
  }
  const auto parts = parallel_map(codes.size(), ctx.workers, [&](std::size_t i) {
    const auto masks = raster::read_quality_masks(dir / (codes[i] + ".qmask"));
    return quality::filter_tile(masks, ctx.cfg.filter);
  });
  std::vector<quality::ChipIndexEntry> index;
  for (const auto& p : parts) index.insert(index.end(), p.begin(), p.end());
  quality::sort_entries(index);
  quality::write_index(index, at(ctx, paths::kIndex));
  man.output(paths::kIndex);
  return man.finish({{"tiles", codes.size()}, {"entries", index.size()}});
}

json cmd_pack(const Context& ctx) {
  need(ctx, "pack", paths::kIndex, "filter");
  Manifest man(ctx, "pack");
  man.input(paths::kIndex);
  const auto index = quality::read_index(at(ctx, paths::kIndex));
  if (index.empty()) {
    throw EmptyInputError("pack: the filter kept no windows; raise /filter/threshold or lower /synth/cloud_fraction");
  }
  const fs::path dir = at(ctx, paths::kTiles);
  std::set<std::string> codes;
  for (const auto& e : index) codes.insert(e.tile_code);

  raster::BandStatsAccumulator acc;
  for (const auto& code : codes) {
    const auto chip_path = dir / (code + ".chip");
    if (!fs::exists(chip_path)) throw MissingSourceError("pack: source tile " + code + " not found");
    acc.add(raster::read_chip(chip_path), raster::read_quality_masks(dir / (code + ".qmask")));
  }
  const auto stats = acc.finish();

  std::mutex mu;
  std::map<std::string, std::shared_ptr<const raster::RasterChip>> cache;
  store::ChipResolver resolver = [&](const std::string& code) {
    std::lock_guard lock(mu);
    auto it = cache.find(code);
    if (it != cache.end()) return it->second;
    const auto p = dir / (code + ".chip");
    if (!fs::exists(p)) throw MissingSourceError("source tile " + code + " not found");
    auto chip = std::make_shared<const raster::RasterChip>(raster::read_chip(p));
    cache.emplace(code, chip);
    return std::shared_ptr<const raster::RasterChip>(chip);
  };
  const auto manifest = store::pack(index, resolver, stats, at(ctx, paths::kStore),
                                    {.chunk_samples = ctx.cfg.chunk_samples});
  man.output(paths::kStore);
  return man.finish({{"samples", manifest.sample_count}, {"chunks", manifest.chunk_count()}});
}

json cmd_pretrain(const Context& ctx) {
  need(ctx, "pretrain", paths::kStore, "pack");
  Manifest man(ctx, "pretrain");
  man.input(paths::kStore);
  const auto store = store::ChunkStore::open(at(ctx, paths::kStore));
  mae::MaeModel<float> model(ctx.cfg.model, seed_for(ctx, kMaeTag));
  mae::PretrainConfig pc = ctx.cfg.train;
  pc.seed = derive_seed(ctx.cfg.seed, kPretrainTag, ctx.cfg.train.seed);
  const auto log_every = std::max<std::uint64_t>(1, pc.steps / 10);
  const auto log = mae::run_pretraining(model, store, pc, ctx.workers, [&](std::uint64_t step, double loss) {
    if (step % log_every == 0) log::info("pretrain step", {{"step", step}, {"loss", loss}});
  });

  nn::save_checkpoint(model.params(), at(ctx, paths::kPretrainCkpt),
                      {{"model", ctx.cfg.model.to_json()},
                       {"train", pc.to_json()},
                       {"band_stats", raster::to_json(store.manifest().band_stats)}},
                      false);
  std::string csv = "step,loss,lr\n";
  for (std::size_t i = 0; i < log.losses.size(); ++i) {
    csv += std::to_string(i) + "," + num(log.losses[i]) + "," + num(log.lrs[i]) + "\n";
  }
  write_text(at(ctx, paths::kPretrainLog), csv);
  man.output(paths::kPretrainCkpt);
  man.output(paths::kPretrainLog);
  const std::size_t tail = std::min<std::size_t>(10, log.losses.size());
  const double final_loss =
      std::accumulate(log.losses.end() - static_cast<std::ptrdiff_t>(tail), log.losses.end(), 0.0) /
      static_cast<double>(tail);
  return man.finish({{"steps", log.losses.size()},
                     {"first_loss", log.losses.front()},
                     {"final_loss_mean10", final_loss}});
}

json cmd_finetune(const Context& ctx) {
  const auto& ft = ctx.cfg.finetune;
  const auto regime = finetune::FinetuneRegime::parse(ft.regime);
  if (regime.init == finetune::EncoderInit::kPretrained) need(ctx, "finetune", paths::kPretrainCkpt, "pretrain");
  Manifest man(ctx, "finetune");
  man.input(paths::kPretrainCkpt);
  const auto pretrained = load_if_present(at(ctx, paths::kPretrainCkpt));
  const bool use_pretrained = regime.init == finetune::EncoderInit::kPretrained;

  const auto train_scenes = water(ctx, ft.scenes, kWaterTrainTag);
  const auto val_scenes = water(ctx, ft.val_scenes, kWaterValTag);
  const auto stats = finetune_stats(use_pretrained ? &*pretrained : nullptr, train_scenes);
  const auto train = finetune::standardize(train_scenes, stats);
  const auto val = finetune::standardize(val_scenes, stats);

  finetune::SegModel<float> model(ctx.cfg.model, ft.head, seed_for(ctx, kSegModelTag));
  finetune::apply_regime(model, regime, use_pretrained ? &*pretrained : nullptr);
  finetune::SegTrainConfig tc = ft.train;
  tc.seed = derive_seed(ctx.cfg.seed, kSegTrainTag, ft.train.seed);
  const auto records = finetune::train_segmentation(model, train, val, tc, [](const finetune::EpochRecord& r) {
    log::info("finetune epoch", {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_miou", r.val_miou}});
  });
  nn::save_checkpoint(model.params(), at(ctx, paths::kFinetuneCkpt),
                      {{"model", ctx.cfg.model.to_json()},
                       {"head", ft.head.to_json()},
                       {"regime", regime.name()},
                       {"band_stats", raster::to_json(stats)}},
                      false);
  std::string csv = "epoch,train_loss,val_miou\n";
  for (const auto& r : records) csv += std::to_string(r.epoch) + "," + num(r.train_loss) + "," + num(r.val_miou) + "\n";
  write_text(at(ctx, paths::kFinetuneLog), csv);
  man.output(paths::kFinetuneCkpt);
  man.output(paths::kFinetuneLog);

  json summary = {{"regime", regime.name()},
                  {"epochs", records.size()},
                  {"final_val_miou", records.empty() ? 0.0 : records.back().val_miou}};

  // Cloud-gap imputation continues from the pretrained autoencoder.
  if (ft.gapfill_steps > 0 && pretrained) {
    mae::MaeModel<float> mae(ctx.cfg.model, seed_for(ctx, kGapModelTag));
    nn::apply_checkpoint(*pretrained, mae.params());
    const auto gap_stats = stats_from_meta(*pretrained, "pretrain");
    const auto scenes = finetune::make_gap_scenes(ft.gapfill_scenes, static_cast<std::uint32_t>(ctx.cfg.model.h),
                                                  static_cast<std::uint32_t>(ctx.cfg.model.t),
                                                  ctx.cfg.eval.cloud_fraction, seed_for(ctx, kGapTrainTag));
    const auto samples = finetune::standardize(scenes, gap_stats);
    const std::size_t bs = std::min<std::size_t>(ft.train.batch_size, samples.size());
    std::string gap_csv = "step,loss\n";
    for (std::size_t step = 0; step < ft.gapfill_steps; ++step) {
      std::vector<finetune::GapSample> batch;
      for (std::size_t i = 0; i < bs; ++i) batch.push_back(samples[(step * bs + i) % samples.size()]);
      const auto r = finetune::cloudgap_finetune_step(mae, batch, ft.gapfill_lr, ft.train.adamw);
      if (r.loss) gap_csv += std::to_string(step) + "," + num(*r.loss) + "\n";
    }
    nn::save_checkpoint(mae.params(), at(ctx, paths::kGapfillCkpt),
                        {{"model", ctx.cfg.model.to_json()}, {"band_stats", raster::to_json(gap_stats)}}, false);
    write_text(at(ctx, paths::kGapfillLog), gap_csv);
    man.output(paths::kGapfillCkpt);
    man.output(paths::kGapfillLog);
    summary["gapfill_steps"] = ft.gapfill_steps;
  }
  return man.finish(summary);
}

json cmd_eval(const Context& ctx) {
  need(ctx, "eval", paths::kFinetuneCkpt, "finetune");
  Manifest man(ctx, "eval");
  man.input(paths::kFinetuneCkpt);
  const auto ckpt = nn::load_checkpoint(at(ctx, paths::kFinetuneCkpt));
  const auto model_cfg = mae::MaeConfig::from_json(ckpt.meta.at("model"));
  const auto head_cfg = finetune::SegHeadConfig::from_json(ckpt.meta.at("head"));
  const auto stats = stats_from_meta(ckpt, "finetune");
  if (model_cfg.h != ctx.cfg.model.h || model_cfg.t != ctx.cfg.model.t) {
    throw CompatibilityError("eval: finetune checkpoint was trained for a different input shape");
  }
  finetune::SegModel<float> model(model_cfg, head_cfg, 0);
  nn::apply_checkpoint(ckpt, model.params());

  const auto scenes = water(ctx, ctx.cfg.eval.scenes, kEvalTag);
  const auto data = finetune::standardize(scenes, stats);
  auto report = metrics::summarize(finetune::evaluate_seg(model, data));
  report.samples = data.size();
  report.config_hash = ctx.cfg.hash();

  const char* gap_src = fs::exists(at(ctx, paths::kGapfillCkpt))    ? paths::kGapfillCkpt
                        : fs::exists(at(ctx, paths::kPretrainCkpt)) ? paths::kPretrainCkpt
                                                                    : nullptr;
  if (gap_src && ctx.cfg.eval.gap_scenes > 0) {
    man.input(gap_src);
    const auto gck = nn::load_checkpoint(at(ctx, gap_src));
    mae::MaeModel<float> mae(mae::MaeConfig::from_json(gck.meta.at("model")), 0);
    nn::apply_checkpoint(gck, mae.params());
    const auto gstats = stats_from_meta(gck, gap_src);
    const auto& mc = mae.config();
    const auto gaps = finetune::make_gap_scenes(ctx.cfg.eval.gap_scenes, static_cast<std::uint32_t>(mc.h),
                                                static_cast<std::uint32_t>(mc.t), ctx.cfg.eval.cloud_fraction,
                                                seed_for(ctx, kEvalGapTag));
    const std::size_t mid = finetune::middle_timestep(mc);
    const std::size_t plane = mc.h * mc.w, frame = mc.c * plane;
    std::vector<float> pred, truth;
    std::vector<std::uint8_t> mask;
    double ssim_sum = 0.0;
    for (std::size_t i = 0; i < gaps.chips.size(); ++i) {
      const auto filled = finetune::infer_gapfill(gaps.chips[i], gaps.masks[i], mae, gstats).to_float();
      const auto clean = gaps.chips[i].to_float();
      const auto& codes = gaps.masks[i][mid].codes;
      for (std::size_t c = 0; c < mc.c; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
          pred.push_back(filled[mid * frame + c * plane + p]);
          truth.push_back(clean[mid * frame + c * plane + p]);
          mask.push_back(ctx.cfg.filter.is_bad(codes[p]) ? 1 : 0);
        }
      }
      const std::vector<double> a(filled.begin() + static_cast<std::ptrdiff_t>(mid * frame),
                                  filled.begin() + static_cast<std::ptrdiff_t>((mid + 1) * frame));
      const std::vector<double> b(clean.begin() + static_cast<std::ptrdiff_t>(mid * frame),
                                  clean.begin() + static_cast<std::ptrdiff_t>((mid + 1) * frame));
      ssim_sum += metrics::ssim_bands(a, b, mc.c, mc.h, mc.w);
    }
    const auto err = metrics::masked_rmse_mae(pred, truth, mask);
    report.rmse = err.rmse;
    report.mae = err.mae;
    report.ssim = ssim_sum / static_cast<double>(gaps.chips.size());
  }

  write_text(at(ctx, paths::kMetricsJson), report.to_json().dump(2) + "\n");
  write_text(at(ctx, paths::kMetricsCsv), report.to_csv());
  man.output(paths::kMetricsJson);
  man.output(paths::kMetricsCsv);
  json summary = {{"miou", report.miou}, {"mf1", report.mf1}, {"samples", report.samples}};
  if (report.rmse) summary["gap_rmse"] = *report.rmse;
  return man.finish(summary);
}

json cmd_sweep(const Context& ctx) {
  const auto& ft = ctx.cfg.finetune;
  const auto regime = finetune::FinetuneRegime::parse(ft.regime);
  if (regime.init == finetune::EncoderInit::kPretrained) need(ctx, "sweep", paths::kPretrainCkpt, "pretrain");
  Manifest man(ctx, "sweep");
  man.input(paths::kPretrainCkpt);
  const auto pretrained = regime.init == finetune::EncoderInit::kPretrained
                              ? load_if_present(at(ctx, paths::kPretrainCkpt))
                              : std::nullopt;
  const auto train_scenes = water(ctx, ft.scenes, kWaterTrainTag);
  const auto val_scenes = water(ctx, ft.val_scenes, kWaterValTag);
  const auto stats = finetune_stats(pretrained ? &*pretrained : nullptr, train_scenes);
  const auto train = finetune::standardize(train_scenes, stats);
  const auto val = finetune::standardize(val_scenes, stats);

  const finetune::ModelFactory factory = [&](std::uint64_t s) {
    finetune::SegModel<float> m(ctx.cfg.model, ft.head, seed_for(ctx, kSweepTag, s));
    finetune::apply_regime(m, regime, pretrained ? &*pretrained : nullptr);
    return m;
  };
  finetune::SegTrainConfig tc = ft.train;
  tc.seed = derive_seed(ctx.cfg.seed, kSegTrainTag, ft.train.seed);
  auto rows = finetune::with_summary(finetune::run_data_efficiency_sweep(
      train, val, ctx.cfg.sweep.fractions, ctx.cfg.sweep.seeds, factory, tc, ctx.workers));
  write_text(at(ctx, paths::kSweepCsv), finetune::sweep_csv(rows));
  man.output(paths::kSweepCsv);

  json means = json::object();
  for (const auto& r : rows) {
    if (r.seed == "mean" && r.metric == "mIoU") means[num(r.fraction)] = r.value;
  }
  return man.finish({{"runs", ctx.cfg.sweep.fractions.size() * ctx.cfg.sweep.seeds.size()},
                     {"mean_miou", means}});
}

void plot_csv(const fs::path& input, const std::string& x, const std::vector<std::string>& ys,
              const fs::path& output, const std::string& title) {
  const auto csv = read_csv(input);
  const std::string xcol = x.empty() ? csv.header.at(0) : x;
  std::vector<std::string> cols = ys;
  if (cols.empty()) {
    if (csv.header.size() < 2) throw ArgumentError("csv " + input.string() + " has a single column");
    cols.push_back(csv.header.at(1));
  }
  const auto xs = csv.numbers(csv.column(xcol));
  std::vector<Series> series;
  for (const auto& c : cols) series.push_back({c, xs, csv.numbers(csv.column(c))});
  const std::string label = cols.size() == 1 ? cols.front() : "value";
  write_text(output, render_svg(series, {title.empty() ? input.filename().string() : title, xcol, label}));
}

json cmd_plot(const Context& ctx) {
  Manifest man(ctx, "plot");
  const fs::path dir = at(ctx, paths::kPlots);
  std::vector<std::string> made;
  auto simple = [&](const char* rel, const char* name, const char* x, std::vector<std::string> ys,
                    const char* title) {
    if (!fs::exists(at(ctx, rel))) return;
    man.input(rel);
    plot_csv(at(ctx, rel), x, ys, dir / name, title);
    made.push_back(std::string(paths::kPlots) + "/" + name);
  };
  simple(paths::kPretrainLog, "pretrain_loss.svg", "step", {"loss"}, "Pretraining masked MSE");
  simple(paths::kFinetuneLog, "finetune.svg", "epoch", {"train_loss", "val_miou"}, "Segmentation fine-tuning");
  simple(paths::kGapfillLog, "gapfill_loss.svg", "step", {"loss"}, "Gap-fill fine-tuning RMSE");

  if (fs::exists(at(ctx, paths::kSweepCsv))) {
    man.input(paths::kSweepCsv);
    const auto csv = read_csv(at(ctx, paths::kSweepCsv));
    const auto fr = csv.numbers(csv.column("fraction"));
    const auto val = csv.numbers(csv.column("value"));
    const auto seed_col = csv.column("seed"), metric_col = csv.column("metric");
    std::map<std::string, std::vector<std::pair<double, double>>> by_metric;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
      const auto& row = csv.rows[r];
      if (row.at(seed_col) != "mean" || row.at(metric_col) == "train_samples") continue;
      by_metric[row.at(metric_col)].push_back({fr[r], val[r]});
    }
    std::vector<Series> series;
    for (auto& [metric, pts] : by_metric) {
      std::sort(pts.begin(), pts.end());
      Series s{metric, {}, {}};
      for (const auto& [a, b] : pts) {
        s.x.push_back(a);
        s.y.push_back(b);
      }
      series.push_back(std::move(s));
    }
    if (!series.empty()) {
      write_text(dir / "sweep.svg", render_svg(series, {"Data efficiency (mean over seeds)", "training fraction", "score"}));
      made.push_back(std::string(paths::kPlots) + "/sweep.svg");
    }
  }
  if (made.empty()) {
    throw StageError("plot: no CSV logs in " + ctx.cfg.out.string() + "; run pretrain, finetune or sweep first");
  }
  man.output(paths::kPlots);
  return man.finish({{"plots", made}});
}

json run_stage(const std::string& name, const Context& ctx) {
  if (name == "synth") return cmd_synth(ctx);
  if (name == "sample") return cmd_sample(ctx);
  if (name == "filter") return cmd_filter(ctx);
  if (name == "pack") return cmd_pack(ctx);
  if (name == "pretrain") return cmd_pretrain(ctx);
  if (name == "finetune") return cmd_finetune(ctx);
  if (name == "eval") return cmd_eval(ctx);
  if (name == "sweep") return cmd_sweep(ctx);
  if (name == "plot") return cmd_plot(ctx);
  throw ArgumentError("unknown stage '" + name + "'");
}

json cmd_pipeline(const Context& ctx) {
  json out = json::object();
  for (const auto& name : stage_names()) {
    try {
      out[name] = run_stage(name, ctx);
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError("pipeline stage '" + name + "' failed: " + e.what());
    }
  }
  return out;
}

}  // namespace gfm::cli
