#include "gfm/cli/config.hpp"

#include <cstdio>
#include <fstream>

#include "gfm/common/checksum.hpp"
#include "gfm/common/error.hpp"

namespace gfm::cli {

namespace {

using nlohmann::json;

const json& schema() {
  static const json kSchema = {
      {"seed", "uint"},
      {"out", "string"},
      {"synth",
       {{"tiles", "uint"}, {"tile_size", "uint"}, {"timesteps", "uint"}, {"cloud_fraction", "number"}}},
      {"sampler", {{"mean_bins", "uint"}, {"p99_bins", "uint"}, {"budget", "uint"}}},
      {"filter",
       {{"window", "uint"},
        {"threshold", "number"},
        {"timesteps_required", "uint"},
        {"bad_codes", "uint[]"}}},
      {"store", {{"chunk_samples", "uint"}}},
      {"model",
       {{"input", "uint[]"},
        {"patch", "uint[]"},
        {"encoder", {{"dim", "uint"}, {"depth", "uint"}, {"heads", "uint"}}},
        {"decoder", {{"dim", "uint"}, {"depth", "uint"}, {"heads", "uint"}}},
        {"mlp_ratio", "uint"},
        {"mask_ratio", "number"},
        {"norm_pix_loss", "bool"}}},
      {"train",
       {{"batch_size", "uint"},
        {"steps", "uint"},
        {"max_lr", "number"},
        {"warmup_fraction", "number"},
        {"beta1", "number"},
        {"beta2", "number"},
        {"eps", "number"},
        {"weight_decay", "number"},
        {"seed", "uint"}}},
      {"finetune",
       {{"regime", "string"},
        {"head",
         {{"classes", "uint"},
          {"neck", "uint[]"},
          {"loss", "string"},
          {"class_weights", "number[]"},
          {"ignore_label", "int"}}},
        {"train",
         {{"epochs", "uint"},
          {"batch_size", "uint"},
          {"lr", "number"},
          {"weight_decay", "number"},
          {"seed", "uint"}}},
        {"scenes", "uint"},
        {"val_scenes", "uint"},
        {"gapfill_steps", "uint"},
        {"gapfill_scenes", "uint"},
        {"gapfill_lr", "number"}}},
      {"eval", {{"scenes", "uint"}, {"gap_scenes", "uint"}, {"cloud_fraction", "number"}}},
      {"sweep", {{"fractions", "number[]"}, {"seeds", "uint[]"}}},
  };
  return kSchema;
}

bool leaf_ok(const std::string& kind, const json& v) {
  if (kind == "uint") return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  if (kind == "int") return v.is_number_integer();
  if (kind == "number") return v.is_number();
  if (kind == "bool") return v.is_boolean();
  if (kind == "string") return v.is_string();
  if (kind.ends_with("[]")) {
    if (!v.is_array()) return false;
    const std::string elem = kind.substr(0, kind.size() - 2);
    for (const auto& e : v) {
      if (!leaf_ok(elem, e)) return false;
    }
    return true;
  }
  return false;
}

std::string describe(const std::string& kind) {
  if (kind == "uint") return "a non-negative integer";
  if (kind == "int") return "an integer";
  if (kind == "number") return "a number";
  if (kind == "bool") return "a boolean";
  if (kind == "string") return "a string";
  return "an array of " + describe(kind.substr(0, kind.size() - 2)) + "s";
}

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

void walk(const json& spec, const json& value, const std::string& ptr) {
  if (spec.is_string()) {
    const auto kind = spec.get<std::string>();
    if (!leaf_ok(kind, value)) {
      throw ConfigError(ptr + ": expected " + describe(kind) + ", got " + value.dump());
    }
    return;
  }
  if (!value.is_object()) {
    throw ConfigError((ptr.empty() ? "/" : ptr) + ": expected an object");
  }
  for (const auto& [key, v] : value.items()) {
    const std::string child = ptr + "/" + escape_token(key);
    if (!spec.contains(key)) throw ConfigError(child + ": unknown key");
    walk(spec.at(key), v, child);
  }
}

// Module parsers validate ranges; their messages get the section pointer.
template <typename F>
auto section(const char* ptr, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(ptr) + ": " + e.what());
  }
}

void require(bool ok, const std::string& ptr, const std::string& what) {
  if (!ok) throw ConfigError(ptr + ": " + what);
}

}  // namespace

void check_schema(const nlohmann::json& j) { walk(schema(), j, ""); }

RunConfig::RunConfig() {
  filter.window_x = filter.window_y = static_cast<std::uint32_t>(model.h);
  filter.timesteps_required = static_cast<std::uint32_t>(model.t);
  train.batch_size = 16;
  train.steps = 100;
  train.max_lr = 5e-3;
  finetune.head.neck = {64, 32, 32, 16};
  finetune.train.epochs = 10;
  finetune.train.lr = 3e-3;
}

void RunConfig::validate() const {
  require(synth.tiles >= 1, "/synth/tiles", "must be >= 1");
  require(synth.cloud_fraction >= 0.0 && synth.cloud_fraction <= 1.0, "/synth/cloud_fraction",
          "must lie in [0, 1]");
  require(synth.tile_size >= model.h && synth.tile_size >= model.w, "/synth/tile_size",
          "must be at least the model input size");
  require(synth.timesteps >= model.t, "/synth/timesteps", "must be at least the model input timesteps");
  require(sampler.mean_bins >= 1 && sampler.p99_bins >= 1, "/sampler", "bin counts must be >= 1");
  require(sampler.budget >= 1 && sampler.budget <= synth.tiles, "/sampler/budget",
          "must lie in [1, synth.tiles]");
  section("/filter", [&] {
    filter.validate();
    return 0;
  });
  require(filter.window_x == model.w && filter.window_y == model.h, "/filter/window",
          "must equal the model input size");
  require(filter.timesteps_required == model.t, "/filter/timesteps_required",
          "must equal the model input timesteps");
  require(chunk_samples >= 1, "/store/chunk_samples", "must be >= 1");
  section("/model", [&] {
    model.validate();
    return 0;
  });
  require(model.h == model.w, "/model/input", "chips must be square");
  section("/train", [&] {
    train.validate();
    return 0;
  });
  section("/finetune/regime", [&] { return finetune::FinetuneRegime::parse(finetune.regime); });
  require(finetune.head.classes == 2, "/finetune/head/classes", "the water task has 2 classes");
  section("/finetune/head", [&] {
    finetune.head.validate();
    return 0;
  });
  section("/finetune/train", [&] {
    finetune.train.validate();
    return 0;
  });
  require(finetune.scenes >= 1, "/finetune/scenes", "must be >= 1");
  require(finetune.val_scenes >= 1, "/finetune/val_scenes", "must be >= 1");
  require(finetune.gapfill_lr > 0.0, "/finetune/gapfill_lr", "must be positive");
  require(eval.scenes >= 1, "/eval/scenes", "must be >= 1");
  require(eval.cloud_fraction > 0.0 && eval.cloud_fraction <= 1.0, "/eval/cloud_fraction",
          "must lie in (0, 1]");
  require(!sweep.fractions.empty(), "/sweep/fractions", "must not be empty");
  for (double f : sweep.fractions) {
    require(f > 0.0 && f <= 1.0, "/sweep/fractions", "entries must lie in (0, 1]");
  }
  require(!sweep.seeds.empty(), "/sweep/seeds", "must not be empty");
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["out"] = out.generic_string();
  j["synth"] = {{"tiles", synth.tiles},
                {"tile_size", synth.tile_size},
                {"timesteps", synth.timesteps},
                {"cloud_fraction", synth.cloud_fraction}};
  j["sampler"] = {{"mean_bins", sampler.mean_bins},
                  {"p99_bins", sampler.p99_bins},
                  {"budget", sampler.budget}};
  j["filter"] = {{"window", filter.window_x},
                 {"threshold", filter.bad_fraction_threshold},
                 {"timesteps_required", filter.timesteps_required},
                 {"bad_codes", filter.bad_codes}};
  j["store"] = {{"chunk_samples", chunk_samples}};
  j["model"] = model.to_json();
  j["train"] = train.to_json();
  j["finetune"] = {{"regime", finetune.regime},
                   {"head", finetune.head.to_json()},
                   {"train", finetune.train.to_json()},
                   {"scenes", finetune.scenes},
                   {"val_scenes", finetune.val_scenes},
                   {"gapfill_steps", finetune.gapfill_steps},
                   {"gapfill_scenes", finetune.gapfill_scenes},
                   {"gapfill_lr", finetune.gapfill_lr}};
  j["eval"] = {{"scenes", eval.scenes},
               {"gap_scenes", eval.gap_scenes},
               {"cloud_fraction", eval.cloud_fraction}};
  j["sweep"] = {{"fractions", sweep.fractions}, {"seeds", sweep.seeds}};
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_schema(j);
  RunConfig c;
  const json empty = json::object();
  auto sec = [&](const char* key) -> const json& { return j.contains(key) ? j.at(key) : empty; };

  c.seed = j.value("seed", c.seed);
  if (j.contains("out")) c.out = j.at("out").get<std::string>();

  const auto& s = sec("synth");
  c.synth.tiles = s.value("tiles", c.synth.tiles);
  c.synth.tile_size = s.value("tile_size", c.synth.tile_size);
  c.synth.timesteps = s.value("timesteps", c.synth.timesteps);
  c.synth.cloud_fraction = s.value("cloud_fraction", c.synth.cloud_fraction);

  const auto& sm = sec("sampler");
  c.sampler.mean_bins = sm.value("mean_bins", c.sampler.mean_bins);
  c.sampler.p99_bins = sm.value("p99_bins", c.sampler.p99_bins);
  c.sampler.budget = sm.value("budget", std::min(c.sampler.budget, c.synth.tiles));

  if (j.contains("model")) {
    json merged = c.model.to_json();
    merged.merge_patch(j.at("model"));
    c.model = section("/model", [&] { return mae::MaeConfig::from_json(merged); });
  }
  c.filter.window_x = c.filter.window_y = static_cast<std::uint32_t>(c.model.h);
  c.filter.timesteps_required = static_cast<std::uint32_t>(c.model.t);
  const auto& f = sec("filter");
  if (f.contains("window")) c.filter.window_x = c.filter.window_y = f.at("window").get<std::uint32_t>();
  c.filter.bad_fraction_threshold = f.value("threshold", c.filter.bad_fraction_threshold);
  c.filter.timesteps_required = f.value("timesteps_required", c.filter.timesteps_required);
  c.filter.bad_codes = f.value("bad_codes", c.filter.bad_codes);

  c.chunk_samples = sec("store").value("chunk_samples", c.chunk_samples);

  if (j.contains("train")) {
    json merged = c.train.to_json();
    merged.merge_patch(j.at("train"));
    c.train = section("/train", [&] { return mae::PretrainConfig::from_json(merged); });
  }

  const auto& ft = sec("finetune");
  c.finetune.regime = ft.value("regime", c.finetune.regime);
  if (ft.contains("head")) {
    json merged = c.finetune.head.to_json();
    merged.merge_patch(ft.at("head"));
    c.finetune.head =
        section("/finetune/head", [&] { return finetune::SegHeadConfig::from_json(merged); });
  }
  if (ft.contains("train")) {
    json merged = c.finetune.train.to_json();
    merged.merge_patch(ft.at("train"));
    c.finetune.train =
        section("/finetune/train", [&] { return finetune::SegTrainConfig::from_json(merged); });
  }
  c.finetune.scenes = ft.value("scenes", c.finetune.scenes);
  c.finetune.val_scenes = ft.value("val_scenes", c.finetune.val_scenes);
  c.finetune.gapfill_steps = ft.value("gapfill_steps", c.finetune.gapfill_steps);
  c.finetune.gapfill_scenes = ft.value("gapfill_scenes", c.finetune.gapfill_scenes);
  c.finetune.gapfill_lr = ft.value("gapfill_lr", c.finetune.gapfill_lr);

  const auto& ev = sec("eval");
  c.eval.scenes = ev.value("scenes", c.eval.scenes);
  c.eval.gap_scenes = ev.value("gap_scenes", c.eval.gap_scenes);
  c.eval.cloud_fraction = ev.value("cloud_fraction", c.eval.cloud_fraction);

  const auto& sw = sec("sweep");
  c.sweep.fractions = sw.value("fractions", c.sweep.fractions);
  c.sweep.seeds = sw.value("seeds", c.sweep.seeds);

  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string RunConfig::hash() const {
  char buf[9];
  auto j = to_json();
  j.erase("out");
  std::snprintf(buf, sizeof buf, "%08x", crc32(j.dump()));
  return buf;
}

}  // namespace gfm::cli
