#include "gfm/cli/app.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gfm/cli/commands.hpp"
#include "gfm/common/error.hpp"
#include "gfm/common/log.hpp"
#include "gfm/common/thread_pool.hpp"

namespace gfm::cli {

int run(int argc, const char* const* argv) {
  CLI::App app{"Geospatial MAE pipeline: synth, sample, filter, pack, pretrain, finetune, eval, sweep, plot"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t workers = ThreadPool::default_workers();
  app.add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Run directory (overrides the config)");

  std::vector<CLI::App*> stages;
  for (const auto& name : stage_names()) {
    stages.push_back(app.add_subcommand(name, "Run the " + name + " stage"));
  }
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
  auto* show = app.add_subcommand("config", "Print the effective config as JSON");

  auto* plot = stages.back();
  std::string plot_input, plot_x, plot_output, plot_title;
  std::vector<std::string> plot_y;
  plot->add_option("--input", plot_input, "Plot a single CSV instead of the run logs")->check(CLI::ExistingFile);
  plot->add_option("--x", plot_x, "X column (default: first)");
  plot->add_option("--y", plot_y, "Y column(s) (default: second)");
  plot->add_option("--output", plot_output, "SVG path for --input");
  plot->add_option("--title", plot_title, "Chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string stage = "config";
  try {
    Context ctx;
    ctx.cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (seed) ctx.cfg.seed = *seed;
    if (out) ctx.cfg.out = *out;
    ctx.workers = workers;

    nlohmann::json result;
    if (show->parsed()) {
      std::cout << ctx.cfg.to_json().dump(2) << '\n';
      return 0;
    }
    if (pipeline->parsed()) {
      stage = "pipeline";
      result = cmd_pipeline(ctx);
    } else {
      for (auto* sub : stages) {
        if (!sub->parsed()) continue;
        stage = sub->get_name();
        if (sub == plot && !plot_input.empty()) {
          const std::string target = plot_output.empty() ? plot_input + ".svg" : plot_output;
          plot_csv(plot_input, plot_x, plot_y, target, plot_title);
          result = {{"svg", target}};
        } else {
          result = run_stage(stage, ctx);
        }
      }
    }
    std::cout << nlohmann::json{{"stage", stage}, {"ok", true}, {"result", result}}.dump() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    log::error("config error", {{"stage", stage}, {"error", e.what()}});
    std::cerr << "gfm " << stage << ": config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    log::error("stage failed", {{"stage", stage}, {"error", e.what()}});
    std::cerr << "gfm " << stage << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    log::error("stage failed", {{"stage", stage}, {"error", e.what()}});
    std::cerr << "gfm " << stage << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace gfm::cli
