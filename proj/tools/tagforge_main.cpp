#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "tagforge/error.hpp"
#include "tagforge/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"tagforge: open-set intention tagging, vocabulary normalization, "
               "subset selection, and quality evaluation for instruction corpora"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are accepted after the subcommand too

  std::string config_path;
  std::string endpoint;
  std::string embedder;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool force = false;

  auto* config_opt =
      app.add_option("--config", config_path, "pipeline configuration JSON")->required();
  auto* endpoint_opt =
      app.add_option("--endpoint", endpoint, "chat/embedding API base URL (overrides config)");
  auto* embedder_opt = app.add_option("--embedder", embedder, "embedding backend")
                           ->check(CLI::IsMember({"local", "remote"}));
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides config)");
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_flag("--force", force, "rerun completed stages / accept config changes");

  app.add_subcommand("ingest", "load, validate and pool the configured datasets");
  app.add_subcommand("annotate", "tag every query through the chat endpoint");
  app.add_subcommand("normalize", "four-stage tag vocabulary normalization");
  app.add_subcommand("analyze", "diversity/complexity metrics and tag recall matrix");
  auto* select_cmd = app.add_subcommand("select", "sample a training subset");
  app.add_subcommand("evaluate", "judge tag precision/consistency, counterfactuals, agreement");
  app.add_subcommand("export-distill", "write distillation records for a local tagger");

  std::size_t size = 0;
  std::string mode;
  auto* size_opt = select_cmd->add_option("--size", size, "subset size (overrides config)");
  auto* mode_opt =
      select_cmd->add_option("--mode", mode, "selection mode (overrides config)")
          ->check(CLI::IsMember(
              {"complexity-first", "complexity-series", "diversity-series", "random"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the error message
    return code == 0 ? 0 : 2;
  }

  (void)config_opt;
  try {
    tagforge::PipelineConfig config = tagforge::load_pipeline_config(config_path);
    if (endpoint_opt->count() > 0) config.endpoint = endpoint;
    if (embedder_opt->count() > 0) config.embedder = embedder;
    if (seed_opt->count() > 0) {
      config.seed = seed;
      config.evaluation.seed = seed;
    }
    if (out_opt->count() > 0) config.out_dir = out_dir;
    if (size_opt->count() > 0) config.selection.size = size;
    if (mode_opt->count() > 0) config.selection.mode = mode;

    tagforge::Pipeline pipeline(std::move(config), force);
    tagforge::StageOutcome outcome;
    if (app.got_subcommand("ingest")) {
      outcome = pipeline.ingest();
    } else if (app.got_subcommand("annotate")) {
      outcome = pipeline.annotate();
    } else if (app.got_subcommand("normalize")) {
      outcome = pipeline.normalize();
    } else if (app.got_subcommand("analyze")) {
      outcome = pipeline.analyze();
    } else if (app.got_subcommand("select")) {
      outcome = pipeline.select();
    } else if (app.got_subcommand("evaluate")) {
      outcome = pipeline.evaluate();
    } else {
      outcome = pipeline.export_distill();
    }

    std::printf("%s: %s\n", outcome.stage.c_str(), outcome.summary.c_str());
    if (!outcome.skipped) {
      for (const std::string& rel : outcome.outputs) {
        std::printf("  wrote %s\n", (pipeline.config().out_dir + "/" + rel).c_str());
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
