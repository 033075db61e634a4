#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chatlines/pipeline.hpp"

namespace {

struct CliOptions {
  std::optional<std::string> config_file;
  std::optional<std::string> dataset;
  std::optional<std::string> cache;
  std::optional<std::string> out;
  std::optional<double> threshold;
  std::optional<int> context;
  std::optional<unsigned> jobs;
  std::optional<std::string> main_branch;
};

void add_common_flags(CLI::App* cmd, CliOptions& opts) {
  cmd->add_option("--config", opts.config_file, "JSON config file");
  cmd->add_option("--dataset", opts.dataset, "dataset file to ingest");
  cmd->add_option("--cache", opts.cache, "clone cache directory");
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--threshold", opts.threshold,
                  "line similarity threshold in (0, 1]");
  cmd->add_option("--context", opts.context, "diff context lines");
  cmd->add_option("--jobs", opts.jobs, "change-level parallelism");
  cmd->add_option("--main-branch", opts.main_branch,
                  "branch to treat as the mainline");
}

// Flags override config-file values.
int build_config(const CliOptions& opts, chatlines::PipelineConfig& config) {
  if (opts.config_file) {
    try {
      config = chatlines::load_config_file(*opts.config_file);
    } catch (const std::exception& e) {
      std::cerr << e.what() << "\n";
      return chatlines::kExitFatal;
    }
  }
  if (opts.dataset) config.dataset_path = *opts.dataset;
  if (opts.cache) config.clone_cache_dir = *opts.cache;
  if (opts.out) config.output_dir = *opts.out;
  if (opts.threshold) config.threshold = *opts.threshold;
  if (opts.context) config.diff_context = *opts.context;
  if (opts.jobs) config.parallelism = *opts.jobs;
  if (opts.main_branch) config.main_branch_override = *opts.main_branch;
  if (config.threshold <= 0.0 || config.threshold > 1.0) {
    std::cerr << "threshold must be in (0, 1]\n";
    return chatlines::kExitFatal;
  }
  if (config.parallelism < 1) {
    std::cerr << "jobs must be a positive integer\n";
    return chatlines::kExitFatal;
  }
  if (config.output_dir.empty()) {
    std::cerr << "no output directory configured (--out)\n";
    return chatlines::kExitFatal;
  }
  return chatlines::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute changed source lines to chat conversations and "
               "measure how long they survive in a git history"};
  app.require_subcommand(1);

  CliOptions opts;
  CLI::App* ingest = app.add_subcommand(
      "ingest", "load and validate a dataset, write normalized records");
  CLI::App* align = app.add_subcommand(
      "align", "match change hunks against conversations, write influence ratios");
  CLI::App* survive = app.add_subcommand(
      "survive", "reverse-blame labeled lines, write durations and survival curves");
  CLI::App* stats = app.add_subcommand(
      "stats", "write category summaries and pairwise KS tests");
  for (CLI::App* cmd : {ingest, align, survive, stats})
    add_common_flags(cmd, opts);

  CLI11_PARSE(app, argc, argv);

  chatlines::PipelineConfig config;
  if (const int rc = build_config(opts, config); rc != chatlines::kExitOk)
    return rc;

  if (ingest->parsed()) {
    if (config.dataset_path.empty()) {
      std::cerr << "ingest requires --dataset\n";
      return chatlines::kExitFatal;
    }
    return chatlines::cmd_ingest(config);
  }
  if (align->parsed()) return chatlines::cmd_align(config);
  if (survive->parsed()) return chatlines::cmd_survive(config);
  return chatlines::cmd_stats(config);
}
