#ifndef CHATLINES_PIPELINE_HPP
#define CHATLINES_PIPELINE_HPP

#include <filesystem>
#include <optional>
#include <string>

namespace chatlines {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCompletedWithSkips = 1;
inline constexpr int kExitFatal = 2;

struct PipelineConfig {
  std::filesystem::path dataset_path;
  std::filesystem::path clone_cache_dir;
  std::filesystem::path output_dir;
  double threshold = 0.6;
  int diff_context = 3;
  std::optional<std::string> main_branch_override;
  unsigned parallelism = 1;
};

/// Reads a JSON config file mirroring PipelineConfig. Unknown keys are
/// rejected. Values set on the returned struct are later overridable by
/// CLI flags.
PipelineConfig load_config_file(const std::filesystem::path& path);

// Stage outputs, all under output_dir. Stages communicate only through
// these files; MANIFEST.json records a sha256 per data file. Run metadata
// (timings) goes to the run_info.json sidecar, which is not listed in the
// manifest so reruns stay byte-identical.
inline constexpr const char* kRecordsFile = "records.json";
inline constexpr const char* kIngestReportFile = "ingest_report.json";
inline constexpr const char* kAlignmentFile = "alignment.csv";
inline constexpr const char* kSkippedFile = "alignment_skipped.csv";
inline constexpr const char* kLineLabelsFile = "line_labels.csv";
inline constexpr const char* kDurationsFile = "durations.csv";
inline constexpr const char* kSummaryFile = "summary.csv";
inline constexpr const char* kKsFile = "ks.csv";
inline constexpr const char* kManifestFile = "MANIFEST.json";

int cmd_ingest(const PipelineConfig& config);
int cmd_align(const PipelineConfig& config);
int cmd_survive(const PipelineConfig& config);
int cmd_stats(const PipelineConfig& config);

}  // namespace chatlines

#endif  // CHATLINES_PIPELINE_HPP
