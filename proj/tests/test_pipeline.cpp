#include "chatlines/pipeline.hpp"

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "chatlines/ingest.hpp"
#include "chatlines/ioutil.hpp"
#include "fixtures.hpp"

using namespace chatlines;
using nlohmann::json;

namespace {

constexpr long long kT0 = 1700000000;
constexpr long long kDay = 86400;

// A scripted repository plus a matching dataset:
//   C1 (T0)      base.txt
//   A1 (T0+12h)  dead.txt on a never-merged branch
//   C2 (T0+1d)   adds gen.txt (4 lines), linked to a commit conversation
//   F1 (T0+2d)   adds feat.txt (2 lines) on branch `feature`
//   M  (T0+3d)   merge --no-ff feature, linked to a pull-request conversation
//   C4 (T0+4d)   deletes gen.txt lines 2-3
//   C5 (T0+5d)   tip
struct PipelineFixture {
  fixtures::TempDir tmp;
  fixtures::GitFixture repo{tmp.path() / "origin"};
  std::string c2, f1, a1;
  PipelineConfig config;

  PipelineFixture() {
    repo.write("base.txt", "hello\n");
    repo.commit_all("c1", kT0);

    repo.checkout("dead", true);
    repo.write("dead.txt", "abandoned\n");
    a1 = repo.commit_all("a1", kT0 + kDay / 2);
    repo.checkout("main");

    repo.write("gen.txt",
               "int alpha = 1;\nint beta = 2;\nint gamma = 3;\nint delta = 4;\n");
    c2 = repo.commit_all("c2", kT0 + kDay);

    repo.checkout("feature", true);
    repo.write("feat.txt", "void feature_one();\nvoid feature_two();\n");
    f1 = repo.commit_all("f1", kT0 + 2 * kDay);
    repo.checkout("main");
    repo.merge("feature", "merge feature", kT0 + 3 * kDay);

    repo.write("gen.txt", "int alpha = 1;\nint delta = 4;\n");
    repo.commit_all("c4", kT0 + 4 * kDay);
    repo.write("base.txt", "hello\nworld\n");
    repo.commit_all("c5", kT0 + 5 * kDay);

    write_dataset_file();

    config.dataset_path = tmp.path() / "dataset.json";
    config.clone_cache_dir = tmp.path() / "cache";
    config.output_dir = tmp.path() / "out";
  }

  void write_dataset_file() const {
    const std::string url = repo.repo().string();
    json commit_entry = {
        {"category", "commit"},
        {"repo_url", url},
        {"change_id", c2},
        {"conversations",
         json::array(
             {{{"conversation_id", "conv-commit"},
               {"turns",
                json::array(
                    {{{"prompt", "please add the counters"},
                      {"answer", "sure, here they are"},
                      {"listings",
                       json::array({{{"language", "c"},
                                     {"content",
                                      "int alpha = 1;\nint beta = 2;\nint "
                                      "gamma = 3;\nint delta = 4;\n"}}})}}})}}})}};
    json pr_entry = {
        {"category", "pull_request"},
        {"repo_url", url},
        {"change_id", "1"},
        {"head_sha", f1},
        {"base_branch", "main"},
        {"merged", true},
        {"conversations",
         json::array(
             {{{"conversation_id", "conv-pr"},
               {"turns",
                json::array(
                    {{{"prompt", "declare the feature entry points"},
                      {"answer", "declarations below"},
                      {"listings",
                       json::array(
                           {{{"language", nullptr},
                             {"content",
                              "void feature_one();\nvoid feature_two();\n"}}})}}})}}})}};
    json unmerged_entry = {
        {"category", "commit"},
        {"repo_url", url},
        {"change_id", a1},
        {"conversations",
         json::array(
             {{{"conversation_id", "conv-dead"},
               {"turns", json::array({{{"prompt", "p"}, {"answer", "a"}}})}}})}};
    json expired_entry = {{"category", "commit"},
                          {"repo_url", url},
                          {"change_id", "deadbeef"},
                          {"conversations", nullptr}};
    json malformed_entry = {{"category", "commit"},
                            {"repo_url", url},
                            {"change_id", ""}};

    json doc;
    doc["schema_version"] = "1";
    doc["entries"] = json::array(
        {commit_entry, pr_entry, unmerged_entry, expired_entry, malformed_entry});
    std::ofstream(tmp.path() / "dataset.json") << doc.dump(2) << "\n";
  }

  std::string out_file(const char* name) const {
    return read_file(config.output_dir / name);
  }
};

std::vector<std::vector<std::string>> data_rows(const std::string& csv) {
  auto rows = parse_csv(csv);
  REQUIRE(!rows.empty());
  rows.erase(rows.begin());  // drop the header
  return rows;
}

}  // namespace

TEST_CASE("load_config_file") {
  fixtures::TempDir tmp;
  const auto path = tmp.path() / "config.json";

  std::ofstream(path) << R"({"dataset": "d.json", "cache": "c", "out": "o",
                            "threshold": 0.7, "context": 2, "jobs": 4,
                            "main_branch": "trunk"})";
  const PipelineConfig config = load_config_file(path);
  CHECK(config.dataset_path == "d.json");
  CHECK(config.clone_cache_dir == "c");
  CHECK(config.output_dir == "o");
  CHECK(config.threshold == 0.7);
  CHECK(config.diff_context == 2);
  CHECK(config.parallelism == 4);
  CHECK(config.main_branch_override == "trunk");

  std::ofstream(path) << R"({"dataset": "d.json", "bogus": 1})";
  CHECK_THROWS_WITH_AS(load_config_file(path), "unknown config key: bogus",
                       std::runtime_error);

  std::ofstream(path) << R"({"threshold": 0.0})";
  CHECK_THROWS_AS(load_config_file(path), std::runtime_error);

  std::ofstream(path) << "not json";
  CHECK_THROWS_AS(load_config_file(path), std::runtime_error);
}

TEST_CASE("stage ordering and fatal exits") {
  fixtures::TempDir tmp;
  PipelineConfig config;
  config.dataset_path = tmp.path() / "dataset.json";
  config.clone_cache_dir = tmp.path() / "cache";
  config.output_dir = tmp.path() / "out";

  SUBCASE("missing dataset file is fatal") {
    CHECK(cmd_ingest(config) == kExitFatal);
  }

  SUBCASE("schema version mismatch is fatal") {
    std::ofstream(config.dataset_path)
        << R"({"schema_version": "2", "entries": []})";
    CHECK(cmd_ingest(config) == kExitFatal);
  }

  SUBCASE("align and stats require earlier stages") {
    CHECK(cmd_align(config) == kExitFatal);
    CHECK(cmd_stats(config) == kExitFatal);
  }
}

TEST_CASE("end-to-end pipeline") {
  PipelineFixture fx;

  // --- ingest ---
  CHECK(cmd_ingest(fx.config) == kExitCompletedWithSkips);  // one malformed row
  const json report = json::parse(fx.out_file(kIngestReportFile));
  CHECK(report["entries"] == 5);
  CHECK(report["live"] == 3);
  CHECK(report["expired_link"] == 1);
  CHECK(report["malformed"] == 1);

  // records.json round-trips through the dataset loader, sorted.
  const auto records = load_dataset(fx.config.output_dir / kRecordsFile);
  REQUIRE(records.size() == 5);
  for (std::size_t i = 1; i < records.size(); ++i)
    CHECK(records[i - 1].category <= records[i].category);

  // --- align ---
  CHECK(cmd_align(fx.config) == kExitCompletedWithSkips);

  const auto align_rows = data_rows(fx.out_file(kAlignmentFile));
  REQUIRE(align_rows.size() == 2);
  const auto& commit_row = align_rows[0];
  CHECK(commit_row[0] == "commit");
  CHECK(commit_row[2] == fx.c2);
  CHECK(commit_row[4] == "1");        // rho_post
  CHECK(commit_row[6] == "q4");       // bin_post
  CHECK(commit_row[9] == "4");        // matched_post
  CHECK(commit_row[10] == "4");       // eligible_post
  CHECK(commit_row[5] == "no_impact");  // pure addition: nothing on the pre side
  CHECK(commit_row[11].find("degenerate_pre") != std::string::npos);
  const auto& pr_row = align_rows[1];
  CHECK(pr_row[0] == "pull_request");
  CHECK(pr_row[4] == "1");
  CHECK(pr_row[9] == "2");

  const auto skipped_rows = data_rows(fx.out_file(kSkippedFile));
  REQUIRE(skipped_rows.size() == 3);
  std::map<std::string, std::string> reasons;
  for (const auto& row : skipped_rows) reasons[row[2]] = row[3];
  CHECK(reasons[fx.a1] == "not_merged");
  CHECK(reasons["deadbeef"] == "expired_link");
  CHECK(reasons[""] == "malformed");

  const auto label_rows = data_rows(fx.out_file(kLineLabelsFile));
  REQUIRE(label_rows.size() == 6);
  for (const auto& row : label_rows) CHECK(row[6] == "1");  // all influenced
  CHECK(label_rows[0][4] == "gen.txt");
  CHECK(label_rows[0][3] == fx.c2);
  CHECK(label_rows[4][4] == "feat.txt");
  CHECK(label_rows[4][3] == fx.f1);

  // --- survive ---
  CHECK(cmd_survive(fx.config) == kExitOk);

  const auto duration_rows = data_rows(fx.out_file(kDurationsFile));
  REQUIRE(duration_rows.size() == 6);
  // gen.txt lines 1 and 4 survive at the tip; 2 and 3 die at C4.
  const std::vector<std::pair<std::string, std::string>> expected = {
      {"4", "0"}, {"3", "1"}, {"3", "1"}, {"4", "0"}, {"3", "0"}, {"3", "0"}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(duration_rows[i][6] == expected[i].first);
    CHECK(duration_rows[i][7] == expected[i].second);
  }
  CHECK(duration_rows[0][0] == "commit");
  CHECK(duration_rows[4][0] == "pull_request");

  const json curve_all = json::parse(fx.out_file("curve_all.json"));
  REQUIRE(curve_all["points"].size() == 2);
  CHECK(curve_all["points"][0][0] == 0.0);
  CHECK(curve_all["points"][0][1] == 1.0);
  CHECK(curve_all["points"][1][0] == 3.0);
  CHECK(curve_all["points"][1][1].get<double>() ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  const json curve_commit = json::parse(fx.out_file("curve_commit.json"));
  REQUIRE(curve_commit["points"].size() == 2);
  CHECK(curve_commit["points"][1][1].get<double>() == doctest::Approx(0.5));

  // All labeled lines here are influenced, so the cohorts coincide.
  CHECK(json::parse(fx.out_file("curve_influenced.json"))["points"] ==
        curve_all["points"]);
  CHECK(json::parse(fx.out_file("curve_uninfluenced.json"))["points"].empty());
  CHECK(json::parse(fx.out_file("curve_issue.json"))["points"].empty());

  // --- stats ---
  CHECK(cmd_stats(fx.config) == kExitOk);

  const auto summary_rows = data_rows(fx.out_file(kSummaryFile));
  REQUIRE(summary_rows.size() == 3);
  const auto& commit_summary = summary_rows[0];
  CHECK(commit_summary[0] == "commit");
  CHECK(commit_summary[1] == "1");   // changes
  CHECK(commit_summary[2] == "1");   // conversations median
  CHECK(commit_summary[23] == "1");  // bin_post_q4
  CHECK(commit_summary[24] == "3");  // median survival, all lines
  CHECK(commit_summary[25] == "3");  // median survival, influenced lines
  CHECK(summary_rows[2][0] == "issue");
  CHECK(summary_rows[2][1] == "0");
  CHECK(summary_rows[2][24] == "");

  const auto ks_rows = data_rows(fx.out_file(kKsFile));
  REQUIRE(ks_rows.size() == 6);
  // commit vs pull_request: both have one change with identical marginals.
  CHECK(ks_rows[0][3] == "0");
  CHECK(ks_rows[0][7] == "fail_to_reject");
  CHECK(ks_rows[1][7] == "fail_to_reject");
  for (std::size_t i = 2; i < 6; ++i) CHECK(ks_rows[i][7] == "not_applicable");

  // --- determinism ---
  const std::string manifest = fx.out_file(kManifestFile);
  const std::string alignment = fx.out_file(kAlignmentFile);
  CHECK(cmd_align(fx.config) == kExitCompletedWithSkips);
  CHECK(cmd_survive(fx.config) == kExitOk);
  CHECK(cmd_stats(fx.config) == kExitOk);
  CHECK(fx.out_file(kManifestFile) == manifest);
  CHECK(fx.out_file(kAlignmentFile) == alignment);

  // The manifest covers every data file but not the run metadata sidecar.
  const json manifest_doc = json::parse(manifest);
  CHECK(manifest_doc["files"].contains(kAlignmentFile));
  CHECK(manifest_doc["files"].contains("curve_all.json"));
  CHECK_FALSE(manifest_doc["files"].contains("run_info.json"));
}

TEST_CASE("parallel align matches serial output") {
  PipelineFixture fx;
  REQUIRE(cmd_ingest(fx.config) == kExitCompletedWithSkips);
  REQUIRE(cmd_align(fx.config) == kExitCompletedWithSkips);
  const std::string serial = fx.out_file(kAlignmentFile);
  const std::string serial_labels = fx.out_file(kLineLabelsFile);

  fx.config.parallelism = 4;
  REQUIRE(cmd_align(fx.config) == kExitCompletedWithSkips);
  CHECK(fx.out_file(kAlignmentFile) == serial);
  CHECK(fx.out_file(kLineLabelsFile) == serial_labels);
}
