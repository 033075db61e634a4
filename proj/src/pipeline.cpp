#include "chatlines/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <ctime>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "chatlines/alignment.hpp"
#include "chatlines/gitbridge.hpp"
#include "chatlines/ingest.hpp"
#include "chatlines/ioutil.hpp"
#include "chatlines/stats.hpp"
#include "chatlines/survival.hpp"

namespace chatlines {

namespace {

using nlohmann::json;

void sort_records(std::vector<ChangeRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const ChangeRecord& a, const ChangeRecord& b) {
                     return std::tie(a.category, a.repo_url, a.change_id) <
                            std::tie(b.category, b.repo_url, b.change_id);
                   });
}

void update_manifest(const PipelineConfig& config,
                     const std::map<std::string, std::string>& written) {
  const std::filesystem::path path = config.output_dir / kManifestFile;
  json manifest;
  if (std::filesystem::exists(path)) {
    try {
      manifest = json::parse(read_file(path));
    } catch (...) {
      manifest = json::object();
    }
  }
  if (!manifest.contains("files") || !manifest["files"].is_object())
    manifest["files"] = json::object();
  for (const auto& [name, content] : written)
    manifest["files"][name] = sha256_hex(content);
  write_file_atomic(path, manifest.dump(2) + "\n");
}

void write_run_info(const PipelineConfig& config, const std::string& command) {
  json info;
  info["command"] = command;
  info["threshold"] = config.threshold;
  info["diff_context"] = config.diff_context;
  info["finished_unix_time"] = static_cast<std::int64_t>(std::time(nullptr));
  write_file_atomic(config.output_dir / "run_info.json", info.dump(2) + "\n");
}

// Writes a data file and records it for the manifest.
class OutputSet {
 public:
  explicit OutputSet(const PipelineConfig& config) : config_(config) {
    std::filesystem::create_directories(config.output_dir);
  }
  void write(const std::string& name, std::string content) {
    write_file_atomic(config_.output_dir / name, content);
    written_[name] = std::move(content);
  }
  void finish(const std::string& command) {
    update_manifest(config_, written_);
    write_run_info(config_, command);
  }

 private:
  const PipelineConfig& config_;
  std::map<std::string, std::string> written_;
};

void parallel_for(std::size_t n, unsigned jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const unsigned count = std::min<unsigned>(jobs, static_cast<unsigned>(n));
  for (unsigned w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : workers) t.join();
}

std::vector<ChangeRecord> load_stage_records(const PipelineConfig& config) {
  const std::filesystem::path path = config.output_dir / kRecordsFile;
  if (!std::filesystem::exists(path))
    throw DatasetError("missing " + path.string() + "; run the ingest stage first");
  auto records = load_dataset(path);
  sort_records(records);
  return records;
}

std::string bool_field(bool b) { return b ? "1" : "0"; }

struct AlignRow {
  const ChangeRecord* record = nullptr;
  bool skipped = false;
  std::string skip_reason;
  std::string head_commit;
  AlignmentResult result;
  std::vector<std::string> flags;
};

struct LabelRow {
  Category category;
  std::string repo_url, change_id, head_commit, file;
  int line_no = 0;
  bool influenced = false;
  std::string content;
};

std::vector<LabelRow> read_label_rows(const std::filesystem::path& path) {
  const auto rows = parse_csv(read_file(path));
  std::vector<LabelRow> labels;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() < 8) continue;
    LabelRow row;
    row.category = parse_category(r[0]).value_or(Category::Commit);
    row.repo_url = r[1];
    row.change_id = r[2];
    row.head_commit = r[3];
    row.file = r[4];
    row.line_no = std::stoi(r[5]);
    row.influenced = r[6] == "1";
    row.content = r[7];
    labels.push_back(std::move(row));
  }
  return labels;
}

std::string curve_file_name(const std::string& cohort) {
  return "curve_" + cohort + ".json";
}

std::string curve_to_json(const std::string& cohort, const SurvivalCurve* curve) {
  json doc;
  doc["cohort"] = cohort;
  json points = json::array();
  if (curve) {
    for (const auto& [t, s] : curve_points(*curve))
      points.push_back(json::array({t, s}));
  }
  doc["points"] = std::move(points);
  return doc.dump(2) + "\n";
}

std::string ci_field(const std::optional<MedianCI>& ci, int part) {
  if (!ci) return "";
  switch (part) {
    case 0: return format_double(ci->median);
    case 1: return format_double(ci->lo);
    default: return format_double(ci->hi);
  }
}

}  // namespace

PipelineConfig load_config_file(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot parse config file " + path.string() + ": " +
                             e.what());
  }
  PipelineConfig config;
  for (const auto& [key, value] : doc.items()) {
    if (key == "dataset") config.dataset_path = value.get<std::string>();
    else if (key == "cache") config.clone_cache_dir = value.get<std::string>();
    else if (key == "out") config.output_dir = value.get<std::string>();
    else if (key == "threshold") config.threshold = value.get<double>();
    else if (key == "context") config.diff_context = value.get<int>();
    else if (key == "main_branch") config.main_branch_override = value.get<std::string>();
    else if (key == "jobs") config.parallelism = value.get<unsigned>();
    else throw std::runtime_error("unknown config key: " + key);
  }
  if (config.threshold <= 0.0 || config.threshold > 1.0)
    throw std::runtime_error("threshold must be in (0, 1]");
  if (config.parallelism < 1)
    throw std::runtime_error("jobs must be a positive integer");
  return config;
}

int cmd_ingest(const PipelineConfig& config) {
  std::vector<ChangeRecord> records;
  try {
    records = load_dataset(config.dataset_path);
  } catch (const DatasetError& e) {
    std::cerr << "ingest: " << e.what() << "\n";
    return kExitFatal;
  }
  sort_records(records);
  const DatasetCounts counts = count_statuses(records);

  OutputSet out(config);
  out.write(kRecordsFile, dataset_to_string(records));
  json report;
  report["entries"] = records.size();
  report["live"] = counts.live;
  report["expired_link"] = counts.expired_link;
  report["malformed"] = counts.malformed;
  out.write(kIngestReportFile, report.dump(2) + "\n");
  out.finish("ingest");

  std::cerr << "ingest: " << records.size() << " entries (" << counts.live
            << " live, " << counts.expired_link << " expired_link, "
            << counts.malformed << " malformed)\n";
  return counts.malformed > 0 ? kExitCompletedWithSkips : kExitOk;
}

int cmd_align(const PipelineConfig& config) {
  std::vector<ChangeRecord> records;
  try {
    records = load_stage_records(config);
  } catch (const std::exception& e) {
    std::cerr << "align: " << e.what() << "\n";
    return kExitFatal;
  }

  CloneCache cache(config.clone_cache_dir);
  std::vector<AlignRow> rows(records.size());
  std::mutex log_mutex;

  parallel_for(records.size(), config.parallelism, [&](std::size_t i) {
    AlignRow& row = rows[i];
    row.record = &records[i];
    const ChangeRecord& rec = records[i];
    if (rec.status != RecordStatus::Live) {
      row.skipped = true;
      row.skip_reason = to_string(rec.status);
      return;
    }
    try {
      const GitRepo repo(cache.ensure(rec.repo_url));
      const std::string branch = repo.main_branch(config.main_branch_override);
      const auto tip = repo.rev_parse(branch);
      if (!tip) throw GitError("cannot resolve branch tip: " + branch);
      ResolvedChange rc = resolve_change(rec, repo, *tip);
      rc.merged = is_merged(rc, repo, *tip);
      if (!rc.merged) {
        row.skipped = true;
        row.skip_reason = "not_merged";
        return;
      }
      row.head_commit = rc.head_commit;
      const DiffResult diff = extract_hunks(repo, rc, config.diff_context);
      if (diff.binary_files_skipped > 0)
        row.flags.push_back("binary_files_skipped=" +
                            std::to_string(diff.binary_files_skipped));
      row.result = compute_alignment(diff.hunks, rec, config.threshold);
      if (row.result.degenerate_pre) row.flags.push_back("degenerate_pre");
      if (row.result.degenerate_post) row.flags.push_back("degenerate_post");
    } catch (const ChangeUnresolvable& e) {
      row.skipped = true;
      row.skip_reason = std::string("unresolvable: ") + e.what();
    } catch (const GitError& e) {
      row.skipped = true;
      row.skip_reason = std::string("git_error: ") + e.what();
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cerr << "align: " << rec.repo_url << " " << rec.change_id << ": "
                << e.what() << "\n";
    }
  });

  std::string alignment_csv = csv_row(
      {"category", "repo_url", "change_id", "rho_pre", "rho_post", "bin_pre",
       "bin_post", "matched_pre", "eligible_pre", "matched_post",
       "eligible_post", "flags"});
  std::string skipped_csv = csv_row({"category", "repo_url", "change_id", "reason"});
  std::string labels_csv =
      csv_row({"category", "repo_url", "change_id", "head_commit", "file",
               "line_no", "influenced", "content"});

  std::size_t skipped = 0;
  for (const AlignRow& row : rows) {
    const ChangeRecord& rec = *row.record;
    if (row.skipped) {
      ++skipped;
      skipped_csv += csv_row(
          {to_string(rec.category), rec.repo_url, rec.change_id, row.skip_reason});
      continue;
    }
    std::string flags;
    for (const std::string& f : row.flags) {
      if (!flags.empty()) flags += ';';
      flags += f;
    }
    const AlignmentResult& a = row.result;
    alignment_csv += csv_row(
        {to_string(rec.category), rec.repo_url, rec.change_id,
         format_double(a.rho_pre), format_double(a.rho_post),
         to_string(a.bin_pre), to_string(a.bin_post),
         std::to_string(a.matched_pre), std::to_string(a.eligible_pre),
         std::to_string(a.matched_post), std::to_string(a.eligible_post), flags});

    std::vector<LineLabel> labels = a.post_lines;
    std::sort(labels.begin(), labels.end(),
              [](const LineLabel& x, const LineLabel& y) {
                return std::tie(x.file, x.line_no) < std::tie(y.file, y.line_no);
              });
    for (const LineLabel& l : labels)
      labels_csv += csv_row({to_string(rec.category), rec.repo_url, rec.change_id,
                             row.head_commit, l.file, std::to_string(l.line_no),
                             bool_field(l.influenced), l.content});
  }

  OutputSet out(config);
  out.write(kAlignmentFile, std::move(alignment_csv));
  out.write(kSkippedFile, std::move(skipped_csv));
  out.write(kLineLabelsFile, std::move(labels_csv));
  out.finish("align");

  std::cerr << "align: " << rows.size() - skipped << " changes aligned, "
            << skipped << " skipped\n";
  return skipped > 0 ? kExitCompletedWithSkips : kExitOk;
}

int cmd_survive(const PipelineConfig& config) {
  std::vector<LabelRow> labels;
  try {
    labels = read_label_rows(config.output_dir / kLineLabelsFile);
  } catch (const std::exception& e) {
    std::cerr << "survive: " << e.what() << "\n";
    return kExitFatal;
  }

  CloneCache cache(config.clone_cache_dir);

  struct FileGroup {
    std::vector<const LabelRow*> rows;
  };
  // (repo, head, file) -> labeled lines; processed in sorted key order.
  std::map<std::tuple<std::string, std::string, std::string>, FileGroup> groups;
  for (const LabelRow& row : labels)
    groups[{row.repo_url, row.head_commit, row.file}].rows.push_back(&row);

  struct DurationRow {
    const LabelRow* label = nullptr;
    DurationSample sample;
  };
  std::vector<DurationRow> duration_rows;
  std::size_t unresolved = 0, clamped = 0;

  std::map<std::string, std::pair<std::string, std::int64_t>> repo_tips;
  try {
    for (auto& [key, group] : groups) {
      const auto& [repo_url, head, file] = key;
      const GitRepo repo(cache.ensure(repo_url));
      auto tip_it = repo_tips.find(repo_url);
      if (tip_it == repo_tips.end()) {
        const std::string branch = repo.main_branch(config.main_branch_override);
        const auto tip = repo.rev_parse(branch);
        if (!tip) throw GitError("cannot resolve branch tip: " + branch);
        tip_it = repo_tips.emplace(repo_url,
                                   std::make_pair(*tip, repo.commit_time(*tip)))
                     .first;
      }
      const auto& [tip_sha, tip_time] = tip_it->second;

      std::set<int> line_nos;
      for (const LabelRow* row : group.rows) line_nos.insert(row->line_no);
      const BlameOutcome outcome =
          reverse_blame(repo, head, file, line_nos, tip_sha);
      unresolved += outcome.unresolved;

      std::map<int, const LineFate*> by_line;
      for (const LineFate& f : outcome.fates) by_line[f.line_no] = &f;
      std::vector<LabeledFate> fates;
      std::vector<const LabelRow*> fate_labels;
      for (const LabelRow* row : group.rows) {
        const auto it = by_line.find(row->line_no);
        if (it == by_line.end()) continue;
        fates.push_back({*it->second, row->influenced, row->category});
        fate_labels.push_back(row);
      }
      const SampleBuild build = build_samples(fates, tip_time);
      clamped += build.clamped;
      for (std::size_t i = 0; i < build.samples.size(); ++i)
        duration_rows.push_back({fate_labels[i], build.samples[i]});
    }
  } catch (const GitError& e) {
    std::cerr << "survive: " << e.what() << "\n";
    return kExitFatal;
  }

  std::sort(duration_rows.begin(), duration_rows.end(),
            [](const DurationRow& a, const DurationRow& b) {
              return std::tie(a.label->category, a.label->repo_url,
                              a.label->change_id, a.label->file,
                              a.label->line_no) <
                     std::tie(b.label->category, b.label->repo_url,
                              b.label->change_id, b.label->file,
                              b.label->line_no);
            });

  std::string durations_csv =
      csv_row({"category", "repo_url", "change_id", "file", "line_no",
               "influenced", "duration_days", "event"});
  std::vector<DurationSample> samples;
  for (const DurationRow& row : duration_rows) {
    samples.push_back(row.sample);
    durations_csv += csv_row(
        {to_string(row.label->category), row.label->repo_url,
         row.label->change_id, row.label->file, std::to_string(row.label->line_no),
         bool_field(row.label->influenced),
         format_double(row.sample.duration_days), bool_field(row.sample.event)});
  }

  OutputSet out(config);
  out.write(kDurationsFile, std::move(durations_csv));

  auto emit_curve = [&](const std::string& cohort,
                        const std::vector<DurationSample>& cohort_samples) {
    if (cohort_samples.empty()) {
      std::cerr << "survive: cohort '" << cohort << "' is empty\n";
      out.write(curve_file_name(cohort), curve_to_json(cohort, nullptr));
      return;
    }
    const SurvivalCurve curve = kaplan_meier(cohort_samples);
    out.write(curve_file_name(cohort), curve_to_json(cohort, &curve));
  };

  auto subset = [&](auto pred) {
    std::vector<DurationSample> s;
    for (const DurationSample& d : samples)
      if (pred(d)) s.push_back(d);
    return s;
  };
  emit_curve("all", samples);
  emit_curve("influenced", subset([](const DurationSample& d) { return d.influenced; }));
  emit_curve("uninfluenced",
             subset([](const DurationSample& d) { return !d.influenced; }));
  for (Category cat : {Category::Commit, Category::PullRequest, Category::Issue})
    emit_curve(to_string(cat),
               subset([cat](const DurationSample& d) { return d.category == cat; }));
  out.finish("survive");

  if (clamped > 0)
    std::cerr << "survive: " << clamped << " negative durations clamped to 0\n";
  std::cerr << "survive: " << samples.size() << " lines tracked, " << unresolved
            << " unresolved\n";
  return unresolved > 0 ? kExitCompletedWithSkips : kExitOk;
}

int cmd_stats(const PipelineConfig& config) {
  std::vector<ChangeRecord> records;
  std::vector<std::vector<std::string>> align_rows;
  try {
    records = load_stage_records(config);
    const std::filesystem::path align_path = config.output_dir / kAlignmentFile;
    if (!std::filesystem::exists(align_path))
      throw StatsError("missing " + align_path.string() +
                       "; run the align stage first");
    align_rows = parse_csv(read_file(align_path));
  } catch (const std::exception& e) {
    std::cerr << "stats: " << e.what() << "\n";
    return kExitFatal;
  }

  std::map<std::tuple<std::string, std::string, std::string>, const ChangeRecord*>
      record_index;
  for (const ChangeRecord& r : records)
    record_index[{std::string(to_string(r.category)), r.repo_url, r.change_id}] = &r;

  auto parse_bin = [](const std::string& s) {
    if (s == "q1") return Bin::Q1;
    if (s == "q2") return Bin::Q2;
    if (s == "q3") return Bin::Q3;
    if (s == "q4") return Bin::Q4;
    return Bin::NoImpact;
  };

  std::vector<ChangeStats> changes;
  for (std::size_t i = 1; i < align_rows.size(); ++i) {
    const auto& r = align_rows[i];
    if (r.size() < 11) continue;
    ChangeStats cs;
    cs.category = parse_category(r[0]).value_or(Category::Commit);
    cs.rho_pre = std::stod(r[3]);
    cs.rho_post = std::stod(r[4]);
    cs.bin_pre = parse_bin(r[5]);
    cs.bin_post = parse_bin(r[6]);
    if (const auto it = record_index.find({r[0], r[1], r[2]});
        it != record_index.end()) {
      const ChangeRecord& rec = *it->second;
      cs.conversations = rec.conversations.size();
      for (const Conversation& conv : rec.conversations) {
        cs.prompts_per_conversation.push_back(conv.turns.size());
        for (const Turn& turn : conv.turns) {
          cs.prompt_tokens += token_count(turn.prompt);
          cs.answer_tokens += token_count(turn.answer);
        }
      }
    }
    changes.push_back(std::move(cs));
  }

  // Durations are optional; the summary simply omits survival medians when
  // the survive stage has not run.
  std::vector<DurationSample> durations;
  const std::filesystem::path durations_path = config.output_dir / kDurationsFile;
  if (std::filesystem::exists(durations_path)) {
    const auto rows = parse_csv(read_file(durations_path));
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.size() < 8) continue;
      DurationSample d;
      d.category = parse_category(r[0]).value_or(Category::Commit);
      d.influenced = r[5] == "1";
      d.duration_days = std::stod(r[6]);
      d.event = r[7] == "1";
      durations.push_back(d);
    }
  }

  const std::vector<CategorySummary> summaries =
      summarize_categories(changes, durations);

  std::string summary_csv = csv_row(
      {"category", "changes", "conversations_median", "conversations_lo",
       "conversations_hi", "prompts_per_conversation_median",
       "prompts_per_conversation_lo", "prompts_per_conversation_hi",
       "prompt_tokens_median", "prompt_tokens_lo", "prompt_tokens_hi",
       "answer_tokens_median", "answer_tokens_lo", "answer_tokens_hi",
       "bin_pre_no_impact", "bin_pre_q1", "bin_pre_q2", "bin_pre_q3",
       "bin_pre_q4", "bin_post_no_impact", "bin_post_q1", "bin_post_q2",
       "bin_post_q3", "bin_post_q4", "median_survival_all",
       "median_survival_influenced"});
  for (const CategorySummary& s : summaries) {
    std::vector<std::string> fields{to_string(s.category),
                                    std::to_string(s.changes)};
    for (const auto* ci :
         {&s.conversations_per_change, &s.prompts_per_conversation,
          &s.prompt_tokens, &s.answer_tokens})
      for (int part = 0; part < 3; ++part) fields.push_back(ci_field(*ci, part));
    for (std::size_t b = 0; b < 5; ++b)
      fields.push_back(std::to_string(s.bins_pre[b]));
    for (std::size_t b = 0; b < 5; ++b)
      fields.push_back(std::to_string(s.bins_post[b]));
    fields.push_back(s.median_survival_all ? format_double(*s.median_survival_all)
                                           : "");
    fields.push_back(s.median_survival_influenced
                         ? format_double(*s.median_survival_influenced)
                         : "");
    summary_csv += csv_row(fields);
  }

  // Pairwise KS on the rho marginals, one row per (category pair, side).
  std::map<Category, std::vector<double>> rho_pre, rho_post;
  for (const ChangeStats& cs : changes) {
    rho_pre[cs.category].push_back(cs.rho_pre);
    rho_post[cs.category].push_back(cs.rho_post);
  }
  std::string ks_csv = csv_row(
      {"category_a", "category_b", "side", "d", "p_value", "m", "n", "decision"});
  const std::pair<Category, Category> pairs[] = {
      {Category::Commit, Category::PullRequest},
      {Category::Commit, Category::Issue},
      {Category::PullRequest, Category::Issue}};
  for (const auto& [a, b] : pairs) {
    for (const char* side : {"pre", "post"}) {
      auto& source = side == std::string("pre") ? rho_pre : rho_post;
      const std::vector<double>& xs = source[a];
      const std::vector<double>& ys = source[b];
      if (xs.empty() || ys.empty()) {
        ks_csv += csv_row({to_string(a), to_string(b), side, "", "",
                           std::to_string(xs.size()), std::to_string(ys.size()),
                           "not_applicable"});
        continue;
      }
      const KsResult ks = ks_two_sample(xs, ys);
      ks_csv += csv_row({to_string(a), to_string(b), side,
                         format_double(ks.statistic_d), format_double(ks.p_value),
                         std::to_string(ks.m), std::to_string(ks.n),
                         ks.p_value < 0.05 ? "reject" : "fail_to_reject"});
    }
  }

  OutputSet out(config);
  out.write(kSummaryFile, std::move(summary_csv));
  out.write(kKsFile, std::move(ks_csv));
  out.finish("stats");

  std::cerr << "stats: " << changes.size() << " changes summarized\n";
  return kExitOk;
}

}  // namespace chatlines
