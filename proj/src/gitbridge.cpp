#include "chatlines/gitbridge.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <map>
#include <thread>

namespace chatlines {

namespace {

constexpr const char* kEmptyTree = "4b825dc642cb6eb9a060e54bf8d69288fbee4904";

std::string trim_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

CommandResult run_command(const std::vector<std::string>& argv) {
  int out_pipe[2], err_pipe[2];
  if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0)
    throw GitError("pipe() failed: " + std::string(std::strerror(errno)));

  const pid_t pid = fork();
  if (pid < 0) throw GitError("fork() failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]); close(out_pipe[1]);
    close(err_pipe[0]); close(err_pipe[1]);
    // Pin the output locale so parsers see stable text.
    setenv("LC_ALL", "C", 1);
    setenv("GIT_PAGER", "cat", 1);
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }

  close(out_pipe[1]);
  close(err_pipe[1]);

  CommandResult result;
  struct pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  std::string* sinks[2] = {&result.out, &result.err};
  bool open_fd[2] = {true, true};
  char buf[8192];
  while (open_fd[0] || open_fd[1]) {
    for (int i = 0; i < 2; ++i) fds[i].events = open_fd[i] ? POLLIN : 0;
    if (poll(fds, 2, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int i = 0; i < 2; ++i) {
      if (!open_fd[i] || !(fds[i].revents & (POLLIN | POLLHUP))) continue;
      const ssize_t n = read(fds[i].fd, buf, sizeof buf);
      if (n > 0) {
        sinks[i]->append(buf, static_cast<std::size_t>(n));
      } else {
        close(fds[i].fd);
        open_fd[i] = false;
      }
    }
  }

  int status = 0;
  waitpid(pid, &status, 0);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

[[noreturn]] void fail(const std::string& what, const CommandResult& r) {
  throw GitError(what + " (exit " + std::to_string(r.exit_code) + "): " +
                 trim_newline(r.err.empty() ? r.out : r.err));
}

int parse_int(std::string_view s, int fallback = 0) {
  int value = fallback;
  std::from_chars(s.data(), s.data() + s.size(), value);
  return value;
}

bool is_hex_sha(std::string_view s) {
  if (s.size() != 40) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

// Splits a set of line numbers into contiguous [a,b] ranges for -L options.
std::vector<std::pair<int, int>> line_ranges(const std::set<int>& lines) {
  std::vector<std::pair<int, int>> ranges;
  for (int n : lines) {
    if (!ranges.empty() && ranges.back().second + 1 == n)
      ranges.back().second = n;
    else
      ranges.emplace_back(n, n);
  }
  return ranges;
}

class FileLock {
 public:
  explicit FileLock(std::filesystem::path path) : path_(std::move(path)) {
    using namespace std::chrono_literals;
    const auto deadline = std::chrono::steady_clock::now() + 120s;
    for (;;) {
      const int fd = open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
      if (fd >= 0) {
        close(fd);
        return;
      }
      if (errno != EEXIST)
        throw GitError("cannot create lock file " + path_.string() + ": " +
                       std::strerror(errno));
      if (std::chrono::steady_clock::now() > deadline)
        throw GitError("timed out waiting for lock " + path_.string());
      std::this_thread::sleep_for(50ms);
    }
  }
  ~FileLock() { unlink(path_.c_str()); }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace

CommandResult run_git(const std::filesystem::path& repo,
                      const std::vector<std::string>& args) {
  std::vector<std::string> argv{"git", "-C", repo.string()};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_command(argv);
}

std::optional<std::string> GitRepo::rev_parse(const std::string& ref) const {
  const CommandResult r = run_git(dir_, {"rev-parse", "--verify", "--quiet", ref});
  if (r.exit_code != 0) return std::nullopt;
  std::string sha = trim_newline(r.out);
  if (!is_hex_sha(sha)) return std::nullopt;
  return sha;
}

std::optional<std::string> GitRepo::merge_base(const std::string& a,
                                               const std::string& b) const {
  const CommandResult r = run_git(dir_, {"merge-base", a, b});
  if (r.exit_code != 0) return std::nullopt;
  return trim_newline(r.out);
}

bool GitRepo::is_ancestor(const std::string& ancestor,
                          const std::string& descendant) const {
  const CommandResult r =
      run_git(dir_, {"merge-base", "--is-ancestor", ancestor, descendant});
  if (r.exit_code == 0) return true;
  if (r.exit_code == 1) return false;
  fail("merge-base --is-ancestor failed", r);
}

std::int64_t GitRepo::commit_time(const std::string& sha) const {
  const CommandResult r = run_git(dir_, {"log", "-1", "--format=%ct", sha});
  if (r.exit_code != 0) fail("cannot read commit time of " + sha, r);
  return std::stoll(trim_newline(r.out));
}

std::string GitRepo::show_file(const std::string& rev, const std::string& path) const {
  const CommandResult r = run_git(dir_, {"show", rev + ":" + path});
  if (r.exit_code != 0) fail("cannot read " + path + " at " + rev, r);
  return r.out;
}

std::string GitRepo::main_branch(const std::optional<std::string>& override_name) const {
  std::vector<std::string> tried;
  auto usable = [&](const std::string& name) -> bool {
    tried.push_back(name);
    return rev_parse(name).has_value();
  };
  if (override_name) {
    if (usable(*override_name)) return *override_name;
  } else {
    const CommandResult r = run_git(dir_, {"symbolic-ref", "--short", "-q", "HEAD"});
    if (r.exit_code == 0) {
      const std::string head = trim_newline(r.out);
      if (!head.empty() && usable(head)) return head;
    }
    if (usable("main")) return "main";
    if (usable("master")) return "master";
  }
  std::string msg = "cannot determine main branch; tried:";
  for (const std::string& t : tried) msg += " " + t;
  throw GitError(msg);
}

std::vector<std::string> GitRepo::first_parent_chain(const std::string& tip) const {
  const CommandResult r = run_git(dir_, {"rev-list", "--first-parent", tip});
  if (r.exit_code != 0) fail("rev-list --first-parent failed", r);
  std::vector<std::string> chain;
  std::size_t pos = 0;
  while (pos < r.out.size()) {
    const std::size_t end = r.out.find('\n', pos);
    const std::size_t len = (end == std::string::npos ? r.out.size() : end) - pos;
    if (len == 40) chain.push_back(r.out.substr(pos, 40));
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return chain;
}

DiffResult parse_unified_diff(std::string_view text) {
  DiffResult result;
  std::string current_old, current_new, current_file;
  HunkImage* hunk = nullptr;
  int old_no = 0, new_no = 0;
  long old_left = 0, new_left = 0;

  auto strip_prefix = [](std::string_view p) -> std::string {
    if (p == "/dev/null") return std::string(p);
    if (p.size() > 2 && (p.substr(0, 2) == "a/" || p.substr(0, 2) == "b/"))
      p.remove_prefix(2);
    return std::string(p);
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, (end == std::string_view::npos ? text.size() : end) - pos);
    pos = (end == std::string_view::npos) ? text.size() + 1 : end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (old_left > 0 || new_left > 0) {
      if (!line.empty() && line[0] == '\\') continue;  // "\ No newline at end of file"
      const char tag = line.empty() ? ' ' : line[0];
      const std::string content(line.empty() ? line : line.substr(1));
      switch (tag) {
        case ' ':
          hunk->pre_lines.push_back({old_no++, content, LineKind::Context});
          hunk->post_lines.push_back({new_no++, content, LineKind::Context});
          --old_left; --new_left;
          break;
        case '-':
          hunk->pre_lines.push_back({old_no++, content, LineKind::Removed});
          --old_left;
          break;
        case '+':
          hunk->post_lines.push_back({new_no++, content, LineKind::Added});
          --new_left;
          break;
        default:
          old_left = new_left = 0;  // malformed body line ends the hunk
          break;
      }
      if (old_left > 0 || new_left > 0) continue;
    }

    if (line.rfind("diff --git ", 0) == 0) {
      current_old.clear();
      current_new.clear();
      current_file.clear();
    } else if (line.rfind("Binary files ", 0) == 0 ||
               line.rfind("GIT binary patch", 0) == 0) {
      ++result.binary_files_skipped;
    } else if (line.rfind("--- ", 0) == 0) {
      current_old = strip_prefix(line.substr(4));
    } else if (line.rfind("+++ ", 0) == 0) {
      current_new = strip_prefix(line.substr(4));
      current_file = current_new != "/dev/null" ? current_new : current_old;
    } else if (line.rfind("@@ -", 0) == 0) {
      const std::size_t plus = line.find(" +", 4);
      const std::size_t close = line.find(" @@", plus);
      if (plus == std::string_view::npos || close == std::string_view::npos) continue;
      std::string_view old_part = line.substr(4, plus - 4);
      std::string_view new_part = line.substr(plus + 2, close - plus - 2);
      auto parse_range = [](std::string_view part, int& start, long& count) {
        const std::size_t comma = part.find(',');
        start = parse_int(part.substr(0, comma));
        count = comma == std::string_view::npos
                    ? 1
                    : parse_int(part.substr(comma + 1));
      };
      parse_range(old_part, old_no, old_left);
      parse_range(new_part, new_no, new_left);
      result.hunks.push_back(HunkImage{current_file, {}, {}});
      hunk = &result.hunks.back();
      if (old_left == 0 && new_left == 0) hunk = nullptr;
    }
  }
  return result;
}

std::vector<BlameLine> parse_blame_porcelain(std::string_view text) {
  std::vector<BlameLine> lines;
  std::map<std::string, std::int64_t> commit_times;
  std::string current_sha;
  int current_line = 0;
  int current_orig = 0;

  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, (end == std::string_view::npos ? text.size() : end) - pos);
    pos = (end == std::string_view::npos) ? text.size() : end + 1;

    if (!line.empty() && line[0] == '\t') {
      BlameLine bl;
      bl.commit = current_sha;
      bl.line_no = current_line;
      bl.orig_line = current_orig;
      bl.content = std::string(line.substr(1));
      if (auto it = commit_times.find(current_sha); it != commit_times.end())
        bl.committer_time = it->second;
      lines.push_back(std::move(bl));
      continue;
    }
    if (line.size() > 41 && is_hex_sha(line.substr(0, 40)) && line[40] == ' ') {
      // "<sha> <orig> <final> [<group size>]"
      current_sha = std::string(line.substr(0, 40));
      std::string_view rest = line.substr(41);
      const std::size_t sp = rest.find(' ');
      if (sp != std::string_view::npos) {
        current_orig = parse_int(rest.substr(0, sp));
        std::string_view final_part = rest.substr(sp + 1);
        const std::size_t sp2 = final_part.find(' ');
        if (sp2 != std::string_view::npos) final_part = final_part.substr(0, sp2);
        current_line = parse_int(final_part);
      }
      continue;
    }
    if (line.rfind("committer-time ", 0) == 0)
      commit_times[current_sha] = std::stoll(std::string(line.substr(15)));
  }
  return lines;
}

namespace {

ResolvedChange resolve_commit(const ChangeRecord& record, const std::string& id,
                              const GitRepo& repo) {
  ResolvedChange rc;
  rc.record = &record;
  const auto head = repo.rev_parse(id + "^{commit}");
  if (!head) throw ChangeUnresolvable("commit not found in clone: " + id);
  rc.head_commit = *head;
  const auto parent = repo.rev_parse(*head + "^");
  rc.base_commit = parent ? *parent : kEmptyTree;
  return rc;
}

ResolvedChange resolve_pull_request(const ChangeRecord& record, const std::string& id,
                                    const std::optional<std::string>& head_sha,
                                    const std::optional<std::string>& base_branch,
                                    const GitRepo& repo, const std::string& main_tip) {
  ResolvedChange rc;
  rc.record = &record;
  std::optional<std::string> head;
  if (head_sha) head = repo.rev_parse(*head_sha);
  if (!head) head = repo.rev_parse("refs/pull/" + id + "/head");
  if (!head) head = repo.rev_parse(id + "^{commit}");
  if (!head)
    throw ChangeUnresolvable("pull request head not found in clone: " + id);
  rc.head_commit = *head;

  std::string target = main_tip;
  if (base_branch) {
    const auto t = repo.rev_parse(*base_branch);
    if (!t) throw ChangeUnresolvable("pull request target branch not found: " + *base_branch);
    target = *t;
  }
  const auto base = repo.merge_base(rc.head_commit, target);
  if (!base)
    throw ChangeUnresolvable("no merge base between " + rc.head_commit + " and target");
  rc.base_commit = *base;
  if (*base == rc.head_commit) {
    // The head is already part of the target history, so the merge base with
    // the current tip is the head itself. Recover the pre-merge base: find the
    // first-parent commit that brought the head in and diff against its first
    // parent, which is the target tip the pull request was merged onto.
    std::string entry;
    for (const std::string& c : repo.first_parent_chain(target)) {
      if (!repo.is_ancestor(rc.head_commit, c)) break;
      entry = c;
    }
    if (entry.empty())
      throw ChangeUnresolvable("cannot locate the merge point of pull request " + id);
    const auto pre_merge = repo.rev_parse(entry + "^");
    if (!pre_merge) {
      rc.base_commit = kEmptyTree;  // the pull request created the history
      return rc;
    }
    const auto merged_base = repo.merge_base(rc.head_commit, *pre_merge);
    if (!merged_base || *merged_base == rc.head_commit)
      throw ChangeUnresolvable("cannot determine a base for merged pull request " + id);
    rc.base_commit = *merged_base;
  }
  return rc;
}

}  // namespace

ResolvedChange resolve_change(const ChangeRecord& record, const GitRepo& repo,
                              const std::string& main_tip) {
  switch (record.category) {
    case Category::Commit:
      return resolve_commit(record, record.change_id, repo);
    case Category::PullRequest:
      return resolve_pull_request(record, record.change_id, record.head_sha,
                                  record.base_branch, repo, main_tip);
    case Category::Issue: {
      if (!record.closed_by)
        throw ChangeUnresolvable("issue " + record.change_id +
                                 " has no closure linkage ('closes' metadata)");
      if (record.closed_by->category == Category::Commit)
        return resolve_commit(record, record.closed_by->change_id, repo);
      if (record.closed_by->category == Category::PullRequest)
        return resolve_pull_request(record, record.closed_by->change_id,
                                    record.head_sha, record.base_branch, repo,
                                    main_tip);
      throw ChangeUnresolvable("issue " + record.change_id +
                               " is closed by another issue");
    }
  }
  throw ChangeUnresolvable("unknown category");
}

bool is_merged(const ResolvedChange& rc, const GitRepo& repo,
               const std::string& main_tip) {
  if (rc.record && rc.record->category == Category::PullRequest &&
      rc.record->merged.value_or(false))
    return true;
  if (rc.head_commit == main_tip) return true;
  return repo.is_ancestor(rc.head_commit, main_tip);
}

DiffResult extract_hunks(const GitRepo& repo, const ResolvedChange& rc, int context) {
  const CommandResult r =
      run_git(repo.dir(), {"diff", "-U" + std::to_string(context), "--no-renames",
                           "--no-color", rc.base_commit, rc.head_commit});
  if (r.exit_code != 0) fail("git diff failed", r);
  return parse_unified_diff(r.out);
}

BlameOutcome reverse_blame(const GitRepo& repo, const std::string& head,
                           const std::string& file, const std::set<int>& lines,
                           const std::string& tip) {
  BlameOutcome outcome;
  if (lines.empty()) return outcome;

  const auto tip_sha = repo.rev_parse(tip);
  if (!tip_sha) throw GitError("cannot resolve tip ref: " + tip);

  std::vector<std::string> base_args;
  for (const auto& [a, b] : line_ranges(lines))
    base_args.push_back("-L" + std::to_string(a) + "," + std::to_string(b));

  const auto head_sha = repo.rev_parse(head);
  if (!head_sha) throw GitError("cannot resolve head ref: " + head);

  std::vector<std::string> fwd_args{"blame", "--porcelain"};
  fwd_args.insert(fwd_args.end(), base_args.begin(), base_args.end());
  fwd_args.insert(fwd_args.end(), {*head_sha, "--", file});
  const CommandResult fwd = run_git(repo.dir(), fwd_args);
  if (fwd.exit_code != 0) {
    outcome.unresolved = lines.size();
    return outcome;
  }
  std::map<int, BlameLine> births;
  for (BlameLine& bl : parse_blame_porcelain(fwd.out)) births[bl.line_no] = std::move(bl);

  // Child lookup along the first-parent chain of tip: chain[i] is the
  // commit that follows chain[i+1].
  const std::vector<std::string> chain = repo.first_parent_chain(*tip_sha);
  std::map<std::string, std::string> child_of;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) child_of[chain[i + 1]] = chain[i];

  std::map<std::string, std::int64_t> time_cache;
  auto commit_time_of = [&](const std::string& sha) {
    auto it = time_cache.find(sha);
    if (it == time_cache.end())
      it = time_cache.emplace(sha, repo.commit_time(sha)).first;
    return it->second;
  };

  // The line-level walk is restricted to the first-parent history of tip, but
  // the head may have entered it through a merge (a merged branch tip). In
  // that case start the walk at the entry commit -- the oldest first-parent
  // commit that contains the head -- and first map each head line number to
  // its position there with an unrestricted reverse blame over the merge
  // range. Lines the merge resolution dropped die at the entry commit.
  std::string start = *head_sha;
  std::map<int, int> start_line_of;  // head line -> line at `start`
  std::map<int, std::string> merged_away;
  for (int l : lines) start_line_of[l] = l;

  if (std::find(chain.begin(), chain.end(), *head_sha) == chain.end()) {
    std::string entry;
    for (const std::string& c : chain) {
      if (!repo.is_ancestor(*head_sha, c)) break;
      entry = c;
    }
    if (entry.empty()) {
      outcome.unresolved = lines.size();
      return outcome;
    }
    std::vector<std::string> map_args{"blame", "--porcelain", "--reverse"};
    map_args.insert(map_args.end(), base_args.begin(), base_args.end());
    map_args.insert(map_args.end(), {*head_sha + ".." + entry, "--", file});
    const CommandResult mapped = run_git(repo.dir(), map_args);
    if (mapped.exit_code != 0) {
      outcome.unresolved = lines.size();
      return outcome;
    }
    std::map<int, BlameLine> by_head_line;
    for (BlameLine& bl : parse_blame_porcelain(mapped.out))
      by_head_line[bl.line_no] = std::move(bl);
    start_line_of.clear();
    for (int l : lines) {
      const auto it = by_head_line.find(l);
      if (it == by_head_line.end()) continue;  // reported as unresolved below
      if (it->second.commit == entry)
        start_line_of[l] = it->second.orig_line;
      else
        merged_away[l] = entry;
    }
    start = entry;
  }

  std::map<int, BlameLine> terminals;  // keyed by line number at `start`
  if (!start_line_of.empty() && start != *tip_sha) {
    std::set<int> start_lines;
    for (const auto& [head_line, start_line] : start_line_of)
      start_lines.insert(start_line);
    std::vector<std::string> rev_args{"blame", "--porcelain", "--reverse",
                                      "--first-parent"};
    for (const auto& [a, b] : line_ranges(start_lines))
      rev_args.push_back("-L" + std::to_string(a) + "," + std::to_string(b));
    rev_args.insert(rev_args.end(), {start + ".." + *tip_sha, "--", file});
    const CommandResult rev = run_git(repo.dir(), rev_args);
    if (rev.exit_code != 0) {
      outcome.unresolved = lines.size();
      return outcome;
    }
    for (BlameLine& bl : parse_blame_porcelain(rev.out))
      terminals[bl.line_no] = std::move(bl);
  }

  for (int line_no : lines) {
    const auto birth_it = births.find(line_no);
    if (birth_it == births.end()) {
      ++outcome.unresolved;
      continue;
    }
    LineFate fate;
    fate.file_path = file;
    fate.line_no = line_no;
    fate.content = birth_it->second.content;
    fate.birth_commit = birth_it->second.commit;
    fate.birth_time = birth_it->second.committer_time != 0
                          ? birth_it->second.committer_time
                          : commit_time_of(fate.birth_commit);

    if (const auto dead_it = merged_away.find(line_no);
        dead_it != merged_away.end()) {
      fate.death_commit = dead_it->second;
      fate.death_time = commit_time_of(dead_it->second);
      outcome.fates.push_back(std::move(fate));
      continue;
    }

    const auto start_it = start_line_of.find(line_no);
    if (start_it == start_line_of.end()) {
      ++outcome.unresolved;
      continue;
    }
    if (start == *tip_sha) {
      fate.censored = true;
      outcome.fates.push_back(std::move(fate));
      continue;
    }
    const auto term_it = terminals.find(start_it->second);
    if (term_it == terminals.end()) {
      ++outcome.unresolved;
      continue;
    }
    const std::string& terminal = term_it->second.commit;
    if (terminal == *tip_sha) {
      fate.censored = true;
    } else {
      const auto child = child_of.find(terminal);
      if (child == child_of.end()) {
        ++outcome.unresolved;
        continue;
      }
      fate.death_commit = child->second;
      fate.death_time = commit_time_of(child->second);
    }
    outcome.fates.push_back(std::move(fate));
  }
  return outcome;
}

std::string CloneCache::url_hash(std::string_view url) {
  // FNV-1a 64, hex encoded. Stable across runs and platforms.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : url) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path CloneCache::ensure(const std::string& url) {
  std::filesystem::create_directories(root_);
  const std::filesystem::path dir = root_ / url_hash(url);
  const std::filesystem::path clone = dir / "repo";
  FileLock lock(root_ / (url_hash(url) + ".lock"));
  if (!std::filesystem::exists(clone / ".git")) {
    std::filesystem::create_directories(dir);
    const CommandResult r =
        run_command({"git", "clone", "--quiet", url, clone.string()});
    if (r.exit_code != 0) fail("git clone failed for " + url, r);
    std::ofstream meta(dir / "meta");
    meta << "url " << url << "\nfetched "
         << std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count()
         << "\n";
  }
  return clone;
}

}  // namespace chatlines
