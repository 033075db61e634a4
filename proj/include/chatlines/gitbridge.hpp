#ifndef CHATLINES_GITBRIDGE_HPP
#define CHATLINES_GITBRIDGE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chatlines/ingest.hpp"

namespace chatlines {

struct GitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a record's change cannot be mapped to commits in the clone.
// Such records are excluded from analysis and counted, never fatal.
struct ChangeUnresolvable : GitError {
  using GitError::GitError;
};

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs `git -C <repo> <args...>` with LC_ALL=C and captures both streams.
CommandResult run_git(const std::filesystem::path& repo,
                      const std::vector<std::string>& args);

enum class LineKind { Context, Removed, Added };

struct HunkLine {
  int line_no = 0;  // in base for pre lines, in head for post lines
  std::string content;
  LineKind kind = LineKind::Context;
};

struct HunkImage {
  std::string file_path;
  std::vector<HunkLine> pre_lines;
  std::vector<HunkLine> post_lines;
};

struct DiffResult {
  std::vector<HunkImage> hunks;
  std::size_t binary_files_skipped = 0;
};

/// Parses `git diff -U<n>` output into per-file hunk images. Binary file
/// markers are counted, not parsed.
DiffResult parse_unified_diff(std::string_view text);

struct BlameLine {
  std::string commit;
  int line_no = 0;    // line number in the blamed (starting) revision
  int orig_line = 0;  // line number in `commit`'s version of the file
  std::int64_t committer_time = 0;
  std::string content;
};

/// Parses `git blame --porcelain` output. For a reverse blame the commit is
/// the last revision on the walked range that still contains the line.
std::vector<BlameLine> parse_blame_porcelain(std::string_view text);

struct ResolvedChange {
  const ChangeRecord* record = nullptr;
  std::string base_commit;
  std::string head_commit;
  bool merged = false;
};

struct LineFate {
  std::string file_path;
  int line_no = 0;  // in head's version of the file
  std::string birth_commit;
  std::int64_t birth_time = 0;
  std::optional<std::string> death_commit;
  std::optional<std::int64_t> death_time;
  bool censored = false;
  std::string content;
};

struct BlameOutcome {
  std::vector<LineFate> fates;
  std::size_t unresolved = 0;
};

class GitRepo {
 public:
  explicit GitRepo(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::optional<std::string> rev_parse(const std::string& ref) const;
  std::optional<std::string> merge_base(const std::string& a, const std::string& b) const;
  bool is_ancestor(const std::string& ancestor, const std::string& descendant) const;
  std::int64_t commit_time(const std::string& sha) const;
  std::string show_file(const std::string& rev, const std::string& path) const;

  /// Resolves the branch survival analysis runs against: an explicit
  /// override, the clone's recorded default head, then `main`, then
  /// `master`. Throws GitError naming the candidates tried.
  std::string main_branch(const std::optional<std::string>& override_name) const;

  /// First-parent commit list from `tip` down to the root, newest first.
  std::vector<std::string> first_parent_chain(const std::string& tip) const;

 private:
  std::filesystem::path dir_;
};

/// Maps a record to (base, head) commits in the clone. Commits diff against
/// their first parent (the empty tree for a root commit); pull requests diff
/// merge-base(head, target)..head; issues resolve through their closure
/// linkage. Throws ChangeUnresolvable.
ResolvedChange resolve_change(const ChangeRecord& record, const GitRepo& repo,
                              const std::string& main_tip);

/// True iff the change's head is an ancestor of (or equal to) the main
/// branch tip. A recorded merge flag on a pull request short-circuits.
bool is_merged(const ResolvedChange& rc, const GitRepo& repo,
               const std::string& main_tip);

DiffResult extract_hunks(const GitRepo& repo, const ResolvedChange& rc,
                         int context = 3);

/// Line lifetimes via reverse blame restricted to the first-parent history
/// of `tip`. For each requested line of `file` as it exists at `head`:
/// birth is the forward-blame origin commit; death is the first-parent
/// child of the last commit that still contains the line, or the line is
/// censored if it survives at `tip`. Lines that cannot be tracked are
/// counted as unresolved.
BlameOutcome reverse_blame(const GitRepo& repo, const std::string& head,
                           const std::string& file, const std::set<int>& lines,
                           const std::string& tip);

/// Content-addressed clone cache: `<root>/<url-hash>/` plus a `meta` file
/// recording the source URL and fetch time. Cloning is serialized per
/// repository by a lock file next to the clone directory.
class CloneCache {
 public:
  explicit CloneCache(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path ensure(const std::string& url);

  static std::string url_hash(std::string_view url);

 private:
  std::filesystem::path root_;
};

}  // namespace chatlines

#endif  // CHATLINES_GITBRIDGE_HPP
