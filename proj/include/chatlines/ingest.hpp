#ifndef CHATLINES_INGEST_HPP
#define CHATLINES_INGEST_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chatlines {

enum class Category { Commit, PullRequest, Issue };

enum class RecordStatus { Live, ExpiredLink, Malformed };

const char* to_string(Category c);
const char* to_string(RecordStatus s);
std::optional<Category> parse_category(std::string_view s);

struct CodeListing {
  std::optional<std::string> language;
  std::string content;
};

struct Turn {
  std::string prompt;
  std::string answer;
  std::vector<CodeListing> listings;
};

struct Conversation {
  std::string conversation_id;
  std::vector<Turn> turns;
};

// Closure linkage for issue records: the commit or pull request that closed
// the issue. Must be supplied in the dataset; the toolkit never queries an
// issue tracker.
struct ChangeLink {
  Category category = Category::Commit;
  std::string change_id;
};

struct ChangeRecord {
  Category category = Category::Commit;
  std::string repo_url;
  std::string change_id;
  std::vector<Conversation> conversations;
  RecordStatus status = RecordStatus::Live;
  std::string diagnostic;  // set for Malformed records

  // Optional resolution metadata carried by the dataset.
  std::optional<std::string> head_sha;     // pull request head commit
  std::optional<std::string> base_branch;  // pull request target branch
  std::optional<bool> merged;              // recorded merge flag
  std::optional<ChangeLink> closed_by;     // issue closure linkage
};

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetCounts {
  std::size_t live = 0;
  std::size_t expired_link = 0;
  std::size_t malformed = 0;
};

/// Loads a normalized dataset file (JSON, schema_version "1"). Entries whose
/// conversation payload is null are kept with status ExpiredLink; entries
/// that fail structural validation are kept with status Malformed and a
/// diagnostic naming the offending field. Nothing is silently dropped.
/// Throws DatasetError on an unreadable file or a schema version mismatch.
std::vector<ChangeRecord> load_dataset(const std::filesystem::path& path);

/// Re-exports records in the same normalized schema load_dataset() reads.
/// Malformed records are written back with their raw shape dropped; loading
/// the result yields structurally equal Live/ExpiredLink records.
void write_dataset(const std::filesystem::path& path,
                   const std::vector<ChangeRecord>& records);

/// Serialized form of write_dataset().
std::string dataset_to_string(const std::vector<ChangeRecord>& records);

std::vector<ChangeRecord> filter_live(const std::vector<ChangeRecord>& records);

DatasetCounts count_statuses(const std::vector<ChangeRecord>& records);

/// Number of maximal nonempty whitespace-separated spans.
std::size_t token_count(std::string_view text);

}  // namespace chatlines

#endif  // CHATLINES_INGEST_HPP
