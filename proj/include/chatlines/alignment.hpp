#ifndef CHATLINES_ALIGNMENT_HPP
#define CHATLINES_ALIGNMENT_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chatlines/gitbridge.hpp"
#include "chatlines/ingest.hpp"

namespace chatlines {

inline constexpr double kDefaultThreshold = 0.6;

enum class Side { Pre, Post };

// Where a candidate segment came from inside a conversation. Attached
// listings and fenced blocks found inside prompt/answer text are separate
// candidates.
enum class Section {
  PromptText,
  AnswerText,
  Listing,      // CodeListing attached to the turn's answer
  PromptFence,  // ``` block inside the prompt text
  AnswerFence,  // ``` block inside the answer text
};

const char* to_string(Section s);
const char* to_string(Side s);

struct SegmentRef {
  std::size_t conversation = 0;
  std::size_t turn = 0;
  Section section = Section::PromptText;
  std::size_t index = 0;  // listing/fence index within the turn

  bool operator==(const SegmentRef&) const = default;
};

struct Segment {
  SegmentRef ref;
  std::vector<std::string> lines;  // normalized
};

struct LineMatch {
  std::size_t hunk_line = 0;     // index into the eligible-line list
  std::size_t segment_line = 0;  // index into the segment's line list
  double score = 0.0;
};

enum class Bin { NoImpact, Q1, Q2, Q3, Q4 };

const char* to_string(Bin b);

/// NoImpact exactly when no line matched; otherwise the quartile interval
/// (0, 0.25], (0.25, 0.5], (0.5, 0.75], (0.75, 1] containing rho.
Bin bin_for(double rho, std::size_t matched);

/// Strips leading/trailing whitespace and collapses internal whitespace
/// runs to a single space.
std::string normalize_line(std::string_view line);

/// Extracts ```-fenced blocks from free text. Fence header lines (and any
/// language tag on them) are not part of the block.
std::vector<std::string> extract_fenced_blocks(std::string_view text);

/// All candidate segments of a record for one side, in tie-break order:
/// conversation, then turn, then prompt/answer text before listings and
/// fences. Pre side: prompt text + prompt fences. Post side: answer text +
/// attached listings + answer fences. Segment lines are normalized.
std::vector<Segment> candidate_segments(const ChangeRecord& record, Side side);

/// Highest-scoring segment for the given (normalized, non-blank) hunk
/// lines. The score of a segment is the mean over hunk lines of the best
/// per-line similarity against the segment's lines. Returns nullopt when
/// there are no hunk lines or no candidate segments; ties keep the earliest
/// candidate.
std::optional<SegmentRef> select_best_segment(
    const std::vector<std::string>& hunk_lines, const ChangeRecord& record,
    Side side);

/// One match per hunk line: its best-scoring segment line, kept only when
/// the similarity reaches the threshold.
std::vector<LineMatch> align_lines(const std::vector<std::string>& hunk_lines,
                                   const std::vector<std::string>& segment_lines,
                                   double threshold = kDefaultThreshold);

// A post-image added line with its influence label; feeds the survival
// stage. line_no is the line's position in the file at the head commit.
struct LineLabel {
  std::string file;
  int line_no = 0;
  std::string content;
  bool influenced = false;
};

struct HunkAlignment {
  std::optional<SegmentRef> pre_segment;
  std::optional<SegmentRef> post_segment;
  std::vector<LineMatch> pre_matches;
  std::vector<LineMatch> post_matches;
};

struct AlignmentResult {
  double rho_pre = 0.0;
  double rho_post = 0.0;
  Bin bin_pre = Bin::NoImpact;
  Bin bin_post = Bin::NoImpact;
  std::size_t matched_pre = 0;
  std::size_t eligible_pre = 0;
  std::size_t matched_post = 0;
  std::size_t eligible_post = 0;
  bool degenerate_pre = false;   // no eligible pre-image lines
  bool degenerate_post = false;  // no eligible post-image lines
  std::vector<HunkAlignment> hunks;
  std::vector<LineLabel> post_lines;  // every eligible added line, labeled
};

/// Whole-change alignment: per hunk and side, pick the best segment and
/// align eligible lines against it; aggregate matched/eligible counts into
/// rho_pre/rho_post and bins. Eligible lines are non-blank Removed+Context
/// lines (pre) and non-blank Added+Context lines (post); only Added lines
/// are ever labeled influenced.
AlignmentResult compute_alignment(const std::vector<HunkImage>& hunks,
                                  const ChangeRecord& record,
                                  double threshold = kDefaultThreshold);

}  // namespace chatlines

#endif  // CHATLINES_ALIGNMENT_HPP
