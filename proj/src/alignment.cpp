#include "chatlines/alignment.hpp"

#include <algorithm>
#include <cctype>

#include "chatlines/similarity.hpp"

namespace chatlines {

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

std::vector<std::string> split_normalized_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::string_view raw = text.substr(
        pos, (end == std::string_view::npos ? text.size() : end) - pos);
    lines.push_back(normalize_line(raw));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  // A trailing newline produces a final empty line; drop it.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

double best_line_score(const std::string& hunk_line,
                       const std::vector<std::string>& segment_lines) {
  double best = 0.0;
  for (const std::string& seg : segment_lines) {
    if (ratio_upper_bound(hunk_line, seg) <= best) continue;
    best = std::max(best, ratio(hunk_line, seg));
  }
  return best;
}

struct SideTally {
  std::size_t matched = 0;
  std::size_t eligible = 0;
};

}  // namespace

const char* to_string(Section s) {
  switch (s) {
    case Section::PromptText: return "prompt_text";
    case Section::AnswerText: return "answer_text";
    case Section::Listing: return "listing";
    case Section::PromptFence: return "prompt_fence";
    case Section::AnswerFence: return "answer_fence";
  }
  return "?";
}

const char* to_string(Side s) {
  return s == Side::Pre ? "pre" : "post";
}

const char* to_string(Bin b) {
  switch (b) {
    case Bin::NoImpact: return "no_impact";
    case Bin::Q1: return "q1";
    case Bin::Q2: return "q2";
    case Bin::Q3: return "q3";
    case Bin::Q4: return "q4";
  }
  return "?";
}

Bin bin_for(double rho, std::size_t matched) {
  if (matched == 0) return Bin::NoImpact;
  if (rho <= 0.25) return Bin::Q1;
  if (rho <= 0.5) return Bin::Q2;
  if (rho <= 0.75) return Bin::Q3;
  return Bin::Q4;
}

std::string normalize_line(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool pending_space = false;
  for (unsigned char c : line) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

std::vector<std::string> extract_fenced_blocks(std::string_view text) {
  std::vector<std::string> blocks;
  std::string current;
  bool inside = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, (end == std::string_view::npos ? text.size() : end) - pos);
    pos = (end == std::string_view::npos) ? text.size() + 1 : end + 1;

    std::string_view stripped = line;
    while (!stripped.empty() && (stripped.front() == ' ' || stripped.front() == '\t'))
      stripped.remove_prefix(1);
    if (stripped.rfind("```", 0) == 0) {
      if (inside) {
        blocks.push_back(std::move(current));
        current.clear();
      }
      inside = !inside;
      continue;
    }
    if (inside) {
      current.append(line);
      current.push_back('\n');
    }
  }
  return blocks;
}

std::vector<Segment> candidate_segments(const ChangeRecord& record, Side side) {
  std::vector<Segment> segments;
  auto add = [&](SegmentRef ref, std::string_view text) {
    Segment seg{ref, split_normalized_lines(text)};
    if (!seg.lines.empty()) segments.push_back(std::move(seg));
  };

  for (std::size_t ci = 0; ci < record.conversations.size(); ++ci) {
    const Conversation& conv = record.conversations[ci];
    for (std::size_t ti = 0; ti < conv.turns.size(); ++ti) {
      const Turn& turn = conv.turns[ti];
      if (side == Side::Pre) {
        add({ci, ti, Section::PromptText, 0}, turn.prompt);
        const auto fences = extract_fenced_blocks(turn.prompt);
        for (std::size_t k = 0; k < fences.size(); ++k)
          add({ci, ti, Section::PromptFence, k}, fences[k]);
      } else {
        add({ci, ti, Section::AnswerText, 0}, turn.answer);
        for (std::size_t k = 0; k < turn.listings.size(); ++k)
          add({ci, ti, Section::Listing, k}, turn.listings[k].content);
        const auto fences = extract_fenced_blocks(turn.answer);
        for (std::size_t k = 0; k < fences.size(); ++k)
          add({ci, ti, Section::AnswerFence, k}, fences[k]);
      }
    }
  }
  return segments;
}

namespace {

const Segment* pick_best_segment(const std::vector<std::string>& hunk_lines,
                                 const std::vector<Segment>& segments) {
  if (hunk_lines.empty() || segments.empty()) return nullptr;
  const Segment* best = nullptr;
  double best_score = -1.0;
  for (const Segment& seg : segments) {
    double total = 0.0;
    for (const std::string& line : hunk_lines)
      total += best_line_score(line, seg.lines);
    const double score = total / static_cast<double>(hunk_lines.size());
    if (score > best_score) {
      best_score = score;
      best = &seg;
    }
  }
  return best;
}

}  // namespace

std::optional<SegmentRef> select_best_segment(
    const std::vector<std::string>& hunk_lines, const ChangeRecord& record,
    Side side) {
  const std::vector<Segment> segments = candidate_segments(record, side);
  const Segment* best = pick_best_segment(hunk_lines, segments);
  if (!best) return std::nullopt;
  return best->ref;
}

std::vector<LineMatch> align_lines(const std::vector<std::string>& hunk_lines,
                                   const std::vector<std::string>& segment_lines,
                                   double threshold) {
  std::vector<LineMatch> matches;
  for (std::size_t i = 0; i < hunk_lines.size(); ++i) {
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < segment_lines.size(); ++j) {
      const double r = ratio(hunk_lines[i], segment_lines[j]);
      if (r > best) {
        best = r;
        best_j = j;
      }
    }
    if (best >= threshold) matches.push_back({i, best_j, best});
  }
  return matches;
}

AlignmentResult compute_alignment(const std::vector<HunkImage>& hunks,
                                  const ChangeRecord& record, double threshold) {
  AlignmentResult result;
  SideTally pre, post;
  const std::vector<Segment> pre_segments = candidate_segments(record, Side::Pre);
  const std::vector<Segment> post_segments = candidate_segments(record, Side::Post);

  for (const HunkImage& hunk : hunks) {
    HunkAlignment ha;

    // Pre side: removed + context, non-blank.
    std::vector<std::string> pre_lines;
    for (const HunkLine& hl : hunk.pre_lines)
      if (!is_blank(hl.content)) pre_lines.push_back(normalize_line(hl.content));
    pre.eligible += pre_lines.size();
    if (const Segment* seg = pick_best_segment(pre_lines, pre_segments)) {
      ha.pre_segment = seg->ref;
      ha.pre_matches = align_lines(pre_lines, seg->lines, threshold);
      pre.matched += ha.pre_matches.size();
    }

    // Post side: added + context, non-blank. Track which eligible index is
    // an added line so labels cover added lines only.
    std::vector<std::string> post_lines;
    std::vector<const HunkLine*> post_src;
    for (const HunkLine& hl : hunk.post_lines) {
      if (is_blank(hl.content)) continue;
      post_lines.push_back(normalize_line(hl.content));
      post_src.push_back(&hl);
    }
    post.eligible += post_lines.size();
    std::vector<bool> matched_post(post_lines.size(), false);
    if (const Segment* seg = pick_best_segment(post_lines, post_segments)) {
      ha.post_segment = seg->ref;
      ha.post_matches = align_lines(post_lines, seg->lines, threshold);
      post.matched += ha.post_matches.size();
      for (const LineMatch& m : ha.post_matches) matched_post[m.hunk_line] = true;
    }
    for (std::size_t i = 0; i < post_src.size(); ++i) {
      if (post_src[i]->kind != LineKind::Added) continue;
      result.post_lines.push_back({hunk.file_path, post_src[i]->line_no,
                                   post_src[i]->content, matched_post[i]});
    }

    result.hunks.push_back(std::move(ha));
  }

  result.matched_pre = pre.matched;
  result.eligible_pre = pre.eligible;
  result.matched_post = post.matched;
  result.eligible_post = post.eligible;
  result.degenerate_pre = pre.eligible == 0;
  result.degenerate_post = post.eligible == 0;
  result.rho_pre = pre.eligible ? static_cast<double>(pre.matched) /
                                      static_cast<double>(pre.eligible)
                                : 0.0;
  result.rho_post = post.eligible ? static_cast<double>(post.matched) /
                                        static_cast<double>(post.eligible)
                                  : 0.0;
  result.bin_pre = bin_for(result.rho_pre, pre.matched);
  result.bin_post = bin_for(result.rho_post, post.matched);
  return result;
}

}  // namespace chatlines
