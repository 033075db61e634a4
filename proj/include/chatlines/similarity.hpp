#ifndef CHATLINES_SIMILARITY_HPP
#define CHATLINES_SIMILARITY_HPP

#include <cstddef>
#include <string_view>
#include <vector>

namespace chatlines {

// One maximal matched run between two sequences. Block lists are strictly
// increasing in both starts and end with a zero-length sentinel at
// (|a|, |b|).
struct MatchBlock {
  std::size_t a_start = 0;
  std::size_t b_start = 0;
  std::size_t length = 0;

  bool operator==(const MatchBlock&) const = default;
};

/// Gestalt pattern matching: find the longest common contiguous substring,
/// then recurse on the unmatched regions to its left and right. Ties between
/// equally long substrings are broken by smallest a_start, then smallest
/// b_start, so the result is deterministic. No junk heuristic is applied.
std::vector<MatchBlock> matching_blocks(std::string_view a, std::string_view b);

/// Similarity ratio 2*K / (|a| + |b|) where K is the total length of the
/// blocks reported by matching_blocks(). Two empty strings compare equal
/// (ratio 1.0).
double ratio(std::string_view a, std::string_view b);

/// Cheap upper bound on ratio(): 2 * multiset character intersection over
/// total length. Useful as a pre-filter when scanning many candidates.
double ratio_upper_bound(std::string_view a, std::string_view b);

}  // namespace chatlines

#endif  // CHATLINES_SIMILARITY_HPP
