#include "chatlines/similarity.hpp"

#include <algorithm>
#include <array>

namespace chatlines {

namespace {

struct Region {
  std::size_t a_lo, a_hi, b_lo, b_hi;
};

// Longest common substring of a[a_lo,a_hi) x b[b_lo,b_hi). Among all maximal
// blocks, returns the one starting earliest in a, then earliest in b.
// b_positions maps each byte value to the sorted positions where it occurs
// in b (whole string; the range check happens here).
MatchBlock find_longest_match(std::string_view a, const Region& r,
                              const std::array<std::vector<std::size_t>, 256>& b_positions) {
  MatchBlock best{r.a_lo, r.b_lo, 0};
  // run_len[j] = length of the common run ending at (i, j); only nonzero
  // entries are tracked.
  std::vector<std::pair<std::size_t, std::size_t>> run_len, next_run_len;
  for (std::size_t i = r.a_lo; i < r.a_hi; ++i) {
    next_run_len.clear();
    const auto& positions = b_positions[static_cast<unsigned char>(a[i])];
    auto it = std::lower_bound(positions.begin(), positions.end(), r.b_lo);
    for (; it != positions.end() && *it < r.b_hi; ++it) {
      const std::size_t j = *it;
      std::size_t k = 1;
      if (j > r.b_lo) {
        auto prev = std::lower_bound(
            run_len.begin(), run_len.end(), j - 1,
            [](const auto& p, std::size_t v) { return p.first < v; });
        if (prev != run_len.end() && prev->first == j - 1) k = prev->second + 1;
      }
      next_run_len.emplace_back(j, k);
      if (k > best.length) best = {i - k + 1, j - k + 1, k};
    }
    std::swap(run_len, next_run_len);
  }
  return best;
}

}  // namespace

std::vector<MatchBlock> matching_blocks(std::string_view a, std::string_view b) {
  std::array<std::vector<std::size_t>, 256> b_positions;
  for (std::size_t j = 0; j < b.size(); ++j)
    b_positions[static_cast<unsigned char>(b[j])].push_back(j);

  std::vector<MatchBlock> blocks;
  std::vector<Region> queue{{0, a.size(), 0, b.size()}};
  while (!queue.empty()) {
    const Region r = queue.back();
    queue.pop_back();
    const MatchBlock m = find_longest_match(a, r, b_positions);
    if (m.length == 0) continue;
    blocks.push_back(m);
    if (r.a_lo < m.a_start && r.b_lo < m.b_start)
      queue.push_back({r.a_lo, m.a_start, r.b_lo, m.b_start});
    if (m.a_start + m.length < r.a_hi && m.b_start + m.length < r.b_hi)
      queue.push_back({m.a_start + m.length, r.a_hi, m.b_start + m.length, r.b_hi});
  }

  std::sort(blocks.begin(), blocks.end(), [](const MatchBlock& x, const MatchBlock& y) {
    return x.a_start < y.a_start;
  });

  // Merge adjacent blocks so each reported block is maximal.
  std::vector<MatchBlock> merged;
  for (const MatchBlock& m : blocks) {
    if (!merged.empty() && merged.back().a_start + merged.back().length == m.a_start &&
        merged.back().b_start + merged.back().length == m.b_start) {
      merged.back().length += m.length;
    } else {
      merged.push_back(m);
    }
  }
  merged.push_back({a.size(), b.size(), 0});
  return merged;
}

double ratio(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t matched = 0;
  for (const MatchBlock& m : matching_blocks(a, b)) matched += m.length;
  return 2.0 * static_cast<double>(matched) / static_cast<double>(a.size() + b.size());
}

double ratio_upper_bound(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  std::array<std::size_t, 256> count_a{}, count_b{};
  for (char c : a) ++count_a[static_cast<unsigned char>(c)];
  for (char c : b) ++count_b[static_cast<unsigned char>(c)];
  std::size_t common = 0;
  for (std::size_t c = 0; c < 256; ++c) common += std::min(count_a[c], count_b[c]);
  return 2.0 * static_cast<double>(common) / static_cast<double>(a.size() + b.size());
}

}  // namespace chatlines
