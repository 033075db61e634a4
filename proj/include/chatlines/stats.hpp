#ifndef CHATLINES_STATS_HPP
#define CHATLINES_STATS_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "chatlines/alignment.hpp"
#include "chatlines/ingest.hpp"
#include "chatlines/survival.hpp"

namespace chatlines {

struct StatsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KsResult {
  double statistic_d = 0.0;
  double p_value = 1.0;
  std::size_t m = 0;
  std::size_t n = 0;
};

/// Two-sample Kolmogorov-Smirnov test. D is the supremum of |F_x - F_y|
/// over the pooled sample points; the p-value comes from the asymptotic
/// Kolmogorov distribution with lambda = D * sqrt(mn/(m+n)). Throws
/// StatsError on an empty sample.
KsResult ks_two_sample(const std::vector<double>& x, const std::vector<double>& y);

/// Asymptotic survival function 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2),
/// truncated when terms drop below 1e-12, clamped to [0, 1].
double kolmogorov_pvalue(double lambda);

struct MedianCI {
  double median = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  bool degenerate = false;  // sample too small for the requested coverage
};

/// Distribution-free order-statistic confidence interval for the median:
/// the smallest symmetric rank interval around the median whose
/// Binomial(n, 1/2) coverage reaches the level.
MedianCI median_ci(std::vector<double> sample, double level = 0.95);

// Per-change inputs for the category summary; assembled by the pipeline
// from records, alignment rows and duration samples.
struct ChangeStats {
  Category category = Category::Commit;
  double rho_pre = 0.0;
  double rho_post = 0.0;
  Bin bin_pre = Bin::NoImpact;
  Bin bin_post = Bin::NoImpact;
  std::size_t conversations = 0;
  std::vector<std::size_t> prompts_per_conversation;
  std::size_t prompt_tokens = 0;
  std::size_t answer_tokens = 0;
};

struct CategorySummary {
  Category category = Category::Commit;
  std::size_t changes = 0;
  std::optional<MedianCI> conversations_per_change;
  std::optional<MedianCI> prompts_per_conversation;
  std::optional<MedianCI> prompt_tokens;
  std::optional<MedianCI> answer_tokens;
  std::array<std::size_t, 5> bins_pre{};   // NoImpact, Q1..Q4
  std::array<std::size_t, 5> bins_post{};
  std::optional<double> median_survival_all;
  std::optional<double> median_survival_influenced;
};

/// One row per category (rows for empty categories have count 0 and empty
/// statistics).
std::vector<CategorySummary> summarize_categories(
    const std::vector<ChangeStats>& changes,
    const std::vector<DurationSample>& durations);

}  // namespace chatlines

#endif  // CHATLINES_STATS_HPP
