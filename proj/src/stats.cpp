#include "chatlines/stats.hpp"

#include <algorithm>
#include <cmath>

namespace chatlines {

namespace {

double sorted_median(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
}

// P(l <= B <= u) for B ~ Binomial(n, 1/2), 0-based inclusive bounds.
double binomial_half_mass(std::size_t n, std::size_t lo, std::size_t hi) {
  // log C(n, k) accumulated incrementally to stay finite for large n.
  double mass = 0.0;
  double log_choose = 0.0;  // log C(n, 0)
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  for (std::size_t k = 0; k <= hi && k <= n; ++k) {
    if (k > 0)
      log_choose += std::log(static_cast<double>(n - k + 1)) -
                    std::log(static_cast<double>(k));
    if (k >= lo) mass += std::exp(log_choose + log_half_n);
  }
  return mass;
}

}  // namespace

double kolmogorov_pvalue(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty())
    throw StatsError("ks_two_sample: empty sample");

  std::vector<double> xs = x, ys = y;
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());

  const double m = static_cast<double>(xs.size());
  const double n = static_cast<double>(ys.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < xs.size() || j < ys.size()) {
    const double t = (j >= ys.size() || (i < xs.size() && xs[i] <= ys[j]))
                         ? xs[i]
                         : ys[j];
    while (i < xs.size() && xs[i] == t) ++i;
    while (j < ys.size() && ys[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / m -
                             static_cast<double>(j) / n));
  }

  KsResult result;
  result.statistic_d = d;
  result.m = xs.size();
  result.n = ys.size();
  const double lambda = d * std::sqrt(m * n / (m + n));
  result.p_value = d == 0.0 ? 1.0 : kolmogorov_pvalue(lambda);
  return result;
}

MedianCI median_ci(std::vector<double> sample, double level) {
  if (sample.empty()) throw StatsError("median_ci: empty sample");
  std::sort(sample.begin(), sample.end());
  const std::size_t n = sample.size();

  MedianCI ci;
  ci.level = level;
  ci.median = sorted_median(sample);

  // 0-based order-statistic ranks, expanded symmetrically from the middle.
  // For ranks (lo, hi) the interval [x_lo, x_hi] covers the true median of
  // a continuous distribution with probability P(lo + 1 <= B <= hi) for
  // B ~ Binomial(n, 1/2).
  std::size_t lo = (n - 1) / 2;
  std::size_t hi = n / 2;
  auto coverage = [&] { return binomial_half_mass(n, lo + 1, hi); };
  while (coverage() < level && !(lo == 0 && hi == n - 1)) {
    if (lo > 0) --lo;
    if (hi < n - 1) ++hi;
  }
  if (coverage() < level)
    ci.degenerate = true;  // even the full range cannot reach the level
  ci.lo = sample[lo];
  ci.hi = sample[hi];
  return ci;
}

std::vector<CategorySummary> summarize_categories(
    const std::vector<ChangeStats>& changes,
    const std::vector<DurationSample>& durations) {
  std::vector<CategorySummary> summaries;
  for (Category cat : {Category::Commit, Category::PullRequest, Category::Issue}) {
    CategorySummary row;
    row.category = cat;

    std::vector<double> conv_counts, prompts_per_conv, prompt_tok, answer_tok;
    for (const ChangeStats& cs : changes) {
      if (cs.category != cat) continue;
      ++row.changes;
      conv_counts.push_back(static_cast<double>(cs.conversations));
      for (std::size_t p : cs.prompts_per_conversation)
        prompts_per_conv.push_back(static_cast<double>(p));
      prompt_tok.push_back(static_cast<double>(cs.prompt_tokens));
      answer_tok.push_back(static_cast<double>(cs.answer_tokens));
      ++row.bins_pre[static_cast<std::size_t>(cs.bin_pre)];
      ++row.bins_post[static_cast<std::size_t>(cs.bin_post)];
    }
    if (!conv_counts.empty()) row.conversations_per_change = median_ci(conv_counts);
    if (!prompts_per_conv.empty())
      row.prompts_per_conversation = median_ci(prompts_per_conv);
    if (!prompt_tok.empty()) row.prompt_tokens = median_ci(prompt_tok);
    if (!answer_tok.empty()) row.answer_tokens = median_ci(answer_tok);

    std::vector<DurationSample> all, influenced;
    for (const DurationSample& d : durations) {
      if (d.category != cat) continue;
      all.push_back(d);
      if (d.influenced) influenced.push_back(d);
    }
    if (!all.empty()) row.median_survival_all = median_survival(kaplan_meier(all));
    if (!influenced.empty())
      row.median_survival_influenced = median_survival(kaplan_meier(influenced));

    summaries.push_back(std::move(row));
  }
  return summaries;
}

}  // namespace chatlines
