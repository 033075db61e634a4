#include "chatlines/stats.hpp"

#include <cmath>
#include <random>

#include <doctest.h>

#include "oracles.hpp"

using namespace chatlines;

TEST_CASE("ks known values") {
  SUBCASE("identical samples") {
    const KsResult r = ks_two_sample({1, 2, 3}, {1, 2, 3});
    CHECK(r.statistic_d == 0.0);
    CHECK(r.p_value == 1.0);
  }

  SUBCASE("disjoint supports") {
    const KsResult r = ks_two_sample({1, 2}, {3, 4});
    CHECK(r.statistic_d == 1.0);
  }

  SUBCASE("shifted overlap") {
    const KsResult r = ks_two_sample({1, 2, 3, 4}, {2, 3, 4, 5});
    CHECK(r.statistic_d == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(r.statistic_d ==
          doctest::Approx(oracle::ks_statistic({1, 2, 3, 4}, {2, 3, 4, 5})));
  }

  SUBCASE("empty sample is an error") {
    CHECK_THROWS_AS(ks_two_sample({}, {1.0}), StatsError);
    CHECK_THROWS_AS(ks_two_sample({1.0}, {}), StatsError);
  }
}

TEST_CASE("ks properties on random samples") {
  std::mt19937 rng(555);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> size_dist(1, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(size_dist(rng)), y(size_dist(rng));
    for (double& v : x) v = normal(rng);
    for (double& v : y) v = normal(rng);

    const KsResult xy = ks_two_sample(x, y);
    const KsResult yx = ks_two_sample(y, x);
    CHECK(xy.statistic_d == yx.statistic_d);
    CHECK(xy.p_value == yx.p_value);

    CHECK(xy.statistic_d ==
          doctest::Approx(oracle::ks_statistic(x, y)).epsilon(1e-12));

    // Strictly increasing transform leaves D unchanged.
    auto transform = [](std::vector<double> v) {
      for (double& t : v) t = std::exp(t) + 3.0 * t;
      return v;
    };
    const KsResult transformed = ks_two_sample(transform(x), transform(y));
    CHECK(transformed.statistic_d == doctest::Approx(xy.statistic_d).epsilon(1e-12));
  }
}

TEST_CASE("kolmogorov p-value series") {
  CHECK(kolmogorov_pvalue(0.0) == 1.0);
  // Against a high-precision evaluation across the useful range.
  for (double lambda = 0.05; lambda < 3.0; lambda += 0.037) {
    CHECK(kolmogorov_pvalue(lambda) ==
          doctest::Approx(oracle::kolmogorov_pvalue_precise(lambda)).epsilon(1e-6));
  }
  // Monotone decreasing, tending to 1 at 0.
  double prev = 1.0 + 1e-12;
  for (double lambda = 0.01; lambda < 4.0; lambda += 0.01) {
    const double p = kolmogorov_pvalue(lambda);
    CHECK(p <= prev + 1e-12);
    prev = p;
  }
  CHECK(kolmogorov_pvalue(0.001) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("median_ci") {
  SUBCASE("thirty identical values") {
    const MedianCI ci = median_ci(std::vector<double>(30, 1.0));
    CHECK(ci.median == 1.0);
    CHECK(ci.lo == 1.0);
    CHECK(ci.hi == 1.0);
    CHECK_FALSE(ci.degenerate);
  }

  SUBCASE("1..9 at 95% gives ranks (2, 8)") {
    const MedianCI ci = median_ci({1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(ci.median == 5.0);
    CHECK(ci.lo == 2.0);
    CHECK(ci.hi == 8.0);
  }

  SUBCASE("single element") {
    const MedianCI ci = median_ci({7.0});
    CHECK(ci.median == 7.0);
    CHECK(ci.lo == 7.0);
    CHECK(ci.hi == 7.0);
    CHECK(ci.degenerate);
  }

  SUBCASE("interval always contains the sample median") {
    std::mt19937 rng(8);
    std::normal_distribution<double> normal(0.0, 5.0);
    std::uniform_int_distribution<int> size_dist(1, 80);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<double> sample(size_dist(rng));
      for (double& v : sample) v = normal(rng);
      const MedianCI ci = median_ci(sample);
      CHECK(ci.lo <= ci.median);
      CHECK(ci.median <= ci.hi);
    }
  }

  SUBCASE("empirical coverage near the nominal level") {
    std::mt19937 rng(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    int covered = 0;
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
      std::vector<double> sample(25);
      for (double& v : sample) v = normal(rng);
      const MedianCI ci = median_ci(sample);
      if (ci.lo <= 0.0 && 0.0 <= ci.hi) ++covered;
    }
    CHECK(static_cast<double>(covered) / trials >= 0.93);
  }
}

TEST_CASE("summarize_categories") {
  ChangeStats a;
  a.category = Category::Commit;
  a.rho_pre = 0.5;
  a.rho_post = 1.0;
  a.bin_pre = Bin::Q2;
  a.bin_post = Bin::Q4;
  a.conversations = 1;
  a.prompts_per_conversation = {2};
  a.prompt_tokens = 10;
  a.answer_tokens = 20;
  ChangeStats b = a;
  b.prompt_tokens = 30;
  b.bin_post = Bin::NoImpact;

  DurationSample d1;
  d1.category = Category::Commit;
  d1.duration_days = 4.0;
  d1.event = true;
  d1.influenced = true;

  const auto summaries = summarize_categories({a, b}, {d1});
  REQUIRE(summaries.size() == 3);
  const CategorySummary& commit = summaries[0];
  CHECK(commit.category == Category::Commit);
  CHECK(commit.changes == 2);
  CHECK(commit.prompt_tokens->median == 20.0);
  CHECK(commit.conversations_per_change->median == 1.0);
  CHECK(commit.bins_post[static_cast<int>(Bin::NoImpact)] == 1);
  CHECK(commit.bins_post[static_cast<int>(Bin::Q4)] == 1);
  CHECK(commit.median_survival_all == 4.0);
  CHECK(commit.median_survival_influenced == 4.0);

  // Empty categories still get a row.
  const CategorySummary& issue = summaries[2];
  CHECK(issue.category == Category::Issue);
  CHECK(issue.changes == 0);
  CHECK_FALSE(issue.conversations_per_change.has_value());
  CHECK_FALSE(issue.median_survival_all.has_value());

  // A one-record category's medians equal that record's values.
  const auto single = summarize_categories({a}, {});
  CHECK(single[0].prompt_tokens->median == 10.0);
  CHECK(single[0].prompt_tokens->lo == 10.0);
  CHECK(single[0].prompt_tokens->hi == 10.0);
}
