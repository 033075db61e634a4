#ifndef CHATLINES_SURVIVAL_HPP
#define CHATLINES_SURVIVAL_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "chatlines/gitbridge.hpp"
#include "chatlines/ingest.hpp"

namespace chatlines {

struct EmptyCohort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DurationSample {
  double duration_days = 0.0;
  bool event = false;  // false = censored
  bool influenced = false;
  Category category = Category::Commit;
};

struct LabeledFate {
  LineFate fate;
  bool influenced = false;
  Category category = Category::Commit;
};

struct SampleBuild {
  std::vector<DurationSample> samples;
  std::size_t clamped = 0;  // negative raw durations clamped to zero
};

/// Durations in days: death - birth for events, tip time - birth for
/// censored lines. Negative raw durations (committer clock skew) clamp to
/// zero and are counted.
SampleBuild build_samples(const std::vector<LabeledFate>& fates,
                          std::int64_t tip_time);

// Product-limit estimate: distinct event times with at-risk counts, event
// counts and the running survival estimate. Censored observations tie-break
// after events at the same time.
struct SurvivalCurve {
  std::vector<double> times;
  std::vector<std::size_t> at_risk;
  std::vector<std::size_t> events;
  std::vector<double> survival;
};

/// Kaplan-Meier estimator. Throws EmptyCohort on empty input; all-censored
/// input yields a curve with no event points (S = 1 everywhere).
SurvivalCurve kaplan_meier(const std::vector<DurationSample>& samples);

/// Smallest event time with S <= 0.5, or nullopt if the curve never gets
/// there.
std::optional<double> median_survival(const SurvivalCurve& curve);

/// Right-continuous step evaluation; 1 before the first event time.
double survival_at(const SurvivalCurve& curve, double t);

/// Step-function points. With a grid, evaluates at each grid time; without,
/// emits (0, 1) followed by one point per event time.
std::vector<std::pair<double, double>> curve_points(
    const SurvivalCurve& curve,
    const std::optional<std::vector<double>>& grid = std::nullopt);

}  // namespace chatlines

#endif  // CHATLINES_SURVIVAL_HPP
