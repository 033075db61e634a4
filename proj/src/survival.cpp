#include "chatlines/survival.hpp"

#include <algorithm>

namespace chatlines {

SampleBuild build_samples(const std::vector<LabeledFate>& fates,
                          std::int64_t tip_time) {
  SampleBuild build;
  for (const LabeledFate& lf : fates) {
    DurationSample s;
    s.influenced = lf.influenced;
    s.category = lf.category;
    s.event = !lf.fate.censored;
    const std::int64_t end = lf.fate.censored ? tip_time : *lf.fate.death_time;
    std::int64_t raw = end - lf.fate.birth_time;
    if (raw < 0) {
      raw = 0;
      ++build.clamped;
    }
    s.duration_days = static_cast<double>(raw) / 86400.0;
    build.samples.push_back(s);
  }
  return build;
}

SurvivalCurve kaplan_meier(const std::vector<DurationSample>& samples) {
  if (samples.empty()) throw EmptyCohort("kaplan_meier: no samples in cohort");

  std::vector<DurationSample> sorted = samples;
  std::sort(sorted.begin(), sorted.end(),
            [](const DurationSample& a, const DurationSample& b) {
              if (a.duration_days != b.duration_days)
                return a.duration_days < b.duration_days;
              return a.event && !b.event;  // events before censorings
            });

  SurvivalCurve curve;
  double s_hat = 1.0;
  std::size_t at_risk = sorted.size();
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i].duration_days;
    std::size_t events = 0, censored = 0;
    while (i < sorted.size() && sorted[i].duration_days == t) {
      if (sorted[i].event) ++events; else ++censored;
      ++i;
    }
    if (events > 0) {
      s_hat *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(events);
      curve.survival.push_back(s_hat);
    }
    at_risk -= events + censored;
  }
  return curve;
}

std::optional<double> median_survival(const SurvivalCurve& curve) {
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    if (curve.survival[i] <= 0.5) return curve.times[i];
  return std::nullopt;
}

double survival_at(const SurvivalCurve& curve, double t) {
  double s = 1.0;
  for (std::size_t i = 0; i < curve.times.size() && curve.times[i] <= t; ++i)
    s = curve.survival[i];
  return s;
}

std::vector<std::pair<double, double>> curve_points(
    const SurvivalCurve& curve, const std::optional<std::vector<double>>& grid) {
  std::vector<std::pair<double, double>> points;
  if (grid) {
    for (double t : *grid) points.emplace_back(t, survival_at(curve, t));
    return points;
  }
  points.emplace_back(0.0, 1.0);
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    points.emplace_back(curve.times[i], curve.survival[i]);
  return points;
}

}  // namespace chatlines
