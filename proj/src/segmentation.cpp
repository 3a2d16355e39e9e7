#include "spikesift/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spikesift {

std::vector<double> sliding_amplitude_sum(std::span<const Peak> peaks, std::int64_t window,
                                          std::span<const std::int64_t> times) {
  std::vector<double> prefix(peaks.size() + 1, 0.0);
  for (std::size_t i = 0; i < peaks.size(); ++i) prefix[i + 1] = prefix[i] + peaks[i].excursion;

  auto by_time = [](const Peak& p, std::int64_t t) { return p.t < t; };
  std::vector<double> out;
  out.reserve(times.size());
  for (auto t : times) {
    // Open interval (t, t + window).
    const auto lo = std::lower_bound(peaks.begin(), peaks.end(), t + 1, by_time) - peaks.begin();
    const auto hi = std::lower_bound(peaks.begin(), peaks.end(), t + window, by_time) - peaks.begin();
    out.push_back(hi > lo ? prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)]
                          : 0.0);
  }
  return out;
}

std::vector<double> drift_measure(const std::vector<std::vector<double>>& sums, std::size_t lag) {
  if (sums.empty()) return {};
  const std::size_t n = sums.front().size();
  if (n <= lag) return {};
  std::vector<double> h(n - lag, 0.0);
  for (const auto& s : sums) {
    for (std::size_t k = lag; k < n; ++k) h[k - lag] += std::abs(s[k] - s[k - lag]);
  }
  return h;
}

std::vector<std::int64_t> select_boundaries(std::span<const std::int64_t> times,
                                            std::span<const double> drift, std::int64_t window,
                                            std::int64_t num_samples) {
  if (num_samples < 2 * window || drift.empty()) return {};

  std::vector<double> sorted(drift.begin(), drift.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const double floor = 2.0 * median;

  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < drift.size(); ++k) {
    const bool left_ok = k == 0 || drift[k] > drift[k - 1];
    const bool right_ok = k + 1 == drift.size() || drift[k] >= drift[k + 1];
    if (left_ok && right_ok && drift[k] > floor) candidates.push_back(k);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return drift[a] > drift[b]; });

  std::vector<std::int64_t> accepted;
  for (auto k : candidates) {
    const std::int64_t t = times[k];
    if (t < window || num_samples - t < window) continue;
    const bool separated = std::all_of(accepted.begin(), accepted.end(), [&](std::int64_t b) {
      return std::abs(b - t) >= window;
    });
    if (separated) accepted.push_back(t);
  }
  std::sort(accepted.begin(), accepted.end());
  return accepted;
}

std::int64_t segmentation_grid_step(std::int64_t window, double sample_rate) {
  const auto one_second = std::max<std::int64_t>(1, std::llround(sample_rate));
  std::int64_t parts = std::max<std::int64_t>(1, (window + one_second - 1) / one_second);
  while (window % parts != 0) ++parts;
  return window / parts;
}

SegmentationPlan plan_segments(const PeakTrain& peaks, std::int64_t num_samples,
                               double sample_rate, double l_min_seconds) {
  SegmentationPlan plan;
  plan.window = std::max<std::int64_t>(1, std::llround(l_min_seconds * sample_rate));
  plan.grid_step = segmentation_grid_step(plan.window, sample_rate);
  if (num_samples < 2 * plan.window) return plan;

  for (std::int64_t t = 0; t + plan.window <= num_samples; t += plan.grid_step) {
    plan.grid.push_back(t);
  }
  for (const auto& channel : peaks.channels) {
    plan.amplitude_sums.push_back(sliding_amplitude_sum(channel, plan.window, plan.grid));
  }
  const auto lag = static_cast<std::size_t>(plan.window / plan.grid_step);
  plan.drift = drift_measure(plan.amplitude_sums, lag);
  plan.drift_times.assign(plan.grid.begin() + static_cast<std::ptrdiff_t>(lag), plan.grid.end());
  plan.boundaries = select_boundaries(plan.drift_times, plan.drift, plan.window, num_samples);
  return plan;
}

std::vector<SegmentRange> ranges_from_boundaries(std::span<const std::int64_t> boundaries,
                                                 std::int64_t num_samples) {
  std::vector<SegmentRange> out;
  std::int64_t begin = 0;
  for (auto b : boundaries) {
    out.push_back({begin, b});
    begin = b;
  }
  out.push_back({begin, num_samples});
  return out;
}

std::vector<SegmentRange> SegmentationPlan::segments(std::int64_t num_samples) const {
  return ranges_from_boundaries(boundaries, num_samples);
}

}  // namespace spikesift
