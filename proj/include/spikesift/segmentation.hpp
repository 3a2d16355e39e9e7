#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spikesift/detection.hpp"

namespace spikesift {

struct SegmentRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  std::int64_t length() const { return end - begin; }
  bool operator==(const SegmentRange&) const = default;
};

/// Drift-driven segmentation of one recording.
struct SegmentationPlan {
  std::int64_t grid_step = 0;  // samples between evaluation points
  std::int64_t window = 0;     // minimum segment length, samples
  std::vector<std::int64_t> grid;                   // times S is evaluated at
  std::vector<std::vector<double>> amplitude_sums;  // S per channel over `grid`
  std::vector<std::int64_t> drift_times;            // times H is evaluated at
  std::vector<double> drift;                        // H over `drift_times`
  std::vector<std::int64_t> boundaries;

  std::vector<SegmentRange> segments(std::int64_t num_samples) const;
};

/// S(t) = sum of excursions of peaks with t < t_p < t + window, at each time.
std::vector<double> sliding_amplitude_sum(std::span<const Peak> peaks, std::int64_t window,
                                          std::span<const std::int64_t> times);

/// H_k = sum_c |S_c[k] - S_c[k - lag]| for k >= lag. Result has
/// (grid length - lag) entries.
std::vector<double> drift_measure(const std::vector<std::vector<double>>& sums, std::size_t lag);

/// Local maxima of H above twice its median, accepted greedily by
/// decreasing H while keeping >= window samples from both recording ends
/// and from each other. Returns sorted boundaries.
std::vector<std::int64_t> select_boundaries(std::span<const std::int64_t> times,
                                            std::span<const double> drift, std::int64_t window,
                                            std::int64_t num_samples);

/// Evaluation step: the largest step <= 1 s that divides the window.
std::int64_t segmentation_grid_step(std::int64_t window, double sample_rate);

SegmentationPlan plan_segments(const PeakTrain& peaks, std::int64_t num_samples,
                               double sample_rate, double l_min_seconds);

std::vector<SegmentRange> ranges_from_boundaries(std::span<const std::int64_t> boundaries,
                                                 std::int64_t num_samples);

}  // namespace spikesift
