#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "spikesift/trace.hpp"

namespace spikesift {

struct Peak {
  std::int64_t t = 0;     // sample index within the scanned series
  float value = 0.0f;     // signal value at t (negative for spikes)
  float excursion = 0.0f; // |value| - |theta|

  bool operator==(const Peak&) const = default;
};

struct ThresholdEstimate {
  double theta = 0.0;  // -kappa * MAD
  double mad = 0.0;
  bool degenerate = false;  // MAD == 0
};

inline constexpr std::size_t kMadSampleLimit = std::size_t{1} << 20;

/// Median of |x - median(x)| over up to `max_samples` evenly strided
/// samples; theta = -kappa * MAD. Even-length medians average the two
/// central order statistics.
ThresholdEstimate mad_threshold(std::span<const float> signal, double kappa,
                                std::size_t max_samples = kMadSampleLimit);

struct DetectOptions {
  std::int64_t refractory = 20;  // half-window, samples
  bool local_min_only = false;   // ignore theta, keep every windowed minimum
  // Candidate range [begin, end) within the series; the comparison window
  // still reads neighbours outside it.
  std::int64_t begin = 0;
  std::int64_t end = std::numeric_limits<std::int64_t>::max();
};

/// Windowed negative peaks. A sample t qualifies when it is strictly below
/// every earlier sample and not above any later sample within
/// +-refractory, and (unless local_min_only) value <= theta. Accepted peaks
/// are therefore more than `refractory` samples apart; on exact ties the
/// earliest sample wins.
std::vector<Peak> detect_peaks(std::span<const float> signal, double theta,
                               const DetectOptions& options);

/// Per-channel threshold peaks plus the thresholds used.
struct PeakTrain {
  std::vector<std::vector<Peak>> channels;
  std::vector<double> thresholds;

  double excursion_sum(std::size_t c) const;
};

PeakTrain detect_all(const Trace& trace, std::span<const double> thresholds,
                     std::int64_t refractory, std::int64_t edge_guard);

/// Refractory / local-minimum half-window: round(1 ms * fs).
std::int64_t refractory_samples(double sample_rate);

}  // namespace spikesift
