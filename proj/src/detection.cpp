#include "spikesift/detection.hpp"

#include <algorithm>
#include <cmath>

namespace spikesift {

namespace {

double median_in_place(std::vector<float>& v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

ThresholdEstimate mad_threshold(std::span<const float> signal, double kappa,
                                std::size_t max_samples) {
  if (signal.empty()) throw Error("mad_threshold: empty signal");
  if (!(kappa > 0.0)) throw Error("mad_threshold: kappa must be positive");
  const std::size_t stride = std::max<std::size_t>(1, (signal.size() + max_samples - 1) / max_samples);

  std::vector<float> values;
  values.reserve(signal.size() / stride + 1);
  for (std::size_t i = 0; i < signal.size(); i += stride) values.push_back(signal[i]);

  const double center = median_in_place(values);
  for (auto& v : values) v = static_cast<float>(std::abs(v - center));
  ThresholdEstimate est;
  est.mad = median_in_place(values);
  est.degenerate = est.mad == 0.0;
  est.theta = est.degenerate ? 0.0 : -kappa * est.mad;
  return est;
}

std::vector<Peak> detect_peaks(std::span<const float> signal, double theta,
                               const DetectOptions& options) {
  if (options.refractory < 1) throw Error("detect_peaks: refractory must be >= 1");
  const auto n = static_cast<std::int64_t>(signal.size());
  const std::int64_t r = options.refractory;
  const std::int64_t begin = std::max<std::int64_t>(0, options.begin);
  const std::int64_t end = std::min(n, options.end);
  const auto limit = static_cast<float>(theta);

  std::vector<Peak> peaks;
  for (std::int64_t t = begin; t < end; ++t) {
    const float v = signal[static_cast<std::size_t>(t)];
    if (!options.local_min_only && v > limit) continue;
    // Cheap rejection on the immediate neighbours first.
    if (t > 0 && signal[static_cast<std::size_t>(t - 1)] <= v) continue;
    if (t + 1 < n && signal[static_cast<std::size_t>(t + 1)] < v) continue;

    bool is_peak = true;
    for (std::int64_t s = std::max<std::int64_t>(0, t - r); s < t && is_peak; ++s) {
      is_peak = signal[static_cast<std::size_t>(s)] > v;
    }
    for (std::int64_t s = t + 1; s <= std::min(n - 1, t + r) && is_peak; ++s) {
      is_peak = signal[static_cast<std::size_t>(s)] >= v;
    }
    if (!is_peak) continue;
    peaks.push_back({t, v, static_cast<float>(std::abs(v) - std::abs(theta))});
    t += r;  // nothing within the window can qualify
  }
  return peaks;
}

double PeakTrain::excursion_sum(std::size_t c) const {
  double sum = 0.0;
  for (const auto& p : channels[c]) sum += p.excursion;
  return sum;
}

PeakTrain detect_all(const Trace& trace, std::span<const double> thresholds,
                     std::int64_t refractory, std::int64_t edge_guard) {
  PeakTrain train;
  train.thresholds.assign(thresholds.begin(), thresholds.end());
  train.channels.resize(trace.num_channels());
  const auto n = static_cast<std::int64_t>(trace.num_samples());
  for (std::size_t c = 0; c < trace.num_channels(); ++c) {
    if (thresholds[c] == 0.0) continue;  // degenerate channel
    DetectOptions opt;
    opt.refractory = refractory;
    opt.begin = edge_guard;
    opt.end = n - edge_guard;
    train.channels[c] = detect_peaks(trace.channel(c), thresholds[c], opt);
  }
  return train;
}

std::int64_t refractory_samples(double sample_rate) {
  return std::max<std::int64_t>(1, std::llround(1e-3 * sample_rate));
}

}  // namespace spikesift
