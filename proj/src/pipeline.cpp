#include "spikesift/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace spikesift {

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

SiftParams sift_params(const Config& config, double sample_rate) {
  SiftParams p;
  p.lambda = config.lambda;
  p.n_min = static_cast<std::size_t>(config.n_min);
  p.refractory = refractory_samples(sample_rate);
  p.half_window = p.refractory;
  return p;
}

StitchParams stitch_params(const Config& config) {
  StitchParams p;
  p.d_max_um = config.d_max_um;
  p.mu = config.mu;
  return p;
}

Prepared prepare(const Recording& recording, const Config& config, PhaseTimings* timings) {
  config.validate();
  Stopwatch clock;
  Prepared out;
  const auto threads = static_cast<unsigned>(config.threads);
  out.kernel = design_kernel(config.band_low_hz, config.band_high_hz, recording.sample_rate());
  out.filtered = apply_dog(recording, out.kernel, config.invert_polarity, threads);
  if (timings) timings->filter += clock.lap();

  for (std::size_t c = 0; c < recording.num_channels(); ++c) {
    out.estimates.push_back(mad_threshold(out.filtered.channel(c), config.kappa));
    out.thresholds.push_back(out.estimates.back().theta);
  }
  out.edge_guard = out.kernel.unreliable_edge();
  out.peaks = detect_all(out.filtered, out.thresholds, refractory_samples(recording.sample_rate()),
                         out.edge_guard);
  if (timings) timings->detect += clock.lap();
  return out;
}

SegmentationPlan plan(const Prepared& prepared, const Recording& recording, const Config& config) {
  return plan_segments(prepared.peaks, static_cast<std::int64_t>(recording.num_samples()),
                       recording.sample_rate(), config.l_min_seconds);
}

SegmentResult sort_range(Prepared& prepared, const Recording& recording, SegmentRange range,
                         const Config& config, std::vector<SiftStep>* steps) {
  const auto total = static_cast<std::int64_t>(recording.num_samples());
  if (range.begin < 0 || range.end > total || range.begin >= range.end) {
    throw Error("segment range [" + std::to_string(range.begin) + ", " + std::to_string(range.end) +
                ") outside recording of " + std::to_string(total) + " samples");
  }
  SegmentInput input;
  input.residual = TraceSlice(prepared.filtered, static_cast<std::size_t>(range.begin),
                              static_cast<std::size_t>(range.length()));
  input.origin = range.begin;
  input.valid_begin = std::max<std::int64_t>(0, prepared.edge_guard - range.begin);
  input.valid_end = std::min(range.length(), total - prepared.edge_guard - range.begin);
  input.thresholds = prepared.thresholds;
  input.geometry = &recording.geometry();
  return sort_segment(input, sift_params(config, recording.sample_rate()), steps);
}

SortResult sort_recording(const Recording& recording, const Config& config, PhaseTimings* timings) {
  auto prepared = prepare(recording, config, timings);
  Stopwatch clock;
  const auto segmentation = plan(prepared, recording, config);
  const auto ranges = segmentation.segments(static_cast<std::int64_t>(recording.num_samples()));
  if (timings) timings->segment += clock.lap();

  std::vector<SegmentResult> results(ranges.size());
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), ranges.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      results[i] = sort_range(prepared, recording, ranges[i], config);
    }
  } else {
    // Segments occupy disjoint slices of the filtered trace.
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < ranges.size(); i = next++) {
            try {
              results[i] = sort_range(prepared, recording, ranges[i], config);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  if (timings) timings->sort += clock.lap();

  auto result = stitch(std::move(results), recording.geometry(), stitch_params(config),
                       recording.sample_rate(), static_cast<std::int64_t>(recording.num_samples()));
  if (timings) timings->stitch += clock.lap();
  return result;
}

SortResult merge_results(const std::vector<SortResult>& parts, const ProbeGeometry& geometry,
                         const Config& config) {
  if (parts.empty()) throw Error("nothing to merge");
  std::vector<SegmentResult> segments;
  for (const auto& part : parts) {
    if (part.sample_rate != parts.front().sample_rate ||
        part.num_channels != parts.front().num_channels) {
      throw Error("cannot merge results from different recordings");
    }
    if (part.num_channels != static_cast<int>(geometry.size())) {
      throw Error("result channel count does not match probe");
    }
    segments.insert(segments.end(), part.segments.begin(), part.segments.end());
  }
  std::stable_sort(segments.begin(), segments.end(),
                   [](const SegmentResult& a, const SegmentResult& b) { return a.begin < b.begin; });
  std::int64_t num_samples = 0;
  for (const auto& part : parts) num_samples = std::max(num_samples, part.num_samples);
  return stitch(std::move(segments), geometry, stitch_params(config), parts.front().sample_rate,
                num_samples);
}

}  // namespace spikesift
