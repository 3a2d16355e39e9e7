#pragma once

#include <vector>

#include "spikesift/config.hpp"
#include "spikesift/detection.hpp"
#include "spikesift/dog_filter.hpp"
#include "spikesift/probe_io.hpp"
#include "spikesift/result.hpp"
#include "spikesift/segmentation.hpp"
#include "spikesift/sifter.hpp"
#include "spikesift/stitcher.hpp"

namespace spikesift {

/// Wall-clock seconds per phase.
struct PhaseTimings {
  double filter = 0.0;
  double detect = 0.0;
  double segment = 0.0;
  double sort = 0.0;
  double stitch = 0.0;

  double total() const { return filter + detect + segment + sort + stitch; }
};

/// Filtered recording plus whole-recording thresholds and peaks.
struct Prepared {
  DogKernelSpec kernel;
  Trace filtered;
  std::vector<ThresholdEstimate> estimates;
  std::vector<double> thresholds;
  PeakTrain peaks;
  std::int64_t edge_guard = 0;
};

SiftParams sift_params(const Config& config, double sample_rate);
StitchParams stitch_params(const Config& config);

Prepared prepare(const Recording& recording, const Config& config, PhaseTimings* timings = nullptr);

SegmentationPlan plan(const Prepared& prepared, const Recording& recording, const Config& config);

/// Sorts [range.begin, range.end) of the filtered trace in place.
SegmentResult sort_range(Prepared& prepared, const Recording& recording, SegmentRange range,
                         const Config& config, std::vector<SiftStep>* steps = nullptr);

/// Full pipeline: filter, detect, segment, sort each segment, stitch.
SortResult sort_recording(const Recording& recording, const Config& config,
                          PhaseTimings* timings = nullptr);

/// Re-stitches the segments of several results, ordered by start sample.
SortResult merge_results(const std::vector<SortResult>& parts, const ProbeGeometry& geometry,
                         const Config& config);

}  // namespace spikesift
