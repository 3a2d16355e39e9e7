#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spikesift/assignment.hpp"
#include "spikesift/probe_io.hpp"
#include "spikesift/result.hpp"

namespace spikesift {

using AmplitudeVector = std::vector<double>;

/// Per-channel max of the negated footprint (channels x width).
AmplitudeVector amplitude_vector(std::span<const float> footprint, std::size_t channels,
                                 std::size_t width);

/// Predicted amplitudes after the sources move by `delta_um` along y:
/// each channel reads its column's profile at y - delta, linearly
/// interpolated and clamped to the column's end channels.
AmplitudeVector shift_amplitudes(std::span<const double> amplitudes, const ProbeGeometry& geometry,
                                 double delta_um);

/// {-d_max, ..., -step, 0, step, ..., d_max}.
std::vector<double> shift_grid(double d_max_um, double step_um = 5.0);

/// Shifts `first` by +delta/2 and `second` by -delta/2 and solves the
/// exact min-cost assignment on Euclidean distances.
Assignment matching_cost(const std::vector<AmplitudeVector>& first,
                         const std::vector<AmplitudeVector>& second, const ProbeGeometry& geometry,
                         double delta_um);

struct ShiftMatch {
  double shift_um = 0.0;
  Assignment assignment;
};

/// Minimises matching cost over `grid`. Ties go to the smaller |delta|,
/// then to the negative one.
ShiftMatch best_shift(const std::vector<AmplitudeVector>& first,
                      const std::vector<AmplitudeVector>& second, const ProbeGeometry& geometry,
                      std::span<const double> grid);

struct StitchParams {
  double d_max_um = 30.0;
  double step_um = 5.0;
  double mu = 0.6;  // relative distance gate for keeping a matched pair
};

struct Correspondence {
  int first = 0;   // local id in the earlier segment
  int second = 0;  // local id in the later segment
  double distance = 0.0;
  bool accepted = false;
};

struct SegmentLink {
  double shift_um = 0.0;
  std::vector<Correspondence> pairs;
};

SegmentLink link_segments(const std::vector<Unit>& first, const std::vector<Unit>& second,
                          const ProbeGeometry& geometry, const StitchParams& params);

/// Chains segments left to right; linked units inherit the earlier global
/// id, everything else gets a fresh id.
SortResult stitch(std::vector<SegmentResult> segments, const ProbeGeometry& geometry,
                  const StitchParams& params, double sample_rate, std::int64_t num_samples);

}  // namespace spikesift
