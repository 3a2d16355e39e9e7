#pragma once

#include <span>
#include <vector>

#include "spikesift/probe_io.hpp"
#include "spikesift/trace.hpp"

namespace spikesift {

/// Box widths of the two four-stage cascades whose difference forms the
/// band-pass. `narrow_width` keeps frequencies below the upper cutoff,
/// `wide_width` keeps frequencies below the lower cutoff.
struct DogKernelSpec {
  int narrow_width = 3;
  int wide_width = 15;
  double sample_rate = 20000.0;

  /// Samples at each recording edge whose output is affected by zero padding.
  int unreliable_edge() const { return 2 * wide_width; }
};

/// Gaussian sigma (samples) whose -3 dB point sits at `cutoff_hz`.
double gaussian_sigma_for_cutoff(double cutoff_hz, double sample_rate);

/// Odd box width whose four-fold cascade best matches `sigma`; never below 3.
int box_width_for_sigma(double sigma);

DogKernelSpec design_kernel(double low_hz, double high_hz, double sample_rate);

/// Centered moving average of odd width `w`, zero padded at both edges.
std::vector<double> box_pass(std::span<const double> signal, int w);

/// Four box passes at each width, narrow minus wide. Double precision.
std::vector<double> dog_filter_series(std::span<const double> signal, const DogKernelSpec& spec);

/// Filters every channel; negates the output when `invert_polarity` is set.
/// Channels are split across up to `threads` workers.
Trace apply_dog(const Recording& recording, const DogKernelSpec& spec, bool invert_polarity = false,
                unsigned threads = 1);

}  // namespace spikesift
