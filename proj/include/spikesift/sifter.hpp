#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spikesift/detection.hpp"
#include "spikesift/probe_io.hpp"
#include "spikesift/result.hpp"
#include "spikesift/trace.hpp"

namespace spikesift {

struct SiftParams {
  double lambda = 0.4;
  std::size_t n_min = 5;
  std::int64_t half_window = 20;  // h, samples either side of the peak
  std::int64_t refractory = 20;   // local-minimum half-window, samples
  std::size_t neighborhood = 5;
  int power_iterations = 30;
  double power_tolerance = 1e-6;
  bool subtract = true;  // false: accepted spikes are only masked (ablation)
  std::size_t max_iterations = 0;  // 0: 64 * channels
};

/// Fixed-size waveforms, one row per event; inside a row channels are
/// contiguous blocks of `width` samples.
struct WaveformSet {
  std::size_t count = 0;
  std::size_t channels = 0;
  std::size_t width = 0;
  std::vector<float> data;

  std::size_t dims() const { return channels * width; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dims(), dims()}; }
};

/// Windows [t - h, t + h] on `channels`; samples outside the slice read as zero.
WaveformSet extract_waveforms(const TraceSlice& residual, std::span<const int> channels,
                              std::span<const std::int64_t> times, std::int64_t half_window);

/// Mean of the selected rows, channels x width, in double precision.
std::vector<double> mean_waveform(const WaveformSet& set, std::span<const std::size_t> rows);

std::optional<int> select_reference_channel(const PeakTrain& peaks,
                                            const std::vector<bool>& blacklist);

struct Projection {
  std::vector<double> axis;    // unit vector, empty for zero-variance input
  std::vector<double> values;  // one per selected row
  int iterations = 0;
};

/// Projections of the mean-centred rows onto the dominant covariance
/// eigenvector, found by power iteration from the normalised
/// mean-absolute waveform.
Projection principal_projection(const WaveformSet& set, std::span<const std::size_t> rows,
                                int max_iterations = 30, double tolerance = 1e-6);

struct Bipartition {
  std::vector<std::size_t> low;   // indices into the input, lower values
  std::vector<std::size_t> high;
};

/// Agglomerates sorted-order neighbours under ||m_x - m_y||^2 * min(|x|, |y|)
/// until two clusters remain. Equal costs merge the leftmost pair first.
Bipartition cluster_1d(std::span<const double> points);

/// Ordered-pair maxima max_s(W_i[s] - W_j[s]) for i != j, i-major.
std::vector<double> difference_vector(std::span<const double> templ, std::size_t channels,
                                      std::size_t width);

bool same_neuron(std::span<const double> dx, std::span<const double> dy, double lambda);

enum class SplitMode { LargestAmplitude, NearestTemplate };

/// Repeated principal-axis bisection. Stops when both halves look like the
/// same neuron; otherwise keeps the louder half (on row 0's channel at the
/// centre sample) or the half whose difference vector is nearer `target`.
/// Returns indices into `set`; never empty for a non-empty set.
std::vector<std::size_t> binary_split_cluster(const WaveformSet& set, double lambda,
                                              SplitMode mode,
                                              std::span<const double> target = {},
                                              int power_iterations = 30,
                                              double power_tolerance = 1e-6);

/// Keeps candidates with v . T >= |T|^2 / 2 (closer to the template than to
/// the origin, boundary kept). `candidates` holds one row of T.size() values
/// per candidate. Throws on a zero template.
std::vector<std::size_t> template_filter(std::span<const float> candidates,
                                         std::span<const double> templ_peak);

/// Mutable per-segment state handed to the sorter.
struct SegmentInput {
  TraceSlice residual;               // modified in place
  std::int64_t origin = 0;           // absolute index of residual sample 0
  std::int64_t valid_begin = 0;      // local range where events may be detected
  std::int64_t valid_end = 0;
  std::span<const double> thresholds;
  const ProbeGeometry* geometry = nullptr;
};

enum class Rejection { None, TooFewPeaks, DegenerateTemplate, TooFewSpikes, BelowThreshold };
const char* to_string(Rejection r);

struct Extraction {
  Rejection rejection = Rejection::None;
  Unit unit;  // valid when rejection == None; spike times absolute

  bool accepted() const { return rejection == Rejection::None; }
};

Extraction extract_unit(const SegmentInput& segment, const PeakTrain& peaks, int ref_channel,
                        const SiftParams& params);

/// Subtracts the unit footprint at each spike (windows clipped to the slice).
void subtract_unit(const TraceSlice& residual, std::int64_t origin, const Unit& unit);

struct SiftStep {
  int channel = 0;
  double excursion_sum = 0.0;
  Rejection rejection = Rejection::None;
  std::size_t spikes = 0;
};

SegmentResult sort_segment(SegmentInput segment, const SiftParams& params,
                           std::vector<SiftStep>* steps = nullptr);

}  // namespace spikesift
