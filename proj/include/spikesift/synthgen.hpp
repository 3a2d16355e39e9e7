#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spikesift/probe_io.hpp"

namespace spikesift {

enum class DriftKind { None, Linear, Jump, Gp };

/// Axial displacement of every neuron over time.
struct DriftRegime {
  DriftKind kind = DriftKind::None;
  double rate_um_per_min = 0.0;  // linear
  double jump_um = 0.0;          // jump
  double jump_time_s = 0.0;
  double gp_scale_um = 10.0;     // gp: marginal std of the offset
  double gp_length_s = 20.0;     // gp: correlation length

  std::string to_string() const;
};

/// "none", "linear:<um_per_min>", "jump:<um>@<s>", "gp" or "gp:<um>".
DriftRegime parse_drift(const std::string& text);

/// Explicit neuron placement; amplitude is the peak voltage (ADC units)
/// seen at distance zero.
struct NeuronPlacement {
  double x_um = 0.0;
  double y_um = 0.0;
  double z_um = 0.0;  // distance from the probe plane
  double amplitude = 0.0;
  double rate_hz = 0.0;
};

struct GeneratorSpec {
  std::size_t channels = 16;
  std::size_t neurons = 10;
  double seconds = 60.0;
  double sample_rate = 20000.0;
  double noise_sigma = 10.0;  // ADC units, white Gaussian
  DriftRegime drift;
  std::uint64_t seed = 1;
  // Random amplitudes set the peak on the nearest channel, in units of the
  // raw noise MAD (0.6745 sigma).
  double amplitude_min_mad = 8.0;
  double amplitude_max_mad = 15.0;
  double rate_min_hz = 1.0;
  double rate_max_hz = 50.0;
  double min_separation_um = 20.0;
  double z_min_um = 5.0;
  double z_max_um = 12.0;
  double dead_time_ms = 2.0;
  std::vector<NeuronPlacement> placements;  // overrides random placement when non-empty
};

struct TruthNeuron {
  int id = 0;
  double x_um = 0.0;
  double y_um = 0.0;
  double z_um = 0.0;
  double amplitude = 0.0;
  double rate_hz = 0.0;
  double width_ms = 0.0;  // negative-lobe width
  std::vector<std::int64_t> spike_times;
};

struct GroundTruth {
  double sample_rate = 0.0;
  std::int64_t num_samples = 0;
  double noise_sigma = 0.0;
  DriftRegime drift;
  std::vector<double> gp_frequencies;  // random Fourier features (gp only)
  std::vector<double> gp_phases;
  std::vector<TruthNeuron> neurons;

  /// Axial offset (um) applied to every neuron at time `t_s`.
  double drift_offset(double t_s) const;
};

struct Synthetic {
  Recording recording;
  GroundTruth truth;
};

/// Biphasic waveform value `t_ms` after the trough, unit trough depth.
double unit_waveform(double t_ms, double width_ms);

/// Peak amplitude at distance `d_um`: amplitude / (1 + d / 25)^2.
double amplitude_at(double amplitude, double d_um);

/// Deterministic in `spec.seed`.
Synthetic generate(const GeneratorSpec& spec);

void write_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth read_truth(const std::filesystem::path& path);

}  // namespace spikesift
