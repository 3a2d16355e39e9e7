#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spikesift/result.hpp"
#include "spikesift/trace.hpp"

namespace spikesift {

struct Channel {
  int id = 0;
  double x_um = 0.0;  // lateral
  double y_um = 0.0;  // axial, the drift axis
};

/// Electrode layout. Channel ids are dense 0..C-1 and positions unique.
/// Drift is modelled along y only.
class ProbeGeometry {
 public:
  ProbeGeometry() = default;
  /// Channels may be given in any order; they are stored sorted by id.
  explicit ProbeGeometry(std::vector<Channel> channels);

  std::size_t size() const { return channels_.size(); }
  const Channel& channel(int id) const;
  const std::vector<Channel>& channels() const { return channels_; }

  /// k channel ids ordered by distance to `id` (ties: lower id first).
  /// The channel itself is always first.
  std::vector<int> nearest_channels(int id, std::size_t k) const;

  /// Channels grouped by identical lateral coordinate, each group sorted
  /// by axial position. Groups are ordered by x.
  const std::vector<std::vector<int>>& columns() const { return columns_; }

  /// Two-column layout used by the synthetic generator.
  static ProbeGeometry two_column(std::size_t channels, double pitch_um = 15.0,
                                  double column_spacing_um = 32.0);

 private:
  std::vector<Channel> channels_;
  std::vector<std::vector<int>> columns_;
};

/// Raw multichannel recording, stored channel-major (C x T) in int16 ADC units.
class Recording {
 public:
  Recording() = default;
  Recording(std::vector<std::int16_t> samples, std::size_t num_samples, double sample_rate,
            ProbeGeometry geometry);

  std::size_t num_channels() const { return geometry_.size(); }
  std::size_t num_samples() const { return num_samples_; }
  double sample_rate() const { return sample_rate_; }
  double duration_seconds() const { return static_cast<double>(num_samples_) / sample_rate_; }
  const ProbeGeometry& geometry() const { return geometry_; }

  std::span<const std::int16_t> channel(std::size_t c) const {
    return {samples_.data() + c * num_samples_, num_samples_};
  }
  const std::vector<std::int16_t>& samples() const { return samples_; }

 private:
  std::vector<std::int16_t> samples_;
  std::size_t num_samples_ = 0;
  double sample_rate_ = 0.0;
  ProbeGeometry geometry_;
};

ProbeGeometry parse_probe(std::istream& in);
ProbeGeometry read_probe(const std::filesystem::path& path);
void write_probe(const ProbeGeometry& geometry, const std::filesystem::path& path);

/// Reads little-endian, frame-interleaved int16 samples.
Recording load_recording(const std::filesystem::path& signal, const std::filesystem::path& probe,
                         double sample_rate);
Recording load_recording(const std::filesystem::path& signal, ProbeGeometry geometry,
                         double sample_rate);
void write_signal(const Recording& recording, const std::filesystem::path& path);

/// Writes `spikes.csv` and `units.json` into `dir` (created if missing).
void write_results(const SortResult& result, const std::filesystem::path& dir);
SortResult read_results(const std::filesystem::path& dir);

}  // namespace spikesift
