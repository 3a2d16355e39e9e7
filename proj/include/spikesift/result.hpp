#pragma once

#include <cstdint>
#include <vector>

namespace spikesift {

/// One putative neuron found inside a segment.
struct Unit {
  int local_id = 0;
  int ref_channel = 0;
  std::vector<int> channels;             // neighbourhood of ref_channel, ref first
  std::vector<std::int64_t> spike_times;  // absolute sample indices, increasing
  std::size_t width = 0;                  // samples per channel window (2h + 1)
  std::vector<float> templ;               // channels.size() x width mean waveform
  std::vector<float> footprint;           // num_channels x width mean snippet

  bool operator==(const Unit&) const = default;
};

struct SegmentResult {
  std::int64_t begin = 0;  // absolute sample range [begin, end)
  std::int64_t end = 0;
  std::vector<Unit> units;  // local ids in acceptance order

  bool operator==(const SegmentResult&) const = default;
};

/// Provenance of one local unit: which global id it carries and how it
/// was linked to the previous segment.
struct UnitMatch {
  int segment = 0;
  int local_id = 0;
  int global_id = 0;
  int previous_local_id = -1;  // -1 when the unit started a fresh global id
  double distance = 0.0;       // amplitude-vector distance at the segment shift

  bool operator==(const UnitMatch&) const = default;
};

struct GlobalUnit {
  int id = 0;
  std::vector<std::int64_t> spike_times;
  std::vector<int> segments;

  bool operator==(const GlobalUnit&) const = default;
};

struct SortResult {
  double sample_rate = 0.0;
  std::int64_t num_samples = 0;
  int num_channels = 0;
  std::vector<SegmentResult> segments;
  std::vector<double> segment_shifts;  // shift (um) between segment i-1 and i; [0] = 0
  std::vector<UnitMatch> matches;
  std::vector<GlobalUnit> units;

  std::vector<std::int64_t> boundaries() const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 1; i < segments.size(); ++i) out.push_back(segments[i].begin);
    return out;
  }

  bool operator==(const SortResult&) const = default;
};

}  // namespace spikesift
