#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spikesift {

/// Library-wide error type. Data problems (bad files, invalid
/// parameters) surface as this; programming errors stay as asserts.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Channel-major block of filtered voltage, C x T, stored as float.
class Trace {
 public:
  Trace() = default;
  Trace(std::size_t channels, std::size_t samples)
      : channels_(channels), samples_(samples), data_(channels * samples, 0.0f) {}

  std::size_t num_channels() const { return channels_; }
  std::size_t num_samples() const { return samples_; }

  std::span<float> channel(std::size_t c) {
    return {data_.data() + c * samples_, samples_};
  }
  std::span<const float> channel(std::size_t c) const {
    return {data_.data() + c * samples_, samples_};
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

 private:
  std::size_t channels_ = 0;
  std::size_t samples_ = 0;
  std::vector<float> data_;
};

/// Mutable window [begin, begin + length) of every channel of a Trace.
/// Disjoint slices of one Trace may be written from different threads.
class TraceSlice {
 public:
  TraceSlice() = default;
  TraceSlice(Trace& trace, std::size_t begin, std::size_t length)
      : base_(trace.data().data()),
        stride_(trace.num_samples()),
        channels_(trace.num_channels()),
        begin_(begin),
        length_(length) {
    if (begin + length > trace.num_samples()) {
      throw Error("trace slice out of range");
    }
  }
  explicit TraceSlice(Trace& trace) : TraceSlice(trace, 0, trace.num_samples()) {}

  std::size_t num_channels() const { return channels_; }
  std::size_t num_samples() const { return length_; }
  std::size_t begin() const { return begin_; }

  std::span<float> channel(std::size_t c) const {
    return {base_ + c * stride_ + begin_, length_};
  }

 private:
  float* base_ = nullptr;
  std::size_t stride_ = 0;
  std::size_t channels_ = 0;
  std::size_t begin_ = 0;
  std::size_t length_ = 0;
};

}  // namespace spikesift
