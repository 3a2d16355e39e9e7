#include "spikesift/dog_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace spikesift {

double gaussian_sigma_for_cutoff(double cutoff_hz, double sample_rate) {
  return sample_rate * std::sqrt(std::numbers::ln2) / (2.0 * std::numbers::pi * cutoff_hz);
}

int box_width_for_sigma(double sigma) {
  // Four boxes of width w have variance 4 (w^2 - 1) / 12.
  const double ideal = std::sqrt(3.0 * sigma * sigma + 1.0);
  int w = 2 * static_cast<int>(std::floor(ideal / 2.0)) + 1;  // odd at or below ideal
  if (std::abs(ideal - (w + 2)) < std::abs(ideal - w)) w += 2;
  return std::max(w, 3);
}

DogKernelSpec design_kernel(double low_hz, double high_hz, double sample_rate) {
  if (!(sample_rate > 0.0) || !(low_hz > 0.0) || !(low_hz < high_hz) ||
      !(high_hz < sample_rate / 2.0)) {
    throw Error("invalid band: need 0 < low < high < sample_rate / 2");
  }
  DogKernelSpec spec;
  spec.sample_rate = sample_rate;
  spec.narrow_width = box_width_for_sigma(gaussian_sigma_for_cutoff(high_hz, sample_rate));
  spec.wide_width = box_width_for_sigma(gaussian_sigma_for_cutoff(low_hz, sample_rate));
  if (spec.wide_width <= spec.narrow_width) {
    throw Error("band too narrow for the sample rate: both cascades round to width " +
                std::to_string(spec.narrow_width));
  }
  return spec;
}

namespace {

// out[i] = mean(in[i-h .. i+h]) with zeros outside the series.
void box_into(std::span<const double> in, std::span<double> out, int w) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  const std::ptrdiff_t h = w / 2;
  const double scale = 1.0 / w;
  double sum = 0.0;
  for (std::ptrdiff_t j = 0; j < std::min(h, n); ++j) sum += in[j];
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (i + h < n) sum += in[i + h];
    out[i] = sum * scale;
    if (i - h >= 0) sum -= in[i - h];
  }
}

void cascade(std::span<const double> in, std::span<double> out, std::span<double> scratch, int w) {
  box_into(in, out, w);
  box_into(out, scratch, w);
  box_into(scratch, out, w);
  box_into(out, scratch, w);
  std::copy(scratch.begin(), scratch.end(), out.begin());
}

}  // namespace

std::vector<double> box_pass(std::span<const double> signal, int w) {
  if (w < 1 || w % 2 == 0) throw Error("box width must be odd and positive");
  std::vector<double> out(signal.size());
  box_into(signal, out, w);
  return out;
}

std::vector<double> dog_filter_series(std::span<const double> signal, const DogKernelSpec& spec) {
  std::vector<double> narrow(signal.size()), wide(signal.size()), scratch(signal.size());
  cascade(signal, narrow, scratch, spec.narrow_width);
  cascade(signal, wide, scratch, spec.wide_width);
  for (std::size_t i = 0; i < narrow.size(); ++i) narrow[i] -= wide[i];
  return narrow;
}

Trace apply_dog(const Recording& recording, const DogKernelSpec& spec, bool invert_polarity,
                unsigned threads) {
  const std::size_t channels = recording.num_channels();
  const std::size_t samples = recording.num_samples();
  Trace out(channels, samples);
  const double sign = invert_polarity ? -1.0 : 1.0;

  auto work = [&](std::size_t first, std::size_t step) {
    std::vector<double> in(samples), narrow(samples), wide(samples), scratch(samples);
    for (std::size_t c = first; c < channels; c += step) {
      const auto raw = recording.channel(c);
      std::transform(raw.begin(), raw.end(), in.begin(),
                     [](std::int16_t v) { return static_cast<double>(v); });
      cascade(in, narrow, scratch, spec.narrow_width);
      cascade(in, wide, scratch, spec.wide_width);
      auto dst = out.channel(c);
      for (std::size_t i = 0; i < samples; ++i) {
        dst[i] = static_cast<float>(sign * (narrow[i] - wide[i]));
      }
    }
  };

  const unsigned workers = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(channels));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  return out;
}

}  // namespace spikesift
