#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "spikesift/dog_filter.hpp"

using namespace spikesift;

namespace {

std::vector<double> impulse_response(const DogKernelSpec& spec, std::size_t n, std::size_t at) {
  std::vector<double> x(n, 0.0);
  x[at] = 1.0;
  return dog_filter_series(x, spec);
}

double rms(std::span<const double> x, std::size_t skip) {
  double acc = 0.0;
  for (std::size_t i = skip; i + skip < x.size(); ++i) acc += x[i] * x[i];
  return std::sqrt(acc / static_cast<double>(x.size() - 2 * skip));
}

std::vector<double> sine(double f, double fs, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
  }
  return x;
}

}  // namespace

TEST_SUITE("dog_filter") {

TEST_CASE("design_kernel closed form") {
  const double fs = 20000.0;
  const double s_hi = fs * std::sqrt(std::log(2.0)) / (2.0 * std::numbers::pi * 3000.0);
  const double s_lo = fs * std::sqrt(std::log(2.0)) / (2.0 * std::numbers::pi * 300.0);
  CHECK(gaussian_sigma_for_cutoff(3000.0, fs) == doctest::Approx(s_hi));
  CHECK(gaussian_sigma_for_cutoff(300.0, fs) == doctest::Approx(s_lo));
  CHECK(s_hi == doctest::Approx(0.883).epsilon(0.001));
  CHECK(s_lo == doctest::Approx(8.83).epsilon(0.001));

  const auto spec = design_kernel(300.0, 3000.0, fs);
  CHECK(spec.narrow_width == 3);
  CHECK(spec.wide_width == 15);
  CHECK(spec.unreliable_edge() == 30);
}

TEST_CASE("box widths are odd, at least 3, and nearest to the moment match") {
  for (double sigma = 0.1; sigma < 40.0; sigma += 0.37) {
    const int w = box_width_for_sigma(sigma);
    CHECK(w % 2 == 1);
    CHECK(w >= 3);
    const double ideal = std::sqrt(3.0 * sigma * sigma + 1.0);
    if (ideal > 3.0) CHECK(std::abs(w - ideal) <= 1.0 + 1e-12);
  }
}

TEST_CASE("invalid bands are rejected") {
  CHECK_THROWS_AS(design_kernel(3000.0, 300.0, 20000.0), Error);
  CHECK_THROWS_AS(design_kernel(300.0, 300.0, 20000.0), Error);
  CHECK_THROWS_AS(design_kernel(0.0, 3000.0, 20000.0), Error);
  CHECK_THROWS_AS(design_kernel(300.0, 12000.0, 20000.0), Error);
}

TEST_CASE("box_pass") {
  const std::vector<double> impulse{0, 0, 1, 0, 0};
  const auto y = box_pass(impulse, 3);
  REQUIRE(y.size() == 5);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(1.0 / 3.0));
  CHECK(y[2] == doctest::Approx(1.0 / 3.0));
  CHECK(y[3] == doctest::Approx(1.0 / 3.0));
  CHECK(y[4] == 0.0);

  const std::vector<double> flat(50, 4.5);
  for (int w : {1, 3, 7, 15}) {
    const auto z = box_pass(flat, w);
    for (std::size_t i = static_cast<std::size_t>(w); i + static_cast<std::size_t>(w) < 50; ++i) {
      CHECK(z[i] == doctest::Approx(4.5));
    }
  }
}

TEST_CASE("four-fold box cascade variance") {
  for (int w : {3, 5, 9, 15}) {
    std::vector<double> x(201, 0.0);
    x[100] = 1.0;
    for (int k = 0; k < 4; ++k) x = box_pass(x, w);
    double mass = 0.0, var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mass += x[i];
      const double d = static_cast<double>(i) - 100.0;
      var += x[i] * d * d;
    }
    CHECK(mass == doctest::Approx(1.0));
    CHECK(var == doctest::Approx(4.0 * (w * w - 1) / 12.0));
  }
}

TEST_CASE("DC input filters to zero away from the edges") {
  const DogKernelSpec spec;
  const std::vector<double> dc(400, -37.0);
  const auto y = dog_filter_series(dc, spec);
  for (std::size_t i = 60; i < 340; ++i) CHECK(std::abs(y[i]) < 1e-9);
}

TEST_CASE("sine attenuation matches the response spectrum") {
  const DogKernelSpec spec;
  const double fs = spec.sample_rate;
  const std::size_t n = 40000;
  const auto h = impulse_response(spec, 257, 128);

  for (double f : {50.0, 1000.0}) {
    const auto x = sine(f, fs, n);
    const double ratio = rms(dog_filter_series(x, spec), 2000) / rms(x, 2000);
    CHECK(ratio == doctest::Approx(oracle::response_gain(h, f, fs)).epsilon(0.01));
    if (f == 50.0) CHECK(ratio <= 0.1);
    if (f == 1000.0) CHECK(ratio >= 0.5);
  }
}

TEST_CASE("linearity") {
  const DogKernelSpec spec;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 50.0);
  std::vector<double> x(3000), y(3000), z(3000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = g(rng);
    y[i] = g(rng);
  }
  const double a = 2.5, b = -0.75;
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = a * x[i] + b * y[i];
  const auto fx = dog_filter_series(x, spec);
  const auto fy = dog_filter_series(y, spec);
  const auto fz = dog_filter_series(z, spec);
  double scale = 0.0, err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale = std::max(scale, std::abs(fz[i]));
    err = std::max(err, std::abs(fz[i] - (a * fx[i] + b * fy[i])));
  }
  CHECK(err <= 1e-9 * scale);
}

TEST_CASE("impulse response is symmetric") {
  const auto h = impulse_response(DogKernelSpec{}, 301, 150);
  for (std::size_t k = 1; k <= 150; ++k) CHECK(std::abs(h[150 - k] - h[150 + k]) <= 1e-9);
}

TEST_CASE("apply_dog matches the series filter and honours polarity") {
  const auto probe = ProbeGeometry::two_column(4);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 30.0);
  std::vector<std::int16_t> s(4 * 2000);
  for (auto& v : s) v = static_cast<std::int16_t>(std::lround(g(rng)));
  const Recording rec(s, 2000, 20000.0, probe);

  const DogKernelSpec spec;
  const auto plain = apply_dog(rec, spec, false, 1);
  const auto threaded = apply_dog(rec, spec, false, 3);
  const auto inverted = apply_dog(rec, spec, true, 1);
  CHECK(plain.data() == threaded.data());
  for (std::size_t c = 0; c < 4; ++c) {
    std::vector<double> x(rec.channel(c).begin(), rec.channel(c).end());
    const auto ref = dog_filter_series(x, spec);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(plain.channel(c)[i] == doctest::Approx(ref[i]).epsilon(1e-5));
      CHECK(inverted.channel(c)[i] == -plain.channel(c)[i]);
    }
  }
}

}
