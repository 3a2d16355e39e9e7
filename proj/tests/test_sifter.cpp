#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "spikesift/evaluator.hpp"
#include "spikesift/pipeline.hpp"
#include "spikesift/sifter.hpp"
#include "test_util.hpp"

using namespace spikesift;

namespace {

constexpr double kFs = 20000.0;

// Filtered recording plus a SegmentInput spanning all of it.
struct Scene {
  Recording recording;
  Prepared prepared;

  explicit Scene(Recording r, double kappa = 10.0) : recording(std::move(r)) {
    Config config;
    config.kappa = kappa;
    prepared = prepare(recording, config);
  }

  SegmentInput input() {
    SegmentInput in;
    in.residual = TraceSlice(prepared.filtered);
    in.origin = 0;
    in.valid_begin = prepared.edge_guard;
    in.valid_end = static_cast<std::int64_t>(recording.num_samples()) - prepared.edge_guard;
    in.thresholds = prepared.thresholds;
    in.geometry = &recording.geometry();
    return in;
  }
};

Source over_channel(const ProbeGeometry& g, int channel, double peak, std::vector<std::int64_t> times,
                    double width_ms = 0.35) {
  Source s;
  s.x_um = g.channel(channel).x_um;
  s.y_um = g.channel(channel).y_um;
  s.z_um = 8.0;
  s.peak = peak;
  s.width_ms = width_ms;
  s.times = std::move(times);
  return s;
}

double score_of(const std::vector<std::int64_t>& unit, const std::vector<std::int64_t>& truth) {
  const auto m = match_spike_trains(unit, truth, 10);
  return score_pair(unit.size(), truth.size(), m).score;
}

double best_score(const SegmentResult& r, const std::vector<std::int64_t>& truth) {
  double best = -1.0;
  for (const auto& u : r.units) best = std::max(best, score_of(u.spike_times, truth));
  return best;
}

WaveformSet random_set(std::mt19937_64& rng, std::size_t count, std::size_t channels,
                       std::size_t width) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  WaveformSet set;
  set.count = count;
  set.channels = channels;
  set.width = width;
  set.data.resize(count * channels * width);
  // A few latent directions so the covariance has a clear leading axis.
  std::vector<std::vector<float>> axes(3, std::vector<float>(set.dims()));
  for (auto& a : axes) for (auto& v : a) v = g(rng);
  const float scales[3] = {6.0f, 2.0f, 1.0f};
  for (std::size_t i = 0; i < count; ++i) {
    float coef[3];
    for (int k = 0; k < 3; ++k) coef[k] = scales[k] * g(rng);
    for (std::size_t d = 0; d < set.dims(); ++d) {
      float v = 0.3f * g(rng);
      for (int k = 0; k < 3; ++k) v += coef[k] * axes[static_cast<std::size_t>(k)][d];
      set.data[i * set.dims() + d] = v;
    }
  }
  return set;
}

}  // namespace

TEST_SUITE("sifter") {

TEST_CASE("select_reference_channel") {
  PeakTrain train;
  train.channels = {{}, {{10, -15, 5}}, {{10, -12, 2}, {40, -12, 2}, {70, -12, 2}}};
  train.thresholds = {-10, -10, -10};
  CHECK(select_reference_channel(train, {false, false, false}) == 2);
  CHECK(select_reference_channel(train, {false, false, true}) == 1);
  CHECK_FALSE(select_reference_channel(train, {true, true, true}).has_value());
  CHECK_FALSE(select_reference_channel(train, {false, true, true}).has_value());

  PeakTrain tie;
  tie.channels = {{{5, -13, 3}}, {{5, -13, 3}}};
  tie.thresholds = {-10, -10};
  CHECK(select_reference_channel(tie, {false, false}) == 0);
}

TEST_CASE("principal_projection of identical waveforms is zero") {
  WaveformSet set;
  set.count = 2;
  set.channels = 1;
  set.width = 3;
  set.data = {1, -2, 3, 1, -2, 3};
  const std::vector<std::size_t> rows{0, 1};
  const auto p = principal_projection(set, rows);
  CHECK(p.values == std::vector<double>{0.0, 0.0});
}

TEST_CASE("principal_projection on diagonal covariance") {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> g(0.0f, 1.0f);
  WaveformSet set;
  set.count = 4000;
  set.channels = 1;
  set.width = 2;
  for (std::size_t i = 0; i < set.count; ++i) {
    set.data.push_back(std::sqrt(2.0f) * g(rng));
    set.data.push_back(g(rng));
  }
  std::vector<std::size_t> rows(set.count);
  std::iota(rows.begin(), rows.end(), 0);
  const auto p = principal_projection(set, rows);
  const auto ref = oracle::dominant_covariance_eigen(set.data, set.count, 2);
  const double cosine = std::abs(p.axis[0] * ref.vector[0] + p.axis[1] * ref.vector[1]);
  CHECK(cosine >= 0.999);
  CHECK(std::abs(p.axis[0]) >= 0.99);
}

TEST_CASE("projection variance equals the leading eigenvalue") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto set = random_set(rng, 60, 5, 9);
    std::vector<std::size_t> rows(set.count);
    std::iota(rows.begin(), rows.end(), 0);
    const auto p = principal_projection(set, rows);
    const auto ref = oracle::dominant_covariance_eigen(set.data, set.count, set.dims());
    double mean = 0.0, var = 0.0;
    for (double v : p.values) mean += v;
    mean /= static_cast<double>(p.values.size());
    for (double v : p.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(p.values.size());
    CHECK(var == doctest::Approx(ref.value).epsilon(0.001));
  }
}

TEST_CASE("cluster_1d examples") {
  const std::vector<double> a{10.0, 0.0, 10.1, 0.1};
  const auto pa = cluster_1d(a);
  CHECK(std::set<std::size_t>(pa.low.begin(), pa.low.end()) == std::set<std::size_t>{1, 3});
  CHECK(std::set<std::size_t>(pa.high.begin(), pa.high.end()) == std::set<std::size_t>{0, 2});

  const std::vector<double> b{0.0, 1.0, 2.0};
  const auto pb = cluster_1d(b);
  CHECK(pb.low == std::vector<std::size_t>{0, 1});
  CHECK(pb.high == std::vector<std::size_t>{2});

  CHECK_THROWS_AS(cluster_1d(std::vector<double>{1.0}), Error);
}

TEST_CASE("cluster_1d agrees with the quadratic agglomerator") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 120;
    std::vector<double> x(n);
    if (trial % 3 == 0) {
      for (auto& v : x) v = static_cast<double>(rng() % 6);  // many exact ties
    } else {
      std::normal_distribution<double> g(0.0, 1.0);
      for (auto& v : x) v = g(rng) + (rng() % 2 ? 4.0 : 0.0);
    }
    const auto got = cluster_1d(x);
    const auto ref = oracle::agglomerate(x);
    CHECK(got.low == ref.first);
    CHECK(got.high == ref.second);
  }
}

TEST_CASE("cluster_1d is invariant under increasing affine maps") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 80;
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng) + (rng() % 3 == 0 ? 5.0 : 0.0);
    const auto base = cluster_1d(x);
    for (auto [a, b] : {std::pair{2.0, 0.0}, std::pair{0.25, -3.0}, std::pair{7.0, 100.0}}) {
      std::vector<double> y(x);
      for (auto& v : y) v = a * v + b;
      const auto moved = cluster_1d(y);
      CHECK(moved.low == base.low);
      CHECK(moved.high == base.high);
    }
  }
}

TEST_CASE("difference_vector") {
  const std::vector<double> two{-5, -1, -2, -4};
  CHECK(difference_vector(two, 2, 2) == std::vector<double>{3.0, 3.0});

  std::vector<double> same;
  for (int c = 0; c < 5; ++c) for (double v : {-3.0, 1.0, 2.0}) same.push_back(v);
  const auto d = difference_vector(same, 5, 3);
  CHECK(d.size() == 20);
  for (double v : d) CHECK(v == 0.0);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 10.0);
  std::vector<double> w(5 * 7);
  for (auto& v : w) v = g(rng);
  std::vector<double> shifted(w);
  for (auto& v : shifted) v += 12.5;
  const auto dw = difference_vector(w, 5, 7);
  const auto ds = difference_vector(shifted, 5, 7);
  for (std::size_t i = 0; i < dw.size(); ++i) CHECK(ds[i] == doctest::Approx(dw[i]));

  // Pair order is i-major over ordered pairs.
  std::size_t idx = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      if (i == j) continue;
      double best = -1e300;
      for (std::size_t s = 0; s < 7; ++s) best = std::max(best, w[i * 7 + s] - w[j * 7 + s]);
      CHECK(dw[idx++] == best);
    }
  }
}

TEST_CASE("same_neuron") {
  std::vector<double> x(20, 0.0), y(20, 0.0);
  x[0] = 3;
  x[1] = 4;
  CHECK(same_neuron(x, x, 0.01));
  y[0] = 6;
  y[1] = 8;
  CHECK_FALSE(same_neuron(x, y, 0.4));
  for (double lp : {0.0, 0.1, 0.39}) {
    std::vector<double> z(x);
    for (auto& v : z) v *= 1.0 + lp;
    CHECK(same_neuron(x, z, 0.4));
  }
}

TEST_CASE("template_filter") {
  const std::vector<double> t{-4, -2, 0, 0, 0};
  CHECK(template_filter(std::vector<float>{-1, 0, 0, 0, 0}, t).empty());
  CHECK(template_filter(std::vector<float>{-4, -2, 0, 0, 0}, t) == std::vector<std::size_t>{0});
  CHECK(template_filter(std::vector<float>{-2, -1, 0, 0, 0}, t) == std::vector<std::size_t>{0});
  const std::vector<float> mixed{-1, 0, 0, 0, 0, -5, -3, 1, 0, 0, -2, -1, 0, 0, 0};
  CHECK(template_filter(mixed, t) == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(template_filter(mixed, std::vector<double>(5, 0.0)), Error);
}

TEST_CASE("binary_split_cluster base cases and non-emptiness") {
  WaveformSet one;
  one.count = 1;
  one.channels = 2;
  one.width = 3;
  one.data = {1, 2, 3, 4, 5, 6};
  CHECK(binary_split_cluster(one, 0.4, SplitMode::LargestAmplitude) == std::vector<std::size_t>{0});

  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 40; ++trial) {
    const auto set = random_set(rng, 2 + rng() % 60, 5, 7);
    const auto kept = binary_split_cluster(set, 0.4, SplitMode::LargestAmplitude);
    CHECK_FALSE(kept.empty());
    CHECK(std::is_sorted(kept.begin(), kept.end()));
    const std::vector<double> target(20, 1.0);
    CHECK_FALSE(binary_split_cluster(set, 0.4, SplitMode::NearestTemplate, target).empty());
  }
}

TEST_CASE("binary_split_cluster keeps one clean neuron whole") {
  const auto g = ProbeGeometry::two_column(16);
  std::mt19937_64 rng(40);
  const std::size_t n = 10 * static_cast<std::size_t>(kFs);
  auto train = random_train(rng, 20.0, n, kFs);
  Scene scene(render(g, {over_channel(g, 6, 100.0, train)}, n, kFs, 10.0, 41));
  const auto channels = g.nearest_channels(6, 5);
  const auto set = extract_waveforms(TraceSlice(scene.prepared.filtered), channels, train, 20);
  const auto kept = binary_split_cluster(set, 0.4, SplitMode::LargestAmplitude);
  CHECK(kept.size() == set.count);
}

TEST_CASE("binary_split_cluster separates the louder of two neurons") {
  const auto g = ProbeGeometry::two_column(16);
  std::mt19937_64 rng(50);
  const std::size_t n = 10 * static_cast<std::size_t>(kFs);
  auto loud = random_train(rng, 15.0, n, kFs);
  auto quiet = random_train(rng, 15.0, n, kFs);
  // Drop coincidences so every window holds one spike.
  std::vector<std::int64_t> q;
  for (auto t : quiet) {
    auto it = std::lower_bound(loud.begin(), loud.end(), t - 45);
    if (it == loud.end() || *it > t + 45) q.push_back(t);
  }
  Source a = over_channel(g, 6, 100.0, loud);
  Source b = over_channel(g, 8, 60.0, q);
  b.x_um += 10.0;
  Scene scene(render(g, {a, b}, n, kFs, 10.0, 51));

  std::vector<std::int64_t> all(loud);
  all.insert(all.end(), q.begin(), q.end());
  std::sort(all.begin(), all.end());
  const auto set = extract_waveforms(TraceSlice(scene.prepared.filtered), g.nearest_channels(6, 5),
                                     all, 20);
  const auto kept = binary_split_cluster(set, 0.4, SplitMode::LargestAmplitude);
  const std::set<std::int64_t> loud_set(loud.begin(), loud.end());
  std::size_t from_loud = 0;
  for (auto i : kept) from_loud += loud_set.count(all[i]);
  CHECK(from_loud == kept.size());
  CHECK(from_loud >= loud.size() * 9 / 10);
}

TEST_CASE("extract_unit recovers a single neuron") {
  const auto g = ProbeGeometry::two_column(16);
  std::mt19937_64 rng(60);
  const std::size_t n = 10 * static_cast<std::size_t>(kFs);
  const auto train = random_train(rng, 10.0, n, kFs);
  // 12 noise MADs on the nearest channel.
  Scene scene(render(g, {over_channel(g, 9, 12.0 * 0.6745 * 10.0, train)}, n, kFs, 10.0, 61));
  auto input = scene.input();
  const auto ref = select_reference_channel(scene.prepared.peaks,
                                            std::vector<bool>(g.size(), false));
  REQUIRE(ref.has_value());
  CHECK(*ref == 9);
  const auto got = extract_unit(input, scene.prepared.peaks, *ref, sift_params(Config{}, kFs));
  REQUIRE(got.accepted());
  const auto m = match_spike_trains(got.unit.spike_times, train, 10);
  CHECK(static_cast<double>(m) >= 0.95 * static_cast<double>(train.size()));
  CHECK(got.unit.channels.front() == 9);
  CHECK(got.unit.templ.size() == 5 * got.unit.width);
  CHECK(got.unit.footprint.size() == g.size() * got.unit.width);
  CHECK(got.unit.templ[20] <= scene.prepared.thresholds[9]);
}

TEST_CASE("extract_unit rejects noise and sparse neurons") {
  const auto g = ProbeGeometry::two_column(16);
  const std::size_t n = 10 * static_cast<std::size_t>(kFs);
  {
    Scene scene(render(g, {}, n, kFs, 10.0, 70));
    auto input = scene.input();
    for (int c = 0; c < 16; ++c) {
      CHECK_FALSE(extract_unit(input, scene.prepared.peaks, c, sift_params(Config{}, kFs)).accepted());
    }
    CHECK(sort_segment(scene.input(), sift_params(Config{}, kFs)).units.empty());
  }
  {
    Scene scene(render(g, {over_channel(g, 4, 150.0, {20000, 60000, 120000})}, n, kFs, 10.0, 71));
    auto input = scene.input();
    const auto got = extract_unit(input, scene.prepared.peaks, 4, sift_params(Config{}, kFs));
    CHECK_FALSE(got.accepted());
    CHECK((got.rejection == Rejection::TooFewPeaks || got.rejection == Rejection::TooFewSpikes));
  }
}

TEST_CASE("subtract_unit") {
  const auto g = ProbeGeometry::two_column(4);
  Trace trace(4, 100);
  Unit unit;
  unit.width = 5;
  unit.spike_times = {50};
  std::mt19937_64 rng(5);
  std::normal_distribution<float> w(0.0f, 9.0f);
  for (std::size_t i = 0; i < 4 * 5; ++i) unit.footprint.push_back(w(rng));
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t s = 0; s < 5; ++s) trace.channel(c)[48 + s] = unit.footprint[c * 5 + s];
  }
  TraceSlice slice(trace);
  Unit none = unit;
  none.spike_times.clear();
  const auto before = trace.data();
  subtract_unit(slice, 0, none);
  CHECK(trace.data() == before);
  subtract_unit(slice, 0, unit);
  for (float v : trace.data()) CHECK(v == 0.0f);

  // Clipped windows and an absolute origin.
  Trace edge(4, 10);
  TraceSlice eslice(edge);
  Unit u2 = unit;
  u2.spike_times = {1000, 1009};
  subtract_unit(eslice, 1000, u2);
  CHECK(edge.channel(0)[0] == -unit.footprint[2]);
  CHECK(edge.channel(0)[9] == -unit.footprint[2]);
  CHECK(edge.channel(0)[8] == -unit.footprint[1]);
}

TEST_CASE("subtraction lowers residual energy around spikes") {
  const auto g = ProbeGeometry::two_column(16);
  std::mt19937_64 rng(80);
  const std::size_t n = 8 * static_cast<std::size_t>(kFs);
  const auto train = random_train(rng, 15.0, n, kFs);
  Scene scene(render(g, {over_channel(g, 7, 120.0, train)}, n, kFs, 10.0, 81));
  auto input = scene.input();
  const auto got = extract_unit(input, scene.prepared.peaks, 7, sift_params(Config{}, kFs));
  REQUIRE(got.accepted());
  auto energy = [&] {
    double e = 0.0;
    for (auto t : train) {
      for (std::int64_t k = -20; k <= 20; ++k) {
        const float v = scene.prepared.filtered.channel(7)[static_cast<std::size_t>(t + k)];
        e += v * v;
      }
    }
    return e;
  };
  const double before = energy();
  subtract_unit(input.residual, 0, got.unit);
  CHECK(energy() < 0.2 * before);
}

TEST_CASE("sort_segment recovers two separated neurons, larger first") {
  const auto g = ProbeGeometry::two_column(16);
  std::mt19937_64 rng(90);
  const std::size_t n = 10 * static_cast<std::size_t>(kFs);
  const auto big = random_train(rng, 12.0, n, kFs);
  const auto small = random_train(rng, 12.0, n, kFs);
  Scene scene(render(g, {over_channel(g, 1, 120.0, big), over_channel(g, 14, 60.0, small)}, n, kFs,
                     10.0, 91));
  std::vector<SiftStep> steps;
  const auto r = sort_segment(scene.input(), sift_params(Config{}, kFs), &steps);
  REQUIRE(r.units.size() >= 2);
  CHECK(score_of(r.units[0].spike_times, big) > 0.95);
  CHECK(best_score(r, small) > 0.95);
  CHECK(r.units.size() == 2);
}

TEST_CASE("sort_segment invariants on generated data") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    GeneratorSpec spec;
    spec.seconds = 10.0;
    spec.neurons = 6;
    spec.seed = seed;
    const auto synth = generate(spec);
    Scene scene(synth.recording);
    std::vector<SiftStep> steps;
    const auto params = sift_params(Config{}, kFs);
    const auto r = sort_segment(scene.input(), params, &steps);

    std::size_t accepted = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (steps[i].rejection == Rejection::None) ++accepted;
      if (i > 0) CHECK(steps[i].excursion_sum <= steps[i - 1].excursion_sum);
    }
    CHECK(accepted == r.units.size());
    for (std::size_t i = 0; i < r.units.size(); ++i) {
      const auto& u = r.units[i];
      CHECK(u.local_id == static_cast<int>(i));
      CHECK(u.spike_times.size() >= params.n_min);
      CHECK(std::adjacent_find(u.spike_times.begin(), u.spike_times.end(),
                               std::greater_equal<>()) == u.spike_times.end());
      CHECK(u.templ[static_cast<std::size_t>(params.half_window)] <=
            scene.prepared.thresholds[static_cast<std::size_t>(u.ref_channel)]);
    }
  }
}

TEST_CASE("sorting is invariant to amplitude scaling") {
  GeneratorSpec spec;
  spec.seconds = 10.0;
  spec.neurons = 5;
  spec.seed = 3;
  const auto synth = generate(spec);
  Scene base(synth.recording);
  const auto params = sift_params(Config{}, kFs);
  const auto ref = sort_segment(base.input(), params);
  for (float alpha : {0.5f, 2.0f, 3.0f}) {
    Scene scaled(synth.recording);
    for (auto& v : scaled.prepared.filtered.data()) v *= alpha;
    for (auto& t : scaled.prepared.thresholds) t *= alpha;
    for (auto& ch : scaled.prepared.peaks.channels) {
      for (auto& p : ch) {
        p.value *= alpha;
        p.excursion *= alpha;
      }
    }
    const auto got = sort_segment(scaled.input(), params);
    REQUIRE(got.units.size() == ref.units.size());
    for (std::size_t i = 0; i < ref.units.size(); ++i) {
      CHECK(got.units[i].spike_times == ref.units[i].spike_times);
    }
  }
}

TEST_CASE("subtraction helps a neuron hidden under a larger one") {
  const auto g = ProbeGeometry::two_column(16);
  std::mt19937_64 rng(100);
  const std::size_t n = 20 * static_cast<std::size_t>(kFs);
  const auto big = random_train(rng, 20.0, n, kFs);
  // 30% of the small neuron's spikes land within 1 ms of a big spike.
  std::vector<std::int64_t> small;
  std::uniform_int_distribution<std::int64_t> offset(-18, 18);
  for (std::size_t i = 0; i < big.size(); i += 2) {
    if (small.size() % 10 < 3) small.push_back(big[i] + offset(rng));
    else small.push_back(big[i] + 300 + offset(rng));
  }
  std::sort(small.begin(), small.end());
  Source a = over_channel(g, 6, 140.0, big);
  Source b = over_channel(g, 8, 70.0, small, 0.45);
  b.x_um += 12.0;
  Scene with(render(g, {a, b}, n, kFs, 10.0, 101));
  Scene without(render(g, {a, b}, n, kFs, 10.0, 101));
  auto on = sift_params(Config{}, kFs);
  auto off = on;
  off.subtract = false;
  const double s_on = best_score(sort_segment(with.input(), on), small);
  const double s_off = best_score(sort_segment(without.input(), off), small);
  CHECK(s_on > s_off);
}

}
