#include "spikesift/sifter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

namespace spikesift {

WaveformSet extract_waveforms(const TraceSlice& residual, std::span<const int> channels,
                              std::span<const std::int64_t> times, std::int64_t half_window) {
  WaveformSet set;
  set.count = times.size();
  set.channels = channels.size();
  set.width = static_cast<std::size_t>(2 * half_window + 1);
  set.data.assign(set.count * set.dims(), 0.0f);
  const auto n = static_cast<std::int64_t>(residual.num_samples());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::int64_t first = times[i] - half_window;
    const std::int64_t lo = std::max<std::int64_t>(0, first);
    const std::int64_t hi = std::min<std::int64_t>(n, times[i] + half_window + 1);
    for (std::size_t k = 0; k < channels.size(); ++k) {
      const auto src = residual.channel(static_cast<std::size_t>(channels[k]));
      float* dst = set.data.data() + i * set.dims() + k * set.width;
      for (std::int64_t t = lo; t < hi; ++t) {
        dst[t - first] = src[static_cast<std::size_t>(t)];
      }
    }
  }
  return set;
}

std::vector<double> mean_waveform(const WaveformSet& set, std::span<const std::size_t> rows) {
  std::vector<double> mean(set.dims(), 0.0);
  if (rows.empty()) return mean;
  for (auto r : rows) {
    const auto row = set.row(r);
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& v : mean) v *= inv;
  return mean;
}

std::optional<int> select_reference_channel(const PeakTrain& peaks,
                                            const std::vector<bool>& blacklist) {
  std::optional<int> best;
  double best_sum = 0.0;
  for (std::size_t c = 0; c < peaks.channels.size(); ++c) {
    if ((c < blacklist.size() && blacklist[c]) || peaks.channels[c].empty()) continue;
    const double sum = peaks.excursion_sum(c);
    if (!best || sum > best_sum) {
      best = static_cast<int>(c);
      best_sum = sum;
    }
  }
  return best;
}

Projection principal_projection(const WaveformSet& set, std::span<const std::size_t> rows,
                                int max_iterations, double tolerance) {
  const std::size_t n = rows.size();
  const std::size_t dims = set.dims();
  Projection out;
  out.values.assign(n, 0.0);
  if (n == 0) return out;

  std::vector<double> mean(dims, 0.0), start(dims, 0.0);
  for (auto r : rows) {
    const auto row = set.row(r);
    for (std::size_t d = 0; d < dims; ++d) {
      mean[d] += row[d];
      start[d] += std::abs(row[d]);
    }
  }
  for (std::size_t d = 0; d < dims; ++d) mean[d] /= static_cast<double>(n);

  std::vector<double> centered(n * dims);
  double total_variance = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = set.row(rows[i]);
    for (std::size_t d = 0; d < dims; ++d) {
      const double v = row[d] - mean[d];
      centered[i * dims + d] = v;
      total_variance += v * v;
    }
  }
  total_variance /= static_cast<double>(n);

  auto normalize = [](std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& x : v) x /= norm;
    }
    return norm;
  };
  if (total_variance <= 0.0 || normalize(start) == 0.0) return out;

  std::vector<double> axis = std::move(start), scores(n), next(dims);
  for (int it = 0; it < max_iterations; ++it) {
    // next = X^T X axis / n
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = &centered[i * dims];
      scores[i] = std::inner_product(x, x + dims, axis.begin(), 0.0);
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = &centered[i * dims];
      for (std::size_t d = 0; d < dims; ++d) next[d] += scores[i] * x[d];
    }
    const double eigen = normalize(next) / static_cast<double>(n);
    out.iterations = it + 1;
    if (eigen <= 1e-14 * total_variance) return out;  // numerically zero variance
    double change = 0.0;
    for (std::size_t d = 0; d < dims; ++d) change += (next[d] - axis[d]) * (next[d] - axis[d]);
    axis.swap(next);
    if (std::sqrt(change) < tolerance) break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double* x = &centered[i * dims];
    out.values[i] = std::inner_product(x, x + dims, axis.begin(), 0.0);
  }
  out.axis = std::move(axis);
  return out;
}

Bipartition cluster_1d(std::span<const double> points) {
  const std::size_t n = points.size();
  if (n < 2) throw Error("cluster_1d needs at least two points");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });

  // Clusters are contiguous runs of `order`, keyed by their first position.
  struct Cluster {
    std::size_t end;
    double sum;
    std::size_t count;
    std::size_t prev, next;
    unsigned version;
    bool alive;
  };
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<Cluster> clusters(n);
  for (std::size_t i = 0; i < n; ++i) {
    clusters[i] = {i + 1, points[order[i]], 1, i == 0 ? none : i - 1, i + 1 < n ? i + 1 : none, 0,
                   true};
  }

  auto cost = [&](std::size_t a, std::size_t b) {
    const Cluster& x = clusters[a];
    const Cluster& y = clusters[b];
    const double diff = x.sum / static_cast<double>(x.count) - y.sum / static_cast<double>(y.count);
    return diff * diff * static_cast<double>(std::min(x.count, y.count));
  };

  // (cost, left start, left version, right start, right version); min-heap.
  using Entry = std::tuple<double, std::size_t, unsigned, std::size_t, unsigned>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (std::size_t i = 0; i + 1 < n; ++i) heap.emplace(cost(i, i + 1), i, 0u, i + 1, 0u);

  std::size_t alive = n;
  while (alive > 2) {
    const auto [c, left, lver, right, rver] = heap.top();
    heap.pop();
    Cluster& l = clusters[left];
    Cluster& r = clusters[right];
    if (!l.alive || !r.alive || l.version != lver || r.version != rver || l.next != right) continue;

    l.sum = l.sum + r.sum;
    l.count += r.count;
    l.end = r.end;
    l.next = r.next;
    ++l.version;
    r.alive = false;
    if (l.next != none) clusters[l.next].prev = left;
    --alive;

    if (l.prev != none) heap.emplace(cost(l.prev, left), l.prev, clusters[l.prev].version, left, l.version);
    if (l.next != none) heap.emplace(cost(left, l.next), left, l.version, l.next, clusters[l.next].version);
  }

  const std::size_t split = clusters[0].end;
  Bipartition out;
  out.low.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(split));
  out.high.assign(order.begin() + static_cast<std::ptrdiff_t>(split), order.end());
  return out;
}

std::vector<double> difference_vector(std::span<const double> templ, std::size_t channels,
                                      std::size_t width) {
  std::vector<double> out;
  out.reserve(channels * (channels - 1));
  for (std::size_t i = 0; i < channels; ++i) {
    for (std::size_t j = 0; j < channels; ++j) {
      if (i == j) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < width; ++s) {
        best = std::max(best, templ[i * width + s] - templ[j * width + s]);
      }
      out.push_back(best);
    }
  }
  return out;
}

namespace {

double norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum);
}

}  // namespace

bool same_neuron(std::span<const double> dx, std::span<const double> dy, double lambda) {
  if (dx.size() != dy.size()) throw Error("difference vectors differ in length");
  return distance(dx, dy) <= lambda * std::max(norm(dx), norm(dy));
}

std::vector<std::size_t> binary_split_cluster(const WaveformSet& set, double lambda,
                                              SplitMode mode, std::span<const double> target,
                                              int power_iterations, double power_tolerance) {
  std::vector<std::size_t> current(set.count);
  std::iota(current.begin(), current.end(), 0);
  const std::size_t center = set.width / 2;

  while (current.size() > 2) {
    const auto proj = principal_projection(set, current, power_iterations, power_tolerance);
    const auto parts = cluster_1d(proj.values);

    auto to_rows = [&](const std::vector<std::size_t>& local) {
      std::vector<std::size_t> rows;
      rows.reserve(local.size());
      for (auto i : local) rows.push_back(current[i]);
      std::sort(rows.begin(), rows.end());
      return rows;
    };
    auto low = to_rows(parts.low);
    auto high = to_rows(parts.high);

    const auto mean_low = mean_waveform(set, low);
    const auto mean_high = mean_waveform(set, high);
    const auto d_low = difference_vector(mean_low, set.channels, set.width);
    const auto d_high = difference_vector(mean_high, set.channels, set.width);
    if (same_neuron(d_low, d_high, lambda)) break;

    bool keep_low = true;
    if (mode == SplitMode::LargestAmplitude) {
      keep_low = std::abs(mean_low[center]) >= std::abs(mean_high[center]);
    } else {
      if (target.size() != d_low.size()) throw Error("target difference vector has wrong length");
      keep_low = distance(d_low, target) <= distance(d_high, target);
    }
    current = keep_low ? std::move(low) : std::move(high);
  }
  return current;
}

std::vector<std::size_t> template_filter(std::span<const float> candidates,
                                         std::span<const double> templ_peak) {
  const std::size_t k = templ_peak.size();
  const double half_norm2 = 0.5 * std::inner_product(templ_peak.begin(), templ_peak.end(),
                                                     templ_peak.begin(), 0.0);
  if (half_norm2 == 0.0) throw Error("degenerate template: zero peak vector");
  if (k == 0 || candidates.size() % k != 0) throw Error("feature vectors do not match template");

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i * k < candidates.size(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += candidates[i * k + j] * templ_peak[j];
    if (dot >= half_norm2) keep.push_back(i);
  }
  return keep;
}

const char* to_string(Rejection r) {
  switch (r) {
    case Rejection::None: return "accepted";
    case Rejection::TooFewPeaks: return "too few threshold peaks";
    case Rejection::DegenerateTemplate: return "degenerate template";
    case Rejection::TooFewSpikes: return "cluster below n_min";
    case Rejection::BelowThreshold: return "mean amplitude above threshold";
  }
  return "unknown";
}

Extraction extract_unit(const SegmentInput& segment, const PeakTrain& peaks, int ref_channel,
                        const SiftParams& params) {
  const TraceSlice& residual = segment.residual;
  const std::int64_t h = params.half_window;
  const auto length = static_cast<std::int64_t>(residual.num_samples());
  const std::size_t channel_count = residual.num_channels();
  const double theta = segment.thresholds[static_cast<std::size_t>(ref_channel)];
  Extraction out;

  const auto channels = segment.geometry->nearest_channels(
      ref_channel, std::min(params.neighborhood, channel_count));
  const std::size_t k = channels.size();
  const auto width = static_cast<std::size_t>(2 * h + 1);

  // Template formation from threshold crossings away from the segment edges.
  std::vector<std::int64_t> times;
  for (const auto& p : peaks.channels[static_cast<std::size_t>(ref_channel)]) {
    if (p.t >= h && p.t < length - h) times.push_back(p.t);
  }
  if (times.size() < params.n_min) {
    out.rejection = Rejection::TooFewPeaks;
    return out;
  }
  const auto initial = extract_waveforms(residual, channels, times, h);
  const auto core = binary_split_cluster(initial, params.lambda, SplitMode::LargestAmplitude, {},
                                         params.power_iterations, params.power_tolerance);
  const auto templ = mean_waveform(initial, core);
  const auto target = difference_vector(templ, k, width);
  std::vector<double> peak_vector(k);
  for (std::size_t j = 0; j < k; ++j) peak_vector[j] = templ[j * width + static_cast<std::size_t>(h)];

  // Matching: every windowed minimum on the reference channel is a candidate.
  DetectOptions opt;
  opt.refractory = params.refractory;
  opt.local_min_only = true;
  opt.begin = segment.valid_begin;
  opt.end = segment.valid_end;
  const auto minima = detect_peaks(residual.channel(static_cast<std::size_t>(ref_channel)), theta, opt);
  std::vector<float> features(minima.size() * k);
  for (std::size_t i = 0; i < minima.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      features[i * k + j] =
          residual.channel(static_cast<std::size_t>(channels[j]))[static_cast<std::size_t>(minima[i].t)];
    }
  }
  std::vector<std::size_t> survivors;
  try {
    survivors = template_filter(features, peak_vector);
  } catch (const Error&) {
    out.rejection = Rejection::DegenerateTemplate;
    return out;
  }
  if (survivors.size() < params.n_min) {
    out.rejection = Rejection::TooFewSpikes;
    return out;
  }

  std::vector<std::int64_t> candidate_times;
  candidate_times.reserve(survivors.size());
  for (auto i : survivors) candidate_times.push_back(minima[i].t);
  const auto matched = extract_waveforms(residual, channels, candidate_times, h);
  const auto kept = binary_split_cluster(matched, params.lambda, SplitMode::NearestTemplate, target,
                                         params.power_iterations, params.power_tolerance);
  if (kept.size() < params.n_min) {
    out.rejection = Rejection::TooFewSpikes;
    return out;
  }
  const auto final_templ = mean_waveform(matched, kept);
  if (final_templ[static_cast<std::size_t>(h)] > theta) {
    out.rejection = Rejection::BelowThreshold;
    return out;
  }

  Unit& unit = out.unit;
  unit.ref_channel = ref_channel;
  unit.channels = channels;
  unit.width = width;
  unit.templ.assign(final_templ.begin(), final_templ.end());
  std::vector<std::int64_t> local_times;
  local_times.reserve(kept.size());
  for (auto i : kept) local_times.push_back(candidate_times[i]);  // kept is sorted
  for (auto t : local_times) unit.spike_times.push_back(segment.origin + t);

  // Full-probe mean snippet; samples outside the slice do not count.
  std::vector<double> sums(channel_count * width, 0.0);
  std::vector<double> counts(width, 0.0);
  for (auto t : local_times) {
    const std::int64_t lo = std::max<std::int64_t>(0, t - h);
    const std::int64_t hi = std::min<std::int64_t>(length, t + h + 1);
    for (std::int64_t s = lo; s < hi; ++s) counts[static_cast<std::size_t>(s - t + h)] += 1.0;
    for (std::size_t c = 0; c < channel_count; ++c) {
      const auto src = residual.channel(c);
      double* dst = &sums[c * width];
      for (std::int64_t s = lo; s < hi; ++s) dst[s - t + h] += src[static_cast<std::size_t>(s)];
    }
  }
  unit.footprint.resize(channel_count * width);
  for (std::size_t c = 0; c < channel_count; ++c) {
    for (std::size_t s = 0; s < width; ++s) {
      unit.footprint[c * width + s] =
          counts[s] > 0.0 ? static_cast<float>(sums[c * width + s] / counts[s]) : 0.0f;
    }
  }
  return out;
}

void subtract_unit(const TraceSlice& residual, std::int64_t origin, const Unit& unit) {
  const auto h = static_cast<std::int64_t>(unit.width / 2);
  const auto length = static_cast<std::int64_t>(residual.num_samples());
  for (auto abs_t : unit.spike_times) {
    const std::int64_t t = abs_t - origin;
    const std::int64_t lo = std::max<std::int64_t>(0, t - h);
    const std::int64_t hi = std::min<std::int64_t>(length, t + h + 1);
    for (std::size_t c = 0; c < residual.num_channels(); ++c) {
      auto dst = residual.channel(c);
      const float* snippet = &unit.footprint[c * unit.width];
      for (std::int64_t s = lo; s < hi; ++s) dst[static_cast<std::size_t>(s)] -= snippet[s - t + h];
    }
  }
}

namespace {

using Interval = std::pair<std::int64_t, std::int64_t>;  // inclusive

std::vector<Interval> merge_windows(std::span<const std::int64_t> times, std::int64_t reach) {
  std::vector<Interval> out;
  for (auto t : times) {
    if (!out.empty() && t - reach <= out.back().second + 1) {
      out.back().second = std::max(out.back().second, t + reach);
    } else {
      out.emplace_back(t - reach, t + reach);
    }
  }
  return out;
}

// Re-runs threshold detection inside `windows` only. A sample's peak
// status depends on +-refractory neighbours, so outside the windows the
// previous result stands.
void redetect(PeakTrain& peaks, const SegmentInput& segment, std::size_t c,
              const std::vector<Interval>& windows, std::int64_t refractory) {
  const double theta = peaks.thresholds[c];
  if (theta == 0.0) return;
  const auto& old = peaks.channels[c];
  std::vector<Peak> fresh;
  fresh.reserve(old.size());
  std::size_t i = 0;
  for (const auto& [a, b] : windows) {
    while (i < old.size() && old[i].t < a) fresh.push_back(old[i++]);
    while (i < old.size() && old[i].t <= b) ++i;
    DetectOptions opt;
    opt.refractory = refractory;
    opt.begin = std::max(a, segment.valid_begin);
    opt.end = std::min(b + 1, segment.valid_end);
    if (opt.begin < opt.end) {
      for (const auto& p : detect_peaks(segment.residual.channel(c), theta, opt)) fresh.push_back(p);
    }
  }
  while (i < old.size()) fresh.push_back(old[i++]);
  peaks.channels[c] = std::move(fresh);
}

}  // namespace

SegmentResult sort_segment(SegmentInput segment, const SiftParams& params,
                           std::vector<SiftStep>* steps) {
  const std::size_t channel_count = segment.residual.num_channels();
  if (segment.thresholds.size() != channel_count) throw Error("threshold count mismatch");
  if (segment.geometry == nullptr || segment.geometry->size() != channel_count) {
    throw Error("segment geometry does not match channel count");
  }
  SegmentResult result;
  result.begin = segment.origin;
  result.end = segment.origin + static_cast<std::int64_t>(segment.residual.num_samples());

  PeakTrain peaks;
  peaks.thresholds.assign(segment.thresholds.begin(), segment.thresholds.end());
  peaks.channels.resize(channel_count);
  for (std::size_t c = 0; c < channel_count; ++c) {
    if (peaks.thresholds[c] == 0.0) continue;
    DetectOptions opt;
    opt.refractory = params.refractory;
    opt.begin = segment.valid_begin;
    opt.end = segment.valid_end;
    peaks.channels[c] = detect_peaks(segment.residual.channel(c), peaks.thresholds[c], opt);
  }

  std::vector<bool> blacklist(channel_count, false);
  const std::size_t max_iterations =
      params.max_iterations > 0 ? params.max_iterations : 64 * channel_count;
  for (std::size_t iteration = 0; iteration < max_iterations; ++iteration) {
    const auto ref = select_reference_channel(peaks, blacklist);
    if (!ref) break;
    SiftStep step{*ref, peaks.excursion_sum(static_cast<std::size_t>(*ref))};

    auto extraction = extract_unit(segment, peaks, *ref, params);
    step.rejection = extraction.rejection;
    if (!extraction.accepted()) {
      blacklist[static_cast<std::size_t>(*ref)] = true;
      if (steps) steps->push_back(step);
      continue;
    }
    Unit& unit = extraction.unit;
    unit.local_id = static_cast<int>(result.units.size());
    step.spikes = unit.spike_times.size();

    std::vector<std::int64_t> local(unit.spike_times.size());
    for (std::size_t i = 0; i < local.size(); ++i) local[i] = unit.spike_times[i] - segment.origin;
    if (params.subtract) {
      subtract_unit(segment.residual, segment.origin, unit);
      const auto windows = merge_windows(local, params.half_window + params.refractory);
      for (std::size_t c = 0; c < channel_count; ++c) {
        redetect(peaks, segment, c, windows, params.refractory);
      }
    } else {
      const auto windows = merge_windows(local, params.half_window);
      for (auto& train : peaks.channels) {
        std::erase_if(train, [&](const Peak& p) {
          auto it = std::lower_bound(windows.begin(), windows.end(), p.t,
                                     [](const Interval& w, std::int64_t t) { return w.second < t; });
          return it != windows.end() && it->first <= p.t;
        });
      }
    }
    result.units.push_back(std::move(unit));
    if (steps) steps->push_back(step);
  }
  return result;
}

}  // namespace spikesift
