#include "spikesift/stitcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace spikesift {

AmplitudeVector amplitude_vector(std::span<const float> footprint, std::size_t channels,
                                 std::size_t width) {
  if (footprint.size() != channels * width) throw Error("footprint size mismatch");
  AmplitudeVector out(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < width; ++s) best = std::max(best, -double{footprint[c * width + s]});
    out[c] = width > 0 ? best : 0.0;
  }
  return out;
}

AmplitudeVector shift_amplitudes(std::span<const double> amplitudes, const ProbeGeometry& geometry,
                                 double delta_um) {
  if (amplitudes.size() != geometry.size()) throw Error("amplitude vector length mismatch");
  AmplitudeVector out(amplitudes.begin(), amplitudes.end());
  for (const auto& column : geometry.columns()) {
    if (column.size() < 2) continue;
    for (int id : column) {
      const double q = geometry.channel(id).y_um - delta_um;
      const Channel& lowest = geometry.channel(column.front());
      const Channel& highest = geometry.channel(column.back());
      if (q <= lowest.y_um) {
        out[static_cast<std::size_t>(id)] = amplitudes[static_cast<std::size_t>(lowest.id)];
        continue;
      }
      if (q >= highest.y_um) {
        out[static_cast<std::size_t>(id)] = amplitudes[static_cast<std::size_t>(highest.id)];
        continue;
      }
      const auto upper = std::upper_bound(column.begin(), column.end(), q, [&](double y, int c) {
        return y < geometry.channel(c).y_um;
      });
      const int hi = *upper;
      const int lo = *(upper - 1);
      const double y0 = geometry.channel(lo).y_um;
      const double y1 = geometry.channel(hi).y_um;
      const double a0 = amplitudes[static_cast<std::size_t>(lo)];
      const double a1 = amplitudes[static_cast<std::size_t>(hi)];
      out[static_cast<std::size_t>(id)] = a0 + (a1 - a0) * ((q - y0) / (y1 - y0));
    }
  }
  return out;
}

std::vector<double> shift_grid(double d_max_um, double step_um) {
  if (!(step_um > 0.0) || d_max_um < 0.0) throw Error("invalid shift grid");
  const auto steps = static_cast<int>(std::floor(d_max_um / step_um + 1e-9));
  std::vector<double> grid;
  for (int k = -steps; k <= steps; ++k) grid.push_back(k * step_um);
  return grid;
}

namespace {

double distance(const AmplitudeVector& a, const AmplitudeVector& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum);
}

double norm(const AmplitudeVector& a) {
  double sum = 0.0;
  for (double v : a) sum += v * v;
  return std::sqrt(sum);
}

std::vector<AmplitudeVector> shifted(const std::vector<AmplitudeVector>& in,
                                     const ProbeGeometry& geometry, double delta) {
  std::vector<AmplitudeVector> out;
  out.reserve(in.size());
  for (const auto& a : in) out.push_back(shift_amplitudes(a, geometry, delta));
  return out;
}

std::vector<AmplitudeVector> amplitudes_of(const std::vector<Unit>& units, std::size_t channels) {
  std::vector<AmplitudeVector> out;
  out.reserve(units.size());
  for (const auto& u : units) out.push_back(amplitude_vector(u.footprint, channels, u.width));
  return out;
}

}  // namespace

Assignment matching_cost(const std::vector<AmplitudeVector>& first,
                         const std::vector<AmplitudeVector>& second, const ProbeGeometry& geometry,
                         double delta_um) {
  const auto a = shifted(first, geometry, delta_um / 2.0);
  const auto b = shifted(second, geometry, -delta_um / 2.0);
  std::vector<double> cost(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) cost[i * b.size() + j] = distance(a[i], b[j]);
  }
  return solve_assignment(cost, a.size(), b.size());
}

ShiftMatch best_shift(const std::vector<AmplitudeVector>& first,
                      const std::vector<AmplitudeVector>& second, const ProbeGeometry& geometry,
                      std::span<const double> grid) {
  if (grid.empty()) throw Error("empty shift grid");
  std::vector<double> order(grid.begin(), grid.end());
  std::stable_sort(order.begin(), order.end(), [](double x, double y) {
    if (std::abs(x) != std::abs(y)) return std::abs(x) < std::abs(y);
    return x < y;
  });
  ShiftMatch best;
  bool have = false;
  for (double delta : order) {
    auto assignment = matching_cost(first, second, geometry, delta);
    if (!have || assignment.cost < best.assignment.cost) {
      best = {delta, std::move(assignment)};
      have = true;
    }
  }
  return best;
}

SegmentLink link_segments(const std::vector<Unit>& first, const std::vector<Unit>& second,
                          const ProbeGeometry& geometry, const StitchParams& params) {
  SegmentLink link;
  if (first.empty() || second.empty()) return link;
  const auto a = amplitudes_of(first, geometry.size());
  const auto b = amplitudes_of(second, geometry.size());
  const auto grid = shift_grid(params.d_max_um, params.step_um);
  const auto match = best_shift(a, b, geometry, grid);
  link.shift_um = match.shift_um;
  for (const auto& [i, j] : match.assignment.pairs) {
    const auto ai = shift_amplitudes(a[static_cast<std::size_t>(i)], geometry, match.shift_um / 2.0);
    const auto bj = shift_amplitudes(b[static_cast<std::size_t>(j)], geometry, -match.shift_um / 2.0);
    const double d = distance(ai, bj);
    link.pairs.push_back({first[static_cast<std::size_t>(i)].local_id,
                          second[static_cast<std::size_t>(j)].local_id, d,
                          d <= params.mu * std::max(norm(ai), norm(bj))});
  }
  return link;
}

SortResult stitch(std::vector<SegmentResult> segments, const ProbeGeometry& geometry,
                  const StitchParams& params, double sample_rate, std::int64_t num_samples) {
  if (segments.empty()) throw Error("stitch needs at least one segment");
  SortResult result;
  result.sample_rate = sample_rate;
  result.num_samples = num_samples;
  result.num_channels = static_cast<int>(geometry.size());

  int next_id = 0;
  std::map<int, int> previous_ids;  // local id -> global id in the previous segment
  std::map<int, GlobalUnit> globals;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    std::map<int, const Correspondence*> linked;  // later local id -> link
    SegmentLink link;
    if (s > 0) {
      link = link_segments(segments[s - 1].units, seg.units, geometry, params);
      for (const auto& c : link.pairs) linked[c.second] = &c;
    }
    result.segment_shifts.push_back(link.shift_um);

    std::map<int, int> current_ids;
    for (const auto& unit : seg.units) {
      UnitMatch m{static_cast<int>(s), unit.local_id, 0, -1, 0.0};
      const auto it = linked.find(unit.local_id);
      if (it != linked.end()) m.distance = it->second->distance;
      if (it != linked.end() && it->second->accepted) {
        m.global_id = previous_ids.at(it->second->first);
        m.previous_local_id = it->second->first;
      } else {
        m.global_id = next_id++;
      }
      current_ids[unit.local_id] = m.global_id;
      auto& g = globals[m.global_id];
      g.id = m.global_id;
      g.spike_times.insert(g.spike_times.end(), unit.spike_times.begin(), unit.spike_times.end());
      g.segments.push_back(static_cast<int>(s));
      result.matches.push_back(m);
    }
    previous_ids = std::move(current_ids);
  }
  for (auto& [id, g] : globals) result.units.push_back(std::move(g));
  result.segments = std::move(segments);
  return result;
}

}  // namespace spikesift
