#include "spikesift/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace spikesift {

std::size_t match_spike_trains(std::span<const std::int64_t> detected,
                               std::span<const std::int64_t> truth, std::int64_t tol_samples) {
  std::size_t i = 0, j = 0, matched = 0;
  while (i < detected.size() && j < truth.size()) {
    if (detected[i] < truth[j] - tol_samples) {
      ++i;
    } else if (truth[j] < detected[i] - tol_samples) {
      ++j;
    } else {
      ++matched;
      ++i;
      ++j;
    }
  }
  return matched;
}

const char* to_string(Classification c) {
  switch (c) {
    case Classification::Identified: return "identified";
    case Classification::Unclassified: return "unclassified";
    case Classification::Spurious: return "spurious";
  }
  return "unknown";
}

Classification classify(double score) {
  if (score > 0.95) return Classification::Identified;
  if (score < 0.8) return Classification::Spurious;
  return Classification::Unclassified;
}

TrainScore score_pair(std::size_t detected, std::size_t truth, std::size_t matched) {
  TrainScore s;
  s.fp = detected > 0 ? static_cast<double>(detected - matched) / static_cast<double>(detected) : 0.0;
  s.fn = truth > 0 ? static_cast<double>(truth - matched) / static_cast<double>(truth) : 0.0;
  s.score = 1.0 - s.fp - s.fn;
  return s;
}

std::vector<UnitScore> score_trains(const std::vector<std::vector<std::int64_t>>& units,
                                    const std::vector<std::vector<std::int64_t>>& neurons,
                                    std::int64_t tol_samples) {
  struct Pair {
    double score;
    std::size_t unit, neuron, matched;
  };
  std::vector<Pair> pairs;
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t n = 0; n < neurons.size(); ++n) {
      const auto m = match_spike_trains(units[u], neurons[n], tol_samples);
      if (m == 0) continue;
      pairs.push_back({score_pair(units[u].size(), neurons[n].size(), m).score, u, n, m});
    }
  }
  // Equal scores are ordered by train contents so relabelling cannot change the outcome.
  std::stable_sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (units[a.unit] != units[b.unit]) return units[a.unit] < units[b.unit];
    return neurons[a.neuron] < neurons[b.neuron];
  });

  std::vector<UnitScore> out(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    out[u].unit_id = static_cast<int>(u);
    out[u].detected = units[u].size();
  }
  std::vector<bool> neuron_used(neurons.size(), false);
  for (const auto& p : pairs) {
    UnitScore& s = out[p.unit];
    if (s.neuron_id >= 0 || neuron_used[p.neuron]) continue;
    neuron_used[p.neuron] = true;
    const auto ts = score_pair(units[p.unit].size(), neurons[p.neuron].size(), p.matched);
    s.neuron_id = static_cast<int>(p.neuron);
    s.truth = neurons[p.neuron].size();
    s.matched = p.matched;
    s.fp = ts.fp;
    s.fn = ts.fn;
    s.score = ts.score;
  }
  for (auto& s : out) s.classification = classify(s.score);
  return out;
}

std::vector<UnitScore> score_units(const SortResult& result, const GroundTruth& truth,
                                   double tol_seconds) {
  if (truth.sample_rate != result.sample_rate || truth.num_samples != result.num_samples) {
    throw Error("result and ground truth describe different recordings");
  }
  std::vector<std::vector<std::int64_t>> units, neurons;
  for (const auto& u : result.units) {
    auto times = u.spike_times;
    std::sort(times.begin(), times.end());
    units.push_back(std::move(times));
  }
  for (const auto& n : truth.neurons) neurons.push_back(n.spike_times);
  const auto tol = static_cast<std::int64_t>(std::llround(tol_seconds * truth.sample_rate));
  auto scores = score_trains(units, neurons, tol);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i].unit_id = result.units[i].id;
    if (scores[i].neuron_id >= 0) {
      scores[i].neuron_id = truth.neurons[static_cast<std::size_t>(scores[i].neuron_id)].id;
    }
  }
  return scores;
}

EvalSummary summarize(std::span<const UnitScore> scores) {
  EvalSummary s;
  for (const auto& u : scores) {
    switch (u.classification) {
      case Classification::Identified: ++s.identified; break;
      case Classification::Unclassified: ++s.unclassified; break;
      case Classification::Spurious: ++s.spurious; break;
    }
  }
  return s;
}

}  // namespace spikesift
