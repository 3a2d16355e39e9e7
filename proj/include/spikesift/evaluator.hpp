#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spikesift/result.hpp"
#include "spikesift/synthgen.hpp"

namespace spikesift {

/// Size of the largest one-to-one matching with |d - g| <= tol_samples.
/// Both trains must be sorted.
std::size_t match_spike_trains(std::span<const std::int64_t> detected,
                               std::span<const std::int64_t> truth, std::int64_t tol_samples);

enum class Classification { Identified, Unclassified, Spurious };
const char* to_string(Classification c);

/// > 0.95 identified, < 0.8 spurious, otherwise unclassified.
Classification classify(double score);

struct UnitScore {
  int unit_id = 0;
  int neuron_id = -1;  // -1 when no neuron was assigned
  std::size_t detected = 0;
  std::size_t truth = 0;
  std::size_t matched = 0;
  double fp = 1.0;
  double fn = 0.0;
  double score = 0.0;
  Classification classification = Classification::Spurious;
};

struct TrainScore {
  double fp = 0.0;
  double fn = 0.0;
  double score = 0.0;
};

TrainScore score_pair(std::size_t detected, std::size_t truth, std::size_t matched);

/// Scores every (unit, neuron) pair, then assigns pairs one-to-one by
/// descending score. Units left without a neuron score 0.
std::vector<UnitScore> score_trains(const std::vector<std::vector<std::int64_t>>& units,
                                    const std::vector<std::vector<std::int64_t>>& neurons,
                                    std::int64_t tol_samples);

std::vector<UnitScore> score_units(const SortResult& result, const GroundTruth& truth,
                                   double tol_seconds = 0.5e-3);

struct EvalSummary {
  std::size_t identified = 0;
  std::size_t unclassified = 0;
  std::size_t spurious = 0;
};

EvalSummary summarize(std::span<const UnitScore> scores);

}  // namespace spikesift
