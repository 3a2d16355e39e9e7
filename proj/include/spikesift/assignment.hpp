#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace spikesift {

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double cost = 0.0;                       // sum of matched entries, in row order
};

/// Minimum-cost one-to-one matching of size min(rows, cols) on a dense
/// row-major cost matrix (shortest augmenting path with potentials).
Assignment solve_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols);

}  // namespace spikesift
