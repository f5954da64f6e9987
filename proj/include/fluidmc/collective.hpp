#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "fluidmc/model.hpp"

namespace fluidmc {

/// Integer population vector; counts sum to N.
struct PopulationState {
  std::vector<int> counts;
  int N = 0;

  std::vector<double> densities() const;
  friend bool operator==(const PopulationState&, const PopulationState&) = default;
};

/// round(N * init_density) with largest-remainder correction so the counts
/// sum to exactly N. Ties are broken towards the lower state index.
PopulationState initial_counts(const PopulationModel& m, int N);

/// C(N + n - 1, n - 1), saturating at SIZE_MAX.
std::size_t population_space_size(int N, std::size_t n_states);

/// Every counting vector with sum N, in descending lexicographic order
/// ((N,0,...,0) first, (0,...,0,N) last).
std::vector<std::vector<int>> enumerate_population_states(int N, std::size_t n_states);

using SparseGenerator = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct CollectiveChain {
  std::vector<std::vector<int>> states;
  std::map<std::vector<int>, std::size_t> index;
  SparseGenerator generator;
};

inline constexpr std::size_t kDefaultStateSpaceCap = 200'000;

/// Exact CTMC generator of the population model for a small N with rates
/// N * f(X / N). A transition is disabled when a source state holds fewer
/// agents than its rules consume.
CollectiveChain build_collective_generator(const PopulationModel& m, int N,
                                           std::size_t cap = kDefaultStateSpaceCap);

}  // namespace fluidmc
