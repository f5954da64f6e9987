#include "fluidmc/collective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fluidmc/error.hpp"

namespace fluidmc {

std::vector<double> PopulationState::densities() const {
  std::vector<double> x(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) x[i] = static_cast<double>(counts[i]) / N;
  return x;
}

PopulationState initial_counts(const PopulationModel& m, int N) {
  if (N < 1) throw InputError("population size N must be >= 1");
  const std::size_t n = m.n_states();
  PopulationState s;
  s.N = N;
  s.counts.assign(n, 0);
  std::vector<double> remainder(n);
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = N * m.init_density[i];
    s.counts[i] = static_cast<int>(std::floor(exact));
    remainder[i] = exact - s.counts[i];
    assigned += s.counts[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < N; k = (k + 1) % n) {
    ++s.counts[order[k]];
    ++assigned;
  }
  while (assigned > N) {
    // Only reachable through rounding noise in floor(); take from the largest count.
    auto it = std::max_element(s.counts.begin(), s.counts.end());
    --*it;
    --assigned;
  }
  return s;
}

std::size_t population_space_size(int N, std::size_t n_states) {
  // C(N + k, k) with k = n - 1, computed incrementally.
  const std::size_t k = n_states - 1;
  long double c = 1.0L;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<long double>(N + i) / static_cast<long double>(i);
    if (c > static_cast<long double>(std::numeric_limits<std::size_t>::max() / 2))
      return std::numeric_limits<std::size_t>::max();
  }
  return static_cast<std::size_t>(std::llround(c));
}

namespace {
void enumerate(std::vector<int>& cur, std::size_t pos, int left, std::vector<std::vector<int>>& out) {
  if (pos + 1 == cur.size()) {
    cur[pos] = left;
    out.push_back(cur);
    return;
  }
  for (int v = left; v >= 0; --v) {
    cur[pos] = v;
    enumerate(cur, pos + 1, left - v, out);
  }
}
}  // namespace

std::vector<std::vector<int>> enumerate_population_states(int N, std::size_t n_states) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n_states, 0);
  enumerate(cur, 0, N, out);
  return out;
}

CollectiveChain build_collective_generator(const PopulationModel& m, int N, std::size_t cap) {
  if (N < 1) throw InputError("population size N must be >= 1");
  const std::size_t n = m.n_states();
  const std::size_t size = population_space_size(N, n);
  if (size > cap) throw StateSpaceTooLarge(size, cap);

  CollectiveChain chain;
  chain.states = enumerate_population_states(N, n);
  for (std::size_t i = 0; i < chain.states.size(); ++i) chain.index.emplace(chain.states[i], i);

  const RateFunctions rates(m);
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> x(n);
  std::vector<int> target(n);
  for (std::size_t row = 0; row < chain.states.size(); ++row) {
    const auto& s = chain.states[row];
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(s[i]) / N;
    double out_rate = 0.0;
    for (std::size_t tau = 0; tau < rates.size(); ++tau) {
      if (!rates.enabled(tau, s)) continue;
      const auto& v = rates.update(tau);
      for (std::size_t i = 0; i < n; ++i) target[i] = s[i] + v[i];
      const double r = N * rates.rate(tau, x);
      if (r == 0.0) continue;
      triplets.emplace_back(row, chain.index.at(target), r);
      out_rate += r;
    }
    if (out_rate != 0.0) triplets.emplace_back(row, row, -out_rate);
  }
  chain.generator.resize(chain.states.size(), chain.states.size());
  chain.generator.setFromTriplets(triplets.begin(), triplets.end());
  chain.generator.makeCompressed();
  return chain;
}

}  // namespace fluidmc
