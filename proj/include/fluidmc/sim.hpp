#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fluidmc/collective.hpp"
#include "fluidmc/fluid.hpp"
#include "fluidmc/model.hpp"

namespace fluidmc {

struct SimConfig {
  int N = 100;
  double t_max = 1.0;
  std::size_t runs = 1000;
  std::uint64_t seed = 1;
  /// Strictly increasing points in [0, t_max].
  std::vector<double> grid;
  /// Initial state of the tagged agent; empty disables tagging.
  std::string tag_initial_state;
  /// Worker threads; 0 reads FLUIDMC_THREADS, then the hardware count.
  std::size_t threads = 0;
};

void check_config(const SimConfig& cfg);

/// Evenly spaced grid 0, step, ..., t_max (t_max always included).
std::vector<double> uniform_grid(double t_max, double step);

/// Stream of replication `replication` under `seed`; streams are keyed, so a
/// replication draws the same numbers regardless of scheduling.
std::mt19937_64 replication_stream(std::uint64_t seed, std::uint64_t replication);

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct TaggedPath {
  std::vector<double> times;         ///< jump times, times[0] = 0
  std::vector<std::size_t> states;   ///< state entered at times[k]
  std::vector<std::size_t> via;      ///< transition of each jump (via[0] unused)
  std::vector<std::uint64_t> jump_counts;  ///< per transition
  double t_max = 0.0;
};

struct SimulatedPath {
  std::vector<double> grid;
  std::vector<std::vector<int>> counts;  ///< population counts at each grid point
  TaggedPath tagged;                     ///< empty when tagging is disabled
};

/// One SSA replication of the population with an optional tagged agent.
SimulatedPath simulate_path(const PopulationModel& m, const SimConfig& cfg, std::uint64_t replication);

enum class RewardKind { Cumulative, Instantaneous, Reach };

struct RewardObservable {
  std::string name;
  RewardStructure reward;
  RewardKind kind = RewardKind::Cumulative;
  /// Target set for Reach.
  std::vector<bool> target;
};

struct Observables {
  bool tagged_occupancy = false;    ///< indicator of the tagged state, one column per state
  bool population_density = false;  ///< X / N, one column per state
  std::vector<RewardObservable> rewards;
};

struct EnsembleEstimate {
  std::vector<double> grid;
  std::vector<std::string> columns;
  Matrix mean;        ///< grid x columns
  Matrix sd;          ///< sample standard deviation
  Matrix half_width;  ///< 95% normal half-width; infinity for a single run
  std::size_t runs = 0;
  double seconds = 0.0;

  std::size_t column(std::string_view name) const;
  bool few_runs() const noexcept { return runs < 30; }
};

EnsembleEstimate run_ensemble(const PopulationModel& m, const SimConfig& cfg, const Observables& obs);

EnsembleEstimate estimate_state_probs(const PopulationModel& m, const SimConfig& cfg);
EnsembleEstimate estimate_population(const PopulationModel& m, const SimConfig& cfg);
EnsembleEstimate estimate_reward(const PopulationModel& m, const RewardStructure& rw, RewardKind kind,
                                 const SimConfig& cfg, const std::vector<bool>& target = {});

/// Worker count honoring FLUIDMC_THREADS.
std::size_t worker_threads(std::size_t requested = 0);

/// p0 * exp(Q T) by uniformization with Poisson truncation error <= eps.
std::vector<double> uniformization_transient(const SparseGenerator& q, std::span<const double> p0, double T,
                                             double eps = 1e-12);
std::vector<double> uniformization_transient(const Matrix& q, std::span<const double> p0, double T,
                                             double eps = 1e-12);

}  // namespace fluidmc
