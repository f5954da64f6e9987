#include "fluidmc/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>

#include "fluidmc/error.hpp"

namespace fluidmc {

void check_config(const SimConfig& cfg) {
  if (cfg.N < 1) throw InputError("N must be >= 1");
  if (cfg.runs < 1) throw InputError("runs must be >= 1");
  if (!(cfg.t_max >= 0.0) || !std::isfinite(cfg.t_max)) throw InputError("t_max must be finite and >= 0");
  for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
    if (cfg.grid[i] < 0.0 || cfg.grid[i] > cfg.t_max) throw InputError("grid points must lie in [0, t_max]");
    if (i > 0 && !(cfg.grid[i] > cfg.grid[i - 1])) throw InputError("grid must be strictly increasing");
  }
}

std::vector<double> uniform_grid(double t_max, double step) {
  if (!(step > 0.0)) throw InputError("grid step must be > 0");
  std::vector<double> g;
  const auto count = static_cast<std::size_t>(std::floor(t_max / step + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) g.push_back(std::min(k * step, t_max));
  if (t_max - g.back() <= 1e-9 * step)
    g.back() = t_max;
  else
    g.push_back(t_max);
  return g;
}

std::mt19937_64 replication_stream(std::uint64_t seed, std::uint64_t replication) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replication), static_cast<std::uint32_t>(replication >> 32),
                    0x6d63u};
  return std::mt19937_64(seq);
}

std::size_t worker_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FLUIDMC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::size_t EnsembleEstimate::column(std::string_view name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw UnknownIdentifier(std::string(name));
  return static_cast<std::size_t>(it - columns.begin());
}

namespace {

constexpr int kUntagged = -1;

// Gillespie direct method over N * f(X / N). The visitor sees every interval
// of constant state and every jump of the tagged agent.
class Engine {
 public:
  Engine(const PopulationModel& m, int N) : N_(N), n_(m.n_states()), rates_(m) {
    changes_.resize(rates_.size());
    tag_rules_.resize(rates_.size());
    for (std::size_t tau = 0; tau < rates_.size(); ++tau) {
      const auto& v = rates_.update(tau);
      for (std::size_t i = 0; i < n_; ++i)
        if (v[i] != 0) changes_[tau].push_back({i, v[i]});
      tag_rules_[tau].resize(n_);
      for (const Rule& r : m.transitions[tau].rules) tag_rules_[tau][r.from].push_back(r.to);
    }
  }

  template <class Visitor>
  void run(std::mt19937_64& rng, double t_max, std::vector<int> counts, int tagged, Visitor& vis) const {
    const std::size_t T = rates_.size();
    std::vector<double> x(n_), r(T);
    double t = 0.0;
    while (!vis.done()) {
      for (std::size_t i = 0; i < n_; ++i) x[i] = static_cast<double>(counts[i]) / N_;
      double total = 0.0;
      for (std::size_t tau = 0; tau < T; ++tau) {
        r[tau] = rates_.enabled(tau, counts) ? N_ * rates_.rate(tau, x) : 0.0;
        total += r[tau];
      }
      const double t_next =
          total > 0.0 ? t - std::log1p(-uniform01(rng)) / total : std::numeric_limits<double>::infinity();
      if (t_next >= t_max) {
        vis.interval(t, t_max, counts, tagged, true);
        return;
      }
      vis.interval(t, t_next, counts, tagged, false);

      const double pick = uniform01(rng) * total;
      std::size_t tau = 0;
      double acc = 0.0;
      std::size_t last_positive = 0;
      for (; tau < T; ++tau) {
        if (r[tau] <= 0.0) continue;
        last_positive = tau;
        acc += r[tau];
        if (pick < acc) break;
      }
      if (tau == T) tau = last_positive;

      if (tagged != kUntagged) {
        const auto& targets = tag_rules_[tau][static_cast<std::size_t>(tagged)];
        if (!targets.empty()) {
          // Each rule out of the tagged state takes one of the X_i agents
          // present before the event.
          const int X = counts[static_cast<std::size_t>(tagged)];
          const auto k = static_cast<std::size_t>(uniform01(rng) * X);
          if (k < targets.size()) {
            const std::size_t to = targets[k];
            vis.jump(t_next, tau, static_cast<std::size_t>(tagged), to);
            tagged = static_cast<int>(to);
          }
        }
      }
      for (const auto& [i, d] : changes_[tau]) counts[i] += d;
      t = t_next;
    }
  }

  std::size_t n_states() const noexcept { return n_; }
  std::size_t n_transitions() const noexcept { return rates_.size(); }

 private:
  int N_;
  std::size_t n_;
  RateFunctions rates_;
  std::vector<std::vector<std::pair<std::size_t, int>>> changes_;
  std::vector<std::vector<std::vector<std::size_t>>> tag_rules_;  // [tau][from] -> targets
};

int initial_tag(const PopulationModel& m, const SimConfig& cfg, const PopulationState& init) {
  if (cfg.tag_initial_state.empty()) return kUntagged;
  const std::size_t s = m.state_index(cfg.tag_initial_state);
  if (!m.unit_multiplicity()) {
    for (const auto& t : m.transitions)
      for (const auto& r : t.rules)
        if (r.multiplicity != 1) throw MultiplicityUnsupported(t.name);
  }
  if (init.counts[s] < 1)
    throw InputError("tagged initial state '" + cfg.tag_initial_state + "' has no agents at t=0");
  return static_cast<int>(s);
}

struct PathRecorder {
  const std::vector<double>& grid;
  std::size_t next = 0;
  std::vector<std::vector<int>> counts;
  TaggedPath* tagged = nullptr;

  bool done() const { return false; }
  void interval(double, double t1, const std::vector<int>& c, int, bool last) {
    while (next < grid.size() && (grid[next] < t1 || (last && grid[next] <= t1))) {
      counts.push_back(c);
      ++next;
    }
  }
  void jump(double t, std::size_t tau, std::size_t, std::size_t to) {
    if (!tagged) return;
    tagged->times.push_back(t);
    tagged->states.push_back(to);
    tagged->via.push_back(tau);
    ++tagged->jump_counts[tau];
  }
};

// Writes one row per grid point into a grid x columns buffer.
class ObservationRecorder {
 public:
  ObservationRecorder(const PopulationModel& m, const std::vector<double>& grid, const Observables& obs, int N)
      : grid_(grid), obs_(obs), n_(m.n_states()), N_(N) {
    width_ = (obs.tagged_occupancy ? n_ : 0) + (obs.population_density ? n_ : 0) + obs.rewards.size();
    acc_.resize(obs.rewards.size());
    frozen_.resize(obs.rewards.size());
    only_reach_ = !obs.tagged_occupancy && !obs.population_density && !obs.rewards.empty() &&
                  std::all_of(obs.rewards.begin(), obs.rewards.end(),
                              [](const RewardObservable& r) { return r.kind == RewardKind::Reach; });
  }

  std::size_t width() const noexcept { return width_; }

  void reset(std::span<double> out, int tagged) {
    out_ = out;
    next_ = 0;
    std::fill(acc_.begin(), acc_.end(), 0.0);
    for (std::size_t k = 0; k < obs_.rewards.size(); ++k)
      frozen_[k] = obs_.rewards[k].kind == RewardKind::Reach && tagged >= 0 &&
                   obs_.rewards[k].target[static_cast<std::size_t>(tagged)];
    last_tagged_ = tagged;
  }

  bool done() {
    if (!only_reach_ || !std::all_of(frozen_.begin(), frozen_.end(), [](char f) { return f != 0; })) return false;
    for (; next_ < grid_.size(); ++next_) write_rewards(next_, last_tagged_, 0.0);
    return true;
  }

  void interval(double t0, double t1, const std::vector<int>& c, int tagged, bool last) {
    last_tagged_ = tagged;
    while (next_ < grid_.size() && (grid_[next_] < t1 || (last && grid_[next_] <= t1))) {
      double* row = out_.data() + next_ * width_;
      std::size_t col = 0;
      if (obs_.tagged_occupancy) {
        for (std::size_t i = 0; i < n_; ++i) row[col++] = static_cast<int>(i) == tagged ? 1.0 : 0.0;
      }
      if (obs_.population_density) {
        for (std::size_t i = 0; i < n_; ++i) row[col++] = static_cast<double>(c[i]) / N_;
      }
      write_rewards(next_, tagged, grid_[next_] - t0);
      ++next_;
    }
    const double dt = t1 - t0;
    if (tagged < 0) return;
    for (std::size_t k = 0; k < obs_.rewards.size(); ++k) {
      if (frozen_[k]) continue;
      const auto& rw = obs_.rewards[k];
      if (rw.kind != RewardKind::Instantaneous) acc_[k] += rw.reward.state_reward[static_cast<std::size_t>(tagged)] * dt;
    }
  }

  void jump(double, std::size_t tau, std::size_t, std::size_t to) {
    for (std::size_t k = 0; k < obs_.rewards.size(); ++k) {
      if (frozen_[k]) continue;
      const auto& rw = obs_.rewards[k];
      if (rw.kind == RewardKind::Instantaneous) continue;
      acc_[k] += rw.reward.transition_reward[tau];
      if (rw.kind == RewardKind::Reach && rw.target[to]) frozen_[k] = 1;
    }
    last_tagged_ = static_cast<int>(to);
  }

 private:
  void write_rewards(std::size_t g, int tagged, double elapsed) {
    double* row = out_.data() + g * width_ + (width_ - obs_.rewards.size());
    for (std::size_t k = 0; k < obs_.rewards.size(); ++k) {
      const auto& rw = obs_.rewards[k];
      const double rho = tagged >= 0 ? rw.reward.state_reward[static_cast<std::size_t>(tagged)] : 0.0;
      if (rw.kind == RewardKind::Instantaneous)
        row[k] = rho;
      else
        row[k] = frozen_[k] ? acc_[k] : acc_[k] + rho * elapsed;
    }
  }

  const std::vector<double>& grid_;
  const Observables& obs_;
  std::size_t n_;
  int N_;
  std::size_t width_ = 0;
  bool only_reach_ = false;
  std::span<double> out_;
  std::size_t next_ = 0;
  std::vector<double> acc_;
  std::vector<char> frozen_;
  int last_tagged_ = kUntagged;
};

// Welford accumulators for a block of replications; merged with Chan's
// pairwise update in fixed block order.
struct Moments {
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<double> m2;

  explicit Moments(std::size_t size = 0) : mean(size, 0.0), m2(size, 0.0) {}

  void add(std::span<const double> v) {
    ++count;
    const double c = static_cast<double>(count);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d = v[i] - mean[i];
      mean[i] += d / c;
      m2[i] += d * (v[i] - mean[i]);
    }
  }

  void merge(const Moments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count), nb = static_cast<double>(o.count);
    const double n = na + nb;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double d = o.mean[i] - mean[i];
      mean[i] += d * nb / n;
      m2[i] += o.m2[i] + d * d * na * nb / n;
    }
    count += o.count;
  }
};

void validate_rewards(const PopulationModel& m, const Observables& obs) {
  for (const auto& r : obs.rewards) {
    if (r.reward.state_reward.size() != m.n_states() || r.reward.transition_reward.size() != m.transitions.size())
      throw InputError("reward structure '" + r.reward.name + "' does not match the model");
    if (r.kind == RewardKind::Reach && r.target.size() != m.n_states())
      throw InputError("reach target set has the wrong number of states");
  }
}

}  // namespace

SimulatedPath simulate_path(const PopulationModel& m, const SimConfig& cfg, std::uint64_t replication) {
  check_config(cfg);
  const PopulationState init = initial_counts(m, cfg.N);
  const int tag = initial_tag(m, cfg, init);
  const Engine engine(m, cfg.N);
  SimulatedPath out;
  out.grid = cfg.grid;
  if (tag != kUntagged) {
    out.tagged.times.push_back(0.0);
    out.tagged.states.push_back(static_cast<std::size_t>(tag));
    out.tagged.via.push_back(0);
    out.tagged.jump_counts.assign(m.transitions.size(), 0);
    out.tagged.t_max = cfg.t_max;
  }
  PathRecorder rec{out.grid, 0, {}, tag != kUntagged ? &out.tagged : nullptr};
  auto rng = replication_stream(cfg.seed, replication);
  engine.run(rng, cfg.t_max, init.counts, tag, rec);
  out.counts = std::move(rec.counts);
  return out;
}

EnsembleEstimate run_ensemble(const PopulationModel& m, const SimConfig& cfg, const Observables& obs) {
  check_config(cfg);
  validate_rewards(m, obs);
  const auto start = std::chrono::steady_clock::now();
  const PopulationState init = initial_counts(m, cfg.N);
  const bool needs_tag = obs.tagged_occupancy || !obs.rewards.empty();
  if (needs_tag && cfg.tag_initial_state.empty())
    throw InputError("tagged observables need a tagged initial state");
  const int tag = needs_tag ? initial_tag(m, cfg, init) : kUntagged;
  const Engine engine(m, cfg.N);

  EnsembleEstimate est;
  est.grid = cfg.grid;
  if (obs.tagged_occupancy)
    for (const auto& s : m.agent.names()) est.columns.push_back(s);
  if (obs.population_density)
    for (const auto& s : m.agent.names()) est.columns.push_back("x_" + s);
  for (const auto& r : obs.rewards) est.columns.push_back(r.name);
  const std::size_t G = cfg.grid.size();
  const std::size_t C = est.columns.size();

  // Block size is fixed so the merge order does not depend on thread count.
  constexpr std::size_t block = 32;
  const std::size_t blocks = (cfg.runs + block - 1) / block;
  std::vector<Moments> partial(blocks);
  std::vector<std::exception_ptr> errors(blocks);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    ObservationRecorder rec(m, cfg.grid, obs, cfg.N);
    std::vector<double> buf(G * C);
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        Moments mom(G * C);
        const std::size_t lo = b * block, hi = std::min(cfg.runs, lo + block);
        for (std::size_t rep = lo; rep < hi; ++rep) {
          auto rng = replication_stream(cfg.seed, rep);
          rec.reset(buf, tag);
          engine.run(rng, cfg.t_max, init.counts, tag, rec);
          mom.add(buf);
        }
        partial[b] = std::move(mom);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(worker_threads(cfg.threads), blocks);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  Moments total(G * C);
  for (const auto& p : partial) total.merge(p);

  est.runs = cfg.runs;
  est.mean.resize(G, C);
  est.sd.resize(G, C);
  est.half_width.resize(G, C);
  const double n = static_cast<double>(cfg.runs);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t k = g * C + c;
      est.mean(g, c) = total.mean[k];
      if (cfg.runs < 2) {
        est.sd(g, c) = 0.0;
        est.half_width(g, c) = std::numeric_limits<double>::infinity();
      } else {
        const double var = std::max(0.0, total.m2[k] / (n - 1));
        est.sd(g, c) = std::sqrt(var);
        est.half_width(g, c) = 1.959963984540054 * std::sqrt(var / n);
      }
    }
  }
  est.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return est;
}

EnsembleEstimate estimate_state_probs(const PopulationModel& m, const SimConfig& cfg) {
  Observables obs;
  obs.tagged_occupancy = true;
  return run_ensemble(m, cfg, obs);
}

EnsembleEstimate estimate_population(const PopulationModel& m, const SimConfig& cfg) {
  Observables obs;
  obs.population_density = true;
  SimConfig c = cfg;
  c.tag_initial_state.clear();
  return run_ensemble(m, c, obs);
}

EnsembleEstimate estimate_reward(const PopulationModel& m, const RewardStructure& rw, RewardKind kind,
                                 const SimConfig& cfg, const std::vector<bool>& target) {
  Observables obs;
  obs.rewards.push_back({rw.name, rw, kind, target});
  if (kind == RewardKind::Reach && target.empty()) throw InputError("reach reward needs a target set");
  return run_ensemble(m, cfg, obs);
}

namespace {

void check_generator(const SparseGenerator& q) {
  if (q.rows() != q.cols()) throw NonGenerator("NonGenerator: matrix is not square");
  for (Eigen::Index i = 0; i < q.outerSize(); ++i) {
    double sum = 0.0, scale = 1.0;
    for (SparseGenerator::InnerIterator it(q, i); it; ++it) {
      if (!std::isfinite(it.value())) throw NonGenerator("NonGenerator: non-finite entry");
      if (it.col() != i && it.value() < -1e-12)
        throw NonGenerator("NonGenerator: negative off-diagonal in row " + std::to_string(i));
      sum += it.value();
      scale = std::max(scale, std::abs(it.value()));
    }
    if (std::abs(sum) > 1e-9 * scale)
      throw NonGenerator("NonGenerator: row " + std::to_string(i) + " sums to " + std::to_string(sum));
  }
}

}  // namespace

std::vector<double> uniformization_transient(const SparseGenerator& q, std::span<const double> p0, double T,
                                             double eps) {
  check_generator(q);
  if (static_cast<Eigen::Index>(p0.size()) != q.rows()) throw InputError("distribution size mismatch");
  if (!(T >= 0.0)) throw InputError("T must be >= 0");
  Eigen::RowVectorXd p = Eigen::Map<const Eigen::RowVectorXd>(p0.data(), static_cast<Eigen::Index>(p0.size()));
  double lambda = 0.0;
  for (Eigen::Index i = 0; i < q.rows(); ++i) lambda = std::max(lambda, -q.coeff(i, i));
  if (lambda == 0.0 || T == 0.0) return {p0.begin(), p0.end()};

  // Split [0, T] so that each Poisson parameter stays <= 100; e^{-100} is
  // still representable and the tail bound below stays sharp.
  const auto pieces = static_cast<std::size_t>(std::ceil(lambda * T / 100.0));
  const double tau = T / static_cast<double>(pieces);
  const double mu = lambda * tau;
  const double piece_eps = eps / static_cast<double>(pieces);
  Eigen::RowVectorXd term(p.size()), result(p.size());
  for (std::size_t piece = 0; piece < pieces; ++piece) {
    double w = std::exp(-mu);
    term = p;
    result = w * term;
    for (std::size_t k = 0;; ++k) {
      // Tail after term k is bounded geometrically once k + 2 > mu.
      const double kk = static_cast<double>(k);
      if (kk + 2 > mu) {
        const double ratio = mu / (kk + 2);
        const double tail = w * (mu / (kk + 1)) / (1.0 - ratio);
        if (tail <= piece_eps) break;
      }
      Eigen::RowVectorXd qt = term * q;
      term += qt / lambda;
      w *= mu / (kk + 1);
      result += w * term;
    }
    p = result;
  }
  return {p.data(), p.data() + p.size()};
}

std::vector<double> uniformization_transient(const Matrix& q, std::span<const double> p0, double T, double eps) {
  SparseGenerator s = q.sparseView();
  return uniformization_transient(s, p0, T, eps);
}

}  // namespace fluidmc
