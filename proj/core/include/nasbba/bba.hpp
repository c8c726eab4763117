#pragma once

/*
 * Binary Bat Algorithm.
 *
 * Minimizes a fitness function over fixed-length bit vectors. Each bat keeps a
 * binary position and a real velocity; velocities are mapped to per-bit flip
 * probabilities with the v-shaped transfer |2/pi * atan(pi/2 * v)|. Loudness
 * gates acceptance and decays geometrically, pulse rate gates the local walk
 * around the global best and rises toward its initial value.
 *
 * One iteration is split into three phases so that fitness evaluations can be
 * dispatched concurrently without changing the outcome:
 *   1. candidates for every bat are generated from the swarm RNG in bat order,
 *   2. the candidate batch is evaluated,
 *   3. acceptance runs in bat order, then the global best is refreshed.
 */

#include "nasbba/bit_vector.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nasbba::bba {

using Rng = std::mt19937_64;

struct BbaConfig
{
  std::size_t population_size = 10;
  std::size_t iterations = 100;
  double f_min = 0.0;
  double f_max = 1.0;
  double initial_loudness = 0.25;
  double initial_pulse_rate = 0.5;
  double alpha = 0.9;
  double gamma = 0.9;
  std::uint64_t rng_seed = 1;
  /// Number of best solutions the local walk picks its origin from. 1 means x* itself.
  std::size_t elite_count = 1;
  /// Worker threads for fitness evaluation; 1 evaluates in the calling thread.
  std::size_t threads = 1;

  /// Every violated constraint, one message each. Empty when valid.
  std::vector<std::string> problems() const;
  /// Throws ConfigError listing all problems.
  void validate() const;
};

class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the initial population cannot be evaluated.
class EvaluationError : public std::runtime_error
{
public:
  EvaluationError(const std::string& genome, const std::string& reason);
  const std::string& genome() const noexcept { return genome_; }

private:
  std::string genome_;
};

struct BatState
{
  BitVector position;
  std::vector<double> velocity;
  double frequency = 0.0;
  double loudness = 0.0;
  double pulse_rate = 0.0;
  double initial_pulse_rate = 0.0;
  double fitness = std::numeric_limits<double>::infinity();
  bool evaluated = false;
};

struct HistoryRecord
{
  std::size_t iteration = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double mean_loudness = 0.0;

  bool operator==(const HistoryRecord&) const = default;
};

struct SearchResult
{
  BitVector best_position;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<HistoryRecord> history;

  bool operator==(const SearchResult&) const = default;
};

/// Identifies one evaluation. `stream_seed` is derived from (rng_seed, iteration, bat_index).
struct EvalContext
{
  std::size_t iteration = 0;
  std::size_t bat_index = 0;
  std::uint64_t stream_seed = 0;
};

/// Outcome of one evaluation. A non-empty `error` marks a failed evaluation.
struct Evaluation
{
  double fitness = std::numeric_limits<double>::infinity();
  std::string error;
};

using FitnessFunction = std::function<double(const BitVector&, const EvalContext&)>;
using BatchEvaluator =
  std::function<std::vector<Evaluation>(std::span<const BitVector>, std::span<const EvalContext>)>;

/// Wraps a scalar fitness so that each genome is evaluated independently,
/// optionally on `threads` workers. Exceptions become Evaluation::error.
BatchEvaluator make_batch_evaluator(FitnessFunction fitness, std::size_t threads = 1);

std::uint64_t stream_seed(std::uint64_t rng_seed, std::size_t iteration, std::size_t bat_index) noexcept;

// Per-step operators. These are exposed individually so each rule can be
// exercised in isolation; Search composes them.

/// f_i = f_min + beta (f_max - f_min); stored in the bat.
double update_frequency(BatState& bat, double beta, const BbaConfig& config);

/// v_i += f_i (x_i - x*), with per-bit differences in {-1, 0, +1}.
const std::vector<double>& update_velocity(BatState& bat, const BitVector& gbest);

/// V(v) = |2/pi atan(pi/2 v)|. Throws std::domain_error for non-finite input.
double transfer(double velocity);

/// Flips bit j iff draws[j] < transfer(v_j).
BitVector candidate_position(const BatState& bat, std::span<const double> draws);
BitVector candidate_position(const BatState& bat, Rng& rng);

/// Copy of `gbest` with each bit flipped with probability clamp(|epsilon| * mean_loudness, 0, 1).
BitVector local_search(const BitVector& gbest, double mean_loudness, double epsilon, Rng& rng);

/// Acceptance rule with an explicit uniform draw. On acceptance updates position,
/// fitness, loudness (A <- alpha A) and pulse rate (r <- r0 (1 - exp(-gamma t))).
bool accept_and_update(BatState& bat,
                       const BitVector& candidate,
                       double candidate_fitness,
                       double gbest_fitness,
                       std::size_t iteration,
                       const BbaConfig& config,
                       double draw);
bool accept_and_update(BatState& bat,
                       const BitVector& candidate,
                       double candidate_fitness,
                       double gbest_fitness,
                       std::size_t iteration,
                       const BbaConfig& config,
                       Rng& rng);

/// Complete resumable state of a search between iterations.
struct SearchSnapshot
{
  std::size_t iteration = 0;
  std::vector<BatState> bats;
  BitVector best_position;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<HistoryRecord> history;
  std::string rng_state;
};

class Search
{
public:
  Search(BbaConfig config, std::size_t genome_length, BatchEvaluator evaluator);

  /// Random positions, zero velocity, A = A(0), r = r(0); evaluates every bat.
  /// Throws EvaluationError naming the genome if any evaluation fails.
  void initialize();
  /// Runs one iteration. Requires initialize() or restore() first.
  void step();
  /// Runs the remaining iterations.
  void run_to_completion();

  bool initialized() const noexcept { return initialized_; }
  bool done() const noexcept { return iteration_ >= config_.iterations; }
  std::size_t iteration() const noexcept { return iteration_; }

  const BbaConfig& config() const noexcept { return config_; }
  const std::vector<BatState>& bats() const noexcept { return bats_; }
  const BitVector& best_position() const noexcept { return best_position_; }
  double best_fitness() const noexcept { return best_fitness_; }
  double mean_loudness() const;

  SearchResult result() const;
  SearchSnapshot snapshot() const;
  void restore(const SearchSnapshot& snapshot);

private:
  BitVector choose_local_origin();
  void record_history();

  BbaConfig config_;
  std::size_t genome_length_;
  BatchEvaluator evaluator_;
  Rng rng_;
  std::vector<BatState> bats_;
  BitVector best_position_;
  double best_fitness_ = std::numeric_limits<double>::infinity();
  std::vector<HistoryRecord> history_;
  std::size_t iteration_ = 0;
  bool initialized_ = false;
};

/// CSV with header iteration,best_fitness,mean_fitness,mean_loudness.
void write_history_csv(std::ostream& out, const std::vector<HistoryRecord>& history);

/// Initializes and runs a complete search.
SearchResult run(const BbaConfig& config, std::size_t genome_length, BatchEvaluator evaluator);
SearchResult run(const BbaConfig& config, std::size_t genome_length, FitnessFunction fitness);

} // namespace nasbba::bba
