#include "nasbba/bba.hpp"

#include "detail/numbers.hpp"
#include "detail/parallel.hpp"
#include "nasbba/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace nasbba::bba {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double uniform01(Rng& rng)
{
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double sanitize(double fitness)
{
  return std::isfinite(fitness) ? fitness : kInf;
}

} // namespace

std::vector<std::string> BbaConfig::problems() const
{
  std::vector<std::string> out;
  if (population_size < 2)
    out.emplace_back("population_size must be at least 2");
  if (!(f_min <= f_max))
    out.emplace_back("f_min must not exceed f_max");
  if (!(initial_loudness > 0.0))
    out.emplace_back("initial_loudness must be positive");
  if (!(initial_pulse_rate >= 0.0 && initial_pulse_rate <= 1.0))
    out.emplace_back("initial_pulse_rate must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha < 1.0))
    out.emplace_back("alpha must lie in (0, 1)");
  if (!(gamma > 0.0))
    out.emplace_back("gamma must be positive");
  if (elite_count < 1)
    out.emplace_back("elite_count must be at least 1");
  if (threads < 1)
    out.emplace_back("threads must be at least 1");
  return out;
}

void BbaConfig::validate() const
{
  auto issues = problems();
  if (issues.empty())
    return;
  std::string msg = "invalid BBA configuration:";
  for (const auto& p : issues)
    msg += "\n  - " + p;
  throw ConfigError(msg);
}

EvaluationError::EvaluationError(const std::string& genome, const std::string& reason)
  : std::runtime_error("fitness evaluation failed for genome " + genome + ": " + reason)
  , genome_(genome)
{
}

BatchEvaluator make_batch_evaluator(FitnessFunction fitness, std::size_t threads)
{
  return [fitness = std::move(fitness), threads](std::span<const BitVector> genomes,
                                                 std::span<const EvalContext> contexts) {
    std::vector<Evaluation> out(genomes.size());
    detail::parallel_for(genomes.size(), threads, [&](std::size_t i) {
      try {
        out[i].fitness = fitness(genomes[i], contexts[i]);
      } catch (const std::exception& e) {
        out[i].error = e.what();
      } catch (...) {
        out[i].error = "unknown exception";
      }
    });
    return out;
  };
}

std::uint64_t stream_seed(std::uint64_t rng_seed, std::size_t iteration, std::size_t bat_index) noexcept
{
  return derive_seed(rng_seed, {iteration, bat_index});
}

double update_frequency(BatState& bat, double beta, const BbaConfig& config)
{
  bat.frequency = config.f_min + beta * (config.f_max - config.f_min);
  return bat.frequency;
}

const std::vector<double>& update_velocity(BatState& bat, const BitVector& gbest)
{
  if (bat.position.size() != gbest.size() || bat.velocity.size() != gbest.size())
    throw std::invalid_argument("update_velocity: position, velocity and gbest lengths differ");
  for (std::size_t j = 0; j < gbest.size(); ++j) {
    const int diff = int(bat.position[j]) - int(gbest[j]);
    bat.velocity[j] += bat.frequency * diff;
  }
  return bat.velocity;
}

double transfer(double velocity)
{
  if (!std::isfinite(velocity))
    throw std::domain_error("transfer: velocity must be finite");
  using std::numbers::pi;
  return std::abs(2.0 / pi * std::atan(pi / 2.0 * velocity));
}

BitVector candidate_position(const BatState& bat, std::span<const double> draws)
{
  if (draws.size() != bat.position.size())
    throw std::invalid_argument("candidate_position: one draw per dimension required");
  BitVector out = bat.position;
  for (std::size_t j = 0; j < out.size(); ++j)
    if (draws[j] < transfer(bat.velocity[j]))
      out.flip(j);
  return out;
}

BitVector candidate_position(const BatState& bat, Rng& rng)
{
  std::vector<double> draws(bat.position.size());
  for (auto& d : draws)
    d = uniform01(rng);
  return candidate_position(bat, draws);
}

BitVector local_search(const BitVector& gbest, double mean_loudness, double epsilon, Rng& rng)
{
  const double p = std::clamp(std::abs(epsilon) * mean_loudness, 0.0, 1.0);
  BitVector out = gbest;
  for (std::size_t j = 0; j < out.size(); ++j)
    if (uniform01(rng) < p)
      out.flip(j);
  return out;
}

bool accept_and_update(BatState& bat,
                       const BitVector& candidate,
                       double candidate_fitness,
                       double gbest_fitness,
                       std::size_t iteration,
                       const BbaConfig& config,
                       double draw)
{
  candidate_fitness = sanitize(candidate_fitness);
  if (!(draw < bat.loudness && candidate_fitness < gbest_fitness))
    return false;
  bat.position = candidate;
  bat.fitness = candidate_fitness;
  bat.evaluated = true;
  bat.loudness *= config.alpha;
  bat.pulse_rate = bat.initial_pulse_rate * (1.0 - std::exp(-config.gamma * double(iteration)));
  return true;
}

bool accept_and_update(BatState& bat,
                       const BitVector& candidate,
                       double candidate_fitness,
                       double gbest_fitness,
                       std::size_t iteration,
                       const BbaConfig& config,
                       Rng& rng)
{
  return accept_and_update(
    bat, candidate, candidate_fitness, gbest_fitness, iteration, config, uniform01(rng));
}

Search::Search(BbaConfig config, std::size_t genome_length, BatchEvaluator evaluator)
  : config_(std::move(config))
  , genome_length_(genome_length)
  , evaluator_(std::move(evaluator))
  , rng_(config_.rng_seed)
{
  config_.validate();
  if (genome_length_ < 1)
    throw ConfigError("genome length must be at least 1");
  if (!evaluator_)
    throw ConfigError("no fitness evaluator supplied");
}

double Search::mean_loudness() const
{
  if (bats_.empty())
    return 0.0;
  double s = 0.0;
  for (const auto& b : bats_)
    s += b.loudness;
  return s / double(bats_.size());
}

void Search::initialize()
{
  bats_.assign(config_.population_size, BatState{});
  std::vector<BitVector> genomes;
  std::vector<EvalContext> contexts;
  for (std::size_t i = 0; i < bats_.size(); ++i) {
    auto& bat = bats_[i];
    bat.position = BitVector(genome_length_);
    for (std::size_t j = 0; j < genome_length_; ++j)
      bat.position.set(j, uniform01(rng_) < 0.5);
    bat.velocity.assign(genome_length_, 0.0);
    bat.loudness = config_.initial_loudness;
    bat.pulse_rate = config_.initial_pulse_rate;
    bat.initial_pulse_rate = config_.initial_pulse_rate;
    genomes.push_back(bat.position);
    contexts.push_back({0, i, stream_seed(config_.rng_seed, 0, i)});
  }

  const auto evals = evaluator_(genomes, contexts);
  if (evals.size() != genomes.size())
    throw std::logic_error("evaluator returned a result count different from the batch size");

  best_fitness_ = kInf;
  best_position_ = bats_.front().position;
  for (std::size_t i = 0; i < bats_.size(); ++i) {
    if (!evals[i].error.empty())
      throw EvaluationError(genomes[i].to_string(), evals[i].error);
    bats_[i].fitness = sanitize(evals[i].fitness);
    bats_[i].evaluated = true;
    if (bats_[i].fitness < best_fitness_) {
      best_fitness_ = bats_[i].fitness;
      best_position_ = bats_[i].position;
    }
  }
  iteration_ = 0;
  history_.clear();
  initialized_ = true;
  record_history();
}

BitVector Search::choose_local_origin()
{
  if (config_.elite_count <= 1)
    return best_position_;
  std::vector<std::size_t> order(bats_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return bats_[a].fitness < bats_[b].fitness;
  });
  std::vector<const BitVector*> elite{&best_position_};
  for (auto idx : order) {
    if (elite.size() >= config_.elite_count)
      break;
    const auto& pos = bats_[idx].position;
    if (std::none_of(elite.begin(), elite.end(), [&](const BitVector* e) { return *e == pos; }))
      elite.push_back(&pos);
  }
  std::uniform_int_distribution<std::size_t> pick(0, elite.size() - 1);
  return *elite[pick(rng_)];
}

void Search::step()
{
  if (!initialized_)
    throw std::logic_error("Search::step called before initialize()");
  if (done())
    return;

  const std::size_t t = iteration_ + 1;
  const double mean_a = mean_loudness();
  const double gbest_fitness = best_fitness_;

  std::vector<BitVector> candidates;
  std::vector<EvalContext> contexts;
  candidates.reserve(bats_.size());
  for (std::size_t i = 0; i < bats_.size(); ++i) {
    auto& bat = bats_[i];
    update_frequency(bat, uniform01(rng_), config_);
    update_velocity(bat, best_position_);
    BitVector cand = candidate_position(bat, rng_);
    if (uniform01(rng_) > bat.pulse_rate) {
      const BitVector origin = choose_local_origin();
      const double eps = std::uniform_real_distribution<double>(-1.0, 1.0)(rng_);
      cand = local_search(origin, mean_a, eps, rng_);
    }
    candidates.push_back(std::move(cand));
    contexts.push_back({t, i, stream_seed(config_.rng_seed, t, i)});
  }

  const auto evals = evaluator_(candidates, contexts);
  if (evals.size() != candidates.size())
    throw std::logic_error("evaluator returned a result count different from the batch size");

  std::vector<double> fitness(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    fitness[i] = evals[i].error.empty() ? sanitize(evals[i].fitness) : kInf;

  for (std::size_t i = 0; i < bats_.size(); ++i)
    accept_and_update(bats_[i], candidates[i], fitness[i], gbest_fitness, t, config_, rng_);

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (fitness[i] < best_fitness_) {
      best_fitness_ = fitness[i];
      best_position_ = candidates[i];
    }
  }

  iteration_ = t;
  record_history();
}

void Search::run_to_completion()
{
  if (!initialized_)
    initialize();
  while (!done())
    step();
}

void Search::record_history()
{
  double sum = 0.0;
  std::size_t finite = 0;
  for (const auto& b : bats_) {
    if (std::isfinite(b.fitness)) {
      sum += b.fitness;
      ++finite;
    }
  }
  history_.push_back(
    {iteration_, best_fitness_, finite ? sum / double(finite) : kInf, mean_loudness()});
}

SearchResult Search::result() const
{
  return {best_position_, best_fitness_, history_};
}

SearchSnapshot Search::snapshot() const
{
  std::ostringstream rng_state;
  rng_state << rng_;
  return {iteration_, bats_, best_position_, best_fitness_, history_, rng_state.str()};
}

void Search::restore(const SearchSnapshot& snap)
{
  if (snap.bats.size() != config_.population_size)
    throw std::invalid_argument("snapshot population does not match configuration");
  for (const auto& b : snap.bats)
    if (b.position.size() != genome_length_ || b.velocity.size() != genome_length_)
      throw std::invalid_argument("snapshot genome length does not match configuration");
  std::istringstream in(snap.rng_state);
  Rng rng;
  in >> rng;
  if (!in)
    throw std::invalid_argument("snapshot RNG state is unreadable");
  rng_ = rng;
  bats_ = snap.bats;
  best_position_ = snap.best_position;
  best_fitness_ = snap.best_fitness;
  history_ = snap.history;
  iteration_ = snap.iteration;
  initialized_ = true;
}

SearchResult run(const BbaConfig& config, std::size_t genome_length, BatchEvaluator evaluator)
{
  Search search(config, genome_length, std::move(evaluator));
  search.run_to_completion();
  return search.result();
}

SearchResult run(const BbaConfig& config, std::size_t genome_length, FitnessFunction fitness)
{
  return run(config, genome_length, make_batch_evaluator(std::move(fitness), config.threads));
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRecord>& history)
{
  out << "iteration,best_fitness,mean_fitness,mean_loudness\n";
  for (const auto& h : history)
    out << h.iteration << ',' << detail::format_double(h.best_fitness) << ',' << detail::format_double(h.mean_fitness)
        << ',' << detail::format_double(h.mean_loudness) << '\n';
}

} // namespace nasbba::bba
