#include "nasbba/bba.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace nasbba;
using namespace nasbba::bba;

namespace {

// mpmath, 40 digits: |2/pi * atan(pi/2 * v)|
constexpr double kTransfer1 = 0.6390929267718916267;
constexpr double kTransferHalf = 0.42384473319136163939;
constexpr double kTransfer2 = 0.80381347609541268357;
constexpr double kTransferNeg37 = 0.89152570336464326105;
// 0.5 * (1 - exp(-0.9)) and 0.5 * (1 - exp(-1.8))
constexpr double kPulse1 = 0.29671517012970044406;
constexpr double kPulse2 = 0.41735055588920673085;

double zeros(const BitVector& b, const EvalContext&)
{
  return double(b.size() - b.count_ones());
}

BatState bat_with(std::size_t length)
{
  BatState b;
  b.position = BitVector(length);
  b.velocity.assign(length, 0.0);
  b.loudness = 0.25;
  b.pulse_rate = 0.5;
  b.initial_pulse_rate = 0.5;
  b.fitness = 10.0;
  b.evaluated = true;
  return b;
}

} // namespace

TEST_CASE("config defaults and validation")
{
  BbaConfig c;
  CHECK(c.initial_loudness == 0.25);
  CHECK(c.initial_pulse_rate == 0.5);
  CHECK(c.alpha == 0.9);
  CHECK(c.gamma == 0.9);
  CHECK(c.problems().empty());

  c.population_size = 1;
  c.alpha = 1.5;
  c.f_min = 2.0;
  const auto issues = c.problems();
  CHECK(issues.size() >= 3);
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("update_frequency interpolates between bounds")
{
  BbaConfig c;
  auto b = bat_with(1);
  CHECK(update_frequency(b, 0.0, c) == 0.0);
  CHECK(update_frequency(b, 1.0, c) == 1.0);
  CHECK(update_frequency(b, 0.3, c) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(b.frequency == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("update_velocity uses signed bit differences")
{
  auto b = bat_with(1);
  b.frequency = 1.0;
  b.position.set(0, true);
  CHECK(update_velocity(b, BitVector::parse("1")).at(0) == 0.0);

  b.frequency = 0.5;
  CHECK(update_velocity(b, BitVector::parse("0")).at(0) == 0.5);

  auto c = bat_with(1);
  c.velocity = {0.2};
  c.frequency = 1.0;
  CHECK(update_velocity(c, BitVector::parse("1")).at(0) == doctest::Approx(-0.8).epsilon(1e-15));

  CHECK_THROWS(update_velocity(c, BitVector::parse("10")));
}

TEST_CASE("transfer matches the high precision oracle")
{
  CHECK(transfer(0.0) == 0.0);
  CHECK(transfer(1.0) == doctest::Approx(kTransfer1).epsilon(1e-15));
  CHECK(transfer(-1.0) == transfer(1.0));
  CHECK(transfer(0.5) == doctest::Approx(kTransferHalf).epsilon(1e-15));
  CHECK(transfer(2.0) == doctest::Approx(kTransfer2).epsilon(1e-15));
  CHECK(transfer(-3.7) == doctest::Approx(kTransferNeg37).epsilon(1e-15));
  CHECK(transfer(1e6) < 1.0);
  CHECK(transfer(1e6) > 0.999999);
  CHECK_THROWS_AS(transfer(std::nan("")), std::domain_error);
  CHECK_THROWS_AS(transfer(INFINITY), std::domain_error);
}

TEST_CASE("transfer is monotone in |v|")
{
  double prev = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double v = i * 0.01;
    const double y = transfer(v);
    CHECK(y > prev);
    CHECK(transfer(-v) == y);
    prev = y;
  }
}

TEST_CASE("candidate_position flips where the draw is below the transfer value")
{
  auto b = bat_with(2);
  b.position = BitVector::parse("10");
  b.velocity = {0.0, 1e6};
  const std::vector<double> draws{0.5, 0.5};
  CHECK(candidate_position(b, draws).to_string() == "11");

  Rng rng(3);
  b.velocity = {0.0, 0.0};
  for (int k = 0; k < 100; ++k)
    CHECK(candidate_position(b, rng) == b.position);
}

TEST_CASE("local_search boundary cases")
{
  Rng rng(11);
  const auto g = BitVector::parse("1100101011110000");
  CHECK(local_search(g, 0.25, 0.0, rng) == g);
  CHECK(local_search(g, 0.0, 0.9, rng) == g);
  const auto all = local_search(g, 1.0, -1.0, rng);
  CHECK(hamming_distance(all, g) == g.size());
  CHECK(hamming_distance(local_search(g, 4.0, 0.5, rng), g) == g.size());
}

TEST_CASE("local_search mean Hamming distance matches the flip probability")
{
  Rng rng(42);
  const BitVector g(64);
  const double mean_a = 0.25;
  const double eps = 0.6;
  const double p = eps * mean_a;
  const int trials = 20000;
  double sum = 0.0;
  for (int k = 0; k < trials; ++k)
    sum += double(hamming_distance(local_search(g, mean_a, eps, rng), g));
  const double mean = sum / trials;
  const double expected = 64 * p;
  const double se = std::sqrt(64 * p * (1 - p) / trials);
  CHECK(std::abs(mean - expected) < 3 * se);
}

TEST_CASE("accept_and_update applies the loudness and pulse rules")
{
  BbaConfig c;
  auto b = bat_with(4);
  const auto cand = BitVector::parse("1010");

  SUBCASE("accepted at t=1")
  {
    CHECK(accept_and_update(b, cand, 1.0, 2.0, 1, c, 0.1));
    CHECK(b.position == cand);
    CHECK(b.fitness == 1.0);
    CHECK(b.loudness == doctest::Approx(0.225).epsilon(1e-15));
    CHECK(b.pulse_rate == doctest::Approx(kPulse1).epsilon(1e-15));
  }
  SUBCASE("accepted at t=2")
  {
    CHECK(accept_and_update(b, cand, 1.0, 2.0, 2, c, 0.1));
    CHECK(b.pulse_rate == doctest::Approx(kPulse2).epsilon(1e-15));
  }
  SUBCASE("draw above loudness rejects")
  {
    CHECK_FALSE(accept_and_update(b, cand, 1.0, 2.0, 1, c, 0.3));
    CHECK(b.position == BitVector(4));
    CHECK(b.loudness == 0.25);
  }
  SUBCASE("ties and worse candidates reject")
  {
    CHECK_FALSE(accept_and_update(b, cand, 2.0, 2.0, 1, c, 0.0));
    CHECK_FALSE(accept_and_update(b, cand, 3.0, 2.0, 1, c, 0.0));
    CHECK(b.fitness == 10.0);
    CHECK(b.pulse_rate == 0.5);
  }
}

TEST_CASE("initialization contract")
{
  BbaConfig c;
  c.population_size = 10;
  c.rng_seed = 7;
  Search s(c, 32, make_batch_evaluator(zeros));
  s.initialize();
  REQUIRE(s.bats().size() == 10);
  for (const auto& b : s.bats()) {
    CHECK(b.position.size() == 32);
    CHECK(b.velocity == std::vector<double>(32, 0.0));
    CHECK(b.loudness == 0.25);
    CHECK(b.pulse_rate == 0.5);
    CHECK(b.evaluated);
  }
  double best = INFINITY;
  for (const auto& b : s.bats())
    best = std::min(best, b.fitness);
  CHECK(s.best_fitness() == best);
  CHECK(s.result().history.size() == 1);
}

TEST_CASE("argmin over two bats with one-bit genomes")
{
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    BbaConfig c;
    c.population_size = 2;
    c.iterations = 0;
    c.rng_seed = seed;
    Search s(c, 1, make_batch_evaluator([](const BitVector& b, const EvalContext&) { return double(b.count_ones()); }));
    s.initialize();
    const auto& bats = s.bats();
    CHECK(s.best_fitness() == std::min(bats[0].fitness, bats[1].fitness));
  }
}

TEST_CASE("initial evaluation failure names the genome")
{
  BbaConfig c;
  c.population_size = 3;
  Search s(c, 8, make_batch_evaluator([](const BitVector&, const EvalContext&) -> double {
             throw std::runtime_error("boom");
           }));
  try {
    s.initialize();
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.genome().size() == 8);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
}

TEST_CASE("failing evaluations after initialization score +inf")
{
  BbaConfig c;
  c.population_size = 6;
  c.iterations = 10;
  c.rng_seed = 5;
  int calls = 0;
  auto fitness = [&](const BitVector& b, const EvalContext& ctx) -> double {
    ++calls;
    if (ctx.iteration > 0 && b[0])
      throw std::runtime_error("unlucky");
    return zeros(b, ctx);
  };
  const auto r = run(c, 16, FitnessFunction(fitness));
  CHECK(std::isfinite(r.best_fitness));
  CHECK(r.history.size() == 11);
}

TEST_CASE("constant fitness keeps a flat history")
{
  BbaConfig c;
  c.iterations = 20;
  const auto r = run(c, 12, FitnessFunction([](const BitVector&, const EvalContext&) { return 3.5; }));
  CHECK(r.best_fitness == 3.5);
  for (const auto& h : r.history) {
    CHECK(h.best_fitness == 3.5);
    CHECK(h.mean_fitness == 3.5);
  }
}

TEST_CASE("zero iterations returns the initialization best")
{
  BbaConfig c;
  c.iterations = 0;
  c.rng_seed = 9;
  Search s(c, 16, make_batch_evaluator(zeros));
  s.initialize();
  const auto init_best = s.best_fitness();
  const auto r = run(c, 16, FitnessFunction(zeros));
  CHECK(r.best_fitness == init_best);
  CHECK(r.history.size() == 1);
}

TEST_CASE("elitism, loudness and pulse rate trajectories")
{
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    BbaConfig c;
    c.population_size = 12;
    c.iterations = 60;
    c.rng_seed = seed;
    Search s(c, 24, make_batch_evaluator(zeros));
    s.initialize();
    std::vector<BatState> prev = s.bats();
    std::vector<bool> updated(prev.size(), false);
    while (!s.done()) {
      s.step();
      for (std::size_t i = 0; i < prev.size(); ++i) {
        const auto& now = s.bats()[i];
        CHECK(now.loudness <= prev[i].loudness);
        CHECK(now.pulse_rate <= now.initial_pulse_rate);
        // Pulse rates only move on acceptance; after the first update they rise.
        if (updated[i])
          CHECK(now.pulse_rate >= prev[i].pulse_rate);
        if (now.loudness < prev[i].loudness)
          updated[i] = true;
        prev[i] = now;
      }
    }
    const auto h = s.result().history;
    for (std::size_t k = 1; k < h.size(); ++k)
      CHECK(h[k].best_fitness <= h[k - 1].best_fitness);
  }
}

TEST_CASE("zero velocity with local search disabled leaves positions unchanged")
{
  BbaConfig c;
  c.population_size = 5;
  c.iterations = 1;
  c.f_min = 0.0;
  c.f_max = 0.0;
  c.initial_pulse_rate = 1.0;
  Search s(c, 16, make_batch_evaluator(zeros));
  s.initialize();
  const auto before = s.bats();
  s.step();
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(s.bats()[i].position == before[i].position);
}

TEST_CASE("runs are deterministic, including with several threads")
{
  BbaConfig c;
  c.population_size = 10;
  c.iterations = 30;
  c.rng_seed = 123;
  const auto a = run(c, 32, FitnessFunction(zeros));
  const auto b = run(c, 32, FitnessFunction(zeros));
  CHECK(a == b);
  c.threads = 4;
  const auto t = run(c, 32, FitnessFunction(zeros));
  CHECK(a == t);
}

TEST_CASE("snapshot and restore continue identically")
{
  BbaConfig c;
  c.population_size = 8;
  c.iterations = 20;
  c.rng_seed = 77;
  c.elite_count = 3;
  Search full(c, 20, make_batch_evaluator(zeros));
  full.run_to_completion();

  Search first(c, 20, make_batch_evaluator(zeros));
  first.initialize();
  for (int k = 0; k < 7; ++k)
    first.step();
  const auto snap = first.snapshot();

  Search second(c, 20, make_batch_evaluator(zeros));
  second.restore(snap);
  second.run_to_completion();
  CHECK(second.result() == full.result());
}

TEST_CASE("stream seeds differ per iteration and bat")
{
  CHECK(stream_seed(1, 0, 0) != stream_seed(1, 0, 1));
  CHECK(stream_seed(1, 0, 0) != stream_seed(1, 1, 0));
  CHECK(stream_seed(1, 2, 3) == stream_seed(1, 2, 3));
}

TEST_CASE("history CSV layout")
{
  std::ostringstream out;
  write_history_csv(out, {{0, 3.0, 4.5, 0.25}, {1, 2.0, 3.0, 0.2375}});
  CHECK(out.str() == "iteration,best_fitness,mean_fitness,mean_loudness\n0,3,4.5,0.25\n1,2,3,0.2375\n");
}
