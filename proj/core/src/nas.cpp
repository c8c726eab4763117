#include "nasbba/nas.hpp"

#include "nasbba/hashing.hpp"

#include "detail/atomic_write.hpp"
#include "detail/numbers.hpp"
#include "detail/parallel.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nasbba::nas {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kStateVersion = 1;

data::PreparedData prepare_for(const ArchitectureSpec& spec,
                               const std::vector<data::AugmentedRecord>& series,
                               const NasConfig& config)
{
  return data::prepare(
    data::feature_matrix(series, config.feature_mode), spec.timesteps, config.split_ratio, config.split_order);
}

std::uint64_t build_seed(std::uint64_t eval_seed) { return derive_seed(eval_seed, {1}); }

neuro::TrainConfig train_config_for(const NasConfig& config, std::size_t epochs, std::uint64_t eval_seed)
{
  neuro::TrainConfig tc = config.train;
  tc.epochs = epochs;
  tc.rng_seed = derive_seed(eval_seed, {2});
  return tc;
}

std::string num(double x) { return detail::format_double(x); }

double parse_num(const json& v)
{
  const auto s = v.get<std::string>();
  const auto d = detail::parse_number<double>(s);
  if (!d)
    throw RunStateError("search state holds an unreadable number '" + s + "'");
  return *d;
}

json bat_to_json(const bba::BatState& b)
{
  json v = json::array();
  for (double x : b.velocity)
    v.push_back(num(x));
  return {{"position", b.position.to_string()},
          {"velocity", v},
          {"frequency", num(b.frequency)},
          {"loudness", num(b.loudness)},
          {"pulse_rate", num(b.pulse_rate)},
          {"initial_pulse_rate", num(b.initial_pulse_rate)},
          {"fitness", num(b.fitness)},
          {"evaluated", b.evaluated}};
}

bba::BatState bat_from_json(const json& j)
{
  bba::BatState b;
  b.position = BitVector::parse(j.at("position").get<std::string>());
  for (const auto& x : j.at("velocity"))
    b.velocity.push_back(parse_num(x));
  b.frequency = parse_num(j.at("frequency"));
  b.loudness = parse_num(j.at("loudness"));
  b.pulse_rate = parse_num(j.at("pulse_rate"));
  b.initial_pulse_rate = parse_num(j.at("initial_pulse_rate"));
  b.fitness = parse_num(j.at("fitness"));
  b.evaluated = j.at("evaluated").get<bool>();
  return b;
}

struct SearchBook
{
  FitnessCache cache;
  std::size_t evaluations = 0;
  std::size_t cache_hits = 0;
};

std::string state_to_json(const bba::SearchSnapshot& snap,
                          const SearchBook& book,
                          const std::string& cfg_hash,
                          const std::string& data_hash)
{
  json bats = json::array();
  for (const auto& b : snap.bats)
    bats.push_back(bat_to_json(b));
  json history = json::array();
  for (const auto& h : snap.history)
    history.push_back({{"iteration", h.iteration},
                       {"best_fitness", num(h.best_fitness)},
                       {"mean_fitness", num(h.mean_fitness)},
                       {"mean_loudness", num(h.mean_loudness)}});
  json cache = json::array();
  for (const auto& [bits, rec] : book.cache.entries())
    cache.push_back(
      {{"genome", bits}, {"mse", num(rec.mse)}, {"final_train_loss", num(rec.final_train_loss)}, {"error", rec.error}});
  json doc{{"version", kStateVersion},
           {"config_hash", cfg_hash},
           {"dataset_hash", data_hash},
           {"iteration", snap.iteration},
           {"rng_state", snap.rng_state},
           {"best_position", snap.best_position.to_string()},
           {"best_fitness", num(snap.best_fitness)},
           {"bats", bats},
           {"history", history},
           {"cache", cache},
           {"evaluations", book.evaluations},
           {"cache_hits", book.cache_hits}};
  return doc.dump(1) + "\n";
}

bba::SearchSnapshot state_from_json(const json& doc, SearchBook& book)
{
  if (doc.at("version").get<int>() != kStateVersion)
    throw RunStateError("unsupported search state version");
  bba::SearchSnapshot snap;
  snap.iteration = doc.at("iteration").get<std::size_t>();
  snap.rng_state = doc.at("rng_state").get<std::string>();
  snap.best_position = BitVector::parse(doc.at("best_position").get<std::string>());
  snap.best_fitness = parse_num(doc.at("best_fitness"));
  for (const auto& b : doc.at("bats"))
    snap.bats.push_back(bat_from_json(b));
  for (const auto& h : doc.at("history"))
    snap.history.push_back({h.at("iteration").get<std::size_t>(),
                            parse_num(h.at("best_fitness")),
                            parse_num(h.at("mean_fitness")),
                            parse_num(h.at("mean_loudness"))});
  for (const auto& c : doc.at("cache")) {
    FitnessRecord rec;
    rec.mse = parse_num(c.at("mse"));
    rec.final_train_loss = parse_num(c.at("final_train_loss"));
    rec.error = c.at("error").get<std::string>();
    book.cache.insert(BitVector::parse(c.at("genome").get<std::string>()), rec);
  }
  book.evaluations = doc.at("evaluations").get<std::size_t>();
  book.cache_hits = doc.at("cache_hits").get<std::size_t>();
  return snap;
}

void write_run_artifacts(const fs::path& dir,
                         const NasConfig& config,
                         const bba::SearchSnapshot& snap,
                         const SearchBook& book,
                         const std::string& cfg_hash,
                         const std::string& data_hash)
{
  detail::atomic_write(dir / "config.json", config_to_json(config));
  std::ostringstream hist;
  write_run_history_csv(hist, snap.history);
  detail::atomic_write(dir / "history.csv", hist.str());
  detail::atomic_write(dir / "best_genome.txt", snap.best_position.to_string() + "\n");
  detail::atomic_write(dir / "best_spec.json", to_json_text(genome::decode(snap.best_position, config.layout)));
  detail::atomic_write(dir / "checkpoints" / "search_state.json", state_to_json(snap, book, cfg_hash, data_hash));
}

std::string join(const std::vector<double>& xs)
{
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i)
      out += ';';
    out += num(xs[i]);
  }
  return out;
}

double finite_mean(const std::vector<double>& xs)
{
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : xs) {
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  }
  return n ? sum / double(n) : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

std::string dataset_hash(const std::vector<data::AugmentedRecord>& series)
{
  std::ostringstream out;
  data::write_augmented_csv(out, series);
  return sha256_hex(out.str());
}

std::uint64_t genome_seed(std::uint64_t run_seed, const BitVector& genome)
{
  return derive_seed(run_seed, {fnv1a64(genome.to_string())});
}

FitnessRecord fitness_of(const BitVector& genome,
                         const std::vector<data::AugmentedRecord>& series,
                         const NasConfig& config,
                         std::uint64_t eval_seed)
{
  FitnessRecord rec;
  try {
    if (genome.size() != genome::genome_length(config.layout))
      throw std::invalid_argument("genome length " + std::to_string(genome.size()) + " does not match the layout");
    const auto spec = genome::decode(genome, config.layout);
    const auto prepared = prepare_for(spec, series, config);
    auto net = neuro::Network::build(spec, data::feature_count(config.feature_mode), build_seed(eval_seed));
    const auto trained =
      neuro::train(std::move(net), prepared.train, train_config_for(config, config.train.epochs, eval_seed));
    if (!trained.metrics.train_loss_history.empty())
      rec.final_train_loss = trained.metrics.train_loss_history.back();
    const double mse = neuro::evaluate(trained.network, prepared.test).mse;
    rec.mse = std::isfinite(mse) ? mse : kInf;
    if (!std::isfinite(mse))
      rec.error = "non-finite held-out error";
  } catch (const std::exception& e) {
    rec.mse = kInf;
    rec.error = e.what();
  }
  if (!rec.ok())
    spdlog::warn("genome {} scored +inf: {}", genome.to_string(), rec.error);
  return rec;
}

std::optional<FitnessRecord> FitnessCache::find(const BitVector& genome) const
{
  std::scoped_lock lock(mutex_);
  const auto it = entries_.find(genome.to_string());
  if (it == entries_.end())
    return std::nullopt;
  return it->second;
}

void FitnessCache::insert(const BitVector& genome, const FitnessRecord& record)
{
  std::scoped_lock lock(mutex_);
  entries_.insert_or_assign(genome.to_string(), record);
}

std::size_t FitnessCache::size() const
{
  std::scoped_lock lock(mutex_);
  return entries_.size();
}

std::map<std::string, FitnessRecord> FitnessCache::entries() const
{
  std::scoped_lock lock(mutex_);
  return entries_;
}

double NasResult::best_rmse() const { return std::sqrt(best_fitness); }

double NasResult::cache_hit_rate() const
{
  const auto total = evaluations + cache_hits;
  return total ? double(cache_hits) / double(total) : 0.0;
}

void write_run_history_csv(std::ostream& out, const std::vector<bba::HistoryRecord>& history)
{
  out << "iteration,best_fitness,mean_fitness\n";
  for (const auto& h : history)
    out << h.iteration << ',' << num(h.best_fitness) << ',' << num(h.mean_fitness) << '\n';
}

NasResult run_search(const NasConfig& config,
                     const std::vector<data::AugmentedRecord>& series,
                     const RunOptions& options)
{
  config.validate();
  const std::size_t L = genome::genome_length(config.layout);
  const std::string cfg_hash = config_hash(config);
  const std::string data_hash = dataset_hash(series);
  const std::uint64_t run_seed = config.seed();

  SearchBook book;
  auto evaluator = [&](std::span<const BitVector> genomes, std::span<const bba::EvalContext>) {
    std::vector<std::optional<FitnessRecord>> records(genomes.size());
    std::vector<std::size_t> misses;
    std::map<std::string, std::size_t> scheduled;
    for (std::size_t i = 0; i < genomes.size(); ++i) {
      if (auto hit = book.cache.find(genomes[i])) {
        records[i] = *hit;
        ++book.cache_hits;
      } else if (scheduled.emplace(genomes[i].to_string(), i).second) {
        misses.push_back(i);
      } else {
        ++book.cache_hits;
      }
    }
    detail::parallel_for(misses.size(), config.bba.threads, [&](std::size_t k) {
      const auto i = misses[k];
      records[i] = fitness_of(genomes[i], series, config, genome_seed(run_seed, genomes[i]));
    });
    book.evaluations += misses.size();
    for (auto i : misses)
      book.cache.insert(genomes[i], *records[i]);

    std::vector<bba::Evaluation> out(genomes.size());
    for (std::size_t i = 0; i < genomes.size(); ++i) {
      if (!records[i])
        records[i] = records[scheduled.at(genomes[i].to_string())];
      // Failed trainings already carry +inf, which the search never accepts.
      out[i].fitness = records[i]->mse;
    }
    return out;
  };

  bba::Search search(config.bba, L, evaluator);
  NasResult result;
  result.seed = run_seed;
  result.config_hash = cfg_hash;
  result.dataset_hash = data_hash;

  const std::optional<fs::path> state_path =
    options.run_dir ? std::optional(*options.run_dir / "checkpoints" / "search_state.json") : std::nullopt;
  if (state_path && options.resume && fs::exists(*state_path)) {
    json doc;
    try {
      std::ifstream in(*state_path);
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw RunStateError("cannot read " + state_path->string() + ": " + e.what());
    }
    if (doc.value("config_hash", "") != cfg_hash)
      throw RunStateError("run directory " + options.run_dir->string() +
                          " was created with a different configuration; use a fresh directory");
    if (doc.value("dataset_hash", "") != data_hash)
      throw RunStateError("run directory " + options.run_dir->string() +
                          " was created from a different dataset; use a fresh directory");
    try {
      search.restore(state_from_json(doc, book));
    } catch (const json::exception& e) {
      throw RunStateError("malformed search state: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
      throw RunStateError("search state does not fit this configuration: " + std::string(e.what()));
    }
    result.resumed = true;
    spdlog::info("resuming search at iteration {}/{}", search.iteration(), config.bba.iterations);
  } else {
    search.initialize();
    if (options.run_dir)
      write_run_artifacts(*options.run_dir, config, search.snapshot(), book, cfg_hash, data_hash);
  }

  while (!search.done()) {
    if (options.stop_after_iteration && search.iteration() >= *options.stop_after_iteration)
      break;
    search.step();
    spdlog::info("iteration {}/{}: best mse {} ({} trainings, {} cache hits)",
                 search.iteration(),
                 config.bba.iterations,
                 search.best_fitness(),
                 book.evaluations,
                 book.cache_hits);
    if (options.run_dir)
      write_run_artifacts(*options.run_dir, config, search.snapshot(), book, cfg_hash, data_hash);
  }
  if (options.run_dir && search.done())
    write_run_artifacts(*options.run_dir, config, search.snapshot(), book, cfg_hash, data_hash);

  const auto r = search.result();
  result.best_genome = r.best_position;
  result.best_spec = genome::decode(r.best_position, config.layout);
  result.best_fitness = r.best_fitness;
  result.history = r.history;
  result.evaluations = book.evaluations;
  result.cache_hits = book.cache_hits;
  result.completed = search.done();
  return result;
}

neuro::ModelCheckpoint TrainedModel::checkpoint(data::FeatureMode mode) const
{
  return {network, spec, scaler, mode};
}

TrainedModel train_spec(const ArchitectureSpec& spec,
                        const std::vector<data::AugmentedRecord>& series,
                        const NasConfig& config,
                        std::size_t epochs,
                        std::uint64_t seed)
{
  spec.validate();
  const auto prepared = prepare_for(spec, series, config);
  TrainedModel model;
  model.spec = spec;
  model.seed = seed;
  model.scaler = prepared.scaler;
  model.network = neuro::Network::build(spec, data::feature_count(config.feature_mode), build_seed(seed));
  try {
    auto trained = neuro::train(model.network, prepared.train, train_config_for(config, epochs, seed), &prepared.test);
    model.network = std::move(trained.network);
    model.metrics = std::move(trained.metrics);
  } catch (const neuro::DivergedError& e) {
    model.metrics = e.partial();
    model.diverged_epoch = e.epoch();
  }
  return model;
}

TrainedModel retrain_best(const NasResult& result,
                          const std::vector<data::AugmentedRecord>& series,
                          const NasConfig& config,
                          std::size_t epochs,
                          std::optional<std::uint64_t> seed,
                          const std::optional<fs::path>& run_dir)
{
  const auto s = seed.value_or(genome_seed(result.seed, result.best_genome));
  auto model = train_spec(result.best_spec, series, config, epochs, s);
  if (run_dir) {
    std::ostringstream losses;
    neuro::write_loss_csv(losses, model.metrics);
    detail::atomic_write(*run_dir / "losses" / "best_model.csv", losses.str());
    if (!model.diverged_epoch)
      neuro::save_checkpoint(*run_dir / "checkpoints" / "best_model.ckpt", model.checkpoint(config.feature_mode));
  }
  return model;
}

std::vector<ComparisonRow> compare_architectures(const std::vector<NamedSpec>& specs,
                                                 const std::vector<data::AugmentedRecord>& series,
                                                 const NasConfig& config,
                                                 std::size_t epochs,
                                                 const std::vector<std::uint64_t>& seeds)
{
  std::vector<ComparisonRow> rows;
  for (const auto& named : specs) {
    ComparisonRow row;
    row.name = named.name;
    row.spec = named.spec;
    row.seeds = seeds;
    std::vector<std::string> notes;
    for (auto seed : seeds) {
      double tr = std::numeric_limits<double>::quiet_NaN();
      double va = tr;
      try {
        const auto model = train_spec(named.spec, series, config, epochs, seed);
        if (model.diverged_epoch) {
          notes.push_back("seed " + std::to_string(seed) + " diverged at epoch " +
                          std::to_string(*model.diverged_epoch));
        } else {
          tr = model.metrics.final_train_rmse;
          va = model.metrics.validation_rmse;
        }
      } catch (const std::exception& e) {
        notes.push_back("seed " + std::to_string(seed) + ": " + e.what());
      }
      row.train_rmse.push_back(tr);
      row.val_rmse.push_back(va);
    }
    row.mean_train_rmse = finite_mean(row.train_rmse);
    row.mean_val_rmse = finite_mean(row.val_rmse);
    for (std::size_t i = 0; i < notes.size(); ++i)
      row.note += (i ? "; " : "") + notes[i];
    if (!row.note.empty())
      spdlog::warn("{}: {}", row.name, row.note);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_comparison_csv(std::ostream& out, std::vector<ComparisonRow> rows)
{
  std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    const bool fa = std::isfinite(a.mean_val_rmse);
    const bool fb = std::isfinite(b.mean_val_rmse);
    if (fa != fb)
      return fa;
    return fa && a.mean_val_rmse < b.mean_val_rmse;
  });
  auto csv_field = [](std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
      return s;
    std::string q = "\"";
    for (char c : s)
      q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  out << "rank,name,mean_val_rmse,mean_train_rmse,val_rmse_per_seed,train_rmse_per_seed,note\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << (i + 1) << ',' << csv_field(r.name) << ',' << num(r.mean_val_rmse) << ',' << num(r.mean_train_rmse) << ','
        << join(r.val_rmse) << ',' << join(r.train_rmse) << ',' << csv_field(r.note) << '\n';
  }
}

std::string utc_timestamp()
{
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const fs::path& path, const RunManifest& manifest)
{
  const fs::path base = path.has_parent_path() ? fs::absolute(path.parent_path()) : fs::current_path();
  json outputs = json::array();
  for (const auto& p : manifest.outputs) {
    const auto abs = fs::absolute(p);
    auto rel = abs.lexically_relative(base);
    const bool inside = !rel.empty() && *rel.begin() != "..";
    outputs.push_back({{"path", (inside ? rel : abs).generic_string()}, {"sha256", sha256_file(abs)}});
  }
  json doc{{"command", manifest.command},
           {"config_hash", manifest.config_hash},
           {"dataset_hash", manifest.dataset_hash},
           {"seed", manifest.seed},
           {"started_at", manifest.started_at},
           {"finished_at", manifest.finished_at},
           {"outputs", outputs}};
  detail::atomic_write(path, doc.dump(2) + "\n");
}

} // namespace nasbba::nas
