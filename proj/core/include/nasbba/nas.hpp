#pragma once

// Neural architecture search driver: evaluates genomes by decoding, framing at
// the genome's window length, training and scoring on held-out data, and runs
// the BBA loop with memoization and resumable run directories.

#include "nasbba/architecture.hpp"
#include "nasbba/bba.hpp"
#include "nasbba/dataset.hpp"
#include "nasbba/genome.hpp"
#include "nasbba/neuro.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nasbba::nas {

struct NasConfig
{
  bba::BbaConfig bba{.population_size = 10, .iterations = 100};
  genome::GenomeLayout layout = genome::default_layout();
  /// Training used inside fitness evaluation; `train.epochs` is the fitness epoch budget.
  neuro::TrainConfig train{};
  std::size_t retrain_epochs = 2000;
  data::FeatureMode feature_mode = data::FeatureMode::augmented;
  data::SplitOrder split_order = data::SplitOrder::frame_then_split;
  double split_ratio = 0.8;
  /// Seeded runs averaged in reports.
  std::size_t repetitions = 3;

  std::uint64_t seed() const noexcept { return bba.rng_seed; }
  void set_seed(std::uint64_t seed) noexcept { bba.rng_seed = seed; }

  std::vector<std::string> problems() const;
  void validate() const;
};

/// Flat JSON object. Keys:
///   population_size iterations f_min f_max initial_loudness initial_pulse_rate
///   alpha gamma seed elite_count threads
///   fitness_epochs retrain_epochs dropout_rate l2_lambda learning_rate batch_size
///   grad_clip shuffle
///   max_timesteps max_lstm_units max_dense_units
///   feature_mode split_ratio split_order repetitions
/// Unknown keys, type errors and invalid values are all reported together in
/// one bba::ConfigError.
NasConfig parse_config(std::string_view json_text);
NasConfig load_config(const std::filesystem::path& path);
/// Canonical flat JSON (sorted keys); its SHA-256 is the config hash.
std::string config_to_json(const NasConfig& config);
std::string config_hash(const NasConfig& config);

/// SHA-256 of the canonical augmented CSV rendering of the series.
std::string dataset_hash(const std::vector<data::AugmentedRecord>& series);

/// Per-genome training seed: hash(run_seed, genome bits).
std::uint64_t genome_seed(std::uint64_t run_seed, const BitVector& genome);

struct FitnessRecord
{
  /// Held-out MSE on the normalized scale; +inf on failure.
  double mse = std::numeric_limits<double>::infinity();
  /// Last per-epoch training loss of the fitness run.
  double final_train_loss = std::numeric_limits<double>::infinity();
  std::string error;

  bool ok() const noexcept { return error.empty(); }
  bool operator==(const FitnessRecord&) const = default;
};

/// Never throws: every failure maps to mse = +inf with `error` set.
FitnessRecord fitness_of(const BitVector& genome,
                         const std::vector<data::AugmentedRecord>& series,
                         const NasConfig& config,
                         std::uint64_t eval_seed);

/// Thread-safe memo of fitness by genome bits.
class FitnessCache
{
public:
  std::optional<FitnessRecord> find(const BitVector& genome) const;
  void insert(const BitVector& genome, const FitnessRecord& record);
  std::size_t size() const;
  std::map<std::string, FitnessRecord> entries() const;

private:
  mutable std::mutex mutex_;
  std::map<std::string, FitnessRecord> entries_;
};

struct RunOptions
{
  /// Where history, checkpoints and results go. Nothing is written when empty.
  std::optional<std::filesystem::path> run_dir;
  /// Continue from run_dir/checkpoints/search_state.json when present.
  bool resume = true;
  /// Stop (with state saved) after this iteration, as if interrupted.
  std::optional<std::size_t> stop_after_iteration;
};

struct NasResult
{
  BitVector best_genome;
  ArchitectureSpec best_spec;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<bba::HistoryRecord> history;
  std::size_t evaluations = 0; ///< trainings actually run
  std::size_t cache_hits = 0;
  bool completed = false;
  bool resumed = false;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset_hash;

  double best_rmse() const;
  double cache_hit_rate() const;
};

class RunStateError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Drives bba::Search with fitness_of. When a run directory is given, writes
///   config.json, history.csv, best_genome.txt, best_spec.json,
///   checkpoints/search_state.json
/// after every iteration with write-then-rename.
NasResult run_search(const NasConfig& config,
                     const std::vector<data::AugmentedRecord>& series,
                     const RunOptions& options = {});

/// CSV with header iteration,best_fitness,mean_fitness.
void write_run_history_csv(std::ostream& out, const std::vector<bba::HistoryRecord>& history);

struct TrainedModel
{
  neuro::Network network;
  neuro::Metrics metrics;
  data::Scaler scaler;
  ArchitectureSpec spec;
  std::uint64_t seed = 0;
  std::optional<std::size_t> diverged_epoch;

  neuro::ModelCheckpoint checkpoint(data::FeatureMode mode) const;
};

/// Frame at spec.timesteps, split, scale, build and train with per-epoch
/// validation on the held-out part. Uses the same seed derivation as fitness_of.
TrainedModel train_spec(const ArchitectureSpec& spec,
                        const std::vector<data::AugmentedRecord>& series,
                        const NasConfig& config,
                        std::size_t epochs,
                        std::uint64_t seed);

/// Fresh build of the best spec trained for `epochs` with the genome's seed
/// (or `seed` if given). Writes checkpoints/best_model.ckpt and
/// losses/best_model.csv when `run_dir` is set.
TrainedModel retrain_best(const NasResult& result,
                          const std::vector<data::AugmentedRecord>& series,
                          const NasConfig& config,
                          std::size_t epochs,
                          std::optional<std::uint64_t> seed = std::nullopt,
                          const std::optional<std::filesystem::path>& run_dir = std::nullopt);

struct ComparisonRow
{
  std::string name;
  ArchitectureSpec spec;
  std::vector<std::uint64_t> seeds;
  std::vector<double> train_rmse;
  std::vector<double> val_rmse;
  double mean_train_rmse = std::numeric_limits<double>::quiet_NaN();
  double mean_val_rmse = std::numeric_limits<double>::quiet_NaN();
  /// Failures per seed, empty when all runs succeeded.
  std::string note;
};

/// Trains every spec with identical settings and seeds. Specs bypass the codec,
/// so they may exceed the search caps. Failures are annotated, not thrown.
std::vector<ComparisonRow> compare_architectures(const std::vector<NamedSpec>& specs,
                                                 const std::vector<data::AugmentedRecord>& series,
                                                 const NasConfig& config,
                                                 std::size_t epochs,
                                                 const std::vector<std::uint64_t>& seeds);

/// Rows ranked by mean validation RMSE (failures last). Header:
/// rank,name,mean_val_rmse,mean_train_rmse,val_rmse_per_seed,train_rmse_per_seed,note
void write_comparison_csv(std::ostream& out, std::vector<ComparisonRow> rows);

/// Record of one command invocation and the artifacts it wrote.
struct RunManifest
{
  std::string command;
  std::string config_hash;
  std::string dataset_hash;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  /// Artifact paths (relative to the manifest's directory when possible).
  std::vector<std::filesystem::path> outputs;
};

std::string utc_timestamp();
/// Writes the manifest as JSON with a SHA-256 per output file.
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

} // namespace nasbba::nas
