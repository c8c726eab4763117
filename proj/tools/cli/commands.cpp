#include "commands.hpp"

#include "nasbba/architecture.hpp"
#include "nasbba/genome.hpp"
#include "nasbba/hashing.hpp"
#include "nasbba/nas.hpp"
#include "nasbba/neuro.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace nasbba::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Maps the library's exception types onto exit codes.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn)
{
  try {
    return fn();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_usage;
  } catch (const bba::ConfigError& e) {
    err << e.what() << '\n';
    return exit_usage;
  } catch (const nas::RunStateError& e) {
    err << "run directory error: " << e.what() << '\n';
    return exit_usage;
  } catch (const data::DataError& e) {
    err << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const neuro::DivergedError& e) {
    err << "aborted: " << e.what() << '\n';
    return exit_runtime;
  } catch (const bba::EvaluationError& e) {
    err << "aborted: " << e.what() << '\n';
    return exit_runtime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

std::string read_text(const fs::path& path, const char* what)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw UsageError(std::string("cannot read ") + what + " " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text)
{
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
}

std::vector<data::AugmentedRecord> load_series(const fs::path& path)
{
  if (!fs::exists(path))
    throw data::DataError(data::DataError::Kind::parse, "no such file " + path.string());
  return data::read_augmented_file(path);
}

nas::NasConfig load_nas_config(const std::optional<fs::path>& path)
{
  return path ? nas::load_config(*path) : nas::NasConfig{};
}

ArchitectureSpec load_spec(const fs::path& path, const std::string& name)
{
  const auto text = read_text(path, "spec file");
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    std::istringstream in(text);
    const auto specs = read_spec_list(in);
    if (name.empty() && specs.size() == 1)
      return specs.front().spec;
    for (const auto& s : specs)
      if (s.name == name)
        return s.spec;
    throw UsageError(name.empty() ? "spec file holds several records; pick one with --name"
                                  : "no spec named '" + name + "' in " + path.string());
  }
  return spec_from_json_text(text);
}

std::string format_real(double x)
{
  std::ostringstream ss;
  ss.precision(6);
  ss << x;
  return ss.str();
}

template <class T>
std::string join(const std::vector<T>& xs, const char* sep)
{
  std::ostringstream ss;
  for (std::size_t i = 0; i < xs.size(); ++i)
    ss << (i ? sep : "") << xs[i];
  return ss.str();
}

} // namespace

int cmd_prepare(const PrepareOptions& o, std::ostream& out, std::ostream& err)
{
  return guarded(err, [&] {
    const auto started = nas::utc_timestamp();
    if (o.country.empty())
      throw UsageError("--country is required");
    const auto records = data::ingest_file(o.ecdc, {o.country, o.cumulative_column});
    const auto calendar = data::read_holidays_file(o.holidays);
    if (calendar.dates.empty())
      err << "warning: holiday file " << o.holidays.string() << " lists no dates; every d_type will be 0\n";
    const auto series = data::augment(records, calendar);

    std::ostringstream csv;
    data::write_augmented_csv(csv, series);
    write_text(o.out, csv.str());

    std::size_t holidays = 0;
    std::size_t gatherings = 0;
    for (const auto& r : series) {
      holidays += std::size_t(r.d_type);
      gatherings += std::size_t(r.gathering);
    }
    out << "rows: " << series.size() << "\nholidays: " << holidays << "\ngathering days: " << gatherings << '\n';

    nas::RunManifest m;
    m.command = "prepare";
    m.dataset_hash = nas::dataset_hash(series);
    m.config_hash = sha256_hex(o.country + "\n" + o.cumulative_column);
    m.started_at = started;
    m.finished_at = nas::utc_timestamp();
    m.outputs = {o.out};
    auto manifest = o.out;
    manifest += ".manifest.json";
    nas::write_manifest(manifest, m);
    return int(exit_ok);
  });
}

int cmd_search(const SearchOptions& o, std::ostream& out, std::ostream& err)
{
  return guarded(err, [&] {
    const auto started = nas::utc_timestamp();
    auto config = load_nas_config(o.config);
    if (o.seed)
      config.set_seed(*o.seed);
    if (o.features)
      config.feature_mode = *o.features;
    if (o.threads)
      config.bba.threads = *o.threads;
    config.validate();
    const auto series = load_series(o.data);

    nas::RunOptions run;
    run.run_dir = o.out;
    run.stop_after_iteration = o.stop_after;
    const auto result = nas::run_search(config, series, run);

    out << "best genome: " << result.best_genome.to_string() << '\n'
        << "best spec:   " << summary(result.best_spec) << '\n'
        << "best mse:    " << format_real(result.best_fitness) << " (rmse " << format_real(result.best_rmse())
        << ")\n"
        << "trainings:   " << result.evaluations << ", cache hit rate " << format_real(result.cache_hit_rate())
        << '\n';
    if (!result.completed)
      out << "stopped after iteration " << result.history.back().iteration << " of " << config.bba.iterations
          << "; rerun to resume\n";

    std::vector<fs::path> outputs{o.out / "config.json",
                                  o.out / "history.csv",
                                  o.out / "best_genome.txt",
                                  o.out / "best_spec.json",
                                  o.out / "checkpoints" / "search_state.json"};
    int code = exit_ok;
    if (o.retrain && result.completed) {
      const auto model = nas::retrain_best(result, series, config, config.retrain_epochs, std::nullopt, o.out);
      outputs.push_back(o.out / "losses" / "best_model.csv");
      if (model.diverged_epoch) {
        err << "retraining diverged at epoch " << *model.diverged_epoch << "; partial loss history kept\n";
        code = exit_runtime;
      } else {
        outputs.push_back(o.out / "checkpoints" / "best_model.ckpt");
        out << "retrained " << config.retrain_epochs << " epochs: train rmse "
            << format_real(model.metrics.final_train_rmse) << ", validation rmse "
            << format_real(model.metrics.validation_rmse) << '\n';
      }
    }

    nas::RunManifest m;
    m.command = "search";
    m.config_hash = result.config_hash;
    m.dataset_hash = result.dataset_hash;
    m.seed = result.seed;
    m.started_at = started;
    m.finished_at = nas::utc_timestamp();
    m.outputs = outputs;
    nas::write_manifest(o.out / "manifest.json", m);
    return code;
  });
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err)
{
  return guarded(err, [&] {
    const auto started = nas::utc_timestamp();
    if (o.seeds.empty())
      throw UsageError("--seeds needs at least one seed");
    auto config = load_nas_config(o.config);
    if (o.features)
      config.feature_mode = *o.features;
    const auto spec = load_spec(o.spec, o.name);
    spec.validate();
    const auto series = load_series(o.data);

    std::vector<fs::path> outputs;
    std::vector<double> train_rmse;
    std::vector<double> val_rmse;
    std::ostringstream summary_csv;
    summary_csv << "seed,train_rmse,validation_rmse,status\n";
    bool diverged = false;
    for (auto seed : o.seeds) {
      const auto model = nas::train_spec(spec, series, config, o.epochs, seed);
      const auto stem = "seed_" + std::to_string(seed);
      std::ostringstream losses;
      neuro::write_loss_csv(losses, model.metrics);
      const auto loss_path = o.out / "losses" / (stem + ".csv");
      write_text(loss_path, losses.str());
      outputs.push_back(loss_path);
      if (model.diverged_epoch) {
        diverged = true;
        err << "seed " << seed << " diverged at epoch " << *model.diverged_epoch << '\n';
        summary_csv << seed << ",,,diverged at epoch " << *model.diverged_epoch << '\n';
        continue;
      }
      const auto ckpt_path = o.out / "checkpoints" / (stem + ".ckpt");
      neuro::save_checkpoint(ckpt_path, model.checkpoint(config.feature_mode));
      outputs.push_back(ckpt_path);
      train_rmse.push_back(model.metrics.final_train_rmse);
      val_rmse.push_back(model.metrics.validation_rmse);
      summary_csv << seed << ',' << format_real(model.metrics.final_train_rmse) << ','
                  << format_real(model.metrics.validation_rmse) << ",ok\n";
      out << "seed " << seed << ": train rmse " << format_real(model.metrics.final_train_rmse)
          << ", validation rmse " << format_real(model.metrics.validation_rmse) << '\n';
    }
    write_text(o.out / "summary.csv", summary_csv.str());
    outputs.push_back(o.out / "summary.csv");

    auto mean = [](const std::vector<double>& xs) {
      double s = 0.0;
      for (double x : xs)
        s += x;
      return xs.empty() ? std::nan("") : s / double(xs.size());
    };
    out << "mean train rmse " << format_real(mean(train_rmse)) << ", mean validation rmse "
        << format_real(mean(val_rmse)) << " over " << train_rmse.size() << " run(s)\n";

    nas::RunManifest m;
    m.command = "train";
    m.config_hash = nas::config_hash(config);
    m.dataset_hash = nas::dataset_hash(series);
    m.seed = o.seeds.front();
    m.started_at = started;
    m.finished_at = nas::utc_timestamp();
    m.outputs = outputs;
    nas::write_manifest(o.out / "manifest.json", m);
    return int(diverged ? exit_runtime : exit_ok);
  });
}

int cmd_forecast(const ForecastOptions& o, std::ostream& out, std::ostream& err)
{
  return guarded(err, [&] {
    const auto started = nas::utc_timestamp();
    if (o.horizon != 1)
      throw UsageError("only --horizon 1 (next-day) forecasts are supported");
    if (o.windows < 1)
      throw UsageError("--windows must be at least 1");
    const auto ckpt = neuro::load_checkpoint(o.checkpoint);
    if (!ckpt.scaler || !ckpt.feature_mode)
      throw UsageError("checkpoint " + o.checkpoint.string() + " carries no scaler or feature mode");
    const auto series = load_series(o.data);
    const auto matrix = data::feature_matrix(series, *ckpt.feature_mode);

    const auto t = ckpt.network.timesteps();
    if (matrix.cols != ckpt.network.feature_count())
      throw data::DataError(data::DataError::Kind::invalid,
                            "feature count mismatch: checkpoint expects f=" +
                              std::to_string(ckpt.network.feature_count()) + ", data provides f=" +
                              std::to_string(matrix.cols));
    if (ckpt.scaler->feature_count() != matrix.cols)
      throw data::DataError(data::DataError::Kind::invalid,
                            "scaler feature count mismatch: scaler has " + std::to_string(ckpt.scaler->feature_count()) +
                              ", data provides f=" + std::to_string(matrix.cols));
    if (matrix.rows < t + o.windows - 1)
      throw data::DataError(data::DataError::Kind::invalid,
                            "timesteps mismatch: checkpoint needs t=" + std::to_string(t) + " rows per window (" +
                              std::to_string(t + o.windows - 1) + " for " + std::to_string(o.windows) +
                              " window(s)), data has " + std::to_string(matrix.rows));

    const auto windows = ckpt.scaler->apply(data::trailing_windows(matrix, t, o.windows));
    const auto yhat = neuro::predict(ckpt.network, windows);

    std::ostringstream csv;
    csv << "window_end_index,predicted_index,predicted_cases\n";
    for (std::size_t i = 0; i < yhat.size(); ++i) {
      const auto end_pos = windows.window_start[i] + t - 1;
      const auto index = series[end_pos].index;
      csv << index << ',' << index + 1 << ',' << format_real(ckpt.scaler->inverse_target(yhat[i])) << '\n';
    }
    out << csv.str();
    if (o.out) {
      write_text(*o.out, csv.str());
      nas::RunManifest m;
      m.command = "forecast";
      m.config_hash = sha256_file(o.checkpoint);
      m.dataset_hash = nas::dataset_hash(series);
      m.started_at = started;
      m.finished_at = nas::utc_timestamp();
      m.outputs = {*o.out};
      auto manifest = *o.out;
      manifest += ".manifest.json";
      nas::write_manifest(manifest, m);
    }
    return int(exit_ok);
  });
}

int cmd_compare(const CompareOptions& o, std::ostream& out, std::ostream& err)
{
  return guarded(err, [&] {
    const auto started = nas::utc_timestamp();
    auto config = load_nas_config(o.config);
    if (o.features)
      config.feature_mode = *o.features;
    if (o.repetitions)
      config.repetitions = *o.repetitions;
    config.validate();
    std::istringstream spec_text(read_text(o.specs, "spec list"));
    const auto specs = read_spec_list(spec_text);
    if (specs.empty())
      throw UsageError("spec list " + o.specs.string() + " is empty");
    const auto series = load_series(o.data);

    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < config.repetitions; ++i)
      seeds.push_back(o.seed + i);
    const auto epochs = o.epochs.value_or(config.train.epochs);
    const auto rows = nas::compare_architectures(specs, series, config, epochs, seeds);

    std::ostringstream csv;
    nas::write_comparison_csv(csv, rows);
    write_text(o.out / "comparison.csv", csv.str());
    out << csv.str();

    nas::RunManifest m;
    m.command = "compare";
    m.config_hash = nas::config_hash(config);
    m.dataset_hash = nas::dataset_hash(series);
    m.seed = o.seed;
    m.started_at = started;
    m.finished_at = nas::utc_timestamp();
    m.outputs = {o.out / "comparison.csv"};
    nas::write_manifest(o.out / "manifest.json", m);
    return int(exit_ok);
  });
}

namespace {

std::optional<data::FeatureMode> feature_flag(const std::string& text)
{
  if (text.empty())
    return std::nullopt;
  return data::parse_feature_mode(text);
}

template <class T>
std::optional<T> if_set(const CLI::Option* opt, const T& value)
{
  return opt->count() ? std::optional<T>(value) : std::nullopt;
}

} // namespace

int run(int argc, char** argv)
{
  CLI::App app{"Neural architecture search for LSTM case forecasters with the Binary Bat Algorithm"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only warnings and errors");

  PrepareOptions prep;
  auto* p = app.add_subcommand("prepare", "Build the augmented dataset from an ECDC extract and a holiday list");
  p->add_option("--ecdc", prep.ecdc, "ECDC geographic-distribution CSV")->required();
  p->add_option("--holidays", prep.holidays, "CSV with a 'date' column (YYYY-MM-DD)")->required();
  p->add_option("--country", prep.country, "countriesAndTerritories value to keep")->required();
  p->add_option("--out", prep.out, "Augmented CSV to write")->required();
  p->add_option("--cumulative-column", prep.cumulative_column, "Cumulative-rate column name");

  SearchOptions search;
  std::string search_features;
  std::uint64_t search_seed = 0;
  std::size_t search_threads = 1;
  std::size_t stop_after = 0;
  auto* s = app.add_subcommand("search", "Run the architecture search");
  s->add_option("--data", search.data, "Augmented CSV")->required();
  auto* s_config = s->add_option("--config", "JSON config file");
  s->add_option("--out", search.out, "Run directory")->required();
  s->add_option("--features", search_features, "augmented or original")->check(CLI::IsMember({"augmented", "original"}));
  auto* s_seed = s->add_option("--seed", search_seed, "Overrides the config seed");
  auto* s_threads = s->add_option("--threads", search_threads, "Concurrent fitness evaluations");
  auto* s_stop = s->add_option("--stop-after", stop_after, "Stop after this iteration (state is kept for resuming)");
  s->add_flag("--retrain", search.retrain, "Retrain the best spec for retrain_epochs afterwards");

  TrainOptions train;
  std::string train_features;
  auto* t = app.add_subcommand("train", "Train a given architecture for several seeds");
  t->add_option("--data", train.data, "Augmented CSV")->required();
  t->add_option("--spec", train.spec, "Architecture record or spec list")->required();
  t->add_option("--name", train.name, "Record to use from a spec list");
  t->add_option("--epochs", train.epochs, "Training epochs (0 evaluates the initial model)")->required();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--seeds", train.seeds, "Seed list")->delimiter(',');
  auto* t_config = t->add_option("--config", "JSON config file (training settings)");
  t->add_option("--features", train_features, "augmented or original")->check(CLI::IsMember({"augmented", "original"}));

  ForecastOptions fc;
  std::string fc_out;
  auto* f = app.add_subcommand("forecast", "Next-day forecasts from a trained checkpoint");
  f->add_option("--checkpoint", fc.checkpoint, "Model checkpoint")->required();
  f->add_option("--data", fc.data, "Augmented CSV")->required();
  f->add_option("--horizon", fc.horizon, "Forecast horizon in days (only 1)");
  f->add_option("--windows", fc.windows, "Number of trailing windows to forecast from");
  f->add_option("--out", fc_out, "CSV to write");

  CompareOptions cmp;
  std::string cmp_features;
  std::size_t cmp_epochs = 0;
  std::size_t cmp_reps = 0;
  auto* c = app.add_subcommand("compare", "Train and rank a list of architectures");
  c->add_option("--data", cmp.data, "Augmented CSV")->required();
  c->add_option("--specs", cmp.specs, "Spec list file")->required();
  c->add_option("--out", cmp.out, "Output directory")->required();
  auto* c_config = c->add_option("--config", "JSON config file (training settings)");
  c->add_option("--features", cmp_features, "augmented or original")->check(CLI::IsMember({"augmented", "original"}));
  auto* c_epochs = c->add_option("--epochs", cmp_epochs, "Training epochs (default: fitness_epochs)");
  c->add_option("--seed", cmp.seed, "First seed; repetitions use consecutive seeds");
  auto* c_reps = c->add_option("--repetitions", cmp_reps, "Seeded runs per spec");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? int(exit_ok) : int(exit_usage);
  }

  auto logger = spdlog::get("nasbba");
  if (!logger)
    logger = spdlog::stderr_color_mt("nasbba");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*p)
      return cmd_prepare(prep, std::cout, std::cerr);
    if (*s) {
      if (s_config->count())
        search.config = fs::path(s_config->as<std::string>());
      search.features = feature_flag(search_features);
      search.seed = if_set(s_seed, search_seed);
      search.threads = if_set(s_threads, search_threads);
      search.stop_after = if_set(s_stop, stop_after);
      return cmd_search(search, std::cout, std::cerr);
    }
    if (*t) {
      if (t_config->count())
        train.config = fs::path(t_config->as<std::string>());
      train.features = feature_flag(train_features);
      return cmd_train(train, std::cout, std::cerr);
    }
    if (*f) {
      if (!fc_out.empty())
        fc.out = fs::path(fc_out);
      return cmd_forecast(fc, std::cout, std::cerr);
    }
    if (*c) {
      if (c_config->count())
        cmp.config = fs::path(c_config->as<std::string>());
      cmp.features = feature_flag(cmp_features);
      cmp.epochs = if_set(c_epochs, cmp_epochs);
      cmp.repetitions = if_set(c_reps, cmp_reps);
      return cmd_compare(cmp, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return exit_usage;
  }
  return exit_usage;
}

} // namespace nasbba::cli
