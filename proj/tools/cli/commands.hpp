#pragma once

#include "nasbba/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nasbba::cli {

enum ExitCode : int
{
  exit_ok = 0,
  exit_usage = 2,
  exit_data = 3,
  exit_runtime = 4,
};

struct PrepareOptions
{
  std::filesystem::path ecdc;
  std::filesystem::path holidays;
  std::string country;
  std::filesystem::path out;
  std::string cumulative_column;
};

struct SearchOptions
{
  std::filesystem::path data;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<data::FeatureMode> features;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  /// Stop after this iteration with state saved (resume by rerunning).
  std::optional<std::size_t> stop_after;
  /// Retrain the best spec for the configured retrain epochs afterwards.
  bool retrain = false;
};

struct TrainOptions
{
  std::filesystem::path data;
  std::filesystem::path spec;
  /// Selects a record when the spec file holds a list.
  std::string name;
  std::size_t epochs = 0;
  std::filesystem::path out;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::optional<std::filesystem::path> config;
  std::optional<data::FeatureMode> features;
};

struct ForecastOptions
{
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::size_t horizon = 1;
  std::size_t windows = 1;
  std::optional<std::filesystem::path> out;
};

struct CompareOptions
{
  std::filesystem::path data;
  std::filesystem::path specs;
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  std::optional<data::FeatureMode> features;
  std::optional<std::size_t> epochs;
  std::uint64_t seed = 1;
  std::optional<std::size_t> repetitions;
};

// Each command prints its report to `out`, diagnostics to `err`, and returns an ExitCode.
int cmd_prepare(const PrepareOptions& options, std::ostream& out, std::ostream& err);
int cmd_search(const SearchOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int cmd_forecast(const ForecastOptions& options, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareOptions& options, std::ostream& out, std::ostream& err);

/// Parses arguments and dispatches to a command.
int run(int argc, char** argv);

} // namespace nasbba::cli
