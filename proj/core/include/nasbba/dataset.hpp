#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nasbba::data {

using Date = std::chrono::year_month_day;

std::string format_iso(Date d);
/// Parses YYYY-MM-DD. Throws std::invalid_argument.
Date parse_iso_date(std::string_view text);
/// Parses DD/MM/YYYY. Throws std::invalid_argument.
Date parse_dmy_date(std::string_view text);

class DataError : public std::runtime_error
{
public:
  enum class Kind
  {
    parse,
    schema,
    empty_country,
    non_contiguous,
    invalid,
  };

  DataError(Kind kind, const std::string& message, std::optional<std::size_t> line = std::nullopt);

  Kind kind() const noexcept { return kind_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

private:
  Kind kind_;
  std::optional<std::size_t> line_;
};

struct RawRecord
{
  Date date;
  int day = 0;
  int month = 0;
  int year = 0;
  std::int64_t cases = 0;
  std::int64_t deaths = 0;
  std::string country;
  std::optional<double> cumulative_number;

  bool operator==(const RawRecord&) const = default;
};

struct IngestOptions
{
  std::string country;
  /// Cumulative-rate column. Empty selects the first column whose name starts with "Cumulative_number".
  std::string cumulative_column;
};

/// Reads an ECDC geographic-distribution CSV, keeps rows of one country, sorts
/// them by date and drops exact duplicate rows.
std::vector<RawRecord> ingest(std::istream& csv, const IngestOptions& options);
std::vector<RawRecord> ingest_file(const std::filesystem::path& path, const IngestOptions& options);

struct HolidayCalendar
{
  std::set<std::chrono::sys_days> dates;

  bool contains(Date d) const { return dates.count(std::chrono::sys_days(d)) != 0; }
};

/// Reads a CSV with a `date` column of ISO-8601 dates.
HolidayCalendar read_holidays(std::istream& csv);
HolidayCalendar read_holidays_file(const std::filesystem::path& path);

struct AugmentedRecord
{
  std::int64_t index = 0;
  std::int64_t cases = 0;
  double c_num = 0.0;
  int d_type = 0;
  int gathering = 0;

  bool operator==(const AugmentedRecord&) const = default;
};

/// d_type = holiday; gathering = holiday, or a workday whose previous and next
/// calendar days are both holidays. Dates must be consecutive.
/// Missing cumulative values become 0.
std::vector<AugmentedRecord> augment(const std::vector<RawRecord>& records,
                                     const HolidayCalendar& calendar,
                                     std::int64_t index_offset = 0);

/// Header: index,cases,c_num,d_type,gathering
void write_augmented_csv(std::ostream& out, const std::vector<AugmentedRecord>& records);
std::vector<AugmentedRecord> read_augmented_csv(std::istream& in);
std::vector<AugmentedRecord> read_augmented_file(const std::filesystem::path& path);

enum class FeatureMode
{
  augmented, ///< cases, c_num, d_type, gathering
  original,  ///< cases, c_num
};

std::string_view to_string(FeatureMode mode);
FeatureMode parse_feature_mode(std::string_view text);
std::size_t feature_count(FeatureMode mode);

/// Row-major N x f matrix of daily features.
struct SeriesMatrix
{
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

SeriesMatrix feature_matrix(const std::vector<AugmentedRecord>& records, FeatureMode mode);

/// Supervised windows: inputs are samples x timesteps x features (row-major),
/// target of window i is the value of the target column at position start+t.
struct FramedDataset
{
  std::size_t samples = 0;
  std::size_t timesteps = 0;
  std::size_t features = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
  /// Series position of each window's first day.
  std::vector<std::size_t> window_start;

  double input(std::size_t s, std::size_t t, std::size_t f) const
  {
    return inputs[(s * timesteps + t) * features + f];
  }
  bool empty() const noexcept { return samples == 0; }
};

/// Requires series.rows > timesteps >= 1. Produces n = rows - timesteps samples.
FramedDataset frame(const SeriesMatrix& series, std::size_t timesteps, std::size_t target_column = 0);

/// Windows over the whole series with no successor day (used for forecasting):
/// the last `count` windows ending at the final row.
FramedDataset trailing_windows(const SeriesMatrix& series, std::size_t timesteps, std::size_t count);

/// Chronological split: first floor(ratio * n) samples train, the rest test.
std::pair<FramedDataset, FramedDataset> split(const FramedDataset& framed, double ratio);

/// Per-feature min-max scaler with a separate target channel.
class Scaler
{
public:
  Scaler() = default;
  Scaler(std::vector<double> feature_min, std::vector<double> feature_max, double target_min, double target_max);

  /// Fits on every value of the given (training) dataset.
  static Scaler fit(const FramedDataset& train);

  std::size_t feature_count() const noexcept { return feature_min_.size(); }
  double transform_feature(std::size_t f, double x) const;
  double transform_target(double y) const;
  double inverse_target(double y) const;

  /// Throws std::invalid_argument on a feature-count mismatch. Values outside
  /// the fitted range are not clipped.
  FramedDataset apply(const FramedDataset& data) const;

  const std::vector<double>& feature_min() const noexcept { return feature_min_; }
  const std::vector<double>& feature_max() const noexcept { return feature_max_; }
  double target_min() const noexcept { return target_min_; }
  double target_max() const noexcept { return target_max_; }

  bool operator==(const Scaler&) const = default;

private:
  std::vector<double> feature_min_;
  std::vector<double> feature_max_;
  double target_min_ = 0.0;
  double target_max_ = 1.0;
};

enum class SplitOrder
{
  frame_then_split,
  split_then_frame,
};

struct PreparedData
{
  FramedDataset train;
  FramedDataset test;
  Scaler scaler;
};

/// frame -> split -> fit scaler on train -> scale both parts.
/// With split_then_frame the series is cut at floor(ratio * N) first and each part is framed separately.
PreparedData prepare(const SeriesMatrix& series,
                     std::size_t timesteps,
                     double train_ratio = 0.8,
                     SplitOrder order = SplitOrder::frame_then_split);

} // namespace nasbba::data
