#include "nasbba/dataset.hpp"

#include "detail/csv.hpp"
#include "detail/numbers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

namespace nasbba::data {

using detail::parse_number;

namespace {

Date make_date(int y, unsigned m, unsigned d, std::string_view original)
{
  const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok())
    throw std::invalid_argument("invalid calendar date '" + std::string(original) + "'");
  return date;
}

std::vector<std::string_view> split_on(std::string_view s, char sep)
{
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

std::ifstream open_input(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw DataError(DataError::Kind::parse, "cannot open " + path.string());
  return in;
}

} // namespace

std::string format_iso(Date d)
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()), unsigned(d.month()), unsigned(d.day()));
  return buf;
}

Date parse_iso_date(std::string_view text)
{
  const auto t = detail::trim(text);
  const auto parts = split_on(t, '-');
  if (parts.size() != 3 || parts[0].size() != 4)
    throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(text) + "'");
  const auto y = parse_number<int>(parts[0]);
  const auto m = parse_number<unsigned>(parts[1]);
  const auto d = parse_number<unsigned>(parts[2]);
  if (!y || !m || !d)
    throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(text) + "'");
  return make_date(*y, *m, *d, text);
}

Date parse_dmy_date(std::string_view text)
{
  const auto t = detail::trim(text);
  const auto parts = split_on(t, '/');
  if (parts.size() != 3)
    throw std::invalid_argument("expected DD/MM/YYYY, got '" + std::string(text) + "'");
  const auto d = parse_number<unsigned>(parts[0]);
  const auto m = parse_number<unsigned>(parts[1]);
  const auto y = parse_number<int>(parts[2]);
  if (!y || !m || !d)
    throw std::invalid_argument("expected DD/MM/YYYY, got '" + std::string(text) + "'");
  return make_date(*y, *m, *d, text);
}

DataError::DataError(Kind kind, const std::string& message, std::optional<std::size_t> line)
  : std::runtime_error(line ? "line " + std::to_string(*line) + ": " + message : message)
  , kind_(kind)
  , line_(line)
{
}

std::vector<RawRecord> ingest(std::istream& csv, const IngestOptions& options)
{
  detail::CsvReader reader(csv);
  const auto header = reader.next();
  if (!header)
    throw DataError(DataError::Kind::schema, "ECDC file is empty");

  auto require = [&](std::string_view name) {
    if (auto idx = detail::find_column(*header, name))
      return *idx;
    throw DataError(DataError::Kind::schema, "missing column '" + std::string(name) + "'", reader.line());
  };
  const auto c_date = require("dateRep");
  const auto c_day = require("day");
  const auto c_month = require("month");
  const auto c_year = require("year");
  const auto c_cases = require("cases");
  const auto c_deaths = require("deaths");
  const auto c_country = require("countriesAndTerritories");
  std::size_t c_cum = 0;
  if (!options.cumulative_column.empty()) {
    c_cum = require(options.cumulative_column);
  } else {
    auto it = std::find_if(header->begin(), header->end(), [](const std::string& h) {
      return h.rfind("Cumulative_number", 0) == 0;
    });
    if (it == header->end())
      throw DataError(DataError::Kind::schema, "missing column 'Cumulative_number...'", reader.line());
    c_cum = static_cast<std::size_t>(it - header->begin());
  }
  const std::size_t needed =
    1 + std::max({c_date, c_day, c_month, c_year, c_cases, c_deaths, c_country, c_cum});

  std::map<std::chrono::sys_days, std::pair<RawRecord, std::size_t>> by_date;
  while (auto row = reader.next()) {
    const auto line = reader.line();
    if (row->size() < needed)
      throw DataError(DataError::Kind::parse,
                      "expected at least " + std::to_string(needed) + " fields, found " +
                        std::to_string(row->size()),
                      line);
    const auto& r = *row;
    if (r[c_country] != options.country)
      continue;

    RawRecord rec;
    try {
      rec.date = parse_dmy_date(r[c_date]);
    } catch (const std::invalid_argument& e) {
      throw DataError(DataError::Kind::parse, e.what(), line);
    }
    const auto day = parse_number<int>(r[c_day]);
    const auto month = parse_number<int>(r[c_month]);
    const auto year = parse_number<int>(r[c_year]);
    const auto cases = parse_number<std::int64_t>(r[c_cases]);
    const auto deaths = parse_number<std::int64_t>(r[c_deaths]);
    if (!day || !month || !year)
      throw DataError(DataError::Kind::parse, "day/month/year must be integers", line);
    if (!cases || *cases < 0)
      throw DataError(DataError::Kind::parse, "cases must be a non-negative integer, got '" + r[c_cases] + "'", line);
    if (!deaths || *deaths < 0)
      throw DataError(DataError::Kind::parse, "deaths must be a non-negative integer, got '" + r[c_deaths] + "'", line);
    rec.day = *day;
    rec.month = *month;
    rec.year = *year;
    if (int(rec.date.year()) != rec.year || unsigned(rec.date.month()) != unsigned(rec.month) ||
        unsigned(rec.date.day()) != unsigned(rec.day))
      throw DataError(DataError::Kind::parse, "dateRep disagrees with day/month/year columns", line);
    rec.cases = *cases;
    rec.deaths = *deaths;
    rec.country = r[c_country];
    if (!detail::trim(r[c_cum]).empty()) {
      const auto cum = parse_number<double>(r[c_cum]);
      if (!cum)
        throw DataError(DataError::Kind::parse, "cumulative value is not a number: '" + r[c_cum] + "'", line);
      rec.cumulative_number = *cum;
    }

    const auto key = std::chrono::sys_days(rec.date);
    auto [it, inserted] = by_date.try_emplace(key, rec, line);
    if (!inserted && !(it->second.first == rec))
      throw DataError(DataError::Kind::parse,
                      "conflicting duplicate row for " + format_iso(rec.date) + " (first seen on line " +
                        std::to_string(it->second.second) + ")",
                      line);
  }

  if (by_date.empty())
    throw DataError(DataError::Kind::empty_country, "no data for country '" + options.country + "'");

  std::vector<RawRecord> out;
  out.reserve(by_date.size());
  for (auto& [_, entry] : by_date)
    out.push_back(std::move(entry.first));
  return out;
}

std::vector<RawRecord> ingest_file(const std::filesystem::path& path, const IngestOptions& options)
{
  auto in = open_input(path);
  return ingest(in, options);
}

HolidayCalendar read_holidays(std::istream& csv)
{
  detail::CsvReader reader(csv);
  HolidayCalendar cal;
  const auto header = reader.next();
  if (!header)
    return cal;
  const auto c_date = detail::find_column(*header, "date");
  if (!c_date)
    throw DataError(DataError::Kind::schema, "holiday file needs a 'date' column", reader.line());
  while (auto row = reader.next()) {
    if (row->size() <= *c_date)
      throw DataError(DataError::Kind::parse, "missing date field", reader.line());
    try {
      cal.dates.insert(std::chrono::sys_days(parse_iso_date((*row)[*c_date])));
    } catch (const std::invalid_argument& e) {
      throw DataError(DataError::Kind::parse, e.what(), reader.line());
    }
  }
  return cal;
}

HolidayCalendar read_holidays_file(const std::filesystem::path& path)
{
  auto in = open_input(path);
  return read_holidays(in);
}

std::vector<AugmentedRecord> augment(const std::vector<RawRecord>& records,
                                     const HolidayCalendar& calendar,
                                     std::int64_t index_offset)
{
  using std::chrono::days;
  using std::chrono::sys_days;
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (sys_days(records[i].date) != sys_days(records[i - 1].date) + days{1})
      throw DataError(DataError::Kind::non_contiguous,
                      "dates are not consecutive between " + format_iso(records[i - 1].date) + " and " +
                        format_iso(records[i].date));
  }

  std::vector<AugmentedRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const sys_days day(r.date);
    AugmentedRecord a;
    a.index = index_offset + static_cast<std::int64_t>(i);
    a.cases = r.cases;
    a.c_num = r.cumulative_number.value_or(0.0);
    a.d_type = calendar.dates.count(day) ? 1 : 0;
    const bool bridged = calendar.dates.count(day - days{1}) && calendar.dates.count(day + days{1});
    a.gathering = (a.d_type == 1 || bridged) ? 1 : 0;
    out.push_back(a);
  }
  return out;
}

void write_augmented_csv(std::ostream& out, const std::vector<AugmentedRecord>& records)
{
  out << "index,cases,c_num,d_type,gathering\n";
  for (const auto& r : records)
    out << r.index << ',' << r.cases << ',' << detail::format_double(r.c_num) << ',' << r.d_type << ','
        << r.gathering << '\n';
}

std::vector<AugmentedRecord> read_augmented_csv(std::istream& in)
{
  detail::CsvReader reader(in);
  const auto header = reader.next();
  const std::vector<std::string> expected{"index", "cases", "c_num", "d_type", "gathering"};
  if (!header || *header != expected)
    throw DataError(DataError::Kind::schema,
                    "augmented CSV header must be index,cases,c_num,d_type,gathering",
                    reader.line());
  std::vector<AugmentedRecord> out;
  while (auto row = reader.next()) {
    const auto line = reader.line();
    if (row->size() != 5)
      throw DataError(DataError::Kind::parse, "expected 5 fields", line);
    const auto idx = parse_number<std::int64_t>((*row)[0]);
    const auto cases = parse_number<std::int64_t>((*row)[1]);
    const auto cnum = parse_number<double>((*row)[2]);
    const auto dtype = parse_number<int>((*row)[3]);
    const auto gath = parse_number<int>((*row)[4]);
    if (!idx || !cases || !cnum || !dtype || !gath)
      throw DataError(DataError::Kind::parse, "non-numeric field", line);
    if ((*dtype != 0 && *dtype != 1) || (*gath != 0 && *gath != 1))
      throw DataError(DataError::Kind::parse, "d_type and gathering must be 0 or 1", line);
    if (*dtype > *gath)
      throw DataError(DataError::Kind::invalid, "holiday without gathering flag", line);
    if (!out.empty() && *idx != out.back().index + 1)
      throw DataError(DataError::Kind::non_contiguous, "index is not consecutive", line);
    out.push_back({*idx, *cases, *cnum, *dtype, *gath});
  }
  if (out.empty())
    throw DataError(DataError::Kind::empty_country, "augmented CSV has no rows");
  return out;
}

std::vector<AugmentedRecord> read_augmented_file(const std::filesystem::path& path)
{
  auto in = open_input(path);
  return read_augmented_csv(in);
}

std::string_view to_string(FeatureMode mode)
{
  return mode == FeatureMode::augmented ? "augmented" : "original";
}

FeatureMode parse_feature_mode(std::string_view text)
{
  if (text == "augmented")
    return FeatureMode::augmented;
  if (text == "original")
    return FeatureMode::original;
  throw std::invalid_argument("feature mode must be 'augmented' or 'original', got '" + std::string(text) + "'");
}

std::size_t feature_count(FeatureMode mode)
{
  return mode == FeatureMode::augmented ? 4 : 2;
}

SeriesMatrix feature_matrix(const std::vector<AugmentedRecord>& records, FeatureMode mode)
{
  SeriesMatrix m;
  m.rows = records.size();
  m.cols = feature_count(mode);
  m.values.reserve(m.rows * m.cols);
  for (const auto& r : records) {
    m.values.push_back(double(r.cases));
    m.values.push_back(r.c_num);
    if (mode == FeatureMode::augmented) {
      m.values.push_back(double(r.d_type));
      m.values.push_back(double(r.gathering));
    }
  }
  return m;
}

namespace {

FramedDataset windows(const SeriesMatrix& series,
                      std::size_t timesteps,
                      std::size_t first_start,
                      std::size_t count,
                      std::size_t target_column)
{
  FramedDataset out;
  out.samples = count;
  out.timesteps = timesteps;
  out.features = series.cols;
  out.inputs.reserve(count * timesteps * series.cols);
  out.targets.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t start = first_start + s;
    for (std::size_t t = 0; t < timesteps; ++t)
      for (std::size_t f = 0; f < series.cols; ++f)
        out.inputs.push_back(series(start + t, f));
    const std::size_t next = start + timesteps;
    out.targets.push_back(next < series.rows ? series(next, target_column)
                                             : std::numeric_limits<double>::quiet_NaN());
    out.window_start.push_back(start);
  }
  return out;
}

std::size_t train_count(std::size_t n, double ratio)
{
  return static_cast<std::size_t>(std::floor(ratio * double(n) + 1e-9));
}

} // namespace

FramedDataset frame(const SeriesMatrix& series, std::size_t timesteps, std::size_t target_column)
{
  if (timesteps < 1)
    throw std::invalid_argument("frame: timesteps must be at least 1");
  if (timesteps >= series.rows)
    throw std::invalid_argument("frame: timesteps (" + std::to_string(timesteps) +
                                ") must be smaller than the series length (" + std::to_string(series.rows) + ")");
  if (target_column >= series.cols)
    throw std::invalid_argument("frame: target column out of range");
  return windows(series, timesteps, 0, series.rows - timesteps, target_column);
}

FramedDataset trailing_windows(const SeriesMatrix& series, std::size_t timesteps, std::size_t count)
{
  if (timesteps < 1 || count < 1)
    throw std::invalid_argument("trailing_windows: timesteps and count must be positive");
  if (timesteps + count - 1 > series.rows)
    throw std::invalid_argument("trailing_windows: series has " + std::to_string(series.rows) +
                                " rows, need " + std::to_string(timesteps + count - 1));
  return windows(series, timesteps, series.rows - timesteps - (count - 1), count, 0);
}

std::pair<FramedDataset, FramedDataset> split(const FramedDataset& framed, double ratio)
{
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("split: ratio must lie in (0, 1)");
  const std::size_t n_train = train_count(framed.samples, ratio);
  if (n_train == 0 || n_train == framed.samples)
    throw std::invalid_argument("split: ratio " + std::to_string(ratio) + " over " +
                                std::to_string(framed.samples) + " samples leaves one side empty");

  auto part = [&](std::size_t begin, std::size_t end) {
    FramedDataset p;
    p.samples = end - begin;
    p.timesteps = framed.timesteps;
    p.features = framed.features;
    const std::size_t stride = framed.timesteps * framed.features;
    p.inputs.assign(framed.inputs.begin() + std::ptrdiff_t(begin * stride),
                    framed.inputs.begin() + std::ptrdiff_t(end * stride));
    p.targets.assign(framed.targets.begin() + std::ptrdiff_t(begin), framed.targets.begin() + std::ptrdiff_t(end));
    p.window_start.assign(framed.window_start.begin() + std::ptrdiff_t(begin),
                          framed.window_start.begin() + std::ptrdiff_t(end));
    return p;
  };
  return {part(0, n_train), part(n_train, framed.samples)};
}

Scaler::Scaler(std::vector<double> feature_min, std::vector<double> feature_max, double target_min, double target_max)
  : feature_min_(std::move(feature_min))
  , feature_max_(std::move(feature_max))
  , target_min_(target_min)
  , target_max_(target_max)
{
  if (feature_min_.size() != feature_max_.size())
    throw std::invalid_argument("Scaler: min/max size mismatch");
  for (std::size_t f = 0; f < feature_min_.size(); ++f)
    if (feature_max_[f] < feature_min_[f])
      throw std::invalid_argument("Scaler: max below min");
  if (target_max_ < target_min_)
    throw std::invalid_argument("Scaler: target max below min");
}

Scaler Scaler::fit(const FramedDataset& train)
{
  if (train.empty())
    throw std::invalid_argument("Scaler::fit: empty dataset");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lo(train.features, inf), hi(train.features, -inf);
  for (std::size_t i = 0; i < train.inputs.size(); ++i) {
    const auto f = i % train.features;
    lo[f] = std::min(lo[f], train.inputs[i]);
    hi[f] = std::max(hi[f], train.inputs[i]);
  }
  const auto [tlo, thi] = std::minmax_element(train.targets.begin(), train.targets.end());
  return Scaler(std::move(lo), std::move(hi), *tlo, *thi);
}

namespace {

double scale(double x, double lo, double hi)
{
  return hi > lo ? (x - lo) / (hi - lo) : 0.0;
}

} // namespace

double Scaler::transform_feature(std::size_t f, double x) const
{
  return scale(x, feature_min_.at(f), feature_max_.at(f));
}

double Scaler::transform_target(double y) const
{
  return scale(y, target_min_, target_max_);
}

double Scaler::inverse_target(double y) const
{
  return target_max_ > target_min_ ? target_min_ + y * (target_max_ - target_min_) : target_min_;
}

FramedDataset Scaler::apply(const FramedDataset& data) const
{
  if (data.features != feature_min_.size())
    throw std::invalid_argument("Scaler::apply: dataset has " + std::to_string(data.features) +
                                " features, scaler was fitted on " + std::to_string(feature_min_.size()));
  FramedDataset out = data;
  for (std::size_t i = 0; i < out.inputs.size(); ++i)
    out.inputs[i] = transform_feature(i % data.features, out.inputs[i]);
  for (auto& y : out.targets)
    y = transform_target(y);
  return out;
}

PreparedData prepare(const SeriesMatrix& series, std::size_t timesteps, double train_ratio, SplitOrder order)
{
  std::pair<FramedDataset, FramedDataset> parts;
  if (order == SplitOrder::frame_then_split) {
    parts = split(frame(series, timesteps), train_ratio);
  } else {
    if (!(train_ratio > 0.0 && train_ratio < 1.0))
      throw std::invalid_argument("prepare: ratio must lie in (0, 1)");
    const std::size_t cut = train_count(series.rows, train_ratio);
    auto rows = [&](std::size_t begin, std::size_t end) {
      SeriesMatrix m;
      m.rows = end - begin;
      m.cols = series.cols;
      m.values.assign(series.values.begin() + std::ptrdiff_t(begin * series.cols),
                      series.values.begin() + std::ptrdiff_t(end * series.cols));
      return m;
    };
    parts.first = frame(rows(0, cut), timesteps);
    parts.second = frame(rows(cut, series.rows), timesteps);
    for (auto& s : parts.second.window_start)
      s += cut;
  }
  PreparedData out;
  out.scaler = Scaler::fit(parts.first);
  out.train = out.scaler.apply(parts.first);
  out.test = out.scaler.apply(parts.second);
  return out;
}

} // namespace nasbba::data
