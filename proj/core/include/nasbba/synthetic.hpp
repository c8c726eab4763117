#pragma once

// Synthetic data for tests, benchmarks and the bundled sample files.

#include "nasbba/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nasbba::synthetic {

/// Single-column series offset + amplitude * sin(2 pi i / period).
data::SeriesMatrix sine_series(std::size_t length, double period, double amplitude = 0.5, double offset = 0.5);

struct EpidemicOptions
{
  std::string country = "Iran";
  data::Date start{std::chrono::year{2020}, std::chrono::month{2}, std::chrono::day{20}};
  std::size_t days = 330;
  std::uint64_t seed = 2020;
  /// Population divided by 100k, for the 14-day cumulative rate.
  double population_100k = 840.0;
  /// Weekday treated as the weekly rest day (0 = Sunday ... 6 = Saturday); -1 for none.
  int weekly_rest_day = 5;
  /// Extra public holidays in addition to the weekly rest day.
  std::vector<data::Date> public_holidays;
  /// Multiplicative uplift of daily cases per unit mean gathering over the lag window.
  double gathering_effect = 0.8;
  std::size_t lag_min = 5;
  std::size_t lag_max = 7;
  /// Relative Gaussian noise on daily cases.
  double noise = 0.03;
  /// Waves of the underlying epidemic curve: (peak day, peak level, width in days).
  struct Wave
  {
    double peak_day;
    double level;
    double width;
  };
  std::vector<Wave> waves{{40.0, 2600.0, 18.0}, {130.0, 2900.0, 30.0}, {265.0, 11000.0, 35.0}};
  double baseline = 300.0;
};

/// Approximate 2020 Iranian public holidays used for the bundled sample.
std::vector<data::Date> iran_public_holidays_2020();

/// Options for the Iran-like sample: Friday rest day plus public holidays.
EpidemicOptions iran_like_options();

/// A 300-day seasonal series with weekly rest days and a few irregular holidays.
EpidemicOptions seasonal_options(std::uint64_t seed, std::size_t days = 300);

struct Epidemic
{
  std::vector<data::RawRecord> records;
  data::HolidayCalendar holidays;
};

Epidemic synthesize(const EpidemicOptions& options);

/// Augmented records for `options` (synthesize + augment).
std::vector<data::AugmentedRecord> augmented_series(const EpidemicOptions& options);

/// Writes ECDC-layout CSV (dateRep,day,month,year,cases,deaths,countriesAndTerritories,
/// geoId,countryterritoryCode,popData2019,continentExp,Cumulative_number_for_14_days_of_COVID-19_cases_per_100000).
void write_ecdc_csv(std::ostream& out, const std::vector<data::RawRecord>& records);
void write_holiday_csv(std::ostream& out, const data::HolidayCalendar& holidays);

} // namespace nasbba::synthetic
