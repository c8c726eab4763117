#include "nasbba/synthetic.hpp"

#include "detail/numbers.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

namespace nasbba::synthetic {

using namespace std::chrono;

data::SeriesMatrix sine_series(std::size_t length, double period, double amplitude, double offset)
{
  data::SeriesMatrix m;
  m.rows = length;
  m.cols = 1;
  m.values.resize(length);
  for (std::size_t i = 0; i < length; ++i)
    m.values[i] = offset + amplitude * std::sin(2.0 * std::numbers::pi * double(i) / period);
  return m;
}

std::vector<data::Date> iran_public_holidays_2020()
{
  auto d = [](int y, unsigned m, unsigned day) { return data::Date{year{y}, month{m}, std::chrono::day{day}}; };
  return {
    d(2020, 3, 20),  d(2020, 3, 21),  d(2020, 3, 22),  d(2020, 3, 23), // Nowruz
    d(2020, 3, 31),  d(2020, 4, 1),   d(2020, 4, 9),   d(2020, 5, 15),  d(2020, 5, 24),
    d(2020, 5, 25),  d(2020, 6, 3),   d(2020, 6, 4),   d(2020, 6, 16),  d(2020, 8, 1),
    d(2020, 8, 9),   d(2020, 8, 29),  d(2020, 8, 30),  d(2020, 10, 8),  d(2020, 10, 16),
    d(2020, 10, 17), d(2020, 11, 3),  d(2021, 1, 18),
  };
}

EpidemicOptions iran_like_options()
{
  EpidemicOptions o;
  o.public_holidays = iran_public_holidays_2020();
  return o;
}

EpidemicOptions seasonal_options(std::uint64_t seed, std::size_t days)
{
  EpidemicOptions o;
  o.country = "Synthland";
  o.days = days;
  o.seed = seed;
  o.population_100k = 100.0;
  o.weekly_rest_day = 0;
  o.waves = {{60.0, 900.0, 25.0}, {180.0, 1400.0, 30.0}, {270.0, 800.0, 20.0}};
  o.baseline = 250.0;
  std::mt19937_64 rng(seed ^ 0x5eed);
  std::uniform_int_distribution<int> day_pick(0, int(days) - 1);
  for (int k = 0; k < 10; ++k)
    o.public_holidays.push_back(year_month_day(sys_days(o.start) + std::chrono::days{day_pick(rng)}));
  return o;
}

Epidemic synthesize(const EpidemicOptions& o)
{
  Epidemic out;
  const sys_days first(o.start);
  for (const auto& h : o.public_holidays)
    out.holidays.dates.insert(sys_days(h));
  if (o.weekly_rest_day >= 0) {
    for (std::size_t i = 0; i < o.days; ++i) {
      const sys_days day = first + std::chrono::days{i};
      if (int(weekday(day).c_encoding()) == o.weekly_rest_day)
        out.holidays.dates.insert(day);
    }
  }

  // Gathering flags over the calendar, including a margin before the start.
  const std::size_t margin = o.lag_max + 1;
  std::vector<double> gathering(o.days + margin, 0.0);
  for (std::size_t k = 0; k < gathering.size(); ++k) {
    const sys_days day = first + std::chrono::days{std::int64_t(k) - std::int64_t(margin)};
    const bool holiday = out.holidays.dates.count(day) != 0;
    const bool bridged = out.holidays.dates.count(day - std::chrono::days{1}) &&
                         out.holidays.dates.count(day + std::chrono::days{1});
    gathering[k] = (holiday || bridged) ? 1.0 : 0.0;
  }

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::int64_t> cases(o.days);
  for (std::size_t i = 0; i < o.days; ++i) {
    double level = o.baseline;
    for (const auto& w : o.waves) {
      const double z = (double(i) - w.peak_day) / w.width;
      level += w.level * std::exp(-0.5 * z * z);
    }
    double g = 0.0;
    for (std::size_t lag = o.lag_min; lag <= o.lag_max; ++lag)
      g += gathering[i + margin - lag];
    g /= double(o.lag_max - o.lag_min + 1);
    const double value = level * (1.0 + o.gathering_effect * g) * (1.0 + o.noise * gauss(rng));
    cases[i] = std::max<std::int64_t>(0, std::llround(value));
  }

  std::int64_t window = 0;
  for (std::size_t i = 0; i < o.days; ++i) {
    window += cases[i];
    if (i >= 14)
      window -= cases[i - 14];
    data::RawRecord r;
    r.date = year_month_day(first + std::chrono::days{i});
    r.day = int(unsigned(r.date.day()));
    r.month = int(unsigned(r.date.month()));
    r.year = int(r.date.year());
    r.cases = cases[i];
    r.deaths = std::llround(double(cases[i]) * 0.05);
    r.country = o.country;
    if (i >= 13)
      r.cumulative_number = std::round(double(window) / o.population_100k * 1000.0) / 1000.0;
    out.records.push_back(std::move(r));
  }
  return out;
}

std::vector<data::AugmentedRecord> augmented_series(const EpidemicOptions& options)
{
  const auto e = synthesize(options);
  return data::augment(e.records, e.holidays);
}

void write_ecdc_csv(std::ostream& out, const std::vector<data::RawRecord>& records)
{
  out << "dateRep,day,month,year,cases,deaths,countriesAndTerritories,geoId,countryterritoryCode,popData2019,"
         "continentExp,Cumulative_number_for_14_days_of_COVID-19_cases_per_100000\n";
  // ECDC files list the newest day first.
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    const auto& r = *it;
    char date[16];
    std::snprintf(date, sizeof date, "%02d/%02d/%04d", r.day, r.month, r.year);
    out << date << ',' << r.day << ',' << r.month << ',' << r.year << ',' << r.cases << ',' << r.deaths << ','
        << r.country << ",IR,IRN,83992953,Asia,";
    if (r.cumulative_number)
      out << detail::format_double(*r.cumulative_number);
    out << '\n';
  }
}

void write_holiday_csv(std::ostream& out, const data::HolidayCalendar& holidays)
{
  out << "date\n";
  for (const auto& d : holidays.dates)
    out << data::format_iso(year_month_day(d)) << '\n';
}

} // namespace nasbba::synthetic
