#include "nasbba/dataset.hpp"

#include <doctest.h>

#include <sstream>

using namespace nasbba;
using namespace nasbba::data;
using namespace std::chrono;

namespace {

const char* const kHeader =
  "dateRep,day,month,year,cases,deaths,countriesAndTerritories,geoId,countryterritoryCode,popData2019,"
  "continentExp,Cumulative_number_for_14_days_of_COVID-19_cases_per_100000\n";

// Five Iran rows in ECDC's newest-first order, plus rows for another country.
std::string table_one_csv()
{
  return std::string(kHeader) +
         "24/03/2020,24,3,2020,1411,127,Iran,IR,IRN,82913893,Asia,19.162\n"
         "23/03/2020,23,3,2020,1028,129,Iran,IR,IRN,82913893,Asia,18.177\n"
         "22/03/2020,22,3,2020,966,123,Iran,IR,IRN,82913893,Asia,17.834\n"
         "21/03/2020,21,3,2020,1237,146,Iran,IR,IRN,82913893,Asia,17.968\n"
         "20/03/2020,20,3,2020,1046,149,Iran,IR,IRN,82913893,Asia,17.963\n"
         "20/03/2020,20,3,2020,5,0,Iraq,IQ,IRQ,39309783,Asia,0.1\n";
}

Date ymd(int y, unsigned m, unsigned d)
{
  return Date{year{y}, month{m}, day{d}};
}

std::vector<RawRecord> consecutive(Date start, std::vector<std::int64_t> cases)
{
  std::vector<RawRecord> out;
  sys_days d{start};
  for (auto c : cases) {
    RawRecord r;
    r.date = year_month_day{d};
    r.cases = c;
    r.country = "X";
    r.cumulative_number = double(c) / 10.0;
    out.push_back(r);
    d += days{1};
  }
  return out;
}

DataError::Kind kind_of(const auto& fn)
{
  try {
    fn();
  } catch (const DataError& e) {
    return e.kind();
  }
  FAIL("expected DataError");
  return DataError::Kind::invalid;
}

} // namespace

TEST_CASE("date parsing")
{
  CHECK(parse_dmy_date("20/03/2020") == ymd(2020, 3, 20));
  CHECK(parse_iso_date("2020-03-20") == ymd(2020, 3, 20));
  CHECK(format_iso(ymd(2020, 3, 5)) == "2020-03-05");
  CHECK_THROWS(parse_iso_date("2020-02-30"));
  CHECK_THROWS(parse_dmy_date("2020-03-20"));
}

TEST_CASE("ingest keeps one country sorted by date")
{
  std::istringstream in(table_one_csv());
  const auto rows = ingest(in, {.country = "Iran", .cumulative_column = ""});
  REQUIRE(rows.size() == 5);
  CHECK(rows.front().date == ymd(2020, 3, 20));
  CHECK(rows.back().date == ymd(2020, 3, 24));
  const std::vector<std::int64_t> cases{1046, 1237, 966, 1028, 1411};
  const std::vector<std::int64_t> deaths{149, 146, 123, 129, 127};
  const std::vector<double> cum{17.963, 17.968, 17.834, 18.177, 19.162};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(rows[i].cases == cases[i]);
    CHECK(rows[i].deaths == deaths[i]);
    CHECK(rows[i].cumulative_number == cum[i]);
    CHECK(rows[i].country == "Iran");
  }
  for (std::size_t i = 1; i < 5; ++i)
    CHECK(sys_days(rows[i - 1].date) < sys_days(rows[i].date));
}

TEST_CASE("ingest errors")
{
  SUBCASE("unknown country")
  {
    std::istringstream in(table_one_csv());
    CHECK(kind_of([&] { ingest(in, {.country = "Atlantis", .cumulative_column = ""}); }) == DataError::Kind::empty_country);
  }
  SUBCASE("malformed row carries its line number")
  {
    std::istringstream in(std::string(kHeader) + "20/03/2020,20,3,2020,abc,0,Iran,IR,IRN,1,Asia,1\n");
    try {
      ingest(in, {.country = "Iran", .cumulative_column = ""});
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(e.kind() == DataError::Kind::parse);
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("missing columns")
  {
    std::istringstream in("dateRep,cases\n20/03/2020,1\n");
    CHECK(kind_of([&] { ingest(in, {.country = "Iran", .cumulative_column = ""}); }) == DataError::Kind::schema);
  }
  SUBCASE("conflicting duplicate dates")
  {
    std::istringstream in(std::string(kHeader) + "20/03/2020,20,3,2020,5,0,Iran,IR,IRN,1,Asia,1\n"
                                                 "20/03/2020,20,3,2020,6,0,Iran,IR,IRN,1,Asia,1\n");
    CHECK_THROWS_AS(ingest(in, {.country = "Iran", .cumulative_column = ""}), DataError);
  }
}

TEST_CASE("exact duplicates are dropped and missing cumulative values stay absent")
{
  std::istringstream in(std::string(kHeader) + "21/03/2020,21,3,2020,5,0,Iran,IR,IRN,1,Asia,\n"
                                               "20/03/2020,20,3,2020,4,0,Iran,IR,IRN,1,Asia,2.5\n"
                                               "20/03/2020,20,3,2020,4,0,Iran,IR,IRN,1,Asia,2.5\n");
  const auto rows = ingest(in, {.country = "Iran", .cumulative_column = ""});
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[1].cumulative_number.has_value());
  const auto aug = augment(rows, {});
  CHECK(aug[1].c_num == 0.0);
}

TEST_CASE("augment reproduces the holiday and gathering pattern")
{
  // d_type [0,0,1,0,1] -> gathering [0,0,1,1,1]
  const auto rows = consecutive(ymd(2020, 6, 1), {2472, 2449, 2563, 2612, 2596});
  HolidayCalendar cal;
  cal.dates = {sys_days(ymd(2020, 6, 3)), sys_days(ymd(2020, 6, 5))};
  const auto aug = augment(rows, cal, 128);
  REQUIRE(aug.size() == 5);
  const std::vector<int> d_type{0, 0, 1, 0, 1}, gathering{0, 0, 1, 1, 1};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(aug[i].index == std::int64_t(128 + i));
    CHECK(aug[i].cases == rows[i].cases);
    CHECK(aug[i].d_type == d_type[i]);
    CHECK(aug[i].gathering == gathering[i]);
  }
}

TEST_CASE("gathering needs a holiday on both sides")
{
  const auto rows = consecutive(ymd(2020, 6, 1), {1, 1, 1, 1});
  HolidayCalendar cal;
  cal.dates = {sys_days(ymd(2020, 6, 2))};
  const auto aug = augment(rows, cal);
  CHECK(aug[2].gathering == 0);
  CHECK(aug[0].gathering == 0);
  CHECK(aug[1].gathering == 1);

  // Holidays just outside the series still count as neighbours.
  HolidayCalendar edge;
  edge.dates = {sys_days(ymd(2020, 5, 31)), sys_days(ymd(2020, 6, 2))};
  CHECK(augment(rows, edge)[0].gathering == 1);

  const auto none = augment(rows, {});
  for (const auto& r : none)
    CHECK((r.d_type == 0 && r.gathering == 0));
}

TEST_CASE("augment rejects gaps")
{
  auto rows = consecutive(ymd(2020, 6, 1), {1, 2, 3});
  rows[2].date = ymd(2020, 6, 5);
  CHECK(kind_of([&] { augment(rows, {}); }) == DataError::Kind::non_contiguous);
}

TEST_CASE("holiday calendar parsing")
{
  std::istringstream in("date,name\n2020-03-20,Nowruz\n2020-03-21,Nowruz\n");
  const auto cal = read_holidays(in);
  CHECK(cal.dates.size() == 2);
  CHECK(cal.contains(ymd(2020, 3, 21)));
  std::istringstream bad("date\n2020-13-01\n");
  CHECK_THROWS_AS(read_holidays(bad), DataError);
}

TEST_CASE("augmented csv round trip")
{
  const std::vector<AugmentedRecord> recs{{128, 2472, 43.371, 0, 0}, {129, 2449, 42.732, 0, 0}, {130, 2563, 42.064, 1, 1}};
  std::stringstream s;
  write_augmented_csv(s, recs);
  CHECK(s.str().rfind("index,cases,c_num,d_type,gathering\n", 0) == 0);
  CHECK(read_augmented_csv(s) == recs);

  std::istringstream gap("index,cases,c_num,d_type,gathering\n0,1,0,0,0\n2,1,0,0,0\n");
  CHECK(kind_of([&] { read_augmented_csv(gap); }) == DataError::Kind::non_contiguous);
  std::istringstream bad_bits("index,cases,c_num,d_type,gathering\n0,1,0,1,0\n");
  CHECK_THROWS_AS(read_augmented_csv(bad_bits), DataError);
}

TEST_CASE("feature matrices")
{
  const std::vector<AugmentedRecord> recs{{0, 10, 1.5, 1, 1}, {1, 20, 2.5, 0, 0}};
  const auto a = feature_matrix(recs, FeatureMode::augmented);
  CHECK(a.cols == 4);
  CHECK(a(0, 0) == 10);
  CHECK(a(0, 1) == 1.5);
  CHECK(a(0, 3) == 1);
  const auto o = feature_matrix(recs, FeatureMode::original);
  CHECK(o.cols == 2);
  CHECK(o(1, 1) == 2.5);
  CHECK(feature_count(FeatureMode::augmented) == 4);
  CHECK(parse_feature_mode("original") == FeatureMode::original);
  CHECK_THROWS(parse_feature_mode("both"));
}

namespace {

SeriesMatrix ramp(std::size_t n, std::size_t cols)
{
  SeriesMatrix m;
  m.rows = n;
  m.cols = cols;
  m.values.resize(n * cols);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(r, c) = double(r) + 1000.0 * double(c);
  return m;
}

} // namespace

TEST_CASE("framing and split sizes")
{
  const auto series = ramp(100, 4);
  const auto f = frame(series, 24);
  CHECK(f.samples == 76);
  CHECK(f.features == 4);
  CHECK(f.input(0, 23, 0) == 23.0);
  CHECK(f.targets[0] == 24.0);
  CHECK(f.input(75, 0, 2) == 2075.0);
  CHECK(f.targets[75] == 99.0);

  const auto [train, test] = split(f, 0.8);
  CHECK(train.samples == 60);
  CHECK(test.samples == 16);
  CHECK(train.window_start.back() < test.window_start.front());

  const auto one = frame(series, 1);
  CHECK(one.samples == 99);
  CHECK(one.targets[4] == 5.0);

  CHECK_THROWS(frame(series, 100));
  CHECK_THROWS(frame(series, 0));
  CHECK_THROWS(split(f, 0.01));
  CHECK_THROWS(split(frame(ramp(5, 1), 3), 0.4));
  CHECK_THROWS(split(f, 0.0));
}

TEST_CASE("trailing windows end at the last row")
{
  const auto w = trailing_windows(ramp(100, 2), 24, 3);
  CHECK(w.samples == 3);
  CHECK(w.input(2, 23, 0) == 99.0);
  CHECK(w.window_start[2] == 76);
  CHECK_THROWS(trailing_windows(ramp(100, 2), 24, 78));
}

TEST_CASE("scaler")
{
  const Scaler s({0.0, 5.0}, {2.0, 5.0}, 0.0, 4.0);
  CHECK(s.transform_feature(0, 1.0) == 0.5);
  CHECK(s.transform_feature(1, 5.0) == 0.0);  // constant feature
  CHECK(s.transform_target(3.0) == 0.75);
  CHECK(s.inverse_target(s.transform_target(3.3)) == doctest::Approx(3.3).epsilon(1e-15));
  CHECK(s.transform_feature(0, 3.0) == 1.5);  // not clipped
  CHECK(s.transform_feature(0, -1.0) == -0.5);

  const auto f = frame(ramp(20, 2), 3);
  const auto fitted = Scaler::fit(f);
  CHECK(fitted.feature_min()[0] == 0.0);
  CHECK(fitted.feature_max()[0] == 18.0);
  CHECK(fitted.target_min() == 3.0);
  CHECK(fitted.target_max() == 19.0);
  CHECK_THROWS_AS(Scaler({0.0}, {1.0}, 0, 1).apply(f), std::invalid_argument);
}

TEST_CASE("prepare fits the scaler on training windows only")
{
  const auto series = ramp(100, 2);
  const auto p = prepare(series, 24, 0.8);
  CHECK(p.train.samples == 60);
  CHECK(p.test.samples == 16);
  CHECK(p.scaler.target_max() == 83.0);
  // Test targets run past the training range.
  CHECK(p.test.targets.back() > 1.0);
  for (double v : p.train.inputs) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  const auto q = prepare(series, 5, 0.8, SplitOrder::split_then_frame);
  CHECK(q.train.samples == 75);
  CHECK(q.test.samples == 15);
  CHECK_THROWS(prepare(series, 24, 0.8, SplitOrder::split_then_frame));
}
