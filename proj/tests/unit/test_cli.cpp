#include "cli/commands.hpp"
#include "nasbba/architecture.hpp"
#include "nasbba/synthetic.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nasbba;
using namespace nasbba::cli;
namespace fs = std::filesystem;

namespace {

struct Workspace
{
  fs::path root;

  explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / ("nasbba_cli_" + name))
  {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }

  fs::path operator/(const std::string& name) const { return root / name; }
};

void write_file(const fs::path& p, const std::string& text)
{
  std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_series(const Workspace& w, std::size_t days, const std::string& name = "series.csv")
{
  const auto recs = synthetic::augmented_series(synthetic::seasonal_options(4, days));
  std::ofstream out(w / name);
  data::write_augmented_csv(out, recs);
  return w / name;
}

const char* const kConfig = R"({"population_size": 3, "iterations": 2, "fitness_epochs": 2, "retrain_epochs": 3,
  "max_timesteps": 7, "max_lstm_units": 3, "max_dense_units": 3, "seed": 2})";

} // namespace

TEST_CASE("prepare writes the augmented dataset")
{
  Workspace w("prepare");
  auto opts = synthetic::iran_like_options();
  opts.days = 40;
  const auto epi = synthetic::synthesize(opts);
  {
    std::ofstream e(w / "ecdc.csv");
    synthetic::write_ecdc_csv(e, epi.records);
    std::ofstream h(w / "holidays.csv");
    synthetic::write_holiday_csv(h, epi.holidays);
  }
  std::ostringstream out, err;
  PrepareOptions p{w / "ecdc.csv", w / "holidays.csv", "Iran", w / "aug.csv", ""};
  CHECK(cmd_prepare(p, out, err) == exit_ok);
  CHECK(out.str().find("rows: 40") != std::string::npos);
  std::ifstream in(w / "aug.csv");
  CHECK(data::read_augmented_csv(in).size() == 40);
  CHECK(fs::exists(w / "aug.csv.manifest.json"));

  p.country = "Atlantis";
  CHECK(cmd_prepare(p, out, err) == exit_data);
  p.country = "Iran";
  p.ecdc = w / "missing.csv";
  CHECK(cmd_prepare(p, out, err) == exit_data);

  write_file(w / "empty_holidays.csv", "date\n");
  p.ecdc = w / "ecdc.csv";
  p.holidays = w / "empty_holidays.csv";
  std::ostringstream warn;
  CHECK(cmd_prepare(p, out, warn) == exit_ok);
  CHECK(warn.str().find("lists no dates") != std::string::npos);
}

TEST_CASE("search, retrain and forecast")
{
  Workspace w("search");
  const auto data = write_series(w, 80);
  write_file(w / "config.json", kConfig);
  std::ostringstream out, err;
  SearchOptions s;
  s.data = data;
  s.config = w / "config.json";
  s.out = w / "run";
  s.retrain = true;
  REQUIRE(cmd_search(s, out, err) == exit_ok);
  for (const char* f : {"config.json", "history.csv", "best_genome.txt", "best_spec.json", "manifest.json",
                        "checkpoints/search_state.json", "checkpoints/best_model.ckpt", "losses/best_model.csv"})
    CHECK_MESSAGE(fs::exists(w.root / "run" / f), f);
  CHECK(out.str().find("best genome: ") != std::string::npos);

  ForecastOptions f;
  f.checkpoint = w.root / "run" / "checkpoints" / "best_model.ckpt";
  f.data = data;
  f.windows = 2;
  std::ostringstream fc;
  REQUIRE(cmd_forecast(f, fc, err) == exit_ok);
  CHECK(fc.str().rfind("window_end_index,predicted_index,predicted_cases\n78,79,", 0) == 0);
  CHECK(fc.str().find("\n79,80,") != std::string::npos);

  f.horizon = 3;
  CHECK(cmd_forecast(f, fc, err) == exit_usage);
  f.horizon = 1;
  f.data = write_series(w, 3, "short.csv");
  f.windows = 10;
  std::ostringstream short_err;
  CHECK(cmd_forecast(f, fc, short_err) == exit_data);
  CHECK(short_err.str().find("timesteps") != std::string::npos);
}

TEST_CASE("search rejects bad configs and mismatched run directories")
{
  Workspace w("search_bad");
  const auto data = write_series(w, 80);
  write_file(w / "bad.json", R"({"population_size": 1, "colour": "red"})");
  std::ostringstream out, err;
  SearchOptions s;
  s.data = data;
  s.config = w / "bad.json";
  s.out = w / "run";
  CHECK(cmd_search(s, out, err) == exit_usage);
  CHECK(err.str().find("colour") != std::string::npos);

  write_file(w / "config.json", kConfig);
  s.config = w / "config.json";
  s.stop_after = 0;
  CHECK(cmd_search(s, out, err) == exit_ok);
  s.stop_after.reset();
  s.seed = 99;
  CHECK(cmd_search(s, out, err) == exit_usage);
  s.seed.reset();
  CHECK(cmd_search(s, out, err) == exit_ok);

  s.data = w / "nope.csv";
  CHECK(cmd_search(s, out, err) == exit_data);
}

TEST_CASE("train and compare")
{
  Workspace w("train");
  const auto data = write_series(w, 100);
  const auto spec = make_five_layer_spec(24, 3, 2, 3, 2, Activation::relu, Activation::relu);
  {
    std::ofstream list(w / "specs.json");
    write_spec_list(list, {{"small", spec}, {"same", spec}});
  }
  std::ostringstream out, err;
  TrainOptions t;
  t.data = data;
  t.spec = w / "specs.json";
  t.name = "small";
  t.epochs = 2;
  t.out = w / "train";
  t.seeds = {1, 2};
  REQUIRE(cmd_train(t, out, err) == exit_ok);
  CHECK(fs::exists(w.root / "train" / "checkpoints" / "seed_2.ckpt"));
  CHECK(fs::exists(w.root / "train" / "losses" / "seed_1.csv"));
  CHECK(slurp(w.root / "train" / "losses" / "seed_1.csv").rfind("epoch,train_loss,val_loss\n", 0) == 0);

  // t = 24 on a 100-day series forecasts day 100 from the window ending at day 99
  ForecastOptions f;
  f.checkpoint = w.root / "train" / "checkpoints" / "seed_1.ckpt";
  f.data = data;
  f.out = w / "forecast.csv";
  std::ostringstream fc;
  REQUIRE(cmd_forecast(f, fc, err) == exit_ok);
  CHECK(fc.str().rfind("window_end_index,predicted_index,predicted_cases\n99,100,", 0) == 0);
  CHECK(slurp(w / "forecast.csv") == fc.str());

  t.name = "missing";
  CHECK(cmd_train(t, out, err) == exit_usage);

  CompareOptions c;
  c.data = data;
  c.specs = w / "specs.json";
  c.out = w / "compare";
  c.epochs = 2;
  c.repetitions = 2;
  std::ostringstream table;
  REQUIRE(cmd_compare(c, table, err) == exit_ok);
  CHECK(slurp(w.root / "compare" / "comparison.csv") == table.str());
  std::istringstream lines(table.str());
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  // Identical specs and seeds give identical scores.
  CHECK(first.substr(first.find(',', first.find(',') + 1)) == second.substr(second.find(',', second.find(',') + 1)));
}

TEST_CASE("argument parsing")
{
  auto call = [](std::vector<std::string> args) {
    std::vector<char*> argv;
    for (auto& a : args)
      argv.push_back(a.data());
    return run(int(argv.size()), argv.data());
  };
  CHECK(call({"nasbba", "--help"}) == exit_ok);
  CHECK(call({"nasbba"}) == exit_usage);
  CHECK(call({"nasbba", "search"}) == exit_usage);
  CHECK(call({"nasbba", "forecast", "--checkpoint", "x", "--data", "y", "--horizon", "abc"}) == exit_usage);
  CHECK(call({"nasbba", "search", "--data", "d", "--out", "o", "--features", "both"}) == exit_usage);
}
