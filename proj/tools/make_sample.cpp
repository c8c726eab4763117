// Writes the bundled synthetic sample files: an ECDC-layout extract for an
// Iran-like epidemic, its holiday calendar, a seasonal series for desk-scale runs
// and the reference architectures as a spec list.

#include "nasbba/architecture.hpp"
#include "nasbba/dataset.hpp"
#include "nasbba/synthetic.hpp"

#include <CLI11.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace nasbba;

namespace {

void write_file(const fs::path& path, auto&& writer)
{
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  writer(out);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  std::cout << "wrote " << path.string() << '\n';
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Generate the synthetic sample datasets"};
  fs::path dir = "data";
  std::uint64_t seed = 2020;
  app.add_option("--dir", dir, "Output directory");
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    auto iran = synthetic::iran_like_options();
    iran.seed = seed;
    const auto e = synthetic::synthesize(iran);
    write_file(dir / "iran_sample_ecdc.csv", [&](std::ostream& o) { synthetic::write_ecdc_csv(o, e.records); });
    write_file(dir / "iran_holidays.csv", [&](std::ostream& o) { synthetic::write_holiday_csv(o, e.holidays); });
    write_file(dir / "iran_sample_augmented.csv",
               [&](std::ostream& o) { data::write_augmented_csv(o, data::augment(e.records, e.holidays)); });

    const auto seasonal = synthetic::augmented_series(synthetic::seasonal_options(seed));
    write_file(dir / "seasonal_300.csv", [&](std::ostream& o) { data::write_augmented_csv(o, seasonal); });

    // (t, LSTM1, LSTM2, Dense1, Dense2), all layers present, ReLU dense and output layers.
    const std::vector<std::pair<std::string, std::array<std::size_t, 5>>> rows{
      {"M1", {21, 18, 26, 9, 63}},         {"M2", {16, 24, 27, 16, 3}},         {"M3", {23, 12, 29, 16, 2}},
      {"M4", {24, 25, 20, 9, 33}},         {"Network1", {32, 32, 32, 64, 64}}, {"Network2", {28, 20, 20, 32, 32}},
      {"Network3", {20, 20, 20, 32, 32}}, {"Network4", {16, 24, 24, 16, 32}}, {"Network5", {10, 16, 16, 16, 32}},
    };
    std::vector<NamedSpec> specs;
    for (const auto& [name, v] : rows)
      specs.push_back({name, make_five_layer_spec(v[0], v[1], v[2], v[3], v[4], Activation::relu, Activation::relu)});
    write_file(dir / "reference_specs.json", [&](std::ostream& o) { write_spec_list(o, specs); });
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
