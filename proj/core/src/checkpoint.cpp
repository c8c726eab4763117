#include "nasbba/neuro.hpp"

#include "detail/atomic_write.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nasbba::neuro {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'N', 'A', 'S', 'B', 'B', 'A', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class U>
void put_le(std::string& out, U value)
{
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <class U>
U get_le(std::istream& in)
{
  std::array<unsigned char, sizeof(U)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in)
    throw std::runtime_error("checkpoint is truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= U(buf[i]) << (8 * i);
  return v;
}

json topology(const Network& net)
{
  json layers = json::array();
  for (const auto& layer : net.layers()) {
    if (const auto* l = std::get_if<LstmLayer>(&layer)) {
      layers.push_back({{"type", "lstm"},
                        {"input", l->input_size},
                        {"units", l->units},
                        {"return_sequences", l->return_sequences}});
    } else {
      const auto& d = std::get<DenseLayer>(layer);
      layers.push_back(
        {{"type", "dense"}, {"input", d.input_size}, {"units", d.units}, {"activation", to_string(d.activation)}});
    }
  }
  return layers;
}

Network network_from_topology(const json& header)
{
  std::vector<Layer> layers;
  for (const auto& lj : header.at("layers")) {
    const auto type = lj.at("type").get<std::string>();
    const auto input = lj.at("input").get<std::size_t>();
    const auto units = lj.at("units").get<std::size_t>();
    const auto H = Eigen::Index(units);
    if (type == "lstm") {
      LstmLayer l;
      l.input_size = input;
      l.units = units;
      l.return_sequences = lj.at("return_sequences").get<bool>();
      l.W = Matrix::Zero(4 * H, Eigen::Index(input));
      l.U = Matrix::Zero(4 * H, H);
      l.b = Matrix::Zero(4 * H, 1);
      layers.emplace_back(std::move(l));
    } else if (type == "dense") {
      DenseLayer d;
      d.input_size = input;
      d.units = units;
      d.activation = parse_activation(lj.at("activation").get<std::string>());
      d.W = Matrix::Zero(H, Eigen::Index(input));
      d.b = Matrix::Zero(H, 1);
      layers.emplace_back(std::move(d));
    } else {
      throw std::runtime_error("checkpoint has unknown layer type '" + type + "'");
    }
  }
  return Network::from_layers(
    std::move(layers), header.at("feature_count").get<std::size_t>(), header.at("timesteps").get<std::size_t>());
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ckpt)
{
  json header{{"format", "nasbba-checkpoint"},
              {"version", kVersion},
              {"feature_count", ckpt.network.feature_count()},
              {"timesteps", ckpt.network.timesteps()},
              {"layers", topology(ckpt.network)}};
  if (ckpt.spec)
    header["spec"] = json::parse(to_json_text(*ckpt.spec));
  if (ckpt.scaler)
    header["scaler"] = {{"feature_min", ckpt.scaler->feature_min()},
                        {"feature_max", ckpt.scaler->feature_max()},
                        {"target_min", ckpt.scaler->target_min()},
                        {"target_max", ckpt.scaler->target_max()}};
  if (ckpt.feature_mode)
    header["feature_mode"] = data::to_string(*ckpt.feature_mode);

  const std::string header_text = header.dump();
  const auto params = ckpt.network.parameters();

  std::string bytes(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(bytes, kVersion);
  put_le<std::uint64_t>(bytes, header_text.size());
  bytes += header_text;
  put_le<std::uint64_t>(bytes, params.size());
  for (double p : params)
    put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(p));

  detail::atomic_write(path, bytes);
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic)
    throw std::runtime_error(path.string() + " is not a nasbba checkpoint");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), std::streamsize(header_len));
  if (!in)
    throw std::runtime_error("checkpoint header is truncated");

  ModelCheckpoint ckpt;
  try {
    const json header = json::parse(header_text);
    ckpt.network = network_from_topology(header);
    if (header.contains("spec"))
      ckpt.spec = spec_from_json_text(header.at("spec").dump());
    if (header.contains("scaler")) {
      const auto& s = header.at("scaler");
      ckpt.scaler = data::Scaler(s.at("feature_min").get<std::vector<double>>(),
                                 s.at("feature_max").get<std::vector<double>>(),
                                 s.at("target_min").get<double>(),
                                 s.at("target_max").get<double>());
    }
    if (header.contains("feature_mode"))
      ckpt.feature_mode = data::parse_feature_mode(header.at("feature_mode").get<std::string>());
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint header: ") + e.what());
  }

  const auto count = get_le<std::uint64_t>(in);
  if (count != ckpt.network.parameter_count())
    throw std::runtime_error("checkpoint parameter count does not match its topology");
  std::vector<double> params(count);
  for (auto& p : params)
    p = std::bit_cast<double>(get_le<std::uint64_t>(in));
  ckpt.network.set_parameters(params);
  return ckpt;
}

} // namespace nasbba::neuro
