#include "nasbba/architecture.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>
#include <stdexcept>

namespace nasbba {

using nlohmann::json;

std::string_view to_string(LayerKind kind)
{
  switch (kind) {
    case LayerKind::recurrent: return "recurrent";
    case LayerKind::dense: return "dense";
    case LayerKind::output: return "output";
  }
  return "?";
}

std::string_view to_string(Activation act)
{
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view text)
{
  if (text == "recurrent" || text == "lstm")
    return LayerKind::recurrent;
  if (text == "dense")
    return LayerKind::dense;
  if (text == "output")
    return LayerKind::output;
  throw std::invalid_argument("unknown layer kind '" + std::string(text) + "'");
}

Activation parse_activation(std::string_view text)
{
  if (text == "relu" || text == "R")
    return Activation::relu;
  if (text == "sigmoid" || text == "S")
    return Activation::sigmoid;
  if (text == "identity" || text == "linear")
    return Activation::identity;
  throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
}

std::vector<const LayerSpec*> ArchitectureSpec::present_layers() const
{
  std::vector<const LayerSpec*> out;
  for (const auto& l : layers)
    if (l.present)
      out.push_back(&l);
  return out;
}

std::vector<std::string> ArchitectureSpec::problems() const
{
  std::vector<std::string> out;
  if (timesteps < 1)
    out.emplace_back("timesteps must be at least 1");
  if (layers.size() < 2) {
    out.emplace_back("an architecture needs at least a recurrent and an output layer");
    return out;
  }
  if (layers.front().kind != LayerKind::recurrent || !layers.front().present)
    out.emplace_back("first layer must be a present recurrent layer");
  if (layers.back().kind != LayerKind::output || !layers.back().present)
    out.emplace_back("last layer must be a present output layer");
  if (layers.back().units != 1)
    out.emplace_back("output layer must have exactly 1 unit");
  bool seen_dense = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.units < 1)
      out.push_back("layer " + std::to_string(i) + " has zero units");
    if (l.kind == LayerKind::output && i + 1 != layers.size())
      out.push_back("output layer must be last (found at position " + std::to_string(i) + ")");
    if (l.kind == LayerKind::recurrent) {
      if (l.activation)
        out.push_back("recurrent layer " + std::to_string(i) + " must not carry an activation");
      if (seen_dense && l.present)
        out.push_back("recurrent layer " + std::to_string(i) + " follows a dense layer");
    } else {
      if (!l.activation)
        out.push_back("layer " + std::to_string(i) + " needs an activation");
      if (l.present)
        seen_dense = true;
    }
  }
  return out;
}

void ArchitectureSpec::validate() const
{
  auto issues = problems();
  if (issues.empty())
    return;
  std::string msg = "invalid architecture:";
  for (const auto& p : issues)
    msg += "\n  - " + p;
  throw std::invalid_argument(msg);
}

std::string summary(const ArchitectureSpec& spec)
{
  std::string s = "t=" + std::to_string(spec.timesteps);
  for (const auto& l : spec.layers) {
    if (!l.present)
      continue;
    switch (l.kind) {
      case LayerKind::recurrent: s += " LSTM(" + std::to_string(l.units) + ")"; break;
      case LayerKind::dense:
        s += " Dense(" + std::to_string(l.units) + "," + std::string(to_string(*l.activation)) + ")";
        break;
      case LayerKind::output:
        s += " Out(" + std::to_string(l.units) + "," + std::string(to_string(*l.activation)) + ")";
        break;
    }
  }
  return s;
}

namespace {

json spec_to_json(const ArchitectureSpec& spec)
{
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json j{{"kind", to_string(l.kind)}, {"present", l.present}, {"units", l.units}};
    if (l.activation)
      j["activation"] = to_string(*l.activation);
    layers.push_back(std::move(j));
  }
  return json{{"timesteps", spec.timesteps}, {"layers", std::move(layers)}};
}

ArchitectureSpec spec_from_json(const json& j)
{
  ArchitectureSpec spec;
  spec.timesteps = j.at("timesteps").get<std::size_t>();
  for (const auto& lj : j.at("layers")) {
    LayerSpec l;
    l.kind = parse_layer_kind(lj.at("kind").get<std::string>());
    l.present = lj.value("present", true);
    l.units = lj.at("units").get<std::size_t>();
    if (lj.contains("activation"))
      l.activation = parse_activation(lj.at("activation").get<std::string>());
    spec.layers.push_back(l);
  }
  spec.validate();
  return spec;
}

} // namespace

std::string to_json_text(const ArchitectureSpec& spec)
{
  return spec_to_json(spec).dump(2) + "\n";
}

ArchitectureSpec spec_from_json_text(std::string_view text)
{
  try {
    return spec_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed architecture record: ") + e.what());
  }
}

std::vector<NamedSpec> read_spec_list(std::istream& in)
{
  std::vector<NamedSpec> out;
  try {
    const json doc = json::parse(in);
    if (!doc.is_array())
      throw std::invalid_argument("spec list must be a JSON array");
    for (const auto& item : doc)
      out.push_back({item.at("name").get<std::string>(), spec_from_json(item)});
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed spec list: ") + e.what());
  }
  return out;
}

void write_spec_list(std::ostream& out, const std::vector<NamedSpec>& specs)
{
  json doc = json::array();
  for (const auto& s : specs) {
    json j{{"name", s.name}};
    j.update(spec_to_json(s.spec));
    doc.push_back(std::move(j));
  }
  out << doc.dump(2) << "\n";
}

ArchitectureSpec make_five_layer_spec(std::size_t timesteps,
                                      std::size_t lstm1,
                                      std::size_t lstm2,
                                      std::size_t dense1,
                                      std::size_t dense2,
                                      Activation dense_activation,
                                      Activation output_activation,
                                      bool lstm2_present,
                                      bool dense1_present,
                                      bool dense2_present)
{
  ArchitectureSpec spec;
  spec.timesteps = timesteps;
  spec.layers = {
    {LayerKind::recurrent, true, lstm1, std::nullopt},
    {LayerKind::recurrent, lstm2_present, lstm2, std::nullopt},
    {LayerKind::dense, dense1_present, dense1, dense_activation},
    {LayerKind::dense, dense2_present, dense2, dense_activation},
    {LayerKind::output, true, 1, output_activation},
  };
  return spec;
}

} // namespace nasbba
