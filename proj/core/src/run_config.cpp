#include "nasbba/nas.hpp"

#include "nasbba/hashing.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace nasbba::nas {

using nlohmann::json;

std::vector<std::string> NasConfig::problems() const
{
  std::vector<std::string> out = bba.problems();
  for (auto& p : layout.problems())
    out.push_back(std::move(p));
  for (auto& p : train.problems())
    out.push_back(std::move(p));
  if (train.epochs < 1)
    out.emplace_back("fitness_epochs must be at least 1");
  if (retrain_epochs < train.epochs)
    out.emplace_back("retrain_epochs must be at least fitness_epochs");
  if (!(split_ratio > 0.0 && split_ratio < 1.0))
    out.emplace_back("split_ratio must lie in (0, 1)");
  if (repetitions < 1)
    out.emplace_back("repetitions must be at least 1");
  return out;
}

void NasConfig::validate() const
{
  auto issues = problems();
  if (issues.empty())
    return;
  std::string msg = "invalid configuration:";
  for (const auto& p : issues)
    msg += "\n  - " + p;
  throw bba::ConfigError(msg);
}

namespace {

std::string_view to_string(data::SplitOrder order)
{
  return order == data::SplitOrder::frame_then_split ? "frame_then_split" : "split_then_frame";
}

struct Field
{
  std::function<void(const json&, NasConfig&)> set;
  std::function<json(const NasConfig&)> get;
};

template <class T>
T as(const json& v, const char* what)
{
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean())
      throw std::invalid_argument(std::string("expected a boolean, got ") + v.type_name());
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw std::invalid_argument(std::string("expected a non-negative integer (") + what + ")");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number())
      throw std::invalid_argument(std::string("expected a number, got ") + v.type_name());
  } else {
    if (!v.is_string())
      throw std::invalid_argument(std::string("expected a string, got ") + v.type_name());
  }
  return v.get<T>();
}

#define NASBBA_FIELD(key, T, expr)                                                                                 \
  {                                                                                                                 \
    key, Field{[](const json& v, NasConfig& c) { expr = as<T>(v, key); }, [](const NasConfig& c) { return json(expr); } } \
  }

const std::map<std::string, Field>& fields()
{
  static const std::map<std::string, Field> table{
    NASBBA_FIELD("population_size", std::size_t, c.bba.population_size),
    NASBBA_FIELD("iterations", std::size_t, c.bba.iterations),
    NASBBA_FIELD("f_min", double, c.bba.f_min),
    NASBBA_FIELD("f_max", double, c.bba.f_max),
    NASBBA_FIELD("initial_loudness", double, c.bba.initial_loudness),
    NASBBA_FIELD("initial_pulse_rate", double, c.bba.initial_pulse_rate),
    NASBBA_FIELD("alpha", double, c.bba.alpha),
    NASBBA_FIELD("gamma", double, c.bba.gamma),
    NASBBA_FIELD("seed", std::uint64_t, c.bba.rng_seed),
    NASBBA_FIELD("elite_count", std::size_t, c.bba.elite_count),
    NASBBA_FIELD("threads", std::size_t, c.bba.threads),
    NASBBA_FIELD("fitness_epochs", std::size_t, c.train.epochs),
    NASBBA_FIELD("retrain_epochs", std::size_t, c.retrain_epochs),
    NASBBA_FIELD("dropout_rate", double, c.train.dropout_rate),
    NASBBA_FIELD("l2_lambda", double, c.train.l2_lambda),
    NASBBA_FIELD("learning_rate", double, c.train.learning_rate),
    NASBBA_FIELD("batch_size", std::size_t, c.train.batch_size),
    NASBBA_FIELD("grad_clip", double, c.train.grad_clip),
    NASBBA_FIELD("shuffle", bool, c.train.shuffle),
    NASBBA_FIELD("split_ratio", double, c.split_ratio),
    NASBBA_FIELD("repetitions", std::size_t, c.repetitions),
    {"max_timesteps",
     Field{[](const json& v, NasConfig& c) {
             c.layout.timestep_cap = as<std::size_t>(v, "max_timesteps");
             c.layout.timestep_bit_width = genome::bits_for_cap(c.layout.timestep_cap);
           },
           [](const NasConfig& c) { return json(c.layout.timestep_cap); }}},
    {"max_lstm_units",
     Field{[](const json& v, NasConfig& c) {
             const auto cap = as<std::size_t>(v, "max_lstm_units");
             for (std::size_t i = 0; i <= c.layout.optional_recurrent_count; ++i) {
               c.layout.unit_caps[i] = cap;
               c.layout.unit_bit_widths[i] = genome::bits_for_cap(cap);
             }
           },
           [](const NasConfig& c) { return json(c.layout.unit_caps.front()); }}},
    {"max_dense_units",
     Field{[](const json& v, NasConfig& c) {
             const auto cap = as<std::size_t>(v, "max_dense_units");
             for (std::size_t i = c.layout.optional_recurrent_count + 1; i < c.layout.unit_caps.size(); ++i) {
               c.layout.unit_caps[i] = cap;
               c.layout.unit_bit_widths[i] = genome::bits_for_cap(cap);
             }
           },
           [](const NasConfig& c) { return json(c.layout.unit_caps.back()); }}},
    {"feature_mode",
     Field{[](const json& v, NasConfig& c) {
             c.feature_mode = data::parse_feature_mode(as<std::string>(v, "feature_mode"));
           },
           [](const NasConfig& c) { return json(std::string(data::to_string(c.feature_mode))); }}},
    {"split_order",
     Field{[](const json& v, NasConfig& c) {
             const auto s = as<std::string>(v, "split_order");
             if (s == "frame_then_split")
               c.split_order = data::SplitOrder::frame_then_split;
             else if (s == "split_then_frame")
               c.split_order = data::SplitOrder::split_then_frame;
             else
               throw std::invalid_argument("expected frame_then_split or split_then_frame");
           },
           [](const NasConfig& c) { return json(std::string(to_string(c.split_order))); }}},
  };
  return table;
}

#undef NASBBA_FIELD

} // namespace

NasConfig parse_config(std::string_view json_text)
{
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw bba::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object())
    throw bba::ConfigError("config must be a JSON object of flat keys");

  NasConfig config;
  std::vector<std::string> issues;
  const auto& table = fields();
  for (const auto& [key, value] : doc.items()) {
    const auto it = table.find(key);
    if (it == table.end()) {
      issues.push_back("unknown key '" + key + "'");
      continue;
    }
    try {
      it->second.set(value, config);
    } catch (const std::exception& e) {
      issues.push_back(key + ": " + e.what());
    }
  }
  for (auto& p : config.problems())
    issues.push_back(std::move(p));
  if (!issues.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : issues)
      msg += "\n  - " + p;
    throw bba::ConfigError(msg);
  }
  return config;
}

NasConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw bba::ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const NasConfig& config)
{
  json doc = json::object();
  for (const auto& [key, field] : fields())
    doc[key] = field.get(config);
  return doc.dump(2) + "\n";
}

std::string config_hash(const NasConfig& config)
{
  // Thread count does not change results, so it is left out of the identity.
  auto doc = json::parse(config_to_json(config));
  doc.erase("threads");
  return sha256_hex(doc.dump());
}

} // namespace nasbba::nas
