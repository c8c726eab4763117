#include "nasbba/genome.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace nasbba::genome {

std::vector<std::string> GenomeLayout::problems() const
{
  std::vector<std::string> out;
  if (optional_layer_count < 1)
    out.emplace_back("optional_layer_count must be at least 1");
  if (optional_recurrent_count > optional_layer_count)
    out.emplace_back("optional_recurrent_count exceeds optional_layer_count");
  if (activation_slot_count != 2)
    out.emplace_back("activation_slot_count must be 2 (dense layers, output layer)");
  if (unit_bit_widths.size() != optional_layer_count + 1)
    out.emplace_back("unit_bit_widths needs one entry per unit-bearing layer");
  if (unit_caps.size() != unit_bit_widths.size())
    out.emplace_back("unit_caps and unit_bit_widths differ in length");
  for (std::size_t i = 0; i < std::min(unit_caps.size(), unit_bit_widths.size()); ++i) {
    const auto w = unit_bit_widths[i];
    if (w < 1 || w > 63)
      out.push_back("unit width " + std::to_string(i) + " must lie in [1, 63]");
    else if (((std::uint64_t{1} << w) - 1) < unit_caps[i])
      out.push_back("unit width " + std::to_string(i) + " cannot represent its cap");
    if (unit_caps[i] < 1)
      out.push_back("unit cap " + std::to_string(i) + " must be positive");
  }
  if (timestep_bit_width < 1 || timestep_bit_width > 63)
    out.emplace_back("timestep_bit_width must lie in [1, 63]");
  else if (((std::uint64_t{1} << timestep_bit_width) - 1) < timestep_cap)
    out.emplace_back("timestep_bit_width cannot represent timestep_cap");
  if (timestep_cap < 1)
    out.emplace_back("timestep_cap must be positive");
  return out;
}

void GenomeLayout::validate() const
{
  auto issues = problems();
  if (issues.empty())
    return;
  std::string msg = "invalid genome layout:";
  for (const auto& p : issues)
    msg += "\n  - " + p;
  throw std::invalid_argument(msg);
}

GenomeLayout default_layout()
{
  return GenomeLayout{};
}

std::size_t genome_length(const GenomeLayout& layout)
{
  return layout.optional_layer_count + layout.activation_slot_count +
         std::accumulate(layout.unit_bit_widths.begin(), layout.unit_bit_widths.end(), std::size_t{0}) +
         layout.timestep_bit_width;
}

std::size_t bits_for_cap(std::size_t cap)
{
  std::size_t w = 0;
  while (w < 64 && ((std::uint64_t{1} << w) - 1) < cap)
    ++w;
  return w;
}

BitVector gray_encode(std::uint64_t n, std::size_t width)
{
  if (width < 1 || width > 63)
    throw std::out_of_range("gray_encode: width must lie in [1, 63]");
  if (n >= (std::uint64_t{1} << width))
    throw std::out_of_range("gray_encode: " + std::to_string(n) + " does not fit in " +
                            std::to_string(width) + " bits");
  const std::uint64_t g = n ^ (n >> 1);
  BitVector out(width);
  for (std::size_t i = 0; i < width; ++i)
    out.set(i, (g >> (width - 1 - i)) & 1U);
  return out;
}

std::uint64_t gray_decode(const BitVector& bits)
{
  std::uint64_t n = 0;
  bool acc = false;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    acc = acc != bits[i];
    n = (n << 1) | (acc ? 1U : 0U);
  }
  return n;
}

namespace {

std::size_t clamp_field(std::uint64_t value, std::size_t cap)
{
  return static_cast<std::size_t>(std::clamp<std::uint64_t>(value, 1, cap));
}

// 0 and 1 both decode to 1; the all-zero field is the canonical encoding of 1.
BitVector encode_field(std::size_t value, std::size_t width)
{
  return gray_encode(value == 1 ? 0 : value, width);
}

Activation activation_of(bool bit)
{
  return bit ? Activation::relu : Activation::sigmoid;
}

} // namespace

ArchitectureSpec decode(const BitVector& genome, const GenomeLayout& layout)
{
  layout.validate();
  if (genome.size() != genome_length(layout))
    throw std::invalid_argument("genome has " + std::to_string(genome.size()) + " bits, layout expects " +
                                std::to_string(genome_length(layout)));

  std::size_t pos = 0;
  const BitVector existence = genome.slice(pos, layout.optional_layer_count);
  pos += layout.optional_layer_count;
  const BitVector activations = genome.slice(pos, layout.activation_slot_count);
  pos += layout.activation_slot_count;

  std::vector<std::size_t> units;
  for (std::size_t k = 0; k < layout.unit_bit_widths.size(); ++k) {
    const auto w = layout.unit_bit_widths[k];
    units.push_back(clamp_field(gray_decode(genome.slice(pos, w)), layout.unit_caps[k]));
    pos += w;
  }
  const auto timesteps =
    clamp_field(gray_decode(genome.slice(pos, layout.timestep_bit_width)), layout.timestep_cap);

  const Activation dense_act = activation_of(activations[0]);
  const Activation output_act = activation_of(activations[1]);

  ArchitectureSpec spec;
  spec.timesteps = timesteps;
  spec.layers.push_back({LayerKind::recurrent, true, units[0], std::nullopt});
  for (std::size_t i = 0; i < layout.optional_layer_count; ++i) {
    const bool recurrent = i < layout.optional_recurrent_count;
    spec.layers.push_back({recurrent ? LayerKind::recurrent : LayerKind::dense,
                           existence[i],
                           units[i + 1],
                           recurrent ? std::nullopt : std::optional<Activation>(dense_act)});
  }
  spec.layers.push_back({LayerKind::output, true, 1, output_act});
  return spec;
}

BitVector encode(const ArchitectureSpec& spec, const GenomeLayout& layout)
{
  layout.validate();
  spec.validate();
  const std::size_t l = layout.optional_layer_count;
  if (spec.layers.size() != l + 2)
    throw std::invalid_argument("architecture has " + std::to_string(spec.layers.size()) +
                                " layers, layout encodes " + std::to_string(l + 2));

  std::optional<Activation> dense_act;
  for (std::size_t i = 0; i < l; ++i) {
    const auto& layer = spec.layers[i + 1];
    const bool recurrent = i < layout.optional_recurrent_count;
    if ((layer.kind == LayerKind::recurrent) != recurrent)
      throw std::invalid_argument("layer " + std::to_string(i + 1) + " kind does not match the layout");
    if (!recurrent) {
      if (*layer.activation == Activation::identity)
        throw std::invalid_argument("identity activation is not encodable");
      if (dense_act && *dense_act != *layer.activation)
        throw std::invalid_argument("dense layers share one activation gene; mixed activations are not encodable");
      dense_act = layer.activation;
    }
  }
  const Activation out_act = *spec.layers.back().activation;
  if (out_act == Activation::identity)
    throw std::invalid_argument("identity activation is not encodable");

  BitVector genome;
  for (std::size_t i = 0; i < l; ++i) {
    BitVector b(1, spec.layers[i + 1].present);
    genome.append(b);
  }
  genome.append(BitVector(1, dense_act.value_or(Activation::sigmoid) == Activation::relu));
  genome.append(BitVector(1, out_act == Activation::relu));

  for (std::size_t k = 0; k < layout.unit_bit_widths.size(); ++k) {
    const auto units = spec.layers[k].units;
    if (units > layout.unit_caps[k])
      throw std::invalid_argument("layer " + std::to_string(k) + " has " + std::to_string(units) +
                                  " units, cap is " + std::to_string(layout.unit_caps[k]));
    genome.append(encode_field(units, layout.unit_bit_widths[k]));
  }
  if (spec.timesteps > layout.timestep_cap)
    throw std::invalid_argument("timesteps " + std::to_string(spec.timesteps) + " exceed cap " +
                                std::to_string(layout.timestep_cap));
  genome.append(encode_field(spec.timesteps, layout.timestep_bit_width));
  return genome;
}

} // namespace nasbba::genome
