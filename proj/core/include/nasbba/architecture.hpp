#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nasbba {

enum class LayerKind
{
  recurrent,
  dense,
  output,
};

/// `identity` is not encodable in a genome; it exists for hand-built networks.
enum class Activation
{
  relu,
  sigmoid,
  identity,
};

std::string_view to_string(LayerKind kind);
std::string_view to_string(Activation act);
LayerKind parse_layer_kind(std::string_view text);
Activation parse_activation(std::string_view text);

struct LayerSpec
{
  LayerKind kind = LayerKind::dense;
  bool present = true;
  std::size_t units = 1;
  /// Empty for recurrent layers, which use their fixed gate nonlinearities.
  std::optional<Activation> activation;

  bool operator==(const LayerSpec&) const = default;
};

/// Decoded network description. Layers are listed in network order; absent
/// layers keep their (dormant) unit counts.
struct ArchitectureSpec
{
  std::size_t timesteps = 1;
  std::vector<LayerSpec> layers;

  std::vector<const LayerSpec*> present_layers() const;

  /// Structural problems: first layer recurrent, last layer a 1-unit output,
  /// fixed layers present, units >= 1, timesteps >= 1.
  std::vector<std::string> problems() const;
  void validate() const;

  bool operator==(const ArchitectureSpec&) const = default;
};

/// Human-readable record, e.g. "t=24 LSTM(25) LSTM(20) Dense(9,relu) Dense(33,relu) Out(1,relu)".
std::string summary(const ArchitectureSpec& spec);

/// JSON text record used for spec files and run directories.
std::string to_json_text(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_json_text(std::string_view text);

struct NamedSpec
{
  std::string name;
  ArchitectureSpec spec;
};

/// Reads a JSON array of {"name": ..., "timesteps": ..., "layers": [...]} records.
std::vector<NamedSpec> read_spec_list(std::istream& in);
void write_spec_list(std::ostream& out, const std::vector<NamedSpec>& specs);

/// Architecture with the canonical five-layer topology searched by the genome:
/// LSTM, optional LSTM, optional Dense, optional Dense, output.
ArchitectureSpec make_five_layer_spec(std::size_t timesteps,
                                      std::size_t lstm1,
                                      std::size_t lstm2,
                                      std::size_t dense1,
                                      std::size_t dense2,
                                      Activation dense_activation,
                                      Activation output_activation,
                                      bool lstm2_present = true,
                                      bool dense1_present = true,
                                      bool dense2_present = true);

} // namespace nasbba
