#pragma once

// Hybrid genome: [existence bits | activation bits | gray-coded unit counts | gray-coded timesteps]
//
// The default layout evolves the five-layer forecaster
//   LSTM1 (fixed) -> LSTM2 -> Dense1 -> Dense2 -> Output (fixed)
// with 3 existence bits, 2 activation bits (dense pair, output), unit fields of
// 5/5/6/6 bits and a 5-bit timestep field: 32 bits in total.

#include "nasbba/architecture.hpp"
#include "nasbba/bit_vector.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace nasbba::genome {

struct GenomeLayout
{
  /// Layers whose existence is evolved (all but the fixed first and last layer).
  std::size_t optional_layer_count = 3;
  /// How many of the optional layers (taken first) are recurrent; the rest are dense.
  std::size_t optional_recurrent_count = 1;
  std::size_t activation_slot_count = 2;
  /// One entry per unit-bearing layer: the fixed LSTM followed by each optional layer.
  std::vector<std::size_t> unit_bit_widths{5, 5, 6, 6};
  std::vector<std::size_t> unit_caps{31, 31, 63, 63};
  std::size_t timestep_bit_width = 5;
  std::size_t timestep_cap = 31;

  std::vector<std::string> problems() const;
  void validate() const;

  bool operator==(const GenomeLayout&) const = default;
};

GenomeLayout default_layout();

/// L = l + a + sum(unit widths) + timestep width.
std::size_t genome_length(const GenomeLayout& layout);

/// Smallest width w with 2^w - 1 >= cap, i.e. ceil(log2(cap + 1)).
std::size_t bits_for_cap(std::size_t cap);

/// Reflected binary gray code, most significant bit first. Throws std::out_of_range if n >= 2^width.
BitVector gray_encode(std::uint64_t n, std::size_t width);
std::uint64_t gray_decode(const BitVector& bits);

/// Total mapping: zero-valued fields clamp to 1, values above a cap clamp to the cap.
ArchitectureSpec decode(const BitVector& genome, const GenomeLayout& layout = default_layout());

/// Throws std::invalid_argument if the spec does not fit the layout (topology,
/// caps, or mixed dense activations).
BitVector encode(const ArchitectureSpec& spec, const GenomeLayout& layout = default_layout());

} // namespace nasbba::genome
