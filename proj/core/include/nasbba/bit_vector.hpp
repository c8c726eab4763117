#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nasbba {

/// Fixed-length bit string used as the search-space point of the optimizer.
class BitVector
{
public:
  BitVector() = default;
  explicit BitVector(std::size_t length, bool value = false);

  /// Parses a string of '0'/'1' characters. Throws std::invalid_argument otherwise.
  static BitVector parse(std::string_view text);

  std::size_t size() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  bool at(std::size_t i) const;
  void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }
  void flip(std::size_t i) { bits_[i] ^= 1; }

  std::size_t count_ones() const noexcept;
  std::string to_string() const;

  /// Appends the bits of `other` to the end of this vector.
  void append(const BitVector& other);
  BitVector slice(std::size_t offset, std::size_t length) const;

  auto operator<=>(const BitVector&) const = default;

private:
  std::vector<std::uint8_t> bits_;
};

std::size_t hamming_distance(const BitVector& a, const BitVector& b);

} // namespace nasbba
