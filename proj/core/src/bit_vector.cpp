#include "nasbba/bit_vector.hpp"

#include <algorithm>
#include <stdexcept>

namespace nasbba {

BitVector::BitVector(std::size_t length, bool value)
  : bits_(length, value ? 1 : 0)
{
}

BitVector BitVector::parse(std::string_view text)
{
  BitVector out(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '1') {
      out.bits_[i] = 1;
    } else if (text[i] != '0') {
      throw std::invalid_argument("bit string contains a character other than 0/1 at position " +
                                  std::to_string(i));
    }
  }
  return out;
}

bool BitVector::at(std::size_t i) const
{
  if (i >= bits_.size())
    throw std::out_of_range("bit index out of range");
  return bits_[i] != 0;
}

std::size_t BitVector::count_ones() const noexcept
{
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string BitVector::to_string() const
{
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i])
      s[i] = '1';
  return s;
}

void BitVector::append(const BitVector& other)
{
  bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
}

BitVector BitVector::slice(std::size_t offset, std::size_t length) const
{
  if (offset + length > bits_.size())
    throw std::out_of_range("bit slice out of range");
  BitVector out;
  out.bits_.assign(bits_.begin() + static_cast<std::ptrdiff_t>(offset),
                   bits_.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return out;
}

std::size_t hamming_distance(const BitVector& a, const BitVector& b)
{
  if (a.size() != b.size())
    throw std::invalid_argument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d += a[i] != b[i] ? 1 : 0;
  return d;
}

} // namespace nasbba
