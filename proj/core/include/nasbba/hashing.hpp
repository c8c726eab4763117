#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace nasbba {

/// SplitMix64 finalizer. Used to derive independent RNG stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive combination of a root seed with any number of integers.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> parts) noexcept
{
  std::uint64_t h = splitmix64(root);
  for (auto p : parts)
    h = splitmix64(h ^ splitmix64(p));
  return h;
}

/// 64-bit FNV-1a over raw bytes; stable across platforms.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lower-case hex SHA-256 of a file's contents. Throws std::runtime_error if unreadable.
std::string sha256_file(const std::filesystem::path& path);

} // namespace nasbba
