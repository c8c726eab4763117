#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nasbba::detail {

/// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line)
{
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

/// Line reader that strips CR and a leading UTF-8 BOM and counts lines from 1.
class CsvReader
{
public:
  explicit CsvReader(std::istream& in)
    : in_(in)
  {
  }

  std::optional<std::vector<std::string>> next()
  {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (line_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0)
        line.erase(0, 3);
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos)
        continue;
      return split_csv_line(line);
    }
    return std::nullopt;
  }

  std::size_t line() const noexcept { return line_; }

private:
  std::istream& in_;
  std::size_t line_ = 0;
};

inline std::optional<std::size_t> find_column(const std::vector<std::string>& header, std::string_view name)
{
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name)
      return i;
  return std::nullopt;
}

} // namespace nasbba::detail
