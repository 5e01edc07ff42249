#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace travelemb {

/// A rectangular text table rendered as markdown or CSV.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string markdown() const;
  std::string csv() const;
};

/// Fixed-point formatting independent of the global locale. Non-finite
/// values print as "nan", "inf" or "-inf".
std::string fixed(double value, int decimals);

/// Shortest round-trip representation.
std::string shortest(double value);

std::string csv_escape(std::string_view field);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace travelemb
