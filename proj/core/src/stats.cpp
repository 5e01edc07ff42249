#include "travelemb/stats.hpp"

#include "travelemb/common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

namespace travelemb {

std::string_view alternative_name(Alternative alt) {
  switch (alt) {
    case Alternative::train: return "train";
    case Alternative::swissmetro: return "swissmetro";
    case Alternative::car: return "car";
  }
  return "?";
}

std::string_view alternative_suffix(Alternative alt) {
  switch (alt) {
    case Alternative::train: return "Train";
    case Alternative::swissmetro: return "SM";
    case Alternative::car: return "Car";
  }
  return "?";
}

Alternative parse_alternative(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "train") return Alternative::train;
  if (lower == "swissmetro" || lower == "sm") return Alternative::swissmetro;
  if (lower == "car") return Alternative::car;
  throw Error("unknown alternative '" + std::string(text) + "'");
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error("Rng::index: empty range");
  const std::uint64_t bound = n;
  // Reject the partial top bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return static_cast<std::size_t>(draw % bound);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double two_sided_p(double z) {
  if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

const char* significance_stars(double p) {
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

}  // namespace stats
}  // namespace travelemb
