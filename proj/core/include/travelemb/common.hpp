#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace travelemb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Alternatives of the Swissmetro mode choice, in choice-index order.
enum class Alternative : int { train = 0, swissmetro = 1, car = 2 };

inline constexpr int kNumAlternatives = 3;

using Availability = std::array<bool, kNumAlternatives>;

/// Long name used in config files ("train", "swissmetro", "car").
std::string_view alternative_name(Alternative alt);
/// Short suffix used in coefficient labels ("Train", "SM", "Car").
std::string_view alternative_suffix(Alternative alt);
/// Accepts either the long name or the label suffix, case-insensitive.
Alternative parse_alternative(std::string_view text);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Portable random stream. The standard distributions are implementation
// defined, so everything that must reproduce across platforms draws from the
// raw engine through these helpers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// 64-bit FNV-1a, used for config fingerprints in manifests and banners.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace travelemb
