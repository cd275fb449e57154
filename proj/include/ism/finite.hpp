#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ism/core.hpp"

namespace ism {

// Inverse-sensitivity length: a nonnegative integer or infinity (target
// unreachable). Ordered so that infinity compares greater than any value.
struct Length {
  static constexpr std::int64_t kInfinite =
      std::numeric_limits<std::int64_t>::max();

  std::int64_t value = 0;

  static constexpr Length infinite() { return Length{kInfinite}; }
  constexpr bool is_finite() const { return value != kInfinite; }
  // +inf for an infinite length.
  double as_double() const {
    return is_finite() ? static_cast<double>(value)
                       : std::numeric_limits<double>::infinity();
  }

  friend constexpr auto operator<=>(Length, Length) = default;
};

std::string to_string(Length len);

// |a - b|, infinite when exactly one side is infinite and zero when both are.
double length_gap(Length a, Length b);

using Estimand = std::function<double(std::span<const double>)>;

// A finite data domain alphabet^n with an estimand and a grid of targets.
struct FiniteProblem {
  std::vector<double> alphabet;
  std::size_t n = 0;
  Estimand estimand;
  std::vector<double> target_grid;

  void validate() const;
  double evaluate(std::span<const double> dataset) const {
    return estimand(dataset);
  }
};

// Largest |alphabet|^n the exhaustive oracles will enumerate.
inline constexpr std::uint64_t kMaxEnumeration = 100000;

class EnumerationTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws EnumerationTooLarge when |alphabet|^n exceeds kMaxEnumeration.
void check_enumeration_size(std::size_t alphabet_size, std::size_t n);

// Visits every dataset in alphabet^n in lexicographic index order.
void for_each_dataset(std::span<const double> alphabet, std::size_t n,
                      const std::function<void(std::span<const double>)>& fn);

// Visits every dataset at Hamming distance exactly k from `dataset`, with
// replacement values drawn from `alphabet`. Returning true from fn stops
// the walk early; the function returns whether it was stopped.
bool for_each_at_distance(
    std::span<const double> dataset, std::span<const double> alphabet,
    std::size_t k, const std::function<bool(std::span<const double>)>& fn);

}  // namespace ism
