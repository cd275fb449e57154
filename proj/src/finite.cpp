#include "ism/finite.hpp"

#include <cmath>

namespace ism {

std::string to_string(Length len) {
  return len.is_finite() ? std::to_string(len.value) : std::string("inf");
}

double length_gap(Length a, Length b) {
  if (!a.is_finite() && !b.is_finite()) return 0.0;
  if (!a.is_finite() || !b.is_finite()) {
    return std::numeric_limits<double>::infinity();
  }
  return std::abs(static_cast<double>(a.value - b.value));
}

void FiniteProblem::validate() const {
  if (alphabet.empty()) {
    throw std::invalid_argument("finite problem: empty alphabet");
  }
  if (!estimand) throw std::invalid_argument("finite problem: no estimand");
}

void check_enumeration_size(std::size_t alphabet_size, std::size_t n) {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    total *= alphabet_size;
    if (total > kMaxEnumeration) {
      throw EnumerationTooLarge(
          "enumeration of " + std::to_string(alphabet_size) + "^" +
          std::to_string(n) + " datasets exceeds the cap of " +
          std::to_string(kMaxEnumeration));
    }
  }
}

void for_each_dataset(std::span<const double> alphabet, std::size_t n,
                      const std::function<void(std::span<const double>)>& fn) {
  check_enumeration_size(alphabet.size(), n);
  if (alphabet.empty()) return;
  std::vector<std::size_t> index(n, 0);
  std::vector<double> data(n, alphabet[0]);
  while (true) {
    fn(data);
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++index[pos] < alphabet.size()) {
        data[pos] = alphabet[index[pos]];
        break;
      }
      index[pos] = 0;
      data[pos] = alphabet[0];
      if (pos == 0) return;
    }
    if (n == 0) return;
  }
}

namespace {

// Recursively assigns a different alphabet value to each chosen position.
bool assign_values(std::vector<double>& work, std::span<const double> original,
                   std::span<const double> alphabet,
                   const std::vector<std::size_t>& positions, std::size_t slot,
                   const std::function<bool(std::span<const double>)>& fn) {
  if (slot == positions.size()) return fn(work);
  const std::size_t pos = positions[slot];
  for (double value : alphabet) {
    if (value == original[pos]) continue;
    work[pos] = value;
    if (assign_values(work, original, alphabet, positions, slot + 1, fn)) {
      work[pos] = original[pos];
      return true;
    }
  }
  work[pos] = original[pos];
  return false;
}

}  // namespace

bool for_each_at_distance(
    std::span<const double> dataset, std::span<const double> alphabet,
    std::size_t k, const std::function<bool(std::span<const double>)>& fn) {
  const std::size_t n = dataset.size();
  if (k > n) return false;
  std::vector<double> work(dataset.begin(), dataset.end());
  if (k == 0) return fn(work);
  // Walk k-subsets of positions in lexicographic order.
  std::vector<std::size_t> positions(k);
  for (std::size_t i = 0; i < k; ++i) positions[i] = i;
  while (true) {
    if (assign_values(work, dataset, alphabet, positions, 0, fn)) return true;
    std::size_t i = k;
    while (i > 0 && positions[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return false;
    ++positions[i - 1];
    for (std::size_t j = i; j < k; ++j) positions[j] = positions[j - 1] + 1;
  }
}

}  // namespace ism
