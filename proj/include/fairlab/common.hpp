#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace fairlab {

// Violation of a documented precondition or input contract.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values or other numeric breakdowns detected at runtime.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

inline void require_finite(double value, const std::string& what) {
  if (!std::isfinite(value)) throw NumericError(what + " is not finite");
}

using Rng = std::mt19937_64;

// splitmix64 finalizer. Seed streams for env/policy/update are derived from
// one master seed so runs stay reproducible while streams stay independent.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return mix_seed(base ^ mix_seed(stream + 0x1000) ^ mix_seed(index));
}

}  // namespace fairlab
