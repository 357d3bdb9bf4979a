#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace pwdts {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Random engine used by every sampler in the library.
using Rng = std::mt19937_64;

/// Bad input: wrong shapes, out-of-range parameters, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The data are valid but the requested quantity does not exist
/// (zero variance, nonpositive degrees of freedom, singular precision).
class DegenerateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Numerical failure inside an otherwise well-posed computation.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Independent, reproducible stream `stream` derived from `seed`.
/// Stream assignment never depends on thread count.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace pwdts
