#pragma once

// Seeded Gaussian matrices that are reproducible across standard libraries.
//
// std::mt19937_64 has a fully specified output sequence, but the standard
// distributions do not, so the mapping to doubles is done here:
//   uniform  = (bits >> 11) * 2^-53               in [0, 1)
//   gaussian = sqrt(-2 ln(1 - u1)) cos(2 pi u2)   (Box-Muller, one draw per pair)

#include <cmath>
#include <cstdint>
#include <random>

#include "eattn/dense.hpp"

namespace eattn {

class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double standard_normal() {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  /// rows x cols matrix, filled row-major with N(0, stddev^2) draws.
  DenseMatrix matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
    DenseMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = stddev * standard_normal();
    }
    return m;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace eattn
