#pragma once

#include <cmath>
#include <cstdint>

#include "hjlab/core.hpp"
#include "hjlab/lattice.hpp"
#include "hjlab/rng.hpp"

namespace hjlab {

//! Stationary random potential with finite range of dependence: i.i.d.
//! uniform values in [-1, 1] at the integer points, bilinear in between.
//! Values separated by more than two units are independent, |V| <= 1 and
//! V is 2-Lipschitz in each coordinate. The law is Z^2-stationary; the
//! homogenization harness uses it because the saddle environment mixes
//! too weakly for the homogenization theory to apply.
class FiniteRangeField {
 public:
  explicit FiniteRangeField(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  //! Value at the integer point (i, j).
  double Node(std::int64_t i, std::int64_t j) const {
    auto const k = MakePoint({static_cast<std::int32_t>(i), static_cast<std::int32_t>(j)});
    auto const bits = Mix64(PointKey(seed_, Stream::kDatum, k, 2));
    return 2.0 * static_cast<double>(bits >> 11) * 0x1.0p-53 - 1.0;
  }

  double operator()(Vec2 x) const {
    double const fx = std::floor(x.x);
    double const fy = std::floor(x.y);
    double const a = x.x - fx;
    double const b = x.y - fy;
    auto const i = static_cast<std::int64_t>(fx);
    auto const j = static_cast<std::int64_t>(fy);
    return (1 - a) * (1 - b) * Node(i, j) + a * (1 - b) * Node(i + 1, j) +
           (1 - a) * b * Node(i, j + 1) + a * b * Node(i + 1, j + 1);
  }

 private:
  std::uint64_t seed_;
};

//! Folds x into [0, L] by even reflection with period 2L. Composing a
//! field with this map per coordinate gives a continuous 2L-periodic
//! field that agrees with the original on the window [0, L]^2.
inline double ReflectIntoWindow(double x, double L) {
  double p = std::fmod(x, 2 * L);
  if (p < 0) p += 2 * L;
  return p <= L ? p : 2 * L - p;
}

}  // namespace hjlab
