#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <vector>

#include "hjlab/core.hpp"

namespace hjlab {

//! Law P(X = 2^n) = alpha_d 2^{-dn} for n >= 1, with alpha_d = 2^d - 1.
struct DyadicLaw {
  int d = 2;

  explicit DyadicLaw(int dim) : d(dim) {
    if (d < 1 || d > 16) {
      throw InvalidGeometry(Msg("dyadic law needs 1 <= d <= 16, got ", d));
    }
  }

  double alpha() const { return std::ldexp(1.0, d) - 1.0; }

  //! Untruncated probability of the value 2^n.
  double Pmf(int n) const {
    return n < 1 ? 0.0 : alpha() * std::ldexp(1.0, -d * n);
  }

  //! Untruncated probability P(X >= 2^n) = 2^{-d(n-1)}.
  double Tail(int n) const {
    return n <= 1 ? 1.0 : std::ldexp(1.0, -d * (n - 1));
  }

  //! Probability of 2^n once the law is capped at 2^cap_exp: the tail
  //! mass at and above the cap is moved onto the cap.
  double TruncatedPmf(int n, int cap_exp) const {
    if (n < 1 || n > cap_exp) return 0.0;
    return n == cap_exp ? Tail(cap_exp) : Pmf(n);
  }

  //! Mass moved onto the cap, i.e. P(X > 2^cap_exp) under the true law.
  double TruncationTailMass(int cap_exp) const { return Tail(cap_exp + 1); }

  //! Largest cap exponent the 64-bit sampler can resolve exactly.
  int MaxCapExp() const { return 64 / d; }
};

//! Maps one 64-bit uniform word to the exponent of a dyadic sample.
//! The number of leading zero bits L of a uniform word has
//! P(L >= j) = 2^{-j}, so floor(L / d) + 1 has the law of log2 X.
//! Capped at @a cap_exp; the all-zero word lands on the cap.
inline int DyadicExponentFromBits(std::uint64_t bits, int d, int cap_exp) {
  int const lz = std::countl_zero(bits);
  int const n = lz / d + 1;
  return n < cap_exp ? n : cap_exp;
}

//! Draws one exponent from @a rng (any 64-bit generator).
template <typename Rng>
int SampleDyadicExponent(Rng& rng, DyadicLaw const& law, int cap_exp) {
  if (cap_exp < 1 || cap_exp > law.MaxCapExp()) {
    throw InvalidGeometry(Msg("cap exponent ", cap_exp, " outside [1, ",
                              law.MaxCapExp(), "]"));
  }
  return DyadicExponentFromBits(rng(), law.d, cap_exp);
}

//! Draws one dyadic value (2^n) from @a rng.
template <typename Rng>
std::uint64_t SampleDyadic(Rng& rng, DyadicLaw const& law, std::uint64_t cap) {
  if (!IsDyadic(cap)) {
    throw InvalidGeometry(Msg("cap ", cap, " is not a power of two >= 2"));
  }
  return std::uint64_t{1} << SampleDyadicExponent(rng, law, Log2(cap));
}

//! Draws an exponent conditioned on X < 2^bound_exp (bound_exp >= 2),
//! by inverting the truncated CDF on a uniform word.
inline int DyadicExponentBelow(std::uint64_t bits, int d, int cap_exp,
                               int bound_exp) {
  DyadicLaw const law(d);
  int const top = std::min(bound_exp - 1, cap_exp);
  double total = 0.0;
  for (int n = 1; n <= top; ++n) total += law.TruncatedPmf(n, cap_exp);
  double const u = static_cast<double>(bits >> 11) * 0x1.0p-53 * total;
  double acc = 0.0;
  for (int n = 1; n < top; ++n) {
    acc += law.TruncatedPmf(n, cap_exp);
    if (u < acc) return n;
  }
  return top;
}

//! Chi-square statistic of observed exponent counts (index n = 1..cap)
//! against the truncated law. Cells with expected count below
//! @a min_expected are pooled into the last cell. Returns the statistic
//! and the number of degrees of freedom.
struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
};

inline ChiSquare DyadicChiSquare(std::vector<std::uint64_t> const& counts,
                                 DyadicLaw const& law, int cap_exp,
                                 double min_expected = 5.0) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  auto stat = ChiSquare();
  double pooled_obs = 0.0;
  double pooled_exp = 0.0;
  int cells = 0;
  for (int n = 1; n <= cap_exp; ++n) {
    double const obs =
        n < static_cast<int>(counts.size()) ? static_cast<double>(counts[n]) : 0.0;
    double const expected = static_cast<double>(total) *
                            law.TruncatedPmf(n, cap_exp);
    if (expected >= min_expected && pooled_exp == 0.0) {
      stat.statistic += (obs - expected) * (obs - expected) / expected;
      ++cells;
    } else {
      pooled_obs += obs;
      pooled_exp += expected;
    }
  }
  if (pooled_exp > 0.0) {
    stat.statistic +=
        (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  stat.dof = cells - 1;
  return stat;
}

}  // namespace hjlab
