#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "hjlab/lattice.hpp"
#include "hjlab/mixing.hpp"
#include "hjlab/rng.hpp"

namespace {

using hjlab::MakePoint;

// Random probability table of the given shape.
std::vector<double> RandomLaw(std::size_t cells, std::uint64_t key) {
  auto rng = hjlab::KeyedRng(key);
  auto p = std::vector<double>(cells);
  double s = 0.0;
  for (auto& x : p) {
    x = rng.Uniform();
    s += x;
  }
  for (auto& x : p) x /= s;
  return p;
}

// sup over every event pair, by enumerating both sides.
double BruteAlpha(std::vector<double> const& p, std::size_t rows, std::size_t cols) {
  double best = 0.0;
  for (std::uint64_t e = 0; e < (std::uint64_t{1} << rows); ++e) {
    for (std::uint64_t f = 0; f < (std::uint64_t{1} << cols); ++f) {
      double pe = 0.0;
      double pf = 0.0;
      double pef = 0.0;
      for (std::size_t a = 0; a < rows; ++a) {
        for (std::size_t b = 0; b < cols; ++b) {
          bool const in_e = (e >> a) & 1;
          bool const in_f = (f >> b) & 1;
          double const v = p[a * cols + b];
          if (in_e) pe += v;
          if (in_f) pf += v;
          if (in_e && in_f) pef += v;
        }
      }
      best = std::max(best, std::fabs(pef - pe * pf));
    }
  }
  return best;
}

TEST(ExactAlpha, MatchesEnumerationOfAllEventPairs) {
  for (std::uint64_t key = 1; key <= 5; ++key) {
    auto const p = RandomLaw(9, key);
    EXPECT_NEAR(hjlab::ExactAlpha(p, 3, 3), BruteAlpha(p, 3, 3), 1e-15);
  }
  auto const q = RandomLaw(5 * 4, 11);
  EXPECT_NEAR(hjlab::ExactAlpha(q, 5, 4), BruteAlpha(q, 5, 4), 1e-15);
}

TEST(ExactAlpha, ProductLawIsZeroAndDiagonalLawIsMaxBernoulliVariance) {
  auto const a = RandomLaw(3, 2);
  auto const b = RandomLaw(3, 3);
  auto prod = std::vector<double>(9);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) prod[i * 3 + j] = a[i] * b[j];
  }
  EXPECT_NEAR(hjlab::ExactAlpha(prod, 3, 3), 0.0, 1e-16);

  auto diag = std::vector<double>(9, 0.0);
  for (std::size_t i = 0; i < 3; ++i) diag[i * 3 + i] = a[i];
  double expect = 0.0;
  for (int e = 0; e < 8; ++e) {
    double pe = 0.0;
    for (int i = 0; i < 3; ++i) pe += ((e >> i) & 1) ? a[i] : 0.0;
    expect = std::max(expect, pe * (1.0 - pe));
  }
  EXPECT_NEAR(hjlab::ExactAlpha(diag, 3, 3), expect, 1e-15);
  EXPECT_LE(expect, 0.25);
}

TEST(AlphaFinite, ZeroOffsetGivesOnePointBernoulliBound) {
  auto o = hjlab::AlphaOptions();
  o.cap_exp = 6;
  o.bootstrap = 50;
  auto const est = hjlab::AlphaFinite({MakePoint({0, 0})}, MakePoint({0, 0}), 3000, 21, o);
  // All mass sits on the diagonal; the estimate is the largest
  // Bernoulli variance of an event of the one-point law.
  auto const p = est.JointLaw();
  double pm[3] = {};
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      if (a != b) {
        EXPECT_EQ(est.counts[a * 3 + b], 0u);
      }
      pm[a] += p[a * 3 + b];
    }
  }
  double expect = 0.0;
  for (int e = 0; e < 8; ++e) {
    double pe = 0.0;
    for (int i = 0; i < 3; ++i) pe += ((e >> i) & 1) ? pm[i] : 0.0;
    expect = std::max(expect, pe * (1.0 - pe));
  }
  EXPECT_NEAR(est.alpha, expect, 1e-15);
  EXPECT_GT(est.alpha, 0.0);
  EXPECT_LE(est.ci_lo, est.ci_hi);
  EXPECT_LE(est.alpha, 0.25);
}

TEST(AlphaFinite, DegenerateFieldGivesZero) {
  // With cap 2 every X and Y equals 2, no cube survives and V_* = 0.
  auto o = hjlab::AlphaOptions();
  o.cap_exp = 1;
  o.bootstrap = 20;
  auto const est = hjlab::AlphaFinite({MakePoint({0, 0}), MakePoint({1, 0})}, MakePoint({5, 3}), 200, 3, o);
  EXPECT_EQ(est.atoms, 9u);
  EXPECT_EQ(est.counts[4 * 9 + 4], 200u);
  EXPECT_EQ(est.alpha, 0.0);
  EXPECT_EQ(est.ci_lo, 0.0);
  EXPECT_EQ(est.ci_hi, 0.0);
}

TEST(AlphaFinite, WorkerCountDoesNotChangeTheEstimate) {
  auto o = hjlab::AlphaOptions();
  o.cap_exp = 6;
  o.bootstrap = 30;
  auto const one = hjlab::AlphaFinite({MakePoint({0, 0})}, MakePoint({4, 0}), 1500, 8, o);
  o.workers = 3;
  auto const three = hjlab::AlphaFinite({MakePoint({0, 0})}, MakePoint({4, 0}), 1500, 8, o);
  EXPECT_EQ(one.counts, three.counts);
  EXPECT_EQ(one.alpha, three.alpha);
  EXPECT_EQ(one.ci_lo, three.ci_lo);
  EXPECT_EQ(one.ci_hi, three.ci_hi);
}

TEST(AlphaFinite, RejectsBadArguments) {
  auto const o = hjlab::AlphaOptions();
  auto const three = std::vector{MakePoint({0, 0}), MakePoint({1, 0}), MakePoint({2, 0})};
  EXPECT_THROW(hjlab::AlphaFinite(three, MakePoint({1, 0}), 10, 1, o), hjlab::InvalidGeometry);
  EXPECT_THROW(hjlab::AlphaFinite({}, MakePoint({1, 0}), 10, 1, o), hjlab::InvalidGeometry);
  EXPECT_THROW(hjlab::AlphaFinite({MakePoint({0, 0})}, MakePoint({2147483000, 0}), 10, 1, o),
               hjlab::TruncationViolation);
}

TEST(FitDecay, ExactPowerLawAndTargets) {
  auto series = std::vector<std::pair<double, double>>();
  for (double r : {8.0, 16.0, 32.0, 64.0}) series.emplace_back(r, 3.0 / r);
  auto const fit = hjlab::FitDecay(series);
  EXPECT_NEAR(fit.gamma, 1.0, 1e-12);
  EXPECT_NEAR(fit.half_width, 0.0, 1e-9);
  EXPECT_NEAR(fit.log_c, std::log(3.0), 1e-12);
  EXPECT_DOUBLE_EQ(hjlab::MixingOrder(2, 1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(hjlab::MixingOrder(3, 1), 3.0 / 4.0);
}

TEST(FitDecay, NoisyPowerLawCoveredByInterval) {
  auto rng = hjlab::KeyedRng(4);
  auto series = std::vector<std::pair<double, double>>();
  for (double r : {4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
    series.emplace_back(r, std::pow(r, -0.7) * std::exp(0.05 * (rng.Uniform() - 0.5)));
  }
  auto const fit = hjlab::FitDecay(series);
  EXPECT_GT(fit.half_width, 0.0);
  EXPECT_LE(std::fabs(fit.gamma - 0.7), fit.half_width + 0.02);
}

TEST(FitDecay, RejectsShortOrDegenerateSeries) {
  EXPECT_THROW(hjlab::FitDecay({{8, 0.1}, {16, 0.05}, {64, 0.01}}), hjlab::InsufficientData);
  EXPECT_THROW(hjlab::FitDecay({{8, 0.1}, {10, 0.08}, {12, 0.07}, {16, 0.05}}), hjlab::InsufficientData);
  EXPECT_THROW(hjlab::FitDecay({{8, 0.1}, {16, 0.0}, {32, 0.02}, {64, 0.01}}), hjlab::InsufficientData);
}

TEST(Events, ClosedFormsAgainstIndependentCounts) {
  double const theta = 0.5;
  auto const table = hjlab::EventFrequencies(theta, 2, 5, 1, 9);
  auto const law = hjlab::DyadicLaw(2);
  for (auto const& row : table.rows) {
    auto const w = static_cast<int>(theta * static_cast<double>(row.T));
    std::uint64_t count = 0;
    for (int a = -w; a <= w; ++a) {
      for (int b = -w; b <= w; ++b) {
        int const r = std::max(std::abs(a), std::abs(b));
        if (2 * r > w && r <= w) ++count;
      }
    }
    EXPECT_EQ(row.annulus_points, count);
    double const px = 3.0 / std::pow(2.0, 2 * row.n);
    EXPECT_NEAR(row.exact_c, 1.0 - std::pow(1.0 - px, static_cast<double>(count)), 1e-13);
    double const orthant = 1.0 - std::pow(1.0 - 3.0 / (row.T * row.T), theta * theta * row.T * row.T * 0.75);
    EXPECT_NEAR(row.exact_c_orthant, orthant, 1e-13);
    EXPECT_GE(row.exact_c, row.lower_bound_c);
    EXPECT_NEAR(row.lower_bound_c, 1.0 - std::exp(-9.0 * theta * theta), 1e-15);

    // P(D_n) as a plain product of P(Y < bound) summed from the pmf.
    auto const cap = std::int64_t{1} << table.cap_exp;
    double prod = 1.0;
    for (std::int64_t k2 = -cap; k2 <= cap; ++k2) {
      auto const bound = std::max<std::int64_t>(row.T, std::abs(k2));
      double below = 0.0;
      for (int e = 1; e <= table.cap_exp; ++e) {
        if ((std::int64_t{1} << e) < bound) below += law.TruncatedPmf(e, table.cap_exp);
      }
      prod *= std::pow(below, static_cast<double>(2 * row.T + 1));
    }
    EXPECT_NEAR(row.exact_d / prod, 1.0, 1e-9);
    EXPECT_GT(row.exact_d, 0.0);
  }
}

TEST(Events, FrequenciesMatchClosedFormsAndImplicationHolds) {
  std::size_t const N = 400;
  auto const table = hjlab::EventFrequencies(0.5, 2, 5, N, 31);
  auto const nr = table.rows.size();
  for (std::size_t i = 0; i < nr; ++i) {
    auto const& row = table.rows[i];
    double const sc = std::sqrt(row.exact_c * (1 - row.exact_c) / N);
    EXPECT_LE(std::fabs(row.count_c / double(N) - row.exact_c), 4 * sc + 1.0 / N) << row.n;
    double const so = std::sqrt(row.exact_c_orthant * (1 - row.exact_c_orthant) / N);
    EXPECT_LE(std::fabs(row.count_c_orthant / double(N) - row.exact_c_orthant), 4 * so) << row.n;
    EXPECT_EQ(row.implication_violations, 0u) << row.n;
    // X values are shared, so C_n is the same on the conditioned draw.
    EXPECT_EQ(row.count_c_given_d, row.count_c);
    EXPECT_GE(row.count_b_given_d, row.count_c_given_d);
    std::uint64_t c = 0;
    for (std::size_t r = 0; r < N; ++r) c += table.Has(r, i, hjlab::kEventC);
    EXPECT_EQ(c, row.count_c);
  }
}

TEST(Events, IndicatorsOfCAreUncorrelatedAcrossScales) {
  std::size_t const N = 400;
  auto const table = hjlab::EventFrequencies(0.5, 3, 5, N, 77);
  for (std::size_t i = 0; i + 1 < table.rows.size(); ++i) {
    double pa = 0, pb = 0, pab = 0;
    for (std::size_t r = 0; r < N; ++r) {
      bool const a = table.Has(r, i, hjlab::kEventC);
      bool const b = table.Has(r, i + 1, hjlab::kEventC);
      pa += a;
      pb += b;
      pab += a && b;
    }
    pa /= N;
    pb /= N;
    pab /= N;
    double const cov = pab - pa * pb;
    double const sd = std::sqrt(pa * (1 - pa) * pb * (1 - pb) / N);
    EXPECT_LE(std::fabs(cov), 4 * sd + 1e-12);
  }
}

TEST(Events, ConditioningEnforcesClearance) {
  int unconditioned = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto lat = hjlab::KeyedLattice(2, 1, 6, s);
    unconditioned += hjlab::detail::ClearanceHolds(lat, 16);
    hjlab::detail::ConditionOnClearance(lat, 16);
    EXPECT_TRUE(hjlab::detail::ClearanceHolds(lat, 16));
  }
  // Unconditioned, D_n has probability of order 1e-10.
  EXPECT_EQ(unconditioned, 0);
}

TEST(Events, HorizontalRunAgreesWithStoredLatticeMarks) {
  // Oracle: marks from the scatter pass of a stored box, then coverage of
  // the window checked at half-integer resolution.
  int const cap_exp = 5;
  std::int64_t const T = 8;
  std::int64_t const w = 4;
  int hits = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    auto const keyed = hjlab::KeyedLattice(2, 1, cap_exp, s);
    bool const fast = hjlab::detail::HorizontalRunNearOrigin(keyed, w, T);

    auto const box = hjlab::BuildLattice(2, 1, 64, cap_exp, s);
    bool slow = false;
    for (std::int64_t k2 = -w; k2 <= w && !slow; ++k2) {
      auto covered = std::vector<bool>(2 * 4 * (w + T) + 1, false);  // half-integer grid
      auto const off = 2 * (w + T);
      for (std::int64_t j1 = -(w + T / 2 + 16); j1 <= w + T / 2 + 16; ++j1) {
        auto const j = MakePoint({static_cast<std::int32_t>(j1), static_cast<std::int32_t>(k2)});
        if (box.Mark(j) != -1) continue;
        auto const half = (std::int64_t{1} << box.XExp(j)) / 2;
        for (auto x = 2 * (j1 - half); x <= 2 * (j1 + half); ++x) {
          if (x + off >= 0 && x + off < static_cast<std::int64_t>(covered.size())) covered[x + off] = true;
        }
      }
      for (std::int64_t k1 = -w; k1 <= w && !slow; ++k1) {
        bool all = true;
        for (auto x = 2 * (k1 - T / 2); x <= 2 * (k1 + T / 2); ++x) all = all && covered[x + off];
        slow = all;
      }
    }
    EXPECT_EQ(fast, slow) << "seed " << s;
    hits += fast;
  }
  EXPECT_GT(hits, 0);
}

TEST(Events, RejectsInvalidGeometry) {
  EXPECT_THROW(hjlab::EventFrequencies(0.75, 3, 4, 10, 1), hjlab::InvalidGeometry);
  EXPECT_THROW(hjlab::EventFrequencies(0.3, 3, 4, 10, 1), hjlab::InvalidGeometry);
  // theta T_{n-1} = 1/2 at n = 2 for theta = 1/4.
  EXPECT_THROW(hjlab::EventFrequencies(0.25, 2, 4, 10, 1), hjlab::InvalidGeometry);
  EXPECT_THROW(hjlab::EventFrequencies(0.5, 4, 3, 10, 1), hjlab::InvalidGeometry);
  auto o = hjlab::EventOptions();
  o.cap_exp = 4;
  EXPECT_THROW(hjlab::EventFrequencies(0.5, 2, 4, 10, 1, o), hjlab::InvalidGeometry);
  EXPECT_THROW(hjlab::EventFrequencies(0.5, 2, 12, 10, 1), hjlab::InvalidGeometry);
}

}  // namespace
