#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "hjlab/core.hpp"
#include "hjlab/dyadic.hpp"
#include "hjlab/lattice.hpp"
#include "hjlab/potential.hpp"
#include "hjlab/rng.hpp"

namespace hjlab {

namespace detail {

//! Runs body(index, worker) for index in [0, n) on @a workers threads.
//! Indices are handed out through an atomic counter; callers write
//! results into per-index or per-worker slots so the outcome does not
//! depend on scheduling.
template <typename Body>
void ParallelIndices(std::size_t n, int workers, Body&& body) {
  workers = std::max(1, workers);
  auto next = std::atomic<std::size_t>(0);
  auto run = [&](std::size_t w) {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) body(i, w);
  };
  if (workers == 1) {
    run(0);
    return;
  }
  auto pool = std::vector<std::thread>();
  for (int w = 0; w < workers; ++w) pool.emplace_back(run, static_cast<std::size_t>(w));
  for (auto& th : pool) th.join();
}

inline std::size_t Pow3(std::size_t k) {
  std::size_t p = 1;
  while (k-- > 0) p *= 3;
  return p;
}

}  // namespace detail

//! Mixing order dm/(d+m) of the lattice field.
inline double MixingOrder(int d, int m) {
  return static_cast<double>(d * m) / static_cast<double>(d + m);
}

//! Exact alpha coefficient of a joint law on (atoms of A) x (atoms of B),
//! given as a row-major matrix p[a * cols + b] of probabilities.
//! sup over E, F of |P(E x F) - P(E) P(F)| is evaluated exhaustively over
//! E. For fixed E the covariance is a sum over b in F of
//! c_b = sum_{a in E} (p_ab - p_a q_b), so the best F collects all
//! positive (or all negative) c_b.
inline double ExactAlpha(std::vector<double> const& p, std::size_t rows, std::size_t cols) {
  if (p.size() != rows * cols || rows == 0 || cols == 0 || rows > 20) {
    throw InvalidGeometry(Msg("joint law of size ", p.size(), " does not match ", rows, " x ", cols));
  }
  auto row = std::vector<double>(rows, 0.0);
  auto col = std::vector<double>(cols, 0.0);
  for (std::size_t a = 0; a < rows; ++a) {
    for (std::size_t b = 0; b < cols; ++b) {
      row[a] += p[a * cols + b];
      col[b] += p[a * cols + b];
    }
  }
  double best = 0.0;
  auto c = std::vector<double>(cols);
  for (std::uint64_t e = 1; e < (std::uint64_t{1} << rows); ++e) {
    std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t a = 0; a < rows; ++a) {
      if (!((e >> a) & 1)) continue;
      for (std::size_t b = 0; b < cols; ++b) c[b] += p[a * cols + b] - row[a] * col[b];
    }
    double pos = 0.0;
    double neg = 0.0;
    for (double const x : c) (x > 0 ? pos : neg) += x;
    best = std::max({best, pos, -neg});
  }
  return best;
}

//! Field and resampling settings for AlphaFinite.
struct AlphaOptions {
  int d = 2;
  int m = 1;
  //! X and Y are capped at 2^cap_exp. The lazily keyed lattice evaluates
  //! the capped field exactly on all of Z^d, so no box is involved.
  int cap_exp = 10;
  int bootstrap = 200;
  double level = 0.95;
  int workers = 1;
};

//! Monte Carlo estimate of the alpha coefficient between the values of
//! V_* on Lambda and on Lambda + ell.
struct AlphaEstimate {
  std::vector<LatticePoint> lambda;
  LatticePoint ell{};
  std::size_t atoms = 0;
  std::size_t samples = 0;
  //! Joint counts, row = atom of V_*(Lambda), column = atom of
  //! V_*(Lambda + ell). Atom index is sum_i 3^i (v_i + 1).
  std::vector<std::uint64_t> counts;
  double alpha = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double bootstrap_mean = 0.0;

  std::vector<double> JointLaw() const {
    auto p = std::vector<double>(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      p[i] = static_cast<double>(counts[i]) / static_cast<double>(samples);
    }
    return p;
  }

  std::int64_t Distance() const {
    std::int64_t r = 0;
    for (auto const c : ell) r = std::max<std::int64_t>(r, std::abs(std::int64_t{c}));
    return r;
  }
};

//! Estimates alpha(sigma(V_*(Lambda)), sigma(V_*(Lambda + ell))) from N
//! independent realizations. The exact sup is taken on the empirical
//! joint law; the interval is the bootstrap percentile interval from
//! multinomial resampling of the count table.
inline AlphaEstimate AlphaFinite(std::vector<LatticePoint> const& lambda, LatticePoint const& ell,
                                 std::size_t N, std::uint64_t seed,
                                 AlphaOptions const& opt = {}) {
  if (lambda.empty() || lambda.size() > 2) {
    throw InvalidGeometry(Msg("Lambda must hold one or two points, got ", lambda.size()));
  }
  if (N == 0) throw InsufficientData("no realizations requested");
  if (!(opt.level > 0.0 && opt.level < 1.0)) {
    throw InvalidGeometry(Msg("confidence level ", opt.level, " outside (0, 1)"));
  }
  // Validates d, m and the cap.
  auto const probe = KeyedLattice(opt.d, opt.m, opt.cap_exp, seed);
  // Every point read lies within cap of Lambda and Lambda + ell on each
  // axis; keep that inside the 32-bit coordinate range.
  auto const reach = (std::int64_t{1} << opt.cap_exp) + 1;
  for (auto const& k : lambda) {
    for (int i = 0; i < opt.d; ++i) {
      for (std::int64_t const c : {std::int64_t{k[i]}, std::int64_t{k[i]} + ell[i]}) {
        if (std::abs(c) + reach > std::numeric_limits<std::int32_t>::max()) {
          throw TruncationViolation("scan around Lambda + ell leaves the coordinate range");
        }
      }
    }
  }

  auto out = AlphaEstimate();
  out.lambda = lambda;
  out.ell = ell;
  out.atoms = detail::Pow3(lambda.size());
  out.samples = N;
  auto const cells = out.atoms * out.atoms;

  auto atom_of = [&](KeyedLattice const& lat, LatticePoint const& shift) {
    std::size_t a = 0;
    std::size_t w = 1;
    for (auto const& k : lambda) {
      auto p = k;
      for (int i = 0; i < opt.d; ++i) p[i] += shift[i];
      a += w * static_cast<std::size_t>(LatticeValue(lat, p) + 1);
      w *= 3;
    }
    return a;
  };

  int const workers = std::max(1, opt.workers);
  auto tallies = std::vector<std::vector<std::uint64_t>>(
      static_cast<std::size_t>(workers), std::vector<std::uint64_t>(cells, 0));
  detail::ParallelIndices(N, workers, [&](std::size_t r, std::size_t w) {
    auto const lat = KeyedLattice(opt.d, opt.m, opt.cap_exp, RealizationSeed(seed, r));
    auto const a = atom_of(lat, LatticePoint{});
    auto const b = atom_of(lat, ell);
    ++tallies[w][a * out.atoms + b];
  });
  out.counts.assign(cells, 0);
  for (auto const& t : tallies) {
    for (std::size_t i = 0; i < cells; ++i) out.counts[i] += t[i];
  }
  out.alpha = ExactAlpha(out.JointLaw(), out.atoms, out.atoms);

  if (opt.bootstrap > 0) {
    auto const p = out.JointLaw();
    auto boot = std::vector<double>(static_cast<std::size_t>(opt.bootstrap));
    detail::ParallelIndices(boot.size(), workers, [&](std::size_t b, std::size_t) {
      auto rng = KeyedRng(HashCombine(HashCombine(seed, static_cast<std::uint64_t>(Stream::kBootstrap)), b));
      // Multinomial draw as a chain of conditional binomials.
      auto q = std::vector<double>(cells, 0.0);
      auto left = static_cast<std::uint64_t>(N);
      double mass = 1.0;
      for (std::size_t i = 0; i < cells && left > 0; ++i) {
        std::uint64_t k = left;
        if (i + 1 < cells && mass > 0.0) {
          double const pr = std::clamp(p[i] / mass, 0.0, 1.0);
          k = std::binomial_distribution<std::uint64_t>(left, pr)(rng);
        }
        q[i] = static_cast<double>(k) / static_cast<double>(N);
        left -= k;
        mass -= p[i];
      }
      boot[b] = ExactAlpha(q, out.atoms, out.atoms);
    });
    double sum = 0.0;
    for (double const x : boot) sum += x;
    out.bootstrap_mean = sum / static_cast<double>(boot.size());
    std::sort(boot.begin(), boot.end());
    auto quantile = [&](double u) {
      double const pos = u * static_cast<double>(boot.size() - 1);
      auto const lo = static_cast<std::size_t>(std::floor(pos));
      auto const hi = std::min(lo + 1, boot.size() - 1);
      return boot[lo] + (pos - static_cast<double>(lo)) * (boot[hi] - boot[lo]);
    };
    double const tail = (1.0 - opt.level) / 2.0;
    out.ci_lo = quantile(tail);
    out.ci_hi = quantile(1.0 - tail);
  } else {
    out.ci_lo = out.ci_hi = out.bootstrap_mean = out.alpha;
  }
  return out;
}

//! Log-log least squares fit alpha ~ C |ell|^{-gamma}.
struct DecayFit {
  double gamma = 0.0;
  //! Half-width of the confidence interval for gamma (Student t on the
  //! regression slope, n - 2 degrees of freedom).
  double half_width = 0.0;
  double log_c = 0.0;
  double residual = 0.0;
  std::size_t points = 0;
};

//! Fits the decay exponent from (|ell|, alpha) pairs. Needs at least 4
//! offsets spanning at least 3 octaves, with positive alpha.
inline DecayFit FitDecay(std::vector<std::pair<double, double>> const& series, double level = 0.95) {
  if (series.size() < 4) {
    throw InsufficientData(Msg("decay fit needs at least 4 offsets, got ", series.size()));
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (auto const& [r, a] : series) {
    if (!(r > 0.0)) throw InsufficientData(Msg("offset ", r, " is not positive"));
    if (!(a > 0.0)) throw InsufficientData(Msg("alpha ", a, " at offset ", r, " is not positive"));
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (hi < 8.0 * lo) {
    throw InsufficientData(Msg("offsets span ", std::log2(hi / lo), " octaves, need at least 3"));
  }
  auto const n = static_cast<double>(series.size());
  double mx = 0.0;
  double my = 0.0;
  for (auto const& [r, a] : series) {
    mx += std::log(r) / n;
    my += std::log(a) / n;
  }
  double sxx = 0.0;
  double sxy = 0.0;
  for (auto const& [r, a] : series) {
    sxx += (std::log(r) - mx) * (std::log(r) - mx);
    sxy += (std::log(r) - mx) * (std::log(a) - my);
  }
  double const slope = sxy / sxx;
  double rss = 0.0;
  for (auto const& [r, a] : series) {
    double const e = std::log(a) - (my + slope * (std::log(r) - mx));
    rss += e * e;
  }
  auto fit = DecayFit();
  fit.gamma = -slope;
  fit.log_c = my - slope * mx;
  fit.points = series.size();
  fit.residual = std::sqrt(rss / (n - 2.0));
  auto const t = boost::math::students_t(n - 2.0);
  fit.half_width = boost::math::quantile(t, 0.5 + level / 2.0) * fit.residual / std::sqrt(sxx);
  return fit;
}

//! Indicator bits stored per realization and scale.
enum EventBit : std::uint8_t {
  kEventC = 1,
  kEventCOrthant = 2,
  kEventD = 4,
  kEventB = 8,
  //! B_n on the realization conditioned on D_n.
  kEventBGivenD = 16,
};

//! Frequencies and closed forms at one scale T_n = 2^n.
struct EventRow {
  int n = 0;
  std::int64_t T = 0;
  std::uint64_t count_c = 0;
  std::uint64_t count_c_orthant = 0;
  std::uint64_t count_d = 0;
  std::uint64_t count_b = 0;
  std::uint64_t count_cd = 0;
  //! Realizations drawn conditionally on D_n (one per sample) in which
  //! C_n holds, and in which B_n holds.
  std::uint64_t count_c_given_d = 0;
  std::uint64_t count_b_given_d = 0;
  //! Realizations where C_n and D_n hold but B_n does not, counted over
  //! both the unconditioned and the D_n-conditioned draws.
  std::uint64_t implication_violations = 0;
  //! Lattice points of the annulus theta T_{n-1} < |k|_inf <= theta T_n.
  std::uint64_t annulus_points = 0;
  //! 1 - (1 - P(X = T_n))^annulus_points, the exact P(C_n).
  double exact_c = 0.0;
  //! 1 - (1 - alpha_d / T_n^d)^{theta^d T_n^d (1 - 2^-d)}. This is the
  //! exact probability of the orthant variant of C_n, which uses the
  //! points with 0 <= k_i < theta T_n and not all k_i < theta T_{n-1}.
  double exact_c_orthant = 0.0;
  //! Lower bound 1 - exp(-alpha_d^2 theta^d).
  double lower_bound_c = 0.0;
  //! Exact P(D_n) under the capped law.
  double exact_d = 0.0;
};

struct EventTable {
  double theta = 0.0;
  int cap_exp = 0;
  std::size_t samples = 0;
  std::vector<EventRow> rows;
  //! flags[r * rows.size() + i] holds the EventBit set for realization r
  //! at rows[i].
  std::vector<std::uint8_t> flags;

  bool Has(std::size_t r, std::size_t i, EventBit bit) const {
    return (flags[r * rows.size() + i] & bit) != 0;
  }
};

struct EventOptions {
  //! X and Y are capped at 2^cap_exp; 0 selects n_max + 1, the smallest
  //! cap under which P(X = T_n) is untruncated for every n in range.
  int cap_exp = 0;
  int workers = 1;
};

namespace detail {

//! Memoizes the X and Y exponents of a d = 2 lattice source on the box
//! [-r1, r1] x [-r2, r2]; points outside the box are forwarded. The
//! marking scans of neighbouring centers overlap almost entirely, so
//! this removes most of the hashing.
template <typename Source>
class CachedExponents {
 public:
  CachedExponents(Source const& src, std::int64_t r1, std::int64_t r2)
      : src_(src), r1_(r1), r2_(r2), w_(2 * r1 + 1),
        x_(static_cast<std::size_t>(w_ * (2 * r2 + 1)), kUnset),
        y_(x_.size(), kUnset) {}

  int d() const { return 2; }
  int m() const { return 1; }
  int cap_exp() const { return src_.cap_exp(); }
  bool Contains(LatticePoint const&) const { return true; }
  int MaxXExp() const { return src_.MaxXExp(); }
  int MaxYExp() const { return src_.MaxYExp(); }

  int XExp(LatticePoint const& k) const { return Get(k, x_, [&] { return src_.XExp(k); }); }
  int YExp(LatticePoint const& k) const { return Get(k, y_, [&] { return src_.YExp(k); }); }

 private:
  static constexpr std::uint8_t kUnset = 0xFF;

  template <typename F>
  int Get(LatticePoint const& k, std::vector<std::uint8_t>& slot, F&& fetch) const {
    if (std::abs(std::int64_t{k[0]}) > r1_ || std::abs(std::int64_t{k[1]}) > r2_) return fetch();
    auto const i = static_cast<std::size_t>((k[1] + r2_) * w_ + (k[0] + r1_));
    if (slot[i] == kUnset) slot[i] = static_cast<std::uint8_t>(fetch());
    return slot[i];
  }

  Source const& src_;
  std::int64_t r1_;
  std::int64_t r2_;
  std::int64_t w_;
  mutable std::vector<std::uint8_t> x_;
  mutable std::vector<std::uint8_t> y_;
};

//! True iff some retained horizontal cube of @a lat covers the segment
//! [k1 - T/2, k1 + T/2] x {k2} for some |k1|, |k2| <= w. Retained cubes
//! are closed integer intervals, so their union covers the segment
//! exactly when a merged run of overlapping or touching intervals does.
template <typename Source>
bool HorizontalRunNearOrigin(Source const& lat, std::int64_t w, std::int64_t T) {
  auto const cap = std::int64_t{1} << lat.cap_exp();
  auto const reach = w + T / 2;
  auto runs = std::vector<std::pair<std::int64_t, std::int64_t>>();
  for (std::int64_t k2 = -w; k2 <= w; ++k2) {
    runs.clear();
    for (std::int64_t j1 = -reach - cap / 2; j1 <= reach + cap / 2; ++j1) {
      auto const j = MakePoint({static_cast<std::int32_t>(j1), static_cast<std::int32_t>(k2)});
      int const xe = lat.XExp(j);
      auto const half = (std::int64_t{1} << xe) / 2;
      if (j1 + half < -reach || j1 - half > reach) continue;
      if (lat.YExp(j) >= xe) continue;
      if (DirectMark(lat, j) != -1) continue;
      runs.emplace_back(j1 - half, j1 + half);
    }
    std::sort(runs.begin(), runs.end());
    std::size_t i = 0;
    while (i < runs.size()) {
      auto [a, b] = runs[i];
      while (++i < runs.size() && runs[i].first <= b) b = std::max(b, runs[i].second);
      // Centers k1 with [k1 - T/2, k1 + T/2] inside [a, b] and |k1| <= w.
      if (std::max(a + T / 2, -w) <= std::min(b - T / 2, w)) return true;
    }
  }
  return false;
}

//! The event D_n at scale T: Y_k < max(T, |k2|) for every k with
//! |k1| <= T. Rows beyond the cap satisfy it for every admissible Y.
template <typename Source>
bool ClearanceHolds(Source const& lat, std::int64_t T) {
  auto const cap = std::int64_t{1} << lat.cap_exp();
  for (std::int64_t k2 = 0; k2 <= cap; ++k2) {
    auto const bound = std::max(T, k2);
    for (std::int64_t k1 = -T; k1 <= T; ++k1) {
      for (std::int64_t const s : {k2, -k2}) {
        auto const k = MakePoint({static_cast<std::int32_t>(k1), static_cast<std::int32_t>(s)});
        if ((std::int64_t{1} << lat.YExp(k)) >= bound) return false;
        if (k2 == 0) break;
      }
    }
  }
  return true;
}

//! Conditions @a lat on D_n at scale T. D_n is the product event
//! {Y_k < max(T, |k2|)} over |k1| <= T, so each of those Y_k is drawn
//! independently from the law conditioned below its bound.
inline void ConditionOnClearance(KeyedLattice& lat, std::int64_t T) {
  lat.SetYBound([T, cap_exp = lat.cap_exp()](LatticePoint const& k) {
    if (std::abs(std::int64_t{k[0]}) > T) return cap_exp;
    return LargestExponentBelow(std::max(T, std::abs(std::int64_t{k[1]})));
  });
}

//! P(Y >= v) for the dyadic law capped at 2^cap_exp.
inline double CappedTailAtLeast(DyadicLaw const& law, int cap_exp, std::int64_t v) {
  if (v <= 2) return 1.0;
  int const e = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(v - 1)));
  return e > cap_exp ? 0.0 : law.Tail(e);
}

}  // namespace detail

//! Monte Carlo frequencies of C_n, D_n and B_n for d = 2, m = 1 at the
//! scales 2^n, n in [n_lo, n_hi], together with their closed forms.
//! theta must be a dyadic rational in (0, 1/2] with theta T_{n-1} a
//! positive integer for every n in range.
inline EventTable EventFrequencies(double theta, int n_lo, int n_hi, std::size_t N,
                                   std::uint64_t seed, EventOptions const& opt = {}) {
  constexpr int d = 2;
  constexpr int m = 1;
  if (!(theta > 0.0 && theta <= 0.5)) {
    throw InvalidGeometry(Msg("theta = ", theta, " must lie in (0, 1/2]"));
  }
  if (n_lo > n_hi || n_lo < 1) {
    throw InvalidGeometry(Msg("empty or invalid scale range [", n_lo, ", ", n_hi, "]"));
  }
  if (N == 0) throw InsufficientData("no realizations requested");
  for (int n = n_lo; n <= n_hi; ++n) {
    double const w = theta * std::ldexp(1.0, n - 1);
    if (!(w >= 1.0) || w != std::floor(w)) {
      throw InvalidGeometry(Msg("theta T_{n-1} = ", w, " at n = ", n,
                                " must be a positive integer; theta must be dyadic and n >= n_theta"));
    }
  }
  int const cap_exp = opt.cap_exp > 0 ? opt.cap_exp : n_hi + 1;
  if (cap_exp <= n_hi) {
    throw InvalidGeometry(Msg("cap 2^", cap_exp, " must exceed T_n = 2^", n_hi));
  }
  auto const law = DyadicLaw(d);
  auto const cap = std::int64_t{1} << cap_exp;
  {
    // Largest region read at the top scale: rows |k2| <= theta T + cap / 2
    // for the marking scans and columns out to theta T + T / 2 + cap.
    auto const T = std::int64_t{1} << n_hi;
    auto const w = static_cast<std::int64_t>(theta * static_cast<double>(T));
    auto const rows = 2 * std::max(w + cap / 2, cap) + 1;
    auto const cols = 2 * (w + T / 2 + cap) + 1;
    if (rows * cols > (std::int64_t{1} << 22)) {
      throw InvalidGeometry(Msg("scan region of ", rows * cols, " points exceeds 2^22"));
    }
  }

  auto table = EventTable();
  table.theta = theta;
  table.cap_exp = cap_exp;
  table.samples = N;
  for (int n = n_lo; n <= n_hi; ++n) {
    auto row = EventRow();
    row.n = n;
    row.T = std::int64_t{1} << n;
    auto const w = static_cast<std::int64_t>(theta * static_cast<double>(row.T));
    auto const w0 = w / 2;
    row.annulus_points = static_cast<std::uint64_t>((2 * w + 1) * (2 * w + 1) - (2 * w0 + 1) * (2 * w0 + 1));
    double const px = law.Pmf(n);
    row.exact_c = -std::expm1(static_cast<double>(row.annulus_points) * std::log1p(-px));
    double const orthant_points = std::pow(theta * static_cast<double>(row.T), d) * (1.0 - std::ldexp(1.0, -d));
    row.exact_c_orthant = -std::expm1(orthant_points * std::log1p(-law.alpha() / std::pow(static_cast<double>(row.T), d)));
    row.lower_bound_c = -std::expm1(-law.alpha() * law.alpha() * std::pow(theta, d));
    // D_n reads |k1| <= T and |k2| <= cap; farther rows satisfy the
    // inequality for every admissible Y.
    double log_d = 0.0;
    for (std::int64_t k2 = -cap; k2 <= cap; ++k2) {
      double const q = detail::CappedTailAtLeast(law, cap_exp, std::max(row.T, std::abs(k2)));
      log_d += static_cast<double>(2 * row.T + 1) * std::log1p(-q);
    }
    row.exact_d = std::exp(log_d);
    table.rows.push_back(row);
  }

  auto const nrows = table.rows.size();
  table.flags.assign(N * nrows, 0);
  detail::ParallelIndices(N, opt.workers, [&](std::size_t r, std::size_t) {
    auto const lat = KeyedLattice(d, m, cap_exp, RealizationSeed(seed, r));
    // Same X values, Y conditioned on D_n.
    auto conditioned = lat;
    auto pt = [](std::int64_t a, std::int64_t b) {
      return MakePoint({static_cast<std::int32_t>(a), static_cast<std::int32_t>(b)});
    };
    for (std::size_t i = 0; i < nrows; ++i) {
      auto const& row = table.rows[i];
      auto const T = row.T;
      auto const w = static_cast<std::int64_t>(theta * static_cast<double>(T));
      auto const w0 = w / 2;
      std::uint8_t bits = 0;

      for (std::int64_t a = -w; a <= w && !(bits & kEventC); ++a) {
        for (std::int64_t b = -w; b <= w; ++b) {
          if (std::max(std::abs(a), std::abs(b)) <= w0) continue;
          if (lat.XExp(pt(a, b)) == row.n) {
            bits |= kEventC;
            break;
          }
        }
      }
      for (std::int64_t a = 0; a < w && !(bits & kEventCOrthant); ++a) {
        for (std::int64_t b = 0; b < w; ++b) {
          if (a < w0 && b < w0) continue;
          if (lat.XExp(pt(a, b)) == row.n) {
            bits |= kEventCOrthant;
            break;
          }
        }
      }

      if (detail::ClearanceHolds(lat, T)) bits |= kEventD;

      // The marking scans read columns within reach + cap and rows within
      // w + cap / 2 of the origin.
      auto const r1 = w + T / 2 + cap;
      auto const r2 = w + cap / 2;
      if (detail::HorizontalRunNearOrigin(detail::CachedExponents(lat, r1, r2), w, T)) {
        bits |= kEventB;
      }
      detail::ConditionOnClearance(conditioned, T);
      if (detail::HorizontalRunNearOrigin(detail::CachedExponents(conditioned, r1, r2), w, T)) {
        bits |= kEventBGivenD;
      }
      table.flags[r * nrows + i] = bits;
    }
  });

  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t i = 0; i < nrows; ++i) {
      auto& row = table.rows[i];
      auto const bits = table.flags[r * nrows + i];
      bool const c = bits & kEventC;
      bool const dn = bits & kEventD;
      bool const b = bits & kEventB;
      row.count_c += c;
      row.count_c_orthant += (bits & kEventCOrthant) != 0;
      row.count_d += dn;
      row.count_b += b;
      bool const b_given_d = bits & kEventBGivenD;
      row.count_cd += c && dn;
      row.count_c_given_d += c;
      row.count_b_given_d += b_given_d;
      row.implication_violations += (c && dn && !b) + (c && !b_given_d);
    }
  }
  return table;
}

}  // namespace hjlab
