#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "hjlab/core.hpp"
#include "hjlab/rng.hpp"

namespace hjlab {

//! Scalar field on the plane, e.g. a potential V(x).
using PlaneField = std::function<double(Vec2)>;

//! Hamiltonian H(xi, x) with the structural constants it is declared to
//! satisfy:
//!   c0 |xi|^q - C0 <= H(xi, x) <= C0 |xi|^p + C0,
//!   |D_x H| + (1 v |xi|) |D_xi H| <= C0 (1 v |xi|^p),
//!   (xi/|xi|) . D_xi H(xi, x) > omega(H(xi, x) v 0).
//! Gradients are optional; central differences are used when absent.
struct HamiltonianSpec {
  std::string name;
  std::function<double(Vec2 xi, Vec2 x)> h;
  std::function<Vec2(Vec2 xi, Vec2 x)> d_xi;
  std::function<Vec2(Vec2 xi, Vec2 x)> d_x;
  double c0 = 1.0;
  double C0 = 1.0;
  double p = 1.0;
  double q = 1.0;
  std::function<double(double)> omega;
  //! Optional closed form of the radius function r_mu(e, x).
  std::function<double(Vec2 e, Vec2 x, double mu)> radius;
  //! r_mu(e, x) does not depend on e.
  bool isotropic = false;
  //! H does not depend on x.
  bool x_independent = false;
  //! Box of x over which the spec is defined and sampled.
  Vec2 x_lo{-8.0, -8.0};
  Vec2 x_hi{8.0, 8.0};
  //! Constant subtracted by the normalization preflight.
  double shift = 0.0;
  //! Optional separated form h(xi, x) = kinetic(xi) - potential(x); when
  //! both are set, grid solvers evaluate the potential once per node.
  std::function<double(Vec2 xi)> kinetic;
  std::function<double(Vec2 x)> potential;

  bool separated() const { return kinetic && potential; }

  double operator()(Vec2 xi, Vec2 x) const { return h(xi, x) - shift; }

  Vec2 GradXi(Vec2 xi, Vec2 x) const {
    if (d_xi) return d_xi(xi, x);
    double const e = 1e-6 * std::max(1.0, Norm(xi));
    return {(h({xi.x + e, xi.y}, x) - h({xi.x - e, xi.y}, x)) / (2 * e),
            (h({xi.x, xi.y + e}, x) - h({xi.x, xi.y - e}, x)) / (2 * e)};
  }
  Vec2 GradX(Vec2 xi, Vec2 x) const {
    if (d_x) return d_x(xi, x);
    if (x_independent) return {0.0, 0.0};
    double const e = 1e-6;
    return {(h(xi, {x.x + e, x.y}) - h(xi, {x.x - e, x.y})) / (2 * e),
            (h(xi, {x.x, x.y + e}) - h(xi, {x.x, x.y - e})) / (2 * e)};
  }
};

//! Constants c, C of the speed bounds a_mu = c (mu^{1/p} ^ mu) and
//! A_mu = C (mu + C)^{1/q}, derived from the declared data.
//!
//! Upper: mu = H(r e) >= c0 r^q - C0 gives r <= c0^{-1/q} (mu + C0)^{1/q}.
//! Lower: |D_xi H| <= C0 (1 v |xi|)^{p-1} and H(0, x) <= 0 give
//! mu <= C0 r for r <= 1 and mu <= C0 r^p for r >= 1, hence
//! r >= (mu ^ mu^{1/p}) / C0 when C0 >= 1.
struct SpeedConstants {
  double c = 1.0;
  double C = 1.0;

  static SpeedConstants Of(HamiltonianSpec const& s) {
    double const C0 = std::max(1.0, s.C0);
    return {1.0 / C0, std::max({1.0, C0, std::pow(s.c0, -1.0 / s.q)})};
  }
};

inline double SpeedLower(HamiltonianSpec const& s, double mu) {
  return SpeedConstants::Of(s).c * std::min(std::pow(mu, 1.0 / s.p), mu);
}

inline double SpeedUpper(HamiltonianSpec const& s, double mu) {
  double const C = SpeedConstants::Of(s).C;
  return C * std::pow(mu + C, 1.0 / s.q);
}

//! Direction-Lipschitz constant L_mu = C0 a_mu^{-1} omega(mu)^{-1} A_mu^p.
inline double DirectionLipschitz(HamiltonianSpec const& s, double mu) {
  return s.C0 / (SpeedLower(s, mu) * s.omega(mu)) * std::pow(SpeedUpper(s, mu), s.p);
}

//! Window for d r_mu / d mu: [C0^{-1} A_mu^{1-p}, 1 / omega(mu)].
inline double MuSlopeLower(HamiltonianSpec const& s, double mu) {
  return std::pow(SpeedUpper(s, mu), 1.0 - s.p) / s.C0;
}
inline double MuSlopeUpper(HamiltonianSpec const& s, double mu) { return 1.0 / s.omega(mu); }

namespace detail {

inline constexpr int kRadiusScanIntervals = 96;

//! Bisection of f on [lo, hi] with f(lo) < 0 <= f(hi), to relative
//! width 1e-12.
template <typename F>
double BisectRoot(F const& f, double lo, double hi) {
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    double const mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

//! Radius by sign scan of f(r) = H(r e, x) - mu on [0, 1.5 A_mu] with 96
//! intervals, then bisection to relative 1e-12 inside the crossing
//! interval. Throws NotStarShaped when the scan finds a downward
//! crossing (negative radial derivative at a crossing) or when
//! H(0, x) >= mu with no crossing at all; NoConvergence when no upward
//! crossing appears up to 2^8 times the bracket.
inline double RadiusByScan(HamiltonianSpec const& s, Vec2 e, Vec2 x, double mu) {
  if (!(mu > 0.0)) throw InvalidGeometry(Msg("radius needs mu > 0, got ", mu));
  double const n = Norm(e);
  e = {e.x / n, e.y / n};
  auto const f = [&](double r) { return s(r * e, x) - mu; };
  double top = 1.5 * SpeedUpper(s, mu);
  double prev_r = 0.0;
  double prev_f = f(0.0);
  double root = -1.0;
  for (int ext = 0; ext <= 8; ++ext) {
    double const lo = ext == 0 ? 0.0 : top / 2;
    for (int k = 1; k <= detail::kRadiusScanIntervals; ++k) {
      double const r = lo + (top - lo) * k / detail::kRadiusScanIntervals;
      double const fr = f(r);
      if (prev_f >= 0.0 && fr < 0.0) {
        throw NotStarShaped(Msg(s.name, ": H(r e, x) crosses level ", mu,
                                " downward between r = ", prev_r, " and ", r,
                                " (e = (", e.x, ", ", e.y, "), x = (", x.x, ", ", x.y,
                                "))"));
      }
      if (prev_f < 0.0 && fr >= 0.0 && root < 0.0) {
        root = detail::BisectRoot(f, prev_r, r);
      }
      prev_r = r;
      prev_f = fr;
    }
    if (root >= 0.0) return root;
    top *= 2;
  }
  if (f(0.0) >= 0.0) {
    throw NotStarShaped(Msg(s.name, ": H(0, x) = ", f(0.0) + mu, " >= mu = ", mu,
                            " with no crossing"));
  }
  throw NoConvergence(Msg(s.name, ": no crossing of level ", mu, " up to r = ", top / 2));
}

//! r_mu(e, x): the closed form when the spec declares one, otherwise
//! RadiusByScan.
inline double Radius(HamiltonianSpec const& s, Vec2 e, Vec2 x, double mu) {
  if (s.radius) {
    if (!(mu > 0.0)) throw InvalidGeometry(Msg("radius needs mu > 0, got ", mu));
    double const n = Norm(e);
    return s.radius({e.x / n, e.y / n}, x, mu);
  }
  return RadiusByScan(s, e, x, mu);
}

//! One recorded violation of a star-shape check.
struct StarViolation {
  std::string kind;
  Vec2 xi;
  Vec2 x;
  double level = 0.0;
  double value = 0.0;
  double bound = 0.0;
};

struct StarShapeOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  double mu_lo = 1.0 / 16;
  double mu_hi = 4.0;
  //! Relative tolerance for comparisons that hold with equality for
  //! some catalog entries (e.g. radial derivative 2|xi| = omega for |xi|^2).
  double rel_tol = 1e-6;
  std::size_t keep = 32;
};

//! Counts per property; the first few violations are kept verbatim.
struct StarShapeReport {
  std::size_t samples = 0;
  std::size_t radial = 0;          // radial derivative <= omega(H v 0)
  std::size_t growth = 0;          // declared growth bounds
  std::size_t continuity = 0;      // declared gradient bound
  std::size_t radius_failures = 0; // NotStarShaped or NoConvergence
  std::size_t closed_form = 0;     // closed form disagrees with the scan
  std::size_t speed = 0;           // a_mu <= r_mu <= A_mu
  std::size_t mu_window = 0;       // slope window in mu
  std::size_t lipschitz = 0;       // Lipschitz in e
  double max_violation_level = -std::numeric_limits<double>::infinity();
  double min_violation_level = std::numeric_limits<double>::infinity();
  double min_failure_level = std::numeric_limits<double>::infinity();
  double max_failure_level = -std::numeric_limits<double>::infinity();
  std::vector<StarViolation> examples;

  std::size_t RadiusViolations() const { return speed + mu_window + lipschitz + closed_form; }
  std::size_t Total() const {
    return radial + growth + continuity + radius_failures + RadiusViolations();
  }
};

//! Samples (xi, x) and (e, x, mu) and checks the declared structure:
//! radial monotonicity against omega, growth and gradient bounds, and
//! the radius properties a_mu <= r_mu <= A_mu, the mu-slope window and
//! the Lipschitz bound in e. xi is uniform in the disc of radius
//! 1.25 A_{mu_hi}, x uniform in the spec box, mu log-uniform in
//! [mu_lo, mu_hi], e uniform on the circle.
inline StarShapeReport CheckStarShape(HamiltonianSpec const& s,
                                      StarShapeOptions const& opt = {}) {
  auto rep = StarShapeReport();
  rep.samples = opt.samples;
  auto rng = KeyedRng(HashCombine(opt.seed, 0x5354u));
  double const xi_max = 1.25 * SpeedUpper(s, opt.mu_hi);
  auto const tol = [&](double b) { return opt.rel_tol * std::abs(b) + 1e-9; };
  auto record = [&](std::size_t& counter, char const* kind, Vec2 xi, Vec2 x, double level,
                    double value, double bound) {
    ++counter;
    rep.max_violation_level = std::max(rep.max_violation_level, level);
    rep.min_violation_level = std::min(rep.min_violation_level, level);
    if (rep.examples.size() < opt.keep) rep.examples.push_back({kind, xi, x, level, value, bound});
  };
  auto sample_x = [&] {
    return Vec2{s.x_lo.x + (s.x_hi.x - s.x_lo.x) * rng.Uniform(),
                s.x_lo.y + (s.x_hi.y - s.x_lo.y) * rng.Uniform()};
  };
  for (std::size_t k = 0; k < opt.samples; ++k) {
    // Pointwise structure of H.
    Vec2 const x = sample_x();
    double const rad = xi_max * std::sqrt(rng.Uniform());
    Vec2 const dir = UnitAt(2 * kPi * rng.Uniform());
    Vec2 const xi = rad * dir;
    double const hv = s(xi, x);
    double const nx = Norm(xi);
    if (nx > 1e-9 && hv >= 0.0) {
      double const radial = Dot(dir, s.GradXi(xi, x));
      double const w = s.omega(hv);
      if (radial < w - tol(w)) record(rep.radial, "radial", xi, x, hv, radial, w);
    }
    double const lo = s.c0 * std::pow(nx, s.q) - s.C0;
    double const hi = s.C0 * std::pow(nx, s.p) + s.C0;
    if (hv < lo - tol(lo) || hv > hi + tol(hi)) record(rep.growth, "growth", xi, x, hv, hv, hv < lo ? lo : hi);
    double const cont = Norm(s.GradX(xi, x)) + std::max(1.0, nx) * Norm(s.GradXi(xi, x));
    double const cont_bound = s.C0 * std::max(1.0, std::pow(nx, s.p));
    if (cont > cont_bound + tol(cont_bound)) {
      record(rep.continuity, "continuity", xi, x, hv, cont, cont_bound);
    }

    // Radius properties.
    double const mu = opt.mu_lo * std::pow(opt.mu_hi / opt.mu_lo, rng.Uniform());
    Vec2 const e = UnitAt(2 * kPi * rng.Uniform());
    Vec2 const y = sample_x();
    try {
      double const r = Radius(s, e, y, mu);
      if (s.radius) {
        double const rs = RadiusByScan(s, e, y, mu);
        if (std::abs(rs - r) > 1e-9 * std::max(1.0, r)) {
          record(rep.closed_form, "closed-form", e, y, mu, r, rs);
        }
      }
      double const a = SpeedLower(s, mu);
      double const A = SpeedUpper(s, mu);
      if (r < a - tol(a) || r > A + tol(A)) record(rep.speed, "speed", e, y, mu, r, r < a ? a : A);
      double const dm = 1e-4 * mu;
      double const slope = (Radius(s, e, y, mu + dm) - Radius(s, e, y, mu - dm)) / (2 * dm);
      double const slo = MuSlopeLower(s, mu);
      double const shi = MuSlopeUpper(s, mu);
      if (slope < slo - tol(slo) - 1e-6 || slope > shi + tol(shi) + 1e-6) {
        record(rep.mu_window, "mu-window", e, y, mu, slope, slope < slo ? slo : shi);
      }
      double const ang = 1e-2 * (2 * rng.Uniform() - 1);
      Vec2 const e2 = UnitAt(std::atan2(e.y, e.x) + ang);
      double const dr = std::abs(Radius(s, e2, y, mu) - r);
      double const lip = DirectionLipschitz(s, mu) * Norm(e2 - e);
      if (dr > lip + tol(lip)) record(rep.lipschitz, "lipschitz", e, y, mu, dr, lip);
    } catch (NotStarShaped const&) {
      ++rep.radius_failures;
      rep.min_failure_level = std::min(rep.min_failure_level, mu);
      rep.max_failure_level = std::max(rep.max_failure_level, mu);
    } catch (NoConvergence const&) {
      ++rep.radius_failures;
      rep.min_failure_level = std::min(rep.min_failure_level, mu);
      rep.max_failure_level = std::max(rep.max_failure_level, mu);
    }
  }
  return rep;
}

//! Result of the normalization preflight.
struct NormalizationShift {
  double sup_h0 = 0.0;
  HamiltonianSpec spec;
};

//! Estimates sup_x H(0, x) on a 257 x 257 grid over the spec box and
//! returns the spec shifted so that this supremum is 0. The shift is
//! recorded in spec.shift and must be reported with any result.
inline NormalizationShift NormalizationPreflight(HamiltonianSpec s) {
  double sup = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 256; ++i) {
    for (int j = 0; j <= 256; ++j) {
      Vec2 const x{s.x_lo.x + (s.x_hi.x - s.x_lo.x) * i / 256.0,
                   s.x_lo.y + (s.x_hi.y - s.x_lo.y) * j / 256.0};
      sup = std::max(sup, s(Vec2{0.0, 0.0}, x));
      if (s.x_independent) break;
    }
    if (s.x_independent) break;
  }
  s.shift += sup;
  return {sup, std::move(s)};
}

// Catalog. Constants are derived in the comments; CheckStarShape
// verifies them by sampling.

namespace detail {
//! n^k with the frequent k = 1 and k = 2 cases done without pow.
inline double PowK(double n, double k) {
  if (k == 1.0) return n;
  if (k == 2.0) return n * n;
  return std::pow(n, k);
}
}  // namespace detail

//! H = |xi|^k, k >= 1. Bounds hold with c0 = 1, C0 = max(1, k), p = q = k
//! since (1 v |xi|) k |xi|^{k-1} <= k (1 v |xi|^k). Radial derivative
//! k |xi|^{k-1} = k mu^{(k-1)/k} on the level set, so omega(mu) = k mu^{1-1/k}.
inline HamiltonianSpec PowerEikonal(double k) {
  if (!(k >= 1.0)) throw InvalidGeometry(Msg("power eikonal needs k >= 1, got ", k));
  auto s = HamiltonianSpec();
  s.name = Msg("power-eikonal(", k, ")");
  s.h = [k](Vec2 xi, Vec2) { return detail::PowK(Norm(xi), k); };
  s.kinetic = [k](Vec2 xi) { return detail::PowK(Norm(xi), k); };
  s.potential = [](Vec2) { return 0.0; };
  s.d_xi = [k](Vec2 xi, Vec2) {
    double const n = Norm(xi);
    if (n == 0.0) return Vec2{0.0, 0.0};
    double const f = k * std::pow(n, k - 2);
    return Vec2{f * xi.x, f * xi.y};
  };
  s.c0 = 1.0;
  s.C0 = std::max(1.0, k);
  s.p = s.q = k;
  s.omega = [k](double mu) { return k * std::pow(mu, 1.0 - 1.0 / k); };
  s.radius = [k](Vec2, Vec2, double mu) { return std::pow(mu, 1.0 / k); };
  s.isotropic = true;
  s.x_independent = true;
  return s;
}

//! H = |xi| (2 + sin x1). c0 = 1, p = q = 1; |D_x H| <= |xi| and
//! |D_xi H| <= 3 give C0 = 4. Radial derivative 2 + sin x1 >= 1 = omega.
inline HamiltonianSpec ModulatedEikonal() {
  auto s = HamiltonianSpec();
  s.name = "modulated-eikonal";
  s.h = [](Vec2 xi, Vec2 x) { return Norm(xi) * (2.0 + std::sin(x.x)); };
  s.d_x = [](Vec2 xi, Vec2 x) { return Vec2{Norm(xi) * std::cos(x.x), 0.0}; };
  s.c0 = 1.0;
  s.C0 = 4.0;
  s.p = s.q = 1.0;
  s.omega = [](double) { return 1.0; };
  s.radius = [](Vec2, Vec2 x, double mu) { return mu / (2.0 + std::sin(x.x)); };
  s.isotropic = true;
  return s;
}

//! Separated H = |xi|^k - (1 + V(x)) with a 2-Lipschitz V in [-1, 1].
//! r_mu = (mu + 1 + V)^{1/k}. c0 = 1, p = q = k; the x-gradient adds at
//! most 2, so C0 = k + 2. omega(mu) = k mu^{1-1/k} (equality where V = -1).
//! H(0, x) = -(1 + V) <= 0 with equality on {V = -1}.
inline HamiltonianSpec SeparatedEikonal(PlaneField v, double k = 1.0, Vec2 x_lo = {-8, -8},
                                        Vec2 x_hi = {8, 8}) {
  if (!(k >= 1.0)) throw InvalidGeometry(Msg("separated eikonal needs k >= 1, got ", k));
  auto s = HamiltonianSpec();
  s.name = Msg("separated-eikonal(", k, ")");
  s.h = [v, k](Vec2 xi, Vec2 x) { return detail::PowK(Norm(xi), k) - (1.0 + v(x)); };
  s.kinetic = [k](Vec2 xi) { return detail::PowK(Norm(xi), k); };
  s.potential = [v](Vec2 x) { return 1.0 + v(x); };
  s.d_xi = [k](Vec2 xi, Vec2) {
    double const n = Norm(xi);
    if (n == 0.0) return Vec2{0.0, 0.0};
    double const f = k * std::pow(n, k - 2);
    return Vec2{f * xi.x, f * xi.y};
  };
  s.c0 = 1.0;
  s.C0 = k + 2.0;
  s.p = s.q = k;
  s.omega = [k](double mu) { return k * std::pow(mu, 1.0 - 1.0 / k); };
  s.radius = [v, k](Vec2, Vec2 x, double mu) {
    return std::pow(std::max(0.0, mu + 1.0 + v(x)), 1.0 / k);
  };
  s.isotropic = true;
  s.x_lo = x_lo;
  s.x_hi = x_hi;
  return s;
}

//! Anisotropic H = sqrt(a1 xi1^2 + a2 xi2^2) - (1 + V(x)), a1, a2 > 0.
//! r_mu(e, x) = (mu + 1 + V) / sqrt(a1 e1^2 + a2 e2^2). c0 = sqrt(min a),
//! p = q = 1, C0 = sqrt(max a) + 2, omega = sqrt(min a).
inline HamiltonianSpec EllipticEikonal(double a1, double a2, PlaneField v, Vec2 x_lo = {-8, -8},
                                       Vec2 x_hi = {8, 8}) {
  if (!(a1 > 0.0 && a2 > 0.0)) throw InvalidGeometry("elliptic eikonal needs a1, a2 > 0");
  auto s = HamiltonianSpec();
  s.name = Msg("elliptic-eikonal(", a1, ",", a2, ")");
  s.h = [=](Vec2 xi, Vec2 x) {
    return std::sqrt(a1 * xi.x * xi.x + a2 * xi.y * xi.y) - (1.0 + v(x));
  };
  s.kinetic = [=](Vec2 xi) { return std::sqrt(a1 * xi.x * xi.x + a2 * xi.y * xi.y); };
  s.potential = [v](Vec2 x) { return 1.0 + v(x); };
  s.d_xi = [=](Vec2 xi, Vec2) {
    double const n = std::sqrt(a1 * xi.x * xi.x + a2 * xi.y * xi.y);
    if (n == 0.0) return Vec2{0.0, 0.0};
    return Vec2{a1 * xi.x / n, a2 * xi.y / n};
  };
  s.c0 = std::sqrt(std::min(a1, a2));
  s.C0 = std::sqrt(std::max(a1, a2)) + 2.0;
  s.p = s.q = 1.0;
  s.omega = [w = std::sqrt(std::min(a1, a2))](double) { return w; };
  s.radius = [=](Vec2 e, Vec2 x, double mu) {
    return std::max(0.0, mu + 1.0 + v(x)) / std::sqrt(a1 * e.x * e.x + a2 * e.y * e.y);
  };
  s.isotropic = a1 == a2;
  s.x_lo = x_lo;
  s.x_hi = x_hi;
  return s;
}

//! H = (|xi|^2 - 1)^2: sub-levels below 1 are annuli, not star-shaped.
//! Growth data c0 = 1/2, C0 = 4, p = q = 4 hold; omega(mu) = 4 sqrt(mu)
//! is what the levels above 1 satisfy.
inline HamiltonianSpec DoubleWell() {
  auto s = HamiltonianSpec();
  s.name = "double-well";
  s.h = [](Vec2 xi, Vec2) {
    double const t = Dot(xi, xi) - 1.0;
    return t * t;
  };
  s.d_xi = [](Vec2 xi, Vec2) {
    double const f = 4.0 * (Dot(xi, xi) - 1.0);
    return Vec2{f * xi.x, f * xi.y};
  };
  s.c0 = 0.5;
  s.C0 = 4.0;
  s.p = s.q = 4.0;
  s.omega = [](double mu) { return 4.0 * std::sqrt(mu); };
  s.isotropic = true;
  s.x_independent = true;
  return s;
}

}  // namespace hjlab
