#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hjlab/core.hpp"
#include "hjlab/grid.hpp"
#include "hjlab/radius.hpp"

namespace hjlab {

//! Orthonormal local frame of a solver grid: grid coordinate (u, v)
//! sits at origin + u axis_u + v axis_v in the plane.
struct GridFrame {
  Vec2 origin{0.0, 0.0};
  Vec2 axis_u{1.0, 0.0};
  Vec2 axis_v{0.0, 1.0};

  Vec2 ToPlane(double u, double v) const { return origin + u * axis_u + v * axis_v; }
  Vec2 ToLocal(Vec2 x) const {
    Vec2 const d = x - origin;
    return {Dot(d, axis_u), Dot(d, axis_v)};
  }
  //! Plane vector of the local components (a, b).
  Vec2 Direction(double a, double b) const { return a * axis_u + b * axis_v; }
};

//! Slab {0 <= x.e <= height} with lateral width W (periodic), solved on
//! a grid of spacing dx aligned with e. width = 0 selects the smallest
//! certified width.
struct SlabGeometry {
  Vec2 e{1.0, 0.0};
  double height = 16.0;
  double width = 0.0;
  double dx = 0.125;
};

//! Either a planar slab problem or a compact target inside a box.
struct MetricDomain {
  enum class Kind { kPlanar, kToSet };
  Kind kind = Kind::kPlanar;
  SlabGeometry slab;
  Vec2 box_lo{-8.0, -8.0};
  Vec2 box_hi{8.0, 8.0};
  double dx = 0.125;
  std::function<bool(Vec2)> target;

  static MetricDomain Planar(SlabGeometry s) {
    auto d = MetricDomain();
    d.kind = Kind::kPlanar;
    d.slab = s;
    return d;
  }
  static MetricDomain ToSet(Vec2 lo, Vec2 hi, double dx, std::function<bool(Vec2)> target) {
    auto d = MetricDomain();
    d.kind = Kind::kToSet;
    d.box_lo = lo;
    d.box_hi = hi;
    d.dx = dx;
    d.target = std::move(target);
    return d;
  }
};

enum class SweepScheme { kAuto, kGodunov, kLaxFriedrichs };

struct MetricOptions {
  double tol = 1e-8;
  int max_sweeps = 200000;
  //! Directions of the radius table for anisotropic Hamiltonians.
  int directions = 128;
  //! Certified width factor: W >= width_factor (r_max / r_min) height.
  double width_factor = 4.0;
  SweepScheme scheme = SweepScheme::kAuto;
};

//! Radius values r_mu at every node of a grid, for `directions` equally
//! spaced plane angles (one when isotropic), read with linear
//! interpolation in the angle.
class RadiusTable {
 public:
  RadiusTable() = default;

  static RadiusTable Build(HamiltonianSpec const& s, double mu, GridFrame const& frame,
                           std::int64_t nu, std::int64_t nv, double u0, double v0, double h,
                           int directions) {
    auto t = RadiusTable();
    t.nd_ = s.isotropic ? 1 : std::max(8, directions);
    t.nodes_ = nu * nv;
    t.values_.resize(static_cast<std::size_t>(t.nodes_ * t.nd_));
    t.rmin_ = std::numeric_limits<double>::infinity();
    t.rmax_ = 0.0;
    auto dirs = std::vector<Vec2>(static_cast<std::size_t>(t.nd_));
    for (int k = 0; k < t.nd_; ++k) dirs[static_cast<std::size_t>(k)] = UnitAt(2 * kPi * k / t.nd_);
    for (std::int64_t j = 0; j < nv; ++j) {
      for (std::int64_t i = 0; i < nu; ++i) {
        Vec2 const x = frame.ToPlane(u0 + static_cast<double>(i) * h, v0 + static_cast<double>(j) * h);
        auto* row = &t.values_[static_cast<std::size_t>((j * nu + i) * t.nd_)];
        for (int k = 0; k < t.nd_; ++k) {
          // An x-independent radius is computed on the first node only.
          double const r = s.x_independent && (i > 0 || j > 0)
                               ? t.values_[static_cast<std::size_t>(k)]
                               : Radius(s, dirs[static_cast<std::size_t>(k)], x, mu);
          row[k] = r;
          t.rmin_ = std::min(t.rmin_, r);
          t.rmax_ = std::max(t.rmax_, r);
        }
        if (t.nd_ > 1) {
          for (int k = 0; k < t.nd_; ++k) {
            double const d = std::abs(row[(k + 1) % t.nd_] - row[k]) * t.nd_ / (2 * kPi);
            t.lip_ = std::max(t.lip_, d);
          }
        }
      }
    }
    if (!(t.rmin_ > 0.0)) {
      throw NotStarShaped(Msg(s.name, ": radius table has non-positive entries at mu = ", mu));
    }
    return t;
  }

  int directions() const { return nd_; }
  double rmin() const { return rmin_; }
  double rmax() const { return rmax_; }
  //! Largest angular difference quotient of the table.
  double angular_lipschitz() const { return lip_; }

  double Iso(std::int64_t node) const { return values_[static_cast<std::size_t>(node * nd_)]; }

  //! r at @a node in the plane direction of angle @a theta.
  double At(std::int64_t node, double theta) const {
    if (nd_ == 1) return Iso(node);
    double f = theta / (2 * kPi) * nd_;
    f -= std::floor(f / nd_) * nd_;
    auto k = static_cast<int>(f);
    if (k >= nd_) k = nd_ - 1;
    double const w = f - k;
    auto const* row = &values_[static_cast<std::size_t>(node * nd_)];
    return (1 - w) * row[k] + w * row[(k + 1) % nd_];
  }

 private:
  int nd_ = 1;
  std::int64_t nodes_ = 0;
  std::vector<double> values_;
  double rmin_ = 0.0;
  double rmax_ = 0.0;
  double lip_ = 0.0;
};

//! Numerical solution m_mu of H(Dm, x) = mu outside a target, stored on
//! a local grid (u lateral, v along e for planar problems).
struct MetricSolution {
  MetricDomain::Kind kind = MetricDomain::Kind::kPlanar;
  SlabGeometry slab;
  GridField m;
  GridFrame frame;
  double mu = 0.0;
  bool periodic_u = false;
  std::vector<std::uint8_t> fixed;
  RadiusTable table;
  std::string scheme;
  int sweeps = 0;
  //! Largest nodal change of the last full sweep cycle.
  double residual = 0.0;
  //! Width the certification required (planar only).
  double width_required = 0.0;

  double h() const { return m.h; }

  //! Bilinear value at the plane point @a x (lateral coordinate wrapped
  //! for planar problems).
  double At(Vec2 x) const {
    Vec2 l = frame.ToLocal(x);
    if (periodic_u) {
      double const w = static_cast<double>(m.nx) * m.h;
      l.x -= m.x0;
      l.x -= std::floor(l.x / w) * w;
      l.x += m.x0;
      if (l.x > m.X(m.nx - 1)) {
        double const a = (l.x - m.X(m.nx - 1)) / m.h;
        double const j = (l.y - m.y0) / m.h;
        auto const jj = static_cast<std::int64_t>(std::clamp(std::floor(j), 0.0, static_cast<double>(m.ny - 2)));
        double const b = j - static_cast<double>(jj);
        double const lo = (1 - b) * m.at(m.nx - 1, jj) + b * m.at(m.nx - 1, jj + 1);
        double const hi = (1 - b) * m.at(0, jj) + b * m.at(0, jj + 1);
        return (1 - a) * lo + a * hi;
      }
    }
    return m.Interpolate(l.x, l.y);
  }

  //! m(s e) on the centerline of a planar problem.
  double Centerline(double s) const { return At(s * slab.e); }
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

//! Solution of (m - a)_+^2 + (m - b)_+^2 = f^2 with a, b the upwind
//! neighbor minima.
inline double GodunovIsoUpdate(double a, double b, double f) {
  if (a > b) std::swap(a, b);
  if (b - a >= f) return a + f;
  return 0.5 * (a + b + std::sqrt(2 * f * f - (b - a) * (b - a)));
}

struct SweepSetup {
  std::int64_t nu = 0;
  std::int64_t nv = 0;
  double h = 1.0;
  bool periodic_u = false;
};

//! Godunov fast sweeping for |Dm| = r(x), four alternating orderings.
inline void SweepGodunov(SweepSetup const& g, RadiusTable const& t,
                         std::vector<std::uint8_t> const& fixed, std::vector<double>& m,
                         MetricOptions const& opt, int& sweeps, double& residual) {
  auto const nu = g.nu;
  auto const nv = g.nv;
  auto fh = std::vector<double>(static_cast<std::size_t>(nu * nv));
  for (std::int64_t n = 0; n < nu * nv; ++n) fh[static_cast<std::size_t>(n)] = t.Iso(n) * g.h;
  sweeps = 0;
  while (true) {
    double cycle_change = 0.0;
    bool reached_new = false;
    for (int ord = 0; ord < 4; ++ord) {
      bool const u_up = ord == 0 || ord == 3;
      bool const v_up = ord < 2;
      for (std::int64_t jj = 0; jj < nv; ++jj) {
        std::int64_t const j = v_up ? jj : nv - 1 - jj;
        double const* below = j > 0 ? &m[static_cast<std::size_t>((j - 1) * nu)] : nullptr;
        double const* above = j + 1 < nv ? &m[static_cast<std::size_t>((j + 1) * nu)] : nullptr;
        double* row = &m[static_cast<std::size_t>(j * nu)];
        auto const* fix = &fixed[static_cast<std::size_t>(j * nu)];
        auto const* frow = &fh[static_cast<std::size_t>(j * nu)];
        for (std::int64_t ii = 0; ii < nu; ++ii) {
          std::int64_t const i = u_up ? ii : nu - 1 - ii;
          if (fix[i]) continue;
          double left;
          double right;
          if (g.periodic_u) {
            left = row[i == 0 ? nu - 1 : i - 1];
            right = row[i + 1 == nu ? 0 : i + 1];
          } else {
            left = i > 0 ? row[i - 1] : kInf;
            right = i + 1 < nu ? row[i + 1] : kInf;
          }
          double const a = std::min(left, right);
          double const b = std::min(below ? below[i] : kInf, above ? above[i] : kInf);
          if (a == kInf && b == kInf) continue;
          double const cand = a == kInf || b == kInf ? std::min(a, b) + frow[i]
                                                     : GodunovIsoUpdate(a, b, frow[i]);
          double const old = row[i];
          if (cand < old) {
            if (old == kInf) {
              reached_new = true;
            } else {
              cycle_change = std::max(cycle_change, old - cand);
            }
            row[i] = cand;
          }
        }
      }
      ++sweeps;
    }
    residual = cycle_change;
    if (!reached_new && cycle_change <= opt.tol) return;
    if (sweeps >= opt.max_sweeps) {
      throw NoConvergence(Msg("Godunov sweeping: change ", cycle_change, " after ", sweeps,
                              " sweeps"));
    }
  }
}

//! Lax-Friedrichs sweeping for gamma(Dm, x) = |Dm| / r(Dm/|Dm|, x) = 1,
//! with Gauss-Seidel updates over four orderings and extrapolated
//! outflow edges. The dissipation 1/r_min + L/r_min^2 (L the table's
//! angular Lipschitz constant) bounds |d gamma / dp_i|.
inline void SweepLaxFriedrichs(SweepSetup const& g, GridFrame const& frame, RadiusTable const& t,
                               std::vector<std::uint8_t> const& fixed, std::vector<double>& m,
                               MetricOptions const& opt, int& sweeps, double& residual) {
  auto const nu = g.nu;
  auto const nv = g.nv;
  double const h = g.h;
  double const sigma = 1.0 / t.rmin() + t.angular_lipschitz() / (t.rmin() * t.rmin());
  double const big = t.rmax() * (static_cast<double>(nu + nv) * h) * 2.0 + 1.0;
  for (std::size_t n = 0; n < m.size(); ++n) {
    if (!fixed[n]) m[n] = std::min(m[n], big);
  }
  auto at = [&](std::int64_t i, std::int64_t j) -> double& {
    return m[static_cast<std::size_t>(j * nu + i)];
  };
  auto edge = [&](std::int64_t i, std::int64_t j) {
    bool const eu = !g.periodic_u && (i == 0 || i == nu - 1);
    bool const ev = j == 0 || j == nv - 1;
    return eu || ev;
  };
  auto extrapolate = [&](double& target, double in1, double in2, double& change) {
    double const cand = std::min(std::max(2 * in1 - in2, in2), target);
    change = std::max(change, target - cand);
    target = cand;
  };
  sweeps = 0;
  while (true) {
    double cycle_change = 0.0;
    for (int ord = 0; ord < 4; ++ord) {
      bool const u_up = ord == 0 || ord == 3;
      bool const v_up = ord < 2;
      for (std::int64_t jj = 0; jj < nv; ++jj) {
        std::int64_t const j = v_up ? jj : nv - 1 - jj;
        for (std::int64_t ii = 0; ii < nu; ++ii) {
          std::int64_t const i = u_up ? ii : nu - 1 - ii;
          auto const n = j * nu + i;
          if (fixed[static_cast<std::size_t>(n)] || edge(i, j)) continue;
          std::int64_t const il = i == 0 ? nu - 1 : i - 1;
          std::int64_t const ir = i + 1 == nu ? 0 : i + 1;
          double const mw = at(il, j);
          double const me = at(ir, j);
          double const ms = at(i, j - 1);
          double const mn = at(i, j + 1);
          double const pu = (me - mw) / (2 * h);
          double const pv = (mn - ms) / (2 * h);
          double gamma = 0.0;
          double const np = std::sqrt(pu * pu + pv * pv);
          if (np > 0.0) {
            Vec2 const d = frame.Direction(pu, pv);
            gamma = np / t.At(n, std::atan2(d.y, d.x));
          }
          double const cand =
              (1.0 - gamma + sigma * (me + mw) / (2 * h) + sigma * (mn + ms) / (2 * h)) /
              (2 * sigma / h);
          double& c = at(i, j);
          if (cand < c) {
            cycle_change = std::max(cycle_change, c - cand);
            c = cand;
          }
        }
      }
      // Outflow edges by extrapolation from the interior.
      for (std::int64_t i = 0; i < nu; ++i) {
        if (nv >= 3) {
          if (!fixed[static_cast<std::size_t>(i)]) extrapolate(at(i, 0), at(i, 1), at(i, 2), cycle_change);
          if (!fixed[static_cast<std::size_t>((nv - 1) * nu + i)]) {
            extrapolate(at(i, nv - 1), at(i, nv - 2), at(i, nv - 3), cycle_change);
          }
        }
      }
      if (!g.periodic_u && nu >= 3) {
        for (std::int64_t j = 0; j < nv; ++j) {
          if (!fixed[static_cast<std::size_t>(j * nu)]) extrapolate(at(0, j), at(1, j), at(2, j), cycle_change);
          if (!fixed[static_cast<std::size_t>(j * nu + nu - 1)]) {
            extrapolate(at(nu - 1, j), at(nu - 2, j), at(nu - 3, j), cycle_change);
          }
        }
      }
      ++sweeps;
    }
    residual = cycle_change;
    if (cycle_change <= opt.tol) return;
    if (sweeps >= opt.max_sweeps) {
      throw NoConvergence(Msg("Lax-Friedrichs sweeping: change ", cycle_change, " after ",
                              sweeps, " sweeps"));
    }
  }
}

inline void RunSweeps(HamiltonianSpec const& s, MetricSolution& sol, MetricOptions const& opt) {
  auto g = SweepSetup{sol.m.nx, sol.m.ny, sol.m.h, sol.periodic_u};
  bool const godunov = opt.scheme == SweepScheme::kGodunov ||
                       (opt.scheme == SweepScheme::kAuto && sol.table.directions() == 1);
  if (godunov && sol.table.directions() != 1) {
    throw InvalidGeometry(Msg(s.name, ": the Godunov sweep needs an isotropic radius"));
  }
  if (godunov) {
    sol.scheme = "godunov-sweeping";
    SweepGodunov(g, sol.table, sol.fixed, sol.m.values, opt, sol.sweeps, sol.residual);
  } else {
    sol.scheme = "lax-friedrichs-sweeping";
    SweepLaxFriedrichs(g, sol.frame, sol.table, sol.fixed, sol.m.values, opt, sol.sweeps,
                       sol.residual);
  }
}

}  // namespace detail

//! Planar metric problem H(Dm, x) = mu in {0 < x.e < height}, m = 0 on
//! {x.e = 0}, solved through |Dm| = r_mu(Dm/|Dm|, x) on a grid aligned
//! with e. The lateral direction is periodic with width W (the
//! environment is read on one period). The width is certified against
//! the realized radius bounds of the table: W >= width_factor
//! (r_max / r_min) height, so that no path reaching the centerline
//! within the solved height can wrap around; with width = 0 the
//! smallest such width is chosen. Throws InvalidGeometry for a width
//! below the certified one.
namespace detail {

//! Grid, radius table and certified width of a planar problem, with
//! m = 0 on the bottom row and +inf elsewhere.
inline MetricSolution PlanarSetup(HamiltonianSpec const& s, double mu, SlabGeometry slab,
                                  MetricOptions const& opt) {
  if (!(mu > 0.0)) throw InvalidGeometry(Msg("metric problem needs mu > 0, got ", mu));
  if (!(slab.dx > 0.0) || !(slab.height > 2 * slab.dx)) {
    throw InvalidGeometry(Msg("slab needs dx > 0 and height > 2 dx, got dx = ", slab.dx,
                              ", height = ", slab.height));
  }
  double const n = Norm(slab.e);
  slab.e = {slab.e.x / n, slab.e.y / n};
  auto sol = MetricSolution();
  sol.kind = MetricDomain::Kind::kPlanar;
  sol.mu = mu;
  sol.periodic_u = true;
  sol.frame = GridFrame{{0.0, 0.0}, Perp(slab.e), slab.e};
  double const h = slab.dx;
  auto const nv = static_cast<std::int64_t>(std::ceil(slab.height / h - 1e-9)) + 1;
  double width = slab.width > 0.0 ? slab.width : opt.width_factor * slab.height;
  for (int attempt = 0; attempt < 8; ++attempt) {
    auto const half = static_cast<std::int64_t>(std::ceil(width / (2 * h) - 1e-9));
    auto const nu = 2 * half;
    sol.slab = slab;
    sol.slab.width = static_cast<double>(nu) * h;
    sol.m = GridField(nu, nv, -static_cast<double>(half) * h, 0.0, h, kInf);
    sol.m.boundary = "periodic-u zero-at-v0 outflow-top";
    sol.table = RadiusTable::Build(s, mu, sol.frame, nu, nv, sol.m.x0, 0.0, h, opt.directions);
    sol.width_required = opt.width_factor * sol.table.rmax() / sol.table.rmin() * slab.height;
    if (sol.slab.width + 1e-9 >= sol.width_required) break;
    if (slab.width > 0.0) {
      throw InvalidGeometry(Msg("slab width ", slab.width, " below the certified width ",
                                sol.width_required, " (r in [", sol.table.rmin(), ", ",
                                sol.table.rmax(), "], height ", slab.height, ")"));
    }
    width = sol.width_required;
  }
  if (sol.slab.width + 1e-9 < sol.width_required) {
    throw InvalidGeometry(Msg("could not certify a slab width (required ", sol.width_required,
                              ")"));
  }
  sol.fixed.assign(static_cast<std::size_t>(sol.m.nx * nv), 0);
  for (std::int64_t i = 0; i < sol.m.nx; ++i) {
    sol.fixed[static_cast<std::size_t>(i)] = 1;
    sol.m.at(i, 0) = 0.0;
  }
  return sol;
}

}  // namespace detail

//! Planar metric problem H(Dm, x) = mu in {0 < x.e < height}, m = 0 on
//! {x.e = 0}, solved through |Dm| = r_mu(Dm/|Dm|, x) on a grid aligned
//! with e. The lateral direction is periodic with width W (the
//! environment is read on one period). The width is certified against
//! the realized radius bounds of the table: W >= width_factor
//! (r_max / r_min) height, so that no path reaching the centerline
//! within the solved height can wrap around; with width = 0 the
//! smallest such width is chosen. Throws InvalidGeometry for a width
//! below the certified one.
inline MetricSolution SolvePlanarMetric(HamiltonianSpec const& s, double mu, SlabGeometry slab,
                                        MetricOptions const& opt = {}) {
  auto sol = detail::PlanarSetup(s, mu, slab, opt);
  detail::RunSweeps(s, sol, opt);
  return sol;
}

//! Smallest certified lateral width for a planar problem (grid-rounded).
inline double CertifiedWidth(HamiltonianSpec const& s, double mu, SlabGeometry slab,
                             MetricOptions const& opt = {}) {
  slab.width = 0.0;
  return detail::PlanarSetup(s, mu, slab, opt).slab.width;
}

//! Metric problem to a rasterized compact target inside a box: nodes
//! where domain.target holds are fixed to 0; the box edges are outflow.
inline MetricSolution SolveMetricToSet(HamiltonianSpec const& s, double mu,
                                       MetricDomain const& domain, MetricOptions const& opt = {}) {
  if (!(mu > 0.0)) throw InvalidGeometry(Msg("metric problem needs mu > 0, got ", mu));
  if (!domain.target) throw InvalidGeometry("metric to set needs a target predicate");
  double const h = domain.dx;
  auto const nu = static_cast<std::int64_t>(std::floor((domain.box_hi.x - domain.box_lo.x) / h + 1e-9)) + 1;
  auto const nv = static_cast<std::int64_t>(std::floor((domain.box_hi.y - domain.box_lo.y) / h + 1e-9)) + 1;
  if (nu < 3 || nv < 3) throw InvalidGeometry("metric box needs at least 3 nodes per axis");
  auto sol = MetricSolution();
  sol.kind = MetricDomain::Kind::kToSet;
  sol.mu = mu;
  sol.periodic_u = false;
  sol.frame = GridFrame{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  sol.m = GridField(nu, nv, domain.box_lo.x, domain.box_lo.y, h, detail::kInf);
  sol.m.boundary = "outflow";
  sol.table = RadiusTable::Build(s, mu, sol.frame, nu, nv, sol.m.x0, sol.m.y0, h, opt.directions);
  sol.fixed.assign(static_cast<std::size_t>(nu * nv), 0);
  std::size_t count = 0;
  for (std::int64_t j = 0; j < nv; ++j) {
    for (std::int64_t i = 0; i < nu; ++i) {
      if (domain.target({sol.m.X(i), sol.m.Y(j)})) {
        sol.fixed[static_cast<std::size_t>(j * nu + i)] = 1;
        sol.m.at(i, j) = 0.0;
        ++count;
      }
    }
  }
  if (count == 0) throw InvalidGeometry("target set contains no grid node");
  detail::RunSweeps(s, sol, opt);
  return sol;
}

//! Dispatches on the domain kind.
inline MetricSolution SolveMetric(HamiltonianSpec const& s, double mu, MetricDomain const& d,
                                  MetricOptions const& opt = {}) {
  if (d.kind == MetricDomain::Kind::kPlanar) return SolvePlanarMetric(s, mu, d.slab, opt);
  return SolveMetricToSet(s, mu, d, opt);
}

//! Local upwind gradient at node (i, j): along each axis, the one-sided
//! difference toward the smaller neighbor, clipped at 0 when both
//! neighbors are larger. Returned in local components.
inline Vec2 UpwindGradient(MetricSolution const& sol, std::int64_t i, std::int64_t j) {
  auto const& m = sol.m;
  double const c = m.at(i, j);
  auto comp = [&](double lo, double hi) {
    if (lo <= hi) return std::max(c - lo, 0.0) / m.h;
    return -std::max(c - hi, 0.0) / m.h;
  };
  std::int64_t const il = i == 0 ? (sol.periodic_u ? m.nx - 1 : -1) : i - 1;
  std::int64_t const ir = i + 1 == m.nx ? (sol.periodic_u ? 0 : -1) : i + 1;
  double const w = il >= 0 ? m.at(il, j) : detail::kInf;
  double const e = ir >= 0 ? m.at(ir, j) : detail::kInf;
  double const s = j > 0 ? m.at(i, j - 1) : detail::kInf;
  double const n = j + 1 < m.ny ? m.at(i, j + 1) : detail::kInf;
  return {comp(w, e), comp(s, n)};
}

struct ResidualStats {
  double max = 0.0;
  double p99 = 0.0;
  std::size_t nodes = 0;
};

//! Residual |H(p, x) - mu| of the original equation with the upwind
//! gradient p, over non-target nodes away from outflow edges.
inline ResidualStats TransformResidual(HamiltonianSpec const& s, MetricSolution const& sol) {
  auto vals = std::vector<double>();
  auto const& m = sol.m;
  for (std::int64_t j = 1; j + 1 < m.ny; ++j) {
    for (std::int64_t i = sol.periodic_u ? 0 : 1; i < (sol.periodic_u ? m.nx : m.nx - 1); ++i) {
      if (sol.fixed[static_cast<std::size_t>(j * m.nx + i)]) continue;
      Vec2 const g = UpwindGradient(sol, i, j);
      Vec2 const p = sol.frame.Direction(g.x, g.y);
      Vec2 const x = sol.frame.ToPlane(m.X(i), m.Y(j));
      vals.push_back(std::abs(s(p, x) - sol.mu));
    }
  }
  auto r = ResidualStats();
  r.nodes = vals.size();
  if (vals.empty()) return r;
  r.max = *std::max_element(vals.begin(), vals.end());
  auto const k = static_cast<std::size_t>(0.99 * static_cast<double>(vals.size() - 1));
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(k), vals.end());
  r.p99 = vals[k];
  return r;
}

//! Largest Euclidean norm of the upwind gradient over non-target nodes.
inline double MaxUpwindGradient(MetricSolution const& sol) {
  double best = 0.0;
  auto const& m = sol.m;
  for (std::int64_t j = 1; j + 1 < m.ny; ++j) {
    for (std::int64_t i = sol.periodic_u ? 0 : 1; i < (sol.periodic_u ? m.nx : m.nx - 1); ++i) {
      if (sol.fixed[static_cast<std::size_t>(j * m.nx + i)]) continue;
      Vec2 const g = UpwindGradient(sol, i, j);
      best = std::max(best, Norm(g));
    }
  }
  return best;
}

struct LogSumExpReport {
  double max_residual = 0.0;
  std::size_t points = 0;
};

//! Subsolution device w(x, t) = -(1/lambda) log(exp(-lambda m(x)) +
//! exp(-lambda t)) built from a numerical m. Evaluates
//! w_t + |Dw| / r(Dw/|Dw|, x) - 1 with central differences at nodes
//! where both one-sided differences agree within @a smooth_tol per axis
//! (smooth sample points), and returns the largest positive part.
inline LogSumExpReport LogSumExpResidual(MetricSolution const& sol, double lambda, double t,
                                         double smooth_tol = 0.05) {
  auto rep = LogSumExpReport();
  auto const& m = sol.m;
  double const h = m.h;
  for (std::int64_t j = 1; j + 1 < m.ny; ++j) {
    for (std::int64_t i = 1; i + 1 < m.nx; ++i) {
      if (sol.fixed[static_cast<std::size_t>(j * m.nx + i)]) continue;
      double const c = m.at(i, j);
      double const dw = (c - m.at(i - 1, j)) / h;
      double const de = (m.at(i + 1, j) - c) / h;
      double const ds = (c - m.at(i, j - 1)) / h;
      double const dn = (m.at(i, j + 1) - c) / h;
      if (std::abs(dw - de) > smooth_tol || std::abs(ds - dn) > smooth_tol) continue;
      double const pu = 0.5 * (dw + de);
      double const pv = 0.5 * (ds + dn);
      // Z^{-1} exp(-lambda m) and Z^{-1} exp(-lambda t) in logistic form.
      double const wm = 1.0 / (1.0 + std::exp(lambda * (c - t)));
      double const wt = 1.0 - wm;
      double const np = std::hypot(pu, pv);
      double gamma = 0.0;
      if (np > 0.0) {
        Vec2 const d = sol.frame.Direction(pu, pv);
        gamma = np / sol.table.At(j * m.nx + i, std::atan2(d.y, d.x));
      }
      double const res = wt + wm * gamma - 1.0;
      rep.max_residual = std::max(rep.max_residual, res);
      ++rep.points;
    }
  }
  return rep;
}

struct LocalizationReport {
  double t = 0.0;
  double tol = 0.0;
  std::size_t region_nodes = 0;
  //! Largest |r_1 - r_2| over the sublevel {m_1 <= t}.
  double max_radius_diff = 0.0;
  bool hypothesis_holds = false;
  //! Largest m_1 - m_2 over the sublevel.
  double max_excess = 0.0;
  bool conclusion_holds = false;
  //! Largest m_{mu - eps} - m_{mu + eps} over all nodes (H_1).
  double comparison_excess = 0.0;
  bool comparison_holds = false;
};

//! Localization in sublevels: solves for H_1 and H_2 on the same domain,
//! reports whether H_1 and H_2 agree on R_t = {m_1 <= t} (hypothesis),
//! whether m_1 <= m_2 + tol there (conclusion), and whether the
//! sub/super pair built from levels mu -+ eps satisfies
//! m_{mu-eps} <= m_{mu+eps} + tol everywhere. tol = r_max h, the
//! one-cell grid tolerance.
inline LocalizationReport LocalizationCheck(HamiltonianSpec const& h1, HamiltonianSpec const& h2,
                                            double mu, double t, MetricDomain domain,
                                            double eps_rel = 0.05, MetricOptions const& opt = {}) {
  double const mu_lo = mu * (1 - eps_rel);
  double const mu_hi = mu * (1 + eps_rel);
  if (domain.kind == MetricDomain::Kind::kPlanar && domain.slab.width <= 0.0) {
    // One common certified width so that all four solves share a grid.
    domain.slab.width = std::max({CertifiedWidth(h1, mu, domain.slab, opt),
                                  CertifiedWidth(h2, mu, domain.slab, opt),
                                  CertifiedWidth(h1, mu_lo, domain.slab, opt),
                                  CertifiedWidth(h1, mu_hi, domain.slab, opt)});
  }
  auto const s1 = SolveMetric(h1, mu, domain, opt);
  auto const s2 = SolveMetric(h2, mu, domain, opt);
  auto rep = LocalizationReport();
  rep.t = t;
  rep.tol = std::max(s1.table.rmax(), s2.table.rmax()) * s1.m.h;
  auto const nodes = s1.m.nx * s1.m.ny;
  int const nd = std::max(s1.table.directions(), s2.table.directions());
  for (std::int64_t n = 0; n < nodes; ++n) {
    if (s1.fixed[static_cast<std::size_t>(n)]) continue;
    double const m1 = s1.m.values[static_cast<std::size_t>(n)];
    if (!(m1 <= t)) continue;
    ++rep.region_nodes;
    for (int k = 0; k < nd; ++k) {
      double const th = 2 * kPi * k / nd;
      rep.max_radius_diff =
          std::max(rep.max_radius_diff, std::abs(s1.table.At(n, th) - s2.table.At(n, th)));
    }
    rep.max_excess = std::max(rep.max_excess, m1 - s2.m.values[static_cast<std::size_t>(n)]);
  }
  rep.hypothesis_holds = rep.max_radius_diff <= 1e-12;
  rep.conclusion_holds = rep.max_excess <= rep.tol;
  auto const lo = SolveMetric(h1, mu_lo, domain, opt);
  auto const hi = SolveMetric(h1, mu_hi, domain, opt);
  rep.comparison_excess = -detail::kInf;
  for (std::size_t n = 0; n < lo.m.values.size(); ++n) {
    rep.comparison_excess = std::max(rep.comparison_excess, lo.m.values[n] - hi.m.values[n]);
  }
  rep.comparison_holds = rep.comparison_excess <= rep.tol;
  return rep;
}

}  // namespace hjlab
