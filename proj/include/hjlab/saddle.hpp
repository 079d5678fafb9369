#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hjlab/core.hpp"
#include "hjlab/potential.hpp"

namespace hjlab {

//! Planar scalar function of (xi_1, xi_2).
using PlanarFunction = std::function<double(double, double)>;

//! Orthonormal frame: h decreases along e1 and increases along e2.
struct Frame {
  Vec2 e1{1.0, 0.0};
  Vec2 e2{0.0, 1.0};
  int angle_index = 0;
  int angle_count = 512;
};

struct SaddleDetection {
  bool found = false;
  Frame frame;
  int valid_angles = 0;
};

//! Unit vector orthogonal to @a e, chosen in the half plane
//! {v_2 > 0} or {v_2 = 0, v_1 > 0} so that the frame is canonical.
//! Components below 1e-15 in magnitude are snapped to zero first, so
//! quantized axis directions produce exact axis frames.
inline Vec2 SnapAxis(Vec2 v) {
  if (std::abs(v.x) < 1e-15) v.x = 0.0;
  if (std::abs(v.y) < 1e-15) v.y = 0.0;
  return v;
}

inline Vec2 CanonicalNormal(Vec2 e) {
  e = SnapAxis(e);
  Vec2 f{-e.y, e.x};
  if (f.y < 0.0 || (f.y == 0.0 && f.x < 0.0)) f = Vec2{-f.x, -f.y};
  return f;
}

//! Angle-quantized search for a frame with
//! h(xi0 + s e1) < h(xi0) < h(xi0 + s e2) at every grid s in
//! [-eta, eta] \ {0}. Among valid angles the center of the longest
//! cyclic run is returned, which makes the frame stable under affine
//! rescaling of h and centered for symmetric saddles.
inline SaddleDetection DetectSaddle(PlanarFunction const& h, Vec2 xi0,
                                    double eta, double grid_res,
                                    int angle_count = 512) {
  if (!(eta > 0.0) || !(grid_res > 0.0) || grid_res > eta / 64.0 * (1 + 1e-12)) {
    throw InvalidGeometry(Msg("need eta > 0 and 0 < grid_res <= eta/64, got eta=",
                              eta, " grid_res=", grid_res));
  }
  double const h0 = h(xi0.x, xi0.y);
  int const steps = static_cast<int>(std::floor(eta / grid_res + 1e-9));
  auto along = [&](Vec2 dir, double s) {
    return h(xi0.x + s * dir.x, xi0.y + s * dir.y);
  };
  std::vector<char> valid(angle_count, 0);
  int count = 0;
  for (int j = 0; j < angle_count; ++j) {
    Vec2 const e = UnitAt(kPi * j / angle_count);
    Vec2 const f = CanonicalNormal(e);
    bool ok = true;
    for (int i = 1; i <= steps + 1 && ok; ++i) {
      double const s = i <= steps ? i * grid_res : eta;
      for (double sg : {-1.0, 1.0}) {
        if (!(along(e, sg * s) < h0 && h0 < along(f, sg * s))) {
          ok = false;
          break;
        }
      }
    }
    valid[j] = ok;
    count += ok;
  }
  auto out = SaddleDetection();
  out.valid_angles = count;
  if (count == 0) return out;
  int best_start = 0;
  int best_len = 0;
  if (count == angle_count) {
    best_len = angle_count;
  } else {
    for (int j = 0; j < angle_count; ++j) {
      if (!valid[j] || valid[(j + angle_count - 1) % angle_count]) continue;
      int len = 0;
      while (len < angle_count && valid[(j + len) % angle_count]) ++len;
      if (len > best_len) {
        best_len = len;
        best_start = j;
      }
    }
  }
  int const center = (best_start + (best_len - 1) / 2) % angle_count;
  out.found = true;
  out.frame.e1 = SnapAxis(UnitAt(kPi * center / angle_count));
  out.frame.e2 = CanonicalNormal(out.frame.e1);
  out.frame.angle_index = center;
  out.frame.angle_count = angle_count;
  return out;
}

//! Normalized saddle g(xi) = (h(xi0 + eta R xi) - h(xi0)) / lambda with
//! R = [e1 e2], so that g(0) = 0, g(+-e1) <= -3, g(+-e2) >= 3, plus
//! certified slab constants (delta, c_delta).
struct SaddleNormalization {
  PlanarFunction h;
  Vec2 xi0;
  double eta = 1.0;
  Frame frame;
  double h0 = 0.0;
  double lambda = 1.0;
  double delta = 0.0;
  double c_delta = 0.0;
  double c_delta_sampled = 0.0;
  double c_delta_margin = 0.0;

  double operator()(double a, double b) const {
    double const p1 = xi0.x + eta * (a * frame.e1.x + b * frame.e2.x);
    double const p2 = xi0.y + eta * (a * frame.e1.y + b * frame.e2.y);
    return (h(p1, p2) - h0) / lambda;
  }
};

//! Sampled extremum of g over the closed disc B_r(c): polar grid with
//! 32 radii and 128 angles plus the center.
template <typename G>
double DiscExtremum(G const& g, Vec2 c, double r, bool want_max) {
  double best = g(c.x, c.y);
  for (int i = 1; i <= 32; ++i) {
    double const rr = r * i / 32.0;
    for (int j = 0; j < 128; ++j) {
      double const a = 2.0 * kPi * j / 128.0;
      double const v = g(c.x + rr * std::cos(a), c.y + rr * std::sin(a));
      best = want_max ? std::max(best, v) : std::min(best, v);
    }
  }
  return best;
}

//! Certified slab constant for a given delta: the sampled value of
//! max( sup_{|xi_2|<=delta,|xi_1|<=1} g, sup_{|xi_1|<=delta,|xi_2|<=1} -g )
//! on a grid of spacing @a spacing, plus (sampled Lipschitz bound) times
//! the largest distance from a slab point to the grid.
struct SlabConstant {
  double sampled = 0.0;
  double margin = 0.0;
  double value() const { return sampled + margin; }
};

template <typename G>
SlabConstant ComputeSlabConstant(G const& g, double delta, double spacing) {
  auto out = SlabConstant();
  out.sampled = -std::numeric_limits<double>::infinity();
  double lip = 0.0;
  int const nl = static_cast<int>(std::ceil(1.0 / spacing));
  int const ns = std::max(2, static_cast<int>(std::ceil(delta / spacing)));
  double const hl = 1.0 / nl;
  double const hs = delta / ns;
  for (int pass = 0; pass < 2; ++pass) {
    for (int i = -nl; i <= nl; ++i) {
      for (int j = -ns; j <= ns; ++j) {
        double const along = i * hl;
        double const across = j * hs;
        // pass 0: |xi_2| <= delta, value g; pass 1: |xi_1| <= delta, value -g.
        double const a = pass == 0 ? along : across;
        double const b = pass == 0 ? across : along;
        double const v = pass == 0 ? g(a, b) : -g(a, b);
        out.sampled = std::max(out.sampled, v);
        double const ga = (g(a + 0.5 * hl, b) - g(a - 0.5 * hl, b)) / hl;
        double const gb = (g(a, b + 0.5 * hl) - g(a, b - 0.5 * hl)) / hl;
        lip = std::max(lip, std::hypot(ga, gb));
      }
    }
  }
  out.margin = 1.1 * lip * 0.5 * std::hypot(hl, hs);
  return out;
}

//! Normalizes h in the frame returned by DetectSaddle. delta is the
//! largest dyadic 2^-j (1 <= j <= 12) with g <= -2 on B_delta(+-e1) and
//! g >= 2 on B_delta(+-e2), and c_delta the certified slab constant.
inline SaddleNormalization Normalize(PlanarFunction h, Vec2 xi0, Frame frame,
                                     double eta, double slab_spacing = 1.0 / 512) {
  auto n = SaddleNormalization();
  n.h = std::move(h);
  n.xi0 = xi0;
  n.eta = eta;
  n.frame = frame;
  n.h0 = n.h(xi0.x, xi0.y);
  n.lambda = 1.0;
  double const m = std::min({-n(1.0, 0.0), -n(-1.0, 0.0), n(0.0, 1.0), n(0.0, -1.0)});
  if (!(m > 0.0)) {
    throw InvalidGeometry("frame does not witness a strict saddle at radius eta");
  }
  n.lambda = m / 3.0;
  for (int j = 1; j <= 12; ++j) {
    double const delta = std::ldexp(1.0, -j);
    bool ok = true;
    for (double s : {-1.0, 1.0}) {
      ok = ok && DiscExtremum(n, Vec2{s, 0.0}, delta, true) <= -2.0;
      ok = ok && DiscExtremum(n, Vec2{0.0, s}, delta, false) >= 2.0;
    }
    if (ok) {
      n.delta = delta;
      break;
    }
  }
  if (n.delta == 0.0) {
    throw NoValidDelta("no dyadic delta >= 2^-12 satisfies the ball conditions");
  }
  auto const slab = ComputeSlabConstant(n, n.delta, slab_spacing);
  n.c_delta_sampled = slab.sampled;
  n.c_delta_margin = slab.margin;
  n.c_delta = slab.value();
  return n;
}

enum class BarrierSign { kUpper, kLower };

//! Parameters of the barrier pair. The upper barrier
//!   v_+ = -(1 - c) t + |x_2 - X_2| + (delta |x_1 - X_1| + 2 (t - T))_+
//! sits on a horizontal segment with V = -1. The lower barrier mirrors
//! it across the diagonal with opposite sign:
//!   v_- = (1 - c) t - |x_1 - X_1| - (delta |x_2 - X_2| + 2 (t - T))_+
//! and sits on a vertical segment with V = +1.
struct BarrierParams {
  Vec2 center;
  double horizon = 0.0;
  double delta = 0.1;
  double c_delta = 0.03;
  BarrierSign sign = BarrierSign::kUpper;
};

inline double BarrierValue(BarrierParams const& p, Vec2 x, double t) {
  if (p.sign == BarrierSign::kUpper) {
    return -(1.0 - p.c_delta) * t + std::abs(x.y - p.center.y) +
           std::max(p.delta * std::abs(x.x - p.center.x) + 2.0 * (t - p.horizon), 0.0);
  }
  return (1.0 - p.c_delta) * t - std::abs(x.x - p.center.x) -
         std::max(p.delta * std::abs(x.y - p.center.y) + 2.0 * (t - p.horizon), 0.0);
}

//! Space-time sample grid for the region check: a box of half-widths
//! (along, across) around the segment center, with nodes every
//! @a spacing, at @a time_steps - 1 interior times of (0, T).
struct BarrierGrid {
  double along_half_width = 0.0;
  double across_half_width = 8.0;
  double along_spacing = 1.0;
  double across_spacing = 0.25;
  int time_steps = 64;
};

struct RegionStats {
  long long nodes = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  Vec2 argmin_x;
  double argmin_t = 0.0;
};

struct RegionReport {
  std::array<RegionStats, 5> regions;
  double initial_min = std::numeric_limits<double>::infinity();
  double tolerance = 1e-9;

  bool AllPass() const {
    for (auto const& r : regions) {
      if (r.nodes == 0 || r.min_slack < -tolerance) return false;
    }
    return initial_min >= -tolerance;
  }
};

inline char const* RegionName(int r) {
  static char const* names[] = {"I", "II", "III", "IV", "V"};
  return names[r];
}

namespace detail {

//! Minimum of g over the box [a0, a1] x [b0, b1], sampled on a 65 x 65
//! grid that contains the corners and edges.
template <typename G>
double BoxMin(G const& g, double a0, double a1, double b0, double b1) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 64; ++i) {
    for (int j = 0; j <= 64; ++j) {
      double const a = a0 + (a1 - a0) * i / 64.0;
      double const b = b0 + (b1 - b0) * j / 64.0;
      best = std::min(best, g(a, b));
    }
  }
  return best;
}

}  // namespace detail

//! Checks the viscosity inequality of the barrier region by region.
//! Nodes of the space-time grid are classified by the position relative
//! to the moving kink |x_along - X_along| = (2/delta)(T - t) and to the
//! segment line. Kink points themselves (regions III and IV) are added
//! analytically for every time and across-coordinate of the grid.
//! For the upper barrier the checked quantity is s + g(xi) - V(x) over
//! the listed sub-differential sets; for the lower barrier it is
//! -(s + g(xi) - V(x)) over the mirrored super-differential sets.
//! The minimum of g over each set does not depend on x, so it is
//! computed once per set.
template <typename G>
RegionReport VerifyBarrier(G const& g, PotentialField const& field,
                           BarrierParams const& p, BarrierGrid const& grid,
                           double tol = 1e-9) {
  bool const upper = p.sign == BarrierSign::kUpper;
  double const c = p.c_delta;
  double const dl = p.delta;
  // Work in (along, across) coordinates: along = x_1 for the upper
  // barrier and x_2 for the lower one.
  auto to_x = [&](double along, double across) {
    return upper ? Vec2{along, across} : Vec2{across, along};
  };
  // Sign-adjusted Hamiltonian on (along, across) momentum coordinates.
  // For the lower barrier slack = -(s + g - V), i.e. (-s) + (-g) - (-V).
  auto gq = [&](double a, double b) {
    return upper ? g(a, b) : -g(b, a);
  };
  double const sv = upper ? 1.0 : -1.0;
  Vec2 const ctr = upper ? p.center : Vec2{p.center.y, p.center.x};

  // Minimum of (sign-adjusted) g over each sub-differential set and the
  // smallest admissible (sign-adjusted) time derivative.
  double const g_seg = detail::BoxMin(gq, 0.0, 0.0, -1.0, 1.0);
  double const g_plus = gq(0.0, 1.0);
  double const g_minus = gq(0.0, -1.0);
  double const g_kink_plus = detail::BoxMin(gq, -dl, dl, 1.0, 1.0);
  double const g_kink_minus = detail::BoxMin(gq, -dl, dl, -1.0, -1.0);
  double const g_slab = detail::BoxMin(gq, -dl, dl, -1.0, 1.0);
  double const s_inner = -1.0 + c;
  double const s_kink_line = -1.0;
  double const s_kink_seg = -1.0 + c;
  double const s_outer = 1.0 + c;

  auto report = RegionReport();
  report.tolerance = tol;
  auto record = [&](int region, Vec2 x, double t, double slack) {
    auto& r = report.regions[region];
    ++r.nodes;
    if (slack < r.min_slack) {
      r.min_slack = slack;
      r.argmin_x = x;
      r.argmin_t = t;
    }
  };
  auto vq = [&](Vec2 x, double t) {
    double const xx[2] = {x.x, x.y};
    return sv * field.Eval(xx, t);
  };

  int const na = static_cast<int>(std::floor(grid.along_half_width / grid.along_spacing));
  int const nc = static_cast<int>(std::floor(grid.across_half_width / grid.across_spacing));
  for (int k = 1; k < grid.time_steps; ++k) {
    double const t = p.horizon * k / grid.time_steps;
    double const reach = 2.0 / dl * (p.horizon - t);
    for (int j = -nc; j <= nc; ++j) {
      double const across = ctr.y + j * grid.across_spacing;
      bool const on_seg = j == 0;
      double const side = across > ctr.y ? 1.0 : -1.0;
      // Grid nodes strictly inside or outside the kink.
      for (int i = -na; i <= na; ++i) {
        double const along = ctr.x + i * grid.along_spacing;
        double const a = std::abs(along - ctr.x);
        if (a == reach) continue;  // handled analytically below
        Vec2 const x = to_x(along, across);
        double const v = vq(x, t);
        if (a < reach) {
          if (on_seg) {
            if (std::abs(v + 1.0) > 1e-12) {
              throw RegionMismatch(Msg("potential ", sv * v, " on the segment at (",
                                       x.x, ", ", x.y, ")"));
            }
            record(0, x, t, s_inner + g_seg - v);
          } else {
            record(1, x, t, s_inner + (side > 0 ? g_plus : g_minus) - v);
          }
        } else {
          record(4, x, t, s_outer + g_slab - v);
        }
      }
      // Kink points.
      for (double sg : {-1.0, 1.0}) {
        Vec2 const x = to_x(ctr.x + sg * reach, across);
        double const v = vq(x, t);
        if (on_seg) {
          record(3, x, t, s_kink_seg + g_slab - v);
        } else {
          record(2, x, t, s_kink_line + (side > 0 ? g_kink_plus : g_kink_minus) - v);
        }
      }
    }
  }
  // Initial condition: v_+(x, 0) >= 0 and v_-(x, 0) <= 0.
  for (int j = -nc; j <= nc; ++j) {
    for (int i = -na; i <= na; ++i) {
      Vec2 const x = to_x(ctr.x + i * grid.along_spacing, ctr.y + j * grid.across_spacing);
      report.initial_min = std::min(report.initial_min, sv * BarrierValue(p, x, 0.0));
    }
  }
  return report;
}

//! Realization conditioned on the barrier segment: a lattice centered at
//! the origin whose core holds a planted cube of length @a length
//! centered at the rounded barrier center, horizontal for the upper
//! barrier and vertical for the lower one.
struct BarrierEnvironment {
  LatticeRealization lattice;
  PotentialField field;
  LatticePoint plant{};
  std::int64_t length = 0;
};

//! Smallest dyadic length >= (4/delta) T, the full segment length the
//! barrier needs over the whole horizon.
inline std::int64_t FullSegmentLength(BarrierParams const& p) {
  double const need = 4.0 / p.delta * p.horizon;
  std::int64_t len = 4;
  while (static_cast<double>(len) < need) len *= 2;
  return len;
}

//! Builds a planted environment. @a margin extra lattice units are kept
//! valid beyond the segment ends in every direction.
inline BarrierEnvironment MakeBarrierEnvironment(BarrierParams const& p,
                                                 std::int64_t length, int cap_exp,
                                                 std::uint64_t seed,
                                                 std::int64_t margin = 0) {
  auto env = BarrierEnvironment();
  env.length = length;
  env.plant = MakePoint({static_cast<std::int32_t>(std::lround(p.center.x)),
                         static_cast<std::int32_t>(std::lround(p.center.y))});
  std::int64_t const cap = std::int64_t{1} << cap_exp;
  std::int64_t const off = std::max(std::abs(std::int64_t{env.plant[0]}),
                                    std::abs(std::int64_t{env.plant[1]}));
  std::int64_t const radius = length / 2 + off + margin + cap + cap / 2 + 2;
  if (radius > (1 << 20)) throw InvalidGeometry("barrier environment too large");
  auto lat = BuildLattice(2, 1, static_cast<int>(radius), cap_exp, seed);
  auto const orient = p.sign == BarrierSign::kUpper ? Orientation::kHorizontal
                                                    : Orientation::kVertical;
  env.lattice = PlantSegment(std::move(lat), orient, env.plant, length);
  env.field = PotentialField::FromLattice(env.lattice);
  return env;
}

}  // namespace hjlab
