#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "hjlab/core.hpp"
#include "hjlab/grid.hpp"
#include "hjlab/hamiltonian.hpp"
#include "hjlab/potential.hpp"
#include "hjlab/rng.hpp"
#include "hjlab/saddle.hpp"

namespace hjlab {

//! Potential term of the evolution equation: a constant, or a field
//! evaluated at (x, t) (time dependent when the field carries a shear
//! velocity). Non-owning.
class PotentialSource {
 public:
  static PotentialSource Constant(double c) {
    auto s = PotentialSource();
    s.constant_ = c;
    return s;
  }
  //! V(x / scale, t / scale); scale = epsilon gives the rescaled problem.
  static PotentialSource Field(PotentialField const& f, double scale = 1.0) {
    auto s = PotentialSource();
    s.field_ = &f;
    s.scale_ = scale;
    return s;
  }
  bool IsStatic() const {
    if (field_ == nullptr) return true;
    return field_->p0()[0] == 0.0 && field_->p0()[1] == 0.0;
  }
  double operator()(double x1, double x2, double t) const {
    if (field_ == nullptr) return constant_;
    return field_->Eval2(x1 / scale_, x2 / scale_, t / scale_);
  }

 private:
  double constant_ = 0.0;
  double scale_ = 1.0;
  PotentialField const* field_ = nullptr;
};

enum class Dissipation {
  //! Per node: bounds of |dg/dp_i| over the box spanned by the one-sided
  //! differences at that node.
  kLocal,
  //! Declared bounds over the whole gradient box.
  kGlobal,
  //! Exact Godunov flux of a separable Hamiltonian: per axis the minimum
  //! (maximum) of the one-dimensional part over the interval spanned by
  //! the one-sided differences when they increase (decrease). Adds no
  //! dissipation at local extrema, so thin wells keep their exact rate.
  kGodunov,
};

//! u_t + g(Du) - V(x, t) = 0 on [-L, L]^2 x [0, T], u(x, 0) = xi0 . x.
struct EvolutionProblem {
  double half_width = 0.0;
  double dx = 0.125;
  double horizon = 1.0;
  Vec2 xi0{0.0, 0.0};
  //! Optional general initial datum; replaces xi0 . x when set. Its
  //! difference quotients must lie in the declared box.
  std::function<double(double, double)> initial;
  //! Declared box containing every one-sided difference quotient of the
  //! numerical solution; checked at every update (CFLViolation).
  GradientBox box = GradientBox::Symmetric(1.1);
  Dissipation dissipation = Dissipation::kLocal;
  //! Update only |x_i| <= Lambda_i (T - t) + cone_margin, where Lambda_i
  //! bounds |dg/dp_i| on the box. Outside, values can no longer reach the
  //! origin by time T.
  bool light_cone = true;
  double cone_margin = 2.0;
  double cfl = 0.95;
  int workers = 1;
  //! Enforce L >= max_i Lambda_i T + 2.
  bool check_domain = true;
  //! Called every observe_every steps (and at the end) when set.
  std::function<void(double t, GridField const& u, std::int64_t i0, std::int64_t i1,
                     std::int64_t j0, std::int64_t j1)>
      observer;
  int observe_every = 1;
};

//! u(0, t) at every time step.
struct AverageTrace {
  double dt = 0.0;
  std::vector<double> t;
  std::vector<double> u;
  //! Declared bound on |d/dt u(0, t)|: sup |g| over the box + sup |V|.
  double time_lipschitz = 0.0;

  //! Indices 2^j (j >= 0) plus the final step.
  std::vector<std::size_t> DyadicIndices() const {
    auto idx = std::vector<std::size_t>();
    for (std::size_t k = 1; k < t.size(); k *= 2) idx.push_back(k);
    if (t.size() > 1 && (idx.empty() || idx.back() != t.size() - 1)) idx.push_back(t.size() - 1);
    return idx;
  }

  double MaxTimeSlope() const {
    double s = 0.0;
    for (std::size_t k = 1; k < u.size(); ++k) {
      s = std::max(s, std::abs(u[k] - u[k - 1]) / (t[k] - t[k - 1]));
    }
    return s;
  }

  //! Extremes of u(0, t)/t over the window [t_lo, t_hi].
  std::pair<double, double> RatioRange(double t_lo, double t_hi) const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 1; k < t.size(); ++k) {
      if (t[k] < t_lo || t[k] > t_hi) continue;
      lo = std::min(lo, u[k] / t[k]);
      hi = std::max(hi, u[k] / t[k]);
    }
    return {lo, hi};
  }

  double Final() const { return u.back(); }
  double FinalRatio() const { return u.back() / t.back(); }
};

struct EvolutionStats {
  std::int64_t steps = 0;
  double dt = 0.0;
  Vec2 declared_alpha;
  //! Largest local dissipation actually used, per axis.
  Vec2 max_local_alpha;
  double updates = 0.0;
  double seconds = 0.0;
  std::int64_t nodes_per_axis = 0;
};

struct EvolutionResult {
  AverageTrace trace;
  //! Final field; values are current only within |x_i| <= valid_radius_i.
  GridField field;
  Vec2 valid_radius;
  EvolutionStats stats;
};

namespace detail {

//! One step on rows [j0, j1) of columns [i0, i1]; row j is written to
//! un + (j - j0) * out_stride (column-indexed like u). Returns true when
//! some one-sided difference quotient left the declared box. The loop
//! body is branch free so that it vectorizes.
template <Dissipation Scheme, PlanarHamiltonian G>
bool StepRows(G const& g, double const* __restrict u, double* __restrict un,
              std::int64_t out_stride, double const* __restrict v, std::int64_t nx,
              std::int64_t i0, std::int64_t i1,
              std::int64_t j0, std::int64_t j1, double dx, double dt, GradientBox const& box,
              Vec2 declared) {
  double const inv = 1.0 / dx;
  double const half_dt_inv = 0.5 * dt * inv;
  double const lo1 = box.lo1 - 1e-12, hi1 = box.hi1 + 1e-12;
  double const lo2 = box.lo2 - 1e-12, hi2 = box.hi2 + 1e-12;
  int bad = 0;
  for (std::int64_t j = j0; j < j1; ++j) {
    double const* __restrict uc = u + j * nx;
    double const* __restrict ud = uc - nx;
    double const* __restrict uu = uc + nx;
    double const* __restrict vr = v + j * nx;
    double* __restrict out = un + (j - j0) * out_stride;
    for (std::int64_t i = i0; i <= i1; ++i) {
      double const c = uc[i];
      double const d1m = c - uc[i - 1];
      double const d1p = uc[i + 1] - c;
      double const d2m = c - ud[i];
      double const d2p = uu[i] - c;
      double const p1m = d1m * inv, p1p = d1p * inv;
      double const p2m = d2m * inv, p2p = d2p * inv;
      double const a1lo = p1m < p1p ? p1m : p1p;
      double const a1hi = p1m < p1p ? p1p : p1m;
      double const a2lo = p2m < p2p ? p2m : p2p;
      double const a2hi = p2m < p2p ? p2p : p2m;
      bad |= (a1lo < lo1) | (a1hi > hi1) | (a2lo < lo2) | (a2hi > hi2);
      if constexpr (Scheme == Dissipation::kGodunov) {
        double const h = g.Godunov1(p1m, p1p) + g.Godunov2(p2m, p2p);
        out[i] = c - dt * (h - vr[i]);
      } else {
        Vec2 s = declared;
        if constexpr (Scheme == Dissipation::kLocal) {
          s = g.SpeedBound(GradientBox{a1lo, a1hi, a2lo, a2hi});
        }
        double const h = g(0.5 * (p1m + p1p), 0.5 * (p2m + p2p));
        out[i] = c - dt * (h - vr[i]) + half_dt_inv * (s.x * (d1p - d1m) + s.y * (d2p - d2m));
      }
    }
  }
  return bad != 0;
}

//! Largest |dg/dp_i| used by the local scheme over the rectangle, and the
//! first node whose difference quotients leave @a box (or -1).
template <PlanarHamiltonian G>
std::pair<Vec2, std::pair<std::int64_t, std::int64_t>> ScanRectangle(
    G const& g, double const* u, std::int64_t nx, std::int64_t i0, std::int64_t i1,
    std::int64_t j0, std::int64_t j1, double dx, GradientBox const& box) {
  Vec2 alpha{0.0, 0.0};
  std::pair<std::int64_t, std::int64_t> where{-1, -1};
  for (std::int64_t j = j0; j <= j1; ++j) {
    for (std::int64_t i = i0; i <= i1; ++i) {
      std::int64_t const k = j * nx + i;
      auto const b = GradientBox::Spanning((u[k] - u[k - 1]) / dx, (u[k + 1] - u[k]) / dx,
                                           (u[k] - u[k - nx]) / dx, (u[k + nx] - u[k]) / dx);
      Vec2 const s = g.SpeedBound(b);
      alpha.x = std::max(alpha.x, s.x);
      alpha.y = std::max(alpha.y, s.y);
      bool const out = b.lo1 < box.lo1 - 1e-12 || b.hi1 > box.hi1 + 1e-12 ||
                       b.lo2 < box.lo2 - 1e-12 || b.hi2 > box.hi2 + 1e-12;
      if (out && where.first < 0) where = {i, j};
    }
  }
  return {alpha, where};
}

}  // namespace detail

//! Local Lax-Friedrichs solver for u_t + g(Du) - V(x, t) = 0 with
//! u(x, 0) = xi0 . x. Boundary values of the updated rectangle are set
//! each step by linear extrapolation along the outward normal, which
//! reproduces the exact free-space solution xi0 . x - g(xi0) t when
//! V is zero there. Throws CFLViolation when a difference quotient
//! leaves the declared box, NumericalBlowup on non-finite values and
//! InvalidGeometry when the domain is too small for the horizon.
template <PlanarHamiltonian G>
EvolutionResult SolveIvp(G const& g, PotentialSource const& potential,
                         EvolutionProblem const& pb) {
  auto const start = std::chrono::steady_clock::now();
  if (!(pb.dx > 0.0) || !(pb.horizon > 0.0) || !(pb.half_width > 2.0 * pb.dx)) {
    throw InvalidGeometry(Msg("need dx > 0, T > 0 and L > 2 dx; got dx=", pb.dx,
                              " T=", pb.horizon, " L=", pb.half_width));
  }
  Vec2 const declared = g.SpeedBound(pb.box);
  double const lambda = std::max(declared.x, declared.y);
  if (pb.check_domain && pb.half_width < lambda * pb.horizon + 2.0) {
    throw InvalidGeometry(Msg("half width ", pb.half_width, " below Lambda T + 2 = ",
                              lambda * pb.horizon + 2.0));
  }
  if (!pb.box.Contains(GradientBox::Spanning(pb.xi0.x, pb.xi0.x, pb.xi0.y, pb.xi0.y))) {
    throw CFLViolation("initial gradient outside the declared box");
  }
  std::int64_t const n = static_cast<std::int64_t>(std::ceil(pb.half_width / pb.dx - 1e-9));
  std::int64_t const nx = 2 * n + 1;
  double const x0 = -static_cast<double>(n) * pb.dx;
  double const speed_sum = declared.x + declared.y;
  auto const steps = static_cast<std::int64_t>(
      std::ceil(pb.horizon * speed_sum / (pb.cfl * pb.dx) - 1e-9));
  double const dt = pb.horizon / static_cast<double>(std::max<std::int64_t>(steps, 1));

  auto res = EvolutionResult();
  res.stats.steps = steps;
  res.stats.dt = dt;
  res.stats.declared_alpha = declared;
  res.stats.nodes_per_axis = nx;
  res.field = GridField(nx, nx, x0, x0, pb.dx);
  res.field.boundary = "extrapolate";
  auto& u = res.field.values;
  auto un = std::vector<double>();
  auto rows_buf = std::vector<double>(static_cast<std::size_t>(2 * nx));
  auto v = std::vector<double>(u.size(), 0.0);
  for (std::int64_t j = 0; j < nx; ++j) {
    for (std::int64_t i = 0; i < nx; ++i) {
      double const x = x0 + static_cast<double>(i) * pb.dx;
      double const y = x0 + static_cast<double>(j) * pb.dx;
      u[static_cast<std::size_t>(j * nx + i)] =
          pb.initial ? pb.initial(x, y) : pb.xi0.x * x + pb.xi0.y * y;
    }
  }

  auto fill_potential = [&](double t, std::int64_t i0, std::int64_t i1, std::int64_t j0,
                            std::int64_t j1) {
    for (std::int64_t j = j0; j <= j1; ++j) {
      double const y = x0 + static_cast<double>(j) * pb.dx;
      for (std::int64_t i = i0; i <= i1; ++i) {
        v[static_cast<std::size_t>(j * nx + i)] =
            potential(x0 + static_cast<double>(i) * pb.dx, y, t);
      }
    }
  };
  bool const moving = !potential.IsStatic();
  if (!moving) fill_potential(0.0, 1, nx - 2, 1, nx - 2);

  // Active index range: interior nodes with |x_i| <= w_i.
  auto range = [&](double t, int axis) {
    double const a = axis == 0 ? declared.x : declared.y;
    double w = pb.light_cone ? a * (pb.horizon - t) + pb.cone_margin : pb.half_width;
    auto r = static_cast<std::int64_t>(std::floor(w / pb.dx + 1e-9));
    r = std::min(r, n - 1);
    return std::pair<std::int64_t, std::int64_t>{n - r, n + r};
  };

  auto extrapolate = [&](std::vector<double>& w, std::int64_t i0, std::int64_t i1,
                         std::int64_t j0, std::int64_t j1) {
    auto at = [&](std::int64_t i, std::int64_t j) -> double& {
      return w[static_cast<std::size_t>(j * nx + i)];
    };
    bool const wide_i = i1 > i0;
    bool const wide_j = j1 > j0;
    for (std::int64_t j = j0; j <= j1; ++j) {
      at(i0 - 1, j) = wide_i ? 2 * at(i0, j) - at(i0 + 1, j) : at(i0, j);
      at(i1 + 1, j) = wide_i ? 2 * at(i1, j) - at(i1 - 1, j) : at(i1, j);
    }
    for (std::int64_t i = i0 - 1; i <= i1 + 1; ++i) {
      at(i, j0 - 1) = wide_j ? 2 * at(i, j0) - at(i, j0 + 1) : at(i, j0);
      at(i, j1 + 1) = wide_j ? 2 * at(i, j1) - at(i, j1 - 1) : at(i, j1);
    }
  };

  auto& trace = res.trace;
  trace.dt = dt;
  trace.time_lipschitz = g.SupAbs(pb.box) + 1.0;
  trace.t.reserve(static_cast<std::size_t>(steps + 1));
  trace.u.reserve(static_cast<std::size_t>(steps + 1));
  std::size_t const origin = static_cast<std::size_t>(n * nx + n);
  trace.t.push_back(0.0);
  trace.u.push_back(u[origin]);

  int const workers = std::max(1, pb.workers);
  auto [i0, i1] = range(0.0, 0);
  auto [j0, j1] = range(0.0, 1);
  double updates = 0.0;
  for (std::int64_t s = 0; s < steps; ++s) {
    double const t = dt * static_cast<double>(s);
    auto const ri = range(t, 0);
    auto const rj = range(t, 1);
    i0 = ri.first;
    i1 = ri.second;
    j0 = rj.first;
    j1 = rj.second;
    if (moving) fill_potential(t, i0, i1, j0, j1);
    extrapolate(u, i0, i1, j0, j1);
    if (pb.observer && s % std::max(1, pb.observe_every) == 0) {
      pb.observer(t, res.field, i0, i1, j0, j1);
    }
    std::int64_t const rows = j1 - j0 + 1;
    auto step = [&](double* out, std::int64_t stride, std::int64_t r0, std::int64_t r1) {
      double const* a = u.data();
      double const* c = v.data();
      switch (pb.dissipation) {
        case Dissipation::kGodunov:
          if constexpr (GodunovSeparable<G>) {
            return detail::StepRows<Dissipation::kGodunov>(g, a, out, stride, c, nx, i0, i1, r0,
                                                           r1, pb.dx, dt, pb.box, declared);
          }
          throw InvalidGeometry("Godunov scheme needs a separable Hamiltonian");
        case Dissipation::kGlobal:
          return detail::StepRows<Dissipation::kGlobal>(g, a, out, stride, c, nx, i0, i1, r0, r1,
                                                        pb.dx, dt, pb.box, declared);
        case Dissipation::kLocal:
          break;
      }
      return detail::StepRows<Dissipation::kLocal>(g, a, out, stride, c, nx, i0, i1, r0, r1,
                                                   pb.dx, dt, pb.box, declared);
    };
    auto width = static_cast<std::size_t>(i1 - i0 + 1);
    bool bad = false;
    if (workers == 1 || rows < 4 * workers) {
      // Rolling two-row buffer: row j - 1 is written back once row j, the
      // last reader of its old values, has been computed.
      for (std::int64_t j = j0; j <= j1; ++j) {
        double* buf = rows_buf.data() + static_cast<std::size_t>(j & 1) * static_cast<std::size_t>(nx);
        bad = step(buf, 0, j, j + 1) || bad;
        if (j > j0) {
          double const* prev = rows_buf.data() + static_cast<std::size_t>((j - 1) & 1) * static_cast<std::size_t>(nx);
          std::copy(prev + i0, prev + i0 + width, u.data() + (j - 1) * nx + i0);
        }
      }
      double const* last = rows_buf.data() + static_cast<std::size_t>(j1 & 1) * static_cast<std::size_t>(nx);
      std::copy(last + i0, last + i0 + width, u.data() + j1 * nx + i0);
    } else {
      if (un.empty()) un.resize(u.size());
      auto flags = std::vector<char>(static_cast<std::size_t>(workers), 0);
      auto pool = std::vector<std::thread>();
      for (int w = 0; w < workers; ++w) {
        std::int64_t const a = j0 + rows * w / workers;
        std::int64_t const b = j0 + rows * (w + 1) / workers;
        pool.emplace_back([&, a, b, w] {
          flags[static_cast<std::size_t>(w)] = step(un.data() + a * nx, nx, a, b);
        });
      }
      for (auto& th : pool) th.join();
      for (char f : flags) bad = bad || f;
      for (std::int64_t j = j0; j <= j1; ++j) {
        std::copy(un.data() + j * nx + i0, un.data() + j * nx + i0 + static_cast<std::ptrdiff_t>(width),
                  u.data() + j * nx + i0);
      }
    }
    updates += static_cast<double>(rows) * static_cast<double>(i1 - i0 + 1);
    if (bad || s % 64 == 0) {
      auto const [alpha, where] =
          detail::ScanRectangle(g, u.data(), nx, i0, i1, j0, j1, pb.dx, pb.box);
      res.stats.max_local_alpha.x = std::max(res.stats.max_local_alpha.x, alpha.x);
      res.stats.max_local_alpha.y = std::max(res.stats.max_local_alpha.y, alpha.y);
      if (bad) {
        auto const loc = where.first < 0
                             ? std::string("inside the active rectangle")
                             : Msg("near x=(", x0 + static_cast<double>(where.first) * pb.dx,
                                   ", ", x0 + static_cast<double>(where.second) * pb.dx, ")");
        throw CFLViolation(Msg("difference quotient leaves the declared gradient box ", loc,
                               ", t=", t));
      }
    }
    double const uo = u[origin];
    if (!std::isfinite(uo) || (s % 256 == 255)) {
      for (std::int64_t j = j0; j <= j1; ++j) {
        for (std::int64_t i = i0; i <= i1; ++i) {
          double const val = u[static_cast<std::size_t>(j * nx + i)];
          if (!std::isfinite(val)) {
            throw NumericalBlowup(Msg("non-finite value at x=(",
                                      x0 + static_cast<double>(i) * pb.dx, ", ",
                                      x0 + static_cast<double>(j) * pb.dx, "), t=",
                                      t + dt, ", step ", s + 1));
          }
        }
      }
    }
    trace.t.push_back(dt * static_cast<double>(s + 1));
    trace.u.push_back(uo);
  }
  trace.t.back() = pb.horizon;
  extrapolate(u, i0, i1, j0, j1);
  if (pb.observer) pb.observer(pb.horizon, res.field, i0, i1, j0, j1);
  res.valid_radius = Vec2{static_cast<double>(i1 - n) * pb.dx, static_cast<double>(j1 - n) * pb.dx};
  res.stats.updates = updates;
  res.stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

//! Smallest half width allowed for horizon T: max_i Lambda_i T + 2.
template <PlanarHamiltonian G>
double RequiredHalfWidth(G const& g, GradientBox const& box, double horizon) {
  Vec2 const s = g.SpeedBound(box);
  return std::max(s.x, s.y) * horizon + 2.0;
}

//! One rescaling comparison: u^eps(0, t) from the problem with potential
//! V(x / eps, t / eps) on the grid eps dx against eps u(0, t / eps) from
//! the long-time problem on the grid dx.
struct RescaleEntry {
  double eps = 1.0;
  double scaled = 0.0;
  double long_time = 0.0;
  //! max_k |u^eps(0, t_k) - eps u(0, t_k / eps)| over the common trace.
  double max_trace_diff = 0.0;
};

//! Solves both formulations for every eps and compares them. With the
//! grid scaled by eps the two discrete problems coincide step by step,
//! so differences are at rounding level.
template <PlanarHamiltonian G>
std::vector<RescaleEntry> RescaleCheck(G const& g, PotentialField const& field,
                                       EvolutionProblem const& base, double t,
                                       std::vector<double> const& eps_list) {
  auto out = std::vector<RescaleEntry>();
  for (double eps : eps_list) {
    if (!(eps > 0.0) || eps > 1.0) {
      throw InvalidGeometry(Msg("rescaling needs 0 < eps <= 1, got ", eps));
    }
    auto lp = base;
    lp.horizon = t / eps;
    lp.half_width = std::max(base.half_width, RequiredHalfWidth(g, base.box, lp.horizon));
    lp.observer = nullptr;
    auto const long_run = SolveIvp(g, PotentialSource::Field(field), lp);
    auto sp = lp;
    sp.horizon = t;
    sp.dx = eps * lp.dx;
    sp.half_width = eps * lp.half_width;
    sp.cone_margin = eps * lp.cone_margin;
    sp.check_domain = false;
    auto const short_run = SolveIvp(g, PotentialSource::Field(field, eps), sp);
    auto e = RescaleEntry();
    e.eps = eps;
    e.scaled = short_run.trace.Final();
    e.long_time = eps * long_run.trace.Final();
    std::size_t const n = std::min(short_run.trace.u.size(), long_run.trace.u.size());
    for (std::size_t k = 0; k < n; ++k) {
      e.max_trace_diff = std::max(e.max_trace_diff,
                                  std::abs(short_run.trace.u[k] - eps * long_run.trace.u[k]));
    }
    out.push_back(e);
  }
  return out;
}

//! Settings of the planted non-homogenization experiment.
struct GapOptions {
  double theta = 0.1;
  double delta = 0.1;
  double c_delta = 0.03;
  double dx = 0.125;
  int cap_exp = 4;
  Dissipation scheme = Dissipation::kGodunov;
  GradientBox box = GradientBox::Symmetric(1.1);
  int workers = 1;
};

struct GapRun {
  int n = 0;
  BarrierSign sign = BarrierSign::kUpper;
  Vec2 center;
  double horizon = 0.0;
  //! u(0, T_n) / T_n.
  double ratio = 0.0;
  //! Barrier bound at the origin: v_+(0, T)/T (upper) or v_-(0, T)/T.
  double barrier_ratio = 0.0;
  std::size_t overrides = 0;
  AverageTrace trace;
  EvolutionStats stats;
};

struct GapReport {
  std::vector<GapRun> runs;
  double lower_est = std::numeric_limits<double>::infinity();
  double upper_est = -std::numeric_limits<double>::infinity();
  double gap() const { return upper_est - lower_est; }
};

//! Random plant center: a lattice point with |X| <= theta T, drawn from
//! the keyed plant stream of (seed, n, orientation).
inline Vec2 PlantCenter(std::uint64_t seed, int n, BarrierSign sign, double radius) {
  auto rng = KeyedRng(HashCombine(HashCombine(seed, static_cast<std::uint64_t>(Stream::kPlant)),
                                  static_cast<std::uint64_t>(2 * n + (sign == BarrierSign::kLower))));
  auto const r = static_cast<std::int64_t>(std::floor(radius));
  while (true) {
    auto const a = static_cast<std::int64_t>(std::floor(rng.Uniform() * static_cast<double>(2 * r + 1))) - r;
    auto const b = static_cast<std::int64_t>(std::floor(rng.Uniform() * static_cast<double>(2 * r + 1))) - r;
    if (static_cast<double>(a * a + b * b) <= radius * radius) {
      return Vec2{static_cast<double>(a), static_cast<double>(b)};
    }
  }
}

//! For each n, plants a horizontal segment (V = -1) and, separately, a
//! vertical one (V = +1) of length (4/delta) T_n rounded up to a dyadic,
//! centered within theta T_n of the origin, solves to T_n = 2^n and
//! records u(0, T_n)/T_n. lower_est is the minimum over horizontal
//! plants and upper_est the maximum over vertical plants.
template <PlanarHamiltonian G>
GapReport NonhomGap(G const& g, std::uint64_t seed, std::vector<int> const& n_list,
                    GapOptions const& opt) {
  auto rep = GapReport();
  for (int n : n_list) {
    if (n < 1 || n > 8) throw InvalidGeometry(Msg("scale n=", n, " outside [1, 8]"));
    for (auto sign : {BarrierSign::kUpper, BarrierSign::kLower}) {
      double const horizon = std::ldexp(1.0, n);
      auto p = BarrierParams();
      p.horizon = horizon;
      p.delta = opt.delta;
      p.c_delta = opt.c_delta;
      p.sign = sign;
      p.center = PlantCenter(seed, n, sign, opt.theta * horizon);
      auto pb = EvolutionProblem();
      pb.dx = opt.dx;
      pb.horizon = horizon;
      pb.box = opt.box;
      pb.dissipation = opt.scheme;
      pb.workers = opt.workers;
      pb.half_width = RequiredHalfWidth(g, opt.box, horizon);
      auto const env_seed = RealizationSeed(seed, static_cast<std::uint64_t>(
                                                      2 * n + (sign == BarrierSign::kLower)));
      auto const env = MakeBarrierEnvironment(
          p, FullSegmentLength(p), opt.cap_exp, env_seed,
          static_cast<std::int64_t>(std::ceil(pb.half_width)) + 4);
      auto res = SolveIvp(g, PotentialSource::Field(env.field), pb);
      auto run = GapRun();
      run.n = n;
      run.sign = sign;
      run.center = p.center;
      run.horizon = horizon;
      run.ratio = res.trace.FinalRatio();
      run.barrier_ratio = BarrierValue(p, Vec2{0.0, 0.0}, horizon) / horizon;
      run.overrides = env.lattice.overrides.size();
      run.trace = std::move(res.trace);
      run.stats = res.stats;
      if (sign == BarrierSign::kUpper) {
        rep.lower_est = std::min(rep.lower_est, run.ratio);
      } else {
        rep.upper_est = std::max(rep.upper_est, run.ratio);
      }
      rep.runs.push_back(std::move(run));
    }
  }
  return rep;
}

}  // namespace hjlab
