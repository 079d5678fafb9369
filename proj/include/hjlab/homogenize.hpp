#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "hjlab/core.hpp"
#include "hjlab/finite_range.hpp"
#include "hjlab/grid.hpp"
#include "hjlab/metric.hpp"
#include "hjlab/radius.hpp"
#include "hjlab/rng.hpp"
#include "hjlab/stats.hpp"

namespace hjlab {

//! Builds the Hamiltonian of one realization from its seed.
using SpecFactory = std::function<HamiltonianSpec(std::uint64_t seed)>;

//! Factory that ignores the seed (deterministic, e.g. x-independent H).
inline SpecFactory FixedSpec(HamiltonianSpec s) {
  return [s = std::move(s)](std::uint64_t) { return s; };
}

//! Separated eikonal |xi|^k - (1 + V) over the finite-range field of
//! the given seed.
inline SpecFactory RandomSeparatedEikonal(double k = 1.0) {
  return [k](std::uint64_t seed) {
    auto s = SeparatedEikonal(FiniteRangeField(seed), k, {-1e6, -1e6}, {1e6, 1e6});
    s.name = Msg("random-separated-eikonal(", k, ")");
    return s;
  };
}

//! Shape of the bias and fluctuation bounds: t^{1/2} log^{1/2}(1 + t).
inline double RateShape(double t) { return std::sqrt(t * std::log1p(t)); }

struct SamplingOptions {
  double dx = 0.25;
  //! Slab height is max(t) + margin.
  double margin = 8.0;
  //! Lateral radius factor R of the cross-section sup / inf.
  double lateral_radius = 1.0;
  int workers = 1;
  std::uint64_t first_index = 0;
  MetricOptions metric;
};

namespace detail {

inline void SampleOne(SpecFactory const& factory, double mu, Vec2 e,
                      std::vector<double> const& t_list, std::uint64_t seed, std::uint64_t index,
                      SamplingOptions const& opt, StatsTable& out) {
  try {
    auto const spec = factory(RealizationSeed(seed, index));
    double const tmax = *std::max_element(t_list.begin(), t_list.end());
    auto slab = SlabGeometry{e, tmax + opt.margin, 0.0, opt.dx};
    auto const sol = SolvePlanarMetric(spec, mu, slab, opt.metric);
    double const h = sol.h();
    Vec2 const lateral = sol.frame.axis_u;
    for (double const t : t_list) {
      auto s = MetricSample();
      Vec2 const c = t * sol.slab.e;
      s.value = sol.At(c);
      double const reach = std::min(opt.lateral_radius * t, sol.slab.width / 2);
      auto const k = static_cast<std::int64_t>(std::floor(reach / h + 1e-9));
      s.n_plus = s.n_minus = s.value;
      for (std::int64_t q = -k; q <= k; ++q) {
        double const m = sol.At(c + (static_cast<double>(q) * h) * lateral);
        s.n_plus = std::max(s.n_plus, m);
        s.n_minus = std::min(s.n_minus, m);
      }
      out.Record(StatsKey{mu, e, t}, index, s);
    }
  } catch (Error const&) {
    for (double const t : t_list) out.RecordFailure(StatsKey{mu, e, t}, index);
  }
}

}  // namespace detail

//! Monte Carlo over realizations first_index .. first_index + N - 1:
//! each realization (seed RealizationSeed(seed, index)) solves the planar
//! metric problem once, in a slab of height max(t) + margin, and records
//! m_mu(te) and the lateral sup / inf for every t. Workers take indices
//! from a shared counter and their tables are merged at the end, so the
//! result does not depend on the worker count. Solver errors mark the
//! realization as failed for every t.
inline StatsTable SampleMetricStats(SpecFactory const& factory, double mu, Vec2 e,
                                    std::vector<double> const& t_list, std::size_t N,
                                    std::uint64_t seed, SamplingOptions const& opt = {}) {
  if (t_list.empty()) throw InvalidGeometry("t_list is empty");
  for (double const t : t_list) {
    if (!(t >= 0.0)) throw InvalidGeometry(Msg("distances must be nonnegative, got ", t));
  }
  if (!(Norm(e) > 0.0)) throw InvalidGeometry("direction e must be nonzero");
  int const workers = std::max(1, opt.workers);
  auto tables = std::vector<StatsTable>(static_cast<std::size_t>(workers));
  auto next = std::atomic<std::size_t>(0);
  auto run = [&](std::size_t w) {
    for (std::size_t i; (i = next.fetch_add(1)) < N;) {
      detail::SampleOne(factory, mu, e, t_list, seed, opt.first_index + i, opt, tables[w]);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    auto pool = std::vector<std::thread>();
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, static_cast<std::size_t>(w));
    for (auto& th : pool) th.join();
  }
  auto out = StatsTable();
  for (auto const& t : tables) out.Merge(t);
  return out;
}

struct DefectEstimate {
  //! |mean of m(s+t) - m(s) - m(t)|.
  double value = 0.0;
  double half_width = 0.0;
  //! Signed mean defect.
  double signed_mean = 0.0;
  //! Realizations present at all three distances (0 for unpaired).
  std::size_t paired = 0;
};

//! Additivity defect |E m(s+t) - E m(s) - E m(t)| at (mu, e). Realizations
//! recorded at all three distances are paired (the defect is averaged per
//! realization, which cancels most of the sampling noise); otherwise the
//! means are combined with independent errors. m(0) = 0 on the boundary
//! plane, so s = 0 or t = 0 gives 0. Throws MissingKey.
inline DefectEstimate AdditivityDefect(StatsTable const& table, double mu, Vec2 e, double s,
                                       double t, double z = 1.96) {
  auto out = DefectEstimate();
  if (s == 0.0 || t == 0.0) {
    table.At({mu, e, s + t});
    return out;
  }
  auto const& a = table.At({mu, e, s + t});
  auto const& b = table.At({mu, e, s});
  auto const& c = table.At({mu, e, t});
  auto d = std::vector<double>();
  for (auto const& [i, x] : a.samples()) {
    auto const ib = b.samples().find(i);
    auto const ic = c.samples().find(i);
    if (ib != b.samples().end() && ic != c.samples().end()) {
      d.push_back(x.value - ib->second.value - ic->second.value);
    }
  }
  if (d.size() >= 2) {
    auto const mo = ComputeMoments(d);
    out.signed_mean = mo.mean;
    out.half_width = z * mo.StdError();
    out.paired = d.size();
  } else {
    auto const ma = a.ValueMoments();
    auto const mb = b.ValueMoments();
    auto const mc = c.ValueMoments();
    out.signed_mean = ma.mean - mb.mean - mc.mean;
    double const var = s == t ? ma.StdError() * ma.StdError() + 4 * mb.StdError() * mb.StdError()
                              : ma.StdError() * ma.StdError() + mb.StdError() * mb.StdError() +
                                    mc.StdError() * mc.StdError();
    out.half_width = z * std::sqrt(var);
  }
  out.value = std::fabs(out.signed_mean);
  return out;
}

//! Constant C in defect(t) <= C t^{1/2} log^{1/2}(1 + t) fitted from
//! defects at s = t over the given distances: C_t per distance, the fitted
//! C = max C_t, and the spread max C_t / min C_t.
struct DefectFit {
  std::vector<double> t;
  std::vector<DefectEstimate> defects;
  std::vector<double> constants;
  double c = 0.0;
  double spread = 0.0;
};

inline DefectFit FitDefectConstant(StatsTable const& table, double mu, Vec2 e,
                                   std::vector<double> const& t_list) {
  auto out = DefectFit();
  double lo = std::numeric_limits<double>::infinity();
  for (double const t : t_list) {
    auto const d = AdditivityDefect(table, mu, e, t, t);
    double const ct = d.value / RateShape(t);
    out.t.push_back(t);
    out.defects.push_back(d);
    out.constants.push_back(ct);
    out.c = std::max(out.c, ct);
    lo = std::min(lo, ct);
  }
  out.spread = lo > 0.0 ? out.c / lo : std::numeric_limits<double>::infinity();
  return out;
}

struct RbarEstimate {
  double rbar = 0.0;
  //! z * Monte Carlo standard error + largest fit residual.
  double half_width = 0.0;
  double std_error = 0.0;
  double fit_residual = 0.0;
  //! Fitted coefficient b of m(t)/t = rbar + b t^{-1/2} log^{1/2}(1 + t).
  double slope = 0.0;
  //! |b| t^{-1/2} log^{1/2}(1 + t) at the largest distance.
  double model_error = 0.0;
  std::vector<double> t;
  std::size_t realizations = 0;
};

//! Least-squares fit of m(t)/t = rbar + b t^{-1/2} log^{1/2}(1 + t) over
//! the recorded t > 0 at (mu, e). The Monte Carlo error of rbar is
//! computed per realization when every distance shares at least two
//! realizations (rbar_i uses the same linear weights), which accounts for
//! the correlation between distances; otherwise the per-distance errors
//! are propagated as independent. Throws InsufficientData with fewer
//! than three distances.
inline RbarEstimate EstimateRbar(StatsTable const& table, double mu, Vec2 e, double z = 1.96) {
  auto out = RbarEstimate();
  auto entries = std::vector<StatsEntry const*>();
  for (double const t : table.Distances(mu, e)) {
    auto const& en = table.At({mu, e, t});
    if (t > 0.0 && en.count() > 0) {
      out.t.push_back(t);
      entries.push_back(&en);
    }
  }
  auto const n = out.t.size();
  if (n < 3) {
    throw InsufficientData(Msg("need at least 3 distances with samples at mu = ", mu, ", got ", n));
  }
  // Normal equations for [1, g(t)].
  auto g = std::vector<double>(n);
  double sg = 0.0;
  double sgg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    g[k] = RateShape(out.t[k]) / out.t[k];
    sg += g[k];
    sgg += g[k] * g[k];
  }
  double const det = static_cast<double>(n) * sgg - sg * sg;
  auto wr = std::vector<double>(n);
  auto wb = std::vector<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    wr[k] = (sgg - sg * g[k]) / det;
    wb[k] = (static_cast<double>(n) * g[k] - sg) / det;
  }
  auto y = std::vector<double>(n);
  auto se = std::vector<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto const mo = entries[k]->ValueMoments();
    y[k] = mo.mean / out.t[k];
    se[k] = mo.StdError() / out.t[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    out.rbar += wr[k] * y[k];
    out.slope += wb[k] * y[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    out.fit_residual = std::max(out.fit_residual, std::fabs(y[k] - out.rbar - out.slope * g[k]));
  }
  // Per-realization values over indices present at every distance.
  auto per = std::vector<double>();
  for (auto const& [i, s0] : entries[0]->samples()) {
    double r = 0.0;
    bool all = true;
    for (std::size_t k = 0; k < n && all; ++k) {
      auto const it = entries[k]->samples().find(i);
      if (it == entries[k]->samples().end()) {
        all = false;
      } else {
        r += wr[k] * it->second.value / out.t[k];
      }
    }
    if (all) per.push_back(r);
  }
  std::size_t smallest = entries[0]->count();
  for (auto const* en : entries) smallest = std::min(smallest, en->count());
  if (per.size() >= 2 && per.size() == smallest) {
    out.std_error = ComputeMoments(per).StdError();
    out.realizations = per.size();
  } else {
    double v = 0.0;
    for (std::size_t k = 0; k < n; ++k) v += wr[k] * wr[k] * se[k] * se[k];
    out.std_error = std::sqrt(v);
    out.realizations = smallest;
  }
  out.model_error = std::fabs(out.slope) * g[n - 1];
  out.half_width = z * out.std_error + out.fit_residual;
  return out;
}

//! One mu-probe of the H-bar bisection.
struct HbarProbe {
  double mu = 0.0;
  RbarEstimate rbar;
  //! +1: rbar CI above |xi| (H-bar <= mu); -1: below (H-bar > mu); 0: undecided.
  int decision = 0;
  //! Samples the decision was based on.
  StatsTable table;
};

struct HbarEstimate {
  Vec2 xi{0.0, 0.0};
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  std::vector<HbarProbe> probes;
  //! True when bisection stopped on an undecided probe before tolerance.
  bool indeterminate = false;
  //! Largest declared t-extrapolation model error over the probes.
  double model_error = 0.0;

  double width() const { return mu_hi - mu_lo; }
  double midpoint() const { return 0.5 * (mu_lo + mu_hi); }
  //! Distance from @a x to the bracket (0 inside).
  double DistanceTo(double x) const {
    return x < mu_lo ? mu_lo - x : (x > mu_hi ? x - mu_hi : 0.0);
  }
};

struct HbarBudget {
  std::size_t realizations = 200;
  std::vector<double> t_list{4.0, 8.0, 16.0, 32.0};
  std::uint64_t seed = 1;
  double tol = 1e-3;
  double mu_lo = 0.0625;
  double mu_hi = 8.0;
  int max_expansions = 8;
  int max_probes = 64;
  double z = 1.96;
  SamplingOptions sampling;
};

//! Bracket for H-bar(xi) = inf { mu > 0 : rbar_mu(xi/|xi|) >= |xi| } by
//! bisection in mu. Every probe uses the same realization seeds, so the
//! per-realization metrics are monotone in mu. A probe is decided only
//! when the rbar confidence interval excludes |xi|; an undecided probe
//! gets its realization budget doubled once. The initial bracket is
//! widened (mu_lo / 4, mu_hi * 2) up to max_expansions times; when mu_lo
//! would still be an upper bound the lower edge is set to 0, since
//! min H-bar >= 0. Throws IndeterminateBracket when an initial endpoint
//! cannot be decided; an undecided interior probe ends the bisection
//! with indeterminate = true and the last decided bracket.
inline HbarEstimate EstimateHbar(SpecFactory const& factory, Vec2 xi, HbarBudget const& b) {
  double const target = Norm(xi);
  if (!(target > 0.0)) throw InvalidGeometry("estimate_hbar needs |xi| > 0");
  Vec2 const e{xi.x / target, xi.y / target};
  auto out = HbarEstimate();
  out.xi = xi;
  auto probe = [&](double mu) {
    auto p = HbarProbe();
    p.mu = mu;
    auto opt = b.sampling;
    opt.first_index = 0;
    auto table = SampleMetricStats(factory, mu, e, b.t_list, b.realizations, b.seed, opt);
    for (int round = 0; round < 2; ++round) {
      p.rbar = EstimateRbar(table, mu, e, b.z);
      if (p.rbar.rbar - p.rbar.half_width >= target) {
        p.decision = 1;
      } else if (p.rbar.rbar + p.rbar.half_width < target) {
        p.decision = -1;
      }
      if (p.decision != 0 || round == 1) break;
      opt.first_index = b.realizations;
      table.Merge(SampleMetricStats(factory, mu, e, b.t_list, b.realizations, b.seed, opt));
    }
    out.model_error = std::max(out.model_error, p.rbar.model_error);
    p.table = std::move(table);
    out.probes.push_back(p);
    return p.decision;
  };
  auto undecided = [&](double mu) {
    return IndeterminateBracket(Msg("rbar confidence interval at mu = ", mu,
                                    " contains |xi| = ", target, " after doubling the budget"));
  };
  double lo = b.mu_lo;
  double hi = b.mu_hi;
  bool lo_ok = false;
  for (int k = 0; k <= b.max_expansions; ++k) {
    int const d = probe(lo);
    if (d == 0) throw undecided(lo);
    if (d < 0) {
      lo_ok = true;
      break;
    }
    hi = std::min(hi, lo);
    lo /= 4;
  }
  if (!lo_ok) lo = 0.0;
  bool hi_ok = false;
  for (int k = 0; k <= b.max_expansions; ++k) {
    if (hi <= b.mu_lo && !lo_ok) {
      hi_ok = true;
      break;
    }
    int const d = probe(hi);
    if (d == 0) throw undecided(hi);
    if (d > 0) {
      hi_ok = true;
      break;
    }
    lo = hi;
    hi *= 2;
  }
  if (!hi_ok) {
    throw IndeterminateBracket(Msg("rbar stays below |xi| = ", target, " up to mu = ", hi / 2));
  }
  while (hi - lo > b.tol && static_cast<int>(out.probes.size()) < b.max_probes) {
    double const mid = 0.5 * (lo + hi);
    int const d = probe(mid);
    if (d == 0) {
      out.indeterminate = true;
      break;
    }
    (d > 0 ? hi : lo) = mid;
  }
  out.mu_lo = lo;
  out.mu_hi = hi;
  return out;
}

struct CorrectorOptions {
  //! Torus period (the spec must be periodic with this period).
  double period = 64.0;
  double dx = 0.25;
  //! Plane point of grid node (0, 0); the reported value is taken there.
  Vec2 origin{0.0, 0.0};
  double tol = 1e-8;
  std::int64_t max_steps = 0;
};

struct CorrectorResult {
  GridField v;
  //! -delta v(origin).
  double value = 0.0;
  std::int64_t steps = 0;
  double residual = 0.0;
  std::string scheme;
};

namespace detail {

//! Godunov upwind modulus of the shifted gradient xi + Dw: per axis the
//! larger of the positive part of the backward difference and the
//! negative part of the forward difference.
inline double UpwindModulus(double bx, double fx, double by, double fy) {
  double const ax = std::max(std::max(bx, 0.0), -std::min(fx, 0.0));
  double const ay = std::max(std::max(by, 0.0), -std::min(fy, 0.0));
  return std::sqrt(ax * ax + ay * ay);
}

}  // namespace detail

//! Approximate corrector on a torus: marches w_t + delta w + H(xi + Dw, x)
//! = 0 to steady state with an explicit monotone scheme and returns
//! v = w and -delta v(origin). Isotropic specs (H a function of |xi| and
//! x, nondecreasing in |xi|) use the Godunov upwind modulus; others use
//! Lax-Friedrichs with dissipation bounded by the declared growth
//! constants at the largest discrete gradient. The step is a sup-norm
//! contraction with factor 1 - delta dt, so the iteration stops when
//! max |delta w + H| <= tol. Throws NoConvergence after max_steps.
inline CorrectorResult SolveApproxCorrector(HamiltonianSpec const& s, Vec2 xi, double delta,
                                            CorrectorOptions const& opt = {}) {
  if (!(delta > 0.0)) throw InvalidGeometry(Msg("corrector needs delta > 0, got ", delta));
  auto const n = static_cast<std::int64_t>(std::llround(opt.period / opt.dx));
  if (n < 4 || std::fabs(static_cast<double>(n) * opt.dx - opt.period) > 1e-9 * opt.period) {
    throw InvalidGeometry(Msg("torus period ", opt.period, " must be a multiple of dx ", opt.dx));
  }
  double const h = opt.dx;
  auto out = CorrectorResult();
  out.v = GridField(n, n, opt.origin.x, opt.origin.y, h, 0.0);
  out.v.boundary = "periodic";
  auto const nn = static_cast<std::size_t>(n * n);
  auto xs = std::vector<Vec2>(nn);
  auto pot = std::vector<double>(s.separated() ? nn : 0);
  double mean_h = 0.0;
  for (std::int64_t j = 0; j < n; ++j) {
    for (std::int64_t i = 0; i < n; ++i) {
      auto const k = static_cast<std::size_t>(j * n + i);
      xs[k] = {out.v.X(i), out.v.Y(j)};
      if (s.separated()) pot[k] = s.potential(xs[k]);
      mean_h += s(xi, xs[k]);
    }
  }
  mean_h /= static_cast<double>(nn);
  auto ham = [&](Vec2 q, std::size_t k) {
    return s.separated() ? s.kinetic(q) - pot[k] - s.shift : s(q, xs[k]);
  };
  bool const upwind = s.isotropic;
  out.scheme = upwind ? "godunov-upwind" : "lax-friedrichs";
  auto w = std::vector<double>(nn, -mean_h / delta);
  auto f = std::vector<double>(nn);
  std::int64_t max_steps = opt.max_steps;
  // One pass over the torus: calls visit(k, bx, fx, by, fy) with the
  // backward and forward differences of xi + Dw at every node.
  auto sweep = [&](auto&& visit) {
    for (std::int64_t j = 0; j < n; ++j) {
      auto const row = j * n;
      auto const down = (j == 0 ? n - 1 : j - 1) * n;
      auto const up = (j + 1 == n ? 0 : j + 1) * n;
      for (std::int64_t i = 0; i < n; ++i) {
        auto const left = i == 0 ? n - 1 : i - 1;
        auto const right = i + 1 == n ? 0 : i + 1;
        auto const k = static_cast<std::size_t>(row + i);
        double const c = w[k];
        visit(k, xi.x + (c - w[static_cast<std::size_t>(row + left)]) / h,
              xi.x + (w[static_cast<std::size_t>(row + right)] - c) / h,
              xi.y + (c - w[static_cast<std::size_t>(down + i)]) / h,
              xi.y + (w[static_cast<std::size_t>(up + i)] - c) / h);
      }
    }
  };
  // Dissipation bound: |D_xi H| at the corner of the difference box with
  // the largest modulus (|D_xi H| is assumed nondecreasing in |xi|, which
  // holds for the catalog). Separated specs need only the largest modulus.
  auto corner_bound = [&](std::size_t k, double bx, double fx, double by, double fy,
                          double& pmax2, double& sigma) {
    Vec2 const corner{std::fabs(bx) > std::fabs(fx) ? bx : fx,
                      std::fabs(by) > std::fabs(fy) ? by : fy};
    if (s.separated()) {
      pmax2 = std::max(pmax2, corner.x * corner.x + corner.y * corner.y);
    } else {
      sigma = std::max(sigma, Norm(s.GradXi(corner, xs[k])));
    }
  };
  auto finish_bound = [&](double pmax2, double sigma) {
    if (s.separated()) {
      double const pmax = std::sqrt(pmax2);
      for (int a = 0; a < 16; ++a) {
        sigma = std::max(sigma, Norm(s.GradXi(pmax * UnitAt(2 * kPi * a / 16), xs[0])));
      }
    }
    return std::max(1.1 * sigma, 1e-6);
  };
  for (std::int64_t step = 0;; ++step) {
    double pmax2 = 0.0;
    double sigma = 0.0;
    if (upwind) {
      sweep([&](std::size_t k, double bx, double fx, double by, double fy) {
        corner_bound(k, bx, fx, by, fy, pmax2, sigma);
        f[k] = delta * w[k] + ham(Vec2{detail::UpwindModulus(bx, fx, by, fy), 0.0}, k);
      });
      sigma = finish_bound(pmax2, sigma);
    } else {
      sweep([&](std::size_t k, double bx, double fx, double by, double fy) {
        corner_bound(k, bx, fx, by, fy, pmax2, sigma);
      });
      sigma = finish_bound(pmax2, sigma);
      sweep([&](std::size_t k, double bx, double fx, double by, double fy) {
        f[k] = delta * w[k] + ham(Vec2{0.5 * (bx + fx), 0.5 * (by + fy)}, k) -
               0.5 * sigma * (fx - bx) - 0.5 * sigma * (fy - by);
      });
    }
    double const dt = 0.9 * h / (2 * sigma + delta * h);
    if (max_steps <= 0) {
      max_steps = static_cast<std::int64_t>(60.0 / (delta * dt) + 200.0 * static_cast<double>(n));
    }
    double res = 0.0;
    for (double const x : f) res = std::max(res, std::fabs(x));
    out.residual = res;
    out.steps = step;
    if (res <= opt.tol) break;
    if (!std::isfinite(res) || step >= max_steps) {
      throw NoConvergence(Msg("corrector residual ", res, " after ", step, " steps (delta = ",
                              delta, ")"));
    }
    for (std::size_t k = 0; k < nn; ++k) w[k] -= dt * f[k];
  }
  out.v.values = w;
  out.value = -delta * w[0];
  return out;
}

}  // namespace hjlab
