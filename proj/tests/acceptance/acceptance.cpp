//! Acceptance run: one PASS/FAIL line per criterion. Arguments select a
//! subset of criteria by number; without arguments all of them run. The
//! exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "hjlab/dyadic.hpp"
#include "hjlab/evolution.hpp"
#include "hjlab/finite_range.hpp"
#include "hjlab/hamiltonian.hpp"
#include "hjlab/homogenize.hpp"
#include "hjlab/lattice.hpp"
#include "hjlab/metric.hpp"
#include "hjlab/mixing.hpp"
#include "hjlab/potential.hpp"
#include "hjlab/radius.hpp"
#include "hjlab/rng.hpp"
#include "hjlab/saddle.hpp"
#include "oracles/dijkstra_oracle.hpp"

namespace {

using hjlab::Vec2;

//! Short report text: six significant digits.
template <typename... Args>
std::string Str(Args const&... args) {
  auto ss = std::ostringstream();
  ss.precision(6);
  (ss << ... << args);
  return ss.str();
}

//! Result of one criterion: pass flag plus a one-line summary of the
//! measured quantities.
struct Verdict {
  bool pass = true;
  std::ostringstream detail = [] {
    auto ss = std::ostringstream();
    ss.precision(6);
    return ss;
  }();

  //! Records one sub-check; a failed one is flagged in the summary.
  void Check(bool ok, std::string const& what) {
    if (!detail.str().empty()) detail << "; ";
    detail << (ok ? "" : "[failed] ") << what;
    pass = pass && ok;
  }
};

struct Criterion {
  int id;
  double limit_seconds;
  std::function<void(Verdict&)> body;
};

// Smooth periodic potential with period 8 in both axes, |V| <= 1/2.
double SmoothV(Vec2 x) {
  return 0.5 * std::sin(2 * hjlab::kPi * x.x / 8) * std::cos(2 * hjlab::kPi * x.y / 8);
}

// Finite-range field folded into the window [0, L]^2 (period 2L).
hjlab::PlaneField Folded(std::uint64_t seed, double L, double scale = 1.0) {
  auto const f = hjlab::FiniteRangeField(seed);
  return [f, L, scale](Vec2 x) {
    return scale * f({hjlab::ReflectIntoWindow(x.x, L), hjlab::ReflectIntoWindow(x.y, L)});
  };
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto const n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Dyadic law. The expected cell probabilities are written out here from
// the closed form P(X = 2^n) = (2^d - 1) 2^{-dn} instead of being taken
// from the library, and the statistic is recomputed from them.
void DyadicLawCriterion(Verdict& v) {
  std::size_t const samples = 1000000;
  for (int d : {2, 3}) {
    auto const law = hjlab::DyadicLaw(d);
    int const cap_exp = law.MaxCapExp();
    auto rng = hjlab::KeyedRng(hjlab::RealizationSeed(2024, static_cast<std::uint64_t>(d)));
    auto counts = std::vector<std::uint64_t>(static_cast<std::size_t>(cap_exp) + 1, 0);
    for (std::size_t i = 0; i < samples; ++i) ++counts[hjlab::SampleDyadicExponent(rng, law, cap_exp)];

    // Oracle statistic: cells n = 1, 2, ... while the expected count is
    // at least 5, then one pooled tail cell.
    double const alpha = std::pow(2.0, d) - 1.0;
    double stat = 0.0;
    int cells = 0;
    double tail_obs = static_cast<double>(samples);
    double tail_p = 1.0;
    for (int n = 1; n <= cap_exp; ++n) {
      double const p = alpha * std::pow(2.0, -d * n);
      if (static_cast<double>(samples) * p < 5.0) break;
      double const e = static_cast<double>(samples) * p;
      double const o = static_cast<double>(counts[static_cast<std::size_t>(n)]);
      stat += (o - e) * (o - e) / e;
      ++cells;
      tail_obs -= o;
      tail_p -= p;
    }
    double const tail_e = static_cast<double>(samples) * tail_p;
    stat += (tail_obs - tail_e) * (tail_obs - tail_e) / tail_e;
    ++cells;
    double const crit = boost::math::quantile(boost::math::chi_squared(cells - 1), 0.99);
    auto const lib = hjlab::DyadicChiSquare(counts, law, cap_exp);
    double const lib_crit = boost::math::quantile(boost::math::chi_squared(lib.dof), 0.99);
    v.Check(stat < crit && lib.statistic < lib_crit,
            Str("d=", d, " chi2=", stat, " (dof ", cells - 1, ", 0.99 quantile ", crit,
                "), library chi2=", lib.statistic, " (dof ", lib.dof, ")"));
  }
}

// Field invariants over 100 realizations of the saddle environment.
void FieldInvariantsCriterion(Verdict& v) {
  int const realizations = 100;
  int const pairs_per_realization = 100000;
  std::uint64_t range = 0, lipschitz = 0, overlap = 0, cross = 0;
  double min_cross = std::numeric_limits<double>::infinity();
  double worst_lip = -std::numeric_limits<double>::infinity();
  auto rng = std::mt19937_64(77);
  for (int s = 0; s < realizations; ++s) {
    auto const lat = hjlab::BuildLattice(2, 1, 512, 7, hjlab::RealizationSeed(5150, static_cast<std::uint64_t>(s)));
    auto const mode = s % 2 == 0 ? hjlab::ShiftMode::kZero : hjlab::ShiftMode::kUniform;
    auto const field = hjlab::PotentialField::FromLattice(lat, mode);
    double const dc = field.MinCrossDistance();
    min_cross = std::min(min_cross, dc);
    cross += dc < 1.0;
    // The shift tau lies in [0, 1)^2, so x in [lo + 1, hi] stays valid.
    double const lo[2] = {field.valid_lo(0) + 1.0, field.valid_lo(1) + 1.0};
    double const hi[2] = {field.valid_hi(0), field.valid_hi(1)};
    auto ux = std::uniform_real_distribution<double>(lo[0], hi[0]);
    auto uy = std::uniform_real_distribution<double>(lo[1], hi[1]);
    auto step = std::uniform_real_distribution<double>(-1.0, 1.0);
    for (int i = 0; i < pairs_per_realization; ++i) {
      double const a[2] = {ux(rng), uy(rng)};
      // Alternate short steps with arbitrary pairs inside the valid region.
      double b[2];
      if (i % 2 == 0) {
        b[0] = std::clamp(a[0] + step(rng), lo[0], hi[0]);
        b[1] = std::clamp(a[1] + step(rng), lo[1], hi[1]);
      } else {
        b[0] = ux(rng);
        b[1] = uy(rng);
      }
      auto const pa = field.Parts(a, 0.0);
      auto const pb = field.Parts(b, 0.0);
      range += std::abs(pa.value()) > 1.0;
      overlap += pa.minus < 0.0 && pa.plus > 0.0;
      double const dist = std::hypot(a[0] - b[0], a[1] - b[1]);
      double const excess = std::abs(pa.value() - pb.value()) - 2.0 * dist;
      worst_lip = std::max(worst_lip, excess);
      lipschitz += excess > 1e-12;
    }
  }
  v.Check(range == 0, Str("|V|>1: ", range));
  v.Check(lipschitz == 0, Str("2-Lipschitz violations: ", lipschitz, " (max excess ", worst_lip, ")"));
  v.Check(cross == 0, Str("d(R,H)<1: ", cross, " (min ", min_cross, ")"));
  v.Check(overlap == 0, Str("overlapping supports: ", overlap));
  v.detail << "; " << realizations << " realizations x " << pairs_per_realization << " pairs";
}

// Barrier certificate on the normalized quadratic saddle.
void BarrierCriterion(Verdict& v) {
  auto const h = [](double a, double b) { return 3.0 * (b * b - a * a); };
  auto const det = hjlab::DetectSaddle(h, Vec2{0.0, 0.0}, 1.0, 1.0 / 64);
  v.Check(det.found, "saddle frame found");
  if (!det.found) return;
  auto const norm = hjlab::Normalize(h, Vec2{0.0, 0.0}, det.frame, 1.0);
  int const n = 6;
  double const theta = 0.1;
  double const tol = 1e-9;
  for (auto const sign : {hjlab::BarrierSign::kUpper, hjlab::BarrierSign::kLower}) {
    bool const upper = sign == hjlab::BarrierSign::kUpper;
    auto p = hjlab::BarrierParams();
    p.horizon = std::ldexp(1.0, n);
    p.delta = norm.delta;
    p.c_delta = norm.c_delta;
    p.sign = sign;
    p.center = hjlab::PlantCenter(31, n, sign, theta * p.horizon);
    auto const env = hjlab::MakeBarrierEnvironment(p, hjlab::FullSegmentLength(p), 4,
                                                   hjlab::RealizationSeed(31, upper ? 0 : 1), 24);
    auto grid = hjlab::BarrierGrid();
    grid.along_half_width = 2.0 / p.delta * p.horizon + 16.0;
    grid.across_half_width = 6.0;
    grid.along_spacing = 0.5;
    grid.across_spacing = 0.25;
    grid.time_steps = 16;
    auto const rep = hjlab::VerifyBarrier(norm, env.field, p, grid, tol);
    for (int r = 0; r < 5; ++r) {
      auto const& s = rep.regions[r];
      v.Check(s.nodes > 0 && s.min_slack >= -tol,
              Str(upper ? "v+ " : "v- ", hjlab::RegionName(r), " slack ", s.min_slack, " (",
                  s.nodes, " nodes)"));
    }
  }
  v.detail << "; delta=" << norm.delta << " c_delta=" << norm.c_delta;
}

// Non-homogenization gap on planted environments.
void GapCriterion(Verdict& v) {
  auto opt = hjlab::GapOptions();
  opt.theta = 0.1;
  opt.delta = 0.1;
  opt.c_delta = 0.03;
  opt.dx = 0.125;
  auto const rep = hjlab::NonhomGap(hjlab::QuadraticSaddle{3.0, 3.0}, 4242, {5, 6}, opt);
  double const slack = opt.c_delta + (1.0 + opt.delta) * opt.theta;
  double const upper_bound = -1.0 + slack + 0.05;
  double const lower_bound = 1.0 - slack - 0.05;
  for (auto const& r : rep.runs) {
    bool const horizontal = r.sign == hjlab::BarrierSign::kUpper;
    bool const ok = horizontal ? r.ratio <= upper_bound : r.ratio >= lower_bound;
    v.Check(ok, Str(horizontal ? "horizontal" : "vertical", " n=", r.n, " u(0,T)/T=", r.ratio,
                    horizontal ? " <= " : " >= ", horizontal ? upper_bound : lower_bound));
  }
  v.Check(rep.gap() >= 1.4, Str("gap ", rep.gap(), " >= 1.4"));
}

// Nodewise comparison of a 64 x 64 cell solve with the Dijkstra oracle;
// returns the largest error relative to the tolerance.
double DijkstraRatio(hjlab::HamiltonianSpec const& s) {
  double const h = 0.125;
  hjlab::SlabGeometry const g{.e = {0.0, 1.0}, .height = 63 * h, .width = 64 * h, .dx = h};
  auto opt = hjlab::MetricOptions();
  opt.width_factor = 0.0;
  auto const sol = hjlab::SolvePlanarMetric(s, 1.0, g, opt);
  if (sol.m.nx != 64 || sol.m.ny != 64) throw hjlab::InvalidGeometry("cell is not 64 x 64");
  auto const dij = hjlab::oracle::DijkstraMetric(sol, s, 3);
  double const metr = hjlab::oracle::MetricationBound(3);
  double worst = 0.0;
  for (std::size_t n = 0; n < dij.size(); ++n) {
    worst = std::max(worst, std::abs(sol.m.values[n] - dij[n]) / (2.0 * (h + metr * dij[n])));
  }
  return worst;
}

// Metric solver exactness and oracle equivalence.
void MetricCriterion(Verdict& v) {
  double const dx = 0.125;
  auto const quad = hjlab::PowerEikonal(2.0);
  for (double angle : {0.0, 0.52, 1.3}) {
    Vec2 const e = hjlab::UnitAt(angle);
    auto const sol = hjlab::SolvePlanarMetric(quad, 4.0, {.e = e, .height = 8.0, .dx = dx});
    double worst = 0.0;
    for (std::int64_t j = 0; j < sol.m.ny; ++j) {
      for (std::int64_t i = 0; i < sol.m.nx; ++i) {
        Vec2 const x = sol.frame.ToPlane(sol.m.X(i), sol.m.Y(j));
        worst = std::max(worst, std::abs(sol.m.at(i, j) - 2.0 * (x.x * e.x + x.y * e.y)));
      }
    }
    v.Check(worst <= 3 * dx, Str("|xi|^2 e=(", e.x, ",", e.y, ") max error ", worst));
  }
  struct Cell {
    char const* name;
    hjlab::HamiltonianSpec spec;
  };
  for (auto const& c : {Cell{"smooth separated", hjlab::SeparatedEikonal(SmoothV)},
                        Cell{"random separated", hjlab::SeparatedEikonal(Folded(91, 4.0, 0.5))},
                        Cell{"smooth elliptic", hjlab::EllipticEikonal(1.0, 2.0, SmoothV)}}) {
    double const ratio = DijkstraRatio(c.spec);
    v.Check(ratio <= 1.0, Str(c.name, " Dijkstra err/tol ", ratio));
  }
}

// Radius-function properties over the catalog.
void RadiusCriterion(Verdict& v) {
  auto const lat = hjlab::BuildLattice(2, 1, 64, 3, 5);
  auto const field = std::make_shared<hjlab::PotentialField const>(hjlab::PotentialField::FromLattice(lat));
  hjlab::PlaneField const saddle_v = [field](Vec2 x) { return field->Eval2(x.x, x.y); };
  auto const catalog = std::vector<hjlab::HamiltonianSpec>{
      hjlab::PowerEikonal(1.0),
      hjlab::PowerEikonal(2.0),
      hjlab::PowerEikonal(3.0),
      hjlab::ModulatedEikonal(),
      hjlab::SeparatedEikonal(saddle_v, 1.0, {-40, -40}, {40, 40}),
      hjlab::SeparatedEikonal(saddle_v, 2.0, {-40, -40}, {40, 40}),
      hjlab::SeparatedEikonal(Folded(13, 16.0), 1.0, {-40, -40}, {40, 40}),
      hjlab::EllipticEikonal(1.0, 4.0, SmoothV)};
  std::size_t speed = 0, window = 0, total = 0;
  for (auto const& s : catalog) {
    auto const rep = hjlab::CheckStarShape(s, {.samples = 10000, .seed = 17});
    speed += rep.speed;
    window += rep.mu_window;
    total += rep.Total();
    if (rep.Total() != 0) {
      v.Check(false, Str(s.name, ": speed ", rep.speed, " window ", rep.mu_window, " other ",
                         rep.Total() - rep.speed - rep.mu_window));
    }
  }
  v.Check(speed == 0 && window == 0,
          Str(catalog.size(), " specs x 10^4 samples: a<=r<=A violations ", speed,
              ", mu-window violations ", window));
  v.Check(total == 0, Str("all declared properties: ", total, " violations"));

  // Double well: every level below 1 must raise NotStarShaped, every
  // level above 1 must give a radius.
  auto const dw = hjlab::DoubleWell();
  auto rng = std::mt19937_64(3);
  auto u = std::uniform_real_distribution<double>(0.0, 1.0);
  std::size_t missed = 0, spurious = 0;
  int const trials = 10000;
  for (int i = 0; i < trials; ++i) {
    Vec2 const e = hjlab::UnitAt(2 * hjlab::kPi * u(rng));
    bool const below = i % 2 == 0;
    double const mu = below ? 0.01 + 0.98 * u(rng) : 1.01 + 3.0 * u(rng);
    bool raised = false;
    try {
      double const r = hjlab::Radius(dw, e, {0.0, 0.0}, mu);
      // Oracle: the level set {(|xi|^2 - 1)^2 = mu} outside the well.
      if (!below && std::abs(r - std::sqrt(1.0 + std::sqrt(mu))) > 1e-9) ++spurious;
    } catch (hjlab::NotStarShaped const&) {
      raised = true;
    }
    if (below && !raised) ++missed;
    if (!below && raised) ++spurious;
  }
  v.Check(missed == 0 && spurious == 0,
          Str("double well: NotStarShaped missed below level 1 ", missed,
              ", wrong above level 1 ", spurious));
}

// Localization and comparison over random environments.
void LocalizationCriterion(Verdict& v) {
  double const h = 0.125;
  double const t = 3.0;
  int const environments = 20;
  auto const d = hjlab::MetricDomain::ToSet({-6, -6}, {6, 6}, h,
                                            [](Vec2 x) { return hjlab::Norm(x) <= 0.5; });
  int positive = 0, negative = 0, monotone = 0;
  double worst_pos = -std::numeric_limits<double>::infinity();
  double worst_cmp = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < environments; ++k) {
    // |V| <= 1/2 keeps r = 1 + mu + V in [1.5, 2.5] at mu = 1.
    auto const base_v = Folded(hjlab::RealizationSeed(606, static_cast<std::uint64_t>(k)), 16.0, 0.5);
    auto const s1 = hjlab::SeparatedEikonal(base_v);
    auto const base = hjlab::SolveMetricToSet(s1, 1.0, d);
    double const margin = 2 * 3.0 * h;

    auto const same = hjlab::LocalizationCheck(s1, s1, 1.0, t, d);
    // Lowered outside the sublevel (two cells of margin).
    auto const outside = [base_v, &base, t, margin](Vec2 x) {
      if (std::abs(x.x) > 6 || std::abs(x.y) > 6) return base_v(x) - 0.5;
      return base.At(x) > t + margin ? base_v(x) - 0.5 : base_v(x);
    };
    auto const out = hjlab::LocalizationCheck(s1, hjlab::SeparatedEikonal(outside), 1.0, t, d);
    bool const pos_ok = same.hypothesis_holds && same.conclusion_holds && out.hypothesis_holds &&
                        out.conclusion_holds && out.region_nodes > 100;
    positive += pos_ok;
    worst_pos = std::max({worst_pos, same.max_excess - same.tol, out.max_excess - out.tol});

    // Negative control: lowered inside the sublevel.
    auto const inside = [base_v](Vec2 x) {
      return hjlab::Norm(x - Vec2{1.5, 0.0}) < 0.75 ? base_v(x) - 0.5 : base_v(x);
    };
    auto const in = hjlab::LocalizationCheck(s1, hjlab::SeparatedEikonal(inside), 1.0, t, d);
    negative += !in.hypothesis_holds && !in.conclusion_holds;

    monotone += same.comparison_holds && out.comparison_holds && in.comparison_holds;
    worst_cmp = std::max({worst_cmp, same.comparison_excess - same.tol,
                          out.comparison_excess - out.tol, in.comparison_excess - in.tol});
  }
  v.Check(positive == environments,
          Str("positive cases ", positive, "/", environments, " (max excess - tol_grid ", worst_pos, ")"));
  v.Check(negative == environments, Str("negative control detected ", negative, "/", environments));
  v.Check(monotone == environments,
          Str("mu-monotonicity ", monotone, "/", environments, " (max excess - tol_grid ", worst_cmp, ")"));
}

// Homogenization pipeline consistency.
void HomogenizationCriterion(Verdict& v) {
  auto coarse = hjlab::SamplingOptions();
  coarse.dx = 0.5;
  coarse.margin = 4.0;
  for (Vec2 const xi : {Vec2{1.0, 1.0}, Vec2{0.6, 0.8}, Vec2{-1.5, 0.5}}) {
    auto budget = hjlab::HbarBudget();
    budget.realizations = 2;
    budget.t_list = {2.0, 4.0, 8.0};
    budget.sampling = coarse;
    auto const est = hjlab::EstimateHbar(hjlab::FixedSpec(hjlab::PowerEikonal(2.0)), xi, budget);
    double const target = xi.x * xi.x + xi.y * xi.y;
    v.Check(est.mu_lo <= target && target <= est.mu_hi && est.width() <= 1e-3 && !est.indeterminate,
            Str("|xi|^2=", target, " bracket [", est.mu_lo, ", ", est.mu_hi, "]"));
  }

  // Random separated eikonal |xi| - (1 + V) at level 1 along e1.
  auto const factory = hjlab::RandomSeparatedEikonal();
  Vec2 const e{1.0, 0.0};
  auto opt = hjlab::SamplingOptions();
  opt.dx = 0.25;
  opt.margin = 8.0;
  auto const table = hjlab::SampleMetricStats(factory, 1.0, e, {4.0, 8.0, 16.0, 32.0}, 200, 8080, opt);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  auto ratios = std::ostringstream();
  for (double t : {8.0, 16.0, 32.0}) {
    auto const mo = table.At({1.0, e, t}).ValueMoments();
    double const r = mo.variance / t;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    ratios << " " << r;
  }
  v.Check(lo > 0.0 && hi <= 2.0 * lo, Str("Var/t at t=8,16,32:", ratios.str(), " (factor ", hi / lo, ")"));

  auto const fit = hjlab::FitDefectConstant(table, 1.0, e, {4.0, 8.0, 16.0});
  bool bounded = true;
  auto consts = std::ostringstream();
  for (std::size_t k = 0; k < fit.t.size(); ++k) {
    bounded = bounded && std::abs(fit.defects[k].value) <= fit.c * hjlab::RateShape(fit.t[k]) + 1e-12;
    consts << " " << fit.constants[k];
  }
  v.Check(bounded && fit.spread <= 2.0,
          Str("defect constants at t=4,8,16:", consts.str(), " (C=", fit.c, ", spread ", fit.spread, ")"));

  // Approximate correctors on reflected tori against the H-bar bracket.
  Vec2 const xi{2.0, 0.0};
  auto budget = hjlab::HbarBudget();
  budget.realizations = 40;
  budget.seed = 9090;
  budget.tol = 1e-2;
  budget.mu_lo = 0.5;
  budget.mu_hi = 2.0;
  budget.sampling.dx = 0.25;
  auto const bracket = hjlab::EstimateHbar(factory, xi, budget);
  double const L = 32.0;
  int const tori = 40;
  auto dist = std::vector<std::vector<double>>(3);
  for (int k = 0; k < tori; ++k) {
    auto const f = hjlab::FiniteRangeField(hjlab::RealizationSeed(7070, static_cast<std::uint64_t>(k)));
    // Origin at the window center, away from the mirror lines.
    auto const vfield = [f, L](Vec2 x) {
      return f({hjlab::ReflectIntoWindow(x.x + L / 2, L), hjlab::ReflectIntoWindow(x.y + L / 2, L)});
    };
    auto const s = hjlab::SeparatedEikonal(vfield, 1.0, {-1e6, -1e6}, {1e6, 1e6});
    auto copt = hjlab::CorrectorOptions();
    copt.period = 2 * L;
    copt.dx = 0.25;
    int j = 0;
    for (double delta : {0.25, 0.125, 0.0625}) {
      dist[static_cast<std::size_t>(j++)].push_back(
          bracket.DistanceTo(hjlab::SolveApproxCorrector(s, xi, delta, copt).value));
    }
  }
  double const m0 = Median(dist[0]);
  double const m1 = Median(dist[1]);
  double const m2 = Median(dist[2]);
  v.Check(m1 <= m0 && m2 <= m1,
          Str("corrector median distance to [", bracket.mu_lo, ", ", bracket.mu_hi, "]",
              bracket.indeterminate ? " (bisection stopped on an undecided probe)" : "",
              " at delta=1/4,1/8,1/16: ", m0, " ", m1, " ", m2));
}

// Mixing: event probabilities, implication and alpha decay.
void MixingCriterion(Verdict& v) {
  auto const tab = hjlab::EventFrequencies(0.5, 2, 8, 5000, 1357);
  double const n = static_cast<double>(tab.samples);
  double worst_z = 0.0;
  std::uint64_t violations = 0;
  int matched = 0;
  for (auto const& r : tab.rows) {
    // Oracle: P(C_n) = 1 - (1 - P(X = T_n))^(annulus points), with the
    // annulus counted here and P(X = T_n) = 3 * 4^{-n} for d = 2.
    auto const inner = static_cast<std::int64_t>(std::floor(0.5 * static_cast<double>(r.T / 2)));
    auto const outer = static_cast<std::int64_t>(std::floor(0.5 * static_cast<double>(r.T)));
    double const points = static_cast<double>((2 * outer + 1) * (2 * outer + 1) - (2 * inner + 1) * (2 * inner + 1));
    double const p = 1.0 - std::pow(1.0 - 3.0 * std::pow(4.0, -r.n), points);
    double const ph = static_cast<double>(r.count_c) / n;
    double const se = std::sqrt(p * (1.0 - p) / n);
    double const z = se > 0.0 ? std::abs(ph - p) / se : (ph == p ? 0.0 : 1e9);
    worst_z = std::max(worst_z, z);
    matched += z <= 3.0 && std::abs(p - r.exact_c) <= 1e-12;
    violations += r.implication_violations;
  }
  v.Check(matched == static_cast<int>(tab.rows.size()),
          Str("P(C_n) n=2..8 within 3 sigma: ", matched, "/", tab.rows.size(), " (max z ", worst_z, ")"));
  v.Check(violations == 0, Str("C and D without B: ", violations));

  auto aopt = hjlab::AlphaOptions();
  aopt.cap_exp = 10;
  auto series = std::vector<std::pair<double, double>>();
  auto prev = std::vector<hjlab::AlphaEstimate>();
  bool monotone = true;
  auto values = std::ostringstream();
  for (std::int32_t L : {8, 16, 32, 64}) {
    auto const a = hjlab::AlphaFinite({hjlab::LatticePoint{}}, hjlab::MakePoint({L, 0}), 250000, 2468, aopt);
    if (!prev.empty()) monotone = monotone && a.ci_lo <= prev.back().ci_hi;
    values << " " << L << ":" << a.alpha << "[" << a.ci_lo << "," << a.ci_hi << "]";
    series.emplace_back(static_cast<double>(L), a.alpha);
    prev.push_back(a);
  }
  v.Check(monotone, Str("alpha nonincreasing within CI:", values.str()));
  auto const fit = hjlab::FitDecay(series);
  v.Check(fit.gamma >= 0.4, Str("gamma ", fit.gamma, " +- ", fit.half_width, " >= 0.4"));
}

}  // namespace

int main(int argc, char** argv) {
  auto const criteria = std::vector<Criterion>{
      {1, 10.0, DyadicLawCriterion},
      {2, 120.0, FieldInvariantsCriterion},
      {3, 60.0, BarrierCriterion},
      {4, 1800.0, GapCriterion},
      {5, 300.0, MetricCriterion},
      {6, 60.0, RadiusCriterion},
      {7, 600.0, LocalizationCriterion},
      {8, 7200.0, HomogenizationCriterion},
      {9, 3600.0, MixingCriterion},
  };
  auto selected = std::set<int>();
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (auto const& c : criteria) {
    if (!selected.empty() && selected.count(c.id) == 0) continue;
    auto v = Verdict();
    auto const start = std::chrono::steady_clock::now();
    try {
      c.body(v);
    } catch (std::exception const& e) {
      v.Check(false, Str("exception: ", e.what()));
    }
    double const seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool const in_time = seconds < c.limit_seconds;
    bool const pass = v.pass && in_time;
    failures += !pass;
    std::printf("%s criterion %d: %s (%.1f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id,
                v.detail.str().c_str(), seconds, c.limit_seconds, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
