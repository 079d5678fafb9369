#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hjlab/artifacts.hpp"
#include "hjlab/config.hpp"
#include "hjlab/core.hpp"
#include "hjlab/evolution.hpp"
#include "hjlab/finite_range.hpp"
#include "hjlab/hamiltonian.hpp"
#include "hjlab/homogenize.hpp"
#include "hjlab/lattice.hpp"
#include "hjlab/manifest.hpp"
#include "hjlab/metric.hpp"
#include "hjlab/mixing.hpp"
#include "hjlab/potential.hpp"
#include "hjlab/radius.hpp"
#include "hjlab/saddle.hpp"

namespace hjlab {

//! Name of the environment variable giving the root of relative output
//! directories.
inline constexpr char const* kOutputRootVar = "HJLAB_OUTPUT_ROOT";

//! output.dir, resolved against @a root when relative and root is set.
inline std::filesystem::path ResolveOutputDir(RunConfig const& c, char const* root) {
  auto p = std::filesystem::path(c.output_dir);
  if (p.is_relative() && root != nullptr && *root != '\0') p = std::filesystem::path(root) / p;
  return p;
}

namespace detail {

//! Planar saddle Hamiltonians usable by the evolution solver.
using PlanarVariant = std::variant<QuadraticSaddle, QuarticSaddle, PolynomialHamiltonian>;

inline PlanarVariant MakePlanar(RunConfig const& c) {
  auto const& h = c.hamiltonian;
  if (h.id == "quadratic-saddle") return QuadraticSaddle{h.a, h.b};
  if (h.id == "quartic-saddle") return QuarticSaddle{};
  if (h.id == "polynomial") return PolynomialHamiltonian::Parse(h.expr);
  throw InvalidGeometry(Msg("hamiltonian.id = ", h.id,
                            " is not a planar saddle (quadratic-saddle, quartic-saddle, polynomial)"));
}

inline PlanarFunction MakePlanarFunction(RunConfig const& c) {
  return std::visit([](auto const& g) -> PlanarFunction {
    return [g](double a, double b) { return g(a, b); };
  }, MakePlanar(c));
}

//! Catalog entry of a metric (star-shaped) Hamiltonian. Random entries
//! draw their potential from the finite-range field of @a seed.
inline HamiltonianSpec MakeSpec(RunConfig const& c, std::uint64_t seed) {
  auto const& h = c.hamiltonian;
  Vec2 const lo{-1e6, -1e6};
  Vec2 const hi{1e6, 1e6};
  if (h.id == "eikonal") return PowerEikonal(1.0);
  if (h.id == "power-eikonal") return PowerEikonal(h.k);
  if (h.id == "modulated-eikonal") return ModulatedEikonal();
  if (h.id == "double-well") return DoubleWell();
  if (h.id == "separated-eikonal") return SeparatedEikonal(FiniteRangeField(seed), h.k, lo, hi);
  if (h.id == "elliptic-eikonal") {
    return EllipticEikonal(h.a1, h.a2, FiniteRangeField(seed), lo, hi);
  }
  throw InvalidGeometry(Msg("hamiltonian.id = ", h.id, " is not a metric Hamiltonian"));
}

inline SpecFactory MakeFactory(RunConfig const& c) {
  if (c.hamiltonian.id == "separated-eikonal") return RandomSeparatedEikonal(c.hamiltonian.k);
  if (c.hamiltonian.id == "elliptic-eikonal") {
    return [c](std::uint64_t seed) { return MakeSpec(c, seed); };
  }
  return FixedSpec(MakeSpec(c, c.mc.seed));
}

inline Dissipation ParseScheme(std::string const& s) {
  if (s == "godunov") return Dissipation::kGodunov;
  if (s == "local") return Dissipation::kLocal;
  return Dissipation::kGlobal;
}

inline nlohmann::json OverrideJson(Override const& o, int d) {
  auto k = nlohmann::json::array();
  for (int i = 0; i < d; ++i) k.push_back(o.k[i]);
  return {{"k", k}, {"field", std::string(1, o.field)}, {"old", std::int64_t{1} << o.old_exp},
          {"new", std::int64_t{1} << o.new_exp}};
}

inline std::size_t SampleCount(RunConfig const& c, std::size_t fallback) {
  return c.mc.samples > 0 ? static_cast<std::size_t>(c.mc.samples) : fallback;
}

inline void GenerateEnv(RunConfig const& c, ArtifactDir& dir, RunManifest& m) {
  auto const& e = c.env;
  if (c.mc.samples > 1) throw ConfigError("generate-env writes one realization; set mc.samples <= 1");
  double points = 1.0;
  for (int i = 0; i < e.d; ++i) points *= 2.0 * e.box_radius + 1.0;
  if (points > double(1 << 24)) {
    throw InvalidGeometry(Msg("box of ", points, " lattice points exceeds the 2^24 export limit"));
  }
  auto lat = BuildLattice(e.d, e.m, e.box_radius, e.cap_exp, c.mc.seed);
  if (e.plant != "none") {
    if (static_cast<int>(e.plant_center.size()) != e.d) {
      throw ConfigError(Msg("env.plant_center needs ", e.d, " coordinates"));
    }
    auto k = LatticePoint{};
    for (int i = 0; i < e.d; ++i) k[i] = static_cast<std::int32_t>(e.plant_center[i]);
    lat = PlantSegment(std::move(lat),
                       e.plant == "horizontal" ? Orientation::kHorizontal : Orientation::kVertical,
                       k, e.plant_length);
  }
  for (auto const& o : lat.overrides) m.overrides.push_back(OverrideJson(o, e.d));
  m.truncation_tail_mass = std::ldexp(1.0, -e.d * e.cap_exp);
  m.seeds["lattice"] = c.mc.seed;
  dir.Write("realization.bin", EncodeRealization(lat));

  auto marks = CsvTable({"mark", "count"});
  for (int v : {-1, 0, 1, static_cast<int>(kMarkUndefined)}) {
    std::size_t n = 0;
    for (auto const mk : lat.mark) n += mk == v;
    marks.AddRow() << v << n;
  }
  dir.Write("marks.csv", marks.text());

  auto const field = PotentialField::FromLattice(
      lat, e.shift == "uniform" ? ShiftMode::kUniform : ShiftMode::kZero);
  auto cols = std::vector<std::string>{"orientation"};
  for (int i = 0; i < e.d; ++i) cols.push_back(Msg("k", i));
  cols.push_back("side");
  auto cubes = CsvTable(cols);
  for (int pass = 0; pass < 2; ++pass) {
    for (auto const& cube : pass == 0 ? field.horizontal() : field.vertical()) {
      auto row = cubes.AddRow();
      row << (pass == 0 ? "horizontal" : "vertical");
      for (int i = 0; i < e.d; ++i) row << cube.center[i];
      row << cube.side;
    }
  }
  dir.Write("cubes.csv", cubes.text());

  double const cross = field.MinCrossDistance(2.0);
  m.summary["retained_horizontal"] = field.horizontal().size();
  m.summary["retained_vertical"] = field.vertical().size();
  m.summary["min_cross_distance"] = cross;
  m.AddCheck("cross_distance", cross, ">=", 1.0);
  if (e.d != 2) return;

  // Potential on the valid region, shifted by one unit so that the
  // uniform stationarizing shift stays inside it.
  double const h = c.grid.spacing;
  double const x0 = field.valid_lo(0) + 1.0;
  double const y0 = field.valid_lo(1) + 1.0;
  auto const nx = static_cast<std::int64_t>(std::floor((field.valid_hi(0) - x0) / h)) + 1;
  auto const ny = static_cast<std::int64_t>(std::floor((field.valid_hi(1) - y0) / h)) + 1;
  if (nx < 2 || ny < 2) throw InvalidGeometry("valid region too small for a potential export");
  auto grid = GridField(nx, ny, x0, y0, h);
  grid.boundary = "none";
  double max_abs = 0.0;
  std::size_t both_signs = 0;
  for (std::int64_t j = 0; j < ny; ++j) {
    for (std::int64_t i = 0; i < nx; ++i) {
      double const x[2] = {grid.X(i), grid.Y(j)};
      auto const parts = field.Parts(x, 0.0);
      grid.at(i, j) = parts.value();
      max_abs = std::max(max_abs, std::abs(parts.value()));
      both_signs += parts.minus < 0.0 && parts.plus > 0.0;
    }
  }
  // Neighbouring nodes are at distance h, so a 2-Lipschitz field
  // changes by at most 2 h between them.
  double lip_excess = -std::numeric_limits<double>::infinity();
  for (std::int64_t j = 0; j < ny; ++j) {
    for (std::int64_t i = 0; i < nx; ++i) {
      if (i + 1 < nx) lip_excess = std::max(lip_excess, std::abs(grid.at(i + 1, j) - grid.at(i, j)) - 2 * h);
      if (j + 1 < ny) lip_excess = std::max(lip_excess, std::abs(grid.at(i, j + 1) - grid.at(i, j)) - 2 * h);
    }
  }
  auto header = nlohmann::json{{"kind", "potential"},
                               {"seed", c.mc.seed},
                               {"cap_exp", e.cap_exp},
                               {"box_radius", e.box_radius},
                               {"shift", e.shift},
                               {"tau", {field.tau()[0], field.tau()[1]}}};
  dir.Write("potential.bin", EncodeGrid(grid, header));
  m.tolerances["lipschitz"] = 1e-12;
  m.AddCheck("range", max_abs, "<=", 1.0);
  m.AddCheck("disjoint_supports", static_cast<double>(both_signs), "==", 0.0);
  m.AddCheck("lipschitz_excess", lip_excess, "<=", 1e-12);
}

inline void SolveEvolution(RunConfig const& c, ArtifactDir& dir, RunManifest& m) {
  auto const& ev = c.evolution;
  auto opt = GapOptions();
  opt.theta = ev.theta;
  opt.delta = ev.delta;
  opt.c_delta = ev.c_delta;
  opt.dx = c.grid.dx;
  opt.cap_exp = c.env.cap_exp;
  opt.scheme = ParseScheme(ev.scheme);
  opt.workers = c.mc.workers;
  auto const rep = std::visit(
      [&](auto const& g) { return NonhomGap(g, c.mc.seed, ev.n, opt); }, MakePlanar(c));
  double const slack = ev.c_delta + (1.0 + ev.delta) * ev.theta;
  double const upper_bound = -1.0 + slack + ev.tol;
  double const lower_bound = 1.0 - slack - ev.tol;
  auto runs = CsvTable({"n", "plant", "center_x", "center_y", "horizon", "ratio",
                        "barrier_ratio", "overrides", "steps", "seconds"});
  std::size_t overrides = 0;
  for (auto const& r : rep.runs) {
    bool const horizontal = r.sign == BarrierSign::kUpper;
    auto const plant = std::string(horizontal ? "horizontal" : "vertical");
    runs.AddRow() << r.n << plant << r.center.x << r.center.y << r.horizon << r.ratio
                  << r.barrier_ratio << r.overrides << r.stats.steps << r.stats.seconds;
    auto trace = CsvTable({"t", "u0", "ratio"});
    for (std::size_t k = 0; k < r.trace.t.size(); ++k) {
      double const t = r.trace.t[k];
      trace.AddRow() << t << r.trace.u[k] << (t > 0.0 ? r.trace.u[k] / t : 0.0);
    }
    dir.Write(Msg("trace_n", r.n, "_", plant, ".csv"), trace.text());
    m.seeds[Msg("environment_n", r.n, "_", plant)] =
        RealizationSeed(c.mc.seed, static_cast<std::uint64_t>(2 * r.n + !horizontal));
    overrides += r.overrides;
    if (horizontal) {
      m.AddCheck(Msg("horizontal_n", r.n), r.ratio, "<=", upper_bound);
    } else {
      m.AddCheck(Msg("vertical_n", r.n), r.ratio, ">=", lower_bound);
    }
  }
  dir.Write("runs.csv", runs.text());
  m.truncation_tail_mass = std::ldexp(1.0, -2 * c.env.cap_exp);
  m.tolerances["barrier_slack"] = ev.tol;
  m.summary["lower_est"] = rep.lower_est;
  m.summary["upper_est"] = rep.upper_est;
  m.summary["gap"] = rep.gap();
  m.summary["horizontal_bound"] = -1.0 + slack;
  m.summary["vertical_bound"] = 1.0 - slack;
  m.summary["planted_overrides"] = overrides;
  m.AddCheck("gap", rep.gap(), ">=", ev.min_gap);
}

inline void SolveMetric(RunConfig const& c, ArtifactDir& dir, RunManifest& m) {
  auto const spec = MakeSpec(c, c.mc.seed);
  double const ne = Norm(c.metric.e);
  if (!(ne > 0.0)) throw InvalidGeometry("metric.e must be nonzero");
  auto slab = SlabGeometry();
  slab.e = Vec2{c.metric.e.x / ne, c.metric.e.y / ne};
  slab.height = c.grid.height;
  slab.width = c.grid.width;
  slab.dx = c.grid.dx;
  auto opt = MetricOptions();
  opt.tol = c.metric.tol;
  auto const sol = SolvePlanarMetric(spec, c.metric.mu, slab, opt);
  auto header = nlohmann::json{{"kind", "metric"},
                               {"hamiltonian", spec.name},
                               {"mu", c.metric.mu},
                               {"e", {slab.e.x, slab.e.y}},
                               {"height", slab.height},
                               {"width", static_cast<double>(sol.m.nx) * sol.m.h},
                               {"dx", slab.dx},
                               {"seed", c.mc.seed},
                               {"residual", sol.residual},
                               {"sweeps", sol.sweeps},
                               {"scheme", sol.scheme},
                               {"coordinates", "lateral u along x, distance along e along y"}};
  dir.Write("metric.bin", EncodeGrid(sol.m, header));
  auto line = CsvTable({"s", "m", "m_over_s"});
  for (std::int64_t j = 0; j < sol.m.ny; ++j) {
    double const s = sol.m.Y(j);
    if (s < 0.0 || s > slab.height) continue;
    double const v = sol.Centerline(s);
    line.AddRow() << s << v << (s > 0.0 ? v / s : 0.0);
  }
  dir.Write("centerline.csv", line.text());
  m.seeds["environment"] = c.mc.seed;
  m.tolerances["sweep"] = c.metric.tol;
  m.summary["residual"] = sol.residual;
  m.summary["sweeps"] = sol.sweeps;
  m.summary["scheme"] = sol.scheme;
  m.summary["width_required"] = sol.width_required;
  m.AddCheck("sweep_residual", sol.residual, "<=", c.metric.tol);
}

inline void EstimateHbarRun(RunConfig const& c, ArtifactDir& dir, RunManifest& m) {
  auto b = HbarBudget();
  b.realizations = SampleCount(c, 200);
  b.t_list = c.hbar.t_list;
  b.seed = c.mc.seed;
  b.tol = c.hbar.tol;
  b.mu_lo = c.hbar.mu_lo;
  b.mu_hi = c.hbar.mu_hi;
  b.sampling.dx = c.grid.dx;
  b.sampling.workers = c.mc.workers;
  auto const est = EstimateHbar(MakeFactory(c), c.hbar.xi, b);
  auto probes = CsvTable({"mu", "decision", "rbar", "half_width", "std_error", "model_error",
                          "realizations"});
  auto stats = CsvTable({"mu", "e1", "e2", "t", "n", "failures", "mean", "variance",
                         "dev_q50", "dev_q90", "dev_q99"});
  for (auto const& p : est.probes) {
    probes.AddRow() << p.mu << p.decision << p.rbar.rbar << p.rbar.half_width
                    << p.rbar.std_error << p.rbar.model_error << p.rbar.realizations;
    for (auto const& [k, entry] : p.table.entries()) {
      auto const mo = entry.ValueMoments();
      stats.AddRow() << k.mu << k.e.x << k.e.y << k.t << entry.count() << entry.failures()
                     << mo.mean << mo.variance << entry.DeviationQuantile(0.5)
                     << entry.DeviationQuantile(0.9) << entry.DeviationQuantile(0.99);
    }
  }
  dir.Write("probes.csv", probes.text());
  dir.Write("stats.csv", stats.text());
  m.seeds["realizations"] = Msg("RealizationSeed(", c.mc.seed, ", i), i < ", b.realizations * 2);
  m.tolerances["bisection"] = b.tol;
  m.tolerances["z"] = b.z;
  m.summary["hbar_lo"] = est.mu_lo;
  m.summary["hbar_hi"] = est.mu_hi;
  m.summary["width"] = est.width();
  m.summary["model_error"] = est.model_error;
  m.summary["indeterminate"] = est.indeterminate;
  m.AddCheck("determinate", est.indeterminate ? 1.0 : 0.0, "==", 0.0);
  m.AddCheck("bracket_width", est.width(), "<=", c.hbar.max_width);
}

inline void EstimateMixingRun(RunConfig const& c, ArtifactDir& dir, RunManifest& m) {
  auto const& x = c.mixing;
  if (c.env.d != 2 || c.env.m != 1) throw InvalidGeometry("estimate-mixing supports d = 2, m = 1");
  m.seeds["events"] = c.mc.seed;
  m.seeds["alpha"] = c.mc.seed;
  if (x.event_samples > 0) {
    auto opt = EventOptions();
    opt.cap_exp = x.event_cap_exp;
    opt.workers = c.mc.workers;
    auto const tab = EventFrequencies(x.theta, x.n_lo, x.n_hi, x.event_samples, c.mc.seed, opt);
    double const n = static_cast<double>(tab.samples);
    auto events = CsvTable({"n", "T", "samples", "p_c", "exact_c", "z_c", "p_c_orthant",
                            "exact_c_orthant", "z_c_orthant", "lower_bound_c", "p_d", "exact_d",
                            "p_b", "p_c_given_d", "p_b_given_d", "implication_violations"});
    auto zscore = [n](std::uint64_t count, double p) {
      double const ph = static_cast<double>(count) / n;
      double const s = std::sqrt(p * (1.0 - p) / n);
      if (s == 0.0) return ph == p ? 0.0 : std::numeric_limits<double>::infinity();
      return std::abs(ph - p) / s;
    };
    std::uint64_t violations = 0;
    for (auto const& r : tab.rows) {
      double const zc = zscore(r.count_c, r.exact_c);
      double const zo = zscore(r.count_c_orthant, r.exact_c_orthant);
      events.AddRow() << r.n << r.T << tab.samples << r.count_c / n << r.exact_c << zc
                      << r.count_c_orthant / n << r.exact_c_orthant << zo << r.lower_bound_c
                      << r.count_d / n << r.exact_d << r.count_b / n << r.count_c_given_d / n
                      << r.count_b_given_d / n << r.implication_violations;
      m.AddCheck(Msg("c_exact_n", r.n), zc, "<=", 3.0);
      m.AddCheck(Msg("c_orthant_exact_n", r.n), zo, "<=", 3.0);
      violations += r.implication_violations;
    }
    dir.Write("events.csv", events.text());
    m.AddCheck("implication_violations", static_cast<double>(violations), "==", 0.0);
    m.truncation_tail_mass = std::ldexp(1.0, -2 * tab.cap_exp);
    m.summary["event_cap_exp"] = tab.cap_exp;
  }
  if (x.alpha_samples > 0) {
    auto opt = AlphaOptions();
    opt.cap_exp = x.alpha_cap_exp;
    opt.bootstrap = x.bootstrap;
    opt.level = x.level;
    opt.workers = c.mc.workers;
    auto alpha = CsvTable({"ell", "alpha", "ci_lo", "ci_hi", "samples", "bootstrap_mean"});
    auto series = std::vector<std::pair<double, double>>();
    auto prev = std::vector<AlphaEstimate>();
    for (auto const L : x.offsets) {
      if (L < 1 || L > (1 << 30)) throw InvalidGeometry(Msg("offset ", L, " out of range"));
      auto const a = AlphaFinite({LatticePoint{}},
                                 MakePoint({static_cast<std::int32_t>(L), 0}),
                                 x.alpha_samples, c.mc.seed, opt);
      alpha.AddRow() << L << a.alpha << a.ci_lo << a.ci_hi << a.samples << a.bootstrap_mean;
      series.emplace_back(static_cast<double>(L), a.alpha);
      if (!prev.empty() && prev.back().Distance() < L) {
        // Nonincreasing within the intervals: the next lower end must not
        // exceed the previous upper end.
        m.AddCheck(Msg("alpha_monotone_", prev.back().Distance(), "_", L), a.ci_lo, "<=",
                   prev.back().ci_hi);
      }
      prev.push_back(a);
    }
    dir.Write("alpha.csv", alpha.text());
    m.tolerances["alpha_level"] = x.level;
    m.summary["alpha_cap_exp"] = x.alpha_cap_exp;
    m.summary["reference_gamma"] = MixingOrder(2, 1);
    if (series.size() >= 4) {
      auto const fit = FitDecay(series, x.level);
      m.summary["gamma"] = fit.gamma;
      m.summary["gamma_half_width"] = fit.half_width;
      m.AddCheck("decay_exponent", fit.gamma, ">=", x.min_gamma);
    }
  }
}

inline void VerifyBarriers(RunConfig const& c, ArtifactDir& dir, RunManifest& m) {
  auto const h = MakePlanarFunction(c);
  auto const det = DetectSaddle(h, Vec2{0.0, 0.0}, 1.0, 1.0 / 64);
  if (!det.found) throw InvalidGeometry("no saddle frame found at the origin");
  auto const norm = Normalize(h, Vec2{0.0, 0.0}, det.frame, 1.0);
  m.summary["normalization"] = {
      {"lambda", norm.lambda},         {"delta", norm.delta},
      {"c_delta", norm.c_delta},       {"c_delta_sampled", norm.c_delta_sampled},
      {"c_delta_margin", norm.c_delta_margin},
      {"frame_e1", {det.frame.e1.x, det.frame.e1.y}},
      {"frame_e2", {det.frame.e2.x, det.frame.e2.y}}};
  m.tolerances["slack"] = c.barrier.tol;
  m.truncation_tail_mass = std::ldexp(1.0, -2 * c.env.cap_exp);
  auto regions = CsvTable({"barrier", "region", "nodes", "min_slack", "argmin_x", "argmin_y",
                           "argmin_t"});
  for (auto const sign : {BarrierSign::kUpper, BarrierSign::kLower}) {
    bool const upper = sign == BarrierSign::kUpper;
    if (c.barrier.sign == (upper ? "lower" : "upper")) continue;
    auto p = BarrierParams();
    p.horizon = std::ldexp(1.0, c.barrier.n);
    p.delta = norm.delta;
    p.c_delta = norm.c_delta;
    p.sign = sign;
    p.center = PlantCenter(c.mc.seed, c.barrier.n, sign, c.barrier.theta * p.horizon);
    auto const env_seed = RealizationSeed(c.mc.seed, upper ? 0 : 1);
    auto const env = MakeBarrierEnvironment(p, FullSegmentLength(p), c.env.cap_exp, env_seed, 24);
    auto grid = BarrierGrid();
    grid.along_half_width = 2.0 / p.delta * p.horizon + 16.0;
    grid.across_half_width = 6.0;
    grid.along_spacing = 0.5;
    grid.across_spacing = 0.25;
    grid.time_steps = 16;
    auto const rep = VerifyBarrier(norm, env.field, p, grid, c.barrier.tol);
    auto const name = std::string(upper ? "upper" : "lower");
    for (int r = 0; r < 5; ++r) {
      auto const& s = rep.regions[r];
      regions.AddRow() << name << RegionName(r) << s.nodes << s.min_slack << s.argmin_x.x
                       << s.argmin_x.y << s.argmin_t;
      m.AddCheck(Msg(name, "_region_", RegionName(r), "_nodes"), static_cast<double>(s.nodes),
                 ">=", 1.0);
      m.AddCheck(Msg(name, "_region_", RegionName(r)), s.min_slack, ">=", -c.barrier.tol);
    }
    m.AddCheck(Msg(name, "_initial"), rep.initial_min, ">=", -c.barrier.tol);
    m.seeds[Msg("environment_", name)] = env_seed;
    for (auto const& o : env.lattice.overrides) {
      auto j = OverrideJson(o, 2);
      j["barrier"] = name;
      m.overrides.push_back(j);
    }
    m.summary[Msg("center_", name)] = {p.center.x, p.center.y};
  }
  dir.Write("regions.csv", regions.text());
}

}  // namespace detail

//! Runs one configured subcommand, writing its artifacts and the
//! manifest into @a out. Library errors are caught and recorded in the
//! manifest (outcome "error"); errors preparing the directory itself
//! propagate, since no manifest can be written there.
inline RunOutcome Run(RunConfig const& c, std::filesystem::path const& out, std::ostream& log) {
  if (c.subcommand.empty()) throw ConfigError("no subcommand given");
  auto dir = ArtifactDir(out);
  auto m = RunManifest();
  m.subcommand = c.subcommand;
  m.config_text = SerializeConfig(c);
  m.config_sha256 = Sha256Hex(m.config_text);
  m.master_seed = c.mc.seed;
  m.workers = c.mc.workers;
  auto const start = std::chrono::steady_clock::now();
  try {
    dir.Write("config.txt", m.config_text);
    if (c.subcommand == "generate-env") detail::GenerateEnv(c, dir, m);
    else if (c.subcommand == "solve-evolution") detail::SolveEvolution(c, dir, m);
    else if (c.subcommand == "solve-metric") detail::SolveMetric(c, dir, m);
    else if (c.subcommand == "estimate-hbar") detail::EstimateHbarRun(c, dir, m);
    else if (c.subcommand == "estimate-mixing") detail::EstimateMixingRun(c, dir, m);
    else if (c.subcommand == "verify-barriers") detail::VerifyBarriers(c, dir, m);
    else throw ConfigError(Msg("unknown subcommand '", c.subcommand, "'"));
    m.outcome = m.AllChecksPass() ? RunOutcome::kOk : RunOutcome::kCheckFailed;
  } catch (std::exception const& e) {
    m.outcome = RunOutcome::kError;
    m.error = e.what();
    log << "error: " << e.what() << "\n";
  }
  m.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (auto const& ch : m.checks) {
    log << (ch.pass ? "PASS " : "FAIL ") << ch.name << ": " << ch.value << " " << ch.relation
        << " " << ch.threshold << "\n";
  }
  dir.WriteManifest(m);
  log << "outcome: " << OutcomeName(m.outcome) << " (" << dir.path().string() << ")\n";
  return m.outcome;
}

}  // namespace hjlab
