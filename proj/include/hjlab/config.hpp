#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hjlab/core.hpp"

namespace hjlab {

//! Subcommands understood by the orchestrator.
inline std::vector<std::string> const& Subcommands() {
  static auto const names = std::vector<std::string>{
      "generate-env",   "solve-evolution",  "solve-metric",
      "estimate-hbar",  "estimate-mixing",  "verify-barriers"};
  return names;
}

//! Complete run configuration. Every field has a documented key in the
//! text format (see ConfigSchema) and a default, so a file only needs
//! the keys it changes. Serialize writes every key, which makes the
//! serialized form canonical: Parse(Serialize(c)) == c for every c.
struct RunConfig {
  std::string subcommand;
  std::string output_dir = "runs";

  struct Mc {
    std::uint64_t seed = 1;
    int workers = 1;
    //! Realization count; 0 selects the subcommand default.
    std::uint64_t samples = 0;
    friend bool operator==(Mc const&, Mc const&) = default;
  } mc;

  struct Env {
    int d = 2;
    int m = 1;
    int box_radius = 64;
    int cap_exp = 4;
    std::string shift = "zero";
    std::string plant = "none";
    std::int64_t plant_length = 16;
    std::vector<std::int64_t> plant_center{0, 0};
    friend bool operator==(Env const&, Env const&) = default;
  } env;

  struct Hamiltonian {
    std::string id = "quadratic-saddle";
    //! Quadratic saddle a p2^2 - b p1^2.
    double a = 3.0;
    double b = 3.0;
    //! Exponent of the power and separated eikonals.
    double k = 2.0;
    //! Elliptic eikonal weights.
    double a1 = 1.0;
    double a2 = 1.0;
    //! Polynomial expression in p1, p2 for the custom form.
    std::string expr = "3*p2^2 - 3*p1^2";
    friend bool operator==(Hamiltonian const&, Hamiltonian const&) = default;
  } hamiltonian;

  struct Grid {
    double dx = 0.125;
    double height = 16.0;
    double width = 0.0;
    double spacing = 0.5;
    friend bool operator==(Grid const&, Grid const&) = default;
  } grid;

  struct Evolution {
    std::vector<int> n{5, 6};
    double theta = 0.1;
    double delta = 0.1;
    double c_delta = 0.03;
    std::string scheme = "godunov";
    double tol = 0.05;
    double min_gap = 1.4;
    friend bool operator==(Evolution const&, Evolution const&) = default;
  } evolution;

  struct Metric {
    double mu = 4.0;
    Vec2 e{1.0, 0.0};
    double tol = 1e-8;
    friend bool operator==(Metric const&, Metric const&) = default;
  } metric;

  struct Hbar {
    Vec2 xi{1.0, 0.0};
    std::vector<double> t_list{4.0, 8.0, 16.0, 32.0};
    double tol = 1e-3;
    double mu_lo = 0.0625;
    double mu_hi = 8.0;
    double max_width = 0.05;
    friend bool operator==(Hbar const&, Hbar const&) = default;
  } hbar;

  struct Mixing {
    double theta = 0.5;
    int n_lo = 2;
    int n_hi = 8;
    int event_cap_exp = 0;
    std::uint64_t event_samples = 5000;
    std::vector<std::int64_t> offsets{8, 16, 32, 64};
    std::uint64_t alpha_samples = 250000;
    int alpha_cap_exp = 10;
    int bootstrap = 200;
    double level = 0.95;
    double min_gamma = 0.4;
    friend bool operator==(Mixing const&, Mixing const&) = default;
  } mixing;

  struct Barrier {
    int n = 6;
    double theta = 0.1;
    std::string sign = "both";
    double tol = 1e-9;
    friend bool operator==(Barrier const&, Barrier const&) = default;
  } barrier;

  friend bool operator==(RunConfig const&, RunConfig const&) = default;
};

namespace detail {

inline std::string_view Trim(std::string_view s) {
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto const e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> SplitList(std::string_view s, char sep) {
  auto out = std::vector<std::string_view>();
  std::size_t start = 0;
  while (true) {
    auto const p = s.find(sep, start);
    out.push_back(Trim(s.substr(start, p == std::string_view::npos ? s.npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

template <typename T>
T ParseInteger(std::string_view s) {
  auto v = T{};
  auto const* end = s.data() + s.size();
  auto const [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(Msg("expected an integer, got '", s, "'"));
  }
  return v;
}

inline double ParseDouble(std::string_view s) {
  auto v = 0.0;
  auto const* end = s.data() + s.size();
  auto const [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError(Msg("expected a finite number, got '", s, "'"));
  }
  return v;
}

//! Shortest decimal form that parses back to the same double.
inline std::string FormatDouble(double v) {
  char buf[32];
  auto const [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
std::string FormatList(std::vector<T> const& v) {
  auto out = std::string();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += FormatDouble(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

}  // namespace detail

//! One key of the text format.
struct ConfigField {
  std::string key;
  std::string doc;
  std::function<void(RunConfig&, std::string_view)> parse;
  std::function<std::string(RunConfig const&)> format;
};

namespace detail {

template <typename Get>
ConfigField IntField(std::string key, std::string doc, Get get, long long lo, long long hi) {
  return {key, doc,
          [get, lo, hi](RunConfig& c, std::string_view s) {
            auto& ref = get(c);
            using T = std::remove_reference_t<decltype(ref)>;
            auto const v = ParseInteger<T>(s);
            if (static_cast<long long>(v) < lo || static_cast<long long>(v) > hi) {
              throw ConfigError(Msg("value ", v, " outside [", lo, ", ", hi, "]"));
            }
            ref = v;
          },
          [get](RunConfig const& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
ConfigField U64Field(std::string key, std::string doc, Get get) {
  return {key, doc,
          [get](RunConfig& c, std::string_view s) { get(c) = ParseInteger<std::uint64_t>(s); },
          [get](RunConfig const& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
ConfigField DoubleField(std::string key, std::string doc, Get get, bool positive) {
  return {key, doc,
          [get, positive](RunConfig& c, std::string_view s) {
            double const v = ParseDouble(s);
            if (positive && !(v > 0.0)) throw ConfigError(Msg("value ", v, " must be positive"));
            get(c) = v;
          },
          [get](RunConfig const& c) { return FormatDouble(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
ConfigField ChoiceField(std::string key, std::string doc, Get get,
                        std::vector<std::string> choices) {
  return {key, doc,
          [get, choices](RunConfig& c, std::string_view s) {
            for (auto const& ch : choices) {
              if (s == ch) {
                get(c) = ch;
                return;
              }
            }
            auto all = std::string();
            for (auto const& ch : choices) all += (all.empty() ? "" : "|") + ch;
            throw ConfigError(Msg("'", s, "' is not one of ", all));
          },
          [get](RunConfig const& c) { return get(const_cast<RunConfig&>(c)); }};
}

template <typename Get>
ConfigField TextField(std::string key, std::string doc, Get get) {
  return {key, doc,
          [get](RunConfig& c, std::string_view s) {
            if (s.empty()) throw ConfigError("value must not be empty");
            if (s.find('#') != std::string_view::npos) {
              throw ConfigError("value must not contain '#'");
            }
            get(c) = std::string(s);
          },
          [get](RunConfig const& c) { return get(const_cast<RunConfig&>(c)); }};
}

template <typename T, typename Get>
ConfigField ListField(std::string key, std::string doc, Get get, std::size_t min_size,
                      std::size_t max_size) {
  return {key, doc,
          [get, min_size, max_size](RunConfig& c, std::string_view s) {
            auto v = std::vector<T>();
            for (auto item : SplitList(s, ',')) {
              if constexpr (std::is_floating_point_v<T>) {
                v.push_back(ParseDouble(item));
              } else {
                v.push_back(ParseInteger<T>(item));
              }
            }
            if (v.size() < min_size || v.size() > max_size) {
              throw ConfigError(Msg("expected ", min_size, " to ", max_size,
                                    " comma-separated entries, got ", v.size()));
            }
            get(c) = std::move(v);
          },
          [get](RunConfig const& c) { return FormatList(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
ConfigField Vec2Field(std::string key, std::string doc, Get get) {
  return {key, doc,
          [get](RunConfig& c, std::string_view s) {
            auto const parts = SplitList(s, ',');
            if (parts.size() != 2) throw ConfigError(Msg("expected 'x,y', got '", s, "'"));
            get(c) = Vec2{ParseDouble(parts[0]), ParseDouble(parts[1])};
          },
          [get](RunConfig const& c) {
            auto const v = get(const_cast<RunConfig&>(c));
            return FormatDouble(v.x) + "," + FormatDouble(v.y);
          }};
}

}  // namespace detail

//! The documented key-value schema, in canonical order.
inline std::vector<ConfigField> const& ConfigSchema() {
  using namespace detail;
  using C = RunConfig;
  static auto const fields = std::vector<ConfigField>{
      ChoiceField("subcommand", "one of the six subcommands",
                  [](C& c) -> auto& { return c.subcommand; }, Subcommands()),
      TextField("output.dir",
                "artifact directory; relative paths resolve against $HJLAB_OUTPUT_ROOT",
                [](C& c) -> auto& { return c.output_dir; }),
      U64Field("mc.seed", "master seed", [](C& c) -> auto& { return c.mc.seed; }),
      IntField("mc.workers", "worker threads", [](C& c) -> auto& { return c.mc.workers; }, 1,
               1024),
      U64Field("mc.samples", "realizations (0 = subcommand default)",
               [](C& c) -> auto& { return c.mc.samples; }),
      IntField("env.d", "lattice dimension", [](C& c) -> auto& { return c.env.d; }, 2, 6),
      IntField("env.m", "horizontal dimensions", [](C& c) -> auto& { return c.env.m; }, 1, 5),
      IntField("env.box_radius", "half side of the sampled box",
               [](C& c) -> auto& { return c.env.box_radius; }, 4, 1 << 20),
      IntField("env.cap_exp", "X and Y are capped at 2^cap_exp",
               [](C& c) -> auto& { return c.env.cap_exp; }, 1, 30),
      ChoiceField("env.shift", "stationarizing shift",
                  [](C& c) -> auto& { return c.env.shift; }, {"zero", "uniform"}),
      ChoiceField("env.plant", "conditioned segment",
                  [](C& c) -> auto& { return c.env.plant; }, {"none", "horizontal", "vertical"}),
      IntField("env.plant_length", "planted length (power of two >= 4)",
               [](C& c) -> auto& { return c.env.plant_length; }, 4, 1 << 20),
      ListField<std::int64_t>("env.plant_center", "planted lattice point",
                              [](C& c) -> auto& { return c.env.plant_center; }, 2, 6),
      ChoiceField("hamiltonian.id", "catalog entry",
                  [](C& c) -> auto& { return c.hamiltonian.id; },
                  {"quadratic-saddle", "quartic-saddle", "polynomial", "eikonal",
                   "power-eikonal", "modulated-eikonal", "separated-eikonal",
                   "elliptic-eikonal", "double-well"}),
      DoubleField("hamiltonian.a", "quadratic saddle: coefficient of p2^2",
                  [](C& c) -> auto& { return c.hamiltonian.a; }, false),
      DoubleField("hamiltonian.b", "quadratic saddle: coefficient of -p1^2",
                  [](C& c) -> auto& { return c.hamiltonian.b; }, false),
      DoubleField("hamiltonian.k", "eikonal exponent",
                  [](C& c) -> auto& { return c.hamiltonian.k; }, true),
      DoubleField("hamiltonian.a1", "elliptic weight of xi1^2",
                  [](C& c) -> auto& { return c.hamiltonian.a1; }, true),
      DoubleField("hamiltonian.a2", "elliptic weight of xi2^2",
                  [](C& c) -> auto& { return c.hamiltonian.a2; }, true),
      TextField("hamiltonian.expr", "polynomial in p1, p2, e.g. 3*p2^2 - 3*p1^2",
                [](C& c) -> auto& { return c.hamiltonian.expr; }),
      DoubleField("grid.dx", "grid spacing", [](C& c) -> auto& { return c.grid.dx; }, true),
      DoubleField("grid.height", "slab height of metric solves",
                  [](C& c) -> auto& { return c.grid.height; }, true),
      DoubleField("grid.width", "slab width (0 = smallest certified)",
                  [](C& c) -> auto& { return c.grid.width; }, false),
      DoubleField("grid.spacing", "sample spacing of exported fields",
                  [](C& c) -> auto& { return c.grid.spacing; }, true),
      ListField<int>("evolution.n", "scales n (horizon T = 2^n)",
                     [](C& c) -> auto& { return c.evolution.n; }, 1, 8),
      DoubleField("evolution.theta", "plant distance factor",
                  [](C& c) -> auto& { return c.evolution.theta; }, true),
      DoubleField("evolution.delta", "barrier slope",
                  [](C& c) -> auto& { return c.evolution.delta; }, true),
      DoubleField("evolution.c_delta", "slab constant",
                  [](C& c) -> auto& { return c.evolution.c_delta; }, false),
      ChoiceField("evolution.scheme", "numerical flux",
                  [](C& c) -> auto& { return c.evolution.scheme; },
                  {"godunov", "local", "global"}),
      DoubleField("evolution.tol", "slack on the barrier bounds",
                  [](C& c) -> auto& { return c.evolution.tol; }, false),
      DoubleField("evolution.min_gap", "required gap between plants",
                  [](C& c) -> auto& { return c.evolution.min_gap; }, false),
      DoubleField("metric.mu", "level mu", [](C& c) -> auto& { return c.metric.mu; }, true),
      Vec2Field("metric.e", "slab normal", [](C& c) -> auto& { return c.metric.e; }),
      DoubleField("metric.tol", "sweep convergence tolerance",
                  [](C& c) -> auto& { return c.metric.tol; }, true),
      Vec2Field("hbar.xi", "slope xi", [](C& c) -> auto& { return c.hbar.xi; }),
      ListField<double>("hbar.t_list", "distances t",
                        [](C& c) -> auto& { return c.hbar.t_list; }, 3, 16),
      DoubleField("hbar.tol", "bisection tolerance",
                  [](C& c) -> auto& { return c.hbar.tol; }, true),
      DoubleField("hbar.mu_lo", "initial lower mu", [](C& c) -> auto& { return c.hbar.mu_lo; },
                  true),
      DoubleField("hbar.mu_hi", "initial upper mu", [](C& c) -> auto& { return c.hbar.mu_hi; },
                  true),
      DoubleField("hbar.max_width", "largest accepted bracket width",
                  [](C& c) -> auto& { return c.hbar.max_width; }, true),
      DoubleField("mixing.theta", "annulus factor",
                  [](C& c) -> auto& { return c.mixing.theta; }, true),
      IntField("mixing.n_lo", "first event scale", [](C& c) -> auto& { return c.mixing.n_lo; },
               1, 20),
      IntField("mixing.n_hi", "last event scale", [](C& c) -> auto& { return c.mixing.n_hi; },
               1, 20),
      IntField("mixing.event_cap_exp", "cap of the event runs (0 = n_hi + 1)",
               [](C& c) -> auto& { return c.mixing.event_cap_exp; }, 0, 24),
      U64Field("mixing.event_samples", "realizations of the event runs",
               [](C& c) -> auto& { return c.mixing.event_samples; }),
      ListField<std::int64_t>("mixing.offsets", "horizontal offsets |l|",
                              [](C& c) -> auto& { return c.mixing.offsets; }, 1, 32),
      U64Field("mixing.alpha_samples", "realizations per offset",
               [](C& c) -> auto& { return c.mixing.alpha_samples; }),
      IntField("mixing.alpha_cap_exp", "cap of the alpha runs",
               [](C& c) -> auto& { return c.mixing.alpha_cap_exp; }, 1, 24),
      IntField("mixing.bootstrap", "bootstrap resamples",
               [](C& c) -> auto& { return c.mixing.bootstrap; }, 0, 100000),
      DoubleField("mixing.level", "confidence level",
                  [](C& c) -> auto& { return c.mixing.level; }, true),
      DoubleField("mixing.min_gamma", "required decay exponent",
                  [](C& c) -> auto& { return c.mixing.min_gamma; }, false),
      IntField("barrier.n", "scale n (horizon T = 2^n)",
               [](C& c) -> auto& { return c.barrier.n; }, 1, 12),
      DoubleField("barrier.theta", "plant distance factor",
                  [](C& c) -> auto& { return c.barrier.theta; }, true),
      ChoiceField("barrier.sign", "barriers to verify",
                  [](C& c) -> auto& { return c.barrier.sign; }, {"both", "upper", "lower"}),
      DoubleField("barrier.tol", "slack tolerance",
                  [](C& c) -> auto& { return c.barrier.tol; }, true),
  };
  return fields;
}

inline ConfigField const* FindField(std::string_view key) {
  for (auto const& f : ConfigSchema()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

//! Sets one key; @a where prefixes every diagnostic.
inline void SetConfigValue(RunConfig& c, std::string_view key, std::string_view value,
                           std::string const& where) {
  auto const* f = FindField(key);
  if (f == nullptr) throw ConfigError(Msg(where, ": unknown key '", key, "'"));
  try {
    f->parse(c, value);
  } catch (ConfigError const& e) {
    // Strip the class prefix of the inner message.
    std::string inner = e.what();
    auto const p = inner.find(": ");
    if (p != std::string::npos) inner = inner.substr(p + 2);
    throw ConfigError(Msg(where, ", field '", key, "': ", inner));
  }
}

//! Applies a "key=value" override given on the command line.
inline void ApplyOverride(RunConfig& c, std::string_view assignment) {
  auto const eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(Msg("override '", assignment, "': expected key=value"));
  }
  SetConfigValue(c, detail::Trim(assignment.substr(0, eq)), detail::Trim(assignment.substr(eq + 1)),
                 Msg("override '", assignment, "'"));
}

//! Parses the text format: one "key = value" per line, '#' starts a
//! comment, blank lines are ignored. Unknown keys, duplicate keys,
//! malformed lines and a file without any key are errors; messages name
//! the line and the field.
inline RunConfig ParseConfig(std::string_view text, std::string const& source = "config") {
  auto c = RunConfig();
  auto seen = std::map<std::string, int, std::less<>>();
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto const nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    auto const hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::Trim(line);
    if (line.empty()) continue;
    auto const where = Msg(source, ":", line_no);
    auto const eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(Msg(where, ": expected 'key = value', got '", line, "'"));
    }
    auto const key = detail::Trim(line.substr(0, eq));
    auto const value = detail::Trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(Msg(where, ": missing key before '='"));
    if (auto const it = seen.find(key); it != seen.end()) {
      throw ConfigError(Msg(where, ", field '", key, "': duplicate key (first set on line ",
                            it->second, ")"));
    }
    SetConfigValue(c, key, value, where);
    seen.emplace(std::string(key), line_no);
  }
  if (seen.empty()) throw ConfigError(Msg(source, ": empty configuration (no keys set)"));
  return c;
}

//! Canonical text form: every key in schema order. An unset subcommand
//! is omitted since it has no valid value.
inline std::string SerializeConfig(RunConfig const& c) {
  auto out = std::string();
  for (auto const& f : ConfigSchema()) {
    if (f.key == "subcommand" && c.subcommand.empty()) continue;
    out += f.key + " = " + f.format(c) + "\n";
  }
  return out;
}

//! Schema listing for --help style output: key, default, description.
inline std::string DescribeSchema() {
  auto const defaults = RunConfig();
  auto ss = std::ostringstream();
  for (auto const& f : ConfigSchema()) {
    ss << f.key << " = " << f.format(defaults) << "    # " << f.doc << "\n";
  }
  return ss.str();
}

}  // namespace hjlab
