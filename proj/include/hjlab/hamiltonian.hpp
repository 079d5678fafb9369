#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <concepts>
#include <functional>
#include <string>
#include <vector>

#include "hjlab/core.hpp"

namespace hjlab {

//! Closed box of gradients [lo1, hi1] x [lo2, hi2].
struct GradientBox {
  double lo1 = -1.0;
  double hi1 = 1.0;
  double lo2 = -1.0;
  double hi2 = 1.0;

  static GradientBox Symmetric(double r) { return {-r, r, -r, r}; }
  static GradientBox Spanning(double a, double b, double c, double d) {
    return {std::min(a, b), std::max(a, b), std::min(c, d), std::max(c, d)};
  }
  double MaxAbs1() const { return std::max(std::abs(lo1), std::abs(hi1)); }
  double MaxAbs2() const { return std::max(std::abs(lo2), std::abs(hi2)); }
  bool Contains(GradientBox const& o) const {
    return o.lo1 >= lo1 && o.hi1 <= hi1 && o.lo2 >= lo2 && o.hi2 <= hi2;
  }
};

//! A planar Hamiltonian g(p1, p2) usable by the evolution solver:
//! SpeedBound returns upper bounds of |dg/dp1| and |dg/dp2| over a box,
//! SupAbs an upper bound of |g| over a box.
template <typename H>
concept PlanarHamiltonian = requires(H const& h, double a, GradientBox const& b) {
  { h(a, a) } -> std::convertible_to<double>;
  { h.SpeedBound(b) } -> std::same_as<Vec2>;
  { h.SupAbs(b) } -> std::convertible_to<double>;
};

//! Godunov flux of the even function f(p) = s phi(|p|), phi increasing,
//! on the one-sided pair (pm, pp): the minimum of f over the interval
//! between them when pm <= pp, the maximum otherwise. The extremes are
//! attained at the smallest or the largest |p| of the interval, whose
//! phi values the caller passes in. Written without branches so that
//! the solver loop vectorizes.
inline double GodunovEven(double pm, double pp, bool positive, double phi_near,
                          double phi_far) {
  bool const increasing = pm <= pp;
  double const lower = positive ? phi_near : -phi_far;
  double const upper = positive ? phi_far : -phi_near;
  return increasing ? lower : upper;
}

//! Smallest |p| over the interval between pm and pp.
inline double NearAbs(double pm, double pp) {
  double const lo = pm < pp ? pm : pp;
  double const hi = pm < pp ? pp : pm;
  double const m = lo > -hi ? lo : -hi;
  return m > 0.0 ? m : 0.0;
}

//! Largest |p| over the interval between pm and pp.
inline double FarAbs(double pm, double pp) {
  double const lo = pm < pp ? pm : pp;
  double const hi = pm < pp ? pp : pm;
  return hi > -lo ? hi : -lo;
}

//! Separable Hamiltonians g(p) = g1(p1) + g2(p2) that expose the exact
//! one-dimensional Godunov fluxes of both parts.
template <typename H>
concept GodunovSeparable = requires(H const& h, double a) {
  { h.Godunov1(a, a) } -> std::convertible_to<double>;
  { h.Godunov2(a, a) } -> std::convertible_to<double>;
};

//! g(p) = a p2^2 - b p1^2 (a saddle for a, b > 0; b < 0 gives a
//! convex quadratic).
struct QuadraticSaddle {
  double a = 3.0;
  double b = 3.0;

  double operator()(double p1, double p2) const { return a * p2 * p2 - b * p1 * p1; }
  Vec2 SpeedBound(GradientBox const& box) const {
    return {2.0 * std::abs(b) * box.MaxAbs1(), 2.0 * std::abs(a) * box.MaxAbs2()};
  }
  double SupAbs(GradientBox const& box) const {
    double const m1 = box.MaxAbs1();
    double const m2 = box.MaxAbs2();
    return std::max(std::abs(a) * m2 * m2, std::abs(b) * m1 * m1);
  }
  double Godunov1(double pm, double pp) const {
    double const n = NearAbs(pm, pp);
    double const f = FarAbs(pm, pp);
    return GodunovEven(pm, pp, b < 0.0, std::abs(b) * n * n, std::abs(b) * f * f);
  }
  double Godunov2(double pm, double pp) const {
    double const n = NearAbs(pm, pp);
    double const f = FarAbs(pm, pp);
    return GodunovEven(pm, pp, a > 0.0, std::abs(a) * n * n, std::abs(a) * f * f);
  }
};

//! g(p) = p1^2 - p2^4.
struct QuarticSaddle {
  double operator()(double p1, double p2) const {
    double const q = p2 * p2;
    return p1 * p1 - q * q;
  }
  Vec2 SpeedBound(GradientBox const& box) const {
    double const m2 = box.MaxAbs2();
    return {2.0 * box.MaxAbs1(), 4.0 * m2 * m2 * m2};
  }
  double SupAbs(GradientBox const& box) const {
    double const m1 = box.MaxAbs1();
    double const m2 = box.MaxAbs2();
    return std::max(m1 * m1, m2 * m2 * m2 * m2);
  }
  double Godunov1(double pm, double pp) const {
    double const n = NearAbs(pm, pp);
    double const f = FarAbs(pm, pp);
    return GodunovEven(pm, pp, true, n * n, f * f);
  }
  double Godunov2(double pm, double pp) const {
    double const n = NearAbs(pm, pp) * NearAbs(pm, pp);
    double const f = FarAbs(pm, pp) * FarAbs(pm, pp);
    return GodunovEven(pm, pp, false, n * n, f * f);
  }
};

//! g(p) + q . p, the Hamiltonian seen in a frame moving with velocity -q.
template <PlanarHamiltonian H>
struct Sheared {
  H base;
  Vec2 q;

  double operator()(double p1, double p2) const { return base(p1, p2) + q.x * p1 + q.y * p2; }
  Vec2 SpeedBound(GradientBox const& box) const {
    Vec2 const s = base.SpeedBound(box);
    return {s.x + std::abs(q.x), s.y + std::abs(q.y)};
  }
  double SupAbs(GradientBox const& box) const {
    return base.SupAbs(box) + std::abs(q.x) * box.MaxAbs1() + std::abs(q.y) * box.MaxAbs2();
  }
};

//! Polynomial sum_k c_k p1^{i_k} p2^{j_k}, the restricted expression form
//! for custom Hamiltonians. Bounds are termwise, hence rigorous.
struct PolynomialHamiltonian {
  struct Term {
    double coef = 0.0;
    int i = 0;
    int j = 0;
  };
  std::vector<Term> terms;

  static double IntPow(double x, int n) {
    double r = 1.0;
    for (int k = 0; k < n; ++k) r *= x;
    return r;
  }
  double operator()(double p1, double p2) const {
    double s = 0.0;
    for (auto const& t : terms) s += t.coef * IntPow(p1, t.i) * IntPow(p2, t.j);
    return s;
  }
  Vec2 SpeedBound(GradientBox const& box) const {
    double const m1 = box.MaxAbs1();
    double const m2 = box.MaxAbs2();
    Vec2 s{0.0, 0.0};
    for (auto const& t : terms) {
      if (t.i > 0) s.x += std::abs(t.coef) * t.i * IntPow(m1, t.i - 1) * IntPow(m2, t.j);
      if (t.j > 0) s.y += std::abs(t.coef) * t.j * IntPow(m1, t.i) * IntPow(m2, t.j - 1);
    }
    return s;
  }
  double SupAbs(GradientBox const& box) const {
    double s = 0.0;
    for (auto const& t : terms) {
      s += std::abs(t.coef) * IntPow(box.MaxAbs1(), t.i) * IntPow(box.MaxAbs2(), t.j);
    }
    return s;
  }

  //! Parses expressions such as "3*p2^2 - 3*p1^2" or "p1^2 - 0.5 p2^4".
  //! Grammar: term (('+' | '-') term)*, where a term is an optional
  //! number followed by factors p1 or p2 with optional integer powers,
  //! separated by optional '*'. Throws ConfigError on malformed input.
  static PolynomialHamiltonian Parse(std::string const& text) {
    auto out = PolynomialHamiltonian();
    std::size_t pos = 0;
    auto skip = [&] {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    auto fail = [&](char const* what) {
      throw ConfigError(Msg("hamiltonian expression: ", what, " at offset ", pos,
                            " in '", text, "'"));
    };
    auto read_int = [&] {
      skip();
      std::size_t start = pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      if (start == pos) fail("expected integer exponent");
      int const v = std::stoi(text.substr(start, pos - start));
      if (v > 16) fail("exponent above 16");
      return v;
    };
    skip();
    if (pos == text.size()) fail("empty expression");
    bool first = true;
    while (true) {
      skip();
      if (pos == text.size()) break;
      double sign = 1.0;
      if (text[pos] == '+' || text[pos] == '-') {
        sign = text[pos] == '-' ? -1.0 : 1.0;
        ++pos;
      } else if (!first) {
        fail("expected '+' or '-'");
      }
      first = false;
      skip();
      auto t = Term{sign, 0, 0};
      bool any = false;
      if (pos < text.size() &&
          (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.')) {
        std::size_t used = 0;
        double const c = std::stod(text.substr(pos), &used);
        pos += used;
        t.coef *= c;
        any = true;
      }
      while (true) {
        skip();
        if (pos < text.size() && text[pos] == '*') {
          ++pos;
          skip();
        }
        if (pos + 1 < text.size() && text[pos] == 'p' && (text[pos + 1] == '1' || text[pos + 1] == '2')) {
          int const axis = text[pos + 1] - '0';
          pos += 2;
          skip();
          int power = 1;
          if (pos < text.size() && text[pos] == '^') {
            ++pos;
            power = read_int();
          }
          (axis == 1 ? t.i : t.j) += power;
          any = true;
          continue;
        }
        break;
      }
      if (!any) fail("expected number or p1/p2");
      out.terms.push_back(t);
    }
    return out;
  }
};

//! Arbitrary callable with bounds obtained by sampling the box on a
//! 33 x 33 grid with central differences, inflated by 25%. Not rigorous;
//! intended for exploratory runs only.
struct SampledHamiltonian {
  std::function<double(double, double)> f;

  double operator()(double p1, double p2) const { return f(p1, p2); }
  Vec2 SpeedBound(GradientBox const& box) const {
    Vec2 s{0.0, 0.0};
    double const e = 1e-6 * (1.0 + box.MaxAbs1() + box.MaxAbs2());
    for (int i = 0; i <= 32; ++i) {
      for (int j = 0; j <= 32; ++j) {
        double const a = box.lo1 + (box.hi1 - box.lo1) * i / 32.0;
        double const b = box.lo2 + (box.hi2 - box.lo2) * j / 32.0;
        s.x = std::max(s.x, std::abs(f(a + e, b) - f(a - e, b)) / (2 * e));
        s.y = std::max(s.y, std::abs(f(a, b + e) - f(a, b - e)) / (2 * e));
      }
    }
    return {1.25 * s.x + 1e-9, 1.25 * s.y + 1e-9};
  }
  double SupAbs(GradientBox const& box) const {
    double s = 0.0;
    for (int i = 0; i <= 32; ++i) {
      for (int j = 0; j <= 32; ++j) {
        s = std::max(s, std::abs(f(box.lo1 + (box.hi1 - box.lo1) * i / 32.0,
                                   box.lo2 + (box.hi2 - box.lo2) * j / 32.0)));
      }
    }
    return 1.25 * s;
  }
};

}  // namespace hjlab
