#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hjlab/core.hpp"
#include "hjlab/lattice.hpp"
#include "hjlab/rng.hpp"

namespace hjlab {

//! Axis-aligned closed box [lo, hi] (degenerate along the axes
//! orthogonal to the cube's own block).
struct Cube {
  LatticePoint center{};
  std::int64_t side = 0;
  std::array<double, kMaxDim> lo{};
  std::array<double, kMaxDim> hi{};
};

//! Euclidean distance from @a y to the box @a c.
inline double DistanceToCube(Cube const& c, double const* y, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    double const e = std::max({c.lo[i] - y[i], 0.0, y[i] - c.hi[i]});
    s += e * e;
  }
  return std::sqrt(s);
}

enum class ShiftMode { kZero, kUniform };

//! Separate contributions V_- and V_+ at a point.
struct PotentialParts {
  double minus = 0.0;
  double plus = 0.0;
  double value() const { return minus + plus; }
};

//! V(x, t) = V_+(y) + V_-(y) at y = x - p0 t - tau, built from the
//! retained cubes of a lattice realization. Distance queries go through
//! a dense cell table (cell size 1) listing every cube whose
//! 1/2-neighborhood meets the cell; beyond distance 1/2 a cube does not
//! contribute.
class PotentialField {
 public:
  PotentialField() = default;

  //! Builds the field from the marks of @a lat. The valid region is the
  //! core shrunk by cap/2 + 1: cubes centered outside the core reach at
  //! most cap/2 into it and their marks are unknown.
  static PotentialField FromLattice(LatticeRealization const& lat,
                                    ShiftMode shift_mode = ShiftMode::kZero,
                                    std::array<double, kMaxDim> p0 = {}) {
    auto f = PotentialField();
    f.d_ = lat.d;
    f.p0_ = p0;
    if (shift_mode == ShiftMode::kUniform) {
      auto rng = KeyedRng(HashCombine(lat.seed, static_cast<std::uint64_t>(
                                                    Stream::kShift)));
      for (int i = 0; i < lat.d; ++i) f.tau_[i] = rng.Uniform();
    }
    auto const margin = lat.cap() / 2 + 1;
    for (int i = 0; i < lat.d; ++i) {
      f.valid_lo_[i] = static_cast<double>(lat.center[i] - lat.core_radius() + margin);
      f.valid_hi_[i] = static_cast<double>(lat.center[i] + lat.core_radius() - margin);
      f.base_[i] = lat.center[i] - lat.box_radius;
      f.cells_[i] = lat.side();
    }
    auto const n = lat.size();
    for (std::size_t ki = 0; ki < n; ++ki) {
      auto const mk = lat.mark[ki];
      if (mk != -1 && mk != 1) continue;
      auto const k = lat.Point(ki);
      auto c = Cube();
      c.center = k;
      bool const horizontal = mk == -1;
      c.side = std::int64_t{1} << (horizontal ? lat.x_exp[ki] : lat.y_exp[ki]);
      for (int i = 0; i < lat.d; ++i) {
        bool const own_axis = horizontal ? (i < lat.m) : (i >= lat.m);
        double const h = own_axis ? static_cast<double>(c.side / 2) : 0.0;
        c.lo[i] = k[i] - h;
        c.hi[i] = k[i] + h;
      }
      (horizontal ? f.horizontal_ : f.vertical_).push_back(c);
    }
    f.BuildCells();
    return f;
  }

  int d() const { return d_; }
  std::vector<Cube> const& horizontal() const { return horizontal_; }
  std::vector<Cube> const& vertical() const { return vertical_; }
  std::array<double, kMaxDim> const& tau() const { return tau_; }
  std::array<double, kMaxDim> const& p0() const { return p0_; }
  double valid_lo(int i) const { return valid_lo_[i]; }
  double valid_hi(int i) const { return valid_hi_[i]; }

  //! True iff x - p0 t - tau lies in the valid region.
  bool Covers(double const* x, double t) const {
    for (int i = 0; i < d_; ++i) {
      double const y = x[i] - p0_[i] * t - tau_[i];
      if (!(y >= valid_lo_[i] && y <= valid_hi_[i])) return false;
    }
    return true;
  }

  PotentialParts Parts(double const* x, double t) const {
    auto y = std::array<double, kMaxDim>{};
    std::size_t cell = 0;
    for (int i = d_ - 1; i >= 0; --i) {
      y[i] = x[i] - p0_[i] * t - tau_[i];
      if (!(y[i] >= valid_lo_[i] && y[i] <= valid_hi_[i])) {
        throw OutOfCore(Msg("potential evaluated at coordinate ", y[i],
                            " outside [", valid_lo_[i], ", ", valid_hi_[i], "]"));
      }
      auto const j = static_cast<std::int64_t>(std::floor(y[i] - base_[i] + 0.5));
      cell = cell * static_cast<std::size_t>(cells_[i]) + static_cast<std::size_t>(j);
    }
    double dh = 0.5;
    double dr = 0.5;
    for (auto e = offsets_[cell]; e < offsets_[cell + 1]; ++e) {
      auto const id = entries_[e];
      if (id & kVerticalBit) {
        dr = std::min(dr, DistanceToCube(vertical_[id & ~kVerticalBit], y.data(), d_));
      } else {
        dh = std::min(dh, DistanceToCube(horizontal_[id], y.data(), d_));
      }
    }
    return {-1.0 + 2.0 * dh, 1.0 - 2.0 * dr};
  }

  double Eval(double const* x, double t = 0.0) const { return Parts(x, t).value(); }

  double Eval2(double x1, double x2, double t = 0.0) const {
    double const x[2] = {x1, x2};
    return Eval(x, t);
  }

  //! Minimum Euclidean distance between a retained horizontal and a
  //! retained vertical cube, by exhaustive pair scan over cubes whose
  //! bounding boxes come within @a cutoff (returns cutoff if none do).
  double MinCrossDistance(double cutoff = 2.0) const {
    double best = cutoff;
    for (auto const& h : horizontal_) {
      for (auto const& v : vertical_) {
        double s = 0.0;
        for (int i = 0; i < d_; ++i) {
          double const gap = std::max({h.lo[i] - v.hi[i], 0.0, v.lo[i] - h.hi[i]});
          s += gap * gap;
        }
        best = std::min(best, std::sqrt(s));
      }
    }
    return best;
  }

 private:
  static constexpr std::uint32_t kVerticalBit = 0x80000000u;

  void BuildCells() {
    std::size_t ncell = 1;
    for (int i = 0; i < d_; ++i) ncell *= static_cast<std::size_t>(cells_[i]);
    offsets_.assign(ncell + 1, 0);
    auto visit = [&](Cube const& c, auto&& f) {
      auto lo = std::array<std::int64_t, kMaxDim>{};
      auto hi = std::array<std::int64_t, kMaxDim>{};
      for (int i = 0; i < d_; ++i) {
        lo[i] = std::max<std::int64_t>(static_cast<std::int64_t>(c.lo[i]) - base_[i], 0);
        hi[i] = std::min<std::int64_t>(static_cast<std::int64_t>(c.hi[i]) - base_[i],
                                       cells_[i] - 1);
        if (lo[i] > hi[i]) return;
      }
      auto j = lo;
      while (true) {
        std::size_t cell = 0;
        for (int i = d_ - 1; i >= 0; --i) {
          cell = cell * static_cast<std::size_t>(cells_[i]) + static_cast<std::size_t>(j[i]);
        }
        f(cell);
        int i = 0;
        while (i < d_) {
          if (++j[i] <= hi[i]) break;
          j[i] = lo[i];
          ++i;
        }
        if (i == d_) return;
      }
    };
    for (auto const& c : horizontal_) visit(c, [&](std::size_t cell) { ++offsets_[cell + 1]; });
    for (auto const& c : vertical_) visit(c, [&](std::size_t cell) { ++offsets_[cell + 1]; });
    for (std::size_t i = 0; i < ncell; ++i) offsets_[i + 1] += offsets_[i];
    entries_.resize(offsets_[ncell]);
    auto fill = std::vector<std::uint32_t>(offsets_.begin(), offsets_.end() - 1);
    for (std::uint32_t id = 0; id < horizontal_.size(); ++id) {
      visit(horizontal_[id], [&](std::size_t cell) { entries_[fill[cell]++] = id; });
    }
    for (std::uint32_t id = 0; id < vertical_.size(); ++id) {
      visit(vertical_[id],
            [&](std::size_t cell) { entries_[fill[cell]++] = id | kVerticalBit; });
    }
  }

  int d_ = 2;
  std::vector<Cube> horizontal_;
  std::vector<Cube> vertical_;
  std::array<double, kMaxDim> tau_{};
  std::array<double, kMaxDim> p0_{};
  std::array<double, kMaxDim> valid_lo_{};
  std::array<double, kMaxDim> valid_hi_{};
  std::array<std::int64_t, kMaxDim> base_{};
  std::array<std::int64_t, kMaxDim> cells_{};
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> entries_;
};

//! V_* at lattice point k: -1 on a retained horizontal cube, +1 on a
//! retained vertical cube, 0 otherwise. Lattice points are at distance
//! 0 or >= 1 from every cube, so these are the only values. Computed
//! from the marks of nearby centers through DirectMark, which works for
//! both stored and lazily keyed lattices.
template <typename Source>
int LatticeValue(Source const& src, LatticePoint const& k) {
  int const d = DimOf(src);
  int const m = SplitOf(src);
  // Horizontal cubes containing k are centered at j with j^2 = k^2 and
  // |(j - k)^1| <= X_j / 2; symmetric for vertical ones.
  for (int pass = 0; pass < 2; ++pass) {
    bool const horizontal = pass == 0;
    int const max_e = horizontal ? src.MaxXExp() : src.MaxYExp();
    auto half = std::array<std::int64_t, kMaxDim>{};
    for (int i = 0; i < d; ++i) {
      bool const own_axis = horizontal ? (i < m) : (i >= m);
      half[i] = own_axis ? (std::int64_t{1} << max_e) / 2 : 0;
    }
    bool found = false;
    detail::ForEachOffset(d, half, [&](LatticePoint const& o) {
      std::int64_t reach = 0;
      auto j = k;
      for (int i = 0; i < d; ++i) {
        j[i] += o[i];
        reach = std::max<std::int64_t>(reach, std::abs(o[i]));
      }
      int const e = horizontal ? src.XExp(j) : src.YExp(j);
      if (2 * reach > (std::int64_t{1} << e)) return true;
      int const mk = DirectMark(src, j);
      if (mk == (horizontal ? -1 : 1)) {
        found = true;
        return false;
      }
      return true;
    });
    if (found) return horizontal ? -1 : 1;
  }
  return 0;
}

}  // namespace hjlab
