#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hjlab/core.hpp"
#include "hjlab/dyadic.hpp"
#include "hjlab/rng.hpp"

namespace hjlab {

inline constexpr int kMaxDim = 6;
using LatticePoint = std::array<std::int32_t, kMaxDim>;

enum class Orientation { kHorizontal, kVertical };

//! Mark value stored for points outside the core sub-box.
inline constexpr std::int8_t kMarkUndefined = 2;

inline LatticePoint MakePoint(std::initializer_list<std::int32_t> coords) {
  auto k = LatticePoint{};
  std::copy(coords.begin(), coords.end(), k.begin());
  return k;
}

//! Per-point key for stream @a s. Absolute coordinates are hashed, so
//! the same (seed, k) gives the same draw in every box containing k.
inline std::uint64_t PointKey(std::uint64_t seed, Stream s,
                              LatticePoint const& k, int d) {
  auto key = HashCombine(seed, static_cast<std::uint64_t>(s));
  for (int i = 0; i < d; ++i) {
    key = HashCombine(key, static_cast<std::uint64_t>(
                               static_cast<std::uint32_t>(k[i])));
  }
  return key;
}

//! Exponent of X_k (or Y_k) drawn from the per-point keyed stream.
inline int KeyedExponent(std::uint64_t seed, Stream s, LatticePoint const& k,
                         int d, int cap_exp) {
  return DyadicExponentFromBits(Mix64(PointKey(seed, s, k, d)), d, cap_exp);
}

//! Largest exponent e with 2^e < bound (bound >= 3), floored at 1.
inline int LargestExponentBelow(std::int64_t bound) {
  int const e = static_cast<int>(std::bit_width(
                    static_cast<std::uint64_t>(bound - 1))) - 1;
  return std::max(e, 1);
}

//! Record of one value changed by conditioning.
struct Override {
  LatticePoint k{};
  char field = 'X';
  int old_exp = 0;
  int new_exp = 0;
};

//! Truncated sample of (X_k, Y_k, M_k) on the box center + [-R, R]^d.
//! Values are stored as base-2 exponents. Marks are defined on the core
//! sub-box center + [-R + cap, R - cap]^d.
struct LatticeRealization {
  int d = 2;
  int m = 1;
  int box_radius = 0;
  int cap_exp = 1;
  std::uint64_t seed = 0;
  LatticePoint center{};
  std::vector<std::uint8_t> x_exp;
  std::vector<std::uint8_t> y_exp;
  std::vector<std::int8_t> mark;
  std::vector<Override> overrides;

  std::int64_t cap() const { return std::int64_t{1} << cap_exp; }
  std::int64_t side() const { return 2 * std::int64_t{box_radius} + 1; }
  std::int64_t core_radius() const { return box_radius - cap(); }

  std::size_t size() const {
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(side());
    return n;
  }

  bool InBox(LatticePoint const& k) const {
    for (int i = 0; i < d; ++i) {
      if (std::abs(std::int64_t{k[i]} - center[i]) > box_radius) return false;
    }
    return true;
  }

  bool InCore(LatticePoint const& k) const {
    for (int i = 0; i < d; ++i) {
      if (std::abs(std::int64_t{k[i]} - center[i]) > core_radius()) return false;
    }
    return true;
  }

  std::size_t Index(LatticePoint const& k) const {
    std::size_t idx = 0;
    for (int i = d - 1; i >= 0; --i) {
      idx = idx * static_cast<std::size_t>(side()) +
            static_cast<std::size_t>(k[i] - center[i] + box_radius);
    }
    return idx;
  }

  LatticePoint Point(std::size_t idx) const {
    auto k = LatticePoint{};
    for (int i = 0; i < d; ++i) {
      auto const s = static_cast<std::size_t>(side());
      k[i] = static_cast<std::int32_t>(idx % s) - box_radius + center[i];
      idx /= s;
    }
    return k;
  }

  // Interface shared with KeyedLattice, consumed by DirectMark.
  bool Contains(LatticePoint const& k) const { return InBox(k); }
  int XExp(LatticePoint const& k) const { return x_exp[Index(k)]; }
  int YExp(LatticePoint const& k) const { return y_exp[Index(k)]; }

  int MaxXExp() const {
    return std::max<int>(cap_exp, *std::max_element(x_exp.begin(), x_exp.end()));
  }
  int MaxYExp() const {
    return std::max<int>(cap_exp, *std::max_element(y_exp.begin(), y_exp.end()));
  }

  //! Mark of a core point. Throws OutOfCore elsewhere.
  int Mark(LatticePoint const& k) const {
    if (!InCore(k)) throw OutOfCore("mark requested outside the core sub-box");
    return mark[Index(k)];
  }
};

//! Lazily sampled realization on the whole lattice. X_k and Y_k are
//! computed on demand from the keyed stream, with optional overrides
//! and an optional conditioning of Y on an upper bound.
class KeyedLattice {
 public:
  //! Returns the largest admissible exponent of Y_k, or a value >= cap
  //! for no conditioning.
  using YBound = std::function<int(LatticePoint const&)>;

  KeyedLattice(int d, int m, int cap_exp, std::uint64_t seed)
      : d_(d), m_(m), cap_exp_(cap_exp), seed_(seed) {
    if (m < 1 || m > d - 1 || d > kMaxDim) {
      throw InvalidGeometry(Msg("need 1 <= m <= d-1 and d <= ", kMaxDim,
                                ", got d=", d, " m=", m));
    }
    if (cap_exp < 1 || cap_exp > DyadicLaw(d).MaxCapExp()) {
      throw InvalidGeometry(Msg("cap exponent ", cap_exp, " out of range"));
    }
  }

  int d() const { return d_; }
  int m() const { return m_; }
  int cap_exp() const { return cap_exp_; }
  std::uint64_t seed() const { return seed_; }

  void SetYBound(YBound bound) { y_bound_ = std::move(bound); }

  void OverrideX(LatticePoint const& k, int e) {
    x_over_[Key(k)] = e;
    max_x_exp_ = std::max(max_x_exp_, e);
  }
  void OverrideY(LatticePoint const& k, int e) {
    y_over_[Key(k)] = e;
    max_y_exp_ = std::max(max_y_exp_, e);
  }

  bool Contains(LatticePoint const&) const { return true; }

  int XExp(LatticePoint const& k) const {
    if (!x_over_.empty()) {
      auto it = x_over_.find(Key(k));
      if (it != x_over_.end()) return it->second;
    }
    return KeyedExponent(seed_, Stream::kX, k, d_, cap_exp_);
  }

  int YExp(LatticePoint const& k) const {
    if (!y_over_.empty()) {
      auto it = y_over_.find(Key(k));
      if (it != y_over_.end()) return it->second;
    }
    if (y_bound_) {
      int const top = y_bound_(k);
      if (top < cap_exp_) {
        return DyadicExponentBelow(Mix64(PointKey(seed_, Stream::kY, k, d_)),
                                   d_, cap_exp_, top + 1);
      }
    }
    return KeyedExponent(seed_, Stream::kY, k, d_, cap_exp_);
  }

  int MaxXExp() const { return max_x_exp_; }
  int MaxYExp() const { return max_y_exp_; }

 private:
  std::uint64_t Key(LatticePoint const& k) const {
    return PointKey(0, Stream::kPlant, k, d_);
  }

  int d_;
  int m_;
  int cap_exp_;
  std::uint64_t seed_;
  int max_x_exp_ = cap_exp_;
  int max_y_exp_ = cap_exp_;
  YBound y_bound_;
  std::unordered_map<std::uint64_t, int> x_over_;
  std::unordered_map<std::uint64_t, int> y_over_;
};

//! Dimension and split of any lattice source, whether it exposes them
//! as data members or as accessors.
template <typename Source>
int DimOf(Source const& s) {
  if constexpr (requires { s.d(); }) {
    return s.d();
  } else {
    return s.d;
  }
}

template <typename Source>
int SplitOf(Source const& s) {
  if constexpr (requires { s.m(); }) {
    return s.m();
  } else {
    return s.m;
  }
}

namespace detail {

//! Visits every offset o of the box prod_i [-half[i], half[i]], with
//! coordinates taken in the order 0, 1, -1, 2, -2, ... so that offsets
//! near zero come first. Stops early when @a f returns false.
template <typename F>
bool ForEachOffset(int d, std::array<std::int64_t, kMaxDim> const& half, F&& f) {
  auto counter = std::array<std::int64_t, kMaxDim>{};
  auto off = LatticePoint{};
  auto zigzag = [](std::int64_t c) {
    return static_cast<std::int32_t>((c & 1) ? (c + 1) / 2 : -(c / 2));
  };
  while (true) {
    for (int i = 0; i < d; ++i) off[i] = zigzag(counter[i]);
    if (!f(off)) return false;
    int i = 0;
    while (i < d) {
      if (++counter[i] <= 2 * half[i]) break;
      counter[i] = 0;
      ++i;
    }
    if (i == d) return true;
  }
}

}  // namespace detail

//! Evaluates the marking rule at @a k by direct scan. Source is either
//! a LatticeRealization or a KeyedLattice. The scan over the second
//! block of coordinates stops at half the largest value present, since
//! beyond that the inequality holds for every admissible value.
//! Throws TruncationViolation if a required point is not available.
template <typename Source>
int DirectMark(Source const& src, LatticePoint const& k) {
  int const d = DimOf(src);
  int const m = SplitOf(src);
  auto const check = [&](LatticePoint const& l) {
    if (!src.Contains(l)) {
      throw TruncationViolation("marking scan leaves the sampled box");
    }
  };

  int const xe = src.XExp(k);
  int const ye = src.YExp(k);
  auto const x = std::int64_t{1} << xe;
  auto const y = std::int64_t{1} << ye;

  if (xe > ye) {
    auto half = std::array<std::int64_t, kMaxDim>{};
    for (int i = 0; i < d; ++i) {
      half[i] = i < m ? x / 2 : (std::int64_t{1} << src.MaxYExp()) / 2;
    }
    bool ok = detail::ForEachOffset(d, half, [&](LatticePoint const& o) {
      std::int64_t n2 = 0;
      auto l = k;
      for (int i = 0; i < d; ++i) {
        l[i] += o[i];
        if (i >= m) n2 = std::max<std::int64_t>(n2, std::abs(o[i]));
      }
      check(l);
      auto const yl = std::int64_t{1} << src.YExp(l);
      return yl < std::max(x, 2 * n2);
    });
    if (ok) return -1;
  } else if (ye > xe) {
    auto half = std::array<std::int64_t, kMaxDim>{};
    for (int i = 0; i < d; ++i) {
      half[i] = i >= m ? y / 2 : (std::int64_t{1} << src.MaxXExp()) / 2;
    }
    bool ok = detail::ForEachOffset(d, half, [&](LatticePoint const& o) {
      std::int64_t n1 = 0;
      auto l = k;
      for (int i = 0; i < d; ++i) {
        l[i] += o[i];
        if (i < m) n1 = std::max<std::int64_t>(n1, std::abs(o[i]));
      }
      check(l);
      auto const xl = std::int64_t{1} << src.XExp(l);
      return xl < std::max(y, 2 * n1);
    });
    if (ok) return 1;
  }
  return 0;
}

namespace detail {

//! Computes all core marks of @a lat by scattering each point's
//! blocking region instead of gathering per point. A point l with
//! Y_l = y blocks the horizontal cube at k exactly when X_k <= y,
//! |(l-k)^1| <= X_k/2 and 2|(l-k)^2| <= y, and symmetrically for X_l.
//! Values y = 2 are skipped: they can only block X_k = 2, which never
//! survives (it would need Y_k < 2).
inline void ComputeMarks(LatticeRealization& lat) {
  int const d = lat.d;
  int const m = lat.m;
  auto const n = lat.size();
  auto const core = lat.core_radius();
  std::vector<std::uint8_t> blocked(n, 0);  // bit 0: horizontal, bit 1: vertical

  auto scatter = [&](std::size_t li, bool horizontal) {
    int const ve = horizontal ? lat.y_exp[li] : lat.x_exp[li];
    if (ve < 2) return;
    auto const v = std::int64_t{1} << ve;
    auto const l = lat.Point(li);
    // Intersect the cube |k - l| <= v/2 with the core.
    auto lo = std::array<std::int64_t, kMaxDim>{};
    auto hi = std::array<std::int64_t, kMaxDim>{};
    for (int i = 0; i < d; ++i) {
      lo[i] = std::max<std::int64_t>(l[i] - v / 2, lat.center[i] - core);
      hi[i] = std::min<std::int64_t>(l[i] + v / 2, lat.center[i] + core);
      if (lo[i] > hi[i]) return;
    }
    auto k = LatticePoint{};
    for (int i = 0; i < d; ++i) k[i] = static_cast<std::int32_t>(lo[i]);
    auto const& own = horizontal ? lat.x_exp : lat.y_exp;
    std::uint8_t const bit = horizontal ? 1 : 2;
    while (true) {
      // Second-block distance (scan-limited axes) is bounded by v/2 by
      // construction; only the first-block test depends on X_k.
      std::int64_t n_own = 0;
      for (int i = 0; i < d; ++i) {
        bool const own_axis = horizontal ? (i < m) : (i >= m);
        if (own_axis) {
          n_own = std::max<std::int64_t>(n_own, std::abs(std::int64_t{k[i]} - l[i]));
        }
      }
      auto const ki = lat.Index(k);
      int const ke = own[ki];
      if (ke <= ve && 2 * n_own <= (std::int64_t{1} << ke)) blocked[ki] |= bit;
      int i = 0;
      while (i < d) {
        if (++k[i] <= hi[i]) break;
        k[i] = static_cast<std::int32_t>(lo[i]);
        ++i;
      }
      if (i == d) break;
    }
  };

  for (std::size_t li = 0; li < n; ++li) {
    scatter(li, true);
    scatter(li, false);
  }

  lat.mark.assign(n, kMarkUndefined);
  for (std::size_t ki = 0; ki < n; ++ki) {
    if (!lat.InCore(lat.Point(ki))) continue;
    int const xe = lat.x_exp[ki];
    int const ye = lat.y_exp[ki];
    std::int8_t mk = 0;
    if (xe > ye && !(blocked[ki] & 1)) mk = -1;
    if (ye > xe && !(blocked[ki] & 2)) mk = 1;
    lat.mark[ki] = mk;
  }
}

}  // namespace detail

//! Samples X and Y on the box center + [-R, R]^d and marks the core.
inline LatticeRealization BuildLattice(int d, int m, int box_radius,
                                       int cap_exp, std::uint64_t seed,
                                       LatticePoint const& center = {}) {
  if (d < 2 || d > kMaxDim || m < 1 || m > d - 1) {
    throw InvalidGeometry(Msg("need 2 <= d <= ", kMaxDim,
                              " and 1 <= m <= d-1, got d=", d, " m=", m));
  }
  if (cap_exp < 1 || cap_exp > DyadicLaw(d).MaxCapExp()) {
    throw InvalidGeometry(Msg("cap exponent ", cap_exp, " out of range"));
  }
  if (std::int64_t{box_radius} < 2 * (std::int64_t{1} << cap_exp)) {
    throw InvalidGeometry(Msg("box_radius ", box_radius, " < 2 * cap ",
                              std::int64_t{1} << cap_exp));
  }
  auto lat = LatticeRealization();
  lat.d = d;
  lat.m = m;
  lat.box_radius = box_radius;
  lat.cap_exp = cap_exp;
  lat.seed = seed;
  lat.center = center;
  auto const n = lat.size();
  lat.x_exp.resize(n);
  lat.y_exp.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto const k = lat.Point(i);
    lat.x_exp[i] = static_cast<std::uint8_t>(
        KeyedExponent(seed, Stream::kX, k, d, cap_exp));
    lat.y_exp[i] = static_cast<std::uint8_t>(
        KeyedExponent(seed, Stream::kY, k, d, cap_exp));
  }
  detail::ComputeMarks(lat);
  return lat;
}

//! Conditions @a lat so that a cube of the given orientation and
//! length survives at @a c. The own value at c is set to @a length and
//! every cross value that would block it is lowered to the largest
//! dyadic that no longer blocks. Every change is appended to
//! lat.overrides; marks are then recomputed.
inline LatticeRealization PlantSegment(LatticeRealization lat,
                                       Orientation orientation,
                                       LatticePoint const& c,
                                       std::int64_t length) {
  if (!IsDyadic(static_cast<std::uint64_t>(length)) || length < 4) {
    throw InvalidGeometry(Msg("planted length ", length,
                              " must be a power of two >= 4"));
  }
  int const d = lat.d;
  int const m = lat.m;
  bool const horizontal = orientation == Orientation::kHorizontal;
  for (int i = 0; i < d; ++i) {
    bool const own_axis = horizontal ? (i < m) : (i >= m);
    auto const reach = own_axis ? length / 2 : 0;
    if (std::abs(std::int64_t{c[i]} - lat.center[i]) + reach > lat.core_radius()) {
      throw InvalidGeometry(Msg("planted cube of length ", length,
                                " does not fit in the core sub-box"));
    }
  }
  int const le = Log2(static_cast<std::uint64_t>(length));
  if (le > 255) throw InvalidGeometry("planted length too large");

  auto& own = horizontal ? lat.x_exp : lat.y_exp;
  auto& cross = horizontal ? lat.y_exp : lat.x_exp;
  char const own_name = horizontal ? 'X' : 'Y';
  char const cross_name = horizontal ? 'Y' : 'X';

  auto const ci = lat.Index(c);
  if (own[ci] != le) {
    lat.overrides.push_back({c, own_name, own[ci], le});
    own[ci] = static_cast<std::uint8_t>(le);
  }

  int const cross_max = horizontal ? lat.MaxYExp() : lat.MaxXExp();
  auto half = std::array<std::int64_t, kMaxDim>{};
  for (int i = 0; i < d; ++i) {
    bool const own_axis = horizontal ? (i < m) : (i >= m);
    half[i] = own_axis ? length / 2 : (std::int64_t{1} << cross_max) / 2;
  }
  detail::ForEachOffset(d, half, [&](LatticePoint const& o) {
    std::int64_t n_cross = 0;
    auto l = c;
    for (int i = 0; i < d; ++i) {
      l[i] += o[i];
      bool const own_axis = horizontal ? (i < m) : (i >= m);
      if (!own_axis) n_cross = std::max<std::int64_t>(n_cross, std::abs(o[i]));
    }
    if (!lat.InBox(l)) {
      throw InvalidGeometry("planting scan leaves the sampled box");
    }
    auto const bound = std::max(length, 2 * n_cross);
    auto const li = lat.Index(l);
    if ((std::int64_t{1} << cross[li]) >= bound) {
      int const ne = LargestExponentBelow(bound);
      lat.overrides.push_back({l, cross_name, cross[li], ne});
      cross[li] = static_cast<std::uint8_t>(ne);
    }
    return true;
  });

  detail::ComputeMarks(lat);
  return lat;
}

}  // namespace hjlab
