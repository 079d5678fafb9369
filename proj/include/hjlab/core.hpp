#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hjlab {

//! Base class of every error raised by the library. The CLI maps these
//! to exit status 1.
class Error : public std::runtime_error {
 public:
  explicit Error(std::string const& what) : std::runtime_error(what) {}
};

#define HJLAB_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(std::string const& what) : Error(#Name ": " + what) {} \
  };

HJLAB_DEFINE_ERROR(TruncationViolation)
HJLAB_DEFINE_ERROR(InvalidGeometry)
HJLAB_DEFINE_ERROR(OutOfCore)
HJLAB_DEFINE_ERROR(NoValidDelta)
HJLAB_DEFINE_ERROR(RegionMismatch)
HJLAB_DEFINE_ERROR(CFLViolation)
HJLAB_DEFINE_ERROR(NumericalBlowup)
HJLAB_DEFINE_ERROR(NotStarShaped)
HJLAB_DEFINE_ERROR(NoConvergence)
HJLAB_DEFINE_ERROR(MissingKey)
HJLAB_DEFINE_ERROR(InsufficientData)
HJLAB_DEFINE_ERROR(IndeterminateBracket)
HJLAB_DEFINE_ERROR(ConfigError)

#undef HJLAB_DEFINE_ERROR

//! Builds an error message from streamable pieces.
template <typename... Args>
std::string Msg(Args const&... args) {
  auto ss = std::ostringstream();
  ss.precision(17);
  (ss << ... << args);
  return ss.str();
}

//! Plain 2-vector used by the planar solvers.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double Dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double Norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }

//! Unit vector at angle @a theta (radians, counterclockwise from e_1).
inline Vec2 UnitAt(double theta) { return {std::cos(theta), std::sin(theta)}; }

//! Rotation by +90 degrees.
inline Vec2 Perp(Vec2 a) { return {-a.y, a.x}; }

inline constexpr double kPi = 3.14159265358979323846;

//! Returns true iff @a v is a positive power of two.
inline constexpr bool IsDyadic(std::uint64_t v) {
  return v >= 2 && (v & (v - 1)) == 0;
}

//! Integer base-2 logarithm of a power of two.
inline constexpr int Log2(std::uint64_t v) {
  int n = 0;
  while (v > 1) {
    v >>= 1;
    ++n;
  }
  return n;
}

}  // namespace hjlab
