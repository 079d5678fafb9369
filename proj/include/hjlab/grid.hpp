#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hjlab/core.hpp"

namespace hjlab {

//! Uniform planar Cartesian grid: node (i, j) sits at
//! (x0 + i h, y0 + j h) and is stored at values[j * nx + i].
struct GridField {
  std::int64_t nx = 0;
  std::int64_t ny = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double h = 1.0;
  std::vector<double> values;
  //! Free-form boundary-condition descriptor, e.g. "extrapolate" or
  //! "periodic-x outflow-y".
  std::string boundary;

  GridField() = default;
  GridField(std::int64_t nx_, std::int64_t ny_, double x0_, double y0_, double h_,
            double fill = 0.0)
      : nx(nx_), ny(ny_), x0(x0_), y0(y0_), h(h_),
        values(static_cast<std::size_t>(nx_ * ny_), fill) {}

  double& at(std::int64_t i, std::int64_t j) {
    return values[static_cast<std::size_t>(j * nx + i)];
  }
  double at(std::int64_t i, std::int64_t j) const {
    return values[static_cast<std::size_t>(j * nx + i)];
  }
  double X(std::int64_t i) const { return x0 + static_cast<double>(i) * h; }
  double Y(std::int64_t j) const { return y0 + static_cast<double>(j) * h; }

  //! Bilinear interpolation; throws OutOfCore outside the grid.
  double Interpolate(double x, double y) const {
    double const fx = (x - x0) / h;
    double const fy = (y - y0) / h;
    if (!(fx >= 0.0 && fy >= 0.0 && fx <= static_cast<double>(nx - 1) &&
          fy <= static_cast<double>(ny - 1))) {
      throw OutOfCore(Msg("grid interpolation at (", x, ", ", y, ") outside the grid"));
    }
    auto i = static_cast<std::int64_t>(std::floor(fx));
    auto j = static_cast<std::int64_t>(std::floor(fy));
    i = std::min(i, nx - 2 < 0 ? 0 : nx - 2);
    j = std::min(j, ny - 2 < 0 ? 0 : ny - 2);
    double const a = fx - static_cast<double>(i);
    double const b = fy - static_cast<double>(j);
    if (nx == 1 || ny == 1) return at(i, j);
    return (1 - a) * (1 - b) * at(i, j) + a * (1 - b) * at(i + 1, j) +
           (1 - a) * b * at(i, j + 1) + a * b * at(i + 1, j + 1);
  }
};

}  // namespace hjlab
