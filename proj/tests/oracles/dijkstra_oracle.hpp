#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "hjlab/metric.hpp"
#include "hjlab/radius.hpp"

namespace hjlab::oracle {

//! Primitive lattice offsets (a, b) with |a|, |b| <= reach.
inline std::vector<std::pair<int, int>> Stencil(int reach) {
  auto out = std::vector<std::pair<int, int>>();
  for (int a = -reach; a <= reach; ++a) {
    for (int b = -reach; b <= reach; ++b) {
      if ((a != 0 || b != 0) && std::gcd(std::abs(a), std::abs(b)) == 1) out.emplace_back(a, b);
    }
  }
  return out;
}

//! Relative excess of the shortest stencil path over the straight
//! segment in the worst direction: 1/cos(g/2) - 1 with g the largest
//! angular gap between consecutive stencil directions.
inline double MetricationBound(int reach) {
  auto angles = std::vector<double>();
  for (auto [a, b] : Stencil(reach)) angles.push_back(std::atan2(b, a));
  std::sort(angles.begin(), angles.end());
  double gap = angles.front() + 2 * kPi - angles.back();
  for (std::size_t k = 1; k < angles.size(); ++k) gap = std::max(gap, angles[k] - angles[k - 1]);
  return 1.0 / std::cos(gap / 2) - 1.0;
}

//! Shortest travel times on the grid graph of @a sol (same nodes, same
//! fixed target nodes as sources, same periodicity). The cost of a step
//! v from x is the support function sigma(x, v) = max_theta
//! r_mu(theta, x) cos(theta - angle(v)) |v|, evaluated from the spec (not
//! the solver table) over 720 directions at every node, then integrated
//! along the edge with a midpoint rule on 2 max(|a|, |b|) pieces using
//! bilinear node interpolation.
inline std::vector<double> DijkstraMetric(MetricSolution const& sol, HamiltonianSpec const& s,
                                          int reach = 3) {
  auto const& m = sol.m;
  auto const nu = m.nx;
  auto const nv = m.ny;
  double const h = m.h;
  auto const stencil = Stencil(reach);
  auto const ns = stencil.size();
  // Unit support value per node and stencil direction.
  auto sigma = std::vector<double>(static_cast<std::size_t>(nu * nv) * ns);
  int const nth = s.isotropic ? 1 : 720;
  auto r = std::vector<double>(static_cast<std::size_t>(nth));
  for (std::int64_t j = 0; j < nv; ++j) {
    for (std::int64_t i = 0; i < nu; ++i) {
      Vec2 const x = sol.frame.ToPlane(m.X(i), m.Y(j));
      for (int k = 0; k < nth; ++k) r[static_cast<std::size_t>(k)] = Radius(s, UnitAt(2 * kPi * k / nth), x, sol.mu);
      for (std::size_t d = 0; d < ns; ++d) {
        double best = 0.0;
        if (nth == 1) {
          best = r[0];
        } else {
          Vec2 const v = sol.frame.Direction(stencil[d].first, stencil[d].second);
          double const phi = std::atan2(v.y, v.x);
          for (int k = 0; k < nth; ++k) {
            best = std::max(best, r[static_cast<std::size_t>(k)] * std::cos(2 * kPi * k / nth - phi));
          }
        }
        sigma[static_cast<std::size_t>(j * nu + i) * ns + d] = best;
      }
    }
  }
  auto node_sigma = [&](std::int64_t i, std::int64_t j, std::size_t d) {
    if (sol.periodic_u) i = ((i % nu) + nu) % nu;
    i = std::clamp<std::int64_t>(i, 0, nu - 1);
    j = std::clamp<std::int64_t>(j, 0, nv - 1);
    return sigma[static_cast<std::size_t>(j * nu + i) * ns + d];
  };
  auto edge_cost = [&](std::int64_t i, std::int64_t j, std::size_t d) {
    auto const [a, b] = stencil[d];
    int const pieces = 2 * std::max(std::abs(a), std::abs(b));
    double acc = 0.0;
    for (int k = 0; k < pieces; ++k) {
      double const f = (k + 0.5) / pieces;
      double const fu = static_cast<double>(i) + f * a;
      double const fv = static_cast<double>(j) + f * b;
      auto const iu = static_cast<std::int64_t>(std::floor(fu));
      auto const jv = static_cast<std::int64_t>(std::floor(fv));
      double const wu = fu - static_cast<double>(iu);
      double const wv = fv - static_cast<double>(jv);
      acc += (1 - wu) * (1 - wv) * node_sigma(iu, jv, d) + wu * (1 - wv) * node_sigma(iu + 1, jv, d) +
             (1 - wu) * wv * node_sigma(iu, jv + 1, d) + wu * wv * node_sigma(iu + 1, jv + 1, d);
    }
    return acc / pieces * h * std::hypot(a, b);
  };
  auto dist = std::vector<double>(static_cast<std::size_t>(nu * nv), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::int64_t>;
  auto pq = std::priority_queue<Item, std::vector<Item>, std::greater<>>();
  for (std::int64_t n = 0; n < nu * nv; ++n) {
    if (sol.fixed[static_cast<std::size_t>(n)]) {
      dist[static_cast<std::size_t>(n)] = 0.0;
      pq.emplace(0.0, n);
    }
  }
  while (!pq.empty()) {
    auto const [d0, n] = pq.top();
    pq.pop();
    if (d0 > dist[static_cast<std::size_t>(n)]) continue;
    std::int64_t const i = n % nu;
    std::int64_t const j = n / nu;
    for (std::size_t d = 0; d < ns; ++d) {
      std::int64_t ti = i + stencil[d].first;
      std::int64_t const tj = j + stencil[d].second;
      if (tj < 0 || tj >= nv) continue;
      if (sol.periodic_u) {
        ti = ((ti % nu) + nu) % nu;
      } else if (ti < 0 || ti >= nu) {
        continue;
      }
      auto const tn = tj * nu + ti;
      double const nd = d0 + edge_cost(i, j, d);
      if (nd < dist[static_cast<std::size_t>(tn)]) {
        dist[static_cast<std::size_t>(tn)] = nd;
        pq.emplace(nd, tn);
      }
    }
  }
  return dist;
}

}  // namespace hjlab::oracle
