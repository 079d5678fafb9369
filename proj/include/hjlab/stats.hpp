#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "hjlab/core.hpp"

namespace hjlab {

//! Key of one Monte Carlo record: level mu, unit direction e, distance t.
struct StatsKey {
  double mu = 0.0;
  Vec2 e{1.0, 0.0};
  double t = 0.0;

  auto Tuple() const { return std::make_tuple(mu, e.x, e.y, t); }

  //! The key with e scaled to unit length; tables store and look up
  //! canonical keys so that callers may pass any positive multiple of e.
  StatsKey Canonical() const {
    double const n = Norm(e);
    return {mu, {e.x / n, e.y / n}, t};
  }
  friend bool operator<(StatsKey const& a, StatsKey const& b) { return a.Tuple() < b.Tuple(); }
  friend bool operator==(StatsKey const& a, StatsKey const& b) { return a.Tuple() == b.Tuple(); }
};

//! One realization's record: m_mu(te) and the lateral sup / inf of m_mu
//! over the cross-section {x.e = t} within distance R t of te.
struct MetricSample {
  double value = 0.0;
  double n_plus = 0.0;
  double n_minus = 0.0;

  friend bool operator==(MetricSample const&, MetricSample const&) = default;
};

//! Mean, unbiased variance, and range of a sample.
struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  double StdError() const {
    return count > 0 ? std::sqrt(variance / static_cast<double>(count)) : 0.0;
  }
};

//! Welford moments of @a values taken in order.
inline Moments ComputeMoments(std::vector<double> const& values) {
  auto m = Moments();
  double m2 = 0.0;
  for (double const x : values) {
    ++m.count;
    double const d = x - m.mean;
    m.mean += d / static_cast<double>(m.count);
    m2 += d * (x - m.mean);
    m.min = std::min(m.min, x);
    m.max = std::max(m.max, x);
  }
  m.variance = m.count > 1 ? m2 / static_cast<double>(m.count - 1) : 0.0;
  return m;
}

//! Samples of one key, indexed by realization. Statistics are computed
//! from the samples in index order, so a table merged from any partition
//! of the realizations is identical to the serial one.
class StatsEntry {
 public:
  void Record(std::uint64_t index, MetricSample s) {
    auto const [it, inserted] = samples_.emplace(index, s);
    if (!inserted && !(it->second == s)) {
      throw InvalidGeometry(Msg("realization ", index, " recorded twice with different values"));
    }
  }
  void RecordFailure(std::uint64_t index) { failures_.insert(index); }

  void Merge(StatsEntry const& other) {
    for (auto const& [i, s] : other.samples_) Record(i, s);
    failures_.insert(other.failures_.begin(), other.failures_.end());
  }

  std::map<std::uint64_t, MetricSample> const& samples() const { return samples_; }
  std::size_t count() const { return samples_.size(); }
  std::size_t failures() const { return failures_.size(); }

  std::vector<double> Values() const {
    auto out = std::vector<double>();
    out.reserve(samples_.size());
    for (auto const& [i, s] : samples_) out.push_back(s.value);
    return out;
  }

  Moments ValueMoments() const { return ComputeMoments(Values()); }

  Moments LateralSupMoments() const {
    auto v = std::vector<double>();
    for (auto const& [i, s] : samples_) v.push_back(s.n_plus);
    return ComputeMoments(v);
  }

  Moments LateralInfMoments() const {
    auto v = std::vector<double>();
    for (auto const& [i, s] : samples_) v.push_back(s.n_minus);
    return ComputeMoments(v);
  }

  //! Empirical tail P(|m - mean| >= lambda sqrt(t)) for each lambda.
  std::vector<double> TailFractions(double t, std::vector<double> const& lambdas) const {
    auto const mo = ValueMoments();
    auto out = std::vector<double>(lambdas.size(), 0.0);
    if (mo.count == 0) return out;
    double const scale = std::sqrt(std::max(t, 0.0));
    for (auto const& [i, s] : samples_) {
      double const dev = std::fabs(s.value - mo.mean);
      for (std::size_t k = 0; k < lambdas.size(); ++k) {
        if (dev >= lambdas[k] * scale) out[k] += 1.0;
      }
    }
    for (auto& x : out) x /= static_cast<double>(mo.count);
    return out;
  }

  //! Quantile (linear interpolation) of |m - mean|.
  double DeviationQuantile(double q) const {
    auto const mo = ValueMoments();
    auto dev = std::vector<double>();
    for (auto const& [i, s] : samples_) dev.push_back(std::fabs(s.value - mo.mean));
    if (dev.empty()) return 0.0;
    std::sort(dev.begin(), dev.end());
    double const pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(dev.size() - 1);
    auto const lo = static_cast<std::size_t>(std::floor(pos));
    auto const hi = std::min(lo + 1, dev.size() - 1);
    return dev[lo] + (pos - static_cast<double>(lo)) * (dev[hi] - dev[lo]);
  }

 private:
  std::map<std::uint64_t, MetricSample> samples_;
  std::set<std::uint64_t> failures_;
};

//! Monte Carlo records per (mu, e, t). Merging is a union of
//! realization-indexed samples, hence associative and commutative.
class StatsTable {
 public:
  void Record(StatsKey const& k, std::uint64_t index, MetricSample s) {
    entries_[k.Canonical()].Record(index, s);
  }
  void RecordFailure(StatsKey const& k, std::uint64_t index) {
    entries_[k.Canonical()].RecordFailure(index);
  }

  StatsTable& Merge(StatsTable const& other) {
    for (auto const& [k, e] : other.entries_) entries_[k].Merge(e);
    return *this;
  }

  bool Contains(StatsKey const& k) const { return entries_.count(k.Canonical()) > 0; }

  StatsEntry const& At(StatsKey const& k) const {
    auto const it = entries_.find(k.Canonical());
    if (it == entries_.end()) {
      throw MissingKey(Msg("no record for mu = ", k.mu, ", e = (", k.e.x, ", ", k.e.y,
                           "), t = ", k.t));
    }
    return it->second;
  }

  std::map<StatsKey, StatsEntry> const& entries() const { return entries_; }

  //! Distance values t recorded at (mu, e), ascending.
  std::vector<double> Distances(double mu, Vec2 e) const {
    auto out = std::vector<double>();
    auto const c = StatsKey{mu, e, 0.0}.Canonical();
    for (auto const& [k, v] : entries_) {
      if (k.mu == c.mu && k.e.x == c.e.x && k.e.y == c.e.y) out.push_back(k.t);
    }
    return out;
  }

 private:
  std::map<StatsKey, StatsEntry> entries_;
};

}  // namespace hjlab
