#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hjlab/evolution.hpp"
#include "hjlab/hamiltonian.hpp"
#include "hjlab/saddle.hpp"

namespace {

using hjlab::Dissipation;
using hjlab::EvolutionProblem;
using hjlab::GradientBox;
using hjlab::PotentialSource;
using hjlab::QuadraticSaddle;
using hjlab::Vec2;

// |p|^2 through the general quadratic (b < 0 flips the p1 sign).
QuadraticSaddle const kConvex{1.0, -1.0};

EvolutionProblem SmallProblem(double horizon, double dx = 0.125) {
  auto pb = EvolutionProblem();
  pb.dx = dx;
  pb.horizon = horizon;
  pb.half_width = hjlab::RequiredHalfWidth(QuadraticSaddle(), pb.box, horizon);
  return pb;
}

TEST(Hamiltonian, PolynomialParserMatchesCatalog) {
  auto const poly = hjlab::PolynomialHamiltonian::Parse("3*p2^2 - 3 p1^2");
  QuadraticSaddle const q;
  for (double a : {-0.7, 0.0, 0.4}) {
    for (double b : {-1.0, 0.3}) EXPECT_DOUBLE_EQ(poly(a, b), q(a, b));
  }
  auto const box = GradientBox::Symmetric(1.1);
  EXPECT_NEAR(poly.SpeedBound(box).x, 6.6, 1e-12);
  EXPECT_NEAR(poly.SpeedBound(box).y, 6.6, 1e-12);
  auto const quartic = hjlab::PolynomialHamiltonian::Parse("p1^2 - p2^4");
  EXPECT_DOUBLE_EQ(quartic(0.5, 0.5), hjlab::QuarticSaddle()(0.5, 0.5));
  EXPECT_THROW(hjlab::PolynomialHamiltonian::Parse(""), hjlab::ConfigError);
  EXPECT_THROW(hjlab::PolynomialHamiltonian::Parse("3*p3^2"), hjlab::ConfigError);
  EXPECT_THROW(hjlab::PolynomialHamiltonian::Parse("p1 p2 p1^"), hjlab::ConfigError);
}

TEST(Hamiltonian, GodunovFluxIsIntervalExtremum) {
  // Brute-force oracle: min (or max) of the 1-D part over the interval.
  QuadraticSaddle const q{2.0, 1.5};
  hjlab::QuarticSaddle const r;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  auto ext = [](auto f, double pm, double pp) {
    double lo = std::min(pm, pp), hi = std::max(pm, pp);
    double best = f(lo);
    for (int k = 0; k <= 4000; ++k) {
      double const v = f(lo + (hi - lo) * k / 4000.0);
      best = pm <= pp ? std::min(best, v) : std::max(best, v);
    }
    return best;
  };
  for (int trial = 0; trial < 200; ++trial) {
    double const pm = u(rng), pp = u(rng);
    double const tol = 1e-5;
    EXPECT_NEAR(q.Godunov1(pm, pp), ext([&](double p) { return q(p, 0.0); }, pm, pp), tol);
    EXPECT_NEAR(q.Godunov2(pm, pp), ext([&](double p) { return q(0.0, p); }, pm, pp), tol);
    EXPECT_NEAR(r.Godunov1(pm, pp), ext([&](double p) { return r(p, 0.0); }, pm, pp), tol);
    EXPECT_NEAR(r.Godunov2(pm, pp), ext([&](double p) { return r(0.0, p); }, pm, pp), tol);
  }
}

class SchemeTest : public ::testing::TestWithParam<Dissipation> {};

TEST_P(SchemeTest, LinearDatumIsExactWithoutPotential) {
  auto pb = SmallProblem(2.0);
  pb.dissipation = GetParam();
  pb.xi0 = Vec2{0.3, -0.2};
  auto const r = hjlab::SolveIvp(kConvex, PotentialSource::Constant(0.0), pb);
  // u = xi0 . x - |xi0|^2 t.
  double const rate = 0.09 + 0.04;
  for (std::size_t k = 0; k < r.trace.t.size(); ++k) {
    ASSERT_NEAR(r.trace.u[k], -rate * r.trace.t[k], 1e-10);
  }
  for (double x : {-1.0, 0.0, 0.5}) {
    for (double y : {-0.25, 0.75}) {
      EXPECT_NEAR(r.field.Interpolate(x, y), 0.3 * x - 0.2 * y - rate * 2.0, 1e-10);
    }
  }
}

TEST_P(SchemeTest, ConstantPotentialGivesLinearGrowth) {
  auto pb = SmallProblem(1.5);
  pb.dissipation = GetParam();
  auto const r = hjlab::SolveIvp(QuadraticSaddle(), PotentialSource::Constant(0.375), pb);
  EXPECT_NEAR(r.trace.Final(), 0.375 * 1.5, 1e-12);
  EXPECT_LE(r.trace.MaxTimeSlope(), r.trace.time_lipschitz);
}


hjlab::BarrierEnvironment PlantedEnv(hjlab::BarrierSign sign, double horizon, std::uint64_t seed,
                                     double margin) {
  hjlab::BarrierParams p{Vec2{1, -1}, horizon, 0.1, 0.03, sign};
  return hjlab::MakeBarrierEnvironment(p, hjlab::FullSegmentLength(p), 3, seed,
                                       static_cast<std::int64_t>(margin) + 4);
}

TEST_P(SchemeTest, MonotoneInInitialDatum) {
  auto pb = SmallProblem(1.0);
  pb.dissipation = GetParam();
  auto const env = PlantedEnv(hjlab::BarrierSign::kUpper, 1.0, 21, pb.half_width);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> phase(0.0, 6.283);
  for (int trial = 0; trial < 3; ++trial) {
    double const a = phase(rng), b = phase(rng);
    double const lift = 0.05 + 0.1 * trial;
    auto lower = pb;
    lower.initial = [=](double x, double y) {
      return 0.3 * std::sin(x + a) * std::cos(0.7 * y + b);
    };
    auto upper = pb;
    upper.initial = [=](double x, double y) {
      return 0.3 * std::sin(x + a) * std::cos(0.7 * y + b) +
             lift * (1.0 + std::sin(0.5 * x + 0.3 * y + b)) / 2.0;
    };
    auto const rl = hjlab::SolveIvp(QuadraticSaddle(), PotentialSource::Field(env.field), lower);
    auto const ru = hjlab::SolveIvp(QuadraticSaddle(), PotentialSource::Field(env.field), upper);
    auto const& f = rl.field;
    std::int64_t const c = f.nx / 2;
    auto const ri = static_cast<std::int64_t>(rl.valid_radius.x / f.h);
    for (std::int64_t j = c - ri; j <= c + ri; ++j) {
      for (std::int64_t i = c - ri; i <= c + ri; ++i) {
        ASSERT_GE(ru.field.at(i, j), f.at(i, j) - 1e-12);
      }
    }
  }
}

TEST(Evolution, LightConeDoesNotChangeOrigin) {
  auto pb = SmallProblem(2.0);
  pb.dissipation = Dissipation::kGodunov;
  auto const env = PlantedEnv(hjlab::BarrierSign::kUpper, 2.0, 22, pb.half_width + 8);
  auto const cone = hjlab::SolveIvp(QuadraticSaddle(), PotentialSource::Field(env.field), pb);
  auto full = pb;
  full.light_cone = false;
  full.half_width += 4.0;
  auto const ref = hjlab::SolveIvp(QuadraticSaddle(), PotentialSource::Field(env.field), full);
  EXPECT_NEAR(cone.trace.Final(), ref.trace.Final(), 1e-9);
  EXPECT_LT(cone.stats.updates, ref.stats.updates);
}

TEST(Evolution, PlantedWellDrivesRateDown) {
  for (auto sign : {hjlab::BarrierSign::kUpper, hjlab::BarrierSign::kLower}) {
    auto pb = SmallProblem(4.0);
    pb.half_width = hjlab::RequiredHalfWidth(QuadraticSaddle(), pb.box, 4.0);
    pb.dissipation = Dissipation::kGodunov;
    auto const env = PlantedEnv(sign, 4.0, 23, pb.half_width);
    hjlab::BarrierParams p{Vec2{1, -1}, 4.0, 0.1, 0.03, sign};
    double worst = -1e300;
    pb.observer = [&](double t, hjlab::GridField const& u, std::int64_t i0, std::int64_t i1,
                      std::int64_t j0, std::int64_t j1) {
      // Barrier dominance: u <= v_+ (or u >= v_-) up to the grid error.
      for (std::int64_t j = j0; j <= j1; ++j) {
        for (std::int64_t i = i0; i <= i1; ++i) {
          double const v = hjlab::BarrierValue(p, Vec2{u.X(i), u.Y(j)}, t);
          double const e = sign == hjlab::BarrierSign::kUpper ? u.at(i, j) - v : v - u.at(i, j);
          worst = std::max(worst, e);
        }
      }
    };
    pb.observe_every = 50;
    auto const r = hjlab::SolveIvp(QuadraticSaddle(), PotentialSource::Field(env.field), pb);
    EXPECT_LE(worst, 2.0 * pb.dx) << "barrier dominance";
    double const bound = hjlab::BarrierValue(p, Vec2{0, 0}, 4.0) / 4.0;
    if (sign == hjlab::BarrierSign::kUpper) {
      EXPECT_LE(r.trace.FinalRatio(), bound + 0.05);
    } else {
      EXPECT_GE(r.trace.FinalRatio(), bound - 0.05);
    }
  }
}

TEST(Evolution, ShearMatchesMovingFrame) {
  // u solves u_t + g(Du) = V0(x - p0 t); w(y, t) = u(y + p0 t, t) solves
  // w_t + g(Dw) - p0 . Dw = V0(y).
  Vec2 const p0{0.25, -0.125};
  double const T = 2.0;
  auto lat = hjlab::BuildLattice(2, 1, 96, 3, 31);
  lat = hjlab::PlantSegment(std::move(lat), hjlab::Orientation::kHorizontal,
                            hjlab::MakePoint({0, 1}), 64);
  auto const moving = hjlab::PotentialField::FromLattice(lat, hjlab::ShiftMode::kZero,
                                                         {p0.x, p0.y});
  auto const still = hjlab::PotentialField::FromLattice(lat);
  hjlab::Sheared<QuadraticSaddle> const gs{QuadraticSaddle(), Vec2{-p0.x, -p0.y}};
  auto pb = SmallProblem(T);
  pb.dissipation = Dissipation::kLocal;
  pb.half_width = hjlab::RequiredHalfWidth(gs, pb.box, T) + 1.0;
  pb.light_cone = false;
  auto const u = hjlab::SolveIvp(QuadraticSaddle(), PotentialSource::Field(moving), pb);
  auto const w = hjlab::SolveIvp(gs, PotentialSource::Field(still), pb);
  double const a = u.field.Interpolate(p0.x * T, p0.y * T);
  double const b = w.trace.Final();
  EXPECT_LT(b, -0.5);  // the well is felt
  EXPECT_NEAR(a, b, 4.0 * pb.dx);
}

TEST(Evolution, RescalingIsExactOnScaledGrids) {
  auto const env = PlantedEnv(hjlab::BarrierSign::kUpper, 2.0, 24, 40);
  auto pb = SmallProblem(1.0);
  pb.dissipation = Dissipation::kGodunov;
  pb.half_width = 0.0;
  auto const rep = hjlab::RescaleCheck(QuadraticSaddle(), env.field, pb, 1.0, {1.0, 0.5, 0.25});
  ASSERT_EQ(rep.size(), 3u);
  for (auto const& e : rep) {
    EXPECT_NEAR(e.scaled, e.long_time, 1e-9) << "eps=" << e.eps;
    EXPECT_LT(e.max_trace_diff, 1e-9);
  }
  EXPECT_DOUBLE_EQ(rep[0].scaled, rep[0].long_time);
}

TEST(Evolution, RejectsSmallDomainAndEscapingGradients) {
  auto pb = SmallProblem(4.0);
  pb.half_width = 10.0;
  EXPECT_THROW(hjlab::SolveIvp(kConvex, PotentialSource::Constant(0.0), pb),
               hjlab::InvalidGeometry);
  auto tight = SmallProblem(1.0);
  tight.box = GradientBox::Symmetric(0.05);
  tight.half_width = hjlab::RequiredHalfWidth(QuadraticSaddle(), tight.box, 1.0);
  auto const env = PlantedEnv(hjlab::BarrierSign::kUpper, 1.0, 25, 8);
  EXPECT_THROW(hjlab::SolveIvp(QuadraticSaddle(), PotentialSource::Field(env.field), tight),
               hjlab::CFLViolation);
  auto blow = SmallProblem(1.0);
  blow.xi0 = Vec2{2.0, 0.0};
  EXPECT_THROW(hjlab::SolveIvp(kConvex, PotentialSource::Constant(0.0), blow),
               hjlab::CFLViolation);
}

TEST(Evolution, GapDriverOnSmallScales) {
  auto opt = hjlab::GapOptions();
  opt.cap_exp = 3;
  auto const rep = hjlab::NonhomGap(QuadraticSaddle(), 99, {2}, opt);
  ASSERT_EQ(rep.runs.size(), 2u);
  for (auto const& r : rep.runs) {
    EXPECT_LE(std::hypot(r.center.x, r.center.y), 0.1 * 4.0 + 1e-12);
    EXPECT_GT(r.overrides, 0u);
  }
  EXPECT_LT(rep.lower_est, 0.0);
  EXPECT_GT(rep.upper_est, 0.0);
  EXPECT_DOUBLE_EQ(rep.gap(), rep.upper_est - rep.lower_est);
}

INSTANTIATE_TEST_SUITE_P(Schemes, SchemeTest,
                         ::testing::Values(Dissipation::kLocal, Dissipation::kGlobal,
                                           Dissipation::kGodunov));

}  // namespace
