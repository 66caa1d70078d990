#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "pofd/scores.hpp"

using namespace pofd;

namespace {

struct Rank3Scene {
  DomainGrid grid{0.0, 1.0, 101};
  fixtures::Rank3 process;
  CovarianceEstimate cov = CovarianceEstimate::from_function(
      grid, [this](double u, double v) { return process.covariance(u, v); });
  MeanEstimate mean{grid, std::vector<double>(grid.size()), 0.05};
  EigenSystem eig = analyse_subdomain(cov, Subdomain::full(grid));

  Rank3Scene() {
    for (std::size_t r = 0; r < grid.size(); ++r) mean.values[r] = fixtures::Rank3::mean(grid[r]);
  }

  // mu + sum_k c_k phi_k at every `stride`-th grid point.
  std::vector<ObservationPair> curve(const std::vector<double>& c, std::size_t stride = 1) const {
    std::vector<ObservationPair> pts;
    for (std::size_t r = 0; r < grid.size(); r += stride) {
      double y = mean.values[r];
      for (std::size_t k = 0; k < c.size(); ++k) y += c[k] * eig.extrapolated(r, k);
      pts.push_back({grid[r], y});
    }
    return pts;
  }
};

}  // namespace

TEST(IntegralScores, MeanCurveHasZeroScores) {
  Rank3Scene s;
  const auto sc = integral_scores("mu", s.curve({}), s.eig, s.mean, 3);
  for (double v : sc.values) EXPECT_NEAR(v, 0.0, 1e-14);
  EXPECT_EQ(sc.method, ScoreMethod::integral);
}

TEST(IntegralScores, RecoverMultipleOfFirstEigenfunction) {
  Rank3Scene s;
  const auto pts = s.curve({2.0});
  const auto trap = integral_scores("c", pts, s.eig, s.mean, 3, ScoreQuadrature::trapezoid);
  EXPECT_NEAR(trap.values[0], 2.0, 1e-12);
  EXPECT_NEAR(trap.values[1], 0.0, 1e-12);
  EXPECT_NEAR(trap.values[2], 0.0, 1e-12);
  const auto riemann = integral_scores("c", pts, s.eig, s.mean, 3);
  EXPECT_NEAR(riemann.values[0], 2.0, 0.05);
}

TEST(IntegralScores, RiemannSumByHand) {
  Rank3Scene s;
  const std::vector<ObservationPair> pts{{0.1, 1.0}, {0.35, -0.5}, {0.6, 0.25}};
  const auto sc = integral_scores("c", pts, s.eig, s.mean, 2);
  for (std::size_t k = 0; k < 2; ++k) {
    double expected = 0.0;
    for (std::size_t j = 1; j < pts.size(); ++j) {
      expected += (pts[j].y - s.mean.at(pts[j].u)) * s.eig.basis_at(k, pts[j].u, s.grid) *
                  (pts[j].u - pts[j - 1].u);
    }
    EXPECT_NEAR(sc.values[k], expected, 1e-14);
  }
}

TEST(IntegralScores, SinglePointIsFlagged) {
  Rank3Scene s;
  const std::vector<ObservationPair> one{{0.3, 1.0}};
  const auto sc = integral_scores("c", one, s.eig, s.mean, 2);
  EXPECT_TRUE(sc.insufficient_points);
  EXPECT_EQ(sc.values, (std::vector<double>{0.0, 0.0}));
}

TEST(IntegralScores, LinearInTheCentredCurve) {
  Rank3Scene s;
  const auto a = s.curve({0.3, -1.0, 0.5}, 3);
  const auto b = s.curve({-0.7, 0.2, 1.5}, 3);
  std::vector<ObservationPair> mix;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double mu = s.mean.at(a[j].u);
    mix.push_back({a[j].u, mu + 2.0 * (a[j].y - mu) - 3.0 * (b[j].y - mu)});
  }
  const auto sa = integral_scores("a", a, s.eig, s.mean, 3);
  const auto sb = integral_scores("b", b, s.eig, s.mean, 3);
  const auto sm = integral_scores("m", mix, s.eig, s.mean, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(sm.values[k], 2.0 * sa.values[k] - 3.0 * sb.values[k], 1e-12);
  }
}

TEST(IntegralScores, InvariantToInputOrder) {
  Rank3Scene s;
  auto pts = s.curve({0.4, 0.1, -0.2}, 4);
  const auto ref = integral_scores("c", pts, s.eig, s.mean, 3);
  std::mt19937_64 rng(17);
  std::shuffle(pts.begin(), pts.end(), rng);
  EXPECT_EQ(integral_scores("c", pts, s.eig, s.mean, 3).values, ref.values);
}

TEST(IntegralScores, RejectsTooManyComponents) {
  Rank3Scene s;
  EXPECT_THROW(integral_scores("c", s.curve({}), s.eig, s.mean, 4), ComputationError);
}

TEST(CeScores, TwoPointOracle) {
  DomainGrid grid(0.0, 1.0, 101);
  const auto cov =
      CovarianceEstimate::from_function(grid, [](double u, double v) { return std::min(u, v); });
  const MeanEstimate mean{grid, std::vector<double>(grid.size(), 0.0), 0.05};
  const auto eig = analyse_subdomain(cov, Subdomain::full(grid));
  const double sigma2 = 0.1;
  const std::vector<ObservationPair> pts{{0.2, 0.7}, {0.5, -0.3}};

  // Closed-form inverse of [[0.2 + s, 0.2], [0.2, 0.5 + s]].
  const double a = 0.2 + sigma2;
  const double b = 0.2;
  const double d = 0.5 + sigma2;
  const double det = a * d - b * b;
  const double w0 = (d * 0.7 - b * -0.3) / det;
  const double w1 = (-b * 0.7 + a * -0.3) / det;

  const auto sc = ce_scores("c", pts, eig, cov, NoiseVariance{sigma2}, mean, 3);
  EXPECT_FALSE(sc.jittered);
  EXPECT_FALSE(sc.psd_repaired);
  for (std::size_t k = 0; k < 3; ++k) {
    const double expected = eig.eigenvalues[k] *
                            (eig.basis_at(k, 0.2, grid) * w0 + eig.basis_at(k, 0.5, grid) * w1);
    EXPECT_NEAR(sc.values[k], expected, 1e-12);
  }
}

TEST(CeScores, NoiselessRankThreeRecoversScores) {
  Rank3Scene s;
  const std::vector<double> c{0.8, -0.4, 0.3};
  const auto sc = ce_scores("c", s.curve(c, 10), s.eig, s.cov, NoiseVariance{0.0}, s.mean, 3);
  EXPECT_TRUE(sc.jittered);
  EXPECT_TRUE(sc.ill_conditioned);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(sc.values[k], c[k], 1e-5);
}

TEST(CeScores, ShrinkTowardZeroWithNoise) {
  Rank3Scene s;
  const std::vector<double> c{1.0, 0.0, 0.0};
  const auto pts = s.curve(c, 20);
  const auto small = ce_scores("c", pts, s.eig, s.cov, NoiseVariance{0.01}, s.mean, 1);
  const auto large = ce_scores("c", pts, s.eig, s.cov, NoiseVariance{1.0}, s.mean, 1);
  EXPECT_GT(small.values[0], large.values[0]);
  EXPECT_GT(large.values[0], 0.0);
  EXPECT_LT(small.values[0], 1.0);
}

TEST(CeScores, ClipsIndefiniteBlocks) {
  DomainGrid grid(0.0, 1.0, 21);
  const auto cov = CovarianceEstimate::from_function(
      grid, [](double u, double v) { return std::cos(6.0 * (u - v)) - 0.5 * std::abs(u - v); });
  const MeanEstimate mean{grid, std::vector<double>(grid.size(), 0.0), 0.05};
  const auto eig = analyse_subdomain(cov, Subdomain::full(grid));
  std::vector<ObservationPair> pts;
  for (std::size_t r = 0; r < grid.size(); r += 2) pts.push_back({grid[r], std::sin(grid[r])});
  const auto sc = ce_scores("c", pts, eig, cov, NoiseVariance{0.05}, mean, 1);
  EXPECT_TRUE(sc.psd_repaired);
  EXPECT_TRUE(std::isfinite(sc.values[0]));
}

TEST(CeScores, EmptyCurveIsFlagged) {
  Rank3Scene s;
  const auto sc = ce_scores("c", {}, s.eig, s.cov, NoiseVariance{0.1}, s.mean, 2);
  EXPECT_TRUE(sc.insufficient_points);
  EXPECT_THROW(ce_scores("c", s.curve({}), s.eig, s.cov, NoiseVariance{-1.0}, s.mean, 2),
               InputError);
}

TEST(PaceScores, EqualCeScoresOnTheFullDomain) {
  Rank3Scene s;
  const Curve curve("c", s.curve({0.5, 0.5, -0.5}, 7));
  const auto pace = pace_scores(curve, s.eig, s.cov, NoiseVariance{0.02}, s.mean, 3);
  const auto ce = ce_scores(curve, s.eig, s.cov, NoiseVariance{0.02}, s.mean, 3);
  EXPECT_EQ(pace.values, ce.values);
  const auto partial = analyse_subdomain(s.cov, Subdomain({{0.0, 0.5}}, s.grid));
  EXPECT_THROW(pace_scores(curve, partial, s.cov, NoiseVariance{0.02}, s.mean, 3), InputError);
}
