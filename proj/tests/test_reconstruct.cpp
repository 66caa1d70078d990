#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "pofd/reconstruct.hpp"

using namespace pofd;
using fixtures::Rank3;

namespace {

double brownian(double u, double v) { return std::min(u, v); }

ReconstructionModel brownian_model(std::size_t grid_size = 101,
                                   ScoreQuadrature rule = ScoreQuadrature::trapezoid) {
  const DomainGrid grid(0.0, 1.0, grid_size);
  FitOptions opts;
  opts.quadrature = rule;
  return ReconstructionModel(MeanEstimate{grid, std::vector<double>(grid_size, 0.0), 0.05},
                             CovarianceEstimate::from_function(grid, brownian), NoiseVariance{0.0},
                             Bandwidths{0.05, 0.05, 0.05}, opts);
}

// Brownian path on the grid points of [0, upper].
std::vector<ObservationPair> brownian_path(const DomainGrid& grid, double upper,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<ObservationPair> pts{{0.0, 0.0}};
  double x = 0.0;
  for (std::size_t r = 1; r < grid.size() && grid[r] <= upper + 1e-12; ++r) {
    x += std::sqrt(grid.spacing()) * z(rng);
    pts.push_back({grid[r], x});
  }
  return pts;
}

ReconstructionModel rank3_model(std::function<double(double)> mean = Rank3::mean) {
  const DomainGrid grid(0.0, 1.0, 101);
  const Rank3 process;
  return fixtures::analytic_model(
      grid, [process](double u, double v) { return process.covariance(u, v); }, mean);
}

std::vector<ObservationPair> sampled(const std::function<double(double)>& f, double a, double b,
                                     std::size_t m) {
  std::vector<ObservationPair> pts;
  for (std::size_t j = 0; j < m; ++j) {
    const double u = a + (b - a) * static_cast<double>(j) / static_cast<double>(m - 1);
    pts.push_back({u, f(u)});
  }
  return pts;
}

}  // namespace

TEST(Method, NamesRoundTrip) {
  for (auto m : {Method::ano, Method::anoce, Method::ayes, Method::ayesce, Method::pace,
                 Method::kraus}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_STREQ(label(Method::ayesce), "AYesCE");
  EXPECT_THROW(parse_method("pca"), InputError);
  EXPECT_TRUE(uses_alignment(Method::ayes));
  EXPECT_FALSE(uses_alignment(Method::pace));
  EXPECT_EQ(score_method(Method::anoce), ScoreMethod::conditional_expectation);
}

TEST(PointTag, Strings) {
  EXPECT_EQ(to_string(PointTag{PointKind::observed, 0}), "observed");
  EXPECT_EQ(to_string(PointTag{PointKind::reconstructed, 0}), "reconstructed");
  EXPECT_EQ(to_string(PointTag{PointKind::reconstructed, 1}), "reconstructed");
  EXPECT_EQ(to_string(PointTag{PointKind::reconstructed, 3}), "iteration-3");
  EXPECT_EQ(to_string(PointTag{PointKind::non_estimable, 0}), "non-estimable");
}

TEST(Reconstruct, BrownianContinuesFromTheLastValue) {
  const auto model = brownian_model();
  const auto& grid = model.grid();
  const Subdomain O({{0.0, 0.5}}, grid);
  const auto K = model.eigensystem(O)->available();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto pts = brownian_path(grid, 0.5, seed);
    const auto rec = reconstruct(CurveInput{"bm", pts, O, false}, model, Method::ano, K, true);
    for (std::size_t r = 51; r < grid.size(); ++r) {
      EXPECT_NEAR(rec.values[r], pts.back().y, 1e-8);
      EXPECT_NEAR((*rec.error_variance)[r], grid[r] - 0.5, 1e-8);
    }
  }
}

TEST(Reconstruct, ErrorVarianceShrinksAsTheSubdomainGrows) {
  const auto model = brownian_model();
  const auto& grid = model.grid();
  const auto narrow = model.eigensystem(Subdomain({{0.2, 0.4}}, grid));
  const auto wide = model.eigensystem(Subdomain({{0.0, 0.6}}, grid));
  const auto vn = error_variance(*narrow, model.covariance());
  const auto vw = error_variance(*wide, model.covariance());
  for (std::size_t r = 61; r < grid.size(); ++r) {
    EXPECT_LE(vw[r], vn[r] + 1e-9);
    EXPECT_GE(vw[r], 0.0);
  }
}

TEST(Reconstruct, MeanCurveReconstructsToTheMean) {
  const auto linear = [](double u) { return 0.5 - u; };
  const auto model = rank3_model(linear);
  const Curve curve("mu", sampled(linear, 0.2, 0.6, 41));
  for (auto method : {Method::ano, Method::anoce, Method::ayes, Method::ayesce, Method::pace}) {
    const auto rec = reconstruct(CurveInput::from_curve(curve, model.grid()), model, method, 3);
    for (std::size_t r = 0; r < model.grid().size(); ++r) {
      EXPECT_NEAR(rec.values[r], linear(model.grid()[r]), 1e-9) << to_string(method);
    }
  }
  const auto kraus = reconstruct_kraus(curve, model, 1e-3);
  for (std::size_t r = 0; r < model.grid().size(); ++r) {
    EXPECT_NEAR(kraus.values[r], linear(model.grid()[r]), 1e-9);
  }
}

TEST(Reconstruct, RankThreeCurveIsRecoveredExactly) {
  const auto model = rank3_model();
  const Rank3 process;
  const std::vector<double> xi{0.7, -0.5, 0.4};
  const auto& grid = model.grid();
  std::vector<ObservationPair> pts;
  for (std::size_t r = 10; r <= 70; ++r) pts.push_back({grid[r], process.value(xi, grid[r])});
  FitOptions opts;
  const Curve curve("c", pts);
  const auto rec = reconstruct_ano(curve, model, 3, ScoreMethod::conditional_expectation);
  for (std::size_t r = 0; r < grid.size(); ++r) {
    EXPECT_NEAR(rec.values[r], process.value(xi, grid[r]), 1e-5);
  }
}

TEST(Reconstruct, ProvenanceTags) {
  const auto model = rank3_model();
  const Curve curve("c", sampled(Rank3::mean, 0.3, 0.5, 11));
  const auto rec = reconstruct_ano(curve, model, 2);
  for (std::size_t r = 0; r < model.grid().size(); ++r) {
    const double u = model.grid()[r];
    const auto expected = (u >= 0.3 - 1e-12 && u <= 0.5 + 1e-12) ? PointKind::observed
                                                                  : PointKind::reconstructed;
    EXPECT_EQ(rec.provenance[r].kind, expected) << u;
  }
  EXPECT_TRUE(rec.complete());
  EXPECT_EQ(rec.K_used, 2u);
}

TEST(Reconstruct, NonEstimablePointsAreFlagged) {
  const DomainGrid grid(0.0, 1.0, 51);
  const auto model = fixtures::analytic_model(grid, brownian, {}, 0.0,
                                              [](double u, double v) { return std::abs(u - v) <= 0.4 + 1e-9; });
  const Curve curve("c", sampled([](double u) { return u; }, 0.0, 0.3, 16));
  const auto rec = reconstruct_ayes(curve, model, 1);
  EXPECT_FALSE(rec.complete());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const bool reachable = grid[r] <= 0.4 + 1e-9;
    EXPECT_EQ(rec.provenance[r].kind == PointKind::non_estimable, !reachable) << grid[r];
    EXPECT_EQ(std::isnan(rec.values[r]), !reachable);
  }
  EXPECT_TRUE(std::isnan(rec.at(0.9)));
}

TEST(Reconstruct, AlignedZeroOrderShiftsTheMean) {
  const auto model = rank3_model([](double) { return 0.0; });
  const auto line = [](double u) { return 1.0 + u; };
  const Curve curve("c", sampled(line, 0.1, 0.4, 31));
  const auto rec = reconstruct_ayes(curve, model, 0);
  for (std::size_t r = 0; r < model.grid().size(); ++r) {
    const double u = model.grid()[r];
    if (u < 0.1 - 1e-12) {
      EXPECT_NEAR(rec.values[r], line(0.1), 1e-10);
    } else if (u > 0.4 + 1e-12) {
      EXPECT_NEAR(rec.values[r], line(0.4), 1e-10);
    } else {
      EXPECT_NEAR(rec.values[r], line(u), 1e-10);
    }
  }
}

TEST(Reconstruct, GapAnchorsWeighBothEnds) {
  const auto model = rank3_model([](double) { return 0.0; });
  const auto& grid = model.grid();
  const auto line = [](double u) { return 1.0 + u; };
  auto pts = sampled(line, 0.0, 0.3, 31);
  for (const auto& p : sampled(line, 0.7, 1.0, 31)) pts.push_back(p);
  const Subdomain O({{0.0, 0.3}, {0.7, 1.0}}, grid);
  const auto rec = reconstruct(CurveInput{"gap", pts, O, false}, model, Method::ayes, 0);
  // Halfway between the intervals both anchors carry weight 1/2.
  EXPECT_NEAR(rec.values[grid.nearest(0.5)], 0.5 * line(0.3) + 0.5 * line(0.7), 1e-10);
  EXPECT_NEAR(rec.values[grid.nearest(0.4)], 0.75 * line(0.3) + 0.25 * line(0.7), 1e-10);
}

TEST(Reconstruct, AlignedMethodsMeetTheCurveAtTheBoundary) {
  const auto model = rank3_model();
  const Rank3 process;
  const std::vector<double> xi{0.3, 0.9, -0.6};
  const auto f = [&](double u) { return process.value(xi, u); };
  const Curve curve("c", sampled(f, 0.25, 0.65, 81));
  const auto& grid = model.grid();
  for (auto method : {Method::ayes, Method::ayesce}) {
    const auto rec = reconstruct(CurveInput::from_curve(curve, grid), model, method, 3);
    const auto lo = grid.nearest(0.25);
    const auto hi = grid.nearest(0.65);
    const double tol = 0.02;
    EXPECT_NEAR(rec.values[lo] - rec.values[lo - 1], f(grid[lo]) - f(grid[lo - 1]), tol);
    EXPECT_NEAR(rec.values[hi + 1] - rec.values[hi], f(grid[hi + 1]) - f(grid[hi]), tol);
  }
}

TEST(Reconstruct, AffineInTheObservations) {
  const Rank3 process;
  const auto model = fixtures::analytic_model(
      DomainGrid(0.0, 1.0, 101), [process](double u, double v) { return process.covariance(u, v); },
      Rank3::mean, 0.01);
  const auto& grid = model.grid();
  const std::vector<double> xa{0.3, -0.2, 0.6};
  const std::vector<double> xb{-1.0, 0.4, 0.1};
  const auto a = sampled([&](double u) { return process.value(xa, u); }, 0.2, 0.6, 25);
  const auto b = sampled([&](double u) { return process.value(xb, u); }, 0.2, 0.6, 25);
  const auto c = sampled([&](double u) { return std::cos(5.0 * u); }, 0.2, 0.6, 25);
  // 2a + b - 2c: weights summing to one.
  std::vector<ObservationPair> mix;
  for (std::size_t j = 0; j < a.size(); ++j) {
    mix.push_back({a[j].u, 2.0 * a[j].y + b[j].y - 2.0 * c[j].y});
  }
  auto run = [&](const std::vector<ObservationPair>& pts, Method method) {
    const auto input = CurveInput::from_curve(Curve("x", pts), grid);
    return method == Method::kraus ? reconstruct_kraus(input, model, 1e-3).values
                                   : reconstruct(input, model, method, 3).values;
  };
  for (auto method : {Method::ano, Method::anoce, Method::ayes, Method::ayesce, Method::pace,
                      Method::kraus}) {
    const auto ra = run(a, method);
    const auto rb = run(b, method);
    const auto rc = run(c, method);
    const auto rm = run(mix, method);
    for (std::size_t r = 0; r < grid.size(); ++r) {
      EXPECT_NEAR(rm[r], 2.0 * ra[r] + rb[r] - 2.0 * rc[r], 1e-9)
          << to_string(method) << " u = " << grid[r];
    }
  }
}

TEST(Reconstruct, CurveLabelDoesNotMatter) {
  const auto model = rank3_model();
  const auto pts = sampled([](double u) { return std::cos(3.0 * u); }, 0.3, 0.7, 20);
  const auto a = reconstruct_ayes(Curve("first", pts), model, 3);
  const auto b = reconstruct_ayes(Curve("second", pts), model, 3);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(b.curve_id, "second");
}

TEST(Reconstruct, RejectsInvalidRequests) {
  const auto model = rank3_model();
  const Curve curve("c", sampled(Rank3::mean, 0.3, 0.7, 20));
  const auto input = CurveInput::from_curve(curve, model.grid());
  EXPECT_THROW(reconstruct(input, model, Method::ano, 4), ComputationError);
  EXPECT_THROW(reconstruct(input, model, Method::kraus, 1), InputError);
  EXPECT_THROW(reconstruct_kraus(curve, model, -1.0), InputError);
}

TEST(Kraus, LargeRidgeGivesTheMean) {
  const auto model = rank3_model();
  const Curve curve("c", sampled([](double u) { return 3.0 * u; }, 0.2, 0.5, 30));
  const auto rec = reconstruct_kraus(curve, model, 1e12);
  for (std::size_t r = 0; r < model.grid().size(); ++r) {
    if (model.grid()[r] > 0.5 + 1e-12) {
      EXPECT_NEAR(rec.values[r], model.mean().values[r], 1e-9);
      EXPECT_EQ(rec.provenance[r].kind, PointKind::reconstructed);
    }
  }
}

TEST(Kraus, SmallRidgeMatchesBrownianPrediction) {
  const auto model = brownian_model();
  const auto& grid = model.grid();
  const Subdomain O({{0.0, 0.5}}, grid);
  const auto pts = brownian_path(grid, 0.5, 12);
  const auto rec = reconstruct_kraus(CurveInput{"bm", pts, O, true}, model, 1e-10);
  for (std::size_t r = 51; r < grid.size(); ++r) {
    EXPECT_NEAR(rec.values[r], pts.back().y, 1e-3);
  }
}

TEST(Kraus, SparseCurvesFallBackToInterpolation) {
  const auto model = rank3_model();
  const Curve curve("sparse", {{0.2, 1.0}, {0.5, 1.5}});
  const auto rec = reconstruct_kraus(curve, model, 1e-3);
  EXPECT_TRUE(rec.complete());
  EXPECT_NEAR(rec.values[model.grid().nearest(0.35)], 1.25, 1e-12);
}

TEST(Truncation, FractionOfVarianceExplained) {
  const auto model = rank3_model();
  const auto eig = model.full_eigensystem();
  EXPECT_EQ(select_truncation_fve(*eig, 0.5), 1u);
  EXPECT_EQ(select_truncation_fve(*eig, 0.8), 2u);
  EXPECT_EQ(select_truncation_fve(*eig, 0.99), 3u);
  EXPECT_EQ(select_truncation_fve(*eig, 1.0), 3u);
  EXPECT_THROW(select_truncation_fve(*eig, 0.0), InputError);
}

TEST(Truncation, GcvTiesGoToTheSmallerOrder) {
  const auto model = rank3_model();
  std::vector<Curve> curves;
  for (int i = 0; i < 6; ++i) {
    curves.emplace_back(fixtures::curve_name(i), sampled(Rank3::mean, 0.0, 1.0, 51));
  }
  const FunctionalDataset data(std::move(curves), Interval{0.0, 1.0}, 101);
  const Subdomain O({{0.2, 0.6}}, model.grid());
  const auto res = select_truncation_gcv(Method::ano, model, data, O);
  EXPECT_EQ(res.K, 1u);
  EXPECT_EQ(res.complete_used, 6u);
  for (double rss : res.rss) EXPECT_NEAR(rss, 0.0, 1e-20);
}

TEST(Truncation, GcvPenaltyHasAPoleAtTheSampleSize) {
  const auto data = fixtures::rank3_dataset(9, 40, 3, 0.5, 3);
  const auto model = rank3_model();
  const Subdomain O({{0.1, 0.6}}, model.grid());
  const auto res = select_truncation_gcv(Method::ano, model, data, O, std::vector<std::size_t>{3, 1, 2});
  ASSERT_EQ(res.complete_used, 3u);
  EXPECT_EQ(res.candidates, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_TRUE(std::isinf(res.gcv[2]));
  EXPECT_LT(res.K, 3u);
}

TEST(Truncation, GcvPrefersTheTrueRank) {
  const auto data = fixtures::rank3_dataset(40, 60, 8, 1.0, 1);
  const auto model = rank3_model();
  const Subdomain O({{0.0, 0.6}}, model.grid());
  const auto res = select_truncation_gcv(Method::ano, model, data, O);
  EXPECT_EQ(res.K, 3u);
}

TEST(Truncation, GcvNeedsCompleteCurves) {
  const auto data = fixtures::rank3_dataset(9, 20, 3, 0.5, 100);
  const auto model = rank3_model();
  EXPECT_THROW(select_truncation_gcv(Method::ano, model, data, Subdomain({{0.1, 0.6}}, model.grid())),
               ComputationError);
}

TEST(Truncation, RidgeGcvCandidatesScaleWithTheTrace) {
  const auto data = fixtures::rank3_dataset(30, 60, 8, 1.0, 1);
  const auto model = rank3_model();
  const Subdomain O({{0.0, 0.6}}, model.grid());
  const auto res = select_ridge_gcv(model, data, O);
  ASSERT_EQ(res.candidates.size(), 9u);
  EXPECT_NEAR(res.candidates[1] / res.candidates[0], 10.0, 1e-9);
  EXPECT_NE(std::find(res.candidates.begin(), res.candidates.end(), res.rho),
            res.candidates.end());
}

TEST(Truncation, SelectorCachesPerSubdomain) {
  const auto data = fixtures::rank3_dataset(30, 60, 8, 1.0, 1);
  const auto model = rank3_model();
  TruncationSelector fixed(model, data, TruncationPolicy{TruncationKind::fixed, 2});
  const Subdomain O({{0.1, 0.5}}, model.grid());
  EXPECT_EQ(fixed.truncation(Method::ano, O), 2u);

  TruncationSelector gcv(model, data, TruncationPolicy{});
  const auto first = gcv.truncation(Method::ayes, O);
  EXPECT_EQ(gcv.truncation(Method::ayes, O), first);
  EXPECT_EQ(first, select_truncation_gcv(Method::ayes, model, data, O).K);

  const Curve curve("c", sampled(Rank3::mean, 0.1, 0.5, 21));
  const auto rec = reconstruct_with(CurveInput::from_curve(curve, model.grid()), model,
                                    Method::ayes, gcv);
  EXPECT_EQ(rec.K_used, first);
}
