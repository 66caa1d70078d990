#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "pofd/iterative.hpp"

using namespace pofd;
using fixtures::Rank3;

namespace {

std::function<bool(double, double)> band(double width) {
  return [width](double u, double v) { return std::abs(u - v) <= width + 1e-9; };
}

ReconstructionModel banded_rank3(double width) {
  const Rank3 process;
  return fixtures::analytic_model(
      DomainGrid(0.0, 1.0, 101), [process](double u, double v) { return process.covariance(u, v); },
      Rank3::mean, 0.0, band(width));
}

std::vector<unsigned char> covered_up_to(const DomainGrid& grid, std::size_t last) {
  std::vector<unsigned char> c(grid.size(), 0);
  for (std::size_t r = 0; r <= last; ++r) c[r] = 1;
  return c;
}

Curve rank3_fragment(const DomainGrid& grid, std::size_t lo, std::size_t hi) {
  const Rank3 process;
  const std::vector<double> xi{0.6, -0.3, 0.2};
  std::vector<ObservationPair> pts;
  for (std::size_t r = lo; r <= hi; ++r) pts.push_back({grid[r], process.value(xi, grid[r])});
  return Curve("frag", pts);
}

struct Harness {
  ReconstructionModel model;
  FunctionalDataset data = fixtures::rank3_dataset(6, 20, 1, 1.0, 1, 101);
  TruncationSelector selector;

  explicit Harness(double width, std::size_t K = 2)
      : model(banded_rank3(width)),
        selector(model, data, TruncationPolicy{TruncationKind::fixed, K}) {}
};

}  // namespace

TEST(Strategy, Names) {
  EXPECT_EQ(parse_strategy("greedy-band"), Strategy::greedy_band);
  EXPECT_EQ(parse_strategy("app3"), Strategy::app3);
  EXPECT_STREQ(to_string(Strategy::app3), "app3");
  EXPECT_THROW(parse_strategy("greedy"), InputError);
}

TEST(Reachable, BandLimitsTheReach) {
  const auto model = banded_rank3(0.3);
  const auto& grid = model.grid();
  const auto reach = reachable_from(Subdomain({{0.0, 0.2}}, grid), model.covariance());
  for (std::size_t r = 0; r < grid.size(); ++r) EXPECT_EQ(reach[r] != 0, r <= 30) << grid[r];
}

TEST(ChooseNext, GreedyBandBalancesWidthAndExtension) {
  const auto model = banded_rank3(0.3);
  const auto& grid = model.grid();
  const auto W = choose_next_interval(covered_up_to(grid, 30), model.covariance(),
                                      Strategy::greedy_band);
  ASSERT_EQ(W.intervals().size(), 1u);
  EXPECT_EQ(W.grid_indices().front(), 15u);
  EXPECT_EQ(W.grid_indices().back(), 30u);
}

TEST(ChooseNext, GreedyBandTiesGoToTheRight) {
  const auto model = banded_rank3(0.2);
  const auto& grid = model.grid();
  std::vector<unsigned char> c(grid.size(), 0);
  for (std::size_t r = 40; r <= 60; ++r) c[r] = 1;
  const auto W = choose_next_interval(c, model.covariance(), Strategy::greedy_band);
  EXPECT_EQ(W.grid_indices().front(), 50u);
  EXPECT_EQ(W.grid_indices().back(), 60u);
}

TEST(ChooseNext, App3AlternatesHalves) {
  const auto model = banded_rank3(0.3);
  const auto& grid = model.grid();
  std::vector<unsigned char> first(grid.size(), 0);
  for (std::size_t r = 20; r <= 60; ++r) first[r] = 1;
  const auto upper = choose_next_interval(first, model.covariance(), Strategy::app3, 2, &first);
  EXPECT_EQ(upper.grid_indices().front(), 40u);
  EXPECT_EQ(upper.grid_indices().back(), 60u);
  const auto lower = choose_next_interval(first, model.covariance(), Strategy::app3, 3, &first);
  EXPECT_EQ(lower.grid_indices().front(), 20u);
  EXPECT_EQ(lower.grid_indices().back(), 40u);
}

TEST(ChooseNext, App3ShrinksUntilEstimable) {
  const auto model = banded_rank3(0.1);
  const auto& grid = model.grid();
  std::vector<unsigned char> first(grid.size(), 0);
  for (std::size_t r = 20; r <= 60; ++r) first[r] = 1;
  const auto upper = choose_next_interval(first, model.covariance(), Strategy::app3, 2, &first);
  EXPECT_EQ(upper.grid_indices().front(), 50u);
  EXPECT_EQ(upper.grid_indices().back(), 60u);
}

TEST(ChooseNext, RejectsDegenerateCoverage) {
  const auto model = banded_rank3(0.3);
  const auto& grid = model.grid();
  EXPECT_THROW(choose_next_interval(std::vector<unsigned char>(grid.size(), 1),
                                    model.covariance(), Strategy::greedy_band),
               InputError);
  EXPECT_THROW(choose_next_interval(std::vector<unsigned char>(grid.size(), 0),
                                    model.covariance(), Strategy::greedy_band),
               InputError);
  EXPECT_THROW(choose_next_interval(std::vector<unsigned char>(3, 0), model.covariance(),
                                    Strategy::greedy_band),
               InputError);
}

TEST(Iterative, FullMaskNeedsOneStep) {
  Harness h(2.0);
  const auto& grid = h.model.grid();
  const auto curve = rank3_fragment(grid, 20, 50);
  const auto rec = iterative_reconstruct(curve, h.model, Method::ayes, h.selector);
  const auto direct = reconstruct_with(CurveInput::from_curve(curve, grid), h.model, Method::ayes,
                                       h.selector);
  EXPECT_TRUE(rec.complete());
  EXPECT_EQ(rec.values, direct.values);
  for (const auto& tag : rec.provenance) EXPECT_LE(tag.iteration, 1);
  EXPECT_TRUE(rec.diagnostics.empty() || rec.diagnostics == direct.diagnostics);
}

TEST(Iterative, BandMaskFillsTheDomain) {
  Harness h(0.3);
  const auto& grid = h.model.grid();
  const auto curve = rank3_fragment(grid, 0, 20);
  IterationPlan plan;
  plan.r_max = 10;
  const auto rec = iterative_reconstruct(curve, h.model, Method::ano, h.selector, plan);
  EXPECT_TRUE(rec.complete());
  int last = 0;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    // Steps reach further right as the iteration proceeds.
    EXPECT_GE(rec.provenance[r].iteration, last) << grid[r];
    last = std::max(last, rec.provenance[r].iteration);
  }
  EXPECT_GE(last, 3);
  EXPECT_EQ(to_string(rec.provenance.back()), "iteration-" + std::to_string(last));
}

TEST(Iterative, FirstStepMatchesTheDirectReconstruction) {
  Harness h(0.3);
  const auto& grid = h.model.grid();
  const auto curve = rank3_fragment(grid, 0, 20);
  const auto direct = reconstruct_with(CurveInput::from_curve(curve, grid), h.model, Method::ayes,
                                       h.selector);
  const auto rec = iterative_reconstruct(curve, h.model, Method::ayes, h.selector);
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (direct.provenance[r].kind == PointKind::non_estimable) continue;
    EXPECT_EQ(rec.values[r], direct.values[r]);
    EXPECT_EQ(rec.provenance[r].kind, direct.provenance[r].kind);
  }
}

TEST(Iterative, CoverageGrowsWithTheIterationBudget) {
  Harness h(0.2);
  const auto& grid = h.model.grid();
  const auto curve = rank3_fragment(grid, 40, 55);
  std::size_t previous = 0;
  // Each step extends one side by at most half the band: nine steps in all.
  for (std::size_t r_max = 1; r_max <= 9; ++r_max) {
    IterationPlan plan;
    plan.r_max = r_max;
    const auto rec = iterative_reconstruct(curve, h.model, Method::ano, h.selector, plan);
    std::size_t covered = 0;
    for (double v : rec.values) covered += std::isfinite(v) ? 1 : 0;
    EXPECT_GE(covered, previous) << "r_max = " << r_max;
    if (r_max == 1) EXPECT_FALSE(rec.complete());
    previous = covered;
  }
  EXPECT_EQ(previous, grid.size());
}

TEST(Iterative, App3StallsOnTheFirstCoverage) {
  Harness h(0.25);
  const auto& grid = h.model.grid();
  const auto curve = rank3_fragment(grid, 40, 60);
  IterationPlan plan;
  plan.strategy = Strategy::app3;
  plan.r_max = 12;
  const auto rec = iterative_reconstruct(curve, h.model, Method::ayesce, h.selector, plan);
  // Step 1 covers [0.35, 0.65]; its halves reach 0.75 and 0.25, then nothing new.
  for (std::size_t r = 0; r < grid.size(); ++r) {
    EXPECT_EQ(std::isfinite(rec.values[r]), r >= 25 && r <= 75) << grid[r];
  }
  EXPECT_EQ(rec.provenance[75].iteration, 2);
  EXPECT_EQ(rec.provenance[25].iteration, 3);
  bool stalled = false;
  for (const auto& d : rec.diagnostics) stalled = stalled || d.find("stalled") != std::string::npos;
  EXPECT_TRUE(stalled);
}

TEST(Iterative, ExplicitPlanMustStayInsideTheCoverage) {
  Harness h(0.3);
  const auto& grid = h.model.grid();
  const auto curve = rank3_fragment(grid, 0, 20);
  IterationPlan plan;
  plan.steps.push_back(Subdomain({{0.5, 0.7}}, grid));
  EXPECT_THROW(iterative_reconstruct(curve, h.model, Method::ano, h.selector, plan), InputError);
}

TEST(Iterative, RejectsUnsupportedMethods) {
  Harness h(0.3);
  const auto curve = rank3_fragment(h.model.grid(), 0, 20);
  EXPECT_THROW(iterative_reconstruct(curve, h.model, Method::pace, h.selector), InputError);
  EXPECT_THROW(iterative_reconstruct(curve, h.model, Method::kraus, h.selector), InputError);
  IterationPlan plan;
  plan.r_max = 0;
  EXPECT_THROW(iterative_reconstruct(curve, h.model, Method::ano, h.selector, plan), InputError);
}

TEST(Accumulation, ReportCoversTheSecondStep) {
  AccumulationConfig config;
  config.replications = 40;
  const auto report = check_error_accumulation(config);
  ASSERT_FALSE(report.points.empty());
  EXPECT_GE(report.second.grid_indices().front(), 0u);
  for (const auto& p : report.points) {
    EXPECT_GT(p.u, 0.4);
    EXPECT_GE(p.two_step, 0.0);
    EXPECT_GE(p.standard_error, 0.0);
  }
  EXPECT_GE(report.fraction_holding, 0.0);
  EXPECT_LE(report.fraction_holding, 1.0);
  config.replications = 1;
  EXPECT_THROW(check_error_accumulation(config), InputError);
}
