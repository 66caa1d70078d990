#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pofd/dataset.hpp"
#include "pofd/reconstruct.hpp"
#include "pofd/smoothing.hpp"

namespace pofd::fixtures {

inline std::string curve_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "c%04zu", i + 1);
  return buf;
}

/// Rank-3 process mu + sum_k xi_k phi_k with phi orthonormal on [0, 1].
struct Rank3 {
  std::vector<double> lambda{1.0, 0.5, 0.25};

  static double phi(std::size_t k, double u) {
    if (k == 0) return 1.0;
    return std::sqrt(2.0) * std::cos(static_cast<double>(k) * std::numbers::pi * u);
  }
  static double mean(double u) { return u + std::sin(2.0 * std::numbers::pi * u); }

  double covariance(double u, double v) const {
    double c = 0.0;
    for (std::size_t k = 0; k < lambda.size(); ++k) c += lambda[k] * phi(k, u) * phi(k, v);
    return c;
  }

  std::vector<double> draw(std::mt19937_64& rng) const {
    std::normal_distribution<double> z;
    std::vector<double> xi;
    for (double l : lambda) xi.push_back(std::sqrt(l) * z(rng));
    return xi;
  }

  double value(const std::vector<double>& xi, double u, bool centred = false) const {
    double x = centred ? 0.0 : mean(u);
    for (std::size_t k = 0; k < xi.size(); ++k) x += xi[k] * phi(k, u);
    return x;
  }
};

/// Noiseless rank-3 curves on `m` equally spaced points of their fragment.
/// Every `complete_every`-th curve covers [0, 1]; the others cover a random
/// interval of width `width`.
inline FunctionalDataset rank3_dataset(std::size_t n, std::size_t m, std::uint64_t seed,
                                       double width = 0.6, std::size_t complete_every = 3,
                                       std::size_t grid_size = 51) {
  Rank3 process;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> start(0.0, 1.0 - width);
  std::vector<Curve> curves;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = process.draw(rng);
    double a = 0.0;
    double b = 1.0;
    if (i % complete_every != 0) {
      a = start(rng);
      b = a + width;
    }
    std::vector<ObservationPair> pts;
    for (std::size_t j = 0; j < m; ++j) {
      const double u = a + (b - a) * static_cast<double>(j) / static_cast<double>(m - 1);
      pts.push_back({u, process.value(xi, u)});
    }
    curves.emplace_back(curve_name(i), std::move(pts));
  }
  return FunctionalDataset(std::move(curves), Interval{0.0, 1.0}, grid_size);
}

/// Model built from closed-form mean and covariance.
inline ReconstructionModel analytic_model(const DomainGrid& grid,
                                          const std::function<double(double, double)>& cov,
                                          const std::function<double(double)>& mean = {},
                                          double sigma2 = 0.0,
                                          const std::function<bool(double, double)>& mask = {},
                                          double h = 0.05) {
  std::vector<double> mu(grid.size(), 0.0);
  if (mean) {
    for (std::size_t r = 0; r < grid.size(); ++r) mu[r] = mean(grid[r]);
  }
  return ReconstructionModel(MeanEstimate{grid, mu, h},
                             CovarianceEstimate::from_function(grid, cov, mask),
                             NoiseVariance{sigma2}, Bandwidths{h, h, h});
}

/// Trapezoid integral of (a - b)^2 over the grid indices where `use` holds.
inline double integrated_sq(const DomainGrid& grid, const std::vector<double>& a,
                            const std::vector<double>& b, const std::vector<unsigned char>& use) {
  double total = 0.0;
  for (std::size_t r = 0; r + 1 < grid.size(); ++r) {
    if (!use[r] || !use[r + 1]) continue;
    const double d0 = a[r] - b[r];
    const double d1 = a[r + 1] - b[r + 1];
    total += 0.5 * (d0 * d0 + d1 * d1) * grid.spacing();
  }
  return total;
}

}  // namespace pofd::fixtures
