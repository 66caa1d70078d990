#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pofd/dataset.hpp"
#include "pofd/error.hpp"
#include "pofd/grid.hpp"

namespace pofd {

/// 0.75 (1 - v^2) on [-1, 1], zero elsewhere.
inline double epanechnikov(double v) {
  return (v > -1.0 && v < 1.0) ? 0.75 * (1.0 - v * v) : 0.0;
}

/// K_h(d) = kappa(d / h) / h.
inline double scaled_kernel(double d, double h) { return epanechnikov(d / h) / h; }

/// Bandwidths of the curve, mean and covariance smoothers (domain units).
struct Bandwidths {
  double curve;
  double mean;
  double covariance;

  /// Throws InputError unless every bandwidth lies in (0, width).
  void validate(double width) const;
};

/// Rate-based defaults h_X ~ m^{-1/5}, h_mu ~ (nm)^{-1/5}, h_gamma ~ (n(m^2-m))^{-1/6},
/// each scaled by 1.5 sd(pooled U).
Bandwidths default_bandwidths(const FunctionalDataset& data);

/// Raised when a local-linear fit has too few points in its kernel window.
class InsufficientLocalData : public ComputationError {
 public:
  InsufficientLocalData(double u, std::size_t effective_count);
  double location() const { return u_; }
  std::size_t effective_count() const { return count_; }

 private:
  double u_;
  std::size_t count_;
};

/// Intercept of the kernel-weighted linear fit of y on (u_j - u).
/// Throws InsufficientLocalData if the weights vanish or the design is singular.
double local_linear(std::span<const ObservationPair> points, double u, double h);

/// Local-linear smoother of a single curve evaluated at u.
double llk_curve(const Curve& curve, double u, double h);

struct MeanEstimate {
  DomainGrid grid;
  std::vector<double> values;
  double bandwidth;

  double at(double u) const { return grid.interpolate(values, u); }
};

/// Pooled local-linear mean on the grid.
MeanEstimate llk_mean(const FunctionalDataset& data, const DomainGrid& grid, double h);

/// Smoothed covariance surface on grid x grid with its estimability mask.
/// Entries outside the mask hold NaN and must not be used.
class CovarianceEstimate {
 public:
  CovarianceEstimate(DomainGrid grid, Eigen::MatrixXd surface,
                     std::vector<unsigned char> mask, double bandwidth,
                     std::size_t fallback_count = 0);

  /// Covariance given in closed form; mask defaults to everywhere estimable.
  static CovarianceEstimate from_function(
      const DomainGrid& grid, const std::function<double(double, double)>& cov,
      const std::function<bool(double, double)>& estimable = {});

  const DomainGrid& grid() const { return grid_; }
  const Eigen::MatrixXd& surface() const { return surface_; }
  double bandwidth() const { return bandwidth_; }
  std::size_t fallback_count() const { return fallback_count_; }

  bool estimable(std::size_t r, std::size_t s) const { return mask_[r * grid_.size() + s] != 0; }
  double operator()(std::size_t r, std::size_t s) const { return surface_(r, s); }

  /// Bilinear interpolation at (u, v). Corners outside the mask are dropped
  /// and the remaining weights renormalized; NaN if no corner is estimable.
  double at(double u, double v) const;

  /// Fraction of grid pairs inside the mask.
  double coverage() const;

 private:
  DomainGrid grid_;
  Eigen::MatrixXd surface_;
  std::vector<unsigned char> mask_;
  double bandwidth_;
  std::size_t fallback_count_;
};

inline constexpr std::size_t kDefaultMinPairs = 5;

/// Bivariate local-linear smoother of off-diagonal raw covariances.
/// A grid pair is estimable when at least min_pairs raw pairs fall in its window.
/// Work is split over grid rows; each cell accumulates in data order, so the
/// result does not depend on `threads`.
CovarianceEstimate llk_covariance(const FunctionalDataset& data, const MeanEstimate& mean,
                                  double h, std::size_t min_pairs = kDefaultMinPairs,
                                  unsigned threads = 1);

struct NoiseVariance {
  double sigma2 = 0.0;
};

/// Average of V(u) - G(u) over the trimmed interior, clamped at zero. V smooths
/// the squared residuals; G is the covariance diagonal from a local fit that is
/// linear along and quadratic across the diagonal (falling back to gamma(u, u)).
NoiseVariance estimate_noise_variance(const FunctionalDataset& data, const MeanEstimate& mean,
                                      const CovarianceEstimate& cov,
                                      double trim_fraction = 0.25);

}  // namespace pofd
