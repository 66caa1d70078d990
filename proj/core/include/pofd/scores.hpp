#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pofd/dataset.hpp"
#include "pofd/eigensystem.hpp"
#include "pofd/smoothing.hpp"

namespace pofd {

enum class ScoreMethod { integral, conditional_expectation };

const char* to_string(ScoreMethod method);

/// Quadrature used by integral scores. `riemann` is the left-open sum
/// sum_{j>=2} f(U_(j)) (U_(j) - U_(j-1)); `trapezoid` averages the two ends.
enum class ScoreQuadrature { riemann, trapezoid };

struct ScoreVector {
  std::string curve_id;
  std::vector<double> values;
  ScoreMethod method = ScoreMethod::integral;
  bool insufficient_points = false;  ///< fewer than two ordered observations
  bool psd_repaired = false;         ///< negative eigenvalues of the covariance block clipped
  bool jittered = false;             ///< ridge added to the observation covariance
  bool ill_conditioned = false;      ///< condition estimate above kConditionThreshold
  double condition = 1.0;            ///< condition estimate of the observation covariance
};

/// Ridge factor of the jitter policy, relative to trace / m.
inline constexpr double kJitterFactor = 1e-8;
/// Condition numbers beyond the jitter resolution are flagged.
inline constexpr double kConditionThreshold = 1.0 / kJitterFactor;

/// Riemann-sum scores. Observations are sorted internally; the eigenfunctions
/// and mean are interpolated linearly from the grid.
ScoreVector integral_scores(std::string_view curve_id, std::span<const ObservationPair> points,
                            const EigenSystem& eig, const MeanEstimate& mean, std::size_t K,
                            ScoreQuadrature quadrature = ScoreQuadrature::riemann);

ScoreVector integral_scores(const Curve& curve, const EigenSystem& eig, const MeanEstimate& mean,
                            std::size_t K,
                            ScoreQuadrature quadrature = ScoreQuadrature::riemann);

/// Conditional-expectation scores lambda_k phi_k^T Sigma^{-1} (Y - mu) with
/// Sigma = gamma(U_j, U_l) + sigma2 I, the gamma block clipped to its
/// positive semi-definite part.
ScoreVector ce_scores(std::string_view curve_id, std::span<const ObservationPair> points,
                      const EigenSystem& eig, const CovarianceEstimate& cov,
                      const NoiseVariance& noise, const MeanEstimate& mean, std::size_t K);

ScoreVector ce_scores(const Curve& curve, const EigenSystem& eig, const CovarianceEstimate& cov,
                      const NoiseVariance& noise, const MeanEstimate& mean, std::size_t K);

/// CE scores against the full-domain eigensystem.
ScoreVector pace_scores(const Curve& curve, const EigenSystem& full_eig,
                        const CovarianceEstimate& cov, const NoiseVariance& noise,
                        const MeanEstimate& mean, std::size_t K);

}  // namespace pofd
