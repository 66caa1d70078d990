#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pofd/dataset.hpp"
#include "pofd/eigensystem.hpp"
#include "pofd/scores.hpp"
#include "pofd/smoothing.hpp"

namespace pofd {

enum class Method { ano, anoce, ayes, ayesce, pace, kraus };

const char* to_string(Method method);
/// Display label used in study tables (ANo, ANoCE, ...).
const char* label(Method method);
/// Accepts the lower-case CLI spelling; throws InputError otherwise.
Method parse_method(std::string_view text);

bool uses_alignment(Method method);
ScoreMethod score_method(Method method);

struct FitOptions {
  std::optional<Bandwidths> bandwidths;  ///< rate-based defaults when empty
  std::size_t min_pairs = kDefaultMinPairs;
  double noise_trim = 0.25;
  double lambda_floor = kDefaultLambdaFloor;
  ScoreQuadrature quadrature = ScoreQuadrature::riemann;
  unsigned threads = 1;
};

/// Mean, covariance, noise variance and bandwidths estimated from one sample,
/// plus a cache of eigensystems per subdomain.
class ReconstructionModel {
 public:
  ReconstructionModel(MeanEstimate mean, CovarianceEstimate cov, NoiseVariance noise,
                      Bandwidths bandwidths, FitOptions options = {});

  static ReconstructionModel fit(const FunctionalDataset& data, const FitOptions& options = {});

  const MeanEstimate& mean() const { return mean_; }
  const CovarianceEstimate& covariance() const { return cov_; }
  const NoiseVariance& noise() const { return noise_; }
  const Bandwidths& bandwidths() const { return bandwidths_; }
  const FitOptions& options() const { return options_; }
  const DomainGrid& grid() const { return mean_.grid; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

  /// Eigensystem (with extrapolated basis) on O; computed once per subdomain.
  std::shared_ptr<const EigenSystem> eigensystem(const Subdomain& O) const;
  /// Eigensystem on [a, b]; throws ComputationError if the mask is not full.
  std::shared_ptr<const EigenSystem> full_eigensystem() const;
  bool full_domain_estimable() const;

 private:
  struct Cache {
    std::mutex mutex;
    std::map<std::vector<std::size_t>, std::shared_ptr<const EigenSystem>> entries;
  };

  MeanEstimate mean_;
  CovarianceEstimate cov_;
  NoiseVariance noise_;
  Bandwidths bandwidths_;
  FitOptions options_;
  std::vector<std::string> diagnostics_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// Origin of a reconstructed grid value.
enum class PointKind : unsigned char { observed, reconstructed, non_estimable };

struct PointTag {
  PointKind kind = PointKind::non_estimable;
  int iteration = 0;  ///< step of the iterative algorithm (0 outside it)

  bool operator==(const PointTag&) const = default;
};

std::string to_string(const PointTag& tag);

struct ReconstructedCurve {
  std::string curve_id;
  DomainGrid grid;
  std::vector<double> values;  ///< NaN where non-estimable
  std::vector<PointTag> provenance;
  std::size_t K_used = 0;
  Method method = Method::ano;
  std::optional<std::vector<double>> error_variance;
  std::vector<std::string> diagnostics;

  bool complete() const;
  /// Linear interpolation of the gridded values at u (NaN near non-estimable points).
  double at(double u) const;
};

/// A curve handed to the reconstruction operators: its observations and the
/// observed subdomain O. Gridded pseudo-curves carry exact values at grid
/// points of O and bypass the curve smoother.
struct CurveInput {
  std::string id;
  std::vector<ObservationPair> points;  ///< sorted by u
  Subdomain observed;
  bool gridded = false;

  /// O = [A, B] from the observation extrema.
  static CurveInput from_curve(const Curve& curve, const DomainGrid& grid);
};

/// Reconstruction of one curve for every truncation 0..K_max at once:
/// value(K) = base + sum_{k < K} increments(., k).
struct Expansion {
  std::vector<double> base;
  Eigen::MatrixXd increments;  ///< L x K_max
  std::vector<PointTag> tags;
  std::vector<std::string> diagnostics;

  std::size_t max_order() const { return static_cast<std::size_t>(increments.cols()); }
  std::vector<double> values(std::size_t K) const;
};

/// Builds the expansion for ANo/ANoCE/AYes/AYesCE/PACE (not KRAUS).
Expansion expand(const CurveInput& curve, const ReconstructionModel& model, Method method,
                 std::size_t K_max);

ReconstructedCurve reconstruct(const CurveInput& curve, const ReconstructionModel& model,
                               Method method, std::size_t K, bool with_error_variance = false);

ReconstructedCurve reconstruct_ano(const Curve& curve, const ReconstructionModel& model,
                                   std::size_t K, ScoreMethod scores = ScoreMethod::integral);
ReconstructedCurve reconstruct_ayes(const Curve& curve, const ReconstructionModel& model,
                                    std::size_t K, ScoreMethod scores = ScoreMethod::integral);
ReconstructedCurve reconstruct_pace(const Curve& curve, const ReconstructionModel& model,
                                    std::size_t K);

/// Discretized ridge reconstruction mu_M + G_MO (G_OO + rho I)^{-1} (X_O - mu_O).
ReconstructedCurve reconstruct_kraus(const CurveInput& curve, const ReconstructionModel& model,
                                     double rho);
ReconstructedCurve reconstruct_kraus(const Curve& curve, const ReconstructionModel& model,
                                     double rho);

/// gamma(u_r, u_r) - sum_k lambda_k phi~_k(u_r)^2 clamped at zero; NaN if not estimable.
/// `clamped` is set when the raw value was negative.
double error_variance(const EigenSystem& eig, const CovarianceEstimate& cov, std::size_t r,
                      bool* clamped = nullptr);
std::vector<double> error_variance(const EigenSystem& eig, const CovarianceEstimate& cov,
                                   std::size_t* clamped_count = nullptr);

// ---------------------------------------------------------------------------
// Truncation selection

struct GcvResult {
  std::size_t K = 0;
  std::vector<std::size_t> candidates;
  std::vector<double> rss;
  std::vector<double> gcv;
  std::size_t complete_used = 0;
};

/// M-specific GCV: complete curves are split into pseudo-observed (inside O)
/// and pseudo-missing parts, reconstructed for every candidate K, and scored by
/// RSS_M(K) / (1 - K/|C|)^2. Ties go to the smaller K.
GcvResult select_truncation_gcv(Method method, const ReconstructionModel& model,
                                const FunctionalDataset& data, const Subdomain& observed,
                                std::optional<std::vector<std::size_t>> candidates = std::nullopt,
                                double margin_fraction = 0.1);

struct RidgeGcvResult {
  double rho = 0.0;
  std::vector<double> candidates;
  std::vector<double> rss;
  std::vector<double> gcv;
};

/// GCV over rho in {1e-6, ..., 1e2} * trace(G_OO Delta) / |O| with effective
/// degrees of freedom sum lambda / (lambda + rho).
RidgeGcvResult select_ridge_gcv(const ReconstructionModel& model, const FunctionalDataset& data,
                                const Subdomain& observed, double margin_fraction = 0.1);

/// Smallest K whose eigenvalues explain at least `threshold` of the total.
std::size_t select_truncation_fve(const EigenSystem& eig, double threshold = 0.99);

enum class TruncationKind { fixed, gcv, fve };

struct TruncationPolicy {
  TruncationKind kind = TruncationKind::gcv;
  std::size_t K = 0;
  double fve_threshold = 0.99;
  std::optional<double> rho;  ///< fixed KRAUS ridge; GCV when empty
};

/// Caches GCV selections per (method, observed grid indices), so curves whose
/// observed parts cover the same grid points share one truncation.
class TruncationSelector {
 public:
  TruncationSelector(const ReconstructionModel& model, const FunctionalDataset& data,
                     TruncationPolicy policy);

  std::size_t truncation(Method method, const Subdomain& observed);
  double ridge(const Subdomain& observed);

 private:
  const ReconstructionModel& model_;
  const FunctionalDataset& data_;
  TruncationPolicy policy_;
  std::map<std::pair<int, std::vector<std::size_t>>, std::size_t> k_cache_;
  std::map<std::vector<std::size_t>, double> rho_cache_;
};

/// Reconstructs `curve` with the truncation (or ridge) chosen by `selector`.
ReconstructedCurve reconstruct_with(const CurveInput& curve, const ReconstructionModel& model,
                                    Method method, TruncationSelector& selector,
                                    bool with_error_variance = false);

}  // namespace pofd
