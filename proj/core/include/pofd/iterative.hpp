#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "pofd/reconstruct.hpp"
#include "pofd/simulation.hpp"

namespace pofd {

enum class Strategy { greedy_band, app3 };

const char* to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

struct IterationPlan {
  Strategy strategy = Strategy::greedy_band;
  std::size_t r_max = 5;
  /// Explicit O_2, O_3, ...; when empty the strategy chooses each step.
  std::vector<Subdomain> steps;
};

/// Grid points reconstructible from W: those u with (u, v) estimable for every v in W.
std::vector<unsigned char> reachable_from(const Subdomain& W, const CovarianceEstimate& cov);

/// Next observed interval given the covered grid points. `step` is the index
/// of the step being planned (2 for the first iteration after the original O)
/// and `first_coverage` the coverage after step 1 (used by app3).
/// greedy-band: on each side with a gap, the interval W ending at the coverage
/// edge that maximizes min(|W|, extension beyond the edge); ties go to the
/// wider W, then to the right side.
/// app3: upper half of the step-1 coverage at step 2, lower half at step 3,
/// alternating afterwards; shrunk toward the edge until W x W is estimable.
Subdomain choose_next_interval(const std::vector<unsigned char>& coverage,
                               const CovarianceEstimate& cov, Strategy strategy,
                               std::size_t step = 2,
                               const std::vector<unsigned char>* first_coverage = nullptr);

/// Algorithm 1: reconstruct from O_1, then repeatedly treat the current
/// reconstruction on O_r as a gridded pseudo-curve and join the newly covered
/// points. CE methods fall back to integral scores from step 2 on.
ReconstructedCurve iterative_reconstruct(const Curve& curve, const ReconstructionModel& model,
                                         Method method, TruncationSelector& selector,
                                         const IterationPlan& plan = {});

struct AccumulationConfig {
  DgpConfig dgp;                     ///< process family (mean ignored: centred)
  double band = 0.5;                 ///< covariance known where |u - v| <= band
  Interval first{0.0, 0.4};          ///< O_1
  std::size_t grid_size = 51;
  std::size_t replications = 500;
  std::uint64_t seed = 1;
  double lambda_floor = kDefaultLambdaFloor;
};

struct AccumulationPoint {
  double u;
  double two_step;      ///< E (X(u) - L_{O2}(X~_{O2})(u))^2
  double one_step_o2;   ///< E (X(u) - L_{O2}(X_{O2})(u))^2, full covariance
  double one_step_o1;   ///< E (X(u) - L_{O1}(X_{O1})(u))^2, full covariance
  double standard_error;  ///< of the paired difference
  bool holds;
};

struct AccumulationReport {
  Subdomain second;  ///< O_2 chosen by greedy-band
  std::vector<AccumulationPoint> points;  ///< grid points first reached at step 2
  double fraction_holding = 0.0;
};

/// Monte-Carlo check of the two-step error bound with the true covariance of
/// the centred, noise-free process; band-limited for the algorithm, full for
/// the hypothetical one-step operators.
AccumulationReport check_error_accumulation(const AccumulationConfig& config);

}  // namespace pofd
