#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pofd/dataset.hpp"
#include "pofd/reconstruct.hpp"

namespace pofd {

/// Seed of the stream identified by (master, tag, i, j); splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t i,
                          std::uint64_t j = 0);

/// mt19937_64 seeded from derive_seed.
std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t tag, std::uint64_t i,
                            std::uint64_t j = 0);

struct DgpConfig {
  int dgp = 1;
  std::size_t n = 50;
  std::size_t m = 15;  ///< points per curve, DGP1/2 only
  std::uint64_t seed = 1;
  std::size_t replications = 100;
  std::size_t n_targets = 50;
  std::size_t grid_size = kDefaultGridSize;
  /// Factor in front of the score standard deviations.
  double score_amplitude = 1.0;
  /// One standard normal per basis function and curve (true) or one shared
  /// draw per curve for all cosine terms and one for all sine terms (false).
  bool independent_scores = true;

  /// Throws InputError on an invalid configuration.
  void validate() const;
};

/// The random function of a DGP: mu + sum_k a_k cos(k pi u) + b_k sin(k pi u).
class DgpProcess {
 public:
  static constexpr std::size_t kTerms = 50;

  explicit DgpProcess(const DgpConfig& config);

  double mean(double u) const;
  double noise_sd() const { return noise_sd_; }
  /// Covariance of the centred process.
  double covariance(double u, double v) const;

  /// Basis coefficients (a_1..a_50, b_1..b_50) of one curve.
  std::vector<double> draw_coefficients(std::mt19937_64& rng) const;
  double evaluate(const std::vector<double>& coefficients, double u) const;

 private:
  int dgp_;
  bool independent_;
  double basis_scale_;
  double noise_sd_;
  std::vector<double> sd_cos_;
  std::vector<double> sd_sin_;
};

/// A target curve: its true values on the grid and this replication's
/// observations of the partial part.
struct SimulationTarget {
  Curve observed;
  Interval fragment;
  std::vector<double> truth;
};

struct DgpSample {
  FunctionalDataset data;
  std::vector<SimulationTarget> targets;
};

/// Draws the estimation sample of one replication and the observations of the
/// targets. Targets' latent curves and fragments do not depend on `replication`.
DgpSample generate_dgp(const DgpConfig& config, std::size_t replication);

struct StudyOptions {
  FitOptions fit;
  TruncationPolicy truncation;
  unsigned threads = 1;
  /// Fraction of failed (target, replication) pairs that aborts the study.
  double max_failure_fraction = 0.05;
};

struct MethodRow {
  Method method = Method::ano;
  double mse = 0.0;
  double bias2 = 0.0;
  double var = 0.0;
  double mse_ratio = 1.0;
  std::size_t failures = 0;
};

struct StudyReport {
  DgpConfig config;
  std::vector<Method> methods;  ///< requested order
  std::vector<MethodRow> rows;  ///< sorted by MSE_ratio
  /// Per method (input order) and target: mean reconstruction over replications.
  std::vector<std::vector<std::vector<double>>> mean_reconstructions;
  std::vector<std::vector<double>> truths;
  std::vector<std::string> diagnostics;
  double runtime_seconds = 0.0;

  const MethodRow& row(Method method) const;
};

/// Monte-Carlo study: fits a model per replication, reconstructs every target
/// with every method and integrates bias and variance over [0, 1].
StudyReport run_study(const DgpConfig& config, const std::vector<Method>& methods,
                      const StudyOptions& options = {});

}  // namespace pofd
