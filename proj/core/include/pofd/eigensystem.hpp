#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "pofd/dataset.hpp"
#include "pofd/grid.hpp"
#include "pofd/smoothing.hpp"

namespace pofd {

/// Union of disjoint intervals O = [A_1, B_1] u ... u [A_J, B_J] together with
/// the grid points it contains.
class Subdomain {
 public:
  /// Intervals are sorted; throws InputError if they overlap, are empty, or
  /// contain no grid point.
  Subdomain(std::vector<Interval> intervals, const DomainGrid& grid);

  /// Subdomain made of explicit grid indices (consecutive runs become intervals
  /// spanning the corresponding grid points).
  static Subdomain from_indices(std::vector<std::size_t> indices, const DomainGrid& grid);

  /// The whole domain [a, b].
  static Subdomain full(const DomainGrid& grid);

  const std::vector<Interval>& intervals() const { return intervals_; }
  const std::vector<std::size_t>& grid_indices() const { return indices_; }
  /// Trapezoid weights of the grid indices, computed per interval block.
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return indices_.size(); }
  bool contains_index(std::size_t r) const;
  bool contains(double u) const;

  bool operator==(const Subdomain& other) const { return indices_ == other.indices_; }
  bool operator<(const Subdomain& other) const { return indices_ < other.indices_; }

 private:
  Subdomain() = default;
  void finish(const DomainGrid& grid);

  std::vector<Interval> intervals_;
  std::vector<std::size_t> indices_;
  std::vector<double> weights_;
  std::vector<unsigned char> member_;
};

/// Eigenpairs of the covariance operator restricted to a subdomain, with the
/// extrapolated basis on the full grid.
struct EigenSystem {
  Subdomain subdomain;
  std::vector<double> eigenvalues;       ///< nonincreasing, positive
  Eigen::MatrixXd eigenfunctions;        ///< |O| x K, trapezoid-orthonormal on O
  Eigen::MatrixXd extrapolated;          ///< L x K, NaN rows where not estimable
  std::vector<unsigned char> extrapolable;  ///< per full-grid point
  std::size_t near_degenerate = 0;       ///< adjacent pairs with gap < 1e-10 lambda_1
  double identity_deviation = 0.0;       ///< max |extrapolated - eigenfunction| on O

  std::size_t available() const { return eigenvalues.size(); }

  /// Linear interpolation of the k-th extrapolated basis function at u,
  /// skipping non-estimable neighbours.
  double basis_at(std::size_t k, double u, const DomainGrid& grid) const;
};

inline constexpr double kDefaultLambdaFloor = 1e-8;

/// Discretized eigen-analysis of the covariance on O (trapezoid weights).
/// Throws ComputationError if the mask does not cover O x O or if every
/// eigenvalue is non-positive.
EigenSystem eigen_on_subdomain(const CovarianceEstimate& cov, const Subdomain& O,
                               double lambda_rel_floor = kDefaultLambdaFloor);

/// Fills the extrapolated basis <phi_k, gamma_u> / lambda_k on the full grid.
void extrapolate_basis(EigenSystem& eig, const CovarianceEstimate& cov);

/// eigen_on_subdomain followed by extrapolate_basis.
EigenSystem analyse_subdomain(const CovarianceEstimate& cov, const Subdomain& O,
                              double lambda_rel_floor = kDefaultLambdaFloor);

}  // namespace pofd
