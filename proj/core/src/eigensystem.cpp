#include "pofd/eigensystem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pofd/error.hpp"

namespace pofd {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kIndexTolerance = 1e-9;
}  // namespace

Subdomain::Subdomain(std::vector<Interval> intervals, const DomainGrid& grid)
    : intervals_(std::move(intervals)) {
  if (intervals_.empty()) throw InputError("subdomain needs at least one interval");
  std::sort(intervals_.begin(), intervals_.end(),
            [](const Interval& l, const Interval& r) { return l.lower < r.lower; });
  for (std::size_t j = 0; j < intervals_.size(); ++j) {
    if (!(intervals_[j].upper > intervals_[j].lower)) {
      throw InputError("subdomain intervals need B > A");
    }
    if (j > 0 && intervals_[j].lower <= intervals_[j - 1].upper) {
      throw InputError("subdomain intervals must be disjoint");
    }
  }
  const double tol = kIndexTolerance * (grid.upper() - grid.lower());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (const auto& iv : intervals_) {
      if (grid[r] >= iv.lower - tol && grid[r] <= iv.upper + tol) {
        indices_.push_back(r);
        break;
      }
    }
  }
  if (indices_.empty()) throw InputError("subdomain contains no grid point");
  finish(grid);
}

Subdomain Subdomain::from_indices(std::vector<std::size_t> indices, const DomainGrid& grid) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (indices.empty()) throw InputError("subdomain contains no grid point");
  if (indices.back() >= grid.size()) throw InputError("grid index out of range");
  Subdomain O;
  O.indices_ = std::move(indices);
  std::size_t start = O.indices_.front();
  for (std::size_t k = 1; k <= O.indices_.size(); ++k) {
    if (k == O.indices_.size() || O.indices_[k] != O.indices_[k - 1] + 1) {
      const std::size_t stop = O.indices_[k - 1];
      O.intervals_.push_back({grid[start], grid[stop]});
      if (k < O.indices_.size()) start = O.indices_[k];
    }
  }
  O.finish(grid);
  return O;
}

Subdomain Subdomain::full(const DomainGrid& grid) {
  return Subdomain({{grid.lower(), grid.upper()}}, grid);
}

void Subdomain::finish(const DomainGrid& grid) {
  const double h = grid.spacing();
  member_.assign(grid.size(), 0);
  weights_.assign(indices_.size(), h);
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    member_[indices_[k]] = 1;
    const bool first = k == 0 || indices_[k - 1] + 1 != indices_[k];
    const bool last = k + 1 == indices_.size() || indices_[k + 1] != indices_[k] + 1;
    if (first && last) {
      weights_[k] = h;  // isolated grid point: one cell width
    } else if (first || last) {
      weights_[k] = 0.5 * h;
    }
  }
}

bool Subdomain::contains_index(std::size_t r) const {
  return r < member_.size() && member_[r] != 0;
}

bool Subdomain::contains(double u) const {
  return std::any_of(intervals_.begin(), intervals_.end(),
                     [u](const Interval& iv) { return iv.contains(u); });
}

double EigenSystem::basis_at(std::size_t k, double u, const DomainGrid& grid) const {
  const auto r = grid.cell(u);
  const double t = std::clamp((u - grid[r]) / grid.spacing(), 0.0, 1.0);
  const bool left = extrapolable[r] != 0;
  const bool right = extrapolable[r + 1] != 0;
  const auto K = static_cast<Eigen::Index>(k);
  if (left && right) {
    return (1.0 - t) * extrapolated(static_cast<Eigen::Index>(r), K) +
           t * extrapolated(static_cast<Eigen::Index>(r + 1), K);
  }
  if (left) return extrapolated(static_cast<Eigen::Index>(r), K);
  if (right) return extrapolated(static_cast<Eigen::Index>(r + 1), K);
  return kNaN;
}

EigenSystem eigen_on_subdomain(const CovarianceEstimate& cov, const Subdomain& O,
                               double lambda_rel_floor) {
  const auto& idx = O.grid_indices();
  const auto n = static_cast<Eigen::Index>(idx.size());
  for (auto r : idx) {
    for (auto s : idx) {
      if (!cov.estimable(r, s)) {
        std::ostringstream msg;
        msg << "covariance not estimable on O at (" << cov.grid()[r] << ", " << cov.grid()[s]
            << ")";
        throw ComputationError(msg.str());
      }
    }
  }

  // W^{1/2} G W^{1/2} is symmetric; its eigenvectors map to W-orthonormal
  // eigenfunctions phi = W^{-1/2} psi of the quadrature operator G W.
  Eigen::VectorXd root(n);
  for (Eigen::Index a = 0; a < n; ++a) root(a) = std::sqrt(O.weights()[a]);
  Eigen::MatrixXd sym(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      sym(a, b) = root(a) * cov(idx[a], idx[b]) * root(b);
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw ComputationError("eigen solver failed");

  const Eigen::VectorXd values = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  const double top = values.size() > 0 ? values(0) : 0.0;
  if (!(top > 0.0)) throw ComputationError("degenerate covariance");

  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    const double lambda = std::max(values(k), 0.0);
    if (lambda > 0.0 && lambda > lambda_rel_floor * top) keep.push_back(k);
  }

  EigenSystem eig{O, {}, Eigen::MatrixXd(n, static_cast<Eigen::Index>(keep.size())), {}, {}, 0, 0.0};
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const auto k = keep[c];
    eig.eigenvalues.push_back(values(k));
    Eigen::VectorXd phi = vectors.col(k).cwiseQuotient(root);
    const double sum = phi.sum();
    bool flip = false;
    if (std::abs(sum) > 1e-12) {
      flip = sum < 0.0;
    } else {
      for (Eigen::Index a = 0; a < n; ++a) {
        if (std::abs(phi(a)) > 1e-12) {
          flip = phi(a) < 0.0;
          break;
        }
      }
    }
    if (flip) phi = -phi;
    eig.eigenfunctions.col(static_cast<Eigen::Index>(c)) = phi;
  }
  for (std::size_t k = 1; k < eig.eigenvalues.size(); ++k) {
    if (eig.eigenvalues[k - 1] - eig.eigenvalues[k] < 1e-10 * top) ++eig.near_degenerate;
  }
  return eig;
}

void extrapolate_basis(EigenSystem& eig, const CovarianceEstimate& cov) {
  const auto& grid = cov.grid();
  const auto L = static_cast<Eigen::Index>(grid.size());
  const auto K = static_cast<Eigen::Index>(eig.available());
  const auto& idx = eig.subdomain.grid_indices();
  const auto& w = eig.subdomain.weights();

  eig.extrapolated = Eigen::MatrixXd::Constant(L, K, kNaN);
  eig.extrapolable.assign(grid.size(), 0);
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < grid.size(); ++r) {
    bool ok = true;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      if (!cov.estimable(r, idx[a])) {
        ok = false;
        break;
      }
      row(static_cast<Eigen::Index>(a)) = cov(r, idx[a]) * w[a];
    }
    if (!ok) continue;
    eig.extrapolable[r] = 1;
    for (Eigen::Index k = 0; k < K; ++k) {
      eig.extrapolated(static_cast<Eigen::Index>(r), k) =
          row.dot(eig.eigenfunctions.col(k)) / eig.eigenvalues[static_cast<std::size_t>(k)];
    }
  }

  eig.identity_deviation = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const double diff = std::abs(eig.extrapolated(static_cast<Eigen::Index>(idx[a]), k) -
                                   eig.eigenfunctions(static_cast<Eigen::Index>(a), k));
      eig.identity_deviation = std::max(eig.identity_deviation, diff);
    }
  }
}

EigenSystem analyse_subdomain(const CovarianceEstimate& cov, const Subdomain& O,
                              double lambda_rel_floor) {
  auto eig = eigen_on_subdomain(cov, O, lambda_rel_floor);
  extrapolate_basis(eig, cov);
  return eig;
}

}  // namespace pofd
