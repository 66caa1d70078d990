#include "pofd/scores.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "pofd/error.hpp"

namespace pofd {

namespace {

void check_order(std::size_t K, const EigenSystem& eig) {
  if (K > eig.available()) {
    std::ostringstream msg;
    msg << "requested K = " << K << " exceeds K_available = " << eig.available();
    throw ComputationError(msg.str());
  }
}

// Cholesky that also rejects numerically singular pivots.
bool factorize(const Eigen::MatrixXd& S, Eigen::LLT<Eigen::MatrixXd>& llt) {
  llt.compute(S);
  if (llt.info() != Eigen::Success) return false;
  const double scale = S.diagonal().cwiseAbs().maxCoeff();
  const auto diag = llt.matrixLLT().diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) * diag(i) > 1e-13 * scale)) return false;
  }
  return true;
}

}  // namespace

const char* to_string(ScoreMethod method) {
  return method == ScoreMethod::integral ? "integral" : "conditional_expectation";
}

ScoreVector integral_scores(std::string_view curve_id, std::span<const ObservationPair> points,
                            const EigenSystem& eig, const MeanEstimate& mean, std::size_t K,
                            ScoreQuadrature quadrature) {
  check_order(K, eig);
  std::vector<ObservationPair> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ObservationPair& l, const ObservationPair& r) { return l.u < r.u; });

  ScoreVector out{std::string(curve_id), std::vector<double>(K, 0.0), ScoreMethod::integral};
  if (sorted.size() < 2) {
    out.insufficient_points = true;
    return out;
  }
  const auto& grid = mean.grid;
  std::vector<double> residual(sorted.size());
  for (std::size_t j = 0; j < sorted.size(); ++j) residual[j] = sorted[j].y - mean.at(sorted[j].u);
  for (std::size_t k = 0; k < K; ++k) {
    double prev = eig.basis_at(k, sorted[0].u, grid) * residual[0];
    double sum = 0.0;
    for (std::size_t j = 1; j < sorted.size(); ++j) {
      const double cur = eig.basis_at(k, sorted[j].u, grid) * residual[j];
      const double du = sorted[j].u - sorted[j - 1].u;
      sum += (quadrature == ScoreQuadrature::riemann ? cur : 0.5 * (cur + prev)) * du;
      prev = cur;
    }
    out.values[k] = sum;
  }
  return out;
}

ScoreVector integral_scores(const Curve& curve, const EigenSystem& eig, const MeanEstimate& mean,
                            std::size_t K, ScoreQuadrature quadrature) {
  return integral_scores(curve.id(), curve.points(), eig, mean, K, quadrature);
}

ScoreVector ce_scores(std::string_view curve_id, std::span<const ObservationPair> points,
                      const EigenSystem& eig, const CovarianceEstimate& cov,
                      const NoiseVariance& noise, const MeanEstimate& mean, std::size_t K) {
  check_order(K, eig);
  if (noise.sigma2 < 0.0) throw InputError("noise variance must be non-negative");
  ScoreVector out{std::string(curve_id), std::vector<double>(K, 0.0),
                  ScoreMethod::conditional_expectation};
  const auto m = static_cast<Eigen::Index>(points.size());
  if (m == 0) {
    out.insufficient_points = true;
    return out;
  }
  const auto& grid = mean.grid;
  Eigen::MatrixXd S(m, m);
  Eigen::VectorXd centered(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& pj = points[static_cast<std::size_t>(j)];
    centered(j) = pj.y - mean.at(pj.u);
    for (Eigen::Index l = 0; l <= j; ++l) {
      const auto& pl = points[static_cast<std::size_t>(l)];
      const double value = 0.5 * (cov.at(pj.u, pl.u) + cov.at(pl.u, pj.u));
      if (std::isnan(value)) throw ComputationError("covariance not estimable at observation pair");
      S(j, l) = S(l, j) = value;
    }
  }

  // The smoothed surface need not be positive semi-definite; negative
  // directions of the observation block are clipped before adding the noise.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(S);
  Eigen::VectorXd lambda = spectrum.eigenvalues();
  if (lambda.minCoeff() < 0.0) {
    lambda = lambda.cwiseMax(0.0);
    S = spectrum.eigenvectors() * lambda.asDiagonal() * spectrum.eigenvectors().transpose();
    out.psd_repaired = true;
  }
  S.diagonal().array() += noise.sigma2;
  lambda.array() += noise.sigma2;
  const double top = lambda.maxCoeff();
  const double bottom = lambda.minCoeff();
  out.condition = bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity();
  out.ill_conditioned = out.condition > kConditionThreshold;

  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!factorize(S, llt)) {
    const double ridge = kJitterFactor * S.trace() / static_cast<double>(m);
    Eigen::MatrixXd jittered = S;
    jittered.diagonal().array() += ridge;
    out.jittered = true;
    if (!(ridge > 0.0) || !factorize(jittered, llt)) {
      std::ostringstream msg;
      msg << "ill-conditioned score system (condition estimate " << out.condition << ")";
      throw ComputationError(msg.str());
    }
  }
  const Eigen::VectorXd solution = llt.solve(centered);
  for (std::size_t k = 0; k < K; ++k) {
    double dot = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      dot += eig.basis_at(k, points[static_cast<std::size_t>(j)].u, grid) * solution(j);
    }
    out.values[k] = eig.eigenvalues[k] * dot;
  }
  return out;
}

ScoreVector ce_scores(const Curve& curve, const EigenSystem& eig, const CovarianceEstimate& cov,
                      const NoiseVariance& noise, const MeanEstimate& mean, std::size_t K) {
  return ce_scores(curve.id(), curve.points(), eig, cov, noise, mean, K);
}

ScoreVector pace_scores(const Curve& curve, const EigenSystem& full_eig,
                        const CovarianceEstimate& cov, const NoiseVariance& noise,
                        const MeanEstimate& mean, std::size_t K) {
  if (full_eig.subdomain.size() != cov.grid().size()) {
    throw InputError("PACE scores need the eigensystem of the full domain");
  }
  return ce_scores(curve, full_eig, cov, noise, mean, K);
}

}  // namespace pofd
