#include "pofd/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "pofd/error.hpp"

namespace pofd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MethodName {
  Method method;
  const char* key;
  const char* label;
};

constexpr MethodName kMethodNames[] = {
    {Method::ano, "ano", "ANo"},     {Method::anoce, "anoce", "ANoCE"},
    {Method::ayes, "ayes", "AYes"},  {Method::ayesce, "ayesce", "AYesCE"},
    {Method::pace, "pace", "PACE"},  {Method::kraus, "kraus", "KRAUS"},
};

void check_order(std::size_t K, const EigenSystem& eig) {
  if (K > eig.available()) {
    std::ostringstream msg;
    msg << "requested K = " << K << " exceeds K_available = " << eig.available();
    throw ComputationError(msg.str());
  }
}

double interpolate(const std::vector<ObservationPair>& p, double u) {
  if (u <= p.front().u) return p.front().y;
  if (u >= p.back().u) return p.back().y;
  auto it = std::lower_bound(p.begin(), p.end(), u,
                             [](const ObservationPair& o, double v) { return o.u < v; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  if (hi.u == lo.u) return hi.y;
  const double t = (u - lo.u) / (hi.u - lo.u);
  return (1.0 - t) * lo.y + t * hi.y;
}

// Curve smoother used by the aligned methods and by KRAUS: the local-linear
// fit for raw curves, linear interpolation for gridded pseudo-curves.
double smooth(const CurveInput& curve, double u, double h) {
  if (curve.gridded) return interpolate(curve.points, u);
  return local_linear(curve.points, u, h);
}

// Anchors of a point outside O: one endpoint outside the hull, two
// interpolated endpoints in a gap between intervals.
struct Anchor {
  double location;
  double weight;
};

std::vector<Anchor> anchors_for(double u, const std::vector<Interval>& intervals) {
  std::size_t j = 0;
  while (j < intervals.size() && intervals[j].lower <= u) ++j;
  if (j == 0) return {{intervals.front().lower, 1.0}};
  const auto& prev = intervals[j - 1];
  if (j == intervals.size() || u <= prev.upper) {
    // Past the last interval, or numerically inside one: nearest endpoint.
    if (u <= prev.upper && std::abs(u - prev.lower) < std::abs(u - prev.upper)) {
      return {{prev.lower, 1.0}};
    }
    return {{prev.upper, 1.0}};
  }
  const auto& next = intervals[j];
  const double w = (u - prev.upper) / (next.lower - prev.upper);
  return {{prev.upper, 1.0 - w}, {next.lower, w}};
}

// Discretized ridge operator on O: G_OO Delta = Q diag(lambda) Q^T, with the
// cross block G_rO Delta for every grid point r.
class KrausOperator {
 public:
  KrausOperator(const ReconstructionModel& model, const Subdomain& O) : O_(O) {
    const auto& cov = model.covariance();
    const auto& grid = model.grid();
    const auto& idx = O.grid_indices();
    const auto n = static_cast<Eigen::Index>(idx.size());
    const double delta = grid.spacing();
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        const auto r = idx[static_cast<std::size_t>(a)];
        const auto s = idx[static_cast<std::size_t>(b)];
        if (!cov.estimable(r, s)) {
          std::ostringstream msg;
          msg << "covariance not estimable on O at (" << grid[r] << ", " << grid[s] << ")";
          throw ComputationError(msg.str());
        }
        G(a, b) = cov(r, s) * delta;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (G + G.transpose()));
    if (solver.info() != Eigen::Success) throw ComputationError("ridge operator eigen-solve failed");
    lambda_ = solver.eigenvalues().cwiseMax(0.0);
    Q_ = solver.eigenvectors();
    trace_ = lambda_.sum();

    const auto L = static_cast<Eigen::Index>(grid.size());
    cross_ = Eigen::MatrixXd(L, n);
    estimable_.assign(grid.size(), 1);
    for (Eigen::Index r = 0; r < L; ++r) {
      for (Eigen::Index b = 0; b < n; ++b) {
        const auto s = idx[static_cast<std::size_t>(b)];
        if (!cov.estimable(static_cast<std::size_t>(r), s)) {
          estimable_[static_cast<std::size_t>(r)] = 0;
          break;
        }
        cross_(r, b) = cov(static_cast<std::size_t>(r), s) * delta;
      }
    }
  }

  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  double trace() const { return trace_; }
  bool estimable(std::size_t r) const { return estimable_[r] != 0; }

  /// mu + G_.O (G_OO + rho I)^+ (x_O - mu_O); NaN where the cross block is not estimable.
  std::vector<double> apply(const Eigen::VectorXd& centred, double rho,
                            const std::vector<double>& mean) const {
    const double cut = 1e-12 * std::max(lambda_.maxCoeff(), 0.0);
    Eigen::VectorXd coef = Q_.transpose() * centred;
    for (Eigen::Index i = 0; i < coef.size(); ++i) {
      const double d = lambda_(i) + rho;
      coef(i) = d > cut && d > 0.0 ? coef(i) / d : 0.0;
    }
    const Eigen::VectorXd solved = Q_ * coef;
    std::vector<double> out(mean.size(), kNaN);
    for (std::size_t r = 0; r < mean.size(); ++r) {
      if (!estimable_[r]) continue;
      out[r] = mean[r] + cross_.row(static_cast<Eigen::Index>(r)).dot(solved);
    }
    return out;
  }

  double degrees_of_freedom(double rho) const {
    double df = 0.0;
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
      if (lambda_(i) + rho > 0.0) df += lambda_(i) / (lambda_(i) + rho);
    }
    return df;
  }

 private:
  Subdomain O_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd Q_;
  Eigen::MatrixXd cross_;
  std::vector<unsigned char> estimable_;
  double trace_ = 0.0;
};

// Curve values on the grid points of O, centred by the mean. Sparse windows
// fall back to linear interpolation of the observations.
Eigen::VectorXd centred_observed(const CurveInput& curve, const ReconstructionModel& model) {
  const auto& idx = curve.observed.grid_indices();
  const auto& grid = model.grid();
  Eigen::VectorXd x(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const double u = grid[idx[a]];
    double value;
    try {
      value = smooth(curve, u, model.bandwidths().curve);
    } catch (const InsufficientLocalData&) {
      value = interpolate(curve.points, u);
    }
    x(static_cast<Eigen::Index>(a)) = value - model.mean().values[idx[a]];
  }
  return x;
}

ReconstructedCurve kraus_from_operator(const CurveInput& curve, const ReconstructionModel& model,
                                       const KrausOperator& op, double rho) {
  const auto& grid = model.grid();
  ReconstructedCurve out{curve.id, grid, {}, {}, 0, Method::kraus, std::nullopt, {}};
  const Eigen::VectorXd x = centred_observed(curve, model);
  out.values = op.apply(x, rho, model.mean().values);
  out.provenance.assign(grid.size(), PointTag{PointKind::non_estimable, 0});
  const auto& idx = curve.observed.grid_indices();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    out.values[idx[a]] = x(static_cast<Eigen::Index>(a)) + model.mean().values[idx[a]];
  }
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (curve.observed.contains_index(r)) {
      out.provenance[r] = {PointKind::observed, 0};
    } else if (std::isfinite(out.values[r])) {
      out.provenance[r] = {PointKind::reconstructed, 0};
    }
  }
  return out;
}

// Complete curves split at O: points inside O form the pseudo-observed curve.
struct PseudoSplit {
  CurveInput observed;
  std::vector<ObservationPair> missing;
};

std::vector<PseudoSplit> pseudo_splits(const FunctionalDataset& data, const Subdomain& O,
                                       double margin_fraction) {
  std::vector<PseudoSplit> splits;
  for (auto l : classify_complete(data, margin_fraction)) {
    const auto& c = data.curves[l];
    PseudoSplit split{CurveInput{c.id(), {}, O, false}, {}};
    for (const auto& p : c.points()) {
      (O.contains(p.u) ? split.observed.points : split.missing).push_back(p);
    }
    if (split.missing.empty() || split.observed.points.size() < 2) continue;
    if (split.observed.points.front().u == split.observed.points.back().u) continue;
    splits.push_back(std::move(split));
  }
  return splits;
}

// Mean squared prediction error over the pseudo-missing points that have a
// finite prediction; NaN if there is none.
double prediction_error(const std::vector<double>& values, const DomainGrid& grid,
                        const std::vector<ObservationPair>& missing) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : missing) {
    const double pred = grid.interpolate(values, p.u);
    if (!std::isfinite(pred)) continue;
    sum += (p.y - pred) * (p.y - pred);
    ++count;
  }
  return count == 0 ? kNaN : sum / static_cast<double>(count);
}

}  // namespace

const char* to_string(Method method) {
  for (const auto& m : kMethodNames) {
    if (m.method == method) return m.key;
  }
  return "unknown";
}

const char* label(Method method) {
  for (const auto& m : kMethodNames) {
    if (m.method == method) return m.label;
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  for (const auto& m : kMethodNames) {
    if (text == m.key) return m.method;
  }
  throw InputError("unknown method '" + std::string(text) +
                   "' (expected ano, anoce, ayes, ayesce, pace or kraus)");
}

bool uses_alignment(Method method) { return method == Method::ayes || method == Method::ayesce; }

ScoreMethod score_method(Method method) {
  switch (method) {
    case Method::anoce:
    case Method::ayesce:
    case Method::pace:
      return ScoreMethod::conditional_expectation;
    default:
      return ScoreMethod::integral;
  }
}

ReconstructionModel::ReconstructionModel(MeanEstimate mean, CovarianceEstimate cov,
                                         NoiseVariance noise, Bandwidths bandwidths,
                                         FitOptions options)
    : mean_(std::move(mean)),
      cov_(std::move(cov)),
      noise_(noise),
      bandwidths_(bandwidths),
      options_(std::move(options)) {
  if (!(mean_.grid == cov_.grid())) throw InputError("mean and covariance grids differ");
  if (cov_.fallback_count() > 0) {
    diagnostics_.push_back("covariance smoother fell back to local-constant at " +
                           std::to_string(cov_.fallback_count()) + " grid pairs");
  }
}

ReconstructionModel ReconstructionModel::fit(const FunctionalDataset& data,
                                             const FitOptions& options) {
  const Bandwidths h = options.bandwidths ? *options.bandwidths : default_bandwidths(data);
  h.validate(data.domain.width());
  auto mean = llk_mean(data, data.grid, h.mean);
  auto cov = llk_covariance(data, mean, h.covariance, options.min_pairs, options.threads);
  NoiseVariance noise;
  std::string noise_note;
  try {
    noise = estimate_noise_variance(data, mean, cov, options.noise_trim);
  } catch (const ComputationError& e) {
    noise_note = std::string(e.what()) + "; using sigma2 = 0";
  }
  ReconstructionModel model(std::move(mean), std::move(cov), noise, h, options);
  if (!noise_note.empty()) model.diagnostics_.push_back(noise_note);
  return model;
}

std::shared_ptr<const EigenSystem> ReconstructionModel::eigensystem(const Subdomain& O) const {
  {
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->entries.find(O.grid_indices());
    if (it != cache_->entries.end()) return it->second;
  }
  auto eig = std::make_shared<const EigenSystem>(
      analyse_subdomain(cov_, O, options_.lambda_floor));
  std::lock_guard lock(cache_->mutex);
  return cache_->entries.emplace(O.grid_indices(), std::move(eig)).first->second;
}

std::shared_ptr<const EigenSystem> ReconstructionModel::full_eigensystem() const {
  return eigensystem(Subdomain::full(grid()));
}

bool ReconstructionModel::full_domain_estimable() const { return cov_.coverage() >= 1.0; }

std::string to_string(const PointTag& tag) {
  switch (tag.kind) {
    case PointKind::observed:
      return "observed";
    case PointKind::non_estimable:
      return "non-estimable";
    case PointKind::reconstructed:
      return tag.iteration > 1 ? "iteration-" + std::to_string(tag.iteration) : "reconstructed";
  }
  return "unknown";
}

bool ReconstructedCurve::complete() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double ReconstructedCurve::at(double u) const { return grid.interpolate(values, u); }

CurveInput CurveInput::from_curve(const Curve& curve, const DomainGrid& grid) {
  return CurveInput{curve.id(), curve.points(), Subdomain({curve.observed_interval()}, grid),
                    false};
}

std::vector<double> Expansion::values(std::size_t K) const {
  std::vector<double> out = base;
  const auto Kc = std::min<Eigen::Index>(static_cast<Eigen::Index>(K), increments.cols());
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (Eigen::Index k = 0; k < Kc; ++k) out[r] += increments(static_cast<Eigen::Index>(r), k);
  }
  return out;
}

Expansion expand(const CurveInput& curve, const ReconstructionModel& model, Method method,
                 std::size_t K_max) {
  if (method == Method::kraus) throw InputError("KRAUS has no eigen expansion");
  const auto& grid = model.grid();
  const auto& mean = model.mean();
  const auto L = grid.size();
  const auto eig = method == Method::pace ? model.full_eigensystem()
                                          : model.eigensystem(curve.observed);
  check_order(K_max, *eig);

  Expansion ex;
  ScoreVector xi;
  if (curve.gridded || score_method(method) == ScoreMethod::integral) {
    const auto rule = curve.gridded ? ScoreQuadrature::trapezoid : model.options().quadrature;
    xi = integral_scores(curve.id, curve.points, *eig, mean, K_max, rule);
  } else {
    xi = ce_scores(curve.id, curve.points, *eig, model.covariance(), model.noise(), mean, K_max);
  }
  if (xi.insufficient_points) ex.diagnostics.push_back("fewer than two observations; scores set to 0");
  if (xi.jittered) ex.diagnostics.push_back("jitter added to the observation covariance");
  if (xi.ill_conditioned) ex.diagnostics.push_back("ill-conditioned observation covariance");

  const auto Kx = static_cast<Eigen::Index>(K_max);
  ex.base.assign(L, kNaN);
  ex.increments = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(L), Kx, kNaN);
  ex.tags.assign(L, PointTag{PointKind::non_estimable, 0});

  auto set_ano = [&](std::size_t r) {
    const auto R = static_cast<Eigen::Index>(r);
    ex.base[r] = mean.values[r];
    for (Eigen::Index k = 0; k < Kx; ++k) {
      ex.increments(R, k) = xi.values[static_cast<std::size_t>(k)] * eig->extrapolated(R, k);
    }
  };

  if (!uses_alignment(method)) {
    for (std::size_t r = 0; r < L; ++r) {
      if (!eig->extrapolable[r]) continue;
      set_ano(r);
      ex.tags[r] = {curve.observed.contains_index(r) ? PointKind::observed
                                                     : PointKind::reconstructed,
                    0};
    }
    return ex;
  }

  const double h = model.bandwidths().curve;
  bool fallback_noted = false;
  auto note_fallback = [&] {
    if (!fallback_noted) ex.diagnostics.push_back("curve smoother fell back to the ANo value");
    fallback_noted = true;
  };

  // Smoothed curve on O; the ANo value replaces it where the smoother fails.
  for (auto r : curve.observed.grid_indices()) {
    if (!eig->extrapolable[r]) continue;
    ex.tags[r] = {PointKind::observed, 0};
    try {
      ex.base[r] = smooth(curve, grid[r], h);
      ex.increments.row(static_cast<Eigen::Index>(r)).setZero();
    } catch (const InsufficientLocalData&) {
      set_ano(r);
      note_fallback();
    }
  }

  // Anchor terms X(theta) - mu(theta) and phi_k(theta), both linear in the scores.
  struct AnchorTerms {
    double offset;
    Eigen::VectorXd basis;
  };
  std::map<double, AnchorTerms> anchor_cache;
  auto anchor_terms = [&](double theta) -> const AnchorTerms& {
    auto it = anchor_cache.find(theta);
    if (it != anchor_cache.end()) return it->second;
    AnchorTerms t{0.0, Eigen::VectorXd::Zero(Kx)};
    for (Eigen::Index k = 0; k < Kx; ++k) {
      t.basis(k) = eig->basis_at(static_cast<std::size_t>(k), theta, grid);
    }
    try {
      t.offset = smooth(curve, theta, h) - mean.at(theta);
    } catch (const InsufficientLocalData&) {
      // Nearest grid value of the ANo reconstruction on O stands in for X(theta).
      const auto& idx = curve.observed.grid_indices();
      std::size_t g = idx.front();
      for (auto r : idx) {
        if (std::abs(grid[r] - theta) < std::abs(grid[g] - theta)) g = r;
      }
      const auto G = static_cast<Eigen::Index>(g);
      t.offset = mean.values[g] - mean.at(theta);
      for (Eigen::Index k = 0; k < Kx; ++k) {
        t.basis(k) -= eig->extrapolated(G, k);
      }
      note_fallback();
    }
    return anchor_cache.emplace(theta, std::move(t)).first->second;
  };

  const auto& intervals = curve.observed.intervals();
  for (std::size_t r = 0; r < L; ++r) {
    if (curve.observed.contains_index(r) || !eig->extrapolable[r]) continue;
    const auto R = static_cast<Eigen::Index>(r);
    double base = mean.values[r];
    Eigen::VectorXd phi = eig->extrapolated.row(R).head(Kx).transpose();
    bool finite = true;
    for (const auto& a : anchors_for(grid[r], intervals)) {
      const auto& t = anchor_terms(a.location);
      base += a.weight * t.offset;
      phi -= a.weight * t.basis;
      finite = finite && std::isfinite(t.offset) && t.basis.allFinite();
    }
    if (!finite) continue;
    ex.base[r] = base;
    for (Eigen::Index k = 0; k < Kx; ++k) {
      ex.increments(R, k) = xi.values[static_cast<std::size_t>(k)] * phi(k);
    }
    ex.tags[r] = {PointKind::reconstructed, 0};
  }
  return ex;
}

ReconstructedCurve reconstruct(const CurveInput& curve, const ReconstructionModel& model,
                               Method method, std::size_t K, bool with_error_variance) {
  if (method == Method::kraus) {
    throw InputError("KRAUS is parameterized by a ridge, use reconstruct_kraus");
  }
  Expansion ex = expand(curve, model, method, K);
  ReconstructedCurve out{curve.id, model.grid(), ex.values(K), std::move(ex.tags), K, method,
                         std::nullopt, std::move(ex.diagnostics)};
  for (std::size_t r = 0; r < out.values.size(); ++r) {
    if (!std::isfinite(out.values[r])) out.provenance[r] = {PointKind::non_estimable, 0};
  }
  if (with_error_variance) {
    const auto eig = method == Method::pace ? model.full_eigensystem()
                                            : model.eigensystem(curve.observed);
    std::size_t clamped = 0;
    out.error_variance = error_variance(*eig, model.covariance(), &clamped);
    if (clamped > 0) {
      out.diagnostics.push_back("error variance clamped at 0 on " + std::to_string(clamped) +
                                " grid points");
    }
  }
  return out;
}

ReconstructedCurve reconstruct_ano(const Curve& curve, const ReconstructionModel& model,
                                   std::size_t K, ScoreMethod scores) {
  return reconstruct(CurveInput::from_curve(curve, model.grid()), model,
                     scores == ScoreMethod::integral ? Method::ano : Method::anoce, K);
}

ReconstructedCurve reconstruct_ayes(const Curve& curve, const ReconstructionModel& model,
                                    std::size_t K, ScoreMethod scores) {
  return reconstruct(CurveInput::from_curve(curve, model.grid()), model,
                     scores == ScoreMethod::integral ? Method::ayes : Method::ayesce, K);
}

ReconstructedCurve reconstruct_pace(const Curve& curve, const ReconstructionModel& model,
                                    std::size_t K) {
  return reconstruct(CurveInput::from_curve(curve, model.grid()), model, Method::pace, K);
}

ReconstructedCurve reconstruct_kraus(const CurveInput& curve, const ReconstructionModel& model,
                                     double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw InputError("ridge parameter must be >= 0");
  const KrausOperator op(model, curve.observed);
  return kraus_from_operator(curve, model, op, rho);
}

ReconstructedCurve reconstruct_kraus(const Curve& curve, const ReconstructionModel& model,
                                     double rho) {
  return reconstruct_kraus(CurveInput::from_curve(curve, model.grid()), model, rho);
}

double error_variance(const EigenSystem& eig, const CovarianceEstimate& cov, std::size_t r,
                      bool* clamped) {
  if (clamped) *clamped = false;
  if (!eig.extrapolable[r] || !cov.estimable(r, r)) return kNaN;
  double v = cov(r, r);
  const auto R = static_cast<Eigen::Index>(r);
  for (std::size_t k = 0; k < eig.available(); ++k) {
    const double phi = eig.extrapolated(R, static_cast<Eigen::Index>(k));
    v -= eig.eigenvalues[k] * phi * phi;
  }
  if (v < 0.0) {
    if (clamped) *clamped = true;
    return 0.0;
  }
  return v;
}

std::vector<double> error_variance(const EigenSystem& eig, const CovarianceEstimate& cov,
                                   std::size_t* clamped_count) {
  std::vector<double> out(cov.grid().size());
  std::size_t clamped = 0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    bool c = false;
    out[r] = error_variance(eig, cov, r, &c);
    clamped += c ? 1 : 0;
  }
  if (clamped_count) *clamped_count = clamped;
  return out;
}

GcvResult select_truncation_gcv(Method method, const ReconstructionModel& model,
                                const FunctionalDataset& data, const Subdomain& observed,
                                std::optional<std::vector<std::size_t>> candidates,
                                double margin_fraction) {
  if (method == Method::kraus) throw InputError("use select_ridge_gcv for KRAUS");
  const auto eig = method == Method::pace ? model.full_eigensystem()
                                          : model.eigensystem(observed);
  const auto splits = pseudo_splits(data, observed, margin_fraction);
  if (splits.size() < 2) {
    throw ComputationError("GCV needs at least two complete curves, found " +
                           std::to_string(splits.size()));
  }

  GcvResult res;
  if (candidates) {
    res.candidates = *candidates;
    std::sort(res.candidates.begin(), res.candidates.end());
    res.candidates.erase(std::unique(res.candidates.begin(), res.candidates.end()),
                         res.candidates.end());
    for (auto K : res.candidates) check_order(K, *eig);
  } else {
    const auto top = std::min(eig->available(), splits.size() - 1);
    for (std::size_t K = 1; K <= top; ++K) res.candidates.push_back(K);
  }
  if (res.candidates.empty()) throw ComputationError("no truncation candidates for GCV");
  const auto K_max = res.candidates.back();

  res.rss.assign(res.candidates.size(), 0.0);
  for (const auto& split : splits) {
    Expansion ex;
    try {
      ex = expand(split.observed, model, method, K_max);
    } catch (const InsufficientLocalData&) {
      continue;
    }
    std::vector<double> errors(res.candidates.size());
    bool usable = true;
    for (std::size_t c = 0; c < res.candidates.size() && usable; ++c) {
      errors[c] = prediction_error(ex.values(res.candidates[c]), model.grid(), split.missing);
      usable = std::isfinite(errors[c]);
    }
    if (!usable) continue;
    for (std::size_t c = 0; c < errors.size(); ++c) res.rss[c] += errors[c];
    ++res.complete_used;
  }
  if (res.complete_used == 0) throw ComputationError("no complete curve usable for GCV");

  const double n = static_cast<double>(res.complete_used);
  res.gcv.resize(res.candidates.size());
  std::size_t best = 0;
  for (std::size_t c = 0; c < res.candidates.size(); ++c) {
    const double K = static_cast<double>(res.candidates[c]);
    const double denom = 1.0 - K / n;
    res.gcv[c] = denom > 0.0 ? res.rss[c] / (denom * denom)
                             : std::numeric_limits<double>::infinity();
    if (res.gcv[c] < res.gcv[best]) best = c;
  }
  res.K = res.candidates[best];
  return res;
}

RidgeGcvResult select_ridge_gcv(const ReconstructionModel& model, const FunctionalDataset& data,
                                const Subdomain& observed, double margin_fraction) {
  const KrausOperator op(model, observed);
  const auto splits = pseudo_splits(data, observed, margin_fraction);
  if (splits.size() < 2) {
    throw ComputationError("GCV needs at least two complete curves, found " +
                           std::to_string(splits.size()));
  }
  RidgeGcvResult res;
  const double scale = op.trace() / static_cast<double>(observed.size());
  for (int e = -6; e <= 2; ++e) res.candidates.push_back(std::pow(10.0, e) * scale);
  res.rss.assign(res.candidates.size(), 0.0);

  std::size_t used = 0;
  for (const auto& split : splits) {
    Eigen::VectorXd x;
    try {
      x = centred_observed(split.observed, model);
    } catch (const InsufficientLocalData&) {
      continue;
    }
    std::vector<double> errors(res.candidates.size());
    bool usable = true;
    for (std::size_t c = 0; c < res.candidates.size() && usable; ++c) {
      errors[c] = prediction_error(op.apply(x, res.candidates[c], model.mean().values),
                                   model.grid(), split.missing);
      usable = std::isfinite(errors[c]);
    }
    if (!usable) continue;
    for (std::size_t c = 0; c < errors.size(); ++c) res.rss[c] += errors[c];
    ++used;
  }
  if (used == 0) throw ComputationError("no complete curve usable for GCV");

  const double n = static_cast<double>(used);
  res.gcv.resize(res.candidates.size());
  std::size_t best = res.candidates.size() - 1;
  for (std::size_t c = res.candidates.size(); c-- > 0;) {
    const double denom = 1.0 - op.degrees_of_freedom(res.candidates[c]) / n;
    res.gcv[c] = denom > 0.0 ? res.rss[c] / (denom * denom)
                             : std::numeric_limits<double>::infinity();
    // Ties go to the larger ridge.
    if (res.gcv[c] < res.gcv[best]) best = c;
  }
  res.rho = res.candidates[best];
  return res;
}

std::size_t select_truncation_fve(const EigenSystem& eig, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InputError("FVE threshold must be in (0, 1]");
  const double total = std::accumulate(eig.eigenvalues.begin(), eig.eigenvalues.end(), 0.0);
  double cum = 0.0;
  for (std::size_t k = 0; k < eig.available(); ++k) {
    cum += eig.eigenvalues[k];
    if (cum >= threshold * total * (1.0 - 1e-12)) return k + 1;
  }
  return eig.available();
}

TruncationSelector::TruncationSelector(const ReconstructionModel& model,
                                       const FunctionalDataset& data, TruncationPolicy policy)
    : model_(model), data_(data), policy_(policy) {}

std::size_t TruncationSelector::truncation(Method method, const Subdomain& observed) {
  if (policy_.kind == TruncationKind::fixed) return policy_.K;
  const std::pair<int, std::vector<std::size_t>> key{static_cast<int>(method),
                                                     observed.grid_indices()};
  auto it = k_cache_.find(key);
  if (it != k_cache_.end()) return it->second;
  std::size_t K = 0;
  if (policy_.kind == TruncationKind::fve) {
    const auto eig = method == Method::pace ? model_.full_eigensystem()
                                            : model_.eigensystem(observed);
    K = select_truncation_fve(*eig, policy_.fve_threshold);
  } else {
    K = select_truncation_gcv(method, model_, data_, observed).K;
  }
  k_cache_.emplace(key, K);
  return K;
}

double TruncationSelector::ridge(const Subdomain& observed) {
  if (policy_.rho) return *policy_.rho;
  auto it = rho_cache_.find(observed.grid_indices());
  if (it != rho_cache_.end()) return it->second;
  const double rho = select_ridge_gcv(model_, data_, observed).rho;
  rho_cache_.emplace(observed.grid_indices(), rho);
  return rho;
}

ReconstructedCurve reconstruct_with(const CurveInput& curve, const ReconstructionModel& model,
                                    Method method, TruncationSelector& selector,
                                    bool with_error_variance) {
  if (method == Method::kraus) {
    return reconstruct_kraus(curve, model, selector.ridge(curve.observed));
  }
  return reconstruct(curve, model, method, selector.truncation(method, curve.observed),
                     with_error_variance);
}

}  // namespace pofd
