#include "pofd/iterative.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pofd/error.hpp"

namespace pofd {

namespace {

constexpr std::uint64_t kTagAccumulation = 11;

struct Run {
  std::size_t lo;
  std::size_t hi;
};

// Longest run of covered grid points; ties go to the leftmost run.
std::optional<Run> longest_run(const std::vector<unsigned char>& covered) {
  std::optional<Run> best;
  std::size_t r = 0;
  while (r < covered.size()) {
    if (!covered[r]) {
      ++r;
      continue;
    }
    std::size_t e = r;
    while (e + 1 < covered.size() && covered[e + 1]) ++e;
    if (!best || e - r > best->hi - best->lo) best = Run{r, e};
    r = e + 1;
  }
  return best;
}

bool block_estimable(const CovarianceEstimate& cov, std::size_t lo, std::size_t hi) {
  for (std::size_t r = lo; r <= hi; ++r) {
    for (std::size_t s = lo; s <= hi; ++s) {
      if (!cov.estimable(r, s)) return false;
    }
  }
  return true;
}

bool row_reaches(const CovarianceEstimate& cov, std::size_t r, std::size_t lo, std::size_t hi) {
  for (std::size_t s = lo; s <= hi; ++s) {
    if (!cov.estimable(r, s)) return false;
  }
  return true;
}

Subdomain index_range(std::size_t lo, std::size_t hi, const DomainGrid& grid) {
  std::vector<std::size_t> idx;
  for (std::size_t r = lo; r <= hi; ++r) idx.push_back(r);
  return Subdomain::from_indices(std::move(idx), grid);
}

bool full(const std::vector<unsigned char>& covered) {
  return std::all_of(covered.begin(), covered.end(), [](unsigned char c) { return c != 0; });
}

Method integral_counterpart(Method method) {
  if (method == Method::anoce) return Method::ano;
  if (method == Method::ayesce) return Method::ayes;
  return method;
}

// L_O as an L x |O| matrix: row r maps x on O to sum_k <x, phi_k> phi~_k(u_r).
Eigen::MatrixXd operator_matrix(const EigenSystem& eig) {
  const auto& w = eig.subdomain.weights();
  Eigen::MatrixXd right = eig.eigenfunctions.transpose();
  for (Eigen::Index s = 0; s < right.cols(); ++s) right.col(s) *= w[static_cast<std::size_t>(s)];
  return eig.extrapolated * right;
}

Eigen::VectorXd restrict(const Eigen::VectorXd& x, const Subdomain& O) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(O.size()));
  for (std::size_t a = 0; a < O.size(); ++a) {
    out(static_cast<Eigen::Index>(a)) = x(static_cast<Eigen::Index>(O.grid_indices()[a]));
  }
  return out;
}

}  // namespace

const char* to_string(Strategy strategy) {
  return strategy == Strategy::app3 ? "app3" : "greedy-band";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "greedy-band") return Strategy::greedy_band;
  if (text == "app3") return Strategy::app3;
  throw InputError("unknown strategy '" + std::string(text) + "' (expected greedy-band or app3)");
}

std::vector<unsigned char> reachable_from(const Subdomain& W, const CovarianceEstimate& cov) {
  std::vector<unsigned char> out(cov.grid().size(), 0);
  for (std::size_t r = 0; r < out.size(); ++r) {
    bool ok = true;
    for (auto s : W.grid_indices()) {
      if (!cov.estimable(r, s)) {
        ok = false;
        break;
      }
    }
    out[r] = ok ? 1 : 0;
  }
  return out;
}

Subdomain choose_next_interval(const std::vector<unsigned char>& coverage,
                               const CovarianceEstimate& cov, Strategy strategy,
                               std::size_t step,
                               const std::vector<unsigned char>* first_coverage) {
  const auto& grid = cov.grid();
  if (coverage.size() != grid.size()) throw InputError("coverage does not match the grid");
  if (full(coverage)) throw InputError("coverage already spans the domain");
  const auto run = longest_run(coverage);
  if (!run) throw InputError("coverage is empty");
  const std::size_t L = grid.size();

  if (strategy == Strategy::app3) {
    const auto base_run = first_coverage ? longest_run(*first_coverage) : run;
    const Run b = base_run ? *base_run : *run;
    std::size_t mid = grid.nearest(0.5 * (grid[b.lo] + grid[b.hi]));
    mid = std::clamp(mid, b.lo, b.hi);
    if (step % 2 == 0) {
      while (mid < b.hi && !block_estimable(cov, mid, b.hi)) ++mid;
      return index_range(mid, b.hi, grid);
    }
    while (mid > b.lo && !block_estimable(cov, b.lo, mid)) --mid;
    return index_range(b.lo, mid, grid);
  }

  struct Candidate {
    std::size_t lo;
    std::size_t hi;
    double score;
    double width;
  };
  std::optional<Candidate> best;
  auto consider = [&](const Candidate& c) {
    constexpr double tol = 1e-12;
    if (!best || c.score > best->score + tol ||
        (std::abs(c.score - best->score) <= tol && c.width > best->width + tol)) {
      best = c;
    }
  };

  if (run->hi + 1 < L) {
    for (std::size_t s = run->hi + 1; s-- > run->lo;) {
      if (!block_estimable(cov, s, run->hi)) break;
      std::size_t r = run->hi + 1;
      while (r < L && row_reaches(cov, r, s, run->hi)) ++r;
      if (r == run->hi + 1) continue;
      const double extension = grid[r - 1] - grid[run->hi];
      const double width = grid[run->hi] - grid[s];
      consider({s, run->hi, std::min(width, extension), width});
    }
  }
  if (run->lo > 0) {
    for (std::size_t e = run->lo; e <= run->hi; ++e) {
      if (!block_estimable(cov, run->lo, e)) break;
      std::size_t r = run->lo;
      while (r > 0 && row_reaches(cov, r - 1, run->lo, e)) --r;
      if (r == run->lo) continue;
      const double extension = grid[run->lo] - grid[r];
      const double width = grid[e] - grid[run->lo];
      consider({run->lo, e, std::min(width, extension), width});
    }
  }
  if (!best) return index_range(run->lo, run->hi, grid);
  return index_range(best->lo, best->hi, grid);
}

ReconstructedCurve iterative_reconstruct(const Curve& curve, const ReconstructionModel& model,
                                         Method method, TruncationSelector& selector,
                                         const IterationPlan& plan) {
  if (method == Method::pace || method == Method::kraus) {
    throw InputError("iterative reconstruction supports ano, anoce, ayes and ayesce");
  }
  if (plan.r_max < 1) throw InputError("r_max must be at least 1");
  const auto& grid = model.grid();
  const auto& cov = model.covariance();

  ReconstructedCurve out =
      reconstruct_with(CurveInput::from_curve(curve, grid), model, method, selector);
  std::vector<unsigned char> covered(grid.size(), 0);
  for (std::size_t r = 0; r < grid.size(); ++r) {
    covered[r] = std::isfinite(out.values[r]) ? 1 : 0;
    if (out.provenance[r].kind == PointKind::reconstructed) out.provenance[r].iteration = 1;
  }
  const auto first = covered;
  const Method later = integral_counterpart(method);

  std::size_t idle = 0;
  bool stalled = false;
  std::size_t step = 2;
  for (; step <= plan.r_max && !full(covered); ++step) {
    const Subdomain W = plan.steps.size() + 2 > step
                            ? plan.steps[step - 2]
                            : choose_next_interval(covered, cov, plan.strategy, step, &first);
    for (auto r : W.grid_indices()) {
      if (!covered[r]) throw InputError("plan step leaves the covered region");
    }
    CurveInput pseudo{curve.id(), {}, W, true};
    for (auto r : W.grid_indices()) pseudo.points.push_back({grid[r], out.values[r]});

    std::size_t added = 0;
    try {
      const auto next = reconstruct_with(pseudo, model, later, selector);
      for (std::size_t r = 0; r < grid.size(); ++r) {
        if (covered[r] || !std::isfinite(next.values[r])) continue;
        out.values[r] = next.values[r];
        out.provenance[r] = {PointKind::reconstructed, static_cast<int>(step)};
        covered[r] = 1;
        ++added;
      }
    } catch (const ComputationError& e) {
      out.diagnostics.push_back("step " + std::to_string(step) + " failed: " + e.what());
    }
    idle = added == 0 ? idle + 1 : 0;
    // app3 alternates sides, so one idle step is not yet a stall.
    if (idle >= (plan.strategy == Strategy::app3 && plan.steps.empty() ? 2u : 1u)) {
      out.diagnostics.push_back("coverage stalled at r = " + std::to_string(step));
      stalled = true;
      break;
    }
  }
  if (!stalled && !full(covered) && plan.r_max > 1) {
    out.diagnostics.push_back("coverage incomplete after r_max = " + std::to_string(plan.r_max) +
                              " steps");
  }
  return out;
}

AccumulationReport check_error_accumulation(const AccumulationConfig& config) {
  if (config.replications < 2) throw InputError("need at least two replications");
  if (!(config.band > 0.0)) throw InputError("band must be positive");
  const DgpProcess process(config.dgp);
  const DomainGrid grid(0.0, 1.0, config.grid_size);
  auto gamma = [&](double u, double v) { return process.covariance(u, v); };
  const double band = config.band;
  const auto full_cov = CovarianceEstimate::from_function(grid, gamma);
  const auto band_cov = CovarianceEstimate::from_function(
      grid, gamma, [band](double u, double v) { return std::abs(u - v) <= band + 1e-12; });

  const Subdomain O1({config.first}, grid);
  auto coverage = reachable_from(O1, band_cov);
  for (auto r : O1.grid_indices()) coverage[r] = 1;
  const Subdomain O2 = choose_next_interval(coverage, band_cov, Strategy::greedy_band);
  const auto reach2 = reachable_from(O2, band_cov);

  const auto e1b = analyse_subdomain(band_cov, O1, config.lambda_floor);
  const auto e2b = analyse_subdomain(band_cov, O2, config.lambda_floor);
  const auto e1f = analyse_subdomain(full_cov, O1, config.lambda_floor);
  const auto e2f = analyse_subdomain(full_cov, O2, config.lambda_floor);
  const Eigen::MatrixXd op1b = operator_matrix(e1b);
  const Eigen::MatrixXd op2b = operator_matrix(e2b);
  const Eigen::MatrixXd op1f = operator_matrix(e1f);
  const Eigen::MatrixXd op2f = operator_matrix(e2f);

  std::vector<std::size_t> targets;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (reach2[r] && !coverage[r]) targets.push_back(r);
  }

  const auto T = targets.size();
  std::vector<double> s2(T, 0.0), sa(T, 0.0), sb(T, 0.0), sd(T, 0.0), sdd(T, 0.0);
  const auto L = static_cast<Eigen::Index>(grid.size());
  for (std::size_t b = 0; b < config.replications; ++b) {
    auto rng = make_stream(config.seed, kTagAccumulation, b);
    const auto coef = process.draw_coefficients(rng);
    Eigen::VectorXd x(L);
    for (Eigen::Index r = 0; r < L; ++r) {
      const double u = grid[static_cast<std::size_t>(r)];
      x(r) = process.evaluate(coef, u) - process.mean(u);
    }
    const Eigen::VectorXd x1 = restrict(x, O1);
    // Step 1 result: the curve on O_1, its reconstruction on the reached points.
    Eigen::VectorXd tilde = x;
    const Eigen::VectorXd step1 = op1b * x1;
    for (Eigen::Index r = 0; r < L; ++r) {
      if (coverage[static_cast<std::size_t>(r)] && !O1.contains_index(static_cast<std::size_t>(r))) {
        tilde(r) = step1(r);
      }
    }
    const Eigen::VectorXd tilde2 = restrict(tilde, O2);
    const Eigen::VectorXd x2 = restrict(x, O2);
    for (std::size_t t = 0; t < T; ++t) {
      const auto r = static_cast<Eigen::Index>(targets[t]);
      const double e2 = std::pow(x(r) - op2b.row(r).dot(tilde2), 2);
      const double ea = std::pow(x(r) - op2f.row(r).dot(x2), 2);
      const double eb = std::pow(x(r) - op1f.row(r).dot(x1), 2);
      const double d = e2 - ea - eb;
      s2[t] += e2;
      sa[t] += ea;
      sb[t] += eb;
      sd[t] += d;
      sdd[t] += d * d;
    }
  }

  AccumulationReport report{O2, {}, 0.0};
  const double N = static_cast<double>(config.replications);
  std::size_t holding = 0;
  for (std::size_t t = 0; t < T; ++t) {
    const double mean_d = sd[t] / N;
    const double var_d = std::max(0.0, (sdd[t] - N * mean_d * mean_d) / (N - 1.0));
    const double se = std::sqrt(var_d / N);
    AccumulationPoint p{grid[targets[t]], s2[t] / N, sa[t] / N, sb[t] / N, se,
                        mean_d <= 2.0 * se + 1e-12 * (sa[t] + sb[t] + s2[t]) / N};
    holding += p.holds ? 1 : 0;
    report.points.push_back(p);
  }
  report.fraction_holding = T == 0 ? 1.0 : static_cast<double>(holding) / static_cast<double>(T);
  return report;
}

}  // namespace pofd
