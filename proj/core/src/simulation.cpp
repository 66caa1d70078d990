#include "pofd/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "pofd/error.hpp"
#include "pofd/parallel.hpp"

namespace pofd {

namespace {

enum StreamTag : std::uint64_t {
  kTagCoefficients = 1,
  kTagFragment = 2,
  kTagPoints = 3,
  kTagNoise = 4,
  kTagTarget = 5,
  kTagTargetPoints = 6,
  kTagTargetNoise = 7,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Interval draw_fragment(int dgp, std::mt19937_64& rng, bool force_partial) {
  if (dgp <= 2) {
    const bool partial = force_partial || uniform(rng, 0.0, 1.0) < 0.5;
    if (!partial) return {0.0, 1.0};
    const double A = uniform(rng, 0.0, 0.45);
    const double B = uniform(rng, 0.55, 1.0);
    return {A, B};
  }
  const bool partial = force_partial || uniform(rng, 0.0, 1.0) < 0.75;
  if (!partial) return {0.0, 1.0};
  if (dgp == 3) {
    const double A = uniform(rng, 0.0, 1.0 / 3.0);
    return {A, A + 0.5};
  }
  const double A = uniform(rng, 0.0, 2.0 / 3.0);
  return {A, A + 1.0 / 3.0};
}

std::vector<ObservationPair> observe(const DgpProcess& process, int dgp, std::size_t m,
                                     const std::vector<double>& coef, const Interval& fragment,
                                     std::mt19937_64& points_rng, std::mt19937_64& noise_rng) {
  std::vector<ObservationPair> pts;
  if (dgp <= 2) {
    std::normal_distribution<double> z(0.0, 1.0);
    pts.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double u = uniform(points_rng, fragment.lower, fragment.upper);
      pts.push_back({u, process.evaluate(coef, u) + process.noise_sd() * z(noise_rng)});
    }
  } else {
    for (int j = 1; j <= 51; ++j) {
      const double u = j / 51.0;
      if (fragment.contains(u)) pts.push_back({u, process.evaluate(coef, u)});
    }
  }
  return pts;
}

std::string padded(char prefix, std::size_t i, int width) {
  std::ostringstream os;
  os << prefix;
  os.width(width);
  os.fill('0');
  os << i;
  return os.str();
}

double integrate_squared(const DomainGrid& grid, const std::vector<double>& a,
                         const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t r = 0; r < a.size(); ++r) d[r] = (a[r] - b[r]) * (a[r] - b[r]);
  return grid.integrate(d);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t i,
                          std::uint64_t j) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ tag);
  s = splitmix64(s ^ i);
  return splitmix64(s ^ j);
}

std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t tag, std::uint64_t i,
                            std::uint64_t j) {
  return std::mt19937_64(derive_seed(master, tag, i, j));
}

void DgpConfig::validate() const {
  if (dgp < 1 || dgp > 4) throw InputError("dgp must be 1, 2, 3 or 4");
  if (n < 2) throw InputError("n must be at least 2");
  if (dgp <= 2 && m < 2) throw InputError("m must be at least 2");
  if (replications < 1) throw InputError("replications must be at least 1");
  if (n_targets < 1) throw InputError("n_targets must be at least 1");
  if (grid_size < 2) throw InputError("grid size must be at least 2");
  if (!(score_amplitude > 0.0) || !std::isfinite(score_amplitude)) {
    throw InputError("score amplitude must be positive");
  }
}

DgpProcess::DgpProcess(const DgpConfig& config)
    : dgp_(config.dgp), independent_(config.independent_scores) {
  config.validate();
  const double decay = dgp_ <= 2 ? 5.0 : 1.0;
  basis_scale_ = dgp_ <= 2 ? 1.0 / std::sqrt(5.0) : 1.0;
  noise_sd_ = dgp_ == 1 ? std::sqrt(0.0125) : dgp_ == 2 ? std::sqrt(0.125) : 0.0;
  for (std::size_t k = 1; k <= kTerms; ++k) {
    const double kk = static_cast<double>(k);
    sd_cos_.push_back(config.score_amplitude * std::sqrt(std::exp(-(kk - 1) * (kk - 1) / decay)));
    sd_sin_.push_back(config.score_amplitude * std::sqrt(std::exp(-kk * kk / decay)));
  }
}

double DgpProcess::mean(double u) const {
  const double trend = dgp_ <= 2 ? u : u * u;
  return trend + std::sin(2.0 * std::numbers::pi * u);
}

double DgpProcess::covariance(double u, double v) const {
  const double pi = std::numbers::pi;
  double cc = 0.0;
  double ss = 0.0;
  double cu = 0.0;
  double cv = 0.0;
  double su = 0.0;
  double sv = 0.0;
  for (std::size_t k = 0; k < kTerms; ++k) {
    const double f = static_cast<double>(k + 1) * pi;
    const double c1 = sd_cos_[k] * std::cos(f * u);
    const double c2 = sd_cos_[k] * std::cos(f * v);
    const double s1 = sd_sin_[k] * std::sin(f * u);
    const double s2 = sd_sin_[k] * std::sin(f * v);
    cc += c1 * c2;
    ss += s1 * s2;
    cu += c1;
    cv += c2;
    su += s1;
    sv += s2;
  }
  const double scale2 = basis_scale_ * basis_scale_;
  return independent_ ? scale2 * (cc + ss) : scale2 * (cu * cv + su * sv);
}

std::vector<double> DgpProcess::draw_coefficients(std::mt19937_64& rng) const {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> coef(2 * kTerms);
  if (independent_) {
    for (std::size_t k = 0; k < kTerms; ++k) coef[k] = sd_cos_[k] * z(rng);
    for (std::size_t k = 0; k < kTerms; ++k) coef[kTerms + k] = sd_sin_[k] * z(rng);
  } else {
    const double z1 = z(rng);
    const double z2 = z(rng);
    for (std::size_t k = 0; k < kTerms; ++k) {
      coef[k] = sd_cos_[k] * z1;
      coef[kTerms + k] = sd_sin_[k] * z2;
    }
  }
  return coef;
}

double DgpProcess::evaluate(const std::vector<double>& coefficients, double u) const {
  double x = 0.0;
  for (std::size_t k = 0; k < kTerms; ++k) {
    const double f = static_cast<double>(k + 1) * std::numbers::pi * u;
    x += coefficients[k] * std::cos(f) + coefficients[kTerms + k] * std::sin(f);
  }
  return mean(u) + basis_scale_ * x;
}

DgpSample generate_dgp(const DgpConfig& config, std::size_t replication) {
  config.validate();
  const DgpProcess process(config);
  const auto b = static_cast<std::uint64_t>(replication);
  const Interval domain{0.0, 1.0};

  std::vector<Curve> curves;
  curves.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    auto coef_rng = make_stream(config.seed, kTagCoefficients, b, i);
    auto frag_rng = make_stream(config.seed, kTagFragment, b, i);
    auto pts_rng = make_stream(config.seed, kTagPoints, b, i);
    auto noise_rng = make_stream(config.seed, kTagNoise, b, i);
    const auto coef = process.draw_coefficients(coef_rng);
    const auto fragment = draw_fragment(config.dgp, frag_rng, false);
    curves.emplace_back(padded('c', i + 1, 4),
                        observe(process, config.dgp, config.m, coef, fragment, pts_rng,
                                noise_rng));
  }
  DgpSample sample{FunctionalDataset(std::move(curves), domain, config.grid_size), {}};

  const auto& grid = sample.data.grid;
  for (std::size_t l = 0; l < config.n_targets; ++l) {
    auto latent_rng = make_stream(config.seed, kTagTarget, l);
    auto pts_rng = make_stream(config.seed, kTagTargetPoints, b, l);
    auto noise_rng = make_stream(config.seed, kTagTargetNoise, b, l);
    const auto coef = process.draw_coefficients(latent_rng);
    const auto fragment = draw_fragment(config.dgp, latent_rng, true);
    std::vector<double> truth(grid.size());
    for (std::size_t r = 0; r < grid.size(); ++r) truth[r] = process.evaluate(coef, grid[r]);
    sample.targets.push_back(
        {Curve(padded('t', l + 1, 2),
               observe(process, config.dgp, config.m, coef, fragment, pts_rng, noise_rng)),
         fragment, std::move(truth)});
  }
  return sample;
}

const MethodRow& StudyReport::row(Method method) const {
  for (const auto& r : rows) {
    if (r.method == method) return r;
  }
  throw InputError(std::string("method not in report: ") + to_string(method));
}

StudyReport run_study(const DgpConfig& config, const std::vector<Method>& methods,
                      const StudyOptions& options) {
  config.validate();
  if (methods.empty()) throw InputError("no methods requested");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t R = config.replications;
  const std::size_t T = config.n_targets;
  const std::size_t P = methods.size();
  const unsigned threads = resolve_threads(options.threads);

  // results[b][p][l] is empty when the reconstruction failed.
  std::vector<std::vector<std::vector<std::vector<double>>>> results(
      R, std::vector<std::vector<std::vector<double>>>(P, std::vector<std::vector<double>>(T)));
  std::vector<std::vector<std::vector<std::string>>> errors(
      R, std::vector<std::vector<std::string>>(P, std::vector<std::string>(T)));
  std::vector<std::vector<double>> truths;

  auto one_replication = [&](std::size_t b) {
    const auto sample = generate_dgp(config, b);
    if (b == 0) {
      for (const auto& t : sample.targets) truths.push_back(t.truth);
    }
    FitOptions fit = options.fit;
    if (threads > 1) fit.threads = 1;
    std::optional<ReconstructionModel> model;
    std::string fit_error;
    try {
      model.emplace(ReconstructionModel::fit(sample.data, fit));
    } catch (const Error& e) {
      fit_error = std::string("fit: ") + e.what();
    }
    for (std::size_t p = 0; p < P; ++p) {
      if (!model) {
        for (std::size_t l = 0; l < T; ++l) errors[b][p][l] = fit_error;
        continue;
      }
      TruncationSelector selector(*model, sample.data, options.truncation);
      for (std::size_t l = 0; l < T; ++l) {
        try {
          auto rc = reconstruct_with(
              CurveInput::from_curve(sample.targets[l].observed, model->grid()), *model,
              methods[p], selector);
          if (rc.complete()) {
            results[b][p][l] = std::move(rc.values);
          } else {
            errors[b][p][l] = "non-estimable grid points";
          }
        } catch (const Error& e) {
          errors[b][p][l] = e.what();
        }
      }
    }
  };

  // Replication 0 runs first so target truths are recorded before workers start.
  one_replication(0);
  if (R > 1) parallel_for(R - 1, threads, [&](std::size_t i) { one_replication(i + 1); });

  StudyReport report;
  report.config = config;
  report.methods = methods;
  report.truths = truths;
  const DomainGrid grid(0.0, 1.0, config.grid_size);
  report.mean_reconstructions.assign(P, std::vector<std::vector<double>>(T));

  for (std::size_t p = 0; p < P; ++p) {
    MethodRow row;
    row.method = methods[p];
    std::map<std::string, std::size_t> reasons;
    double bias_sum = 0.0;
    double var_sum = 0.0;
    std::size_t used_targets = 0;
    for (std::size_t l = 0; l < T; ++l) {
      std::vector<double> mean(grid.size(), 0.0);
      std::size_t ok = 0;
      for (std::size_t b = 0; b < R; ++b) {
        if (results[b][p][l].empty()) {
          ++row.failures;
          ++reasons[errors[b][p][l]];
          continue;
        }
        for (std::size_t r = 0; r < grid.size(); ++r) mean[r] += results[b][p][l][r];
        ++ok;
      }
      if (ok == 0) continue;
      for (auto& v : mean) v /= static_cast<double>(ok);
      double var = 0.0;
      for (std::size_t b = 0; b < R; ++b) {
        if (!results[b][p][l].empty()) var += integrate_squared(grid, results[b][p][l], mean);
      }
      bias_sum += integrate_squared(grid, mean, truths[l]);
      var_sum += var / static_cast<double>(ok);
      report.mean_reconstructions[p][l] = std::move(mean);
      ++used_targets;
    }
    const double pairs = static_cast<double>(R * T);
    if (static_cast<double>(row.failures) > options.max_failure_fraction * pairs ||
        used_targets == 0) {
      std::ostringstream msg;
      msg << label(methods[p]) << " failed on " << row.failures << " of " << R * T
          << " (target, replication) pairs";
      for (const auto& [reason, count] : reasons) msg << "; " << count << "x " << reason;
      throw ComputationError(msg.str());
    }
    for (const auto& [reason, count] : reasons) {
      report.diagnostics.push_back(std::string(label(methods[p])) + ": " +
                                   std::to_string(count) + " failures (" + reason + ")");
    }
    row.bias2 = bias_sum / static_cast<double>(used_targets);
    row.var = var_sum / static_cast<double>(used_targets);
    row.mse = row.bias2 + row.var;
    report.rows.push_back(row);
  }

  double best = report.rows.front().mse;
  for (const auto& r : report.rows) best = std::min(best, r.mse);
  for (auto& r : report.rows) r.mse_ratio = best > 0.0 ? r.mse / best : 1.0;
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const MethodRow& l, const MethodRow& r) { return l.mse_ratio < r.mse_ratio; });
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace pofd
