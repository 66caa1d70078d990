#include "pofd/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pofd/dataset.hpp"
#include "pofd/error.hpp"
#include "pofd/io.hpp"
#include "pofd/iterative.hpp"
#include "pofd/parallel.hpp"
#include "pofd/reconstruct.hpp"
#include "pofd/simulation.hpp"

namespace pofd::cli {

namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string normalize_key(std::string key) {
  if (key.rfind("--", 0) == 0) key.erase(0, 2);
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

double parse_double(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(value)) {
    throw InputError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

struct Common {
  std::string config;
  unsigned threads = 1;
  std::string error_json;
};

struct FitFlags {
  std::string input;
  double lower = 0.0;
  double upper = 1.0;
  std::size_t grid_size = kDefaultGridSize;
  double h_x = 0.0;
  double h_mu = 0.0;
  double h_gamma = 0.0;
  std::size_t min_pairs = kDefaultMinPairs;
  double noise_trim = 0.25;
  double lambda_floor = kDefaultLambdaFloor;
  std::string quadrature = "riemann";

  CLI::Option* lower_opt = nullptr;
  CLI::Option* upper_opt = nullptr;
  CLI::Option* h_x_opt = nullptr;
  CLI::Option* h_mu_opt = nullptr;
  CLI::Option* h_gamma_opt = nullptr;
};

struct TruncationFlags {
  std::string K = "gcv";
  double fve = 0.99;
  double rho = 0.0;
  CLI::Option* rho_opt = nullptr;
};

struct FitCmd {
  FitFlags fit;
  std::string out_dir = ".";
  bool emit_scores = false;
  std::size_t scores_k = 3;
};

struct ReconstructCmd {
  FitFlags fit;
  TruncationFlags truncation;
  std::string targets;
  std::string method = "ayes";
  bool iterative = false;
  std::string strategy = "greedy-band";
  std::size_t r_max = 5;
  bool error_variance = false;
  std::string out = "reconstructions.csv";
  std::string json;
};

struct SimulateCmd {
  int dgp = 1;
  std::size_t n = 50;
  std::size_t m = 15;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  std::size_t targets = 50;
  std::size_t grid_size = kDefaultGridSize;
  double amplitude = 1.0;
  bool shared_scores = false;
  std::vector<std::string> methods;
  TruncationFlags truncation;
  std::string out = "table.csv";
  std::string targets_out;
};

struct GcvCmd {
  FitFlags fit;
  std::string method = "ayes";
  std::vector<std::string> observed;
  std::string curve;
  std::vector<std::size_t> candidates;
  double margin = 0.1;
  std::string out = "gcv.csv";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config,
                  "Flat key=value file mirroring the flags; command-line flags win");
  sub->add_option("--threads", c.threads, "Worker threads (0 = all cores); never changes output");
  sub->add_option("--error-json", c.error_json, "Write a machine-readable error report here");
}

void add_fit_flags(CLI::App* sub, FitFlags& f) {
  sub->add_option("--input", f.input, "Observations CSV with header curve_id,u,y");
  f.lower_opt = sub->add_option("--domain-lower", f.lower, "Domain lower end (default: smallest u)")
                    ->default_str("auto");
  f.upper_opt = sub->add_option("--domain-upper", f.upper, "Domain upper end (default: largest u)")
                    ->default_str("auto");
  sub->add_option("--grid-size", f.grid_size, "Number of grid points L")
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  f.h_x_opt = sub->add_option("--h-x", f.h_x, "Curve smoother bandwidth (default: rate rule)")
                  ->check(CLI::PositiveNumber)
                  ->default_str("auto");
  f.h_mu_opt = sub->add_option("--h-mu", f.h_mu, "Mean bandwidth (default: rate rule)")
                   ->check(CLI::PositiveNumber)
                   ->default_str("auto");
  f.h_gamma_opt =
      sub->add_option("--h-gamma", f.h_gamma, "Covariance bandwidth (default: rate rule)")
          ->check(CLI::PositiveNumber)
          ->default_str("auto");
  sub->add_option("--min-pairs", f.min_pairs, "Raw pairs needed for an estimable covariance cell")
      ->check(CLI::PositiveNumber);
  sub->add_option("--noise-trim", f.noise_trim, "Trimmed fraction at each end for the noise variance")
      ->check(CLI::Range(0.0, 0.49));
  sub->add_option("--lambda-floor", f.lambda_floor, "Relative eigenvalue floor")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--scores-quadrature", f.quadrature, "Integral score rule")
      ->check(CLI::IsMember({"riemann", "trapezoid"}));
}

void add_truncation_flags(CLI::App* sub, TruncationFlags& t) {
  sub->add_option("--K", t.K, "Truncation: an integer, gcv or fve");
  sub->add_option("--fve-threshold", t.fve, "Variance fraction for --K fve")
      ->check(CLI::Range(0.0, 1.0));
  t.rho_opt = sub->add_option("--rho", t.rho, "Fixed KRAUS ridge parameter (default: GCV)")
                  ->check(CLI::PositiveNumber)
                  ->default_str("gcv");
}

TruncationPolicy truncation_policy(const TruncationFlags& t) {
  TruncationPolicy policy;
  if (t.K == "gcv") {
    policy.kind = TruncationKind::gcv;
  } else if (t.K == "fve") {
    policy.kind = TruncationKind::fve;
    policy.fve_threshold = t.fve;
  } else {
    std::size_t K = 0;
    const auto res = std::from_chars(t.K.data(), t.K.data() + t.K.size(), K);
    if (res.ec != std::errc() || res.ptr != t.K.data() + t.K.size()) {
      throw InputError("--K must be an integer, gcv or fve (got '" + t.K + "')");
    }
    policy.kind = TruncationKind::fixed;
    policy.K = K;
  }
  if (t.rho_opt->count() > 0) policy.rho = t.rho;
  return policy;
}

FunctionalDataset load_input(const FitFlags& f) {
  if (f.input.empty()) throw InputError("--input is required");
  std::optional<Interval> domain;
  const bool has_lower = f.lower_opt->count() > 0;
  const bool has_upper = f.upper_opt->count() > 0;
  if (has_lower != has_upper) throw InputError("--domain-lower and --domain-upper go together");
  if (has_lower) {
    if (!(f.lower < f.upper)) throw InputError("domain lower end must lie below the upper end");
    domain = Interval{f.lower, f.upper};
  }
  return load_dataset(f.input, domain, f.grid_size);
}

FitOptions fit_options(const FunctionalDataset& data, const FitFlags& f, unsigned threads) {
  FitOptions opts;
  if (f.h_x_opt->count() + f.h_mu_opt->count() + f.h_gamma_opt->count() > 0) {
    Bandwidths b = default_bandwidths(data);
    if (f.h_x_opt->count() > 0) b.curve = f.h_x;
    if (f.h_mu_opt->count() > 0) b.mean = f.h_mu;
    if (f.h_gamma_opt->count() > 0) b.covariance = f.h_gamma;
    b.validate(data.domain.width());
    opts.bandwidths = b;
  }
  opts.min_pairs = f.min_pairs;
  opts.noise_trim = f.noise_trim;
  opts.lambda_floor = f.lambda_floor;
  opts.quadrature =
      f.quadrature == "trapezoid" ? ScoreQuadrature::trapezoid : ScoreQuadrature::riemann;
  opts.threads = threads;
  return opts;
}

// Every option of the subcommand with its resolved value, in declaration order.
// Options that cannot change numeric output are left out.
ConfigEntries resolved_config(const CLI::App& sub) {
  ConfigEntries entries{{"command", sub.get_name()}};
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name == "threads" || name == "error-json") continue;
    std::string value;
    if (opt->get_expected_min() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    entries.emplace_back(name, value.empty() ? "-" : value);
  }
  return entries;
}

void append_model(ConfigEntries& cfg, const ReconstructionModel& model) {
  cfg.emplace_back("resolved-h-x", format_number(model.bandwidths().curve));
  cfg.emplace_back("resolved-h-mu", format_number(model.bandwidths().mean));
  cfg.emplace_back("resolved-h-gamma", format_number(model.bandwidths().covariance));
  cfg.emplace_back("resolved-sigma2", format_number(model.noise().sigma2));
}

void apply_config(CLI::App& sub, const std::string& path) {
  for (const auto& [key, value] : read_config_file(path)) {
    CLI::Option* opt = key == "help" || key == "config" ? nullptr : sub.get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw InputError("unknown config key '" + key + "' in '" + path + "'");
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void print_fit_summary(std::ostream& out, const FunctionalDataset& data,
                       const ReconstructionModel& model) {
  const auto& b = model.bandwidths();
  out << "curves: " << data.curves.size() << " (complete: " << classify_complete(data).size()
      << ")\n";
  out << "domain: [" << format_number(data.domain.lower) << ", "
      << format_number(data.domain.upper) << "], grid L=" << model.grid().size() << "\n";
  out << "bandwidths: h_x=" << format_number(b.curve) << " h_mu=" << format_number(b.mean)
      << " h_gamma=" << format_number(b.covariance) << "\n";
  out << "sigma2: " << format_number(model.noise().sigma2) << "\n";
  std::ostringstream pct;
  pct << std::fixed << std::setprecision(1) << 100.0 * model.covariance().coverage();
  out << "mask coverage: " << pct.str() << "%\n";
  if (model.full_domain_estimable()) {
    out << "K_available: " << model.full_eigensystem()->available() << "\n";
  } else {
    out << "K_available: NA (covariance not estimable on the full domain)\n";
  }
  for (const auto& d : model.diagnostics()) out << "note: " << d << "\n";
}

int cmd_fit(CLI::App& sub, const Common& common, const FitCmd& cmd, std::ostream& out,
            std::ostream& err) {
  const auto data = load_input(cmd.fit);
  const auto opts = fit_options(data, cmd.fit, resolve_threads(common.threads));
  const auto model = ReconstructionModel::fit(data, opts);
  auto cfg = resolved_config(sub);
  append_model(cfg, model);

  const fs::path dir(cmd.out_dir);
  std::vector<fs::path> written;
  auto emit = [&](const fs::path& name, const std::string& content) {
    write_file(dir / name, content);
    written.push_back(dir / name);
  };
  emit("mean.csv", mean_csv(model.mean(), cfg));
  emit("covariance.csv", covariance_csv(model.covariance(), cfg));
  emit("dataset.json", dataset_summary_json(data));
  if (model.full_domain_estimable()) {
    emit("eigensystem.csv", eigensystem_csv(*model.full_eigensystem(), model.grid(), cfg));
  } else {
    err << "warning: eigensystem.csv not written; covariance not estimable on the full domain\n";
  }

  if (cmd.emit_scores) {
    std::vector<ScoreVector> scores;
    for (const auto& curve : data.curves) {
      const auto input = CurveInput::from_curve(curve, model.grid());
      std::shared_ptr<const EigenSystem> eig;
      try {
        eig = model.eigensystem(input.observed);
      } catch (const ComputationError& e) {
        err << "warning: no scores for curve '" << curve.id() << "': " << e.what() << "\n";
        continue;
      }
      const auto K = std::min(cmd.scores_k, eig->available());
      scores.push_back(integral_scores(curve, *eig, model.mean(), K, opts.quadrature));
      try {
        scores.push_back(
            ce_scores(curve, *eig, model.covariance(), model.noise(), model.mean(), K));
      } catch (const ComputationError& e) {
        err << "warning: no CE scores for curve '" << curve.id() << "': " << e.what() << "\n";
      }
    }
    emit("scores.csv", scores_csv(scores, cfg));
  }

  print_fit_summary(out, data, model);
  for (const auto& p : written) out << "wrote " << p.string() << "\n";
  return kOk;
}

int cmd_reconstruct(CLI::App& sub, const Common& common, const ReconstructCmd& cmd,
                    std::ostream& out, std::ostream& err) {
  const Method method = parse_method(cmd.method);
  const Strategy strategy = parse_strategy(cmd.strategy);
  const auto policy = truncation_policy(cmd.truncation);
  if (cmd.iterative && (method == Method::pace || method == Method::kraus)) {
    throw InputError("--iterative supports ano, anoce, ayes and ayesce");
  }
  if (cmd.iterative && cmd.error_variance) {
    throw InputError("--error-variance is not available with --iterative");
  }
  if (cmd.r_max < 1) throw InputError("--rmax must be at least 1");

  const auto data = load_input(cmd.fit);
  const auto opts = fit_options(data, cmd.fit, resolve_threads(common.threads));
  std::optional<FunctionalDataset> targets;
  if (!cmd.targets.empty()) targets = load_dataset(cmd.targets, data.domain, cmd.fit.grid_size);
  const auto& curves = targets ? targets->curves : data.curves;

  const auto model = ReconstructionModel::fit(data, opts);
  TruncationSelector selector(model, data, policy);
  IterationPlan plan;
  plan.strategy = strategy;
  plan.r_max = cmd.r_max;

  std::vector<ReconstructedCurve> results;
  results.reserve(curves.size());
  std::size_t partial = 0;
  std::size_t failed = 0;
  std::string first_failure;
  for (const auto& curve : curves) {
    try {
      if (cmd.iterative) {
        results.push_back(iterative_reconstruct(curve, model, method, selector, plan));
      } else {
        results.push_back(reconstruct_with(CurveInput::from_curve(curve, model.grid()), model,
                                           method, selector, cmd.error_variance));
      }
    } catch (const ComputationError& e) {
      const std::string message = "curve '" + curve.id() + "': " + e.what();
      err << "warning: " << message << "\n";
      if (failed++ == 0) first_failure = message;
      ReconstructedCurve blank{curve.id(), model.grid(), {}, {}, 0, method, std::nullopt, {}};
      blank.values.assign(model.grid().size(), std::numeric_limits<double>::quiet_NaN());
      blank.provenance.assign(model.grid().size(), PointTag{PointKind::non_estimable, 0});
      blank.diagnostics.push_back(std::string("failed: ") + e.what());
      results.push_back(std::move(blank));
    }
    if (!results.back().complete()) ++partial;
  }
  if (!curves.empty() && failed == curves.size()) {
    throw ComputationError("every curve failed; first: " + first_failure);
  }

  auto cfg = resolved_config(sub);
  append_model(cfg, model);
  write_file(cmd.out, reconstructions_csv(results, cfg));
  if (!cmd.json.empty()) write_file(cmd.json, reconstructions_json(results, cfg));

  if (partial > 0) {
    err << "warning: " << partial << " of " << results.size()
        << " curves have non-estimable points";
    err << (cmd.iterative ? " after " + std::to_string(cmd.r_max) + " iterations\n"
                          : "; rerun with --iterative\n");
  }
  out << "reconstructed " << results.size() << " curves with " << label(method) << "\n";
  out << "wrote " << cmd.out << "\n";
  if (!cmd.json.empty()) out << "wrote " << cmd.json << "\n";
  return kOk;
}

std::vector<Method> default_methods(int dgp) {
  if (dgp <= 2) return {Method::ayesce, Method::ayes, Method::anoce, Method::ano, Method::pace};
  return {Method::ayes, Method::pace, Method::ano, Method::kraus};
}

int cmd_simulate(CLI::App& sub, const Common& common, const SimulateCmd& cmd, std::ostream& out,
                 std::ostream&) {
  DgpConfig config;
  config.dgp = cmd.dgp;
  config.n = cmd.n;
  config.m = cmd.m;
  config.seed = cmd.seed;
  config.replications = cmd.reps;
  config.n_targets = cmd.targets;
  config.grid_size = cmd.grid_size;
  config.score_amplitude = cmd.amplitude;
  config.independent_scores = !cmd.shared_scores;
  config.validate();

  std::vector<Method> methods;
  for (const auto& m : cmd.methods) methods.push_back(parse_method(m));
  if (methods.empty()) methods = default_methods(cmd.dgp);

  StudyOptions options;
  options.truncation = truncation_policy(cmd.truncation);
  options.threads = resolve_threads(common.threads);
  const auto report = run_study(config, methods, options);

  const auto cfg = resolved_config(sub);
  write_file(cmd.out, study_table_csv(report, cfg));
  if (!cmd.targets_out.empty()) write_file(cmd.targets_out, study_targets_csv(report, cfg));

  out << std::left << std::setw(8) << "Method" << std::right << std::setw(11) << "MSE_ratio"
      << std::setw(12) << "MSE" << std::setw(12) << "Bias2" << std::setw(12) << "Var"
      << std::setw(10) << "failures" << "\n";
  out << std::fixed;
  for (const auto& r : report.rows) {
    out << std::left << std::setw(8) << label(r.method) << std::right << std::setprecision(2)
        << std::setw(11) << r.mse_ratio << std::setprecision(4) << std::setw(12) << r.mse
        << std::setw(12) << r.bias2 << std::setw(12) << r.var << std::setw(10) << r.failures
        << "\n";
  }
  out << std::defaultfloat;
  for (const auto& d : report.diagnostics) out << "note: " << d << "\n";
  out << "runtime: " << std::setprecision(3) << report.runtime_seconds << " s\n";
  out << "wrote " << cmd.out << "\n";
  if (!cmd.targets_out.empty()) out << "wrote " << cmd.targets_out << "\n";
  return kOk;
}

Subdomain observed_subdomain(const GcvCmd& cmd, const FunctionalDataset& data,
                             const DomainGrid& grid) {
  if (!cmd.observed.empty() && !cmd.curve.empty()) {
    throw InputError("--observed and --curve are mutually exclusive");
  }
  if (!cmd.curve.empty()) {
    for (const auto& c : data.curves) {
      if (c.id() == cmd.curve) return CurveInput::from_curve(c, grid).observed;
    }
    throw InputError("no curve '" + cmd.curve + "' in the input");
  }
  if (cmd.observed.empty()) throw InputError("gcv-report needs --observed or --curve");
  std::vector<Interval> intervals;
  for (const auto& text : cmd.observed) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InputError("--observed expects a:b (got '" + text + "')");
    intervals.push_back({parse_double(text.substr(0, colon), "interval end"),
                         parse_double(text.substr(colon + 1), "interval end")});
  }
  return Subdomain(std::move(intervals), grid);
}

int cmd_gcv(CLI::App& sub, const Common& common, const GcvCmd& cmd, std::ostream& out,
            std::ostream&) {
  const Method method = parse_method(cmd.method);
  if (!(cmd.margin > 0.0 && cmd.margin < 0.5)) throw InputError("--margin must lie in (0, 0.5)");
  const auto data = load_input(cmd.fit);
  const auto opts = fit_options(data, cmd.fit, resolve_threads(common.threads));
  const auto model = ReconstructionModel::fit(data, opts);
  const auto O = observed_subdomain(cmd, data, model.grid());

  auto cfg = resolved_config(sub);
  append_model(cfg, model);
  out << std::setprecision(6);
  if (method == Method::kraus) {
    const auto res = select_ridge_gcv(model, data, O, cmd.margin);
    write_file(cmd.out, ridge_gcv_csv(res, cfg));
    out << "rho           RSS           GCV\n";
    for (std::size_t c = 0; c < res.candidates.size(); ++c) {
      out << std::left << std::setw(14) << res.candidates[c] << std::setw(14) << res.rss[c]
          << std::setw(14) << res.gcv[c] << (res.candidates[c] == res.rho ? "*" : "") << "\n";
    }
    out << "selected rho: " << format_number(res.rho) << "\n";
  } else {
    std::optional<std::vector<std::size_t>> candidates;
    if (!cmd.candidates.empty()) candidates = cmd.candidates;
    const auto res = select_truncation_gcv(method, model, data, O, candidates, cmd.margin);
    write_file(cmd.out, gcv_csv(method, res, cfg));
    out << "complete curves used: " << res.complete_used << "\n";
    out << "K    RSS           GCV\n";
    for (std::size_t c = 0; c < res.candidates.size(); ++c) {
      out << std::left << std::setw(5) << res.candidates[c] << std::setw(14) << res.rss[c]
          << std::setw(14) << res.gcv[c] << (res.candidates[c] == res.K ? "*" : "") << "\n";
    }
    out << "selected K: " << res.K << "\n";
  }
  out << "wrote " << cmd.out << "\n";
  return kOk;
}

std::string prescan(const std::vector<std::string>& args, const std::string& flag) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == flag && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind(flag + "=", 0) == 0) return args[i].substr(flag.size() + 1);
  }
  return {};
}

void write_error_json(const std::string& path, int code, const char* kind,
                      const std::string& message) {
  nlohmann::ordered_json j;
  j["exit_code"] = code;
  j["kind"] = kind;
  j["message"] = message;
  write_file(path, j.dump(2) + "\n");
}

}  // namespace

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  std::map<std::string, std::string> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InputError(path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    const auto key = normalize_key(trim(text.substr(0, eq)));
    if (entries.count(key) > 0) {
      throw InputError(path.string() + ":" + std::to_string(number) + ": duplicate key '" + key +
                       "'");
    }
    entries[key] = trim(text.substr(eq + 1));
  }
  return entries;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const std::string error_json = prescan(args, "--error-json");
  auto fail = [&](int code, const char* kind, const std::string& message) {
    err << "error: " << message << "\n";
    if (!error_json.empty()) {
      try {
        write_error_json(error_json, code, kind, message);
      } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
      }
    }
    return code;
  };

  CLI::App app{"Reconstruction of partially observed functional data", "pofd"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Common common;
  FitCmd fit;
  ReconstructCmd rec;
  SimulateCmd sim;
  GcvCmd gcv;

  auto* fit_app = app.add_subcommand("fit", "Estimate mean, covariance, eigensystem and noise");
  add_fit_flags(fit_app, fit.fit);
  fit_app->add_option("--out-dir", fit.out_dir, "Directory for the fitted artifacts");
  fit_app->add_flag("--emit-scores", fit.emit_scores, "Also write per-curve scores");
  fit_app->add_option("--scores-k", fit.scores_k, "Number of scores per curve")
      ->check(CLI::PositiveNumber);
  add_common(fit_app, common);

  auto* rec_app = app.add_subcommand("reconstruct", "Reconstruct the missing parts of curves");
  add_fit_flags(rec_app, rec.fit);
  rec_app->add_option("--targets", rec.targets,
                      "Curves to reconstruct (default: every curve of --input)");
  rec_app->add_option("--method", rec.method, "Reconstruction method")
      ->check(CLI::IsMember({"ano", "anoce", "ayes", "ayesce", "pace", "kraus"}));
  add_truncation_flags(rec_app, rec.truncation);
  rec_app->add_flag("--iterative", rec.iterative, "Complete curves by iterative reconstruction");
  rec_app->add_option("--strategy", rec.strategy, "Interval choice of the iterative algorithm")
      ->check(CLI::IsMember({"greedy-band", "app3"}));
  rec_app->add_option("--rmax", rec.r_max, "Maximal number of iterations");
  rec_app->add_flag("--error-variance", rec.error_variance,
                    "Add the reconstruction error variance column");
  rec_app->add_option("--out", rec.out, "Reconstruction CSV");
  rec_app->add_option("--json", rec.json, "Optional JSON summary");
  add_common(rec_app, common);

  auto* sim_app = app.add_subcommand("simulate", "Monte-Carlo comparison of the methods");
  sim_app->add_option("--dgp", sim.dgp, "Data generating process")->check(CLI::Range(1, 4));
  sim_app->add_option("--n", sim.n, "Curves per replication")->check(CLI::Range(2, 1000000));
  sim_app->add_option("--m", sim.m, "Points per curve (DGP 1 and 2)")
      ->check(CLI::Range(2, 1000000));
  sim_app->add_option("--reps", sim.reps, "Replications")->check(CLI::PositiveNumber);
  sim_app->add_option("--seed", sim.seed, "Master seed");
  sim_app->add_option("--n-targets", sim.targets, "Target curves")->check(CLI::PositiveNumber);
  sim_app->add_option("--grid-size", sim.grid_size, "Number of grid points L")
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  sim_app->add_option("--score-amplitude", sim.amplitude, "Factor on the score deviations")
      ->check(CLI::PositiveNumber);
  sim_app->add_flag("--shared-scores", sim.shared_scores,
                    "One normal draw per curve for all cosine and one for all sine terms");
  sim_app->add_option("--methods", sim.methods, "Comma-separated methods (default per DGP)")
      ->default_str("per-dgp")
      ->delimiter(',')
      ->check(CLI::IsMember({"ano", "anoce", "ayes", "ayesce", "pace", "kraus"}));
  add_truncation_flags(sim_app, sim.truncation);
  sim_app->add_option("--out", sim.out, "Result table CSV");
  sim_app->add_option("--targets-out", sim.targets_out,
                      "Optional CSV of true and mean reconstructed targets");
  add_common(sim_app, common);

  auto* gcv_app = app.add_subcommand("gcv-report", "GCV criterion over truncation candidates");
  add_fit_flags(gcv_app, gcv.fit);
  gcv_app->add_option("--method", gcv.method, "Reconstruction method")
      ->check(CLI::IsMember({"ano", "anoce", "ayes", "ayesce", "pace", "kraus"}));
  gcv_app->add_option("--observed", gcv.observed, "Observed interval a:b (repeat for unions)");
  gcv_app->add_option("--curve", gcv.curve, "Use the observed interval of this curve");
  gcv_app->add_option("--candidates", gcv.candidates, "Comma-separated K candidates")
      ->default_str("all")
      ->delimiter(',');
  gcv_app->add_option("--margin", gcv.margin, "Completeness margin as a fraction of the domain");
  gcv_app->add_option("--out", gcv.out, "GCV table CSV");
  add_common(gcv_app, common);

  std::vector<const char*> argv{"pofd"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    if (!common.config.empty()) apply_config(*active, common.config);
    if (active == fit_app) return cmd_fit(*active, common, fit, out, err);
    if (active == rec_app) return cmd_reconstruct(*active, common, rec, out, err);
    if (active == sim_app) return cmd_simulate(*active, common, sim, out, err);
    return cmd_gcv(*active, common, gcv, out, err);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  } catch (const InputError& e) {
    return fail(kUsage, "input", e.what());
  } catch (const ComputationError& e) {
    return fail(kComputation, "computation", e.what());
  } catch (const std::exception& e) {
    return fail(kComputation, "internal", e.what());
  }
}

}  // namespace pofd::cli
