#include "pofd/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pofd/error.hpp"

namespace pofd {

namespace {

std::string header(const ConfigEntries& config) { return config_comment(config) + "\n"; }

}  // namespace

std::string config_comment(const ConfigEntries& config) {
  std::string out = "# config:";
  for (const auto& [key, value] : config) out += " " + key + "=" + value;
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw InputError("cannot write '" + path.string() + "'");
}

std::string mean_csv(const MeanEstimate& mean, const ConfigEntries& config) {
  std::string out = header(config) + "u,mean\n";
  for (std::size_t r = 0; r < mean.grid.size(); ++r) {
    out += format_number(mean.grid[r]) + "," + format_number(mean.values[r]) + "\n";
  }
  return out;
}

std::string covariance_csv(const CovarianceEstimate& cov, const ConfigEntries& config) {
  const auto& grid = cov.grid();
  std::string out = header(config) + "u,v,covariance,estimable\n";
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (std::size_t s = 0; s < grid.size(); ++s) {
      const bool ok = cov.estimable(r, s);
      out += format_number(grid[r]) + "," + format_number(grid[s]) + "," +
             (ok ? format_number(cov(r, s)) : std::string("NA")) + "," + (ok ? "1" : "0") + "\n";
    }
  }
  return out;
}

std::string eigensystem_csv(const EigenSystem& eig, const DomainGrid& grid,
                            const ConfigEntries& config) {
  const auto K = eig.available();
  std::string out = header(config) + "u";
  for (std::size_t k = 0; k < K; ++k) out += ",phi_" + std::to_string(k + 1);
  out += "\nlambda";
  for (double l : eig.eigenvalues) out += "," + format_number(l);
  out += "\n";
  for (std::size_t r = 0; r < grid.size(); ++r) {
    out += format_number(grid[r]);
    for (std::size_t k = 0; k < K; ++k) {
      out += "," + format_number(eig.extrapolated(static_cast<Eigen::Index>(r),
                                                  static_cast<Eigen::Index>(k)));
    }
    out += "\n";
  }
  return out;
}

std::string scores_csv(const std::vector<ScoreVector>& scores, const ConfigEntries& config) {
  std::string out = header(config) + "curve_id,k,value,method\n";
  for (const auto& s : scores) {
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      out += s.curve_id + "," + std::to_string(k + 1) + "," + format_number(s.values[k]) + "," +
             to_string(s.method) + "\n";
    }
  }
  return out;
}

std::string reconstructions_csv(const std::vector<ReconstructedCurve>& curves,
                                const ConfigEntries& config) {
  std::string out = header(config) + "curve_id,u,value,provenance,error_variance\n";
  for (const auto& c : curves) {
    for (std::size_t r = 0; r < c.grid.size(); ++r) {
      out += c.curve_id + "," + format_number(c.grid[r]) + "," + format_number(c.values[r]) + "," +
             to_string(c.provenance[r]) + "," +
             (c.error_variance ? format_number((*c.error_variance)[r]) : std::string("NA")) +
             "\n";
    }
  }
  return out;
}

std::string reconstructions_json(const std::vector<ReconstructedCurve>& curves,
                                 const ConfigEntries& config) {
  nlohmann::ordered_json j;
  auto& cfg = j["config"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : config) cfg[key] = value;
  auto& arr = j["curves"] = nlohmann::ordered_json::array();
  for (const auto& c : curves) {
    nlohmann::ordered_json e;
    e["curve_id"] = c.curve_id;
    e["method"] = to_string(c.method);
    e["K"] = c.K_used;
    e["complete"] = c.complete();
    std::size_t non_estimable = 0;
    for (const auto& t : c.provenance) non_estimable += t.kind == PointKind::non_estimable;
    e["non_estimable_points"] = non_estimable;
    e["diagnostics"] = c.diagnostics;
    arr.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::string study_table_csv(const StudyReport& report, const ConfigEntries& config) {
  std::ostringstream out;
  out << header(config) << "Method,MSE_ratio,MSE,Bias²,Var\n";
  out.setf(std::ios::fixed);
  for (const auto& r : report.rows) {
    out.precision(2);
    out << label(r.method) << "," << r.mse_ratio << ",";
    out.precision(6);
    out << r.mse << "," << r.bias2 << "," << r.var << "\n";
  }
  return out.str();
}

std::string study_targets_csv(const StudyReport& report, const ConfigEntries& config) {
  const DomainGrid grid(0.0, 1.0, report.config.grid_size);
  std::string out = header(config) + "method,target,u,truth,mean_reconstruction\n";
  for (std::size_t p = 0; p < report.mean_reconstructions.size(); ++p) {
    const auto& per_target = report.mean_reconstructions[p];
    for (std::size_t l = 0; l < per_target.size(); ++l) {
      if (per_target[l].empty()) continue;
      for (std::size_t r = 0; r < grid.size(); ++r) {
        out += std::string(label(report.methods[p])) + "," + std::to_string(l + 1) + "," +
               format_number(grid[r]) + "," + format_number(report.truths[l][r]) + "," +
               format_number(per_target[l][r]) + "\n";
      }
    }
  }
  return out;
}

std::string gcv_csv(Method method, const GcvResult& result, const ConfigEntries& config) {
  std::string out = header(config) + "method,K,RSS,GCV,selected\n";
  for (std::size_t c = 0; c < result.candidates.size(); ++c) {
    out += std::string(to_string(method)) + "," + std::to_string(result.candidates[c]) + "," +
           format_number(result.rss[c]) + "," + format_number(result.gcv[c]) + "," +
           (result.candidates[c] == result.K ? "1" : "0") + "\n";
  }
  return out;
}

std::string ridge_gcv_csv(const RidgeGcvResult& result, const ConfigEntries& config) {
  std::string out = header(config) + "method,rho,RSS,GCV,selected\n";
  for (std::size_t c = 0; c < result.candidates.size(); ++c) {
    out += "kraus," + format_number(result.candidates[c]) + "," + format_number(result.rss[c]) +
           "," + format_number(result.gcv[c]) + "," +
           (result.candidates[c] == result.rho ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace pofd
