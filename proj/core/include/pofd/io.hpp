#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pofd/eigensystem.hpp"
#include "pofd/iterative.hpp"
#include "pofd/reconstruct.hpp"
#include "pofd/scores.hpp"
#include "pofd/simulation.hpp"
#include "pofd/smoothing.hpp"

namespace pofd {

/// Ordered key/value pairs describing a resolved run configuration.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// "# config: key=value key=value ..." (no trailing newline).
std::string config_comment(const ConfigEntries& config);

/// Shortest round-trip decimal form; "NA" for NaN.
std::string format_number(double value);

/// Writes `content`, creating parent directories. Throws InputError on failure.
void write_file(const std::filesystem::path& path, const std::string& content);

std::string mean_csv(const MeanEstimate& mean, const ConfigEntries& config);
/// Long format u,v,covariance,estimable over the full grid.
std::string covariance_csv(const CovarianceEstimate& cov, const ConfigEntries& config);
/// u,phi_1..phi_K with a leading `lambda` row of eigenvalues.
std::string eigensystem_csv(const EigenSystem& eig, const DomainGrid& grid,
                            const ConfigEntries& config);
std::string scores_csv(const std::vector<ScoreVector>& scores, const ConfigEntries& config);
std::string reconstructions_csv(const std::vector<ReconstructedCurve>& curves,
                                const ConfigEntries& config);
std::string reconstructions_json(const std::vector<ReconstructedCurve>& curves,
                                 const ConfigEntries& config);
/// Method,MSE_ratio,MSE,Bias²,Var
std::string study_table_csv(const StudyReport& report, const ConfigEntries& config);
/// method,target,u,truth,mean_reconstruction
std::string study_targets_csv(const StudyReport& report, const ConfigEntries& config);
/// method,K,RSS,GCV,selected (one row per candidate)
std::string gcv_csv(Method method, const GcvResult& result, const ConfigEntries& config);
std::string ridge_gcv_csv(const RidgeGcvResult& result, const ConfigEntries& config);

}  // namespace pofd
