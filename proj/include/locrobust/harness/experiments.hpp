#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "locrobust/harness/config.hpp"
#include "locrobust/harness/csv.hpp"

namespace locrobust::harness {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One estimator of one parameter, as reported in the output tables.
struct EstimatorLabel {
  std::string parameter;  // "delta" or "beta"
  std::string estimator;  // RE, EB, LP, MLE, MMSE
  double p = kNaN;        // detection-error probability behind the estimator or its CI
  double epsilon = kNaN;
  bool has_ci = true;

  std::string name() const;
};

struct ReplicationEstimate {
  double point = kNaN;
  double bias_bound = kNaN;
  double sd_h = kNaN;
};

struct ReplicationRecord {
  long index = 0;
  std::uint64_t data_hash = 0;
  bool failed = false;
  std::string error;
  std::vector<ReplicationEstimate> estimates;  // aligned with CellResult::labels
};

struct EstimatorSummary {
  EstimatorLabel label;
  double truth = kNaN;
  long replications = 0;
  double mean = kNaN;
  double bias = kNaN;
  double variance = kNaN;  // 1/R denominator, so mse = bias^2 + variance
  double mse = kNaN;
  double bias_se = kNaN;
  double q025 = kNaN;
  double q975 = kNaN;
  double coverage_robust = kNaN;
  double coverage_nonrobust = kNaN;
  double coverage_ak = kNaN;
  double width_robust = kNaN;
  double width_nonrobust = kNaN;
  double width_ak = kNaN;
  double mean_bias_bound = kNaN;
  double mean_sd_h = kNaN;
};

struct CellResult {
  int T = 0;
  models::ProbitDgp dgp = models::ProbitDgp::kReference;
  double nu = 0.0;
  double truth_delta = kNaN;
  std::vector<EstimatorLabel> labels;
  std::vector<EstimatorSummary> summaries;
  std::vector<ReplicationRecord> reps;
  long failures = 0;
  double seconds = 0.0;

  /// Twice the KL divergence of the shifted DGP from the reference, nu^2 / sigma^2.
  double kl_x(double sigma) const { return nu * nu / (sigma * sigma); }
  const EstimatorSummary& summary(const std::string& parameter, const std::string& estimator,
                                  double p = kNaN) const;
};

struct McResult {
  std::vector<CellResult> cells;
  double seconds = 0.0;
};

/// Simulates one dataset and computes every configured estimator on it.
ReplicationRecord run_replication(const ExperimentConfig& config, int T, models::ProbitDgp dgp,
                                  double nu, std::uint64_t cell, long replication,
                                  const std::vector<EstimatorLabel>& labels);

std::vector<EstimatorLabel> estimator_labels(const ExperimentConfig& config, long n);

/// Replications over every panel length in the config, under config.dgp.
McResult run_montecarlo(const ExperimentConfig& config);
/// Replications over config.nu_grid under the shifted-mean DGP.
McResult run_misspec_sweep(const ExperimentConfig& config);

struct CurvePoint {
  int T = 0;
  std::string estimator;
  double p = kNaN;
  double epsilon = kNaN;
  double bias = kNaN;
  double bias_se = kNaN;
  double variance = kNaN;
  double mse = kNaN;
};

/// Worst-case bias and MSE of the RE, EB and MMSE influence functions at the
/// reference parameters, one initial condition, for each panel length.
std::vector<CurvePoint> run_bias_curves(const ExperimentConfig& config);

CsvTable mc_table(const McResult& result, const ExperimentConfig& config);
CsvTable raw_table(const McResult& result);
CsvTable curve_table(const std::vector<CurvePoint>& points, const ExperimentConfig& config);

/// Plain-text run manifest: command, config hash, seed, versions, runtimes.
std::string manifest(const ExperimentConfig& config, const std::string& command,
                     const std::vector<std::pair<std::string, double>>& runtimes);

}  // namespace locrobust::harness
