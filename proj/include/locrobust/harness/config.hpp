#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "locrobust/models/dyn_probit.hpp"

namespace locrobust::harness {

/// Flat key=value experiment description. Lines starting with '#' and blank
/// lines are ignored; lists are comma separated.
///
///   experiment   montecarlo | biascurve | sweep
///   model        probit
///   beta mu1 mu2 sigma       reference parameters (beta is also the truth)
///   T            panel length for single-cell runs
///   T_grid       list of panel lengths (overrides T)
///   dgp          reference | lognormal | shifted
///   nu, nu_grid  mean shift of the shifted DGP
///   n, S, replications, fresh_draws, quadrature_nodes
///   p            list of detection-error probabilities
///   ci_p         probability used for the RE/EB/MLE robust intervals
///   mu           1 - confidence level
///   estimators   subset of RE, EB, LP, MMSE
///   curve_y0     initial condition used by biascurve
///   seed, threads, output, raw_output
struct ExperimentConfig {
  std::string experiment = "montecarlo";
  std::string model = "probit";
  models::ProbitParams probit;
  std::vector<int> T_grid;
  models::ProbitDgp dgp = models::ProbitDgp::kLogNormal;
  double nu = 0.0;
  std::vector<double> nu_grid;
  long n = 500;
  long S = 1000;
  long replications = 200;
  int fresh_draws = 20;
  int quadrature_nodes = 40;
  std::vector<double> p_values{0.01, 1e-10};
  double ci_p = 0.01;
  double mu = 0.05;
  std::vector<std::string> estimators{"RE", "EB", "LP", "MMSE"};
  double curve_y0 = 0.0;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output;
  std::string raw_output;

  std::vector<int> panel_lengths() const;
  bool uses(const std::string& estimator) const;
};

/// Parses the text of a config file; `source` names it in diagnostics
/// ("file:line: ...").
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::string& path);

/// Applies one key=value assignment, as from a file line.
void set_field(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Checks cross-field invariants; throws ValidationError.
void validate(const ExperimentConfig& config);

/// Canonical key=value rendering; parse_config(canonical(c)) reproduces c.
std::string canonical(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace locrobust::harness
