#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "locrobust/calibration.hpp"
#include "locrobust/error.hpp"
#include "locrobust/harness/config.hpp"
#include "locrobust/harness/csv.hpp"
#include "locrobust/harness/experiments.hpp"
#include "locrobust/inference.hpp"
#include "locrobust/models/linear_iv.hpp"
#include "locrobust/parametric.hpp"

namespace lr = locrobust;
namespace hr = locrobust::harness;

namespace {

struct RunFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
  std::string out;
  std::string raw;
  long replications = 0;
  long S = 0;
  long n = 0;
  std::vector<std::string> sets;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_path, "Experiment config file (key = value)");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&f](std::uint64_t s) { f.seed = s; f.seed_set = true; }, "Master seed");
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--out", f.out, "Output CSV path (default: stdout)");
  cmd->add_option("--raw", f.raw, "Per-replication CSV path");
  cmd->add_option("--replications", f.replications, "Override the replication count");
  cmd->add_option("--S", f.S, "Override the simulation draw count");
  cmd->add_option("--n", f.n, "Override the sample size");
  cmd->add_option("--set", f.sets, "Extra config assignment key=value (repeatable)");
}

hr::ExperimentConfig resolve_config(const RunFlags& f, const std::string& experiment) {
  hr::ExperimentConfig c = f.config_path.empty() ? hr::ExperimentConfig{} : hr::load_config(f.config_path);
  c.experiment = experiment;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw lr::ValidationError("--set expects key=value, got '" + s + "'");
    try {
      hr::set_field(c, s.substr(0, eq), s.substr(eq + 1));
    } catch (const lr::ValidationError& e) {
      throw lr::ValidationError(std::string("--set ") + s + ": " + e.what());
    }
  }
  if (f.seed_set) c.seed = f.seed;
  if (f.threads >= 0) c.threads = f.threads;
  if (f.replications > 0) c.replications = f.replications;
  if (f.S > 0) c.S = f.S;
  if (f.n > 0) c.n = f.n;
  if (!f.out.empty()) c.output = f.out;
  if (!f.raw.empty()) c.raw_output = f.raw;
  hr::validate(c);
  return c;
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

void emit(const hr::CsvTable& table, const hr::ExperimentConfig& c, const std::string& command,
          const std::vector<std::pair<std::string, double>>& runtimes) {
  if (c.output.empty()) {
    table.write(std::cout);
    return;
  }
  table.write_file(c.output);
  std::ofstream m(c.output + ".manifest.txt");
  m << hr::manifest(c, command, runtimes);
  std::cerr << "wrote " << c.output << " and " << c.output << ".manifest.txt\n";
}

std::vector<std::pair<std::string, double>> cell_runtimes(const hr::McResult& r) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& cell : r.cells)
    out.emplace_back("T=" + std::to_string(cell.T) + ",nu=" + hr::format_double(cell.nu), cell.seconds);
  out.emplace_back("total", r.seconds);
  return out;
}

struct LinearData {
  std::vector<lr::Observation> obs;
  Eigen::Index k = 0;
};

LinearData read_linear(const std::string& path) {
  const hr::NumericTable t = hr::read_numeric_csv(path);
  std::vector<std::size_t> xs, zs;
  std::size_t ycol = t.header.size();
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    const std::string& h = t.header[j];
    if (h == "y") ycol = j;
    else if (!h.empty() && h[0] == 'x') xs.push_back(j);
    else if (!h.empty() && h[0] == 'z') zs.push_back(j);
    else if (h != "id") throw lr::ValidationError(path + ": unexpected column '" + h + "'");
  }
  if (ycol == t.header.size() || xs.empty() || zs.empty())
    throw lr::ValidationError(path + ": need a 'y' column, x* columns and z* columns");
  LinearData d;
  d.k = static_cast<Eigen::Index>(xs.size());
  for (const auto& row : t.rows) {
    lr::Observation o;
    o.y.resize(d.k + 1);
    o.y(0) = row[ycol];
    for (std::size_t j = 0; j < xs.size(); ++j) o.y(static_cast<Eigen::Index>(j) + 1) = row[xs[j]];
    o.x.resize(static_cast<Eigen::Index>(zs.size()));
    for (std::size_t j = 0; j < zs.size(); ++j) o.x(static_cast<Eigen::Index>(j)) = row[zs[j]];
    d.obs.push_back(std::move(o));
  }
  if (d.obs.empty()) throw lr::ValidationError(path + ": no data rows");
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally robust minimum-MSE estimation and Monte Carlo experiments"};
  app.require_subcommand(1);

  double cal_p = 0.01, cal_lambda = 1.0;
  long cal_n = 500;
  auto* calibrate = app.add_subcommand("calibrate", "Neighborhood size from a detection-error probability");
  calibrate->add_option("--p", cal_p, "Detection-error probability in (0, 1)")->required();
  calibrate->add_option("--n", cal_n, "Sample size")->required();
  calibrate->add_option("--lambda-max", cal_lambda, "Largest eigenvalue of the whitened projected Hessian");

  std::string est_data, est_out;
  double est_eps = -1.0, est_p = -1.0, est_mu = 0.05;
  std::vector<double> est_c;
  auto* estimate = app.add_subcommand("estimate", "Minimum-MSE estimate in the linear OLS/IV model");
  estimate->add_option("--data", est_data, "CSV with columns y, x1.., z1..")->required()->check(CLI::ExistingFile);
  auto* eps_opt = estimate->add_option("--epsilon", est_eps, "Neighborhood size");
  auto* p_opt = estimate->add_option("--p", est_p, "Calibrate epsilon from this detection-error probability");
  eps_opt->excludes(p_opt);
  estimate->add_option("--mu", est_mu, "One minus the confidence level");
  estimate->add_option("--c", est_c, "Target direction c (default: first unit vector)");
  estimate->add_option("--out", est_out, "Write the report as CSV");

  RunFlags mc_flags, curve_flags, sweep_flags;
  auto* mc = app.add_subcommand("mc", "Monte Carlo replications of the dynamic probit experiment");
  add_run_flags(mc, mc_flags);
  auto* curve = app.add_subcommand("biascurve", "Worst-case bias and MSE against panel length");
  add_run_flags(curve, curve_flags);
  auto* sweep = app.add_subcommand("sweep", "Replications over a grid of mean shifts");
  add_run_flags(sweep, sweep_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string command = command_line(argc, argv);
  try {
    if (*calibrate) {
      const auto r = lr::epsilon_semiparam(cal_p, cal_n, cal_lambda);
      std::printf("p=%s\nn=%ld\nlambda_max=%s\nepsilon=%s\n", hr::format_double(r.p).c_str(), r.n,
                  hr::format_double(r.lambda_max_used).c_str(), hr::format_double(r.epsilon).c_str());
      return 0;
    }
    if (*estimate) {
      if (est_eps < 0.0 && est_p < 0.0) throw lr::ValidationError("estimate: give --epsilon or --p");
      const LinearData d = read_linear(est_data);
      Eigen::VectorXd c = Eigen::VectorXd::Unit(d.k, 0);
      if (!est_c.empty()) {
        if (static_cast<Eigen::Index>(est_c.size()) != d.k)
          throw lr::ValidationError("estimate: --c needs " + std::to_string(d.k) + " entries");
        c = Eigen::Map<const Eigen::VectorXd>(est_c.data(), d.k);
      }
      const auto model = lr::models::fit_linear_iv(d.obs, d.k, c);
      const Eigen::VectorXd beta_ols = lr::models::ols(d.obs, d.k);
      const long n = static_cast<long>(d.obs.size());

      lr::BundleOptions bo;
      for (const auto& o : d.obs) bo.covariates.push_back(o.x);
      const auto bundle = lr::compute_bundle(model, beta_ols, bo, &d.obs);
      const auto projected = lr::project(bundle);
      const lr::WeightedEuclidean omega = lr::default_omega(projected);
      double epsilon = est_eps;
      std::optional<double> p;
      if (est_p >= 0.0) {
        p = est_p;
        epsilon = lr::epsilon_parametric(est_p, n, projected, omega).epsilon;
      }
      lr::EstimateOptions eo;
      eo.mu = est_mu;
      eo.p = p;
      const lr::NeighborhoodSpec spec(omega, epsilon, n);
      const lr::EstimateReport r = lr::estimate(model, d.obs, spec, beta_ols, eo);
      const double ols_c = c.dot(beta_ols);
      const double iv_c = c.dot(lr::models::two_stage_least_squares(d.obs, d.k));

      hr::CsvTable t({"estimator", "n", "epsilon", "p", "point", "bias_bound", "sd_h", "ci_robust_lo",
                      "ci_robust_hi", "ci_nonrobust_lo", "ci_nonrobust_hi", "ols", "iv"});
      t.row()
          .add(r.estimator_name)
          .add(r.n)
          .add(r.epsilon)
          .add(p ? *p : hr::kNaN)
          .add(r.point)
          .add(r.bias_bound)
          .add(r.sd_h)
          .add(r.ci_robust.lo)
          .add(r.ci_robust.hi)
          .add(r.ci_nonrobust.lo)
          .add(r.ci_nonrobust.hi)
          .add(ols_c)
          .add(iv_c);
      if (!est_out.empty()) t.write_file(est_out);
      t.write(std::cout);
      return 0;
    }
    if (*mc) {
      const auto c = resolve_config(mc_flags, "montecarlo");
      const auto result = hr::run_montecarlo(c);
      if (!c.raw_output.empty()) hr::raw_table(result).write_file(c.raw_output);
      emit(hr::mc_table(result, c), c, command, cell_runtimes(result));
      return 0;
    }
    if (*sweep) {
      const auto c = resolve_config(sweep_flags, "sweep");
      const auto result = hr::run_misspec_sweep(c);
      if (!c.raw_output.empty()) hr::raw_table(result).write_file(c.raw_output);
      emit(hr::mc_table(result, c), c, command, cell_runtimes(result));
      return 0;
    }
    if (*curve) {
      const auto c = resolve_config(curve_flags, "biascurve");
      const auto start = std::chrono::steady_clock::now();
      const auto points = hr::run_bias_curves(c);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      emit(hr::curve_table(points, c), c, command, {{"total", secs}});
      return 0;
    }
  } catch (const lr::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
