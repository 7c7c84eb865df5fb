#include "locrobust/harness/experiments.hpp"

#include <algorithm>
#include <boost/version.hpp>
#include <ceres/version.h>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "locrobust/calibration.hpp"
#include "locrobust/error.hpp"
#include "locrobust/inference.hpp"
#include "locrobust/parallel.hpp"
#include "locrobust/parametric.hpp"
#include "locrobust/semiparam.hpp"

namespace locrobust::harness {

using models::DynProbitModel;
using models::ProbitDgp;
using models::ProbitParams;
using models::ProbitReferenceModel;

namespace {

std::string format_p(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Type-7 sample quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return kNaN;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Per-label accumulation over covariate cells.
struct Pooled {
  double point = 0.0;
  double resid = 0.0;
  double sum_h = 0.0;
  double sum_h2 = 0.0;
};

NeighborhoodSpec kl_spec(double epsilon, long n) { return {KLNeighborhood{}, epsilon, n}; }

EstimatorSummary summarize(const EstimatorLabel& label, std::size_t slot, double truth,
                           const std::vector<ReplicationRecord>& reps, long n, double mu) {
  EstimatorSummary s;
  s.label = label;
  s.truth = truth;
  std::vector<double> points;
  std::vector<double> cover_r, cover_n, cover_ak, width_r, width_n, width_ak, bounds, sds;
  for (const auto& rec : reps) {
    if (rec.failed) continue;
    const ReplicationEstimate& e = rec.estimates[slot];
    points.push_back(e.point);
    if (!label.has_ci) continue;
    const Interval robust = confidence_interval(e.point, e.bias_bound, e.sd_h, n, mu);
    const Interval plain = confidence_interval(e.point, 0.0, e.sd_h, n, mu);
    const Interval ak = confidence_interval_ak(e.point, e.bias_bound, e.sd_h, n, mu);
    cover_r.push_back(robust.contains(truth) ? 1.0 : 0.0);
    cover_n.push_back(plain.contains(truth) ? 1.0 : 0.0);
    cover_ak.push_back(ak.contains(truth) ? 1.0 : 0.0);
    width_r.push_back(robust.width());
    width_n.push_back(plain.width());
    width_ak.push_back(ak.width());
    bounds.push_back(e.bias_bound);
    sds.push_back(e.sd_h);
  }
  const std::size_t r = points.size();
  s.replications = static_cast<long>(r);
  if (r == 0) return s;
  const double rd = static_cast<double>(r);
  s.mean = pairwise_sum(points) / rd;
  s.bias = s.mean - truth;
  std::vector<double> dev(r), err(r);
  for (std::size_t i = 0; i < r; ++i) {
    dev[i] = (points[i] - s.mean) * (points[i] - s.mean);
    err[i] = (points[i] - truth) * (points[i] - truth);
  }
  s.variance = pairwise_sum(dev) / rd;
  s.mse = pairwise_sum(err) / rd;
  s.bias_se = r > 1 ? std::sqrt(s.variance / (rd - 1.0)) : kNaN;
  std::vector<double> sorted = points;
  std::sort(sorted.begin(), sorted.end());
  s.q025 = quantile(sorted, 0.025);
  s.q975 = quantile(sorted, 0.975);
  if (label.has_ci) {
    s.coverage_robust = pairwise_sum(cover_r) / rd;
    s.coverage_nonrobust = pairwise_sum(cover_n) / rd;
    s.coverage_ak = pairwise_sum(cover_ak) / rd;
    s.width_robust = pairwise_sum(width_r) / rd;
    s.width_nonrobust = pairwise_sum(width_n) / rd;
    s.width_ak = pairwise_sum(width_ak) / rd;
    s.mean_bias_bound = pairwise_sum(bounds) / rd;
    s.mean_sd_h = pairwise_sum(sds) / rd;
  }
  return s;
}

CellResult run_cell(const ExperimentConfig& config, int T, ProbitDgp dgp, double nu,
                    std::uint64_t cell) {
  const auto start = std::chrono::steady_clock::now();
  CellResult out;
  out.T = T;
  out.dgp = dgp;
  out.nu = nu;
  ProbitParams pp = config.probit;
  pp.T = T;
  out.truth_delta = models::probit_true_delta(pp, dgp, nu);
  out.labels = estimator_labels(config, config.n);
  out.reps.resize(static_cast<std::size_t>(config.replications));
  parallel_for(out.reps.size(), config.threads, [&](std::size_t r) {
    out.reps[r] = run_replication(config, T, dgp, nu, cell, static_cast<long>(r), out.labels);
  });
  for (const auto& rec : out.reps) out.failures += rec.failed ? 1 : 0;
  if (static_cast<double>(out.failures) > 0.05 * static_cast<double>(config.replications)) {
    std::string first;
    for (const auto& rec : out.reps)
      if (rec.failed) {
        first = "replication " + std::to_string(rec.index) + ": " + rec.error;
        break;
      }
    throw NumericalError("T=" + std::to_string(T) + ", nu=" + format_double(nu) + ": " +
                         std::to_string(out.failures) + " of " +
                         std::to_string(config.replications) +
                         " replications failed (limit 5%); first failure: " + first);
  }
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const double truth = out.labels[i].parameter == "delta" ? out.truth_delta : pp.beta;
    out.summaries.push_back(summarize(out.labels[i], i, truth, out.reps, config.n, config.mu));
  }
  out.seconds = elapsed(start);
  return out;
}

}  // namespace

std::string EstimatorLabel::name() const {
  if (estimator == "MMSE") return "MMSE(p=" + format_p(p) + ")";
  return estimator;
}

const EstimatorSummary& CellResult::summary(const std::string& parameter,
                                            const std::string& estimator, double p) const {
  for (const auto& s : summaries) {
    if (s.label.parameter != parameter || s.label.estimator != estimator) continue;
    if (estimator == "MMSE" && !(std::abs(s.label.p - p) <= 1e-12 * std::max(1.0, p))) continue;
    return s;
  }
  throw ValidationError("no summary for " + parameter + "/" + estimator);
}

std::vector<EstimatorLabel> estimator_labels(const ExperimentConfig& config, long n) {
  const double ci_eps = epsilon_semiparam(config.ci_p, n, 1.0).epsilon;
  std::vector<EstimatorLabel> labels;
  if (config.uses("RE")) labels.push_back({"delta", "RE", config.ci_p, ci_eps, true});
  if (config.uses("EB")) labels.push_back({"delta", "EB", config.ci_p, ci_eps, true});
  if (config.uses("LP")) labels.push_back({"delta", "LP", kNaN, kNaN, false});
  if (config.uses("MMSE"))
    for (double p : config.p_values)
      labels.push_back({"delta", "MMSE", p, epsilon_semiparam(p, n, 1.0).epsilon, true});
  labels.push_back({"beta", "MLE", config.ci_p, ci_eps, true});
  if (config.uses("MMSE"))
    for (double p : config.p_values)
      labels.push_back({"beta", "MMSE", p, epsilon_semiparam(p, n, 1.0).epsilon, true});
  return labels;
}

ReplicationRecord run_replication(const ExperimentConfig& config, int T, ProbitDgp dgp, double nu,
                                  std::uint64_t cell, long replication,
                                  const std::vector<EstimatorLabel>& labels) {
  ReplicationRecord rec;
  rec.index = replication;
  rec.estimates.assign(labels.size(), ReplicationEstimate{});
  try {
    ProbitParams pp = config.probit;
    pp.T = T;
    const DynProbitModel model(T);
    const ProbitReferenceModel reference(pp, config.quadrature_nodes);
    const std::uint64_t cell_seed = derive_seed(config.seed, {cell});
    const auto rep = static_cast<std::uint64_t>(replication);
    const models::ProbitDataset ds = models::probit_simulate(pp, config.n, dgp, nu, cell_seed, rep);
    rec.data_hash = dataset_hash(ds.obs);

    const VectorXd beta_hat = fit_mle(reference, ds.obs, VectorXd::Constant(1, pp.beta));
    const MixtureParams params{beta_hat, pp.gamma(), true, false};
    PanelOptions po;
    po.S = config.S;
    po.seed = cell_seed;
    po.replication = rep;
    const PanelSet panels = build_panels(model, params, ds.obs, po);
    const double n = static_cast<double>(panels.n);

    std::vector<Pooled> pooled(labels.size());
    for (std::size_t c = 0; c < panels.cells.size(); ++c) {
      const SimulationPanel& panel = panels.cells[c];
      const double nc = panel.n_data();
      const TargetTerms td = target_terms(model, panel, Target::model_default());
      const TargetTerms tb = target_terms(model, panel, Target::beta_component(0));

      std::vector<SemiparamPlan> plans_d, plans_b;
      std::vector<std::size_t> slots_d, slots_b;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const EstimatorLabel& l = labels[i];
        if (l.estimator == "LP") continue;
        SemiparamPlan plan;
        double point = 0.0;
        if (l.parameter == "delta") {
          if (l.estimator == "RE") {
            plan = plan_re(panel, td);
            point = td.mean;
          } else if (l.estimator == "EB") {
            plan = plan_eb(panel, td);
            point = panel.data_weight.dot(panel.G_Y * td.values) / nc;
          } else {
            plan = plan_mmse(panel, td, kl_spec(l.epsilon, panels.n));
            point = plan_estimate(panel, td, plan);
          }
          plans_d.push_back(plan);
          slots_d.push_back(i);
        } else {
          if (l.estimator == "MLE") {
            plan = plan_re(panel, tb);
            point = beta_hat(0);
          } else {
            plan = plan_mmse(panel, tb, kl_spec(l.epsilon, panels.n));
            point = plan_estimate(panel, tb, plan);
          }
          plans_b.push_back(plan);
          slots_b.push_back(i);
        }
        const VectorXd h = plan_on_data(plan, panel);
        pooled[i].point += nc * point;
        pooled[i].sum_h += panel.data_weight.dot(h);
        pooled[i].sum_h2 += panel.data_weight.dot(h.cwiseProduct(h));
      }

      FreshDrawOptions fo;
      fo.draws_per_atom = config.fresh_draws;
      fo.seed = cell_seed;
      fo.cell = c;
      fo.replication = rep;
      const auto md = plan_moments(model, panel, td, plans_d, 1.0, fo);
      const auto mb = plan_moments(model, panel, tb, plans_b, 1.0, fo);
      for (std::size_t k = 0; k < slots_d.size(); ++k) pooled[slots_d[k]].resid += nc * md[k].residual_variance;
      for (std::size_t k = 0; k < slots_b.size(); ++k) pooled[slots_b[k]].resid += nc * mb[k].residual_variance;
    }

    for (std::size_t i = 0; i < labels.size(); ++i) {
      ReplicationEstimate& e = rec.estimates[i];
      if (labels[i].estimator == "LP") {
        e.point = models::linear_probability_fe(ds.obs);
        continue;
      }
      const Pooled& pl = pooled[i];
      e.point = pl.point / n;
      const double mean_h = pl.sum_h / n;
      e.sd_h = n > 1 ? std::sqrt(std::max(0.0, (pl.sum_h2 - n * mean_h * mean_h) / (n - 1.0))) : 0.0;
      e.bias_bound = std::sqrt(labels[i].epsilon * pl.resid / n);
    }
  } catch (const std::exception& ex) {
    rec.failed = true;
    rec.error = ex.what();
  }
  return rec;
}

McResult run_montecarlo(const ExperimentConfig& config) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  McResult result;
  const auto lengths = config.panel_lengths();
  for (std::size_t k = 0; k < lengths.size(); ++k)
    result.cells.push_back(run_cell(config, lengths[k], config.dgp, config.nu, k));
  result.seconds = elapsed(start);
  return result;
}

McResult run_misspec_sweep(const ExperimentConfig& config) {
  validate(config);
  require(!config.nu_grid.empty(), "sweep requires nu_grid");
  const auto start = std::chrono::steady_clock::now();
  McResult result;
  for (std::size_t k = 0; k < config.nu_grid.size(); ++k)
    result.cells.push_back(run_cell(config, config.probit.T, ProbitDgp::kShifted, config.nu_grid[k], k));
  result.seconds = elapsed(start);
  return result;
}

std::vector<CurvePoint> run_bias_curves(const ExperimentConfig& config) {
  validate(config);
  std::vector<CurvePoint> out;
  const auto lengths = config.panel_lengths();
  const double n = static_cast<double>(config.n);
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    const int T = lengths[k];
    const DynProbitModel model(T);
    const MixtureParams params{VectorXd::Constant(1, config.probit.beta), config.probit.gamma(),
                               false, false};
    PanelOptions po;
    po.S = config.S;
    po.seed = config.seed;
    po.cell = k;
    const SimulationPanel panel =
        simulate_panel(model, params, VectorXd::Constant(1, config.curve_y0), {}, po);
    const TargetTerms td = target_terms(model, panel, Target::model_default());

    std::vector<SemiparamPlan> plans{plan_re(panel, td), plan_eb(panel, td)};
    std::vector<double> eps;
    for (double p : config.p_values) {
      eps.push_back(epsilon_semiparam(p, config.n, 1.0).epsilon);
      plans.push_back(plan_mmse(panel, td, kl_spec(eps.back(), config.n)));
    }
    FreshDrawOptions fo;
    fo.draws_per_atom = config.fresh_draws;
    fo.seed = config.seed;
    fo.cell = k;
    const auto moments = plan_moments(model, panel, td, plans, 1.0, fo);

    auto point = [&](const std::string& name, double p, double e, const PlanMoments& m) {
      CurvePoint cp;
      cp.T = T;
      cp.estimator = name;
      cp.p = p;
      cp.epsilon = e;
      cp.bias = std::sqrt(e * m.residual_variance);
      cp.bias_se = m.residual_variance > 0.0
                       ? std::sqrt(e) * m.residual_variance_se / (2.0 * std::sqrt(m.residual_variance))
                       : 0.0;
      cp.variance = m.variance;
      cp.mse = e * m.residual_variance + m.variance / n;
      out.push_back(cp);
    };
    for (std::size_t j = 0; j < config.p_values.size(); ++j) {
      const double p = config.p_values[j];
      point("RE", p, eps[j], moments[0]);
      point("EB", p, eps[j], moments[1]);
      point("MMSE", p, eps[j], moments[2 + j]);
    }
  }
  return out;
}

CsvTable mc_table(const McResult& result, const ExperimentConfig& config) {
  CsvTable t({"experiment", "T", "dgp", "nu", "kl_x", "n", "S", "replications", "parameter",
              "estimator", "p", "epsilon", "truth", "mean", "bias", "bias_se", "variance", "mse",
              "mse_x1000", "q025", "q975", "coverage_robust", "coverage_nonrobust", "coverage_ak",
              "width_robust", "width_nonrobust", "width_ak", "mean_bias_bound", "mean_sd_h",
              "failures"});
  for (const auto& cell : result.cells) {
    for (const auto& s : cell.summaries) {
      t.row()
          .add(config.experiment)
          .add(cell.T)
          .add(models::to_string(cell.dgp))
          .add(cell.nu)
          .add(cell.kl_x(config.probit.sigma))
          .add(config.n)
          .add(config.S)
          .add(s.replications)
          .add(s.label.parameter)
          .add(s.label.name())
          .add(s.label.p)
          .add(s.label.epsilon)
          .add(s.truth)
          .add(s.mean)
          .add(s.bias)
          .add(s.bias_se)
          .add(s.variance)
          .add(s.mse)
          .add(1000.0 * s.mse)
          .add(s.q025)
          .add(s.q975)
          .add(s.coverage_robust)
          .add(s.coverage_nonrobust)
          .add(s.coverage_ak)
          .add(s.width_robust)
          .add(s.width_nonrobust)
          .add(s.width_ak)
          .add(s.mean_bias_bound)
          .add(s.mean_sd_h)
          .add(cell.failures);
    }
  }
  return t;
}

CsvTable raw_table(const McResult& result) {
  CsvTable t({"T", "dgp", "nu", "replication", "data_hash", "failed", "error", "parameter",
              "estimator", "point", "bias_bound", "sd_h"});
  for (const auto& cell : result.cells) {
    for (const auto& rec : cell.reps) {
      for (std::size_t i = 0; i < cell.labels.size(); ++i) {
        const auto& e = rec.estimates[i];
        t.row()
            .add(cell.T)
            .add(models::to_string(cell.dgp))
            .add(cell.nu)
            .add(rec.index)
            .add(hex(rec.data_hash))
            .add(rec.failed ? 1L : 0L)
            .add(rec.error)
            .add(cell.labels[i].parameter)
            .add(cell.labels[i].name())
            .add(e.point)
            .add(e.bias_bound)
            .add(e.sd_h);
      }
    }
  }
  return t;
}

CsvTable curve_table(const std::vector<CurvePoint>& points, const ExperimentConfig& config) {
  CsvTable t({"T", "y0", "n", "S", "estimator", "p", "epsilon", "bias", "bias_se", "variance",
              "mse", "mse_x1000"});
  for (const auto& cp : points) {
    t.row()
        .add(cp.T)
        .add(config.curve_y0)
        .add(config.n)
        .add(config.S)
        .add(cp.estimator)
        .add(cp.p)
        .add(cp.epsilon)
        .add(cp.bias)
        .add(cp.bias_se)
        .add(cp.variance)
        .add(cp.mse)
        .add(1000.0 * cp.mse);
  }
  return t;
}

std::string manifest(const ExperimentConfig& config, const std::string& command,
                     const std::vector<std::pair<std::string, double>>& runtimes) {
  std::ostringstream o;
  o << "command: " << command << '\n'
    << "config_hash: " << hex(config_hash(config)) << '\n'
    << "seed: " << config.seed << '\n'
    << "threads: " << config.threads << '\n'
    << "locrobust: 1.0.0\n"
    << "eigen: " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n'
    << "boost: " << BOOST_LIB_VERSION << '\n'
    << "ceres: " << CERES_VERSION_STRING << '\n'
#if defined(__VERSION__)
    << "compiler: " << __VERSION__ << '\n'
#endif
    ;
  for (const auto& [name, seconds] : runtimes) o << "runtime_seconds[" << name << "]: " << seconds << '\n';
  o << "config:\n" << canonical(config);
  return o.str();
}

}  // namespace locrobust::harness
