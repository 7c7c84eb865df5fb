#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>

#include "locrobust/calibration.hpp"
#include "locrobust/error.hpp"
#include "locrobust/harness/config.hpp"
#include "locrobust/harness/csv.hpp"
#include "locrobust/harness/experiments.hpp"
#include "locrobust/inference.hpp"
#include "locrobust/models/dyn_probit.hpp"
#include "locrobust/models/linear_iv.hpp"
#include "locrobust/normal.hpp"
#include "locrobust/parametric.hpp"
#include "locrobust/semiparam.hpp"

namespace py = pybind11;
namespace lr = locrobust;
namespace hr = locrobust::harness;

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<lr::Observation> linear_observations(const VectorXd& y, const MatrixXd& X,
                                                 const MatrixXd& Z) {
  if (X.rows() != y.size() || Z.rows() != y.size())
    throw lr::ValidationError("y, X and Z must have the same number of rows");
  std::vector<lr::Observation> obs;
  obs.reserve(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    lr::Observation o;
    o.y.resize(1 + X.cols());
    o.y(0) = y(i);
    o.y.tail(X.cols()) = X.row(i).transpose();
    o.x = Z.row(i).transpose();
    obs.push_back(std::move(o));
  }
  return obs;
}

py::dict estimate_linear(const VectorXd& y, const MatrixXd& X, const MatrixXd& Z,
                         std::optional<double> epsilon, std::optional<double> p, double mu,
                         std::optional<VectorXd> c) {
  if (!epsilon && !p) throw lr::ValidationError("give epsilon or p");
  const auto obs = linear_observations(y, X, Z);
  const auto k = X.cols();
  const VectorXd dir = c ? *c : VectorXd(VectorXd::Unit(k, 0));
  if (dir.size() != k) throw lr::ValidationError("c must have one entry per column of X");

  const auto model = lr::models::fit_linear_iv(obs, k, dir);
  const VectorXd beta_ols = lr::models::ols(obs, k);
  const long n = static_cast<long>(obs.size());
  lr::BundleOptions bo;
  for (const auto& o : obs) bo.covariates.push_back(o.x);
  const auto projected = lr::project(lr::compute_bundle(model, beta_ols, bo, &obs));
  const lr::WeightedEuclidean omega = lr::default_omega(projected);
  const double eps = p ? lr::epsilon_parametric(*p, n, projected, omega).epsilon : *epsilon;

  lr::EstimateOptions eo;
  eo.mu = mu;
  eo.p = p;
  const auto r = lr::estimate(model, obs, lr::NeighborhoodSpec(omega, eps, n), beta_ols, eo);

  py::dict out;
  out["estimator"] = r.estimator_name;
  out["n"] = r.n;
  out["epsilon"] = r.epsilon;
  out["p"] = p ? py::cast(*p) : py::none();
  out["point"] = r.point;
  out["bias_bound"] = r.bias_bound;
  out["sd_h"] = r.sd_h;
  out["ci_robust"] = py::make_tuple(r.ci_robust.lo, r.ci_robust.hi);
  out["ci_nonrobust"] = py::make_tuple(r.ci_nonrobust.lo, r.ci_nonrobust.hi);
  out["ols"] = dir.dot(beta_ols);
  out["iv"] = dir.dot(lr::models::two_stage_least_squares(obs, k));
  return out;
}

std::string run_experiment(const std::string& config_text) {
  const hr::ExperimentConfig c = hr::parse_config(config_text, "<python>");
  std::ostringstream out;
  if (c.experiment == "biascurve") {
    hr::curve_table(hr::run_bias_curves(c), c).write(out);
  } else if (c.experiment == "sweep") {
    hr::mc_table(hr::run_misspec_sweep(c), c).write(out);
  } else {
    hr::mc_table(hr::run_montecarlo(c), c).write(out);
  }
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_locrobust, m) {
  m.doc() = "Locally robust estimation under local misspecification";

  py::register_exception<lr::ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def("norm_cdf", &lr::norm_cdf, py::arg("x"));
  m.def("norm_quantile", &lr::norm_quantile, py::arg("p"));

  m.def(
      "epsilon_semiparam",
      [](double p, long n, double lambda_max) { return lr::epsilon_semiparam(p, n, lambda_max).epsilon; },
      py::arg("p"), py::arg("n"), py::arg("lambda_max") = 1.0,
      "Neighborhood size with detection-error probability p at sample size n.");

  m.def(
      "confidence_interval",
      [](double point, double bias, double sd, long n, double mu) {
        const auto ci = lr::confidence_interval(point, bias, sd, n, mu);
        return py::make_tuple(ci.lo, ci.hi);
      },
      py::arg("point"), py::arg("bias_bound"), py::arg("sd_h"), py::arg("n"), py::arg("mu") = 0.05);
  m.def(
      "confidence_interval_ak",
      [](double point, double bias, double sd, long n, double mu) {
        const auto ci = lr::confidence_interval_ak(point, bias, sd, n, mu);
        return py::make_tuple(ci.lo, ci.hi);
      },
      py::arg("point"), py::arg("bias_bound"), py::arg("sd_h"), py::arg("n"), py::arg("mu") = 0.05);

  m.def("estimate_linear", &estimate_linear, py::arg("y"), py::arg("X"), py::arg("Z"),
        py::kw_only(), py::arg("epsilon") = py::none(), py::arg("p") = py::none(),
        py::arg("mu") = 0.05, py::arg("c") = py::none(),
        "Minimum-MSE estimate of c'beta in the linear model with instruments Z.");

  m.def(
      "fredholm_exact",
      [](const MatrixXd& g, const VectorXd& prior, const VectorXd& delta, double epsilon_n,
         std::optional<VectorXd> counts) {
        lr::DiscreteProblem problem;
        problem.g = g;
        problem.prior = prior;
        problem.delta = delta;
        problem.score = MatrixXd(g.rows(), 0);
        problem.grad_eta_delta = VectorXd(0);
        const auto r = lr::fredholm_exact(problem, epsilon_n, counts ? *counts : VectorXd());
        py::dict out;
        out["h"] = r.h;
        out["residual"] = r.residual;
        out["delta_hat"] = r.delta_hat;
        return out;
      },
      py::arg("g"), py::arg("prior"), py::arg("delta"), py::arg("epsilon_n"),
      py::arg("counts") = py::none());

  m.def(
      "probit_true_delta",
      [](double beta, double mu1, double mu2, double sigma, const std::string& dgp, double nu) {
        lr::models::ProbitParams pp;
        pp.beta = beta;
        pp.mu1 = mu1;
        pp.mu2 = mu2;
        pp.sigma = sigma;
        return lr::models::probit_true_delta(pp, lr::models::parse_probit_dgp(dgp), nu);
      },
      py::arg("beta") = 0.5, py::arg("mu1") = -0.25, py::arg("mu2") = 0.5, py::arg("sigma") = 0.8,
      py::arg("dgp") = "reference", py::arg("nu") = 0.0);

  m.def("run_experiment", &run_experiment, py::arg("config_text"),
        py::call_guard<py::gil_scoped_release>(),
        "Runs a configuration given as text and returns the summary CSV.");
}
