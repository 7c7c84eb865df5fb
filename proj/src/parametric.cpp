#include "locrobust/parametric.hpp"

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "locrobust/error.hpp"
#include "locrobust/linalg.hpp"
#include "locrobust/numdiff.hpp"
#include "locrobust/parallel.hpp"

namespace locrobust {

VectorXd ReferenceModel::score_theta(const Observation& obs, const VectorXd& theta) const {
  return numdiff::gradient([&](const VectorXd& t) { return log_density(obs, t); }, theta);
}

MatrixXd ReferenceModel::eta_jacobian(const VectorXd& eta) const {
  if (eta.size() == 0) return MatrixXd(0, theta_dim());
  return numdiff::jacobian_t([&](const VectorXd& e) { return theta_of_eta(e); }, eta);
}

VectorXd ReferenceModel::grad_delta(const VectorXd& theta) const {
  return numdiff::gradient([&](const VectorXd& t) { return delta(t); }, theta);
}

std::optional<MatrixXd> ReferenceModel::information(const VectorXd&, const VectorXd&) const {
  return std::nullopt;
}

VectorXd ReferenceModel::sample(const VectorXd&, const VectorXd&, Rng&) const {
  throw ValidationError("reference model does not provide a sampler");
}

namespace {

constexpr std::size_t kBundleChunks = 64;

MatrixXd monte_carlo_information(const ReferenceModel& model, const VectorXd& theta,
                                 const std::vector<VectorXd>& covariates,
                                 const BundleOptions& options) {
  require(options.mc_draws >= 1, "compute_bundle: mc_draws must be positive");
  const Index p = model.theta_dim();
  const long draws = options.mc_draws;
  std::vector<MatrixXd> partial(kBundleChunks, MatrixXd::Zero(p, p));
  parallel_for(kBundleChunks, options.threads, [&](std::size_t c) {
    Rng rng = make_rng(options.seed, {tag(Stream::kBundle), c});
    const long begin = draws * static_cast<long>(c) / static_cast<long>(kBundleChunks);
    const long end = draws * static_cast<long>(c + 1) / static_cast<long>(kBundleChunks);
    for (long d = begin; d < end; ++d) {
      const VectorXd& x = covariates[static_cast<std::size_t>(d) % covariates.size()];
      Observation obs{model.sample(x, theta, rng), x};
      const VectorXd s = model.score_theta(obs, theta);
      partial[c].noalias() += s * s.transpose();
    }
  });
  MatrixXd total = MatrixXd::Zero(p, p);
  for (const auto& m : partial) total += m;
  return linalg::symmetrize(total / static_cast<double>(draws));
}

}  // namespace

ScoreHessianBundle compute_bundle(const ReferenceModel& model, const VectorXd& eta,
                                  const BundleOptions& options,
                                  const std::vector<Observation>* data) {
  require(eta.size() == model.eta_dim(), "compute_bundle: eta has the wrong dimension");
  require(model.eta_dim() <= model.theta_dim(), "compute_bundle: dim eta exceeds dim theta");
  ScoreHessianBundle b;
  b.eta = eta;
  b.theta = model.theta_of_eta(eta);
  require(b.theta.size() == model.theta_dim(), "compute_bundle: theta_of_eta has the wrong size");
  b.G_eta = model.eta_jacobian(eta);
  require(b.G_eta.rows() == model.eta_dim() && b.G_eta.cols() == model.theta_dim(),
          "compute_bundle: eta_jacobian must be dim eta x dim theta");

  std::vector<VectorXd> covariates = options.covariates;
  b.covariate_count = static_cast<Index>(covariates.size());
  if (covariates.empty()) covariates.emplace_back();

  const Index p = model.theta_dim();
  MatrixXd analytic = MatrixXd::Zero(p, p);
  bool have_analytic = true;
  for (const auto& x : covariates) {
    auto info = model.information(x, b.theta);
    if (!info) {
      have_analytic = false;
      break;
    }
    analytic += *info;
  }
  b.H_theta = have_analytic
                  ? linalg::symmetrize(analytic / static_cast<double>(covariates.size()))
                  : monte_carlo_information(model, b.theta, covariates, options);

  b.grad_theta_delta = model.grad_delta(b.theta);
  b.H_eta = b.G_eta * b.H_theta * b.G_eta.transpose();
  b.grad_eta_delta = b.G_eta * b.grad_theta_delta;
  if (b.H_eta.size() > 0 && linalg::rcond_symmetric(b.H_eta) < 1e-12)
    throw NumericalError("reference model not identified at eta (H_eta is singular)");
  if (!b.H_theta.allFinite()) throw NumericalError("compute_bundle: non-finite Hessian");

  if (data != nullptr) {
    b.scores.resize(static_cast<Index>(data->size()), p);
    for (std::size_t i = 0; i < data->size(); ++i)
      b.scores.row(static_cast<Index>(i)) = model.score_theta((*data)[i], b.theta).transpose();
  }
  return b;
}

ProjectedBundle project(const ScoreHessianBundle& b) {
  ProjectedBundle pb;
  if (b.G_eta.rows() == 0) {
    pb.H_tilde = b.H_theta;
    pb.grad_tilde_delta = b.grad_theta_delta;
    return pb;
  }
  Eigen::LDLT<MatrixXd> h_eta(b.H_eta);
  if (h_eta.info() != Eigen::Success)
    throw NumericalError("project: H_eta factorization failed");
  const MatrixXd hg = b.H_theta * b.G_eta.transpose();  // dim theta x dim eta
  pb.H_tilde = linalg::symmetrize(b.H_theta - hg * h_eta.solve(hg.transpose()));
  pb.grad_tilde_delta = b.grad_theta_delta - hg * h_eta.solve(b.grad_eta_delta);
  return pb;
}

WeightedEuclidean default_omega(const ProjectedBundle& projected) {
  VectorXd d = projected.H_tilde.diagonal();
  const double scale = d.cwiseAbs().maxCoeff();
  double sum = 0.0;
  int count = 0;
  for (Index j = 0; j < d.size(); ++j) {
    if (d(j) > 1e-12 * scale) {
      sum += d(j);
      ++count;
    }
  }
  if (count == 0) throw NumericalError("default_omega: H_tilde has no positive diagonal entry");
  const double fill = sum / count;
  for (Index j = 0; j < d.size(); ++j)
    if (!(d(j) > 1e-12 * scale)) d(j) = fill;
  return WeightedEuclidean(d.asDiagonal().toDenseMatrix());
}

ParametricPlan mmse_plan(const ScoreHessianBundle& b, const ProjectedBundle& pb,
                         const NeighborhoodSpec& spec) {
  const auto& omega = spec.euclidean();
  const Index p = b.H_theta.rows();
  require(omega.dim() == p, "mmse_plan: Omega has the wrong dimension");

  VectorXd efficient = VectorXd::Zero(p);
  MatrixXd annihilator = MatrixXd::Identity(p, p);
  if (b.G_eta.rows() > 0) {
    Eigen::LDLT<MatrixXd> h_eta(b.H_eta);
    efficient = b.G_eta.transpose() * h_eta.solve(b.grad_eta_delta);
    annihilator -= b.G_eta.transpose() * h_eta.solve(b.G_eta * b.H_theta);
  }

  VectorXd robust = VectorXd::Zero(p);
  const double en = spec.epsilon_n();
  if (en > 0.0) {
    if (std::isinf(en)) {
      robust = linalg::pinv_symmetric(pb.H_tilde) * pb.grad_tilde_delta;
    } else {
      const MatrixXd m = pb.H_tilde + omega.omega() / en;
      robust = linalg::solve_psd(m, pb.grad_tilde_delta);
    }
  }

  ParametricPlan plan;
  plan.v = efficient + annihilator * robust;
  plan.cross_moment = b.H_theta * plan.v;
  plan.reference_variance = plan.v.dot(plan.cross_moment);
  return plan;
}

double plan_bias(const ParametricPlan& plan, const ScoreHessianBundle& b,
                 const NeighborhoodSpec& spec) {
  return worst_case_bias(b.grad_theta_delta, plan.cross_moment, spec.euclidean(), spec.epsilon);
}

double h_mmse(const Observation& obs, const ReferenceModel& model,
              const ScoreHessianBundle& bundle, const ProjectedBundle& projected,
              const NeighborhoodSpec& spec) {
  const ParametricPlan plan = mmse_plan(bundle, projected, spec);
  return model.score_theta(obs, bundle.theta).dot(plan.v);
}

double h_mmse_conditional(const Observation& obs, const ReferenceModel& model,
                          const ScoreHessianBundle& averaged_bundle,
                          const ProjectedBundle& projected, const NeighborhoodSpec& spec) {
  require(averaged_bundle.covariate_count > 0,
          "h_mmse_conditional: bundle was not built from a covariate sample");
  return h_mmse(obs, model, averaged_bundle, projected, spec);
}

namespace {

class NegativeLogLikelihood final : public ceres::FirstOrderFunction {
 public:
  NegativeLogLikelihood(const ReferenceModel& model, const std::vector<Observation>& data)
      : model_(model), data_(data) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    const Index k = model_.eta_dim();
    const VectorXd eta = Eigen::Map<const VectorXd>(parameters, k);
    const VectorXd theta = model_.theta_of_eta(eta);
    double total = 0.0;
    VectorXd score = VectorXd::Zero(theta.size());
    for (const auto& obs : data_) {
      total += model_.log_density(obs, theta);
      if (gradient != nullptr) score += model_.score_theta(obs, theta);
    }
    const double n = static_cast<double>(data_.size());
    if (!std::isfinite(total)) return false;
    cost[0] = -total / n;
    if (gradient != nullptr) {
      const VectorXd g = -(model_.eta_jacobian(eta) * score) / n;
      Eigen::Map<VectorXd>(gradient, k) = g;
    }
    return true;
  }

  int NumParameters() const override { return static_cast<int>(model_.eta_dim()); }

 private:
  const ReferenceModel& model_;
  const std::vector<Observation>& data_;
};

}  // namespace

VectorXd fit_mle(const ReferenceModel& model, const std::vector<Observation>& data,
                 const VectorXd& start, const MleOptions& options) {
  require(!data.empty(), "fit_mle: empty data");
  require(start.size() == model.eta_dim(), "fit_mle: start has the wrong dimension");
  if (model.eta_dim() == 0) return start;
  VectorXd eta = start;
  ceres::GradientProblem problem(new NegativeLogLikelihood(model, data));
  ceres::GradientProblemSolver::Options opts;
  opts.max_num_iterations = options.max_iterations;
  opts.logging_type = ceres::SILENT;
  opts.minimizer_progress_to_stdout = false;
  opts.gradient_tolerance = 1e-14;
  opts.function_tolerance = 1e-16;
  opts.parameter_tolerance = 1e-14;
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(opts, problem, eta.data(), &summary);

  double cost = 0.0;
  VectorXd grad(eta.size());
  NegativeLogLikelihood(model, data).Evaluate(eta.data(), &cost, grad.data());
  if (!(grad.norm() <= options.gradient_tolerance))
    throw NumericalError("fit_mle: gradient norm " + std::to_string(grad.norm()) +
                         " exceeds tolerance after " +
                         std::to_string(summary.iterations.size()) + " iterations");
  return eta;
}

EstimateReport estimate(const ReferenceModel& model, const std::vector<Observation>& data,
                        const NeighborhoodSpec& spec, const std::optional<VectorXd>& preliminary_eta,
                        const EstimateOptions& options) {
  require(!data.empty(), "estimate: empty data");
  VectorXd eta_hat;
  if (preliminary_eta) {
    eta_hat = *preliminary_eta;
  } else {
    const VectorXd start = options.mle_start.value_or(VectorXd::Zero(model.eta_dim()));
    eta_hat = fit_mle(model, data, start, options.mle);
  }

  BundleOptions bopts = options.bundle;
  if (bopts.covariates.empty() && data.front().x.size() > 0) {
    for (const auto& obs : data) bopts.covariates.push_back(obs.x);
  }
  const ScoreHessianBundle bundle = compute_bundle(model, eta_hat, bopts, &data);
  const ProjectedBundle projected = project(bundle);
  const ParametricPlan plan = mmse_plan(bundle, projected, spec);

  const VectorXd h = bundle.scores * plan.v;
  const double point = model.delta(bundle.theta) + h.mean();
  const double bias = plan_bias(plan, bundle, spec);
  return make_report("MMSE", point, bias, sample_sd(h), static_cast<long>(data.size()),
                     spec.epsilon, options.mu, options.p);
}

}  // namespace locrobust
