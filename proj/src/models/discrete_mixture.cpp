#include "locrobust/models/discrete_mixture.hpp"

#include <cmath>
#include <random>

#include "locrobust/error.hpp"

namespace locrobust::models {

DiscreteMixtureModel::DiscreteMixtureModel(MatrixXd g, VectorXd base_prior, VectorXd delta,
                                           VectorXd tilt_stat)
    : g_(std::move(g)), base_(std::move(base_prior)), delta_(std::move(delta)),
      stat_(std::move(tilt_stat)) {
  require(g_.rows() > 0 && g_.cols() > 0, "DiscreteMixtureModel: empty table");
  require(base_.size() == g_.cols() && delta_.size() == g_.cols() && stat_.size() == g_.cols(),
          "DiscreteMixtureModel: grid vectors must match the columns of g");
  require((g_.array() >= 0.0).all(), "DiscreteMixtureModel: negative probabilities in g");
  for (Index j = 0; j < g_.cols(); ++j)
    require(std::abs(g_.col(j).sum() - 1.0) <= 1e-12, "DiscreteMixtureModel: columns of g must sum to 1");
  require((base_.array() > 0.0).all(), "DiscreteMixtureModel: prior must be positive");
  base_ /= base_.sum();
}

Index DiscreteMixtureModel::a_index(const VectorXd& a) const {
  const auto j = static_cast<Index>(a(0));
  require(a.size() == 1 && j >= 0 && j < grid() && static_cast<double>(j) == a(0),
          "DiscreteMixtureModel: latent value is not a grid index");
  return j;
}

Index DiscreteMixtureModel::y_index(const VectorXd& y) const {
  const auto i = static_cast<Index>(y(0));
  require(y.size() == 1 && i >= 0 && i < outcomes() && static_cast<double>(i) == y(0),
          "DiscreteMixtureModel: outcome is not a support index");
  return i;
}

VectorXd DiscreteMixtureModel::prior(double gamma) const {
  const VectorXd e = (gamma * (stat_.array() - stat_.maxCoeff())).exp().matrix();
  VectorXd p = base_.cwiseProduct(e);
  return p / p.sum();
}

double DiscreteMixtureModel::log_g(const VectorXd& y, const VectorXd& a, const VectorXd&,
                                   const VectorXd&) const {
  return std::log(g_(y_index(y), a_index(a)));
}

double DiscreteMixtureModel::log_pi(const VectorXd& a, const VectorXd&, const VectorXd& gamma) const {
  return std::log(prior(gamma(0))(a_index(a)));
}

VectorXd DiscreteMixtureModel::sample_a(const VectorXd&, const VectorXd& gamma, Rng& rng) const {
  const VectorXd p = prior(gamma(0));
  std::discrete_distribution<Index> dist(p.data(), p.data() + p.size());
  return index(dist(rng));
}

VectorXd DiscreteMixtureModel::sample_y(const VectorXd& a, const VectorXd&, const VectorXd&,
                                        Rng& rng) const {
  const VectorXd col = g_.col(a_index(a));
  std::discrete_distribution<Index> dist(col.data(), col.data() + col.size());
  return index(dist(rng));
}

double DiscreteMixtureModel::target(const VectorXd& a, const VectorXd&, const VectorXd&) const {
  return delta_(a_index(a));
}

VectorXd DiscreteMixtureModel::grad_gamma_log_pi(const VectorXd& a, const VectorXd&,
                                                 const VectorXd& gamma) const {
  return VectorXd::Constant(1, stat_(a_index(a)) - prior(gamma(0)).dot(stat_));
}

VectorXd DiscreteMixtureModel::grad_beta_target(const VectorXd&, const VectorXd&,
                                                const VectorXd&) const {
  return VectorXd(0);
}

DiscreteProblem DiscreteMixtureModel::to_problem(double gamma, bool estimate_gamma) const {
  DiscreteProblem prob;
  prob.g = g_;
  prob.prior = prior(gamma);
  prob.delta = delta_;
  if (estimate_gamma) {
    const VectorXd centered = stat_.array() - prob.prior.dot(stat_);
    prob.score = prob.posterior() * centered;
    prob.grad_eta_delta = VectorXd::Constant(1, prob.prior.dot(centered.cwiseProduct(delta_)));
  } else {
    prob.score = MatrixXd(g_.rows(), 0);
    prob.grad_eta_delta = VectorXd(0);
  }
  return prob;
}

SimulationPanel DiscreteMixtureModel::exact_panel(const MixtureParams& params, double S,
                                                  const std::vector<VectorXd>& data_y) const {
  require(S > 0.0, "exact_panel: S must be positive");
  const VectorXd p = prior(params.gamma(0));
  const VectorXd f = g_ * p;
  std::vector<VectorXd> as;
  std::vector<double> aw;
  for (Index j = 0; j < grid(); ++j) {
    as.push_back(index(j));
    aw.push_back(S * p(j));
  }
  std::vector<VectorXd> ys;
  std::vector<double> yw;
  for (Index i = 0; i < outcomes(); ++i) {
    if (f(i) <= 0.0) continue;
    ys.push_back(index(i));
    yw.push_back(S * f(i));
  }
  return build_panel(*this, params, VectorXd(0), std::move(as),
                     Eigen::Map<VectorXd>(aw.data(), static_cast<Index>(aw.size())),
                     std::move(ys), Eigen::Map<VectorXd>(yw.data(), static_cast<Index>(yw.size())),
                     data_y);
}

}  // namespace locrobust::models
