#include "locrobust/models/dyn_probit.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "locrobust/error.hpp"
#include "locrobust/normal.hpp"

namespace locrobust::models {

namespace {

void check_path(const VectorXd& y_path, double y0) {
  require(y0 == 0.0 || y0 == 1.0, "probit: y0 must be 0 or 1");
  for (Index t = 0; t < y_path.size(); ++t)
    require(y_path(t) == 0.0 || y_path(t) == 1.0, "probit: outcomes must be 0 or 1");
}

// phi(z) / Phi(z), stable for very negative z.
double mills(double z) { return std::exp(-0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) - log_norm_cdf(z)); }

// d/da of log g for a path summarized by transition counts.
double dlogg_da(const Eigen::Vector4d& c, double a, double beta) {
  return -c(0) * mills(-a) + c(1) * mills(a) - c(2) * mills(-(beta + a)) + c(3) * mills(beta + a);
}

double dlogg_dbeta(const Eigen::Vector4d& c, double a, double beta) {
  return -c(2) * mills(-(beta + a)) + c(3) * mills(beta + a);
}

double log_g_counts(const Eigen::Vector4d& c, double a, double beta) {
  return c(0) * log_norm_cdf(-a) + c(1) * log_norm_cdf(a) + c(2) * log_norm_cdf(-(beta + a)) +
         c(3) * log_norm_cdf(beta + a);
}

std::vector<Eigen::Vector4d> counts_of(const std::vector<VectorXd>& ys, double y0) {
  std::vector<Eigen::Vector4d> out;
  out.reserve(ys.size());
  for (const auto& y : ys) out.push_back(transition_counts(y, y0));
  return out;
}

}  // namespace

double probit_loglik(const VectorXd& y_path, double y0, double a, double beta) {
  check_path(y_path, y0);
  double ll = 0.0;
  double prev = y0;
  for (Index t = 0; t < y_path.size(); ++t) {
    ll += log_norm_cdf((2.0 * y_path(t) - 1.0) * (beta * prev + a));
    prev = y_path(t);
  }
  return ll;
}

double probit_delta(double a, double beta) { return norm_cdf(beta + a) - norm_cdf(a); }

Eigen::Vector4d transition_counts(const VectorXd& y_path, double y0) {
  check_path(y_path, y0);
  Eigen::Vector4d c = Eigen::Vector4d::Zero();
  double prev = y0;
  for (Index t = 0; t < y_path.size(); ++t) {
    c(static_cast<Index>(2 * prev + y_path(t))) += 1.0;
    prev = y_path(t);
  }
  return c;
}

DynProbitModel::DynProbitModel(int T) : T_(T) { require(T >= 1, "DynProbitModel: T must be >= 1"); }

double DynProbitModel::log_g(const VectorXd& y, const VectorXd& a, const VectorXd& x,
                             const VectorXd& beta) const {
  return probit_loglik(y, x(0), a(0), beta(0));
}

double DynProbitModel::log_pi(const VectorXd& a, const VectorXd& x, const VectorXd& gamma) const {
  const double z = (a(0) - gamma(0) - gamma(1) * x(0)) / gamma(2);
  return -0.5 * z * z - std::log(gamma(2)) - 0.5 * std::log(2.0 * std::numbers::pi);
}

VectorXd DynProbitModel::sample_a(const VectorXd& x, const VectorXd& gamma, Rng& rng) const {
  std::normal_distribution<double> normal;
  return VectorXd::Constant(1, gamma(0) + gamma(1) * x(0) + gamma(2) * normal(rng));
}

VectorXd DynProbitModel::sample_y(const VectorXd& a, const VectorXd& x, const VectorXd& beta,
                                  Rng& rng) const {
  std::normal_distribution<double> normal;
  VectorXd y(T_);
  double prev = x(0);
  for (int t = 0; t < T_; ++t) {
    y(t) = (beta(0) * prev + a(0) + normal(rng) >= 0.0) ? 1.0 : 0.0;
    prev = y(t);
  }
  return y;
}

double DynProbitModel::target(const VectorXd& a, const VectorXd&, const VectorXd& beta) const {
  return probit_delta(a(0), beta(0));
}

VectorXd DynProbitModel::grad_beta_log_g(const VectorXd& y, const VectorXd& a, const VectorXd& x,
                                         const VectorXd& beta) const {
  return VectorXd::Constant(1, dlogg_dbeta(transition_counts(y, x(0)), a(0), beta(0)));
}

VectorXd DynProbitModel::grad_gamma_log_pi(const VectorXd& a, const VectorXd& x,
                                           const VectorXd& gamma) const {
  const double s = gamma(2);
  const double r = a(0) - gamma(0) - gamma(1) * x(0);
  VectorXd g(3);
  g << r / (s * s), x(0) * r / (s * s), -1.0 / s + r * r / (s * s * s);
  return g;
}

VectorXd DynProbitModel::grad_beta_target(const VectorXd& a, const VectorXd&,
                                          const VectorXd& beta) const {
  return VectorXd::Constant(1, norm_pdf(beta(0) + a(0)));
}

std::vector<double> DynProbitModel::y_key(const VectorXd& y, const VectorXd& x) const {
  const Eigen::Vector4d c = transition_counts(y, x(0));
  return {c(0), c(1), c(2), c(3)};
}

MatrixXd DynProbitModel::log_g_table(const std::vector<VectorXd>& ys,
                                     const std::vector<VectorXd>& as, const VectorXd& x,
                                     const VectorXd& beta) const {
  const auto counts = counts_of(ys, x(0));
  const Index ka = static_cast<Index>(as.size());
  MatrixXd per_a(4, ka);
  for (Index j = 0; j < ka; ++j) {
    const double a = as[static_cast<std::size_t>(j)](0);
    per_a(0, j) = log_norm_cdf(-a);
    per_a(1, j) = log_norm_cdf(a);
    per_a(2, j) = log_norm_cdf(-(beta(0) + a));
    per_a(3, j) = log_norm_cdf(beta(0) + a);
  }
  MatrixXd c(static_cast<Index>(ys.size()), 4);
  for (std::size_t i = 0; i < ys.size(); ++i) c.row(static_cast<Index>(i)) = counts[i].transpose();
  return c * per_a;
}

std::vector<MatrixXd> DynProbitModel::grad_beta_log_g_table(const std::vector<VectorXd>& ys,
                                                            const std::vector<VectorXd>& as,
                                                            const VectorXd& x,
                                                            const VectorXd& beta) const {
  const auto counts = counts_of(ys, x(0));
  const Index ka = static_cast<Index>(as.size());
  MatrixXd per_a(2, ka);
  for (Index j = 0; j < ka; ++j) {
    const double z = beta(0) + as[static_cast<std::size_t>(j)](0);
    per_a(0, j) = -mills(-z);
    per_a(1, j) = mills(z);
  }
  MatrixXd c(static_cast<Index>(ys.size()), 2);
  for (std::size_t i = 0; i < ys.size(); ++i) c.row(static_cast<Index>(i)) = counts[i].tail<2>().transpose();
  return {c * per_a};
}

ProbitReferenceModel::ProbitReferenceModel(const ProbitParams& fixed, int quadrature_nodes)
    : fixed_(fixed), mixture_(fixed.T), rule_(gauss_hermite_normal(quadrature_nodes)) {}

double ProbitReferenceModel::log_density(const Observation& obs, const VectorXd& theta) const {
  require(theta(3) > 0.0, "probit: sigma must be positive");
  const Eigen::Vector4d c = transition_counts(obs.y, obs.x(0));
  const double m = theta(1) + theta(2) * obs.x(0);
  VectorXd terms(rule_.nodes.size());
  for (Index k = 0; k < terms.size(); ++k)
    terms(k) = std::log(rule_.weights(k)) + log_g_counts(c, m + theta(3) * rule_.nodes(k), theta(0));
  const double top = terms.maxCoeff();
  return top + std::log((terms.array() - top).exp().sum());
}

VectorXd ProbitReferenceModel::score_theta(const Observation& obs, const VectorXd& theta) const {
  const Eigen::Vector4d c = transition_counts(obs.y, obs.x(0));
  const double m = theta(1) + theta(2) * obs.x(0);
  const Index q = rule_.nodes.size();
  VectorXd logw(q);
  for (Index k = 0; k < q; ++k)
    logw(k) = std::log(rule_.weights(k)) + log_g_counts(c, m + theta(3) * rule_.nodes(k), theta(0));
  const VectorXd post = (logw.array() - logw.maxCoeff()).exp().matrix();
  const double total = post.sum();
  VectorXd s = VectorXd::Zero(4);
  for (Index k = 0; k < q; ++k) {
    const double a = m + theta(3) * rule_.nodes(k);
    const double da = dlogg_da(c, a, theta(0));
    const double wk = post(k) / total;
    s(0) += wk * dlogg_dbeta(c, a, theta(0));
    s(1) += wk * da;
    s(2) += wk * da * obs.x(0);
    s(3) += wk * da * rule_.nodes(k);
  }
  return s;
}

VectorXd ProbitReferenceModel::theta_of_eta(const VectorXd& eta) const {
  VectorXd theta(4);
  theta << eta(0), fixed_.mu1, fixed_.mu2, fixed_.sigma;
  return theta;
}

double ProbitReferenceModel::delta(const VectorXd& theta) const {
  double total = 0.0;
  for (double y0 : {0.0, 1.0}) {
    const double m = theta(1) + theta(2) * y0;
    for (Index k = 0; k < rule_.nodes.size(); ++k)
      total += 0.5 * rule_.weights(k) * probit_delta(m + theta(3) * rule_.nodes(k), theta(0));
  }
  return total;
}

MatrixXd ProbitReferenceModel::eta_jacobian(const VectorXd&) const {
  MatrixXd g = MatrixXd::Zero(1, 4);
  g(0, 0) = 1.0;
  return g;
}

VectorXd ProbitReferenceModel::sample(const VectorXd& x, const VectorXd& theta, Rng& rng) const {
  const VectorXd a = mixture_.sample_a(x, theta.tail(3), rng);
  return mixture_.sample_y(a, x, theta.head(1), rng);
}

ProbitDgp parse_probit_dgp(const std::string& name) {
  if (name == "reference") return ProbitDgp::kReference;
  if (name == "lognormal") return ProbitDgp::kLogNormal;
  if (name == "shifted") return ProbitDgp::kShifted;
  throw ValidationError("unknown probit dgp '" + name + "' (expected reference, lognormal, shifted)");
}

std::string to_string(ProbitDgp dgp) {
  switch (dgp) {
    case ProbitDgp::kReference: return "reference";
    case ProbitDgp::kLogNormal: return "lognormal";
    case ProbitDgp::kShifted: return "shifted";
  }
  return "unknown";
}

namespace {

double latent_from_normal(const ProbitParams& p, double y0, double z, ProbitDgp dgp, double nu) {
  const double mean = p.mu1 + p.mu2 * y0;
  switch (dgp) {
    case ProbitDgp::kReference: return mean + p.sigma * z;
    case ProbitDgp::kShifted: return mean + nu + p.sigma * z;
    case ProbitDgp::kLogNormal: {
      const double e = std::numbers::e;
      const double standardized = (std::exp(z) - std::sqrt(e)) / std::sqrt((e - 1.0) * e);
      return mean + p.sigma * standardized;
    }
  }
  return mean;
}

}  // namespace

ProbitDataset probit_simulate(const ProbitParams& params, long n, ProbitDgp dgp, double nu,
                              std::uint64_t seed, std::uint64_t replication) {
  require(n >= 1, "probit_simulate: n must be >= 1");
  require(params.sigma > 0.0, "probit_simulate: sigma must be positive");
  require(params.T >= 1, "probit_simulate: T must be >= 1");
  Rng rng = make_rng(seed, {tag(Stream::kData), replication});
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  ProbitDataset ds;
  ds.obs.reserve(static_cast<std::size_t>(n));
  ds.a.resize(n);
  for (long i = 0; i < n; ++i) {
    const double y0 = coin(rng) ? 1.0 : 0.0;
    const double a = latent_from_normal(params, y0, normal(rng), dgp, nu);
    Observation obs;
    obs.x = VectorXd::Constant(1, y0);
    obs.y.resize(params.T);
    double prev = y0;
    for (int t = 0; t < params.T; ++t) {
      obs.y(t) = (params.beta * prev + a + normal(rng) >= 0.0) ? 1.0 : 0.0;
      prev = obs.y(t);
    }
    ds.a(i) = a;
    ds.obs.push_back(std::move(obs));
  }
  return ds;
}

double probit_true_delta(const ProbitParams& params, ProbitDgp dgp, double nu, int nodes) {
  const GaussHermite rule = gauss_hermite_normal(nodes);
  double total = 0.0;
  for (double y0 : {0.0, 1.0})
    for (Index k = 0; k < rule.nodes.size(); ++k)
      total += 0.5 * rule.weights(k) *
               probit_delta(latent_from_normal(params, y0, rule.nodes(k), dgp, nu), params.beta);
  return total;
}

double linear_probability_fe(const std::vector<Observation>& data) {
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& obs : data) {
    const Index T = obs.y.size();
    if (T < 2) continue;
    VectorXd lag(T);
    lag(0) = obs.x(0);
    lag.tail(T - 1) = obs.y.head(T - 1);
    const VectorXd xd = lag.array() - lag.mean();
    const VectorXd yd = obs.y.array() - obs.y.mean();
    sxy += xd.dot(yd);
    sxx += xd.squaredNorm();
  }
  if (sxx == 0.0) throw NumericalError("linear_probability_fe: no within variation in lagged outcomes");
  return sxy / sxx;
}

}  // namespace locrobust::models
