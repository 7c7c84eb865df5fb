#include "locrobust/models/ate.hpp"

#include <cmath>
#include <random>

#include "locrobust/error.hpp"

namespace locrobust::models {

double AteModel::p(const VectorXd& x) const {
  require(static_cast<bool>(propensity), "AteModel: propensity function not set");
  const double v = propensity(x);
  require(v >= 0.0 && v <= 1.0, "AteModel: propensity outside [0, 1]");
  return v;
}

double h_ate(double y, int d, const VectorXd& x, const AteModel& model, double epsilon_n) {
  require(d == 0 || d == 1, "h_ate: treatment must be 0 or 1");
  require(epsilon_n >= 0.0, "h_ate: eps * n must be >= 0");
  if (epsilon_n == 0.0) return 0.0;
  const double lambda = std::isinf(epsilon_n) ? 0.0 : 1.0 / epsilon_n;
  const double p = model.p(x);
  if (d == 1) return (y - x.dot(model.gamma1)) / (p + lambda);
  return -(y - x.dot(model.gamma0)) / (1.0 - p + lambda);
}

double delta_ate_mmse(const std::vector<AteRecord>& data, const AteModel& model, double epsilon_n) {
  require(!data.empty(), "delta_ate_mmse: empty data");
  double total = 0.0;
  for (const auto& r : data)
    total += r.x.dot(model.gamma1 - model.gamma0) + h_ate(r.y, r.d, r.x, model, epsilon_n);
  return total / static_cast<double>(data.size());
}

double delta_aipw(const std::vector<AteRecord>& data, const AteModel& model) {
  require(!data.empty(), "delta_aipw: empty data");
  double total = 0.0;
  for (const auto& r : data) {
    const double p = model.p(r.x);
    const double m1 = r.x.dot(model.gamma1);
    const double m0 = r.x.dot(model.gamma0);
    total += m1 - m0 + r.d * (r.y - m1) / p - (1 - r.d) * (r.y - m0) / (1.0 - p);
  }
  return total / static_cast<double>(data.size());
}

double ate_bias(const std::vector<AteRecord>& data, const AteModel& model, double epsilon,
                double epsilon_n) {
  require(!data.empty(), "ate_bias: empty data");
  require(epsilon >= 0.0, "ate_bias: epsilon must be >= 0");
  if (epsilon_n == 0.0) return std::sqrt(epsilon * 2.0 * model.sigma2);
  const double lambda = std::isinf(epsilon_n) ? 0.0 : 1.0 / epsilon_n;
  double var = 0.0;
  for (const auto& r : data) {
    const double p = model.p(r.x);
    const double k1 = lambda / (p + lambda);
    const double k0 = lambda / (1.0 - p + lambda);
    var += model.sigma2 * (k1 * k1 + k0 * k0);
  }
  return std::sqrt(epsilon * var / static_cast<double>(data.size()));
}

std::vector<AteRecord> ate_simulate(const AteModel& model, const std::vector<VectorXd>& xs,
                                    Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  std::vector<AteRecord> out;
  out.reserve(xs.size());
  const double sd = std::sqrt(model.sigma2);
  for (const auto& x : xs) {
    AteRecord r;
    r.x = x;
    r.d = unif(rng) < model.p(x) ? 1 : 0;
    r.y = x.dot(r.d == 1 ? model.gamma1 : model.gamma0) + sd * normal(rng);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace locrobust::models
