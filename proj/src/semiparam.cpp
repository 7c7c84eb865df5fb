#include "locrobust/semiparam.hpp"

#include <boost/container_hash/hash.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>

#include "locrobust/error.hpp"
#include "locrobust/linalg.hpp"
#include "locrobust/numdiff.hpp"

namespace locrobust {

namespace {

using Key = std::vector<double>;

struct KeyHash {
  std::size_t operator()(const Key& k) const { return boost::hash_range(k.begin(), k.end()); }
};

using KeyIndex = std::unordered_map<Key, Index, KeyHash>;

Key to_key(const VectorXd& v) { return Key(v.data(), v.data() + v.size()); }

MatrixXd eta_inverse(const SimulationPanel& panel) {
  const MatrixXd h = panel.D.transpose() * panel.y_weight.asDiagonal() * panel.D / panel.S;
  if (h.size() > 0 && linalg::rcond_symmetric(h) < 1e-12)
    throw NumericalError("panel: D'D/S is singular; eta is not identified");
  return h.size() > 0 ? MatrixXd(h.inverse()) : h;
}

// Posterior weights and eta-score rows of outcomes `ys` against the latent atoms.
struct RowBlock {
  MatrixXd W;
  MatrixXd G;
  MatrixXd D;
  std::vector<MatrixXd> L_g;
};

RowBlock compute_rows(const MixtureModel& model, const MixtureParams& params, const VectorXd& x,
                      const std::vector<VectorXd>& a_atoms, const VectorXd& a_weight,
                      const MatrixXd& L_pi, const std::vector<VectorXd>& ys, bool keep_scores) {
  const Index ky = static_cast<Index>(ys.size());
  const Index ka = static_cast<Index>(a_atoms.size());
  RowBlock rb;
  const MatrixXd lg = model.log_g_table(ys, a_atoms, x, params.beta);
  rb.W.resize(ky, ka);
  for (Index i = 0; i < ky; ++i) {
    const double top = lg.row(i).maxCoeff();
    if (!std::isfinite(top))
      throw NumericalError("panel: degenerate likelihood, outcome " + std::to_string(i) +
                           " has zero density under every latent draw");
    const Eigen::RowVectorXd e = (lg.row(i).array() - top).exp().matrix();
    rb.W.row(i) = e / e.dot(a_weight);
  }
  rb.G = rb.W * a_weight.asDiagonal();

  const Index k = params.eta_dim();
  rb.D = MatrixXd::Zero(ky, k);
  Index col = 0;
  if (params.estimate_beta) {
    const auto grads = model.grad_beta_log_g_table(ys, a_atoms, x, params.beta);
    for (const auto& gk : grads) {
      rb.D.col(col) = (rb.G.array() * gk.array()).rowwise().sum().matrix();
      if (keep_scores) rb.L_g.push_back(gk);
      ++col;
    }
  }
  if (params.estimate_gamma) {
    for (Index c = 0; c < params.gamma.size(); ++c, ++col) {
      rb.D.col(col) = rb.G * L_pi.col(col);
      if (keep_scores) rb.L_g.emplace_back();
    }
  }
  return rb;
}

}  // namespace

VectorXd MixtureModel::grad_beta_log_g(const VectorXd& y, const VectorXd& a, const VectorXd& x,
                                       const VectorXd& beta) const {
  return numdiff::gradient([&](const VectorXd& b) { return log_g(y, a, x, b); }, beta);
}

VectorXd MixtureModel::grad_gamma_log_pi(const VectorXd& a, const VectorXd& x,
                                         const VectorXd& gamma) const {
  return numdiff::gradient([&](const VectorXd& g) { return log_pi(a, x, g); }, gamma);
}

VectorXd MixtureModel::grad_beta_target(const VectorXd& a, const VectorXd& x,
                                        const VectorXd& beta) const {
  return numdiff::gradient([&](const VectorXd& b) { return target(a, x, b); }, beta);
}

std::vector<double> MixtureModel::y_key(const VectorXd& y, const VectorXd&) const {
  return to_key(y);
}

MatrixXd MixtureModel::log_g_table(const std::vector<VectorXd>& ys,
                                   const std::vector<VectorXd>& as, const VectorXd& x,
                                   const VectorXd& beta) const {
  MatrixXd t(static_cast<Index>(ys.size()), static_cast<Index>(as.size()));
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (std::size_t j = 0; j < as.size(); ++j)
      t(static_cast<Index>(i), static_cast<Index>(j)) = log_g(ys[i], as[j], x, beta);
  return t;
}

std::vector<MatrixXd> MixtureModel::grad_beta_log_g_table(const std::vector<VectorXd>& ys,
                                                          const std::vector<VectorXd>& as,
                                                          const VectorXd& x,
                                                          const VectorXd& beta) const {
  std::vector<MatrixXd> out(static_cast<std::size_t>(beta.size()),
                            MatrixXd(static_cast<Index>(ys.size()), static_cast<Index>(as.size())));
  for (std::size_t i = 0; i < ys.size(); ++i) {
    for (std::size_t j = 0; j < as.size(); ++j) {
      const VectorXd g = grad_beta_log_g(ys[i], as[j], x, beta);
      for (Index k = 0; k < beta.size(); ++k)
        out[static_cast<std::size_t>(k)](static_cast<Index>(i), static_cast<Index>(j)) = g(k);
    }
  }
  return out;
}

double Target::value(const MixtureModel& m, const VectorXd& a, const VectorXd& x,
                     const VectorXd& beta) const {
  if (beta_index) return beta(*beta_index);
  return m.target(a, x, beta);
}

VectorXd Target::grad_beta(const MixtureModel& m, const VectorXd& a, const VectorXd& x,
                           const VectorXd& beta) const {
  if (beta_index) return VectorXd::Unit(beta.size(), *beta_index);
  return m.grad_beta_target(a, x, beta);
}

VectorXd SimulationPanel::apply_Q(const VectorXd& v) const {
  if (D.cols() == 0) return v;
  return v - D * (D_pinv * v);
}

MatrixXd SimulationPanel::Q() const {
  MatrixXd q = MatrixXd::Identity(k_y(), k_y());
  if (D.cols() > 0) q -= D * D_pinv;
  return q;
}

SimulationPanel build_panel(const MixtureModel& model, const MixtureParams& params,
                            const VectorXd& x, std::vector<VectorXd> a_atoms, VectorXd a_weight,
                            std::vector<VectorXd> y_atoms, VectorXd y_weight,
                            const std::vector<VectorXd>& data_y) {
  require(params.beta.size() == model.beta_dim(), "panel: beta has the wrong dimension");
  require(params.gamma.size() == model.gamma_dim(), "panel: gamma has the wrong dimension");
  require(!a_atoms.empty() && !y_atoms.empty(), "panel: no atoms");
  require(a_weight.size() == static_cast<Index>(a_atoms.size()) &&
              y_weight.size() == static_cast<Index>(y_atoms.size()),
          "panel: weight vectors do not match atoms");
  require((a_weight.array() > 0.0).all() && (y_weight.array() > 0.0).all(),
          "panel: atom weights must be positive");
  const double s = a_weight.sum();
  require(std::abs(y_weight.sum() - s) <= 1e-9 * s, "panel: outcome and latent weights differ in total");

  SimulationPanel p;
  p.x = x;
  p.params = params;
  p.S = s;
  p.a_atoms = std::move(a_atoms);
  p.a_weight = std::move(a_weight);
  p.y_atoms = std::move(y_atoms);
  p.y_weight = std::move(y_weight);

  const Index k = params.eta_dim();
  p.L_pi = MatrixXd::Zero(p.k_a(), k);
  if (params.estimate_gamma) {
    const Index offset = params.estimate_beta ? params.beta.size() : 0;
    for (Index j = 0; j < p.k_a(); ++j)
      p.L_pi.row(j).segment(offset, params.gamma.size()) =
          model.grad_gamma_log_pi(p.a_atoms[static_cast<std::size_t>(j)], x, params.gamma)
              .transpose();
  }

  RowBlock rb = compute_rows(model, params, x, p.a_atoms, p.a_weight, p.L_pi, p.y_atoms, true);
  p.W = std::move(rb.W);
  p.G = std::move(rb.G);
  p.D = std::move(rb.D);
  p.L_g = std::move(rb.L_g);
  if (k > 0) {
    const VectorXd root = p.y_weight.cwiseSqrt();
    p.D_pinv = linalg::pinv(root.asDiagonal() * p.D) * root.asDiagonal();
  } else {
    p.D_pinv = MatrixXd(0, p.k_y());
  }

  // Data atoms, merged by key.
  KeyIndex index;
  std::vector<double> counts;
  for (const auto& y : data_y) {
    const Key key = model.y_key(y, x);
    auto [it, inserted] = index.emplace(key, static_cast<Index>(p.data_atoms.size()));
    if (inserted) {
      p.data_atoms.push_back(y);
      counts.push_back(0.0);
    }
    counts[static_cast<std::size_t>(it->second)] += 1.0;
    p.data_index.push_back(it->second);
  }
  p.data_weight = Eigen::Map<VectorXd>(counts.data(), static_cast<Index>(counts.size()));
  if (!p.data_atoms.empty()) {
    RowBlock db = compute_rows(model, params, x, p.a_atoms, p.a_weight, p.L_pi, p.data_atoms, false);
    p.G_Y = std::move(db.G);
    p.D_Y = std::move(db.D);
  } else {
    p.G_Y = MatrixXd(0, p.k_a());
    p.D_Y = MatrixXd(0, k);
  }
  return p;
}

SimulationPanel simulate_panel(const MixtureModel& model, const MixtureParams& params,
                               const VectorXd& x, const std::vector<VectorXd>& data_y,
                               const PanelOptions& options) {
  require(options.S >= 2, "simulate_panel: S must be at least 2");
  Rng rng = make_rng(options.seed, {tag(Stream::kPanel), options.replication, options.cell});
  KeyIndex a_index;
  KeyIndex y_index;
  std::vector<VectorXd> a_atoms;
  std::vector<VectorXd> y_atoms;
  std::vector<double> a_count;
  std::vector<double> y_count;
  for (long s = 0; s < options.S; ++s) {
    const VectorXd a = model.sample_a(x, params.gamma, rng);
    const VectorXd y = model.sample_y(a, x, params.beta, rng);
    auto [ai, a_new] = a_index.emplace(to_key(a), static_cast<Index>(a_atoms.size()));
    if (a_new) {
      a_atoms.push_back(a);
      a_count.push_back(0.0);
    }
    a_count[static_cast<std::size_t>(ai->second)] += 1.0;
    auto [yi, y_new] = y_index.emplace(model.y_key(y, x), static_cast<Index>(y_atoms.size()));
    if (y_new) {
      y_atoms.push_back(y);
      y_count.push_back(0.0);
    }
    y_count[static_cast<std::size_t>(yi->second)] += 1.0;
  }
  VectorXd aw = Eigen::Map<VectorXd>(a_count.data(), static_cast<Index>(a_count.size()));
  VectorXd yw = Eigen::Map<VectorXd>(y_count.data(), static_cast<Index>(y_count.size()));
  return build_panel(model, params, x, std::move(a_atoms), std::move(aw), std::move(y_atoms),
                     std::move(yw), data_y);
}

PosteriorRows posterior_rows(const MixtureModel& model, const SimulationPanel& panel,
                             const std::vector<VectorXd>& ys) {
  RowBlock rb = compute_rows(model, panel.params, panel.x, panel.a_atoms, panel.a_weight,
                             panel.L_pi, ys, false);
  return {std::move(rb.G), std::move(rb.D)};
}

TargetTerms target_terms(const MixtureModel& model, const SimulationPanel& panel,
                         const Target& target) {
  const auto& params = panel.params;
  TargetTerms t;
  t.values.resize(panel.k_a());
  t.grad_beta.resize(panel.k_a(), params.beta.size());
  for (Index j = 0; j < panel.k_a(); ++j) {
    const auto& a = panel.a_atoms[static_cast<std::size_t>(j)];
    t.values(j) = target.value(model, a, panel.x, params.beta);
    if (params.estimate_beta)
      t.grad_beta.row(j) = target.grad_beta(model, a, panel.x, params.beta).transpose();
  }
  const VectorXd w = panel.a_weight / panel.S;
  t.mean = w.dot(t.values);
  const Index k = params.eta_dim();
  t.d_delta = VectorXd::Zero(k);
  if (params.estimate_beta) t.d_delta.head(params.beta.size()) = t.grad_beta.transpose() * w;
  t.d_delta += panel.L_pi.transpose() * (w.array() * t.values.array()).matrix();
  return t;
}

double evaluate_plan(const SemiparamPlan& plan, const PosteriorRows& rows, Index i) {
  double h = rows.G.row(i).dot(plan.alpha) + plan.constant;
  if (plan.coef_d.size() > 0) h += rows.D.row(i).dot(plan.coef_d);
  return h;
}

VectorXd plan_on_data(const SemiparamPlan& plan, const SimulationPanel& panel) {
  VectorXd h = panel.G_Y * plan.alpha;
  h.array() += plan.constant;
  if (plan.coef_d.size() > 0) h += panel.D_Y * plan.coef_d;
  return h;
}

SemiparamPlan plan_re(const SimulationPanel& panel, const TargetTerms& terms) {
  SemiparamPlan plan;
  plan.alpha = VectorXd::Zero(panel.k_a());
  if (panel.eta_dim() > 0) plan.coef_d = eta_inverse(panel) * terms.d_delta;
  return plan;
}

SemiparamPlan plan_eb(const SimulationPanel& panel, const TargetTerms& terms) {
  SemiparamPlan plan;
  plan.alpha = terms.values;
  plan.constant = -terms.mean;
  const Index k = panel.eta_dim();
  if (k == 0) return plan;

  // Derivative of the reference mean of E[Delta | Y] with respect to eta.
  const VectorXd post_mean = panel.G * terms.values;
  VectorXd j = VectorXd::Zero(k);
  const Index nb = panel.params.estimate_beta ? panel.params.beta.size() : 0;
  for (Index c = 0; c < k; ++c) {
    VectorXd per_y = VectorXd::Zero(panel.k_y());
    if (c < nb) {
      per_y += panel.G * terms.grad_beta.col(c);
      per_y += (panel.G.array() * panel.L_g[static_cast<std::size_t>(c)].array())
                   .matrix() * terms.values;
    }
    per_y += panel.G * (panel.L_pi.col(c).array() * terms.values.array()).matrix();
    per_y -= (post_mean.array() * panel.D.col(c).array()).matrix();
    j(c) = panel.y_weight.dot(per_y) / panel.S;
  }
  plan.coef_d = eta_inverse(panel) * j;
  return plan;
}

SemiparamPlan plan_mmse(const SimulationPanel& panel, const TargetTerms& terms,
                        const NeighborhoodSpec& spec) {
  const double en = spec.epsilon_n();
  require(std::isfinite(en), "plan_mmse: eps * n must be finite");
  if (en == 0.0) return plan_re(panel, terms);

  const Index k = panel.eta_dim();
  const double lambda = 1.0 / en;
  const MatrixXd hinv = eta_inverse(panel);
  const MatrixXd wm = panel.W.transpose() * panel.y_weight.asDiagonal();  // E_{Y|A}
  const MatrixXd gg = panel.G * wm;                                      // G G'
  const VectorXd c_u = (panel.G * terms.values).array() - terms.mean;

  MatrixXd system = gg;
  VectorXd rhs = panel.apply_Q(c_u);
  if (k > 0) {
    system -= panel.D * (panel.D_pinv * gg);
    rhs += lambda * panel.D * (hinv * terms.d_delta);
  }
  system.diagonal().array() += lambda;
  Eigen::PartialPivLU<MatrixXd> lu(system);
  const VectorXd v = lu.solve(rhs);
  if (!v.allFinite()) throw NumericalError("plan_mmse: regularized panel system could not be solved");

  SemiparamPlan plan;
  const VectorXd ev = wm * v;
  plan.alpha = en * (terms.values - ev);
  plan.constant = -en * terms.mean;
  if (k > 0) {
    const VectorXd kappa = panel.D_pinv * (c_u - panel.G * ev);
    plan.coef_d = hinv * terms.d_delta - en * kappa;
  }
  return plan;
}

double plan_estimate(const SimulationPanel& panel, const TargetTerms& terms,
                     const SemiparamPlan& plan) {
  require(panel.n_data() > 0, "plan_estimate: the panel carries no data");
  const VectorXd h = plan_on_data(plan, panel);
  return terms.mean + panel.data_weight.dot(h) / panel.n_data();
}

double delta_mmse(const SimulationPanel& panel, const TargetTerms& terms,
                  const NeighborhoodSpec& spec) {
  return plan_estimate(panel, terms, plan_mmse(panel, terms, spec));
}

double lambda_max(const SimulationPanel& panel) {
  const VectorXd ry = panel.y_weight.cwiseSqrt();
  const VectorXd ra = panel.a_weight.cwiseSqrt();
  MatrixXd x = ry.asDiagonal() * panel.W * ra.asDiagonal();
  if (panel.eta_dim() > 0) {
    const MatrixXd b = ry.asDiagonal() * panel.D;
    x -= b * (linalg::pinv(b) * x);
  }
  const MatrixXd gram = x.rows() <= x.cols() ? MatrixXd(x * x.transpose())
                                             : MatrixXd(x.transpose() * x);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("lambda_max: eigensolver failed");
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

std::vector<PlanMoments> plan_moments(const MixtureModel& model, const SimulationPanel& panel,
                                      const TargetTerms& terms,
                                      const std::vector<SemiparamPlan>& plans, double epsilon,
                                      const FreshDrawOptions& options) {
  require(options.draws_per_atom >= 1, "plan_moments: need at least one fresh draw per atom");
  require(epsilon >= 0.0, "plan_moments: epsilon must be >= 0");
  const std::size_t np = plans.size();
  const int m = options.draws_per_atom;
  Rng rng = make_rng(options.seed, {tag(Stream::kFreshDraws), options.replication, options.cell});

  KeyIndex cache;
  std::vector<std::vector<double>> values(np);  // per plan, per cached key
  const Index ka = panel.k_a();
  MatrixXd sum = MatrixXd::Zero(ka, static_cast<Index>(np));
  MatrixXd sum_sq = MatrixXd::Zero(ka, static_cast<Index>(np));

  constexpr Index kBlock = 256;
  std::vector<Index> slots;
  std::vector<VectorXd> fresh;
  for (Index begin = 0; begin < ka; begin += kBlock) {
    const Index end = std::min(ka, begin + kBlock);
    slots.clear();
    fresh.clear();
    for (Index j = begin; j < end; ++j) {
      for (int r = 0; r < m; ++r) {
        VectorXd y = model.sample_y(panel.a_atoms[static_cast<std::size_t>(j)], panel.x,
                                    panel.params.beta, rng);
        const Index next = static_cast<Index>(values.empty() ? 0 : values[0].size()) +
                           static_cast<Index>(fresh.size());
        auto [it, inserted] = cache.emplace(model.y_key(y, panel.x), next);
        if (inserted) fresh.push_back(std::move(y));
        slots.push_back(it->second);
      }
    }
    if (!fresh.empty()) {
      const PosteriorRows rows = posterior_rows(model, panel, fresh);
      for (std::size_t p = 0; p < np; ++p)
        for (Index i = 0; i < static_cast<Index>(fresh.size()); ++i)
          values[p].push_back(evaluate_plan(plans[p], rows, i));
    }
    std::size_t s = 0;
    for (Index j = begin; j < end; ++j) {
      for (int r = 0; r < m; ++r, ++s) {
        for (std::size_t p = 0; p < np; ++p) {
          const double h = values[p][static_cast<std::size_t>(slots[s])];
          sum(j, static_cast<Index>(p)) += h;
          sum_sq(j, static_cast<Index>(p)) += h * h;
        }
      }
    }
  }

  const VectorXd w = panel.a_weight / panel.S;
  std::vector<PlanMoments> out(np);
  for (std::size_t p = 0; p < np; ++p) {
    const VectorXd mean_h = sum.col(static_cast<Index>(p)) / m;
    const VectorXd mean_sq = sum_sq.col(static_cast<Index>(p)) / m;
    const VectorXd resid = terms.values - mean_h;
    const double rbar = w.dot(resid);
    const double raw = w.dot((resid.array() - rbar).square().matrix());
    double noise = 0.0;
    if (m >= 2) {
      const VectorXd within = (mean_sq.array() - mean_h.array().square()) * (double(m) / (m - 1));
      noise = w.dot(within.cwiseMax(0.0)) / m;
    }
    PlanMoments& pm = out[p];
    pm.residual_variance = std::max(0.0, raw - noise);
    const VectorXd sq = (resid.array() - rbar).square().matrix();
    const double spread = w.dot((sq.array() - raw).square().matrix());
    pm.residual_variance_se = std::sqrt(spread / panel.S);
    pm.bias = std::sqrt(epsilon * pm.residual_variance);
    pm.mean = w.dot(mean_h);
    pm.variance = std::max(0.0, w.dot(mean_sq) - pm.mean * pm.mean);
  }
  return out;
}

double bias_of_plan(const MixtureModel& model, const SimulationPanel& panel,
                    const TargetTerms& terms, const SemiparamPlan& plan, double epsilon,
                    const FreshDrawOptions& options) {
  return plan_moments(model, panel, terms, {plan}, epsilon, options).front().bias;
}

double bias_re(const SimulationPanel& panel, const TargetTerms& terms, double epsilon) {
  return std::sqrt(epsilon) * dual_norm_kl(terms.values, panel.a_weight / panel.S);
}

double bias_eb(const MixtureModel& model, const SimulationPanel& panel, const TargetTerms& terms,
               double epsilon, const FreshDrawOptions& options) {
  return bias_of_plan(model, panel, terms, plan_eb(panel, terms), epsilon, options);
}

PanelSet build_panels(const MixtureModel& model, const MixtureParams& params,
                      const std::vector<Observation>& data, const PanelOptions& options) {
  require(!data.empty(), "build_panels: empty data");
  std::map<Key, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) groups[to_key(data[i].x)].push_back(i);
  PanelSet set;
  set.n = static_cast<long>(data.size());
  set.obs_cell.assign(data.size(), 0);
  std::uint64_t cell = 0;
  for (const auto& [key, members] : groups) {
    std::vector<VectorXd> ys;
    ys.reserve(members.size());
    for (auto i : members) {
      ys.push_back(data[i].y);
      set.obs_cell[i] = static_cast<Index>(cell);
    }
    PanelOptions po = options;
    po.cell = options.cell + cell;
    set.cells.push_back(simulate_panel(model, params, data[members.front()].x, ys, po));
    ++cell;
  }
  return set;
}

double delta_re(const MixtureModel& model, const PanelSet& panels, const Target& target) {
  double total = 0.0;
  for (const auto& p : panels.cells) total += p.n_data() * target_terms(model, p, target).mean;
  return total / static_cast<double>(panels.n);
}

double delta_eb(const MixtureModel& model, const PanelSet& panels, const Target& target) {
  double total = 0.0;
  for (const auto& p : panels.cells) {
    const TargetTerms t = target_terms(model, p, target);
    total += p.data_weight.dot(p.G_Y * t.values);
  }
  return total / static_cast<double>(panels.n);
}

double delta_re(const MixtureModel& model, const std::vector<Observation>& data,
                const MixtureParams& params, const PanelOptions& options, const Target& target) {
  return delta_re(model, build_panels(model, params, data, options), target);
}

double delta_eb(const MixtureModel& model, const std::vector<Observation>& data,
                const MixtureParams& params, const PanelOptions& options, const Target& target) {
  return delta_eb(model, build_panels(model, params, data, options), target);
}

MatrixXd DiscreteProblem::posterior() const {
  const VectorXd f = marginal();
  MatrixXd p = g * prior.asDiagonal();
  for (Index i = 0; i < p.rows(); ++i) p.row(i) /= f(i);
  return p;
}

FredholmResult fredholm_exact(const DiscreteProblem& prob, double epsilon_n,
                              const VectorXd& data_counts) {
  const Index ny = prob.g.rows();
  const Index na = prob.g.cols();
  require(ny > 0 && na > 0, "fredholm_exact: empty support");
  require(ny * na <= 10000, "fredholm_exact: support too large to enumerate");
  require(prob.prior.size() == na && prob.delta.size() == na,
          "fredholm_exact: prior/delta do not match the latent grid");
  require(epsilon_n >= 0.0, "fredholm_exact: eps * n must be >= 0");
  const VectorXd f = prob.marginal();
  require((f.array() > 0.0).all(), "fredholm_exact: outcome with zero marginal probability");

  const Index k = prob.score.cols();
  require(k == 0 || (prob.score.rows() == ny && prob.grad_eta_delta.size() == k),
          "fredholm_exact: score dimensions do not match");
  const MatrixXd post = prob.posterior();
  const MatrixXd h_y = post * prob.g.transpose();
  const double delta = prob.reference_delta();
  const VectorXd r = (post * prob.delta).array() - delta;

  MatrixXd q = MatrixXd::Identity(ny, ny);
  VectorXd efficient = VectorXd::Zero(ny);
  if (k > 0) {
    const MatrixXd h_eta = prob.score.transpose() * f.asDiagonal() * prob.score;
    const MatrixXd h_inv = h_eta.inverse();
    q -= prob.score * h_inv * prob.score.transpose() * f.asDiagonal();
    efficient = prob.score * (h_inv * prob.grad_eta_delta);
  }

  FredholmResult out;
  if (epsilon_n == 0.0) {
    out.h = efficient;
  } else {
    const double lambda = std::isinf(epsilon_n) ? 0.0 : 1.0 / epsilon_n;
    MatrixXd a = q * h_y;
    a.diagonal().array() += lambda;
    const VectorXd rhs = lambda * efficient + q * r;
    if (lambda == 0.0) {
      Eigen::FullPivLU<MatrixXd> lu(a);
      if (!lu.isInvertible() || lu.rcond() < 1e-12)
        throw NumericalError("fredholm_exact: H_Y is singular; a finite eps * n is required");
      out.h = lu.solve(rhs);
    } else {
      out.h = Eigen::PartialPivLU<MatrixXd>(a).solve(rhs);
    }
    out.residual = (a * out.h - rhs).cwiseAbs().maxCoeff();
  }
  if (data_counts.size() > 0) {
    require(data_counts.size() == ny, "fredholm_exact: data counts do not match the support");
    out.delta_hat = delta + data_counts.dot(out.h) / data_counts.sum();
  } else {
    out.delta_hat = delta + f.dot(out.h);
  }
  return out;
}

}  // namespace locrobust
