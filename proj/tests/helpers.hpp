#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "mixlogit/hierarchical_model.hpp"
#include "mixlogit/parameters.hpp"
#include "mixlogit/rng.hpp"
#include "mixlogit/types.hpp"

namespace testutil {

using mixlogit::Rng;

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double up = f(xp);
    xp[i] = x[i] - h;
    const double dn = f(xp);
    xp[i] = x[i];
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const Eigen::VectorXd up = f(xp);
    xp[i] = x[i] - h;
    const Eigen::VectorXd dn = f(xp);
    xp[i] = x[i];
    j.col(i) = (up - dn) / (2.0 * h);
  }
  return j;
}

inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  const double scale = want.cwiseAbs().maxCoeff();
  return (got - want).cwiseAbs().maxCoeff() / (scale + 1e-10);
}

struct TestInstance {
  mixlogit::ModelSpec spec;
  mixlogit::ChoiceDataset data;
  mixlogit::ParameterLayout layout;
  Eigen::VectorXd theta;
  Eigen::MatrixXd alpha;  // w x S
};

// Small random model instance with varying choice sets, for derivative and
// degeneracy checks.
inline TestInstance random_instance(mixlogit::Variant variant, Rng& rng, int n_groups = 1,
                                    int n_occasions = 0) {
  using namespace mixlogit;
  TestInstance inst;
  auto& spec = inst.spec;
  spec.variant = variant;
  spec.n_items = 3 + static_cast<int>(rng() % 2);
  const int wf = static_cast<int>(rng() % 3);        // 0..2
  const int wr = 1 + static_cast<int>(rng() % 2);    // 1..2
  spec.beta_alt_specific = rng() % 4 == 0;

  if (variant == Variant::Bundle) {
    for (int j = 0; j < spec.n_items; ++j) spec.bundles.push_back({j});
    const int extra = 1 + static_cast<int>(rng() % 3);
    for (int b = 0; b < extra; ++b) {
      int x = static_cast<int>(rng() % static_cast<unsigned>(spec.n_items));
      int y = static_cast<int>(rng() % static_cast<unsigned>(spec.n_items));
      if (x == y) y = (y + 1) % spec.n_items;
      spec.bundles.push_back({std::min(x, y), std::max(x, y)});
    }
  }
  if (variant == Variant::Nested) {
    spec.n_nests = 2;
    spec.nest_of.resize(static_cast<size_t>(spec.n_items));
    for (int j = 0; j < spec.n_items; ++j)
      spec.nest_of[static_cast<size_t>(j)] = j < spec.n_items / 2 ? 0 : 1;
  }
  spec.validate();

  auto& data = inst.data;
  data.n_items = spec.n_items;
  data.wf = wf;
  data.wr = wr;
  const int n_alts = spec.n_choice_alts();
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < n_groups; ++i) {
    ChoiceGroup g;
    g.id = i + 1;
    const int T = n_occasions > 0 ? n_occasions : 1 + static_cast<int>(rng() % 4);
    for (int t = 0; t < T; ++t) {
      Occasion occ;
      occ.alts.push_back(0);
      for (int c = 1; c < n_alts; ++c)
        if (rng() % 4 != 0) occ.alts.push_back(c);
      occ.chosen = occ.alts[rng() % occ.alts.size()];
      occ.xf = Eigen::MatrixXd::Zero(spec.n_items, wf);
      occ.xr = Eigen::MatrixXd::Zero(spec.n_items, wr);
      for (int j = 1; j < spec.n_items; ++j) {
        for (int k = 0; k < wf; ++k) occ.xf(j, k) = nd(rng);
        for (int k = 0; k < wr; ++k) occ.xr(j, k) = nd(rng);
      }
      g.occasions.push_back(std::move(occ));
    }
    data.groups.push_back(std::move(g));
  }
  data.validate(spec);

  inst.layout = ParameterLayout::make(spec, wf, wr);
  inst.theta = 0.3 * mixlogit::randn(inst.layout.size(), rng);
  inst.alpha = 0.5 *
               Eigen::MatrixXd::NullaryExpr(inst.layout.w, n_groups,
                                            [&]() { return nd(rng); });
  return inst;
}

// Conjugate Gaussian-Gaussian surrogate: theta is xi itself, Sigma is fixed,
// and each group's log-likelihood is the exact quadratic
// -(1/2)(alpha_i - c_i)' Q_i (alpha_i - c_i). Everything about its posterior
// is available in closed form, which makes it the oracle for the conjugate
// machinery.
class GaussianSurrogate final : public mixlogit::HierarchicalModel {
 public:
  Eigen::MatrixXd centers;              // w x S
  std::vector<Eigen::MatrixXd> curv;    // Q_i, PSD
  Eigen::MatrixXd sigma;
  Eigen::VectorXd prior_mean;
  double prior_sd = 10.0;
  bool xi_is_theta = true;  // false: alpha prior fixed at xi0, theta inert
  Eigen::VectorXd xi0;

  GaussianSurrogate(Eigen::MatrixXd c, std::vector<Eigen::MatrixXd> q, Eigen::MatrixXd s)
      : centers(std::move(c)), curv(std::move(q)), sigma(std::move(s)) {
    prior_mean = Eigen::VectorXd::Zero(centers.rows());
    xi0 = Eigen::VectorXd::Zero(centers.rows());
  }

  int theta_dim() const override { return static_cast<int>(centers.rows()); }
  int alpha_dim() const override { return static_cast<int>(centers.rows()); }
  int num_groups() const override { return static_cast<int>(centers.cols()); }

  mixlogit::AlphaPrior alpha_prior(const Eigen::VectorXd& theta) const override {
    mixlogit::AlphaPrior ap;
    ap.xi = xi_is_theta ? theta : xi0;
    ap.sigma = sigma;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    ap.chol = llt.matrixL();
    ap.logdet = 0.0;
    for (int i = 0; i < sigma.rows(); ++i) ap.logdet += 2.0 * std::log(ap.chol(i, i));
    ap.sigma_inv = llt.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
    return ap;
  }

  double evaluate(const Eigen::VectorXd& theta, const Eigen::MatrixXd& alpha,
                  Eigen::VectorXd* grad_theta, Eigen::MatrixXd* grad_alpha,
                  std::vector<Eigen::MatrixXd>* neg_hess) const override {
    double ll = 0.0;
    if (grad_theta) grad_theta->setZero(theta.size());
    if (grad_alpha) grad_alpha->setZero(alpha.rows(), alpha.cols());
    if (neg_hess) neg_hess->assign(curv.begin(), curv.end());
    for (int i = 0; i < alpha.cols(); ++i) {
      const Eigen::VectorXd dev = alpha.col(i) - centers.col(i);
      const Eigen::VectorXd qdev = curv[static_cast<size_t>(i)] * dev;
      ll -= 0.5 * dev.dot(qdev);
      if (grad_alpha) grad_alpha->col(i) = -qdev;
    }
    return ll;
  }

  Eigen::VectorXd grad_theta_alpha_prior(const Eigen::VectorXd& theta,
                                         const Eigen::MatrixXd& alpha) const override {
    if (!xi_is_theta) return Eigen::VectorXd::Zero(theta.size());
    const mixlogit::AlphaPrior ap = alpha_prior(theta);
    return ap.sigma_inv * (alpha.colwise() - theta).rowwise().sum();
  }

  double log_prior(const Eigen::VectorXd& theta) const override {
    double lp = 0.0;
    for (int i = 0; i < theta.size(); ++i)
      lp += mixlogit::gaussian_log_density(theta[i] - prior_mean[i], prior_sd);
    return lp;
  }

  Eigen::VectorXd grad_log_prior(const Eigen::VectorXd& theta) const override {
    return -(theta - prior_mean) / (prior_sd * prior_sd);
  }

  // Exact conditional posterior of alpha_i given xi.
  void exact_conditional(const Eigen::VectorXd& xi, int i, Eigen::VectorXd* mu,
                         Eigen::MatrixXd* v) const {
    const Eigen::MatrixXd sigma_inv =
        sigma.llt().solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
    const Eigen::MatrixXd prec = curv[static_cast<size_t>(i)] + sigma_inv;
    *v = prec.llt().solve(Eigen::MatrixXd::Identity(prec.rows(), prec.cols()));
    *mu = *v * (curv[static_cast<size_t>(i)] * centers.col(i) + sigma_inv * xi);
  }

  // Exact marginal posterior of theta (= xi) when xi_is_theta.
  void exact_theta_posterior(Eigen::VectorXd* mean, Eigen::MatrixXd* cov) const {
    const int w = theta_dim();
    Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(w, w) / (prior_sd * prior_sd);
    Eigen::VectorXd shift = prior_mean / (prior_sd * prior_sd);
    for (int i = 0; i < num_groups(); ++i) {
      const Eigen::MatrixXd qinv = curv[static_cast<size_t>(i)].llt().solve(
          Eigen::MatrixXd::Identity(w, w));
      const Eigen::MatrixXd obs_prec =
          (sigma + qinv).llt().solve(Eigen::MatrixXd::Identity(w, w));
      prec += obs_prec;
      shift += obs_prec * centers.col(i);
    }
    *cov = prec.llt().solve(Eigen::MatrixXd::Identity(w, w));
    *mean = *cov * shift;
  }

  // Log evidence when xi_is_theta == false (theta integrates out trivially).
  double exact_log_evidence() const {
    const int w = theta_dim();
    double lz = 0.0;
    for (int i = 0; i < num_groups(); ++i) {
      const Eigen::MatrixXd& q = curv[static_cast<size_t>(i)];
      const Eigen::MatrixXd qinv = q.llt().solve(Eigen::MatrixXd::Identity(w, w));
      const Eigen::MatrixXd m = sigma + qinv;
      const Eigen::VectorXd dev = centers.col(i) - xi0;
      const Eigen::LLT<Eigen::MatrixXd> llt(m);
      double logdet_m = 0.0, logdet_q = 0.0;
      const Eigen::MatrixXd lq = q.llt().matrixL();
      for (int r = 0; r < w; ++r) {
        logdet_m += 2.0 * std::log(Eigen::MatrixXd(llt.matrixL())(r, r));
        logdet_q += 2.0 * std::log(lq(r, r));
      }
      // integral of exp(quadratic) * N(xi0, Sigma)
      lz += 0.5 * w * std::log(2.0 * M_PI) - 0.5 * logdet_q;
      lz += -0.5 * (w * std::log(2.0 * M_PI) + logdet_m + dev.dot(llt.solve(dev)));
    }
    return lz;
  }
};

}  // namespace testutil
