#include "mixlogit/priors.hpp"

#include <cmath>

namespace mixlogit {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

double gaussian_log_density(double x, double sd) {
  return -0.5 * (kLog2Pi + 2.0 * std::log(sd)) - x * x / (2.0 * sd * sd);
}

double huang_wand_log_density(const Eigen::MatrixXd& sigma_inv, double logdet_sigma,
                              double nu, double a) {
  const int w = static_cast<int>(sigma_inv.rows());
  double lp = -0.5 * (nu + 2.0 * w) * logdet_sigma;
  for (int l = 0; l < w; ++l)
    lp -= 0.5 * (nu + w) * std::log(nu * sigma_inv(l, l) + 1.0 / (a * a));
  return lp;
}

double lkj_sigma_log_density(const Eigen::MatrixXd& sigma, double scale) {
  const int w = static_cast<int>(sigma.rows());
  double lp = -w * std::log(2.0);
  for (int l = 0; l < w; ++l) {
    const double s2 = sigma(l, l);
    // Half-Cauchy(0, scale) on sd_l plus the -w log sd_l Jacobian piece of
    // Sigma -> (sd, Omega); Omega itself is uniform.
    lp += std::log(2.0 / (M_PI * scale)) - std::log1p(s2 / (scale * scale));
    lp -= 0.5 * w * std::log(s2);
  }
  return lp;
}

double half_t_log_density(double tau, double scale, double df) {
  return std::log(2.0) + std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * M_PI) - std::log(scale) -
         0.5 * (df + 1.0) * std::log1p(tau * tau / (df * scale * scale));
}

double chol_log_jacobian(const Eigen::MatrixXd& chol_sigma) {
  const int w = static_cast<int>(chol_sigma.rows());
  double lj = w * std::log(2.0);
  for (int i = 0; i < w; ++i) lj += (w - i + 1.0) * std::log(chol_sigma(i, i));
  return lj;
}

Eigen::VectorXd chain_sigma_grad_to_chol(const Eigen::MatrixXd& g_sigma,
                                         const Eigen::MatrixXd& chol_sigma) {
  const int w = static_cast<int>(chol_sigma.rows());
  const Eigen::MatrixXd m = 2.0 * (g_sigma * chol_sigma);
  Eigen::VectorXd out(w * (w + 1) / 2);
  int k = 0;
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < i; ++j) out[k++] = m(i, j);
    out[k++] = m(i, i) * chol_sigma(i, i);  // diagonal stored on log scale
  }
  return out;
}

double log_prior(const Eigen::VectorXd& theta, const ParameterLayout& layout,
                 const PriorSpec& prior) {
  const ThetaParts parts = unpack(theta, layout);
  double lp = 0.0;
  for (int i = 0; i < parts.beta.size(); ++i)
    lp += gaussian_log_density(parts.beta[i], prior.gaussian_sd);
  for (int i = 0; i < parts.xi.size(); ++i)
    lp += gaussian_log_density(parts.xi[i], prior.gaussian_sd);
  for (int i = 0; i < parts.gamma.size(); ++i)
    lp += gaussian_log_density(parts.gamma[i], prior.gaussian_sd);

  if (prior.sigma_prior == SigmaPrior::HuangWand)
    lp += huang_wand_log_density(parts.sigma_inv, parts.logdet_sigma, prior.hw_nu,
                                 prior.hw_scale);
  else
    lp += lkj_sigma_log_density(parts.sigma, prior.lkj_scale);
  lp += chol_log_jacobian(parts.chol_sigma);

  for (int k = 0; k < parts.tau.size(); ++k) {
    lp += half_t_log_density(parts.tau[k], prior.tau_scale, prior.tau_df);
    lp += std::log(parts.tau[k]);  // d tau / d eta
  }
  return lp;
}

Eigen::VectorXd grad_log_prior(const Eigen::VectorXd& theta, const ParameterLayout& layout,
                               const PriorSpec& prior) {
  const ThetaParts parts = unpack(theta, layout);
  const int w = layout.w;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.size());

  const double inv_var = 1.0 / (prior.gaussian_sd * prior.gaussian_sd);
  grad.segment(layout.beta_offset(), layout.n_beta) = -inv_var * parts.beta;
  grad.segment(layout.xi_offset(), w) = -inv_var * parts.xi;
  grad.segment(layout.gamma_offset(), layout.n_gamma) = -inv_var * parts.gamma;

  Eigen::MatrixXd g_sigma(w, w);
  if (prior.sigma_prior == SigmaPrior::HuangWand) {
    const double nu = prior.hw_nu, a = prior.hw_scale;
    Eigen::VectorXd dcoef(w);
    for (int l = 0; l < w; ++l)
      dcoef[l] = nu / (nu * parts.sigma_inv(l, l) + 1.0 / (a * a));
    g_sigma = -0.5 * (nu + 2.0 * w) * parts.sigma_inv +
              0.5 * (nu + w) * parts.sigma_inv * dcoef.asDiagonal() * parts.sigma_inv;
  } else {
    g_sigma.setZero();
    const double s2 = prior.lkj_scale * prior.lkj_scale;
    for (int l = 0; l < w; ++l)
      g_sigma(l, l) = -1.0 / (s2 + parts.sigma(l, l)) - 0.5 * w / parts.sigma(l, l);
  }
  Eigen::VectorXd chol_grad = chain_sigma_grad_to_chol(g_sigma, parts.chol_sigma);
  // Jacobian term: only the log-diagonal coordinates contribute.
  int k = 0;
  for (int i = 0; i < w; ++i) {
    k += i;
    chol_grad[k++] += w - i + 1.0;
  }
  grad.segment(layout.chol_offset(), layout.n_chol()) = chol_grad;

  for (int t = 0; t < layout.n_tau; ++t) {
    const double tau = parts.tau[t];
    const double s2df = prior.tau_scale * prior.tau_scale * prior.tau_df;
    grad[layout.eta_offset() + t] = 1.0 - (prior.tau_df + 1.0) * tau * tau / (s2df + tau * tau);
  }
  return grad;
}

double log_density_alpha(const Eigen::MatrixXd& alpha, const ThetaParts& parts) {
  const int w = static_cast<int>(alpha.rows());
  const int s = static_cast<int>(alpha.cols());
  double quad = 0.0;
  for (int i = 0; i < s; ++i) {
    Eigen::VectorXd z = alpha.col(i) - parts.xi;
    parts.chol_sigma.triangularView<Eigen::Lower>().solveInPlace(z);
    quad += z.squaredNorm();
  }
  return -0.5 * (s * (w * kLog2Pi + parts.logdet_sigma) + quad);
}

Eigen::VectorXd grad_theta_log_density_alpha(const Eigen::MatrixXd& alpha,
                                             const ThetaParts& parts,
                                             const ParameterLayout& layout) {
  const int w = static_cast<int>(alpha.rows());
  const int s = static_cast<int>(alpha.cols());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.size());

  Eigen::MatrixXd dev = alpha.colwise() - parts.xi;  // w x S
  grad.segment(layout.xi_offset(), w) = parts.sigma_inv * dev.rowwise().sum();

  const Eigen::MatrixXd r = dev * dev.transpose();
  const Eigen::MatrixXd g_sigma =
      0.5 * (parts.sigma_inv * r * parts.sigma_inv - s * parts.sigma_inv);
  grad.segment(layout.chol_offset(), layout.n_chol()) =
      chain_sigma_grad_to_chol(g_sigma, parts.chol_sigma);
  return grad;
}

Eigen::MatrixXd grad_alpha_log_density_alpha(const Eigen::MatrixXd& alpha,
                                             const ThetaParts& parts) {
  return -parts.sigma_inv * (alpha.colwise() - parts.xi);
}

}  // namespace mixlogit
