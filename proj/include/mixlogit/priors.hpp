#pragma once

#include <Eigen/Dense>

#include "mixlogit/parameters.hpp"

namespace mixlogit {

enum class SigmaPrior { HuangWand, Lkj };

struct PriorSpec {
  SigmaPrior sigma_prior = SigmaPrior::HuangWand;
  double hw_nu = 2.0;
  double hw_scale = 100.0;    // A_l
  double gaussian_sd = 10.0;  // beta, xi, gamma priors are N(0, sd^2)
  double lkj_scale = 10.0;    // Half-Cauchy scale on the marginal sd's
  double tau_scale = 1.5;
  double tau_df = 5.0;
};

double gaussian_log_density(double x, double sd);

// Huang-Wand density on Sigma, unnormalized:
//   |Sigma|^{-(nu+2w)/2} prod_l { nu (Sigma^{-1})_{ll} + a^{-2} }^{-(nu+w)/2}
double huang_wand_log_density(const Eigen::MatrixXd& sigma_inv, double logdet_sigma,
                              double nu, double a);

// LKJ-style prior evaluated through Sigma = T Omega T: Half-Cauchy(0, scale)
// on each sd, constant on Omega, plus the Jacobian of Sigma -> (sd, Omega).
double lkj_sigma_log_density(const Eigen::MatrixXd& sigma, double scale);

double half_t_log_density(double tau, double scale, double df);

// log |d Sigma / d coords| for the lower-Cholesky-with-log-diagonal map.
double chol_log_jacobian(const Eigen::MatrixXd& chol_sigma);

// Prior log-density of theta in unconstrained coordinates (includes the
// Cholesky and eta -> tau Jacobians). The Sigma priors are unnormalized.
double log_prior(const Eigen::VectorXd& theta, const ParameterLayout& layout,
                 const PriorSpec& prior);
Eigen::VectorXd grad_log_prior(const Eigen::VectorXd& theta, const ParameterLayout& layout,
                               const PriorSpec& prior);

// sum_i log N(alpha_i; xi, Sigma) for alpha given as a w x S matrix.
double log_density_alpha(const Eigen::MatrixXd& alpha, const ThetaParts& parts);

// Gradient of log_density_alpha with respect to theta (xi and Cholesky
// coordinate blocks; all other blocks zero).
Eigen::VectorXd grad_theta_log_density_alpha(const Eigen::MatrixXd& alpha,
                                             const ThetaParts& parts,
                                             const ParameterLayout& layout);

// Per-group gradients with respect to alpha_i: -Sigma^{-1} (alpha_i - xi).
Eigen::MatrixXd grad_alpha_log_density_alpha(const Eigen::MatrixXd& alpha,
                                             const ThetaParts& parts);

// Chain a symmetric d/dSigma gradient to the unconstrained Cholesky coords.
Eigen::VectorXd chain_sigma_grad_to_chol(const Eigen::MatrixXd& g_sigma,
                                         const Eigen::MatrixXd& chol_sigma);

}  // namespace mixlogit
