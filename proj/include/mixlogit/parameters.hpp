#pragma once

#include <Eigen/Dense>

#include "mixlogit/types.hpp"

namespace mixlogit {

// Index map for the packed unconstrained global parameter vector theta:
//   [ beta | xi | chol(Sigma) coords | gamma | eta ]
// The covariance block stores the lower Cholesky factor row-major with the
// diagonal on the log scale, so every finite theta yields a PD Sigma. tau is
// recovered as exp(eta).
struct ParameterLayout {
  int n_beta = 0;
  int w = 0;        // dim(alpha_i)
  int n_gamma = 0;
  int n_tau = 0;

  int n_chol() const { return w * (w + 1) / 2; }
  int beta_offset() const { return 0; }
  int xi_offset() const { return n_beta; }
  int chol_offset() const { return n_beta + w; }
  int gamma_offset() const { return chol_offset() + n_chol(); }
  int eta_offset() const { return gamma_offset() + n_gamma; }
  int size() const { return eta_offset() + n_tau; }

  static ParameterLayout make(const ModelSpec& spec, int wf, int wr);
};

struct ThetaParts {
  Eigen::VectorXd beta;
  Eigen::VectorXd xi;
  Eigen::MatrixXd chol_sigma;  // lower, positive diagonal
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sigma_inv;
  double logdet_sigma = 0.0;
  Eigen::VectorXd gamma;
  Eigen::VectorXd tau;
};

ThetaParts unpack(const Eigen::VectorXd& theta, const ParameterLayout& layout);
Eigen::VectorXd pack(const ThetaParts& parts, const ParameterLayout& layout);

}  // namespace mixlogit
