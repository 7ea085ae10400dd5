#include "mixlogit/parameters.hpp"

#include <cmath>

namespace mixlogit {

ParameterLayout ParameterLayout::make(const ModelSpec& spec, int wf, int wr) {
  ParameterLayout l;
  l.n_beta = spec.beta_alt_specific ? wf * (spec.n_items - 1) : wf;
  l.w = wr * (spec.n_items - 1);
  l.n_gamma = spec.n_free_gammas();
  l.n_tau = spec.variant == Variant::Nested ? spec.n_nests : 0;
  return l;
}

ThetaParts unpack(const Eigen::VectorXd& theta, const ParameterLayout& layout) {
  if (theta.size() != layout.size())
    throw StructuralError("theta length " + std::to_string(theta.size()) +
                          " does not match layout size " + std::to_string(layout.size()));
  if (!theta.allFinite()) throw NumericalError("non-finite theta");

  ThetaParts parts;
  parts.beta = theta.segment(layout.beta_offset(), layout.n_beta);
  parts.xi = theta.segment(layout.xi_offset(), layout.w);

  const int w = layout.w;
  parts.chol_sigma = Eigen::MatrixXd::Zero(w, w);
  int k = layout.chol_offset();
  parts.logdet_sigma = 0.0;
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < i; ++j) parts.chol_sigma(i, j) = theta[k++];
    const double c = theta[k++];
    parts.chol_sigma(i, i) = std::exp(c);
    parts.logdet_sigma += 2.0 * c;
  }
  parts.sigma = parts.chol_sigma * parts.chol_sigma.transpose();
  Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(w, w);
  parts.chol_sigma.triangularView<Eigen::Lower>().solveInPlace(linv);
  parts.sigma_inv = linv.transpose() * linv;

  parts.gamma = theta.segment(layout.gamma_offset(), layout.n_gamma);
  parts.tau = theta.segment(layout.eta_offset(), layout.n_tau).array().exp();
  return parts;
}

Eigen::VectorXd pack(const ThetaParts& parts, const ParameterLayout& layout) {
  Eigen::VectorXd theta(layout.size());
  theta.segment(layout.beta_offset(), layout.n_beta) = parts.beta;
  theta.segment(layout.xi_offset(), layout.w) = parts.xi;
  int k = layout.chol_offset();
  for (int i = 0; i < layout.w; ++i) {
    for (int j = 0; j < i; ++j) theta[k++] = parts.chol_sigma(i, j);
    theta[k++] = std::log(parts.chol_sigma(i, i));
  }
  theta.segment(layout.gamma_offset(), layout.n_gamma) = parts.gamma;
  theta.segment(layout.eta_offset(), layout.n_tau) = parts.tau.array().log();
  return theta;
}

}  // namespace mixlogit
