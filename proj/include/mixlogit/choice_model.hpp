#pragma once

#include <Eigen/Dense>

#include "mixlogit/parameters.hpp"
#include "mixlogit/types.hpp"

namespace mixlogit {

// Nearest symmetric PSD matrix: symmetrize, eigendecompose, clamp negative
// eigenvalues to zero. Identity on inputs that are already PSD. n_clamped, if
// given, receives the number of clamped eigenvalues.
Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& a, int* n_clamped = nullptr);

// Effective per-occasion design over the available choice alternatives.
// Utilities are v = fixed * beta + random * alpha + gamma_shift, which covers
// all three variants (bundle rows sum their member items' covariates).
struct OccasionDesign {
  Eigen::MatrixXd fixed;        // n_avail x n_beta
  Eigen::MatrixXd random;       // n_avail x w
  Eigen::VectorXd gamma_shift;  // n_avail
  std::vector<int> gamma_idx;   // n_avail, -1 when the alternative has no gamma
};

OccasionDesign build_design(const ModelSpec& spec, const ThetaParts& parts,
                            const Occasion& occ);

Eigen::VectorXd occasion_utilities(const ModelSpec& spec, const ThetaParts& parts,
                                   const Eigen::VectorXd& alpha, const Occasion& occ);

// Probabilities over occ.alts given utilities v. tau is ignored except for
// the Nested variant, where it must hold one positive entry per nest.
Eigen::VectorXd choice_probabilities(const ModelSpec& spec, const Occasion& occ,
                                     const Eigen::VectorXd& v,
                                     const Eigen::VectorXd& tau);

double group_log_likelihood(const ModelSpec& spec, const ThetaParts& parts,
                            const Eigen::VectorXd& alpha, const ChoiceGroup& group);

// Gradient of the group log-likelihood with respect to alpha_i.
Eigen::VectorXd grad_alpha(const ModelSpec& spec, const ThetaParts& parts,
                           const Eigen::VectorXd& alpha, const ChoiceGroup& group);

// Negative Hessian of the group log-likelihood with respect to alpha_i.
// PSD for Standard/Bundle; may be indefinite for Nested.
Eigen::MatrixXd neg_hess_alpha(const ModelSpec& spec, const ThetaParts& parts,
                               const Eigen::VectorXd& alpha, const ChoiceGroup& group);

// Gradient of sum_i log p(y_i | theta, alpha_i) with respect to theta. Only
// the beta, gamma and eta blocks are nonzero; xi and the Sigma coordinates
// enter the likelihood solely through p(alpha | theta).
Eigen::VectorXd grad_theta_loglik(const ModelSpec& spec, const ParameterLayout& layout,
                                  const ThetaParts& parts, const Eigen::MatrixXd& alpha,
                                  const ChoiceDataset& data);

namespace detail {

enum EvalFlags : unsigned {
  kValue = 1u,
  kProbs = 2u,
  kScore = 4u,
  kCurvature = 8u,
  kTauGrad = 16u,
};

struct OccasionEval {
  OccasionDesign design;
  Eigen::VectorXd v;
  Eigen::VectorXd p;
  Eigen::VectorXd score_v;   // d loglik / d v
  Eigen::MatrixXd curv_v;    // -d2 loglik / dv dv'
  Eigen::VectorXd tau_grad;  // d loglik / d tau (Nested only)
  double loglik = 0.0;
};

void evaluate_occasion(const ModelSpec& spec, const ThetaParts& parts,
                       const Eigen::VectorXd& alpha, const Occasion& occ,
                       unsigned flags, OccasionEval& out);

}  // namespace detail

}  // namespace mixlogit
