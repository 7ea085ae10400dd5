#pragma once

#include <Eigen/Dense>

#include <vector>

#include "mixlogit/choice_model.hpp"
#include "mixlogit/priors.hpp"
#include "mixlogit/types.hpp"

namespace mixlogit {

// Conditional Gaussian prior of the random coefficients, p(alpha_i | theta).
struct AlphaPrior {
  Eigen::VectorXd xi;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sigma_inv;
  Eigen::MatrixXd chol;  // lower, sigma = chol chol^T
  double logdet = 0.0;
};

// Seam between the variational engine and a concrete hierarchical model with
// Gaussian random coefficients. The engine only ever talks to this interface,
// so exactly the same optimizer runs on the choice models and on analytic
// surrogates used as oracles in the tests.
class HierarchicalModel {
 public:
  virtual ~HierarchicalModel() = default;

  virtual int theta_dim() const = 0;
  virtual int alpha_dim() const = 0;
  virtual int num_groups() const = 0;

  virtual AlphaPrior alpha_prior(const Eigen::VectorXd& theta) const = 0;

  // Log-likelihood sum_i log p(y_i | theta, alpha_i); alpha is w x S. Any of
  // the output pointers may be null; neg_hess entries are -d2/dalpha2 per
  // group.
  virtual double evaluate(const Eigen::VectorXd& theta, const Eigen::MatrixXd& alpha,
                          Eigen::VectorXd* grad_theta, Eigen::MatrixXd* grad_alpha,
                          std::vector<Eigen::MatrixXd>* neg_hess) const = 0;

  // d/dtheta of sum_i log N(alpha_i; xi(theta), Sigma(theta)).
  virtual Eigen::VectorXd grad_theta_alpha_prior(const Eigen::VectorXd& theta,
                                                 const Eigen::MatrixXd& alpha) const = 0;

  virtual double log_prior(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd grad_log_prior(const Eigen::VectorXd& theta) const = 0;

  // Whether local negative Hessians need the PSD projection before the
  // conjugate update (true for the nested logit).
  virtual bool project_local_hessians() const { return false; }
};

// The three mixed logit variants over a ChoiceDataset.
class MixedLogitModel final : public HierarchicalModel {
 public:
  MixedLogitModel(const ChoiceDataset& data, ModelSpec spec, PriorSpec prior);

  int theta_dim() const override { return layout_.size(); }
  int alpha_dim() const override { return layout_.w; }
  int num_groups() const override { return static_cast<int>(data_->groups.size()); }

  AlphaPrior alpha_prior(const Eigen::VectorXd& theta) const override;
  double evaluate(const Eigen::VectorXd& theta, const Eigen::MatrixXd& alpha,
                  Eigen::VectorXd* grad_theta, Eigen::MatrixXd* grad_alpha,
                  std::vector<Eigen::MatrixXd>* neg_hess) const override;
  Eigen::VectorXd grad_theta_alpha_prior(const Eigen::VectorXd& theta,
                                         const Eigen::MatrixXd& alpha) const override;
  double log_prior(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd grad_log_prior(const Eigen::VectorXd& theta) const override;
  bool project_local_hessians() const override {
    return spec_.variant == Variant::Nested;
  }

  const ParameterLayout& layout() const { return layout_; }
  const ModelSpec& spec() const { return spec_; }
  const PriorSpec& prior() const { return prior_; }
  const ChoiceDataset& data() const { return *data_; }

 private:
  const ChoiceDataset* data_;
  ModelSpec spec_;
  PriorSpec prior_;
  ParameterLayout layout_;
};

}  // namespace mixlogit
