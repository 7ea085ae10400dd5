#include "mixlogit/hierarchical_model.hpp"

namespace mixlogit {

MixedLogitModel::MixedLogitModel(const ChoiceDataset& data, ModelSpec spec,
                                 PriorSpec prior)
    : data_(&data), spec_(std::move(spec)), prior_(prior),
      layout_(ParameterLayout::make(spec_, data.wf, data.wr)) {
  data.validate(spec_);
}

AlphaPrior MixedLogitModel::alpha_prior(const Eigen::VectorXd& theta) const {
  ThetaParts parts = unpack(theta, layout_);
  AlphaPrior ap;
  ap.xi = std::move(parts.xi);
  ap.sigma = std::move(parts.sigma);
  ap.sigma_inv = std::move(parts.sigma_inv);
  ap.chol = std::move(parts.chol_sigma);
  ap.logdet = parts.logdet_sigma;
  return ap;
}

double MixedLogitModel::evaluate(const Eigen::VectorXd& theta, const Eigen::MatrixXd& alpha,
                                 Eigen::VectorXd* grad_theta, Eigen::MatrixXd* grad_alpha_out,
                                 std::vector<Eigen::MatrixXd>* neg_hess) const {
  const ThetaParts parts = unpack(theta, layout_);
  const int s = num_groups();
  const int w = layout_.w;

  unsigned flags = detail::kValue | detail::kScore;
  if (neg_hess) flags |= detail::kCurvature;
  if (grad_theta && spec_.variant == Variant::Nested) flags |= detail::kTauGrad;

  if (grad_theta) grad_theta->setZero(layout_.size());
  if (grad_alpha_out) grad_alpha_out->setZero(w, s);
  if (neg_hess) neg_hess->assign(static_cast<size_t>(s), Eigen::MatrixXd::Zero(w, w));

  double ll = 0.0;
  detail::OccasionEval ev;
  for (int i = 0; i < s; ++i) {
    const auto& group = data_->groups[static_cast<size_t>(i)];
    for (size_t t = 0; t < group.occasions.size(); ++t) {
      detail::evaluate_occasion(spec_, parts, alpha.col(i), group.occasions[t], flags, ev);
      if (!std::isfinite(ev.loglik))
        throw NumericalError("non-finite log-likelihood in group " +
                             std::to_string(group.id) + " occasion " + std::to_string(t));
      ll += ev.loglik;
      if (grad_theta) {
        grad_theta->segment(layout_.beta_offset(), layout_.n_beta).noalias() +=
            ev.design.fixed.transpose() * ev.score_v;
        for (size_t pos = 0; pos < ev.design.gamma_idx.size(); ++pos) {
          const int gi = ev.design.gamma_idx[pos];
          if (gi >= 0)
            (*grad_theta)[layout_.gamma_offset() + gi] +=
                ev.score_v[static_cast<Eigen::Index>(pos)];
        }
        if (spec_.variant == Variant::Nested)
          grad_theta->segment(layout_.eta_offset(), layout_.n_tau).array() +=
              ev.tau_grad.array() * parts.tau.array();
      }
      if (grad_alpha_out)
        grad_alpha_out->col(i).noalias() += ev.design.random.transpose() * ev.score_v;
      if (neg_hess)
        (*neg_hess)[static_cast<size_t>(i)].noalias() +=
            ev.design.random.transpose() * ev.curv_v * ev.design.random;
    }
  }
  return ll;
}

Eigen::VectorXd MixedLogitModel::grad_theta_alpha_prior(const Eigen::VectorXd& theta,
                                                        const Eigen::MatrixXd& alpha) const {
  return grad_theta_log_density_alpha(alpha, unpack(theta, layout_), layout_);
}

double MixedLogitModel::log_prior(const Eigen::VectorXd& theta) const {
  return mixlogit::log_prior(theta, layout_, prior_);
}

Eigen::VectorXd MixedLogitModel::grad_log_prior(const Eigen::VectorXd& theta) const {
  return mixlogit::grad_log_prior(theta, layout_, prior_);
}

}  // namespace mixlogit
