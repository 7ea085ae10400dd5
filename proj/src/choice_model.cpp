#include "mixlogit/choice_model.hpp"

#include <cmath>
#include <limits>

namespace mixlogit {

Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& a, int* n_clamped) {
  if (!a.allFinite()) throw NumericalError("nearest_psd: non-finite input");
  if (a.rows() != a.cols()) throw StructuralError("nearest_psd: matrix not square");
  Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw NumericalError("nearest_psd: eigendecomposition failed");
  if (n_clamped) *n_clamped = 0;
  if (es.eigenvalues().minCoeff() >= 0.0) return sym;
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < 0.0) {
      lam[i] = 0.0;
      if (n_clamped) ++*n_clamped;
    }
  }
  Eigen::MatrixXd out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

OccasionDesign build_design(const ModelSpec& spec, const ThetaParts& parts,
                            const Occasion& occ) {
  const int n = static_cast<int>(occ.alts.size());
  const int n_items = static_cast<int>(occ.xf.rows());
  const int wf = static_cast<int>(occ.xf.cols());
  const int wr = static_cast<int>(occ.xr.cols());
  const int n_beta = spec.beta_alt_specific ? wf * (n_items - 1) : wf;
  const int w = wr * (n_items - 1);
  if (n == 0) throw StructuralError("empty choice set");

  OccasionDesign d;
  d.fixed = Eigen::MatrixXd::Zero(n, n_beta);
  d.random = Eigen::MatrixXd::Zero(n, w);
  d.gamma_shift = Eigen::VectorXd::Zero(n);
  d.gamma_idx.assign(static_cast<size_t>(n), -1);

  auto add_item = [&](int pos, int item) {
    if (item == 0) return;  // reference: differenced covariates are zero
    const int blk = item - 1;
    if (spec.beta_alt_specific)
      d.fixed.row(pos).segment(blk * wf, wf) += occ.xf.row(item);
    else
      d.fixed.row(pos) += occ.xf.row(item);
    d.random.row(pos).segment(blk * wr, wr) += occ.xr.row(item);
  };

  for (int pos = 0; pos < n; ++pos) {
    const int alt = occ.alts[static_cast<size_t>(pos)];
    if (spec.variant == Variant::Bundle) {
      for (int item : spec.bundles[static_cast<size_t>(alt)]) add_item(pos, item);
      const int gi = spec.gamma_index(alt);
      d.gamma_idx[static_cast<size_t>(pos)] = gi;
      if (gi >= 0) d.gamma_shift[pos] = parts.gamma[gi];
    } else {
      add_item(pos, alt);
    }
  }
  return d;
}

Eigen::VectorXd occasion_utilities(const ModelSpec& spec, const ThetaParts& parts,
                                   const Eigen::VectorXd& alpha, const Occasion& occ) {
  const int w = static_cast<int>(occ.xr.cols()) * (static_cast<int>(occ.xr.rows()) - 1);
  if (alpha.size() != w)
    throw StructuralError("alpha length " + std::to_string(alpha.size()) +
                          " does not match w = " + std::to_string(w));
  OccasionDesign d = build_design(spec, parts, occ);
  if (d.fixed.cols() != parts.beta.size())
    throw StructuralError("beta length does not match design");
  return d.fixed * parts.beta + d.random * alpha + d.gamma_shift;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// Stable per-nest aggregates of the nested logit, Eq-style:
//   lse_l = log sum_{j in B_l} exp(v_j / tau_l), q_j = exp(v_j/tau_l - lse_l),
//   log W_l = tau_l lse_l, log D = lse of log W, P_l = exp(log W_l - log D).
struct NestedEval {
  std::vector<int> nest_of_pos;
  Eigen::VectorXd q;    // within-nest probabilities, per position
  Eigen::VectorXd pl;   // nest probabilities
  Eigen::VectorXd lse;  // per nest
  Eigen::VectorXd p;    // choice probabilities, per position
  double logd = 0.0;
};

NestedEval nested_eval(const ModelSpec& spec, const std::vector<int>& alts,
                       const Eigen::VectorXd& v, const Eigen::VectorXd& tau) {
  const int n = static_cast<int>(alts.size());
  const int K = spec.n_nests;
  if (tau.size() != K) throw StructuralError("tau length does not match nests");
  if ((tau.array() <= 0.0).any()) throw DomainError("nesting parameter tau must be positive");

  NestedEval ne;
  ne.nest_of_pos.resize(static_cast<size_t>(n));
  Eigen::VectorXd nest_max = Eigen::VectorXd::Constant(K, kNegInf);
  for (int pos = 0; pos < n; ++pos) {
    const int l = spec.nest_of[static_cast<size_t>(alts[static_cast<size_t>(pos)])];
    ne.nest_of_pos[static_cast<size_t>(pos)] = l;
    nest_max[l] = std::max(nest_max[l], v[pos] / tau[l]);
  }
  Eigen::VectorXd nest_sum = Eigen::VectorXd::Zero(K);
  for (int pos = 0; pos < n; ++pos) {
    const int l = ne.nest_of_pos[static_cast<size_t>(pos)];
    nest_sum[l] += std::exp(v[pos] / tau[l] - nest_max[l]);
  }
  ne.lse.resize(K);
  Eigen::VectorXd logw(K);
  double logw_max = kNegInf;
  for (int l = 0; l < K; ++l) {
    ne.lse[l] = nest_max[l] > kNegInf ? nest_max[l] + std::log(nest_sum[l]) : kNegInf;
    logw[l] = tau[l] * ne.lse[l];
    logw_max = std::max(logw_max, logw[l]);
  }
  double dsum = 0.0;
  for (int l = 0; l < K; ++l)
    if (logw[l] > kNegInf) dsum += std::exp(logw[l] - logw_max);
  ne.logd = logw_max + std::log(dsum);

  ne.pl.resize(K);
  for (int l = 0; l < K; ++l)
    ne.pl[l] = logw[l] > kNegInf ? std::exp(logw[l] - ne.logd) : 0.0;
  ne.q.resize(n);
  ne.p.resize(n);
  for (int pos = 0; pos < n; ++pos) {
    const int l = ne.nest_of_pos[static_cast<size_t>(pos)];
    ne.q[pos] = std::exp(v[pos] / tau[l] - ne.lse[l]);
    ne.p[pos] = ne.q[pos] * ne.pl[l];
  }
  return ne;
}

}  // namespace

namespace detail {

void evaluate_occasion(const ModelSpec& spec, const ThetaParts& parts,
                       const Eigen::VectorXd& alpha, const Occasion& occ,
                       unsigned flags, OccasionEval& out) {
  out.design = build_design(spec, parts, occ);
  const int n = static_cast<int>(occ.alts.size());
  out.v = out.design.fixed * parts.beta + out.design.random * alpha +
          out.design.gamma_shift;
  const int cp = occ.chosen_pos();

  if (spec.variant != Variant::Nested) {
    const double lse = log_sum_exp(out.v);
    out.p = (out.v.array() - lse).exp();
    out.loglik = out.v[cp] - lse;
    if (flags & kScore) {
      out.score_v = -out.p;
      out.score_v[cp] += 1.0;
    }
    if (flags & kCurvature)
      out.curv_v = Eigen::MatrixXd(out.p.asDiagonal()) - out.p * out.p.transpose();
    return;
  }

  const Eigen::VectorXd& tau = parts.tau;
  NestedEval ne = nested_eval(spec, occ.alts, out.v, tau);
  out.p = ne.p;
  const int k = ne.nest_of_pos[static_cast<size_t>(cp)];
  out.loglik = out.v[cp] / tau[k] + (tau[k] - 1.0) * ne.lse[k] - ne.logd;

  if (flags & kScore) {
    out.score_v.resize(n);
    for (int pos = 0; pos < n; ++pos) {
      const int l = ne.nest_of_pos[static_cast<size_t>(pos)];
      double s = -ne.p[pos];
      if (l == k) s += (tau[k] - 1.0) / tau[k] * ne.q[pos];
      if (pos == cp) s += 1.0 / tau[k];
      out.score_v[pos] = s;
    }
  }

  if (flags & (kCurvature | kTauGrad)) {
    const int K = spec.n_nests;
    Eigen::VectorXd vbar = Eigen::VectorXd::Zero(K);
    for (int pos = 0; pos < n; ++pos)
      vbar[ne.nest_of_pos[static_cast<size_t>(pos)]] += ne.q[pos] * out.v[pos];

    if (flags & kTauGrad) {
      out.tau_grad = Eigen::VectorXd::Zero(K);
      for (int l = 0; l < K; ++l) {
        if (ne.lse[l] == kNegInf) continue;
        out.tau_grad[l] = -ne.pl[l] * (ne.lse[l] - vbar[l] / tau[l]);
      }
      out.tau_grad[k] += -out.v[cp] / (tau[k] * tau[k]) + ne.lse[k] -
                         (tau[k] - 1.0) * vbar[k] / (tau[k] * tau[k]);
    }

    if (flags & kCurvature) {
      // d2 loglik / dv dv': p p^T plus within-nest terms and the chosen-nest
      // inclusive-value curvature; curv_v is the negation.
      Eigen::MatrixXd a = ne.p * ne.p.transpose();
      for (int m = 0; m < n; ++m) {
        const int l = ne.nest_of_pos[static_cast<size_t>(m)];
        a(m, m) -= ne.p[m] / tau[l];
        for (int m2 = 0; m2 < n; ++m2) {
          if (ne.nest_of_pos[static_cast<size_t>(m2)] != l) continue;
          a(m, m2) -= (1.0 - 1.0 / tau[l]) * ne.pl[l] * ne.q[m] * ne.q[m2];
        }
      }
      const double ck = (tau[k] - 1.0) / (tau[k] * tau[k]);
      for (int m = 0; m < n; ++m) {
        if (ne.nest_of_pos[static_cast<size_t>(m)] != k) continue;
        a(m, m) += ck * ne.q[m];
        for (int m2 = 0; m2 < n; ++m2) {
          if (ne.nest_of_pos[static_cast<size_t>(m2)] != k) continue;
          a(m, m2) -= ck * ne.q[m] * ne.q[m2];
        }
      }
      out.curv_v = -a;
    }
  }
}

}  // namespace detail

Eigen::VectorXd choice_probabilities(const ModelSpec& spec, const Occasion& occ,
                                     const Eigen::VectorXd& v,
                                     const Eigen::VectorXd& tau) {
  const int n = static_cast<int>(occ.alts.size());
  if (n == 0) throw StructuralError("empty choice set");
  if (v.size() != n) throw StructuralError("utility length does not match choice set");
  if (!v.allFinite()) throw NumericalError("non-finite utilities");

  if (spec.variant != Variant::Nested) {
    const double lse = log_sum_exp(v);
    return (v.array() - lse).exp();
  }
  return nested_eval(spec, occ.alts, v, tau).p;
}

double group_log_likelihood(const ModelSpec& spec, const ThetaParts& parts,
                            const Eigen::VectorXd& alpha, const ChoiceGroup& group) {
  double ll = 0.0;
  detail::OccasionEval ev;
  for (size_t t = 0; t < group.occasions.size(); ++t) {
    detail::evaluate_occasion(spec, parts, alpha, group.occasions[t], detail::kValue, ev);
    if (!std::isfinite(ev.loglik))
      throw NumericalError("non-finite log-likelihood in group " + std::to_string(group.id) +
                           " occasion " + std::to_string(t));
    ll += ev.loglik;
  }
  return ll;
}

Eigen::VectorXd grad_alpha(const ModelSpec& spec, const ThetaParts& parts,
                           const Eigen::VectorXd& alpha, const ChoiceGroup& group) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(alpha.size());
  detail::OccasionEval ev;
  for (size_t t = 0; t < group.occasions.size(); ++t) {
    detail::evaluate_occasion(spec, parts, alpha, group.occasions[t], detail::kScore, ev);
    g.noalias() += ev.design.random.transpose() * ev.score_v;
  }
  if (!g.allFinite())
    throw NumericalError("non-finite alpha gradient in group " + std::to_string(group.id));
  return g;
}

Eigen::MatrixXd neg_hess_alpha(const ModelSpec& spec, const ThetaParts& parts,
                               const Eigen::VectorXd& alpha, const ChoiceGroup& group) {
  const auto w = alpha.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(w, w);
  detail::OccasionEval ev;
  for (size_t t = 0; t < group.occasions.size(); ++t) {
    detail::evaluate_occasion(spec, parts, alpha, group.occasions[t], detail::kCurvature, ev);
    h.noalias() += ev.design.random.transpose() * ev.curv_v * ev.design.random;
  }
  if (!h.allFinite())
    throw NumericalError("non-finite alpha Hessian in group " + std::to_string(group.id));
  return h;
}

Eigen::VectorXd grad_theta_loglik(const ModelSpec& spec, const ParameterLayout& layout,
                                  const ThetaParts& parts, const Eigen::MatrixXd& alpha,
                                  const ChoiceDataset& data) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.size());
  auto beta_block = grad.segment(layout.beta_offset(), layout.n_beta);
  auto gamma_block = grad.segment(layout.gamma_offset(), layout.n_gamma);
  auto eta_block = grad.segment(layout.eta_offset(), layout.n_tau);

  unsigned flags = detail::kScore;
  if (spec.variant == Variant::Nested) flags |= detail::kTauGrad;

  detail::OccasionEval ev;
  for (size_t i = 0; i < data.groups.size(); ++i) {
    const auto& group = data.groups[i];
    for (const auto& occ : group.occasions) {
      detail::evaluate_occasion(spec, parts, alpha.col(static_cast<Eigen::Index>(i)), occ,
                                flags, ev);
      beta_block.noalias() += ev.design.fixed.transpose() * ev.score_v;
      for (size_t pos = 0; pos < ev.design.gamma_idx.size(); ++pos) {
        const int gi = ev.design.gamma_idx[pos];
        if (gi >= 0) gamma_block[gi] += ev.score_v[static_cast<Eigen::Index>(pos)];
      }
      if (spec.variant == Variant::Nested)
        eta_block.array() += ev.tau_grad.array() * parts.tau.array();  // tau = exp(eta)
    }
  }
  if (!grad.allFinite()) throw NumericalError("non-finite theta gradient of log-likelihood");
  return grad;
}

}  // namespace mixlogit
