#include "mixlogit/vi.hpp"

#include <chrono>
#include <cmath>
#include <deque>

namespace mixlogit {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double gaussian_log_density_chol(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                                 const Eigen::MatrixXd& chol, double logdet) {
  Eigen::VectorXd z = x - mu;
  chol.triangularView<Eigen::Lower>().solveInPlace(z);
  return -0.5 * (x.size() * kLog2Pi + logdet + z.squaredNorm());
}

}  // namespace

Eigen::VectorXd FactorGaussianVA::sample(const Eigen::VectorXd& e,
                                         const Eigen::VectorXd& z) const {
  return mu + b * z + d.cwiseProduct(e);
}

Eigen::MatrixXd FactorGaussianVA::covariance() const {
  return b * b.transpose() + Eigen::MatrixXd(d.cwiseProduct(d).asDiagonal());
}

double FactorGaussianVA::log_density(const Eigen::VectorXd& x) const {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance());
  if (llt.info() != Eigen::Success)
    throw NumericalError("factor Gaussian covariance not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < dim(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return gaussian_log_density_chol(x, mu, llt.matrixL(), logdet);
}

Eigen::VectorXd FactorGaussianVA::grad_log_density(const Eigen::VectorXd& x) const {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance());
  if (llt.info() != Eigen::Success)
    throw NumericalError("factor Gaussian covariance not positive definite");
  return -llt.solve(x - mu);
}

int FactorGaussianVA::n_free_loadings(int dim, int p) {
  int n = 0;
  for (int i = 0; i < dim; ++i) n += std::min(i + 1, p);
  return n;
}

int FactorGaussianVA::flat_size(int dim, int p) { return 2 * dim + n_free_loadings(dim, p); }

Eigen::VectorXd FactorGaussianVA::to_flat() const {
  Eigen::VectorXd flat(flat_size(dim(), factors()));
  flat.head(dim()) = mu;
  int k = dim();
  for (int i = 0; i < dim(); ++i)
    for (int j = 0; j < std::min(i + 1, factors()); ++j) flat[k++] = b(i, j);
  flat.tail(dim()) = d;
  return flat;
}

void FactorGaussianVA::from_flat(const Eigen::VectorXd& flat) {
  mu = flat.head(dim());
  int k = dim();
  b.setZero();
  for (int i = 0; i < dim(); ++i)
    for (int j = 0; j < std::min(i + 1, factors()); ++j) b(i, j) = flat[k++];
  d = flat.tail(dim());
}

FactorGaussianVA FactorGaussianVA::init(int dim, int p, double d0) {
  FactorGaussianVA va;
  va.mu = Eigen::VectorXd::Zero(dim);
  va.b = Eigen::MatrixXd::Zero(dim, p);
  va.d = Eigen::VectorXd::Constant(dim, d0);
  return va;
}

Eigen::VectorXd LocalGaussian::sample_from(const Eigen::VectorXd& u) const {
  // V = (R R^T)^{-1}: alpha = mu + R^{-T} u has covariance V.
  Eigen::VectorXd x = u;
  prec_chol.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return mu + x;
}

Eigen::VectorXd LocalGaussian::sample(Rng& rng) const {
  return sample_from(randn(static_cast<int>(mu.size()), rng));
}

double LocalGaussian::log_density(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd z = prec_chol.transpose() * (x - mu);
  return -0.5 * (mu.size() * kLog2Pi + logdet_v + z.squaredNorm());
}

Eigen::MatrixXd LocalGaussian::covariance() const {
  const auto w = mu.size();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(w, w);
  prec_chol.triangularView<Eigen::Lower>().solveInPlace(inv);
  return inv.transpose() * inv;
}

Eigen::MatrixXd LocalConjugateState::means() const {
  if (locals.empty()) return {};
  Eigen::MatrixXd m(locals.front().mu.size(), locals.size());
  for (size_t i = 0; i < locals.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = locals[i].mu;
  return m;
}

LocalConjugateState refresh_local(const HierarchicalModel& model,
                                  const Eigen::VectorXd& vartheta,
                                  const Eigen::MatrixXd& a) {
  const int s = model.num_groups();
  const int w = model.alpha_dim();
  const AlphaPrior ap = model.alpha_prior(vartheta);

  Eigen::MatrixXd grads;
  std::vector<Eigen::MatrixXd> hess;
  model.evaluate(vartheta, a, nullptr, &grads, &hess);

  LocalConjugateState state;
  state.locals.resize(static_cast<size_t>(s));
  const Eigen::VectorXd prior_shift = ap.sigma_inv * ap.xi;
  for (int i = 0; i < s; ++i) {
    Eigen::MatrixXd h = std::move(hess[static_cast<size_t>(i)]);
    if (model.project_local_hessians()) {
      int clamped = 0;
      h = nearest_psd(h, &clamped);
      if (clamped > 0) ++state.projections;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(h + ap.sigma_inv);
    if (llt.info() != Eigen::Success)
      throw NumericalError("conjugate update failed for group index " + std::to_string(i) +
                           ": H + Sigma^{-1} not positive definite");
    LocalGaussian& lg = state.locals[static_cast<size_t>(i)];
    lg.prec_chol = llt.matrixL();
    lg.logdet_v = 0.0;
    for (int j = 0; j < w; ++j) lg.logdet_v -= 2.0 * std::log(lg.prec_chol(j, j));
    const Eigen::VectorXd v_i = grads.col(i) + h * a.col(i);
    lg.mu = llt.solve(v_i + prior_shift);
  }
  return state;
}

void AdaDelta::init(int n) {
  eg2 = Eigen::VectorXd::Zero(n);
  ex2 = Eigen::VectorXd::Zero(n);
}

void AdaDelta::step(Eigen::VectorXd& x, const Eigen::VectorXd& grad) {
  eg2 = decay * eg2 + (1.0 - decay) * grad.cwiseProduct(grad);
  const Eigen::VectorXd dx =
      ((ex2.array() + eps) / (eg2.array() + eps)).sqrt() * grad.array();
  ex2 = decay * ex2 + (1.0 - decay) * dx.cwiseProduct(dx);
  x += dx;
}

bool stopping_should_stop(const std::vector<double>& elbo, int t, StoppingState& state,
                          int threshold) {
  if (t <= 1000 || t % 100 != 0) return false;
  double s = 0.0;
  for (int i = 0; i < 100; ++i) s += elbo[static_cast<size_t>(t - 1000 + 10 * i - 1)];
  const double avg = s / 100.0;
  if (avg > state.best)
    state.best = avg;
  else
    ++state.count;
  return state.count > threshold;
}

GradientSample elbo_gradient_estimate(const HierarchicalModel& model,
                                      const FactorGaussianVA& va,
                                      const Eigen::VectorXd& /*vartheta*/,
                                      const LocalConjugateState& locals, Rng& rng) {
  const int w0 = va.dim();
  const int p = va.factors();
  const int s = model.num_groups();
  const int w = model.alpha_dim();

  const Eigen::VectorXd e = randn(w0, rng);
  const Eigen::VectorXd z = randn(p, rng);
  const Eigen::VectorXd theta = va.sample(e, z);

  Eigen::MatrixXd alpha(w, s);
  double lq_alpha = 0.0;
  for (int i = 0; i < s; ++i) {
    const Eigen::VectorXd u = randn(w, rng);
    alpha.col(i) = locals.locals[static_cast<size_t>(i)].sample_from(u);
    lq_alpha += -0.5 * (w * kLog2Pi + locals.locals[static_cast<size_t>(i)].logdet_v +
                        u.squaredNorm());
  }

  Eigen::VectorXd grad_theta;
  const double ll = model.evaluate(theta, alpha, &grad_theta, nullptr, nullptr);

  const AlphaPrior ap = model.alpha_prior(theta);
  double lp_alpha = 0.0;
  for (int i = 0; i < s; ++i)
    lp_alpha += gaussian_log_density_chol(alpha.col(i), ap.xi, ap.chol, ap.logdet);

  grad_theta += model.grad_theta_alpha_prior(theta, alpha);
  grad_theta += model.grad_log_prior(theta);
  grad_theta -= va.grad_log_density(theta);

  GradientSample out;
  out.grad.resize(FactorGaussianVA::flat_size(w0, p));
  out.grad.head(w0) = grad_theta;
  int k = w0;
  for (int i = 0; i < w0; ++i)
    for (int j = 0; j < std::min(i + 1, p); ++j) out.grad[k++] = grad_theta[i] * z[j];
  out.grad.tail(w0) = grad_theta.cwiseProduct(e);

  out.elbo_sample = ll + lp_alpha + model.log_prior(theta) - va.log_density(theta) - lq_alpha;
  return out;
}

namespace {

// Rolling mean of the last (up to) 100 ELBO samples for the trace.
struct Smoother {
  std::deque<double> window;
  double sum = 0.0;
  double push(double x) {
    window.push_back(x);
    sum += x;
    if (window.size() > 100) {
      sum -= window.front();
      window.pop_front();
    }
    return sum / static_cast<double>(window.size());
  }
};

}  // namespace

FitResult cvi_fit(const HierarchicalModel& model, const ScheduleConfig& cfg,
                  std::uint64_t seed) {
  const int w0 = model.theta_dim();
  const int w = model.alpha_dim();
  const int s = model.num_groups();
  Rng rng(seed);

  FitResult fit;
  fit.method = "cvi";
  fit.seed = seed;
  fit.lambda0 = FactorGaussianVA::init(w0, cfg.factors, cfg.init_d);
  fit.vartheta = fit.lambda0.mu;
  fit.a = Eigen::MatrixXd::Zero(w, s);

  const double r = cfg.smoothing_r;
  fit.locals = refresh_local(model, fit.vartheta, fit.a);
  for (int k = 0; k < cfg.warmup; ++k) {
    fit.a += r * (fit.locals.means() - fit.a);
    fit.locals = refresh_local(model, fit.vartheta, fit.a);
  }
  fit.projections += fit.locals.projections;

  AdaDelta ada{cfg.adadelta_decay, cfg.adadelta_eps, {}, {}};
  ada.init(FactorGaussianVA::flat_size(w0, cfg.factors));
  Eigen::VectorXd flat = fit.lambda0.to_flat();

  int kappa = cfg.kappa0;
  StoppingState stop_state;
  Smoother smoother;
  std::vector<double> elbo_samples;
  elbo_samples.reserve(static_cast<size_t>(cfg.max_iters));

  for (int t = 1; t <= cfg.max_iters; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    GradientSample gs;
    try {
      gs = elbo_gradient_estimate(model, fit.lambda0, fit.vartheta, fit.locals, rng);
      if (!gs.grad.allFinite()) throw NumericalError("non-finite gradient estimate");

      ada.step(flat, gs.grad);
      fit.lambda0.from_flat(flat);

      if (t % kappa == 0) {
        fit.vartheta = fit.lambda0.mu;
        fit.a += r * (fit.locals.means() - fit.a);
        fit.locals = refresh_local(model, fit.vartheta, fit.a);
        fit.projections += fit.locals.projections;
        fit.refresh_iters.push_back(t);
      }
      if (t % cfg.kappa_every == 0) kappa = static_cast<int>(std::floor(cfg.kappa_growth * kappa));
    } catch (const NumericalError& err) {
      throw FitError("cvi iteration " + std::to_string(t) + ": " + err.what(), fit.trace);
    }

    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    elbo_samples.push_back(gs.elbo_sample);
    fit.trace.push_back({t, gs.elbo_sample, smoother.push(gs.elbo_sample), kappa, ms});
    fit.iterations = t;
    fit.kappa_final = kappa;
    if (stopping_should_stop(elbo_samples, t, stop_state, cfg.stop_threshold)) break;
  }
  return fit;
}

FitResult davi_fit(const HierarchicalModel& model, const ScheduleConfig& cfg,
                   std::uint64_t seed) {
  const int w0 = model.theta_dim();
  const int w = model.alpha_dim();
  const int s = model.num_groups();
  const int p = cfg.factors;
  Rng rng(seed);

  FitResult fit;
  fit.method = "davi";
  fit.seed = seed;
  fit.lambda0 = FactorGaussianVA::init(w0, p, cfg.init_d);
  fit.local_vas.assign(static_cast<size_t>(s), FactorGaussianVA::init(w, p, cfg.init_d));

  AdaDelta ada0{cfg.adadelta_decay, cfg.adadelta_eps, {}, {}};
  ada0.init(FactorGaussianVA::flat_size(w0, p));
  Eigen::VectorXd flat0 = fit.lambda0.to_flat();
  std::vector<AdaDelta> ada_i(static_cast<size_t>(s),
                              AdaDelta{cfg.adadelta_decay, cfg.adadelta_eps, {}, {}});
  std::vector<Eigen::VectorXd> flat_i(static_cast<size_t>(s));
  for (int i = 0; i < s; ++i) {
    ada_i[static_cast<size_t>(i)].init(FactorGaussianVA::flat_size(w, p));
    flat_i[static_cast<size_t>(i)] = fit.local_vas[static_cast<size_t>(i)].to_flat();
  }

  StoppingState stop_state;
  Smoother smoother;
  std::vector<double> elbo_samples;
  elbo_samples.reserve(static_cast<size_t>(cfg.max_iters));
  Eigen::MatrixXd alpha(w, s);
  Eigen::MatrixXd e_i(w, s), z_i(p, s);

  for (int t = 1; t <= cfg.max_iters; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    double elbo = 0.0;
    try {
      const Eigen::VectorXd e0 = randn(w0, rng);
      const Eigen::VectorXd z0 = randn(p, rng);
      const Eigen::VectorXd theta = fit.lambda0.sample(e0, z0);
      for (int i = 0; i < s; ++i) {
        e_i.col(i) = randn(w, rng);
        z_i.col(i) = randn(p, rng);
        alpha.col(i) = fit.local_vas[static_cast<size_t>(i)].sample(e_i.col(i), z_i.col(i));
      }

      Eigen::VectorXd grad_theta;
      Eigen::MatrixXd grad_alpha;
      const double ll = model.evaluate(theta, alpha, &grad_theta, &grad_alpha, nullptr);

      const AlphaPrior ap = model.alpha_prior(theta);
      double lp_alpha = 0.0;
      for (int i = 0; i < s; ++i)
        lp_alpha += gaussian_log_density_chol(alpha.col(i), ap.xi, ap.chol, ap.logdet);

      grad_theta += model.grad_theta_alpha_prior(theta, alpha);
      grad_theta += model.grad_log_prior(theta);
      grad_theta -= fit.lambda0.grad_log_density(theta);
      if (!grad_theta.allFinite()) throw NumericalError("non-finite theta gradient");

      Eigen::VectorXd g0(FactorGaussianVA::flat_size(w0, p));
      g0.head(w0) = grad_theta;
      int k = w0;
      for (int i = 0; i < w0; ++i)
        for (int j = 0; j < std::min(i + 1, p); ++j) g0[k++] = grad_theta[i] * z0[j];
      g0.tail(w0) = grad_theta.cwiseProduct(e0);
      ada0.step(flat0, g0);
      fit.lambda0.from_flat(flat0);

      elbo = ll + lp_alpha + model.log_prior(theta) - fit.lambda0.log_density(theta);

      for (int i = 0; i < s; ++i) {
        auto& qi = fit.local_vas[static_cast<size_t>(i)];
        elbo -= qi.log_density(alpha.col(i));
        Eigen::VectorXd delta = grad_alpha.col(i);
        delta += -ap.sigma_inv * (alpha.col(i) - ap.xi);
        delta -= qi.grad_log_density(alpha.col(i));
        Eigen::VectorXd gi(FactorGaussianVA::flat_size(w, p));
        gi.head(w) = delta;
        int ki = w;
        for (int a2 = 0; a2 < w; ++a2)
          for (int j = 0; j < std::min(a2 + 1, p); ++j) gi[ki++] = delta[a2] * z_i(j, i);
        gi.tail(w) = delta.cwiseProduct(e_i.col(i));
        if (!gi.allFinite()) throw NumericalError("non-finite local gradient");
        ada_i[static_cast<size_t>(i)].step(flat_i[static_cast<size_t>(i)], gi);
        qi.from_flat(flat_i[static_cast<size_t>(i)]);
      }
    } catch (const NumericalError& err) {
      throw FitError("davi iteration " + std::to_string(t) + ": " + err.what(), fit.trace);
    }

    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    elbo_samples.push_back(elbo);
    fit.trace.push_back({t, elbo, smoother.push(elbo), 0, ms});
    fit.iterations = t;
    if (stopping_should_stop(elbo_samples, t, stop_state, cfg.stop_threshold)) break;
  }
  return fit;
}

double elbo_estimate(const HierarchicalModel& model, const FitResult& fit, int n_sim,
                     Rng& rng) {
  const int w0 = model.theta_dim();
  const int w = model.alpha_dim();
  const int s = model.num_groups();
  const int p = fit.lambda0.factors();
  const bool conjugate = fit.method == "cvi";

  double acc = 0.0;
  Eigen::MatrixXd alpha(w, s);
  for (int it = 0; it < n_sim; ++it) {
    const Eigen::VectorXd e = randn(w0, rng);
    const Eigen::VectorXd z = randn(p, rng);
    const Eigen::VectorXd theta = fit.lambda0.sample(e, z);
    double lq = fit.lambda0.log_density(theta);
    for (int i = 0; i < s; ++i) {
      if (conjugate) {
        const auto& lg = fit.locals.locals[static_cast<size_t>(i)];
        alpha.col(i) = lg.sample(rng);
        lq += lg.log_density(alpha.col(i));
      } else {
        const auto& q = fit.local_vas[static_cast<size_t>(i)];
        alpha.col(i) = q.sample(randn(w, rng), randn(p, rng));
        lq += q.log_density(alpha.col(i));
      }
    }
    const double ll = model.evaluate(theta, alpha, nullptr, nullptr, nullptr);
    const AlphaPrior ap = model.alpha_prior(theta);
    double lp_alpha = 0.0;
    for (int i = 0; i < s; ++i)
      lp_alpha += gaussian_log_density_chol(alpha.col(i), ap.xi, ap.chol, ap.logdet);
    acc += ll + lp_alpha + model.log_prior(theta) - lq;
  }
  return acc / n_sim;
}

}  // namespace mixlogit
