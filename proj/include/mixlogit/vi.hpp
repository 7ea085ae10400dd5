#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "mixlogit/hierarchical_model.hpp"
#include "mixlogit/rng.hpp"

namespace mixlogit {

// Gaussian with a low-rank-plus-diagonal covariance B B^T + diag(d^2). The
// upper triangle of B is fixed to zero.
struct FactorGaussianVA {
  Eigen::VectorXd mu;
  Eigen::MatrixXd b;  // dim x p
  Eigen::VectorXd d;

  int dim() const { return static_cast<int>(mu.size()); }
  int factors() const { return static_cast<int>(b.cols()); }

  Eigen::VectorXd sample(const Eigen::VectorXd& e, const Eigen::VectorXd& z) const;
  Eigen::MatrixXd covariance() const;
  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const;

  // Flat parameter order: mu, free entries of B row-major, d.
  Eigen::VectorXd to_flat() const;
  void from_flat(const Eigen::VectorXd& flat);
  static int n_free_loadings(int dim, int p);
  static int flat_size(int dim, int p);
  static FactorGaussianVA init(int dim, int p, double d0);
};

// Conjugate Gaussian q(alpha_i | vartheta, a_i) stored through the Cholesky
// factor of its precision H_i + Sigma^{-1}.
struct LocalGaussian {
  Eigen::VectorXd mu;
  Eigen::MatrixXd prec_chol;  // lower R with V^{-1} = R R^T
  double logdet_v = 0.0;

  Eigen::VectorXd sample_from(const Eigen::VectorXd& u) const;  // mu + R^{-T} u
  Eigen::VectorXd sample(Rng& rng) const;
  double log_density(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd covariance() const;
};

struct LocalConjugateState {
  std::vector<LocalGaussian> locals;
  long projections = 0;  // local Hessians that needed eigenvalue clamping

  Eigen::MatrixXd means() const;  // w x S
};

// Rebuilds every group's conjugate Gaussian from scratch at proxy parameters
// vartheta and Taylor centers a (w x S).
LocalConjugateState refresh_local(const HierarchicalModel& model,
                                  const Eigen::VectorXd& vartheta,
                                  const Eigen::MatrixXd& a);

struct AdaDelta {
  double decay = 0.95;
  double eps = 1e-6;
  Eigen::VectorXd eg2, ex2;

  void init(int n);
  void step(Eigen::VectorXd& x, const Eigen::VectorXd& grad);  // ascent
};

struct ScheduleConfig {
  int kappa0 = 20;
  double kappa_growth = 1.1;
  int kappa_every = 500;
  double smoothing_r = 0.1;
  int warmup = 20;
  int stop_threshold = 5;
  int max_iters = 10000;
  int factors = 5;
  double init_d = 0.1;
  double adadelta_decay = 0.95;
  double adadelta_eps = 1e-6;
};

struct StoppingState {
  double best = -std::numeric_limits<double>::infinity();
  int count = 0;
};

// Window-average stopping check, run every 100 iterations once t > 1000.
// `elbo` holds the per-iteration samples for iterations 1..t.
bool stopping_should_stop(const std::vector<double>& elbo, int t, StoppingState& state,
                          int threshold);

struct TracePoint {
  int iter = 0;
  double elbo_sample = 0.0;
  double smoothed_elbo = 0.0;
  int kappa = 0;
  double wall_ms = 0.0;
};

struct FitResult {
  std::string method;  // "cvi" or "davi"
  FactorGaussianVA lambda0;
  Eigen::VectorXd vartheta;                 // cvi
  Eigen::MatrixXd a;                        // cvi, w x S
  LocalConjugateState locals;               // cvi
  std::vector<FactorGaussianVA> local_vas;  // davi
  std::vector<long> group_ids;
  std::vector<TracePoint> trace;
  std::vector<int> refresh_iters;  // cvi: iterations at which (vartheta, a) moved
  std::uint64_t seed = 0;
  int iterations = 0;
  int kappa_final = 0;
  long projections = 0;
};

struct GradientSample {
  Eigen::VectorXd grad;  // flat lambda0 order
  double elbo_sample = 0.0;
};

// Numerical failure inside a fit; carries the trace up to the failing
// iteration so partial runs can still be inspected.
struct FitError : NumericalError {
  FitError(const std::string& what, std::vector<TracePoint> partial)
      : NumericalError(what), trace(std::move(partial)) {}
  std::vector<TracePoint> trace;
};

// Single-draw reparameterization estimate of the lambda0 ELBO gradient, plus
// the matching ELBO sample used for tracing and the stopping rule.
GradientSample elbo_gradient_estimate(const HierarchicalModel& model,
                                      const FactorGaussianVA& va,
                                      const Eigen::VectorXd& vartheta,
                                      const LocalConjugateState& locals, Rng& rng);

FitResult cvi_fit(const HierarchicalModel& model, const ScheduleConfig& cfg,
                  std::uint64_t seed);
FitResult davi_fit(const HierarchicalModel& model, const ScheduleConfig& cfg,
                   std::uint64_t seed);

// Monte Carlo ELBO estimate over n_sim joint draws from the fitted VA.
double elbo_estimate(const HierarchicalModel& model, const FitResult& fit, int n_sim,
                     Rng& rng);

}  // namespace mixlogit
