#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mixlogit/priors.hpp"

using namespace mixlogit;
using testutil::fd_gradient;
using testutil::rel_err;

namespace {

ParameterLayout small_layout(int w, int n_beta = 0, int n_gamma = 0, int n_tau = 0) {
  ParameterLayout l;
  l.n_beta = n_beta;
  l.w = w;
  l.n_gamma = n_gamma;
  l.n_tau = n_tau;
  return l;
}

}  // namespace

TEST_CASE("unpack/pack round trip and shapes") {
  Rng rng(5);
  ParameterLayout layout = small_layout(3, 2, 1, 2);
  CHECK(layout.size() == 2 + 3 + 6 + 1 + 2);

  SUBCASE("identity Cholesky coordinates") {
    const ThetaParts parts = unpack(Eigen::VectorXd::Zero(layout.size()), layout);
    CHECK(parts.sigma.isIdentity(1e-15));
    CHECK(parts.sigma_inv.isIdentity(1e-15));
    CHECK(parts.logdet_sigma == 0.0);
    CHECK(parts.tau[0] == 1.0);  // eta = 0
    CHECK(parts.tau[1] == 1.0);
  }

  SUBCASE("round trip is the identity") {
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::VectorXd theta = randn(layout.size(), rng);
      const Eigen::VectorXd back = pack(unpack(theta, layout), layout);
      CHECK((back - theta).cwiseAbs().maxCoeff() < 1e-14);
    }
  }

  SUBCASE("sigma is symmetric positive definite for wild theta") {
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::VectorXd theta = 3.0 * randn(layout.size(), rng);
      const ThetaParts parts = unpack(theta, layout);
      CHECK(parts.sigma.isApprox(parts.sigma.transpose(), 1e-14));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(parts.sigma);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
    for (int rep = 0; rep < 50; ++rep) {
      const ThetaParts parts = unpack(0.5 * randn(layout.size(), rng), layout);
      CHECK((parts.sigma * parts.sigma_inv).isIdentity(1e-10));
    }
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(unpack(Eigen::VectorXd::Zero(3), layout), StructuralError);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(layout.size());
    bad[4] = std::nan("");
    CHECK_THROWS_AS(unpack(bad, layout), NumericalError);
  }
}

TEST_CASE("prior closed forms") {
  SUBCASE("gaussian block at the mode") {
    CHECK(gaussian_log_density(0.0, 10.0) ==
          doctest::Approx(-0.5 * std::log(2.0 * M_PI * 100.0)).epsilon(1e-14));
  }

  SUBCASE("Huang-Wand at the identity matches the displayed formula") {
    const int w = 2;
    const double nu = 2.0, a = 100.0;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(w, w);
    const double got = huang_wand_log_density(eye, 0.0, nu, a);
    const double expected = -0.5 * (nu + w) * (w * std::log(nu * 1.0 + 1.0 / (a * a)));
    CHECK(got == doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("half-t normalization against quadrature") {
    const double scale = 1.5, df = 5.0;
    // density of eta = log tau: unnormalized u(eta), normalized by quadrature
    auto unnorm = [&](double eta) {
      const double tau = std::exp(eta);
      return std::pow(1.0 + tau * tau / (df * scale * scale), -0.5 * (df + 1.0)) * tau;
    };
    const double lo = -60.0, hi = 60.0;
    const int n = 240000;  // even, Simpson
    const double h = (hi - lo) / n;
    double z = unnorm(lo) + unnorm(hi);
    for (int i = 1; i < n; ++i) z += (i % 2 ? 4.0 : 2.0) * unnorm(lo + i * h);
    z *= h / 3.0;
    const double ours = half_t_log_density(1.0, scale, df) + 0.0;  // + log tau at tau = 1
    CHECK(ours == doctest::Approx(std::log(unnorm(0.0) / z)).epsilon(1e-8));
  }

  SUBCASE("whole prior at theta = 0") {
    ParameterLayout layout = small_layout(2, 1, 0, 1);
    PriorSpec prior;
    const double got = log_prior(Eigen::VectorXd::Zero(layout.size()), layout, prior);
    double expected = 3.0 * gaussian_log_density(0.0, 10.0);  // beta + xi(2)
    expected += huang_wand_log_density(Eigen::MatrixXd::Identity(2, 2), 0.0, 2.0, 100.0);
    expected += chol_log_jacobian(Eigen::MatrixXd::Identity(2, 2));
    expected += half_t_log_density(1.0, 1.5, 5.0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("prior gradients match finite differences") {
  Rng rng(23);
  for (auto sp : {SigmaPrior::HuangWand, SigmaPrior::Lkj}) {
    PriorSpec prior;
    prior.sigma_prior = sp;
    ParameterLayout layout = small_layout(3, 2, 1, 2);
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::VectorXd theta = 0.5 * randn(layout.size(), rng);
      const Eigen::VectorXd g = grad_log_prior(theta, layout, prior);
      auto f = [&](const Eigen::VectorXd& th) { return log_prior(th, layout, prior); };
      CHECK(rel_err(g, fd_gradient(f, theta, 1e-6)) < 1e-6);
    }
  }

  SUBCASE("gaussian blocks have zero gradient at zero") {
    PriorSpec prior;
    ParameterLayout layout = small_layout(2, 3, 0, 0);
    const Eigen::VectorXd g =
        grad_log_prior(Eigen::VectorXd::Zero(layout.size()), layout, prior);
    CHECK(g.head(3 + 2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("Huang-Wand gradient is exchangeable at the identity") {
  const int w = 3;
  const double nu = 2.0, a = 100.0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(w, w);
  Eigen::VectorXd dcoef(w);
  for (int l = 0; l < w; ++l) dcoef[l] = nu / (nu + 1.0 / (a * a));
  const Eigen::MatrixXd g_sigma =
      -0.5 * (nu + 2.0 * w) * eye + 0.5 * (nu + w) * Eigen::MatrixXd(dcoef.asDiagonal());
  const Eigen::VectorXd g = chain_sigma_grad_to_chol(g_sigma, eye);
  // off-diagonal coordinates all zero, diagonal coordinates all equal
  CHECK(g[1] == 0.0);  // (1,0)
  CHECK(g[3] == 0.0);  // (2,0)
  CHECK(g[4] == 0.0);  // (2,1)
  CHECK(g[0] == doctest::Approx(g[2]).epsilon(1e-14));
  CHECK(g[0] == doctest::Approx(g[5]).epsilon(1e-14));
}

TEST_CASE("sigma-block importance reweighting is seed-stable") {
  const int w = 2;
  ParameterLayout layout = small_layout(w);
  for (auto sp : {SigmaPrior::HuangWand, SigmaPrior::Lkj}) {
    PriorSpec prior;
    prior.sigma_prior = sp;
    auto run = [&](std::uint64_t seed, double* est, double* se) {
      Rng rng(seed);
      const int n = 30000;
      double sw = 0.0, swf = 0.0;
      std::vector<double> ws(static_cast<size_t>(n)), fs(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd c = randn(3, rng);
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(layout.size());
        theta.segment(layout.chol_offset(), 3) = c;
        const ThetaParts parts = unpack(theta, layout);
        double lp = chol_log_jacobian(parts.chol_sigma);
        if (sp == SigmaPrior::HuangWand)
          lp += huang_wand_log_density(parts.sigma_inv, parts.logdet_sigma, prior.hw_nu,
                                       prior.hw_scale);
        else
          lp += lkj_sigma_log_density(parts.sigma, prior.lkj_scale);
        const double lq = -0.5 * (3.0 * std::log(2.0 * M_PI) + c.squaredNorm());
        ws[static_cast<size_t>(i)] = std::exp(lp - lq);
        fs[static_cast<size_t>(i)] = parts.sigma(0, 1);
        sw += ws[static_cast<size_t>(i)];
        swf += ws[static_cast<size_t>(i)] * fs[static_cast<size_t>(i)];
      }
      *est = swf / sw;
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        const double t = ws[static_cast<size_t>(i)] * (fs[static_cast<size_t>(i)] - *est);
        var += t * t;
      }
      *se = std::sqrt(var) / sw;
    };
    double e1, s1, e2, s2;
    run(101, &e1, &s1);
    run(202, &e2, &s2);
    CHECK(std::abs(e1 - e2) <= 3.0 * std::sqrt(s1 * s1 + s2 * s2));
  }
}

TEST_CASE("random-coefficient density and gradients") {
  Rng rng(29);
  const int w = 2, s = 3;
  ParameterLayout layout = small_layout(w);

  SUBCASE("value at the mean with identity covariance") {
    const ThetaParts parts = unpack(Eigen::VectorXd::Zero(layout.size()), layout);
    Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(w, s);  // alpha = xi = 0
    CHECK(log_density_alpha(alpha, parts) ==
          doctest::Approx(-s * std::log(2.0 * M_PI)).epsilon(1e-14));
    const Eigen::VectorXd g = grad_theta_log_density_alpha(alpha, parts, layout);
    CHECK(g.segment(layout.xi_offset(), w).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("theta gradient matches finite differences") {
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::VectorXd theta = 0.5 * randn(layout.size(), rng);
      std::normal_distribution<double> nd;
      const Eigen::MatrixXd alpha =
          Eigen::MatrixXd::NullaryExpr(w, s, [&]() { return 0.7 * nd(rng); });
      const ThetaParts parts = unpack(theta, layout);
      const Eigen::VectorXd g = grad_theta_log_density_alpha(alpha, parts, layout);
      auto f = [&](const Eigen::VectorXd& th) {
        return log_density_alpha(alpha, unpack(th, layout));
      };
      CHECK(rel_err(g, fd_gradient(f, theta, 1e-6)) < 1e-6);
    }
  }

  SUBCASE("alpha gradient matches finite differences") {
    const Eigen::VectorXd theta = 0.5 * randn(layout.size(), rng);
    const ThetaParts parts = unpack(theta, layout);
    for (int rep = 0; rep < 20; ++rep) {
      std::normal_distribution<double> nd;
      const Eigen::MatrixXd alpha =
          Eigen::MatrixXd::NullaryExpr(w, s, [&]() { return 0.7 * nd(rng); });
      const Eigen::MatrixXd g = grad_alpha_log_density_alpha(alpha, parts);
      for (int i = 0; i < s; ++i) {
        auto f = [&](const Eigen::VectorXd& a) {
          Eigen::MatrixXd mod = alpha;
          mod.col(i) = a;
          return log_density_alpha(mod, parts);
        };
        CHECK(rel_err(g.col(i), fd_gradient(f, alpha.col(i), 1e-6)) < 1e-6);
      }
    }
  }
}
