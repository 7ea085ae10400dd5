#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "mixlogit/choice_model.hpp"
#include "mixlogit/dgp.hpp"

using namespace mixlogit;

namespace {

// Item utilities exactly as the generator computes them.
Eigen::VectorXd true_utilities(const SimulatedData& data, int group, const Occasion& occ) {
  const int n_items = data.spec.n_items;
  const int wr = data.train.wr;
  Eigen::VectorXd item_u = Eigen::VectorXd::Zero(n_items);
  for (int j = 1; j < n_items; ++j)
    item_u[j] = data.beta_items_true.row(j).dot(occ.xf.row(j).segment(1, 3)) +
                data.alpha_true.col(group).segment((j - 1) * wr, wr).dot(occ.xr.row(j));
  if (data.spec.variant != Variant::Bundle) return item_u;
  Eigen::VectorXd v(data.spec.n_choice_alts());
  for (int c = 0; c < data.spec.n_choice_alts(); ++c) {
    double vc = 0.0;
    for (int j : data.spec.bundles[static_cast<size_t>(c)]) vc += item_u[j];
    const int gi = data.spec.gamma_index(c);
    if (gi >= 0) vc += data.gamma_true[gi];
    v[c] = vc;
  }
  return v;
}

}  // namespace

TEST_CASE("LKJ correlation sampler") {
  Rng rng(71);

  SUBCASE("dimension one is the scalar 1") {
    CHECK(sample_lkj_correlation(1, rng) == Eigen::MatrixXd::Identity(1, 1));
  }

  SUBCASE("unit diagonal, symmetry, positive definiteness") {
    for (int rep = 0; rep < 200; ++rep) {
      const int dim = 2 + static_cast<int>(rng() % 8);
      const Eigen::MatrixXd r = sample_lkj_correlation(dim, rng);
      for (int i = 0; i < dim; ++i) CHECK(r(i, i) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r.isApprox(r.transpose(), 1e-12));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
  }

  SUBCASE("shape-1 off-diagonal is uniform on (-1, 1) at dimension two") {
    const int n = 100000;
    std::vector<double> draws(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) draws[static_cast<size_t>(i)] = sample_lkj_correlation(2, rng)(0, 1);
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
      const double cdf = (draws[static_cast<size_t>(i)] + 1.0) / 2.0;
      ks = std::max(ks, std::abs(cdf - (i + 1.0) / n));
      ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
    }
    CHECK(ks < 0.01);
  }
}

TEST_CASE("presets reproduce the published true parameters") {
  const DgpParams p1 = dgp_preset(DgpSpec{});
  Eigen::MatrixXd beta(4, 3);
  beta << 0, 0, 0, -0.10, 0.35, -0.15, -0.15, 0.30, 0.40, 0.40, -0.15, 0.58;
  CHECK(p1.beta_items == beta);
  Eigen::VectorXd xi(9);
  xi << -0.9640, 0.4002, -0.3788, 0.2409, -0.9640, 0.4002, -0.3788, 0.2409, -0.9640;
  CHECK(p1.xi == xi);
  for (int i = 0; i < 9; ++i) CHECK(p1.sigma(i, i) == doctest::Approx(1.0).epsilon(1e-12));

  DgpSpec bundle_spec;
  bundle_spec.sim = 2;
  const DgpParams p2 = dgp_preset(bundle_spec);
  Eigen::VectorXd gamma(4);
  gamma << 0.0976, 0.4304, 0.2055, 0.0898;
  CHECK(p2.gamma == gamma);
  CHECK(p2.spec.bundles.size() == 8);
  CHECK(p2.spec.bundles[4] == std::vector<int>{0, 2});

  DgpSpec nested_spec;
  nested_spec.sim = 3;
  const DgpParams p3 = dgp_preset(nested_spec);
  Eigen::VectorXd tau(2);
  tau << 0.3, 0.7;
  CHECK(p3.tau == tau);
  CHECK(p3.spec.n_nests == 2);

  CHECK_THROWS_AS(dgp_preset(DgpSpec{.sim = 9}), StructuralError);
}

TEST_CASE("sigma is held fixed across replications; data are seed-deterministic") {
  DgpSpec a;
  a.n_groups = 3;
  a.n_occasions = 5;
  a.n_test_occasions = 2;
  a.seed = 1;
  DgpSpec b = a;
  b.seed = 2;  // new replication, same DGP

  const SimulatedData da = simulate_dataset(a);
  const SimulatedData db = simulate_dataset(b);
  CHECK(da.sigma_true == db.sigma_true);
  CHECK(da.train.groups[0].occasions[0].xr != db.train.groups[0].occasions[0].xr);

  const SimulatedData da2 = simulate_dataset(a);
  CHECK(da.alpha_true == da2.alpha_true);
  for (size_t g = 0; g < da.train.groups.size(); ++g)
    for (size_t t = 0; t < da.train.groups[g].occasions.size(); ++t) {
      CHECK(da.train.groups[g].occasions[t].chosen ==
            da2.train.groups[g].occasions[t].chosen);
      CHECK(da.train.groups[g].occasions[t].xf == da2.train.groups[g].occasions[t].xf);
    }

  SUBCASE("train and test share group effects") {
    CHECK(da.test.groups.size() == da.train.groups.size());
    CHECK(da.test.groups[0].occasions.size() == 2);
    CHECK(da.train.groups[1].id == da.test.groups[1].id);
  }
}

TEST_CASE("degenerate DGP gives uniform choice shares") {
  DgpParams p = dgp_preset(DgpSpec{});
  p.n_groups = 10;
  p.n_occasions = 10000;
  p.n_test_occasions = 0;
  p.beta_items.setZero();
  p.xi.setZero();
  p.sigma = 1e-12 * Eigen::MatrixXd::Identity(9, 9);
  const SimulatedData data = simulate_dataset(p);

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(4);
  long n = 0;
  for (const auto& g : data.train.groups)
    for (const auto& occ : g.occasions) {
      counts[occ.chosen] += 1.0;
      ++n;
    }
  const double se = std::sqrt(0.25 * 0.75 / static_cast<double>(n));
  for (int j = 0; j < 4; ++j)
    CHECK(std::abs(counts[j] / static_cast<double>(n) - 0.25) <= 3.0 * se);
}

TEST_CASE("simulated outcomes are consistent with the model probabilities") {
  for (int sim : {1, 2, 3}) {
    DgpSpec spec;
    spec.sim = sim;
    spec.n_groups = 25;
    spec.n_occasions = 80;
    spec.n_test_occasions = 0;
    spec.seed = static_cast<std::uint64_t>(sim) * 11;
    const SimulatedData data = simulate_dataset(spec);

    const int n_alts = data.spec.n_choice_alts();
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_alts);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(n_alts);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(n_alts);
    long n = 0;
    for (size_t g = 0; g < data.train.groups.size(); ++g) {
      for (const auto& occ : data.train.groups[g].occasions) {
        CHECK(std::binary_search(occ.alts.begin(), occ.alts.end(), occ.chosen));
        const Eigen::VectorXd v = true_utilities(data, static_cast<int>(g), occ);
        const Eigen::VectorXd p = choice_probabilities(data.spec, occ, v, data.tau_true);
        counts[occ.chosen] += 1.0;
        expected += p;
        var += p.cwiseProduct(Eigen::VectorXd::Ones(n_alts) - p);
        ++n;
      }
    }
    for (int c = 0; c < n_alts; ++c) {
      const double se = std::sqrt(var[c]) / static_cast<double>(n);
      CHECK(std::abs((counts[c] - expected[c]) / static_cast<double>(n)) <= 3.0 * se);
    }
  }
}
