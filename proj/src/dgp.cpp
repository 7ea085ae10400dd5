#include "mixlogit/dgp.hpp"

#include <cmath>

#include "mixlogit/choice_model.hpp"

namespace mixlogit {

namespace {

double sample_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

}  // namespace

Eigen::MatrixXd sample_lkj_correlation(int dim, Rng& rng) {
  if (dim < 1) throw StructuralError("correlation dimension must be positive");
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(dim, dim);
  if (dim == 1) return r;

  // Onion method with shape 1: grow the matrix one alternative at a time.
  double beta = 1.0 + (dim - 2.0) / 2.0;
  const double r12 = 2.0 * sample_beta(beta, beta, rng) - 1.0;
  r(0, 1) = r(1, 0) = r12;
  for (int k = 2; k < dim; ++k) {
    beta -= 0.5;
    const double y = sample_beta(k / 2.0, beta, rng);
    Eigen::VectorXd u = randn(k, rng);
    u.normalize();
    const Eigen::MatrixXd rk = r.topLeftCorner(k, k);
    const Eigen::VectorXd z = rk.llt().matrixL() * (std::sqrt(y) * u);
    r.block(0, k, k, 1) = z;
    r.block(k, 0, 1, k) = z.transpose();
  }
  return r;
}

DgpParams dgp_preset(const DgpSpec& spec) {
  DgpParams p;
  p.n_groups = spec.n_groups;
  p.n_occasions = spec.n_occasions;
  p.n_test_occasions = spec.n_test_occasions;
  p.seed = spec.seed;

  const int n_items = 4;
  const int wr = 3;
  const int w = wr * (n_items - 1);

  p.beta_items.setZero(n_items, 3);
  p.beta_items.row(1) << -0.10, 0.35, -0.15;
  p.beta_items.row(2) << -0.15, 0.30, 0.40;
  p.beta_items.row(3) << 0.40, -0.15, 0.58;

  const double xi_pattern[4] = {-0.9640, 0.4002, -0.3788, 0.2409};
  p.xi.resize(w);
  for (int k = 0; k < w; ++k) p.xi[k] = xi_pattern[k % 4];

  Rng sigma_rng = derive_rng(spec.sigma_seed, 0);
  p.sigma = sample_lkj_correlation(w, sigma_rng);

  p.spec.n_items = n_items;
  switch (spec.sim) {
    case 1:
      p.spec.variant = Variant::Standard;
      break;
    case 2:
      p.spec.variant = Variant::Bundle;
      p.spec.bundles = {{0}, {1}, {2}, {3}, {0, 2}, {0, 3}, {1, 2}, {1, 3}};
      p.gamma.resize(4);
      p.gamma << 0.0976, 0.4304, 0.2055, 0.0898;
      break;
    case 3:
      p.spec.variant = Variant::Nested;
      p.spec.nest_of = {0, 0, 1, 1};
      p.spec.n_nests = 2;
      p.tau.resize(2);
      p.tau << 0.3, 0.7;
      break;
    default:
      throw StructuralError("unknown simulation preset " + std::to_string(spec.sim));
  }
  p.spec.validate();
  return p;
}

SimulatedData simulate_dataset(const DgpParams& params) {
  params.spec.validate();
  const int n_items = params.spec.n_items;
  const int wr = static_cast<int>(params.xi.size()) / (n_items - 1);
  const int wf = wr + 1;
  const int w = static_cast<int>(params.xi.size());
  const int n_alts = params.spec.n_choice_alts();

  SimulatedData out;
  out.spec = params.spec;
  out.sigma_true = params.sigma;
  out.xi_true = params.xi;
  out.beta_items_true = params.beta_items;
  out.gamma_true = params.gamma;
  out.tau_true = params.tau;
  out.alpha_true.resize(w, params.n_groups);

  for (ChoiceDataset* ds : {&out.train, &out.test}) {
    ds->n_items = n_items;
    ds->wf = wf;
    ds->wr = wr;
    ds->groups.resize(static_cast<size_t>(params.n_groups));
  }

  const Eigen::MatrixXd chol_sigma = params.sigma.llt().matrixL();
  std::vector<int> all_alts(static_cast<size_t>(n_alts));
  for (int c = 0; c < n_alts; ++c) all_alts[static_cast<size_t>(c)] = c;

  for (int i = 0; i < params.n_groups; ++i) {
    Rng rng = derive_rng(params.seed, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd alpha = params.xi + chol_sigma * randn(w, rng);
    out.alpha_true.col(i) = alpha;

    auto& train_group = out.train.groups[static_cast<size_t>(i)];
    auto& test_group = out.test.groups[static_cast<size_t>(i)];
    train_group.id = test_group.id = i + 1;

    const int total = params.n_occasions + params.n_test_occasions;
    for (int t = 0; t < total; ++t) {
      Occasion occ;
      occ.alts = all_alts;
      occ.xf = Eigen::MatrixXd::Zero(n_items, wf);
      occ.xr = Eigen::MatrixXd::Zero(n_items, wr);
      Eigen::VectorXd item_utility = Eigen::VectorXd::Zero(n_items);
      for (int j = 1; j < n_items; ++j) {
        const double u1 = runif(rng), u2 = runif(rng), u3 = runif(rng);
        occ.xf.row(j) << 1.0, u1, u2, u3;
        occ.xr(j, 0) = 1.0;
        if (wr > 1) occ.xr(j, 1) = u1;
        if (wr > 2) occ.xr(j, 2) = u2;
        item_utility[j] = params.beta_items(j, 0) * u1 + params.beta_items(j, 1) * u2 +
                          params.beta_items(j, 2) * u3 +
                          alpha.segment((j - 1) * wr, wr).dot(occ.xr.row(j));
      }

      Eigen::VectorXd v(n_alts);
      if (params.spec.variant == Variant::Bundle) {
        for (int c = 0; c < n_alts; ++c) {
          double vc = 0.0;
          for (int j : params.spec.bundles[static_cast<size_t>(c)]) vc += item_utility[j];
          const int gi = params.spec.gamma_index(c);
          if (gi >= 0) vc += params.gamma[gi];
          v[c] = vc;
        }
      } else {
        v = item_utility;
      }

      const Eigen::VectorXd probs = choice_probabilities(params.spec, occ, v, params.tau);
      occ.chosen = occ.alts[static_cast<size_t>(sample_categorical(probs, rng))];

      if (t < params.n_occasions)
        train_group.occasions.push_back(std::move(occ));
      else
        test_group.occasions.push_back(std::move(occ));
    }
  }

  out.train.validate(params.spec);
  if (params.n_test_occasions > 0) out.test.validate(params.spec);
  return out;
}

SimulatedData simulate_dataset(const DgpSpec& spec) {
  return simulate_dataset(dgp_preset(spec));
}

}  // namespace mixlogit
