#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "mixlogit/rng.hpp"
#include "mixlogit/types.hpp"

namespace mixlogit {

// Correlation matrix draw from LKJ(1) via the onion method (uniform over the
// space of correlation matrices).
Eigen::MatrixXd sample_lkj_correlation(int dim, Rng& rng);

// Fully specified data-generating process. The presets (sim 1/2/3) fill in
// the published true parameters; custom processes can be built directly.
struct DgpParams {
  ModelSpec spec;
  int n_groups = 100;
  int n_occasions = 100;       // per group, training
  int n_test_occasions = 30;   // per group, held out
  std::uint64_t seed = 1;
  Eigen::MatrixXd beta_items;  // n_items x 3, per-item slopes on the uniforms
  Eigen::VectorXd xi;          // dim w
  Eigen::MatrixXd sigma;       // w x w
  Eigen::VectorXd gamma;       // per non-singleton bundle
  Eigen::VectorXd tau;         // per nest
};

struct DgpSpec {
  int sim = 1;  // 1 = standard, 2 = bundle, 3 = nested
  int n_groups = 100;
  int n_occasions = 100;
  int n_test_occasions = 30;
  std::uint64_t seed = 1;
  std::uint64_t sigma_seed = 73;  // Sigma is held fixed across replications
};

struct SimulatedData {
  ChoiceDataset train;
  ChoiceDataset test;
  ModelSpec spec;
  Eigen::MatrixXd sigma_true;
  Eigen::VectorXd xi_true;
  Eigen::MatrixXd beta_items_true;
  Eigen::VectorXd gamma_true;
  Eigen::VectorXd tau_true;
  Eigen::MatrixXd alpha_true;  // w x S
};

DgpParams dgp_preset(const DgpSpec& spec);
SimulatedData simulate_dataset(const DgpParams& params);
SimulatedData simulate_dataset(const DgpSpec& spec);

}  // namespace mixlogit
