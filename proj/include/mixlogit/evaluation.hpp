#pragma once

#include <Eigen/Dense>

#include <vector>

#include "mixlogit/hierarchical_model.hpp"
#include "mixlogit/rng.hpp"
#include "mixlogit/vi.hpp"

namespace mixlogit {

// Monte Carlo predictive probabilities, one simplex per occasion in dataset
// iteration order (groups, then occasions), each over that occasion's alts.
// Groups are matched to the fit by id; unseen groups are rejected unless
// allow_new_groups, in which case alpha is drawn from the sampled N(xi, Sigma).
std::vector<Eigen::VectorXd> predictive_probs(const ModelSpec& spec,
                                              const ParameterLayout& layout,
                                              const FitResult& fit,
                                              const ChoiceDataset& data, int n_sim,
                                              Rng& rng, bool allow_new_groups = false);

// Marginal-share baseline: the train-data choice shares, restricted to each
// occasion's choice set and renormalized.
std::vector<Eigen::VectorXd> naive_probs(const ChoiceDataset& train,
                                         const ChoiceDataset& data, int n_choice_alts);

struct Scores {
  double log_score = 0.0;
  double weighted_f1 = 0.0;
  Eigen::VectorXd f1_per_alt;
  Eigen::VectorXd weights;
  long floored = 0;  // occasions whose realized-choice probability hit the floor
};

Scores compute_scores(const std::vector<Eigen::VectorXd>& probs,
                      const ChoiceDataset& data);

struct HeterogeneityReport {
  double th = 0.0;
  Eigen::VectorXd ah;  // per non-reference item (items 1..J-1)
  Eigen::VectorXd r;   // ah / (ah + pi^2/6)
  Eigen::VectorXd ch;  // per random covariate
};

HeterogeneityReport heterogeneity(const Eigen::MatrixXd& sigma, const ModelSpec& spec,
                                  const ChoiceDataset& data);

Eigen::MatrixXd posterior_mean_sigma(const ParameterLayout& layout,
                                     const FactorGaussianVA& va, int n_sim, Rng& rng);

struct ElasticityOptions {
  int price_col = 1;            // column of the ln-price covariate
  bool price_in_random = true;  // ln-price lives in xr (else xf)
  std::vector<int> indicator_cols_f;  // set to baseline 0 in the mean design
  std::vector<int> indicator_cols_r;
  int n_grid = 20;
  int n_sim = 200;
};

struct ElasticityCurve {
  long group_id = 0;
  int alt = 0;
  Eigen::VectorXd price;
  Eigen::VectorXd elasticity;
};

// Own-price elasticity profile of one alternative per group, on an even price
// grid spanning the 10th-90th percentile of observed prices, other covariates
// held at sample means (indicators at zero).
std::vector<ElasticityCurve> elasticity_profile(const ModelSpec& spec,
                                                const ParameterLayout& layout,
                                                const FitResult& fit,
                                                const ChoiceDataset& data, int alt,
                                                const ElasticityOptions& opts, Rng& rng);

struct BaseMarginal {
  std::vector<long> occasion_rows;        // indices into dataset iteration order
  std::vector<Eigen::VectorXd> probs;     // simplex over base_items per row
  std::vector<int> base_items;
};

// Marginal choice probabilities over a designated set of base items for a
// bundle model: bundle probabilities containing each base item, renormalized
// by one minus the complement-only singleton mass. Only occasions whose
// observed choice contains a base item are kept.
BaseMarginal bundle_base_marginal(const ModelSpec& spec, const ChoiceDataset& data,
                                  const std::vector<Eigen::VectorXd>& bundle_probs,
                                  const std::vector<int>& base_items);

}  // namespace mixlogit
