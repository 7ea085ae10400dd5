#include "mixlogit/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

#include "mixlogit/data_io.hpp"
#include "mixlogit/dgp.hpp"
#include "mixlogit/evaluation.hpp"
#include "mixlogit/hierarchical_model.hpp"

namespace mixlogit {

namespace {

using nlohmann::json;

DgpSpec load_dgp_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw StructuralError(path + ": " + e.what());
  }
  DgpSpec spec;
  spec.sim = j.value("sim", spec.sim);
  spec.n_groups = j.value("groups", spec.n_groups);
  spec.n_occasions = j.value("occasions", spec.n_occasions);
  spec.n_test_occasions = j.value("test_occasions", spec.n_test_occasions);
  spec.seed = j.value("seed", spec.seed);
  spec.sigma_seed = j.value("sigma_seed", spec.sigma_seed);
  return spec;
}

void write_predictions_csv(const std::string& path, const ChoiceDataset& data,
                           const std::vector<Eigen::VectorXd>& probs) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot write '" + path + "'");
  out << "group,occasion,alt,prob,chosen\n";
  size_t row = 0;
  for (const auto& g : data.groups) {
    long oid = 0;
    for (const auto& occ : g.occasions) {
      ++oid;
      const Eigen::VectorXd& p = probs[row++];
      for (size_t k = 0; k < occ.alts.size(); ++k)
        out << g.id << ',' << oid << ',' << occ.alts[k] + 1 << ','
            << format_double(p[static_cast<Eigen::Index>(k)]) << ','
            << (occ.chosen == occ.alts[k] ? 1 : 0) << '\n';
    }
  }
}

int run(int argc, const char* const* argv) {
  CLI::App app{"mixed multinomial logit estimation via conjugating variational inference"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "generate synthetic choice data");
  std::string sim_config, sim_train, sim_test;
  sim->add_option("--config", sim_config, "DGP config (json)")->required();
  sim->add_option("--train", sim_train, "output training CSV")->required();
  sim->add_option("--test", sim_test, "output test CSV");

  auto* fit = app.add_subcommand("fit", "fit a model");
  std::string fit_config, fit_data, fit_out, fit_trace;
  fit->add_option("--config", fit_config, "fit config (json)")->required();
  fit->add_option("--data", fit_data, "training CSV")->required();
  fit->add_option("--out", fit_out, "output artifact (json)")->required();
  fit->add_option("--trace", fit_trace, "output trace CSV");

  auto* pred = app.add_subcommand("predict", "predictive probabilities");
  std::string pred_fit, pred_data, pred_out;
  int pred_nsim = 1000;
  std::uint64_t pred_seed = 1;
  bool pred_new_groups = false;
  pred->add_option("--fit", pred_fit, "fit artifact")->required();
  pred->add_option("--data", pred_data, "dataset CSV")->required();
  pred->add_option("--out", pred_out, "output CSV")->required();
  pred->add_option("--n-sim", pred_nsim, "Monte Carlo draws");
  pred->add_option("--seed", pred_seed, "RNG seed");
  pred->add_flag("--allow-new-groups", pred_new_groups,
                 "draw alpha from N(xi, Sigma) for unseen groups");

  auto* ev = app.add_subcommand("evaluate", "scores and heterogeneity reports");
  std::string ev_fit, ev_data, ev_scores, ev_het, ev_train;
  int ev_nsim = 1000;
  std::uint64_t ev_seed = 1;
  ev->add_option("--fit", ev_fit, "fit artifact")->required();
  ev->add_option("--data", ev_data, "dataset CSV")->required();
  ev->add_option("--scores", ev_scores, "output scores CSV")->required();
  ev->add_option("--heterogeneity", ev_het, "output heterogeneity CSV");
  ev->add_option("--train", ev_train, "training CSV for the marginal-share baseline");
  ev->add_option("--n-sim", ev_nsim, "Monte Carlo draws");
  ev->add_option("--seed", ev_seed, "RNG seed");

  auto* el = app.add_subcommand("elasticity", "own-price elasticity profiles");
  std::string el_fit, el_data, el_out;
  int el_alt = 2, el_grid = 20, el_nsim = 200, el_price_col = 2;
  bool el_price_fixed = false;
  std::uint64_t el_seed = 1;
  std::vector<int> el_ind_r, el_ind_f;
  el->add_option("--fit", el_fit, "fit artifact")->required();
  el->add_option("--data", el_data, "dataset CSV")->required();
  el->add_option("--out", el_out, "output CSV")->required();
  el->add_option("--alt", el_alt, "alternative id (1-based)")->required();
  el->add_option("--price-col", el_price_col, "ln-price covariate column (1-based)");
  el->add_flag("--price-in-fixed", el_price_fixed, "price column lives in the f_ block");
  el->add_option("--indicator-r", el_ind_r, "indicator r_ columns set to 0 (1-based)");
  el->add_option("--indicator-f", el_ind_f, "indicator f_ columns set to 0 (1-based)");
  el->add_option("--n-grid", el_grid, "grid points");
  el->add_option("--n-sim", el_nsim, "Monte Carlo draws");
  el->add_option("--seed", el_seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) {
    const DgpSpec spec = load_dgp_config(sim_config);
    const SimulatedData data = simulate_dataset(spec);
    save_dataset_csv(sim_train, data.train, data.spec);
    if (!sim_test.empty()) save_dataset_csv(sim_test, data.test, data.spec);
    return 0;
  }

  if (fit->parsed()) {
    const FitConfig cfg = load_fit_config(fit_config);
    const ChoiceDataset data = load_dataset_csv(fit_data, cfg.model);
    try {
      const FitArtifact artifact = run_fit(data, cfg);
      save_fit_artifact(fit_out, artifact);
      if (!fit_trace.empty()) save_trace_csv(fit_trace, artifact.result.trace);
    } catch (const FitError& e) {
      if (!fit_trace.empty()) save_trace_csv(fit_trace, e.trace);
      throw;
    }
    return 0;
  }

  if (pred->parsed()) {
    const FitArtifact artifact = load_fit_artifact(pred_fit);
    const ChoiceDataset data = load_dataset_csv(pred_data, artifact.config.model);
    const ParameterLayout layout =
        ParameterLayout::make(artifact.config.model, artifact.wf, artifact.wr);
    Rng rng(pred_seed);
    const auto probs = predictive_probs(artifact.config.model, layout, artifact.result, data,
                                        pred_nsim, rng, pred_new_groups);
    write_predictions_csv(pred_out, data, probs);
    return 0;
  }

  if (ev->parsed()) {
    const FitArtifact artifact = load_fit_artifact(ev_fit);
    const ChoiceDataset data = load_dataset_csv(ev_data, artifact.config.model);
    const ParameterLayout layout =
        ParameterLayout::make(artifact.config.model, artifact.wf, artifact.wr);
    Rng rng(ev_seed);
    const auto probs = predictive_probs(artifact.config.model, layout, artifact.result, data,
                                        ev_nsim, rng, true);
    const Scores scores = compute_scores(probs, data);

    std::ofstream out(ev_scores);
    if (!out) throw StructuralError("cannot write '" + ev_scores + "'");
    out << "metric,value\n";
    out << "log_score," << format_double(scores.log_score) << '\n';
    out << "weighted_f1," << format_double(scores.weighted_f1) << '\n';
    out << "n_occasions," << data.n_occasions() << '\n';
    out << "floored," << scores.floored << '\n';
    for (int j = 0; j < scores.f1_per_alt.size(); ++j)
      out << "f1_alt_" << j + 1 << ',' << format_double(scores.f1_per_alt[j]) << '\n';
    if (!ev_train.empty()) {
      const ChoiceDataset train = load_dataset_csv(ev_train, artifact.config.model);
      const auto base = naive_probs(train, data, artifact.config.model.n_choice_alts());
      const Scores bs = compute_scores(base, data);
      out << "naive_log_score," << format_double(bs.log_score) << '\n';
      out << "naive_weighted_f1," << format_double(bs.weighted_f1) << '\n';
    }

    if (!ev_het.empty()) {
      const Eigen::MatrixXd sigma_hat =
          posterior_mean_sigma(layout, artifact.result.lambda0, ev_nsim, rng);
      const HeterogeneityReport rep = heterogeneity(sigma_hat, artifact.config.model, data);
      std::ofstream het(ev_het);
      if (!het) throw StructuralError("cannot write '" + ev_het + "'");
      het << "measure,index,value\n";
      het << "TH,," << format_double(rep.th) << '\n';
      for (int j = 0; j < rep.ah.size(); ++j)
        het << "AH," << j + 2 << ',' << format_double(rep.ah[j]) << '\n';
      for (int j = 0; j < rep.r.size(); ++j)
        het << "R," << j + 2 << ',' << format_double(rep.r[j]) << '\n';
      for (int k = 0; k < rep.ch.size(); ++k)
        het << "CH," << k + 1 << ',' << format_double(rep.ch[k]) << '\n';
    }
    return 0;
  }

  if (el->parsed()) {
    const FitArtifact artifact = load_fit_artifact(el_fit);
    const ChoiceDataset data = load_dataset_csv(el_data, artifact.config.model);
    const ParameterLayout layout =
        ParameterLayout::make(artifact.config.model, artifact.wf, artifact.wr);
    ElasticityOptions opts;
    opts.price_col = el_price_col - 1;
    opts.price_in_random = !el_price_fixed;
    opts.n_grid = el_grid;
    opts.n_sim = el_nsim;
    for (int k : el_ind_r) opts.indicator_cols_r.push_back(k - 1);
    for (int k : el_ind_f) opts.indicator_cols_f.push_back(k - 1);
    Rng rng(el_seed);
    const auto curves = elasticity_profile(artifact.config.model, layout, artifact.result,
                                           data, el_alt - 1, opts, rng);
    std::ofstream out(el_out);
    if (!out) throw StructuralError("cannot write '" + el_out + "'");
    out << "group,alt,price,elasticity\n";
    for (const auto& c : curves)
      for (int v = 0; v < c.price.size(); ++v)
        out << c.group_id << ',' << c.alt + 1 << ',' << format_double(c.price[v]) << ','
            << format_double(c.elasticity[v]) << '\n';
    return 0;
  }
  return 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  try {
    return run(argc, argv);
  } catch (const StructuralError& e) {
    std::cerr << "error[structural]: " << e.what() << std::endl;
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error[domain]: " << e.what() << std::endl;
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error[numerical]: " << e.what() << std::endl;
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << std::endl;
    return 5;
  }
}

}  // namespace mixlogit
