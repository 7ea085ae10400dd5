#include "mixlogit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mixlogit/choice_model.hpp"

namespace mixlogit {

namespace {

// Index of each data group's local VA inside the fit, -1 for unseen groups.
std::vector<int> match_groups(const FitResult& fit, const ChoiceDataset& data,
                              bool allow_new_groups) {
  std::map<long, int> by_id;
  for (size_t k = 0; k < fit.group_ids.size(); ++k)
    by_id[fit.group_ids[k]] = static_cast<int>(k);
  std::vector<int> idx(data.groups.size(), -1);
  for (size_t g = 0; g < data.groups.size(); ++g) {
    auto it = by_id.find(data.groups[g].id);
    if (it != by_id.end()) {
      idx[g] = it->second;
    } else if (!allow_new_groups) {
      throw StructuralError("unknown group id " + std::to_string(data.groups[g].id));
    }
  }
  return idx;
}

Eigen::VectorXd draw_group_alpha(const FitResult& fit, int local_idx,
                                 const ThetaParts& parts, Rng& rng) {
  if (local_idx < 0)
    return parts.xi + parts.chol_sigma * randn(static_cast<int>(parts.xi.size()), rng);
  if (fit.method == "cvi") return fit.locals.locals[static_cast<size_t>(local_idx)].sample(rng);
  const auto& q = fit.local_vas[static_cast<size_t>(local_idx)];
  return q.sample(randn(q.dim(), rng), randn(q.factors(), rng));
}

// Items reachable through the occasion's available alternatives.
std::vector<int> available_items(const ModelSpec& spec, const Occasion& occ) {
  std::set<int> items;
  for (int alt : occ.alts) {
    if (spec.variant == Variant::Bundle) {
      for (int j : spec.bundles[static_cast<size_t>(alt)]) items.insert(j);
    } else {
      items.insert(alt);
    }
  }
  return {items.begin(), items.end()};
}

}  // namespace

std::vector<Eigen::VectorXd> predictive_probs(const ModelSpec& spec,
                                              const ParameterLayout& layout,
                                              const FitResult& fit,
                                              const ChoiceDataset& data, int n_sim,
                                              Rng& rng, bool allow_new_groups) {
  const std::vector<int> local_idx = match_groups(fit, data, allow_new_groups);

  std::vector<Eigen::VectorXd> acc;
  acc.reserve(static_cast<size_t>(data.n_occasions()));
  for (const auto& g : data.groups)
    for (const auto& occ : g.occasions)
      acc.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(occ.alts.size())));

  for (int s = 0; s < n_sim; ++s) {
    const Eigen::VectorXd theta =
        fit.lambda0.sample(randn(fit.lambda0.dim(), rng), randn(fit.lambda0.factors(), rng));
    const ThetaParts parts = unpack(theta, layout);
    size_t row = 0;
    for (size_t g = 0; g < data.groups.size(); ++g) {
      const Eigen::VectorXd alpha = draw_group_alpha(fit, local_idx[g], parts, rng);
      for (const auto& occ : data.groups[g].occasions) {
        const Eigen::VectorXd v = occasion_utilities(spec, parts, alpha, occ);
        acc[row++] += choice_probabilities(spec, occ, v, parts.tau);
      }
    }
  }
  for (auto& p : acc) p /= static_cast<double>(n_sim);
  return acc;
}

std::vector<Eigen::VectorXd> naive_probs(const ChoiceDataset& train,
                                         const ChoiceDataset& data, int n_choice_alts) {
  Eigen::VectorXd share = Eigen::VectorXd::Zero(n_choice_alts);
  for (const auto& g : train.groups)
    for (const auto& occ : g.occasions) share[occ.chosen] += 1.0;
  share /= share.sum();

  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<size_t>(data.n_occasions()));
  for (const auto& g : data.groups) {
    for (const auto& occ : g.occasions) {
      Eigen::VectorXd p(static_cast<Eigen::Index>(occ.alts.size()));
      for (size_t k = 0; k < occ.alts.size(); ++k)
        p[static_cast<Eigen::Index>(k)] = share[occ.alts[k]];
      const double total = p.sum();
      if (total > 0.0)
        p /= total;
      else
        p.setConstant(1.0 / static_cast<double>(occ.alts.size()));
      out.push_back(std::move(p));
    }
  }
  return out;
}

Scores compute_scores(const std::vector<Eigen::VectorXd>& probs,
                      const ChoiceDataset& data) {
  int n_alts = 0;
  for (const auto& g : data.groups)
    for (const auto& occ : g.occasions) n_alts = std::max(n_alts, occ.alts.back() + 1);

  Eigen::VectorXd tp = Eigen::VectorXd::Zero(n_alts), fp = tp, fn = tp, counts = tp;
  double ls = 0.0;
  long n = 0;
  Scores scores;

  size_t row = 0;
  for (const auto& g : data.groups) {
    for (const auto& occ : g.occasions) {
      if (row >= probs.size()) throw StructuralError("probability rows do not match dataset");
      const Eigen::VectorXd& p = probs[row++];
      if (p.size() != static_cast<Eigen::Index>(occ.alts.size()))
        throw StructuralError("probability row does not match choice set");
      const int cp = occ.chosen_pos();
      double pc = p[cp];
      if (pc < 1e-300) {
        pc = 1e-300;
        ++scores.floored;
      }
      ls += std::log(pc);
      ++n;

      int best = 0;  // argmax, ties broken toward the lowest alternative id
      for (int k = 1; k < p.size(); ++k)
        if (p[k] > p[best]) best = k;
      const int pred = occ.alts[static_cast<size_t>(best)];
      counts[occ.chosen] += 1.0;
      if (pred == occ.chosen) {
        tp[pred] += 1.0;
      } else {
        fp[pred] += 1.0;
        fn[occ.chosen] += 1.0;
      }
    }
  }
  if (row != probs.size()) throw StructuralError("probability rows do not match dataset");

  scores.log_score = ls / static_cast<double>(n);
  scores.weights = counts / static_cast<double>(n);
  scores.f1_per_alt.setZero(n_alts);
  for (int j = 0; j < n_alts; ++j) {
    const double denom = 2.0 * tp[j] + fp[j] + fn[j];
    scores.f1_per_alt[j] = denom > 0.0 ? 2.0 * tp[j] / denom : 0.0;
  }
  scores.weighted_f1 = scores.weights.dot(scores.f1_per_alt);
  return scores;
}

HeterogeneityReport heterogeneity(const Eigen::MatrixXd& sigma, const ModelSpec& spec,
                                  const ChoiceDataset& data) {
  const int wr = data.wr;
  const int n_items = data.n_items;
  HeterogeneityReport rep;
  rep.ah.setZero(n_items - 1);
  rep.ch.setZero(wr);
  Eigen::VectorXd n_j = Eigen::VectorXd::Zero(n_items - 1);
  double th = 0.0;
  long n = 0;

  for (const auto& g : data.groups) {
    for (const auto& occ : g.occasions) {
      ++n;
      const std::vector<int> items = available_items(spec, occ);
      for (int j : items) {
        if (j == 0) continue;
        const Eigen::RowVectorXd xj = occ.xr.row(j);
        for (int l : items) {
          if (l == 0) continue;
          const double q =
              xj * sigma.block((j - 1) * wr, (l - 1) * wr, wr, wr) * occ.xr.row(l).transpose();
          th += q;
          for (int k = 0; k < wr; ++k)
            rep.ch[k] += occ.xr(j, k) * sigma((j - 1) * wr + k, (l - 1) * wr + k) *
                         occ.xr(l, k) / static_cast<double>(occ.alts.size());
        }
        rep.ah[j - 1] += xj * sigma.block((j - 1) * wr, (j - 1) * wr, wr, wr) * xj.transpose();
        n_j[j - 1] += 1.0;
      }
    }
  }

  rep.th = th / static_cast<double>(n);
  rep.ch /= static_cast<double>(n);
  rep.r.setZero(n_items - 1);
  const double gumbel_var = M_PI * M_PI / 6.0;
  for (int j = 0; j < n_items - 1; ++j) {
    if (n_j[j] > 0.0) rep.ah[j] /= n_j[j];
    rep.r[j] = rep.ah[j] / (rep.ah[j] + gumbel_var);
  }
  return rep;
}

Eigen::MatrixXd posterior_mean_sigma(const ParameterLayout& layout,
                                     const FactorGaussianVA& va, int n_sim, Rng& rng) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(layout.w, layout.w);
  for (int s = 0; s < n_sim; ++s) {
    const Eigen::VectorXd theta = va.sample(randn(va.dim(), rng), randn(va.factors(), rng));
    acc += unpack(theta, layout).sigma;
  }
  return acc / static_cast<double>(n_sim);
}

std::vector<ElasticityCurve> elasticity_profile(const ModelSpec& spec,
                                                const ParameterLayout& layout,
                                                const FitResult& fit,
                                                const ChoiceDataset& data, int alt,
                                                const ElasticityOptions& opts, Rng& rng) {
  if (alt <= 0 || alt >= spec.n_choice_alts())
    throw StructuralError("elasticity alternative out of range");
  int item = alt;
  if (spec.variant == Variant::Bundle) {
    const auto& members = spec.bundles[static_cast<size_t>(alt)];
    if (members.size() != 1)
      throw StructuralError("elasticity requires a singleton alternative");
    item = members.front();
  }
  if (item == 0) throw StructuralError("reference alternative has no own price");

  // Observed raw prices of the alternative, where available.
  std::vector<double> prices;
  for (const auto& g : data.groups)
    for (const auto& occ : g.occasions)
      if (std::binary_search(occ.alts.begin(), occ.alts.end(), alt)) {
        const double lp =
            opts.price_in_random ? occ.xr(item, opts.price_col) : occ.xf(item, opts.price_col);
        prices.push_back(std::exp(lp));
      }
  if (prices.empty()) throw StructuralError("alternative never available");
  std::sort(prices.begin(), prices.end());
  auto percentile = [&](double q) {
    const double pos = q * (static_cast<double>(prices.size()) - 1.0);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, prices.size() - 1);
    return prices[lo] + (pos - static_cast<double>(lo)) * (prices[hi] - prices[lo]);
  };
  const double lo = percentile(0.10), hi = percentile(0.90);
  if (!(hi > lo)) throw StructuralError("degenerate price range");

  Eigen::VectorXd grid(opts.n_grid);
  for (int v = 0; v < opts.n_grid; ++v)
    grid[v] = lo + (hi - lo) * v / static_cast<double>(opts.n_grid - 1);
  const double h = grid[1] - grid[0];

  // Average-case design: sample means per item, indicators at baseline zero.
  Occasion mean_occ;
  mean_occ.alts.resize(static_cast<size_t>(spec.n_choice_alts()));
  for (int c = 0; c < spec.n_choice_alts(); ++c) mean_occ.alts[static_cast<size_t>(c)] = c;
  mean_occ.chosen = 0;
  mean_occ.xf = Eigen::MatrixXd::Zero(data.n_items, data.wf);
  mean_occ.xr = Eigen::MatrixXd::Zero(data.n_items, data.wr);
  Eigen::VectorXd item_count = Eigen::VectorXd::Zero(data.n_items);
  for (const auto& g : data.groups)
    for (const auto& occ : g.occasions)
      for (int j : available_items(spec, occ)) {
        if (j == 0) continue;
        mean_occ.xf.row(j) += occ.xf.row(j);
        mean_occ.xr.row(j) += occ.xr.row(j);
        item_count[j] += 1.0;
      }
  for (int j = 1; j < data.n_items; ++j)
    if (item_count[j] > 0.0) {
      mean_occ.xf.row(j) /= item_count[j];
      mean_occ.xr.row(j) /= item_count[j];
    }
  for (int j = 1; j < data.n_items; ++j) {
    for (int k : opts.indicator_cols_f) mean_occ.xf(j, k) = 0.0;
    for (int k : opts.indicator_cols_r) mean_occ.xr(j, k) = 0.0;
  }

  const std::vector<int> local_idx = match_groups(fit, data, false);
  const size_t n_groups = data.groups.size();
  std::vector<Eigen::VectorXd> elast(n_groups, Eigen::VectorXd::Zero(opts.n_grid));
  Eigen::VectorXd pcurve(opts.n_grid);

  for (int s = 0; s < opts.n_sim; ++s) {
    const Eigen::VectorXd theta =
        fit.lambda0.sample(randn(fit.lambda0.dim(), rng), randn(fit.lambda0.factors(), rng));
    const ThetaParts parts = unpack(theta, layout);
    for (size_t g = 0; g < n_groups; ++g) {
      const Eigen::VectorXd alpha = draw_group_alpha(fit, local_idx[g], parts, rng);
      for (int v = 0; v < opts.n_grid; ++v) {
        if (opts.price_in_random)
          mean_occ.xr(item, opts.price_col) = std::log(grid[v]);
        else
          mean_occ.xf(item, opts.price_col) = std::log(grid[v]);
        const Eigen::VectorXd util = occasion_utilities(spec, parts, alpha, mean_occ);
        pcurve[v] = choice_probabilities(spec, mean_occ, util, parts.tau)[alt];
      }
      for (int v = 0; v < opts.n_grid; ++v) {
        double dp;
        if (v == 0)
          dp = (pcurve[1] - pcurve[0]) / h;
        else if (v == opts.n_grid - 1)
          dp = (pcurve[v] - pcurve[v - 1]) / h;
        else
          dp = (pcurve[v + 1] - pcurve[v - 1]) / (2.0 * h);
        elast[g][v] += dp * grid[v] / pcurve[v];
      }
    }
  }

  std::vector<ElasticityCurve> out(n_groups);
  for (size_t g = 0; g < n_groups; ++g) {
    out[g].group_id = data.groups[g].id;
    out[g].alt = alt;
    out[g].price = grid;
    out[g].elasticity = elast[g] / static_cast<double>(opts.n_sim);
  }
  return out;
}

BaseMarginal bundle_base_marginal(const ModelSpec& spec, const ChoiceDataset& data,
                                  const std::vector<Eigen::VectorXd>& bundle_probs,
                                  const std::vector<int>& base_items) {
  if (spec.variant != Variant::Bundle)
    throw StructuralError("base-item marginal requires a bundle model");
  std::set<int> base(base_items.begin(), base_items.end());
  auto base_member = [&](int alt) {
    int found = -1;
    for (int j : spec.bundles[static_cast<size_t>(alt)]) {
      if (base.count(j)) {
        if (found >= 0) throw StructuralError("bundle with more than one base item");
        found = j;
      }
    }
    return found;
  };

  BaseMarginal out;
  out.base_items = base_items;
  std::map<int, int> base_pos;
  for (size_t k = 0; k < base_items.size(); ++k)
    base_pos[base_items[k]] = static_cast<int>(k);

  long row = -1;
  for (const auto& g : data.groups) {
    for (const auto& occ : g.occasions) {
      ++row;
      if (base_member(occ.chosen) < 0) continue;  // base item not chosen
      const Eigen::VectorXd& q = bundle_probs[static_cast<size_t>(row)];
      double p0 = 0.0;
      Eigen::VectorXd marg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(base_items.size()));
      for (size_t k = 0; k < occ.alts.size(); ++k) {
        const int b = base_member(occ.alts[k]);
        if (b < 0)
          p0 += q[static_cast<Eigen::Index>(k)];
        else
          marg[base_pos.at(b)] += q[static_cast<Eigen::Index>(k)];
      }
      if (p0 >= 1.0 - 1e-12)
        throw NumericalError("complement-only mass leaves no base probability");
      out.occasion_rows.push_back(row);
      out.probs.push_back(marg / (1.0 - p0));
    }
  }
  return out;
}

}  // namespace mixlogit
