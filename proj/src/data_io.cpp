#include "mixlogit/data_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mixlogit/hierarchical_model.hpp"

namespace mixlogit {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "nan" || s == "NaN";
}

double parse_double(const std::string& s, long row) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw StructuralError("row " + std::to_string(row) + ": bad number '" + s + "'");
  }
}

long parse_long(const std::string& s, long row) {
  try {
    size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw StructuralError("row " + std::to_string(row) + ": bad integer '" + s + "'");
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot write '" + path + "'");
  return out;
}

struct RowRecord {
  int alt = 0;  // 0-based
  int available = 0;
  int chosen = 0;
  Eigen::VectorXd f, r;
  long line = 0;
};

// First singleton bundle per item, used to locate item covariates on disk.
std::vector<int> singleton_alt_of_item(const ModelSpec& spec) {
  std::vector<int> out(static_cast<size_t>(spec.n_items), -1);
  for (size_t r = 0; r < spec.bundles.size(); ++r) {
    const auto& b = spec.bundles[r];
    if (b.size() == 1 && out[static_cast<size_t>(b[0])] < 0)
      out[static_cast<size_t>(b[0])] = static_cast<int>(r);
  }
  return out;
}

}  // namespace

ChoiceDataset load_dataset_csv(const std::string& path, const ModelSpec& spec) {
  spec.validate();
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw StructuralError(path + ": empty file");
  const auto header = split_csv_line(line);
  const std::vector<std::string> fixed_cols = {"group", "occasion", "alt", "available",
                                               "chosen"};
  if (header.size() < fixed_cols.size())
    throw StructuralError(path + ": bad header");
  for (size_t k = 0; k < fixed_cols.size(); ++k)
    if (header[k] != fixed_cols[k])
      throw StructuralError(path + ": expected column '" + fixed_cols[k] + "', got '" +
                            header[k] + "'");

  ChoiceDataset data;
  data.n_items = spec.n_items;
  for (size_t k = fixed_cols.size(); k < header.size(); ++k) {
    if (header[k].rfind("f_", 0) == 0) {
      if (!data.r_names.empty())
        throw StructuralError(path + ": f_ columns must precede r_ columns");
      data.f_names.push_back(header[k]);
    } else if (header[k].rfind("r_", 0) == 0) {
      data.r_names.push_back(header[k]);
    } else {
      throw StructuralError(path + ": covariate column '" + header[k] +
                            "' must start with f_ or r_");
    }
  }
  data.wf = static_cast<int>(data.f_names.size());
  data.wr = static_cast<int>(data.r_names.size());
  if (data.wr == 0) throw StructuralError(path + ": no random covariate columns");

  const int n_alts = spec.n_choice_alts();
  std::vector<long> group_order;
  std::map<long, std::vector<long>> occ_order;
  std::map<std::pair<long, long>, std::vector<RowRecord>> cells;

  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw StructuralError(path + ": row " + std::to_string(lineno) + " has " +
                            std::to_string(f.size()) + " fields, expected " +
                            std::to_string(header.size()));
    RowRecord rec;
    const long gid = parse_long(f[0], lineno);
    const long oid = parse_long(f[1], lineno);
    rec.alt = static_cast<int>(parse_long(f[2], lineno)) - 1;
    rec.available = static_cast<int>(parse_long(f[3], lineno));
    rec.chosen = static_cast<int>(parse_long(f[4], lineno));
    rec.line = lineno;
    if (rec.alt < 0 || rec.alt >= n_alts)
      throw StructuralError(path + ": row " + std::to_string(lineno) +
                            ": alternative id out of range");
    rec.f.resize(data.wf);
    rec.r.resize(data.wr);
    for (int k = 0; k < data.wf; ++k) rec.f[k] = parse_double(f[5 + static_cast<size_t>(k)], lineno);
    for (int k = 0; k < data.wr; ++k)
      rec.r[k] = parse_double(f[5 + static_cast<size_t>(data.wf + k)], lineno);

    auto key = std::make_pair(gid, oid);
    if (!cells.count(key)) {
      if (!occ_order.count(gid)) group_order.push_back(gid);
      occ_order[gid].push_back(oid);
    }
    cells[key].push_back(std::move(rec));
  }

  const auto item_alt = spec.variant == Variant::Bundle ? singleton_alt_of_item(spec)
                                                        : std::vector<int>();
  for (long gid : group_order) {
    ChoiceGroup group;
    group.id = gid;
    for (long oid : occ_order[gid]) {
      const auto& rows = cells[{gid, oid}];
      std::vector<const RowRecord*> by_alt(static_cast<size_t>(n_alts), nullptr);
      std::vector<long> chosen_lines;
      for (const auto& rec : rows) {
        if (by_alt[static_cast<size_t>(rec.alt)])
          throw StructuralError(path + ": duplicate alternative in rows " +
                                std::to_string(by_alt[static_cast<size_t>(rec.alt)]->line) +
                                " and " + std::to_string(rec.line));
        by_alt[static_cast<size_t>(rec.alt)] = &rec;
        if (rec.chosen) {
          chosen_lines.push_back(rec.line);
          if (!rec.available)
            throw StructuralError(path + ": row " + std::to_string(rec.line) +
                                  ": chosen alternative marked unavailable");
        }
      }
      if (chosen_lines.size() != 1) {
        std::string lines;
        for (long l : chosen_lines) lines += " " + std::to_string(l);
        throw StructuralError(path + ": group " + std::to_string(gid) + " occasion " +
                              std::to_string(oid) + " must have exactly one chosen row, got " +
                              std::to_string(chosen_lines.size()) + " (rows" + lines + ")");
      }
      if (!by_alt[0] || !by_alt[0]->available)
        throw StructuralError(path + ": group " + std::to_string(gid) + " occasion " +
                              std::to_string(oid) + ": reference alternative unavailable");

      Occasion occ;
      occ.xf = Eigen::MatrixXd::Zero(spec.n_items, data.wf);
      occ.xr = Eigen::MatrixXd::Zero(spec.n_items, data.wr);
      for (int c = 0; c < n_alts; ++c) {
        const RowRecord* rec = by_alt[static_cast<size_t>(c)];
        if (!rec) continue;
        if (rec->available) occ.alts.push_back(c);
        if (rec->chosen) occ.chosen = c;
      }
      if (spec.variant == Variant::Bundle) {
        for (int j = 1; j < spec.n_items; ++j) {
          const int sa = item_alt[static_cast<size_t>(j)];
          if (sa >= 0 && by_alt[static_cast<size_t>(sa)]) {
            occ.xf.row(j) = by_alt[static_cast<size_t>(sa)]->f;
            occ.xr.row(j) = by_alt[static_cast<size_t>(sa)]->r;
          }
        }
        for (int c : occ.alts) {
          if (spec.is_singleton(c)) continue;
          for (int j : spec.bundles[static_cast<size_t>(c)]) {
            if (j == 0) continue;
            const int sa = item_alt[static_cast<size_t>(j)];
            if (sa < 0 || !by_alt[static_cast<size_t>(sa)])
              throw StructuralError(path + ": group " + std::to_string(gid) + " occasion " +
                                    std::to_string(oid) + ": bundle " + std::to_string(c + 1) +
                                    " needs the singleton row of item " + std::to_string(j + 1));
          }
        }
      } else {
        for (int j = 1; j < spec.n_items; ++j) {
          if (by_alt[static_cast<size_t>(j)]) {
            occ.xf.row(j) = by_alt[static_cast<size_t>(j)]->f;
            occ.xr.row(j) = by_alt[static_cast<size_t>(j)]->r;
          }
        }
      }
      group.occasions.push_back(std::move(occ));
    }
    data.groups.push_back(std::move(group));
  }

  data.validate(spec);
  return data;
}

void save_dataset_csv(const std::string& path, const ChoiceDataset& data,
                      const ModelSpec& spec) {
  data.validate(spec);
  std::ofstream out = open_output(path);
  out << "group,occasion,alt,available,chosen";
  for (int k = 0; k < data.wf; ++k)
    out << ','
        << (k < static_cast<int>(data.f_names.size()) ? data.f_names[static_cast<size_t>(k)]
                                                      : "f_x" + std::to_string(k + 1));
  for (int k = 0; k < data.wr; ++k)
    out << ','
        << (k < static_cast<int>(data.r_names.size()) ? data.r_names[static_cast<size_t>(k)]
                                                      : "r_x" + std::to_string(k + 1));
  out << '\n';

  const int n_alts = spec.n_choice_alts();
  const auto item_alt = spec.variant == Variant::Bundle ? singleton_alt_of_item(spec)
                                                        : std::vector<int>();
  for (const auto& group : data.groups) {
    long oid = 0;
    for (const auto& occ : group.occasions) {
      ++oid;
      for (int c = 0; c < n_alts; ++c) {
        const bool avail = std::binary_search(occ.alts.begin(), occ.alts.end(), c);
        int item = -1;
        if (spec.variant == Variant::Bundle) {
          if (spec.is_singleton(c)) item = spec.bundles[static_cast<size_t>(c)][0];
        } else {
          item = c;
        }
        out << group.id << ',' << oid << ',' << (c + 1) << ',' << (avail ? 1 : 0) << ','
            << (occ.chosen == c ? 1 : 0);
        for (int k = 0; k < data.wf; ++k)
          out << ',' << format_double(item > 0 ? occ.xf(item, k) : 0.0);
        for (int k = 0; k < data.wr; ++k)
          out << ',' << format_double(item > 0 ? occ.xr(item, k) : 0.0);
        out << '\n';
      }
    }
  }
}

RawPanel load_raw_panel_csv(const std::string& path, int n_items) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw StructuralError(path + ": empty file");
  const auto header = split_csv_line(line);
  const std::vector<std::string> fixed_cols = {"group", "occasion", "alt",
                                               "chosen", "day",      "week"};
  if (header.size() < fixed_cols.size()) throw StructuralError(path + ": bad header");
  for (size_t k = 0; k < fixed_cols.size(); ++k)
    if (header[k] != fixed_cols[k])
      throw StructuralError(path + ": expected column '" + fixed_cols[k] + "', got '" +
                            header[k] + "'");

  RawPanel panel;
  panel.n_items = n_items;
  panel.columns.assign(header.begin() + static_cast<long>(fixed_cols.size()), header.end());

  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw StructuralError(path + ": row " + std::to_string(lineno) + " field count mismatch");
    RawPanelRow row;
    row.group = parse_long(f[0], lineno);
    row.occasion = parse_long(f[1], lineno);
    row.alt = static_cast<int>(parse_long(f[2], lineno));
    row.chosen = static_cast<int>(parse_long(f[3], lineno));
    row.day = parse_long(f[4], lineno);
    row.week = parse_long(f[5], lineno);
    if (row.alt < 1 || row.alt > n_items)
      throw StructuralError(path + ": row " + std::to_string(lineno) + ": alt out of range");
    row.values.resize(panel.columns.size());
    row.missing.resize(panel.columns.size());
    for (size_t k = 0; k < panel.columns.size(); ++k) {
      const std::string& cell = f[fixed_cols.size() + k];
      row.missing[k] = is_missing(cell) ? 1 : 0;
      row.values[k] = row.missing[k] ? 0.0 : parse_double(cell, lineno);
    }
    panel.rows.push_back(std::move(row));
  }
  return panel;
}

ImputedTable impute(const RawPanel& raw, const ImputationPolicy& policy) {
  const size_t ncol = raw.columns.size();
  std::vector<int> kind(ncol, -1);  // 0 continuous, 1 indicator
  for (size_t k = 0; k < ncol; ++k) {
    for (const auto& name : policy.continuous)
      if (name == raw.columns[k]) kind[k] = 0;
    for (const auto& name : policy.indicator)
      if (name == raw.columns[k]) kind[k] = 1;
    if (kind[k] < 0)
      throw StructuralError("imputation policy does not classify column '" + raw.columns[k] +
                            "'");
  }

  // Observed-value aggregates keyed by (alt, group, day) and (alt, group, week).
  struct MeanMax {
    double sum = 0.0;
    double maxv = 0.0;
    long n = 0;
  };
  using Key = std::tuple<int, long, long>;
  std::vector<std::map<Key, MeanMax>> by_day(ncol), by_week(ncol);
  for (const auto& row : raw.rows) {
    for (size_t k = 0; k < ncol; ++k) {
      if (row.missing[k]) continue;
      for (auto* agg : {&by_day[k][{row.alt, row.group, row.day}],
                        &by_week[k][{row.alt, row.group, row.week}]}) {
        agg->sum += row.values[k];
        agg->maxv = agg->n == 0 ? row.values[k] : std::max(agg->maxv, row.values[k]);
        agg->n += 1;
      }
    }
  }

  // Complete the panel: every (group, occasion) needs one row per alternative.
  struct OccKey {
    long group, occasion;
    bool operator<(const OccKey& o) const {
      return group != o.group ? group < o.group : occasion < o.occasion;
    }
  };
  struct OccData {
    long day = 0, week = 0;
    std::vector<const RawPanelRow*> rows;
  };
  std::map<OccKey, OccData> occasions;
  for (const auto& row : raw.rows) {
    auto& occ = occasions[{row.group, row.occasion}];
    if (occ.rows.empty()) {
      occ.day = row.day;
      occ.week = row.week;
      occ.rows.assign(static_cast<size_t>(raw.n_items), nullptr);
    }
    if (occ.rows[static_cast<size_t>(row.alt - 1)])
      throw StructuralError("duplicate (group, occasion, alt) in raw panel");
    occ.rows[static_cast<size_t>(row.alt - 1)] = &row;
  }

  ImputedTable table;
  table.columns = raw.columns;
  for (const auto& [key, occ] : occasions) {
    std::vector<LongRow> rows;
    bool ref_available = false;
    for (int alt = 1; alt <= raw.n_items; ++alt) {
      const RawPanelRow* src = occ.rows[static_cast<size_t>(alt - 1)];
      LongRow out;
      out.group = key.group;
      out.occasion = key.occasion;
      out.alt = alt;
      out.chosen = src ? src->chosen : 0;
      out.available = 1;
      out.values.resize(ncol);
      for (size_t k = 0; k < ncol; ++k) {
        if (src && !src->missing[k]) {
          out.values[k] = src->values[k];
          continue;
        }
        const auto day_it = by_day[k].find({alt, key.group, occ.day});
        const auto week_it = by_week[k].find({alt, key.group, occ.week});
        if (day_it != by_day[k].end()) {
          out.values[k] = kind[k] == 0 ? day_it->second.sum / day_it->second.n
                                       : day_it->second.maxv;
        } else if (week_it != by_week[k].end()) {
          out.values[k] = kind[k] == 0 ? week_it->second.sum / week_it->second.n
                                       : week_it->second.maxv;
        } else if (kind[k] == 1) {
          out.values[k] = 0.0;
        } else {
          out.values[k] = 0.0;
          if (!out.chosen) out.available = 0;  // continuous gap unresolved
        }
      }
      if (out.alt == 1 && out.available) ref_available = true;
      rows.push_back(std::move(out));
    }
    if (!ref_available) {
      ++table.dropped_occasions;
      continue;
    }
    for (auto& r : rows) table.rows.push_back(std::move(r));
  }
  return table;
}

void save_long_table_csv(const std::string& path, const ImputedTable& table) {
  std::ofstream out = open_output(path);
  out << "group,occasion,alt,available,chosen";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.group << ',' << r.occasion << ',' << r.alt << ',' << r.available << ','
        << r.chosen;
    for (double v : r.values) out << ',' << format_double(v);
    out << '\n';
  }
}

namespace {

json model_to_json(const ModelSpec& spec) {
  json j;
  j["variant"] = variant_name(spec.variant);
  j["n_items"] = spec.n_items;
  j["beta_alt_specific"] = spec.beta_alt_specific;
  json bundles = json::array();
  for (const auto& b : spec.bundles) {
    json one = json::array();
    for (int item : b) one.push_back(item + 1);
    bundles.push_back(one);
  }
  j["bundles"] = bundles;
  json nests = json::array();
  if (spec.variant == Variant::Nested) {
    std::vector<std::vector<int>> by_nest(static_cast<size_t>(spec.n_nests));
    for (int item = 0; item < spec.n_items; ++item)
      by_nest[static_cast<size_t>(spec.nest_of[static_cast<size_t>(item)])].push_back(item + 1);
    for (const auto& members : by_nest) nests.push_back(members);
  }
  j["nests"] = nests;
  return j;
}

ModelSpec model_from_json(const json& j) {
  ModelSpec spec;
  spec.variant = variant_from_name(j.at("variant").get<std::string>());
  spec.n_items = j.at("n_items").get<int>();
  spec.beta_alt_specific = j.value("beta_alt_specific", false);
  if (j.contains("bundles")) {
    for (const auto& b : j["bundles"]) {
      std::vector<int> members;
      for (const auto& item : b) members.push_back(item.get<int>() - 1);
      spec.bundles.push_back(std::move(members));
    }
  }
  if (j.contains("nests") && !j["nests"].empty()) {
    spec.n_nests = static_cast<int>(j["nests"].size());
    spec.nest_of.assign(static_cast<size_t>(spec.n_items), -1);
    int nest = 0;
    for (const auto& members : j["nests"]) {
      for (const auto& item : members)
        spec.nest_of[static_cast<size_t>(item.get<int>() - 1)] = nest;
      ++nest;
    }
  }
  spec.validate();
  return spec;
}

json prior_to_json(const PriorSpec& p) {
  return json{{"sigma", p.sigma_prior == SigmaPrior::HuangWand ? "hw" : "lkj"},
              {"hw_nu", p.hw_nu},
              {"hw_scale", p.hw_scale},
              {"gaussian_sd", p.gaussian_sd},
              {"lkj_scale", p.lkj_scale},
              {"tau_scale", p.tau_scale},
              {"tau_df", p.tau_df}};
}

PriorSpec prior_from_json(const json& j) {
  PriorSpec p;
  const std::string s = j.value("sigma", "hw");
  if (s == "hw")
    p.sigma_prior = SigmaPrior::HuangWand;
  else if (s == "lkj")
    p.sigma_prior = SigmaPrior::Lkj;
  else
    throw StructuralError("unknown sigma prior '" + s + "'");
  p.hw_nu = j.value("hw_nu", p.hw_nu);
  p.hw_scale = j.value("hw_scale", p.hw_scale);
  p.gaussian_sd = j.value("gaussian_sd", p.gaussian_sd);
  p.lkj_scale = j.value("lkj_scale", p.lkj_scale);
  p.tau_scale = j.value("tau_scale", p.tau_scale);
  p.tau_df = j.value("tau_df", p.tau_df);
  return p;
}

json schedule_to_json(const ScheduleConfig& s) {
  return json{{"kappa0", s.kappa0},
              {"kappa_growth", s.kappa_growth},
              {"kappa_every", s.kappa_every},
              {"r", s.smoothing_r},
              {"warmup", s.warmup},
              {"stop_threshold", s.stop_threshold},
              {"max_iters", s.max_iters},
              {"factors", s.factors},
              {"init_d", s.init_d},
              {"adadelta_decay", s.adadelta_decay},
              {"adadelta_eps", s.adadelta_eps}};
}

ScheduleConfig schedule_from_json(const json& j) {
  ScheduleConfig s;
  s.kappa0 = j.value("kappa0", s.kappa0);
  s.kappa_growth = j.value("kappa_growth", s.kappa_growth);
  s.kappa_every = j.value("kappa_every", s.kappa_every);
  s.smoothing_r = j.value("r", s.smoothing_r);
  s.warmup = j.value("warmup", s.warmup);
  s.stop_threshold = j.value("stop_threshold", s.stop_threshold);
  s.max_iters = j.value("max_iters", s.max_iters);
  s.factors = j.value("factors", s.factors);
  s.init_d = j.value("init_d", s.init_d);
  s.adadelta_decay = j.value("adadelta_decay", s.adadelta_decay);
  s.adadelta_eps = j.value("adadelta_eps", s.adadelta_eps);
  return s;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = vector_from_json(rows[i]).transpose();
  return m;
}

json factor_va_to_json(const FactorGaussianVA& va) {
  return json{{"mu", vector_to_json(va.mu)},
              {"b", matrix_to_json(va.b)},
              {"d", vector_to_json(va.d)}};
}

FactorGaussianVA factor_va_from_json(const json& j) {
  FactorGaussianVA va;
  va.mu = vector_from_json(j.at("mu"));
  va.b = matrix_from_json(j.at("b"));
  va.d = vector_from_json(j.at("d"));
  return va;
}

json read_json_file(const std::string& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw StructuralError(path + ": " + e.what());
  }
  return j;
}

}  // namespace

FitConfig load_fit_config(const std::string& path) {
  const json j = read_json_file(path);
  FitConfig cfg;
  try {
    cfg.model = model_from_json(j.at("model"));
    if (j.contains("prior")) cfg.prior = prior_from_json(j["prior"]);
    if (j.contains("schedule")) cfg.schedule = schedule_from_json(j["schedule"]);
    cfg.method = j.value("method", cfg.method);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw StructuralError(path + ": " + e.what());
  }
  if (cfg.method != "cvi" && cfg.method != "davi")
    throw StructuralError("method must be cvi or davi");
  return cfg;
}

void save_fit_artifact(const std::string& path, const FitArtifact& artifact) {
  const FitResult& fit = artifact.result;
  json j;
  j["format"] = "mixlogit-fit-v1";
  j["method"] = fit.method;
  j["seed"] = fit.seed;
  j["model"] = model_to_json(artifact.config.model);
  j["prior"] = prior_to_json(artifact.config.prior);
  j["schedule"] = schedule_to_json(artifact.config.schedule);
  j["data"] = json{{"wf", artifact.wf}, {"wr", artifact.wr}, {"group_ids", fit.group_ids}};
  j["lambda0"] = factor_va_to_json(fit.lambda0);
  j["iterations"] = fit.iterations;
  j["kappa_final"] = fit.kappa_final;
  j["projections"] = fit.projections;
  if (fit.method == "cvi") {
    j["vartheta"] = vector_to_json(fit.vartheta);
    j["a"] = matrix_to_json(fit.a);
    json locals = json::array();
    for (const auto& lg : fit.locals.locals)
      locals.push_back(json{{"mu", vector_to_json(lg.mu)},
                            {"prec_chol", matrix_to_json(lg.prec_chol)}});
    j["locals"] = locals;
  } else {
    json locals = json::array();
    for (const auto& va : fit.local_vas) locals.push_back(factor_va_to_json(va));
    j["locals"] = locals;
  }
  std::ofstream out = open_output(path);
  out << j.dump(1) << '\n';
}

FitArtifact load_fit_artifact(const std::string& path) {
  const json j = read_json_file(path);
  FitArtifact artifact;
  try {
    if (j.at("format").get<std::string>() != "mixlogit-fit-v1")
      throw StructuralError(path + ": unknown artifact format");
    artifact.config.model = model_from_json(j.at("model"));
    artifact.config.prior = prior_from_json(j.at("prior"));
    artifact.config.schedule = schedule_from_json(j.at("schedule"));
    artifact.config.method = j.at("method").get<std::string>();
    artifact.config.seed = j.at("seed").get<std::uint64_t>();
    artifact.wf = j.at("data").at("wf").get<int>();
    artifact.wr = j.at("data").at("wr").get<int>();

    FitResult& fit = artifact.result;
    fit.method = artifact.config.method;
    fit.seed = artifact.config.seed;
    fit.group_ids = j.at("data").at("group_ids").get<std::vector<long>>();
    fit.lambda0 = factor_va_from_json(j.at("lambda0"));
    fit.iterations = j.value("iterations", 0);
    fit.kappa_final = j.value("kappa_final", 0);
    fit.projections = j.value("projections", 0l);
    if (fit.method == "cvi") {
      fit.vartheta = vector_from_json(j.at("vartheta"));
      fit.a = matrix_from_json(j.at("a"));
      for (const auto& lj : j.at("locals")) {
        LocalGaussian lg;
        lg.mu = vector_from_json(lj.at("mu"));
        lg.prec_chol = matrix_from_json(lj.at("prec_chol"));
        lg.logdet_v = 0.0;
        for (int i = 0; i < lg.prec_chol.rows(); ++i)
          lg.logdet_v -= 2.0 * std::log(lg.prec_chol(i, i));
        fit.locals.locals.push_back(std::move(lg));
      }
    } else {
      for (const auto& lj : j.at("locals"))
        fit.local_vas.push_back(factor_va_from_json(lj));
    }
  } catch (const json::exception& e) {
    throw StructuralError(path + ": " + e.what());
  }
  return artifact;
}

void save_trace_csv(const std::string& path, const std::vector<TracePoint>& trace) {
  std::ofstream out = open_output(path);
  out << "iteration,elbo_sample,smoothed_elbo,kappa,wall_ms\n";
  for (const auto& t : trace)
    out << t.iter << ',' << format_double(t.elbo_sample) << ','
        << format_double(t.smoothed_elbo) << ',' << t.kappa << ','
        << format_double(t.wall_ms) << '\n';
}

FitArtifact run_fit(const ChoiceDataset& data, const FitConfig& cfg) {
  MixedLogitModel model(data, cfg.model, cfg.prior);
  FitArtifact artifact;
  artifact.config = cfg;
  artifact.wf = data.wf;
  artifact.wr = data.wr;
  artifact.result = cfg.method == "cvi" ? cvi_fit(model, cfg.schedule, cfg.seed)
                                        : davi_fit(model, cfg.schedule, cfg.seed);
  for (const auto& g : data.groups) artifact.result.group_ids.push_back(g.id);
  return artifact;
}

}  // namespace mixlogit
