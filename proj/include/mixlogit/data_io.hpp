#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixlogit/priors.hpp"
#include "mixlogit/types.hpp"
#include "mixlogit/vi.hpp"

namespace mixlogit {

// Long-format CSV schema (fixed header names):
//   group,occasion,alt,available,chosen,f_<name>...,r_<name>...
// Alternative ids are 1-based on disk; 1 is the reference and must be
// available in every occasion. Covariates are stored already differenced, so
// the alt-1 row carries zeros. For bundle datasets the alt column indexes
// bundles; singleton rows carry their item's covariates and non-singleton
// rows carry zeros (their utilities are assembled from member items).
ChoiceDataset load_dataset_csv(const std::string& path, const ModelSpec& spec);
void save_dataset_csv(const std::string& path, const ChoiceDataset& data,
                      const ModelSpec& spec);

// Scanner-panel ingestion. Raw rows may omit (occasion, alt) pairs entirely;
// covariates recorded only when observed.
struct RawPanelRow {
  long group = 0;
  long occasion = 0;
  int alt = 0;  // 1-based item
  int chosen = 0;
  long day = 0;
  long week = 0;
  std::vector<double> values;        // per covariate column
  std::vector<std::uint8_t> missing;
};

struct RawPanel {
  std::vector<std::string> columns;  // covariate names with f_/r_ prefixes
  int n_items = 0;
  std::vector<RawPanelRow> rows;
};

struct ImputationPolicy {
  std::vector<std::string> continuous;  // mean-fill day-then-week per (alt, group)
  std::vector<std::string> indicator;   // max-fill day-then-week, else 0
};

struct LongRow {
  long group = 0;
  long occasion = 0;
  int alt = 0;
  int available = 1;
  int chosen = 0;
  std::vector<double> values;
};

struct ImputedTable {
  std::vector<std::string> columns;
  std::vector<LongRow> rows;
  long dropped_occasions = 0;  // reference alternative unavailable
};

RawPanel load_raw_panel_csv(const std::string& path, int n_items);
ImputedTable impute(const RawPanel& raw, const ImputationPolicy& policy);
void save_long_table_csv(const std::string& path, const ImputedTable& table);

struct FitConfig {
  ModelSpec model;
  PriorSpec prior;
  ScheduleConfig schedule;
  std::string method = "cvi";
  std::uint64_t seed = 1;
};

FitConfig load_fit_config(const std::string& path);

struct FitArtifact {
  FitConfig config;
  int wf = 0;
  int wr = 0;
  FitResult result;
};

// The artifact is a JSON document (trace excluded; it goes to its own
// delimited table) and reloads bit-exactly.
void save_fit_artifact(const std::string& path, const FitArtifact& artifact);
FitArtifact load_fit_artifact(const std::string& path);
void save_trace_csv(const std::string& path, const std::vector<TracePoint>& trace);

// Fits the configured method to the dataset and fills in artifact metadata.
FitArtifact run_fit(const ChoiceDataset& data, const FitConfig& cfg);

std::string format_double(double v);  // round-trip decimal form

}  // namespace mixlogit
