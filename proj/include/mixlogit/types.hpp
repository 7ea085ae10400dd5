#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace mixlogit {

// Error taxonomy used across the library:
//   StructuralError - malformed datasets, specs or shape mismatches
//   DomainError     - parameter values outside their admissible range
//   NumericalError  - non-finite intermediates, failed factorizations
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Variant { Standard, Bundle, Nested };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Structural metadata for the three model variants. "Items" are the base
// alternatives (item 0 is the reference with zero differenced covariates).
// For Bundle models the choice alternatives are bundles of items; otherwise
// choice alternatives and items coincide.
struct ModelSpec {
  Variant variant = Variant::Standard;
  int n_items = 0;
  bool beta_alt_specific = false;
  std::vector<std::vector<int>> bundles;  // Bundle: member items per alternative
  std::vector<int> nest_of;               // Nested: nest id per item
  int n_nests = 0;

  int n_choice_alts() const {
    return variant == Variant::Bundle ? static_cast<int>(bundles.size()) : n_items;
  }
  bool is_singleton(int alt) const {
    return variant != Variant::Bundle || bundles[static_cast<size_t>(alt)].size() == 1;
  }
  // Index of alternative `alt` within the packed gamma block, -1 for
  // singletons (their complementary effect is fixed to zero).
  int gamma_index(int alt) const;
  int n_free_gammas() const;
  void validate() const;
};

// One choice occasion. `alts` lists the available choice alternatives
// (sorted, always containing 0 = the reference). Covariates are stored per
// item, already differenced against the reference, so row 0 is all zeros.
struct Occasion {
  std::vector<int> alts;
  int chosen = 0;  // chosen alternative id, must be in alts
  Eigen::MatrixXd xf;  // n_items x wf
  Eigen::MatrixXd xr;  // n_items x wr

  int chosen_pos() const;
};

struct ChoiceGroup {
  long id = 0;
  std::vector<Occasion> occasions;
};

struct ChoiceDataset {
  std::vector<ChoiceGroup> groups;
  int n_items = 0;
  int wf = 0;  // fixed covariates per item
  int wr = 0;  // random-coefficient covariates per item
  std::vector<std::string> f_names;  // column names (optional; defaults generated)
  std::vector<std::string> r_names;

  int alpha_dim() const { return wr * (n_items - 1); }
  long n_occasions() const;
  void validate(const ModelSpec& spec) const;
};

}  // namespace mixlogit
