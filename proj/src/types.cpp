#include "mixlogit/types.hpp"

#include <algorithm>

namespace mixlogit {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Standard: return "standard";
    case Variant::Bundle: return "bundle";
    case Variant::Nested: return "nested";
  }
  return "standard";
}

Variant variant_from_name(const std::string& name) {
  if (name == "standard") return Variant::Standard;
  if (name == "bundle") return Variant::Bundle;
  if (name == "nested") return Variant::Nested;
  throw StructuralError("unknown model variant '" + name + "'");
}

int ModelSpec::gamma_index(int alt) const {
  if (variant != Variant::Bundle || is_singleton(alt)) return -1;
  int idx = 0;
  for (int r = 0; r < alt; ++r)
    if (!is_singleton(r)) ++idx;
  return idx;
}

int ModelSpec::n_free_gammas() const {
  if (variant != Variant::Bundle) return 0;
  int n = 0;
  for (size_t r = 0; r < bundles.size(); ++r)
    if (bundles[r].size() > 1) ++n;
  return n;
}

void ModelSpec::validate() const {
  if (n_items < 2) throw StructuralError("model needs at least two items");
  if (variant == Variant::Bundle) {
    if (bundles.empty()) throw StructuralError("bundle model without bundles");
    for (const auto& b : bundles) {
      if (b.empty()) throw StructuralError("empty bundle");
      for (int j : b)
        if (j < 0 || j >= n_items) throw StructuralError("bundle member out of range");
    }
  }
  if (variant == Variant::Nested) {
    if (n_nests < 1) throw StructuralError("nested model needs at least one nest");
    if (static_cast<int>(nest_of.size()) != n_items)
      throw StructuralError("nest partition must cover all items");
    std::vector<bool> seen(static_cast<size_t>(n_nests), false);
    for (int k : nest_of) {
      if (k < 0 || k >= n_nests) throw StructuralError("nest id out of range");
      seen[static_cast<size_t>(k)] = true;
    }
    for (bool s : seen)
      if (!s) throw StructuralError("empty nest in partition");
  }
}

int Occasion::chosen_pos() const {
  for (size_t k = 0; k < alts.size(); ++k)
    if (alts[k] == chosen) return static_cast<int>(k);
  throw StructuralError("chosen alternative not in choice set");
}

long ChoiceDataset::n_occasions() const {
  long n = 0;
  for (const auto& g : groups) n += static_cast<long>(g.occasions.size());
  return n;
}

void ChoiceDataset::validate(const ModelSpec& spec) const {
  spec.validate();
  if (spec.n_items != n_items) throw StructuralError("spec/dataset item count mismatch");
  const int n_alts = spec.n_choice_alts();
  for (const auto& g : groups) {
    if (g.occasions.empty())
      throw StructuralError("group " + std::to_string(g.id) + " has no occasions");
    for (const auto& occ : g.occasions) {
      if (occ.alts.empty()) throw StructuralError("empty choice set");
      if (!std::is_sorted(occ.alts.begin(), occ.alts.end()))
        throw StructuralError("choice set not sorted");
      if (occ.alts.front() != 0) throw StructuralError("reference alternative missing");
      if (occ.alts.back() >= n_alts) throw StructuralError("alternative id out of range");
      occ.chosen_pos();
      if (occ.xf.rows() != n_items || occ.xr.rows() != n_items ||
          occ.xf.cols() != wf || occ.xr.cols() != wr)
        throw StructuralError("covariate matrix shape mismatch");
    }
  }
}

}  // namespace mixlogit
