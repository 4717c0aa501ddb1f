#pragma once

#include <map>
#include <string>
#include <vector>

#include "wl3d/generate.hpp"
#include "wl3d/refinement.hpp"

namespace wl3d {

// A reproducible campaign: which variants to compare, where candidate pairs
// come from, and how much construction work is allowed.
struct SearchConfig {
  std::vector<Variant> variants = {{2, Flavor::WL}, {2, Flavor::FWL},
                                   {3, Flavor::WL}, {3, Flavor::FWL}};
  Family family = Family::Random;
  SymmetricTemplate symmetric_template = SymmetricTemplate::Planar;
  int n_lo = 5;
  int n_hi = 8;
  int trials = 100;            // pairs (random family) or base clouds (exchange)
  long long budget = 100000;   // exchange constructions cap
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
  int lattice_extent = 3;
  int jobs = 1;  // worker threads for independent pair trials

  std::string to_json() const;
  static SearchConfig from_json(const std::string& text);
};

struct TrialRecord {
  long long id = 0;
  int n = 0;
  std::string provenance;
  std::map<std::string, bool> fingerprints_equal;  // per variant name
  std::string oracle;                              // congruent | non-congruent | skipped
  std::vector<std::string> counterexample_variants;
};

struct FoundCounterexample {
  long long trial_id = 0;
  std::string provenance;
  std::string cloud_a_xyz;
  std::string cloud_b_xyz;
  std::vector<std::string> variants_fooled;
  bool fwl3_distinguishes = false;
};

struct SearchReport {
  SearchConfig config;
  std::vector<TrialRecord> records;
  long long candidates_constructed = 0;
  long long pairs_tested = 0;
  bool budget_exhausted = false;
  std::map<std::string, long long> counterexamples_per_variant;
  long long found_total = 0;
  std::vector<FoundCounterexample> found;  // deduplicated by congruence class
  double runtime_seconds = 0.0;

  std::string to_json() const;
};

// Runs the campaign described by the config. Every step is a pure function
// of (config, seed); reports are bitwise reproducible.
SearchReport run_search(const SearchConfig& config);

}  // namespace wl3d
