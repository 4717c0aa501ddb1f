#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wl3d/geometry.hpp"

namespace wl3d {

using ColorId = std::int32_t;

enum class Flavor { WL, FWL };

// One of the four supported refinement variants: (2,WL), (2,FWL), (3,WL), (3,FWL).
struct Variant {
  int k = 3;
  Flavor flavor = Flavor::FWL;

  std::string name() const;
  static Variant parse(const std::string& name);
  bool operator==(const Variant& other) const {
    return k == other.k && flavor == other.flavor;
  }
};

// How one round-t color was derived: the tuple's previous color plus its
// neighbor signature over previous-round colors. For FWL the signature is n
// joint k-component replacements (flattened, groups sorted); for WL it is k
// independent slot multisets (slot-major, each sorted).
struct Rule {
  ColorId prev = -1;
  std::vector<ColorId> nbrs;

  bool operator==(const Rule& other) const = default;
};

struct Fingerprint {
  std::string digest;

  bool operator==(const Fingerprint& other) const { return digest == other.digest; }
  bool operator!=(const Fingerprint& other) const { return digest != other.digest; }
};

// Full record of a refinement run. Color ids are canonical: within each
// round they are assigned in lexicographic order of signatures, so equal
// clouds produce identical tables regardless of node order or platform.
struct Transcript {
  Variant variant;
  int n = 0;
  int rounds = 0;
  double epsilon = 1e-6;
  std::vector<std::vector<Tick>> init_table;        // round-0 color -> sorted ticks
  std::vector<std::vector<Rule>> rules;             // rules[r] for r in 1..rounds
  std::vector<std::vector<ColorId>> coloring;       // coloring[r][tuple] for r in 0..rounds
  Fingerprint fingerprint;

  int color_count(int round) const;
  std::vector<long long> final_class_counts() const;  // final color -> multiplicity
};

struct WLTreeNode {
  ColorId color = -1;
  std::vector<Tick> init_sig;
  // FWL: n groups of k nodes (one joint replacement per node j);
  // WL: k groups of n nodes (one multiset per slot). Empty at the leaves.
  std::vector<std::vector<WLTreeNode>> child_groups;
};

struct WLTree {
  Variant variant;
  int depth = 0;
  WLTreeNode root;
};

std::size_t tuple_count(int n, int k);
std::size_t tuple_index(const std::vector<int>& tuple, int n);

// Initial coloring: for k = 3 each tuple's signature is its three pairwise
// tick distances sorted ascending; for k = 2 the single tick distance.
std::pair<std::vector<ColorId>, std::vector<std::vector<Tick>>> init_colors(
    const PointCloud& cloud, Variant variant, const Tolerance& tol);

// One refinement round over an existing coloring; returns the new canonical
// coloring and the per-color derivation rules.
std::pair<std::vector<ColorId>, std::vector<Rule>> refine_step(
    const std::vector<ColorId>& coloring, int n, Variant variant);

// Iterates refine_step to the stable partition, recording every round.
// Records at least 3 rounds (padding with stable rounds when needed).
Transcript refine_to_stable(const PointCloud& cloud, Variant variant, const Tolerance& tol);

Fingerprint fingerprint_of(const Transcript& t);

// Follows prev-pointers from a round-r color down to its initial signature.
const std::vector<Tick>& init_signature_of(const Transcript& t, int round, ColorId color);

WLTree unroll_tree(const Transcript& t, const std::vector<int>& root_tuple, int depth);

std::string transcript_to_json(const Transcript& t);
Transcript transcript_from_json(const std::string& text);

}  // namespace wl3d
