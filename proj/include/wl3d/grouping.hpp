#pragma once

#include <array>
#include <optional>
#include <vector>

#include "wl3d/reconstruct.hpp"
#include "wl3d/refinement.hpp"

namespace wl3d {

// The three per-slot multisets of new-edge pairs of a (3,WL) root, with the
// crucial difference from the FWL case: nothing ties together the entries
// that belong to the same external node.
struct NERows {
  std::array<Tick, 3> ce{};                              // common edges, slot order
  std::array<std::vector<std::array<Tick, 2>>, 3> rows;  // pairs sorted ascending

  int width() const { return static_cast<int>(rows[0].size()); }  // n - 3
};

// One hypothesized group: an entry from each row plus the orientation used
// to splice them (which pair element plays the shared edge).
struct GroupAssignment {
  std::array<int, 3> pair_index{};
  // orientation[0]: element of the row-1 pair acting as the b-edge;
  // orientation[1]: element of the row-2 pair acting as the a-edge;
  // orientation[2]: element of the row-3 pair acting as the a-edge.
  std::array<int, 3> orientation{};
  ApexDistances apex;
};

struct Grouping {
  std::vector<GroupAssignment> groups;  // one per external node
};

struct GroupingEnumeration {
  std::vector<Grouping> groupings;
  bool budget_exhausted = false;
  long long visited = 0;
  long long infeasible_combinations = 0;  // splice-incompatible triples seen
};

// Partition of the 6(n-3) new-edge slots under the transitive closure of
// real and hypothesized splices. Feasible iff every class carries one length.
struct EqualityClasses {
  std::vector<int> class_of;        // slot id = (row * width + pair) * 2 + element
  std::vector<Tick> class_length;   // representative length per class, -1 if mixed
  bool feasible = true;
};

struct TetraComparison {
  std::vector<std::array<Tick, 3>> new_tetrahedra;  // sorted apex triples not in the real multiset
  std::vector<bool> realizable;                     // per group, 4-point realizability
};

// Reads the three slot rows off a (3,WL) transcript's root class.
NERows build_rows(const Transcript& t, ColorId root_color);

// Every grouping (up to group order) whose splices join only equal ticks.
GroupingEnumeration enumerate_groupings(const NERows& rows, long long budget);

// Label propagation as a union-find over splice constraints;
// `real` contributes the black lines when available.
EqualityClasses label_equality_classes(const Grouping& g, const NERows& rows,
                                       const Grouping* real = nullptr);

// Apex-distance triples of `g` compared, as multisets of sorted triples,
// against the real grouping's; groups failing the four-point realizability
// check are flagged rather than reported as new tetrahedra.
TetraComparison compare_tetrahedra(const Grouping& g, const NERows& rows,
                                   const std::vector<std::array<Tick, 3>>& real_triples,
                                   const Tolerance& tol);

// Helper for harnesses that hold the original cloud: the true apex triples
// (sorted) of the externals of a concrete root tuple.
std::vector<std::array<Tick, 3>> real_apex_triples(const DistanceMatrix& d, int a, int b,
                                                   int c);

}  // namespace wl3d
