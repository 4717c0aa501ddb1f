#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "wl3d/refinement.hpp"

namespace wl3d {

// Length of the edge a slot-replacement triangle shares with the root
// triangle, recovered from the two collapsed-pair entries in that slot.
struct CommonEdgeReport {
  int slot = 0;  // 1..3
  Tick ce_length = 0;
};

struct ApexDistances {
  Tick r_a = 0, r_b = 0, r_c = 0;

  bool operator==(const ApexDistances&) const = default;
};

// One external node as seen from a face: per slot, the unordered pair of
// edges left after removing the common edge.
struct NeighborFacesEntry {
  std::array<std::array<Tick, 2>, 3> ne_pairs{};  // each pair sorted
  std::array<ColorId, 3> component_colors{-1, -1, -1};
};

struct NeighborFaces {
  std::vector<NeighborFacesEntry> externals;
};

// Mirror-paired possible positions of external nodes relative to a face,
// with the anchor's entry excluded.
struct CandidateInfo {
  Vec3 upper;   // solution on the positive side of the face
  Vec3 lower;   // mirror solution (== upper when merged into the plane)
  bool merged = false;
  ApexDistances apex;
  int entry = -1;  // index into the face's external entries
};

struct CandidatePointSet {
  std::array<Vec3, 3> face{};
  int anchor_entry = -1;
  std::vector<CandidateInfo> candidates;
  // Position noise scale for candidates of this face: sqrt of the z^2
  // quantization noise bound, which grows as the face gets thinner.
  double uncertainty = 0.0;

  // Number of distinct candidate positions (2 per pair, 1 per merged).
  int cardinality() const;
};

struct RootSelection {
  ColorId color = -1;
  std::vector<Tick> base_signature;  // sorted, all positive
  bool scalene = false;
};

struct ReconstructionCertificate {
  bool fingerprint_match = false;
  std::array<int, 4> cp_cardinalities{0, 0, 0, 0};
  std::array<long, 3> case_histogram{0, 0, 0};  // turn-over cases 1..3
  std::vector<std::string> collision_notes;
  int anchor_entry = -1;
  int root_attempts = 1;
  int anchor_attempts = 1;
  bool planar = false;
  std::string fingerprint;

  std::string to_json() const;
};

struct Reconstruction {
  PointCloud cloud;
  ReconstructionCertificate certificate;
};

struct ReconstructOptions {
  int max_root_attempts = 6;
  int max_anchor_attempts = 4;
  // Test hooks: pin the anchor to the k-th candidate in the deterministic
  // ladder, or start from the k-th eligible root class.
  std::optional<int> force_anchor = std::nullopt;
  std::optional<int> force_root = std::nullopt;
};

// Picks a final-round color class whose initial signature has three positive
// distances, preferring scalene classes, tie-broken by smallest signature.
RootSelection select_root(const Transcript& t);

// The three per-slot common edges read off a depth >= 1 tree of a
// non-degenerate root. The returned lengths are (d(b,c), d(a,c), d(a,b)).
std::array<CommonEdgeReport, 3> identify_common_edges(const WLTree& tree);

NeighborFaces extract_new_edges(const WLTree& tree,
                                const std::array<CommonEdgeReport, 3>& common_edges);

// 1: three distinct lengths (2:2:2), 2: two lengths (4:2), 3: one length.
int classify_ne_case(const std::array<std::array<Tick, 2>, 3>& ne_pairs);

ApexDistances resolve_apex_distances(const NeighborFacesEntry& entry);

// Trilaterates every external against the face, fixes the anchor on the
// positive side and removes it from the candidate set.
CandidatePointSet candidate_points(const std::array<Vec3, 3>& face,
                                   const std::vector<ApexDistances>& externals,
                                   int anchor_index, const Tolerance& tol);

// A candidate survives iff it appears in all four sets; exactly one member
// of each mirror pair may survive. Returns the n-4 resolved positions.
std::vector<Vec3> intersect_cps(const CandidatePointSet& cp1, const CandidatePointSet& cp2,
                                const CandidatePointSet& cp3, const CandidatePointSet& cp4,
                                const Tolerance& tol);

// Full inverse pipeline: transcript (and nothing else) to a point cloud in a
// canonical frame, certified by re-refining the output and comparing
// fingerprints.
Reconstruction reconstruct(const Transcript& t, const Tolerance& tol,
                           const ReconstructOptions& options = {});

}  // namespace wl3d
