#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wl3d/geometry.hpp"

namespace wl3d {

enum class Family { Random, Lattice, Symmetric, Exchange };

enum class SymmetricTemplate { MirrorPair, SquarePyramid, Prism, Planar };

Family family_parse(const std::string& name);
std::string family_name(Family family);
SymmetricTemplate template_parse(const std::string& name);
std::string template_name(SymmetricTemplate t);

// Seed fully determines the output of every generator.
struct FamilySpec {
  Family family = Family::Random;
  int n = 6;
  std::uint64_t seed = 0;
  int lattice_extent = 3;  // integer box {0..extent-1}^3
  double lo = 0.0;         // distribution bounds for the random family
  double hi = 1.0;
  SymmetricTemplate symmetric_template = SymmetricTemplate::Planar;
};

// n i.i.d. points with dyadic coordinates (exact under integer translation),
// rejection-sampled so no two points collide at tolerance scale.
PointCloud random_cloud(const FamilySpec& spec);

// n distinct integer-coordinate points from a small box; exact tick
// arithmetic and plenty of repeated distances.
PointCloud lattice_cloud(int n, int extent, std::uint64_t seed);

// Families with deliberate coincident distances; the seed cycles through
// template variants (polygon layouts, prism twists/heights, pyramid stacks).
PointCloud symmetric_cloud(SymmetricTemplate t, int n, std::uint64_t seed);

PointCloud cloud_from_spec(const FamilySpec& spec);

// Exact congruence-preserving transformations: node relabeling, coordinate
// axis permutation, per-axis sign flips, integer translation. All are
// bit-exact on dyadic coordinates, so invariance tests face zero float error.
struct ExactTransform {
  std::vector<int> node_permutation;      // empty = identity
  std::array<int, 3> axis_permutation = {0, 1, 2};
  std::array<int, 3> axis_sign = {1, 1, 1};
  std::array<long, 3> translation = {0, 0, 0};
};

PointCloud transform_cloud(const PointCloud& cloud, const ExactTransform& op);

ExactTransform random_exact_transform(int n, std::uint64_t seed);

struct ExchangeSwap {
  int node = 0;  // the node whose two incident distances trade places
  int first = 0;
  int second = 0;
};

struct CandidatePair {
  PointCloud cloud_a;
  PointCloud cloud_b;
  std::vector<ExchangeSwap> swaps;  // construction trace
  std::string source;               // description of the base cloud
};

// Swaps d(i,p) <-> d(i,q) in the quantized distance matrix; if the result is
// still realizable in 3D, embeds it and returns the (original, exchanged)
// pair. The pair is only a candidate: the caller still has to test WL
// indistinguishability and oracle non-congruence.
std::optional<CandidatePair> apply_exchange(const PointCloud& cloud, int i, int p, int q,
                                            const Tolerance& tol);

}  // namespace wl3d
