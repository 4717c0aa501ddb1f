#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wl3d/error.hpp"

namespace wl3d {

using Tick = std::int64_t;
using Vec3 = Eigen::Vector3d;

// Length resolution for distance quantization. All distance comparisons in
// the library go through integer ticks of size epsilon, computed after the
// cloud has been normalized to unit diameter; this gives a single global
// discretization so multisets of distances hash consistently.
struct Tolerance {
  double epsilon = 1e-6;

  Tick unit_ticks() const { return static_cast<Tick>(std::llround(1.0 / epsilon)); }
};

// An ordered list of 3D positions; the geometric graph is the complete graph
// over these points weighted by pairwise Euclidean distances.
struct PointCloud {
  std::vector<Vec3> points;

  int n() const { return static_cast<int>(points.size()); }
};

// Quantized pairwise distances: ticks(i,j) = round(d(i,j) / (diameter * eps)).
struct DistanceMatrix {
  int n = 0;
  std::vector<Tick> ticks;  // row-major n*n

  Tick at(int i, int j) const { return ticks[static_cast<std::size_t>(i) * n + j]; }
  Tick& at(int i, int j) { return ticks[static_cast<std::size_t>(i) * n + j]; }
};

struct CongruenceWitness {
  std::vector<int> permutation;  // node i of `a` maps to permutation[i] of `b`
  double max_residual = 0.0;     // max |d_a - d_b| over pairs, unit-diameter scale
};

PointCloud load_xyz(const std::string& path);
PointCloud parse_xyz(const std::string& text);
std::string format_xyz(const PointCloud& cloud, const std::string& comment);
void save_xyz(const PointCloud& cloud, const std::string& path, const std::string& comment);

// Validates finiteness and pairwise separation at tolerance scale.
void validate_cloud(const PointCloud& cloud, const Tolerance& tol);

double cloud_diameter(const PointCloud& cloud);

// Squared distance evaluated order-independently (coordinate deltas are
// squared and summed smallest-first), so axis permutations and reflections
// of the inputs produce bit-identical results.
double stable_distance(const Vec3& a, const Vec3& b);

DistanceMatrix distance_matrix(const PointCloud& cloud, const Tolerance& tol);

// Exhaustive congruence test (rigid motion + reflection + relabeling, scale
// free because both clouds are compared at unit diameter). Pruned by sorted
// per-node distance profiles; n must be at most 10.
std::optional<CongruenceWitness> congruent(const PointCloud& a, const PointCloud& b,
                                           const Tolerance& tol);

// Intersects three spheres centered on a non-collinear base triangle.
// Returns 0, 1 (apex on the base plane) or 2 mirror-image solutions.
std::vector<Vec3> trilaterate(const Vec3& p_a, const Vec3& p_b, const Vec3& p_c,
                              double r_a, double r_b, double r_c, const Tolerance& tol);

// True iff the double-centered Gram matrix of the squared distances is
// positive semidefinite with rank at most 3 (within tolerance).
bool edm_realizable_3d(const DistanceMatrix& d, const Tolerance& tol);

// Classical multidimensional scaling to rank 3, followed by a tick-exact
// refinement; the returned cloud's quantized distance matrix equals `d`.
PointCloud embed_3d(const DistanceMatrix& d, const Tolerance& tol);

// 288 V^2 of the tetrahedron with the six squared edge lengths
// (ab, ac, ad, bc, bd, cd); nonnegative iff realizable in 3-space given
// realizable faces.
double cayley_menger_4(double ab2, double ac2, double ad2, double bc2, double bd2,
                       double cd2);

// Best orthogonal (reflection allowed) superposition residual of `a` onto
// `b` under the given node correspondence, both clouds at unit diameter.
// Returns the max per-point distance after alignment.
double superposition_residual(const PointCloud& a, const PointCloud& b,
                              const std::vector<int>& permutation);

namespace detail {

// Moves `points` to a nearby configuration whose quantized distance matrix
// equals `target` exactly (a linearized convex hinge solve on the
// renormalized pair distances). Returns false if no such configuration was
// reached.
bool polish_to_ticks(std::vector<Vec3>& points, const std::vector<Tick>& target,
                     int n, const Tolerance& tol);

std::vector<Vec3> normalized_copy(const PointCloud& cloud);

// Raw three-sphere intersection data: apex = base + z * ez with z^2 as
// computed, which may be slightly negative for quantized radii. height_min
// is the smallest altitude of the base triangle (its thinness controls how
// noisy z^2 is).
struct TriParts {
  Vec3 base;
  Vec3 ez;
  double z2 = 0.0;
  double scale = 0.0;
  double height_min = 0.0;
};

TriParts trilaterate_parts(const Vec3& p_a, const Vec3& p_b, const Vec3& p_c, double r_a,
                           double r_b, double r_c, const Tolerance& tol);

}  // namespace detail

}  // namespace wl3d
