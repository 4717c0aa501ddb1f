#include "wl3d/generate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace wl3d {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Dyadic fraction in [0,1) with 26 mantissa bits; adding small integers to
// such coordinates is exact in double precision.
double dyadic_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 38) * 0x1.0p-26;
}

int pick(std::mt19937_64& rng, int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

}  // namespace

Family family_parse(const std::string& name) {
  if (name == "random") return Family::Random;
  if (name == "lattice") return Family::Lattice;
  if (name == "symmetric") return Family::Symmetric;
  if (name == "exchange") return Family::Exchange;
  throw Error(ErrorCode::ParseError, "unknown family '" + name + "'");
}

std::string family_name(Family family) {
  switch (family) {
    case Family::Random: return "random";
    case Family::Lattice: return "lattice";
    case Family::Symmetric: return "symmetric";
    case Family::Exchange: return "exchange";
  }
  return "?";
}

SymmetricTemplate template_parse(const std::string& name) {
  if (name == "mirror-pair") return SymmetricTemplate::MirrorPair;
  if (name == "square-pyramid") return SymmetricTemplate::SquarePyramid;
  if (name == "prism") return SymmetricTemplate::Prism;
  if (name == "planar") return SymmetricTemplate::Planar;
  throw Error(ErrorCode::ParseError, "unknown symmetric template '" + name + "'");
}

std::string template_name(SymmetricTemplate t) {
  switch (t) {
    case SymmetricTemplate::MirrorPair: return "mirror-pair";
    case SymmetricTemplate::SquarePyramid: return "square-pyramid";
    case SymmetricTemplate::Prism: return "prism";
    case SymmetricTemplate::Planar: return "planar";
  }
  return "?";
}

PointCloud random_cloud(const FamilySpec& spec) {
  if (spec.n < 1) throw Error(ErrorCode::ParseError, "n must be at least 1");
  if (!(spec.hi > spec.lo)) throw Error(ErrorCode::ParseError, "empty distribution bounds");
  std::mt19937_64 rng(spec.seed);
  const double span = spec.hi - spec.lo;
  const double min_sep = 1e-3 * span;

  PointCloud cloud;
  cloud.points.reserve(spec.n);
  int attempts = 0;
  while (cloud.n() < spec.n) {
    if (++attempts > 100000)
      throw Error(ErrorCode::NoConvergence, "rejection sampling exhausted");
    Vec3 p(spec.lo + span * dyadic_unit(rng), spec.lo + span * dyadic_unit(rng),
           spec.lo + span * dyadic_unit(rng));
    bool ok = true;
    for (const Vec3& q : cloud.points)
      if (stable_distance(p, q) < min_sep) {
        ok = false;
        break;
      }
    if (ok) cloud.points.push_back(p);
  }
  return cloud;
}

PointCloud lattice_cloud(int n, int extent, std::uint64_t seed) {
  if (extent < 2) throw Error(ErrorCode::ParseError, "lattice extent must be at least 2");
  const long cells = static_cast<long>(extent) * extent * extent;
  if (n > cells)
    throw Error(ErrorCode::ParseError, "lattice box too small for n points");
  std::vector<long> order(cells);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (long i = cells - 1; i > 0; --i)
    std::swap(order[i], order[rng() % static_cast<std::uint64_t>(i + 1)]);

  PointCloud cloud;
  cloud.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const long cell = order[i];
    cloud.points.emplace_back(static_cast<double>(cell % extent),
                              static_cast<double>((cell / extent) % extent),
                              static_cast<double>(cell / (extent * extent)));
  }
  return cloud;
}

namespace {

void add_axis_points(PointCloud& cloud, int want, std::mt19937_64& rng, double base_z) {
  // Extra points stacked on the z-axis at distinct dyadic heights.
  int guard = 0;
  while (cloud.n() < want) {
    const double h = base_z + 0.25 + 0.5 * dyadic_unit(rng);
    Vec3 p(0.0, 0.0, h);
    bool ok = true;
    for (const Vec3& q : cloud.points)
      if (stable_distance(p, q) < 1e-3) ok = false;
    if (ok) cloud.points.push_back(p);
    if (++guard > 1000) throw Error(ErrorCode::NoConvergence, "axis stacking failed");
  }
}

PointCloud make_mirror_pair(int n, std::mt19937_64& rng) {
  if (n < 5) throw Error(ErrorCode::ParseError, "mirror-pair template needs n >= 5");
  PointCloud cloud;
  // Scalene base triangle in the z = 0 plane, jittered on a dyadic grid.
  cloud.points.emplace_back(0.0, 0.0, 0.0);
  cloud.points.emplace_back(1.0 + 0.25 * dyadic_unit(rng), 0.0, 0.0);
  cloud.points.emplace_back(0.25 + 0.25 * dyadic_unit(rng), 0.75 + 0.25 * dyadic_unit(rng), 0.0);
  // Anchor strictly above the plane.
  cloud.points.emplace_back(0.5 + 0.25 * dyadic_unit(rng), 0.25 + 0.25 * dyadic_unit(rng),
                            0.75 + 0.25 * dyadic_unit(rng));
  // Remaining points in exact mirror pairs across z = 0 (odd leftover goes
  // in-plane).
  while (cloud.n() + 2 <= n) {
    const double x = dyadic_unit(rng), y = dyadic_unit(rng);
    const double z = 0.375 + 0.5 * dyadic_unit(rng);
    cloud.points.emplace_back(x, y, z);
    cloud.points.emplace_back(x, y, -z);
  }
  if (cloud.n() < n)
    cloud.points.emplace_back(0.75 + 0.25 * dyadic_unit(rng), 0.5 + 0.25 * dyadic_unit(rng), 0.0);
  return cloud;
}

PointCloud make_square_pyramid(int n, std::mt19937_64& rng) {
  if (n < 5) throw Error(ErrorCode::ParseError, "square-pyramid template needs n >= 5");
  PointCloud cloud;
  cloud.points.emplace_back(0.0, 0.0, 0.0);
  cloud.points.emplace_back(1.0, 0.0, 0.0);
  cloud.points.emplace_back(1.0, 1.0, 0.0);
  cloud.points.emplace_back(0.0, 1.0, 0.0);
  const double heights[] = {0.5, 0.75, 1.0, 1.25};
  for (Vec3& p : cloud.points) p -= Vec3(0.5, 0.5, 0.0);
  cloud.points.emplace_back(0.0, 0.0, heights[pick(rng, 4)]);
  add_axis_points(cloud, n, rng, 0.75);
  return cloud;
}

PointCloud make_prism(int n, std::mt19937_64& rng) {
  if (n < 6) throw Error(ErrorCode::ParseError, "prism template needs n >= 6");
  PointCloud cloud;
  const double radius = 1.0 / std::sqrt(3.0);  // unit triangle side
  const bool twisted = rng() % 2 == 0;
  const double twist = twisted ? kPi / 3.0 : 0.0;
  // For the twisted variant, height sqrt(8/3) makes every vertex see the
  // same distance multiset as a regular hexagon vertex.
  const double magic = std::sqrt(8.0 / 3.0);
  const double heights[] = {magic, 1.0, 1.5, 0.75};
  const double h = twisted ? (rng() % 2 == 0 ? magic : heights[1 + pick(rng, 3)])
                           : heights[1 + pick(rng, 3)];
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * kPi * k / 3.0;
    cloud.points.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * kPi * k / 3.0 + twist;
    cloud.points.emplace_back(radius * std::cos(a), radius * std::sin(a), h);
  }
  if (cloud.n() < n) cloud.points.emplace_back(0.0, 0.0, h / 2.0);
  add_axis_points(cloud, n, rng, h);
  return cloud;
}

PointCloud make_planar(int n, std::mt19937_64& rng) {
  if (n < 3) throw Error(ErrorCode::ParseError, "planar template needs n >= 3");
  PointCloud cloud;
  const int variant = pick(rng, 3);
  if (variant == 0 || n < 4) {
    // Regular n-gon.
    for (int k = 0; k < n; ++k) {
      const double a = 2.0 * kPi * k / n;
      cloud.points.emplace_back(std::cos(a), std::sin(a), 0.0);
    }
  } else if (variant == 1) {
    // Regular (n-1)-gon plus its center.
    for (int k = 0; k + 1 < n; ++k) {
      const double a = 2.0 * kPi * k / (n - 1);
      cloud.points.emplace_back(std::cos(a), std::sin(a), 0.0);
    }
    cloud.points.emplace_back(0.0, 0.0, 0.0);
  } else {
    int guard = 0;
    while (cloud.n() < n) {
      Vec3 p(dyadic_unit(rng), dyadic_unit(rng), 0.0);
      bool ok = true;
      for (const Vec3& q : cloud.points)
        if (stable_distance(p, q) < 1e-2) ok = false;
      if (ok) cloud.points.push_back(p);
      if (++guard > 10000) throw Error(ErrorCode::NoConvergence, "planar sampling failed");
    }
  }
  return cloud;
}

}  // namespace

PointCloud symmetric_cloud(SymmetricTemplate t, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xda3e39cb94b95bdbULL);
  switch (t) {
    case SymmetricTemplate::MirrorPair: return make_mirror_pair(n, rng);
    case SymmetricTemplate::SquarePyramid: return make_square_pyramid(n, rng);
    case SymmetricTemplate::Prism: return make_prism(n, rng);
    case SymmetricTemplate::Planar: return make_planar(n, rng);
  }
  throw Error(ErrorCode::ParseError, "unknown symmetric template");
}

PointCloud cloud_from_spec(const FamilySpec& spec) {
  switch (spec.family) {
    case Family::Random: return random_cloud(spec);
    case Family::Lattice: return lattice_cloud(spec.n, spec.lattice_extent, spec.seed);
    case Family::Symmetric: return symmetric_cloud(spec.symmetric_template, spec.n, spec.seed);
    case Family::Exchange:
      throw Error(ErrorCode::ParseError, "exchange is a pair family; use the search harness");
  }
  throw Error(ErrorCode::ParseError, "unknown family");
}

PointCloud transform_cloud(const PointCloud& cloud, const ExactTransform& op) {
  const int n = cloud.n();
  std::vector<int> perm = op.node_permutation;
  if (perm.empty()) {
    perm.resize(n);
    std::iota(perm.begin(), perm.end(), 0);
  }
  if (static_cast<int>(perm.size()) != n)
    throw Error(ErrorCode::BadIndices, "node permutation size mismatch");

  PointCloud out;
  out.points.resize(n);
  for (int i = 0; i < n; ++i) {
    const Vec3& p = cloud.points[i];
    Vec3 q;
    for (int a = 0; a < 3; ++a)
      q(a) = op.axis_sign[a] * p(op.axis_permutation[a]) + static_cast<double>(op.translation[a]);
    out.points[perm[i]] = q;
  }
  return out;
}

ExactTransform random_exact_transform(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  ExactTransform op;
  op.node_permutation.resize(n);
  std::iota(op.node_permutation.begin(), op.node_permutation.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(op.node_permutation[i], op.node_permutation[rng() % static_cast<std::uint64_t>(i + 1)]);
  const std::array<std::array<int, 3>, 6> perms = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  op.axis_permutation = perms[pick(rng, 6)];
  for (int a = 0; a < 3; ++a) op.axis_sign[a] = (rng() % 2 == 0) ? 1 : -1;
  for (int a = 0; a < 3; ++a) op.translation[a] = static_cast<long>(rng() % 7) - 3;
  return op;
}

std::optional<CandidatePair> apply_exchange(const PointCloud& cloud, int i, int p, int q,
                                            const Tolerance& tol) {
  const int n = cloud.n();
  if (i < 0 || p < 0 || q < 0 || i >= n || p >= n || q >= n || i == p || i == q || p == q)
    throw Error(ErrorCode::BadIndices, "exchange indices must be distinct and in range");

  DistanceMatrix d = distance_matrix(cloud, tol);
  std::swap(d.at(i, p), d.at(i, q));
  d.at(p, i) = d.at(i, p);
  d.at(q, i) = d.at(i, q);

  if (!edm_realizable_3d(d, tol)) return std::nullopt;
  PointCloud embedded;
  try {
    embedded = embed_3d(d, tol);
  } catch (const Error&) {
    return std::nullopt;
  }
  CandidatePair pair;
  pair.cloud_a = cloud;
  pair.cloud_b = std::move(embedded);
  pair.swaps.push_back({i, p, q});
  return pair;
}

}  // namespace wl3d
