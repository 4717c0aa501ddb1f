#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "wl3d/generate.hpp"
#include "wl3d/geometry.hpp"

using namespace wl3d;

namespace {

const Tolerance kTol;

PointCloud cloud_of(std::initializer_list<Vec3> pts) {
  PointCloud c;
  c.points = pts;
  return c;
}

// Independent 5-point flatness oracle: the order-6 Cayley-Menger
// determinant vanishes iff the five points fit in 3-space.
double cayley_menger_5(const std::vector<std::vector<double>>& d2) {
  Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Ones();
  m(0, 0) = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) m(i + 1, j + 1) = d2[i][j];
  return m.determinant();
}

}  // namespace

TEST_CASE("xyz parsing accepts well-formed files and rejects malformed ones") {
  const PointCloud c = parse_xyz("2\ncomment\n0 0 0\n1 0 0\n");
  CHECK(c.n() == 2);
  CHECK(c.points[1].x() == 1.0);

  CHECK_THROWS_AS(parse_xyz(""), Error);
  CHECK_THROWS_AS(parse_xyz("x\ncomment\n"), Error);
  CHECK_THROWS_AS(parse_xyz("2\ncomment\n0 0 0\n"), Error);
  CHECK_THROWS_AS(parse_xyz("1\ncomment\n0 0\n"), Error);
  CHECK_THROWS_AS(parse_xyz("1\ncomment\nnan 0 0\n"), Error);
  CHECK_THROWS_AS(parse_xyz("1\ncomment\ninf 0 0\n"), Error);
  CHECK_THROWS_AS(parse_xyz("1\ncomment\n0 0 0 7\n"), Error);

  const PointCloud back = parse_xyz(format_xyz(c, "round trip"));
  CHECK(back.points[1].isApprox(c.points[1]));
}

TEST_CASE("distance_matrix quantizes the unit segment") {
  const PointCloud c = cloud_of({{0, 0, 0}, {1, 0, 0}});
  const DistanceMatrix d = distance_matrix(c, kTol);
  CHECK(d.at(0, 0) == 0);
  CHECK(d.at(0, 1) == 1000000);
  CHECK(d.at(1, 0) == 1000000);
}

TEST_CASE("distance_matrix: equilateral triangle has equal off-diagonal ticks") {
  const PointCloud c = cloud_of({{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}});
  const DistanceMatrix d = distance_matrix(c, kTol);
  CHECK(d.at(0, 1) == d.at(1, 2));
  CHECK(d.at(1, 2) == d.at(0, 2));
  CHECK(d.at(0, 1) == 1000000);
}

TEST_CASE("distance_matrix rejects duplicate points") {
  const PointCloud c = cloud_of({{0, 0, 0}, {0, 0, 0}});
  CHECK_THROWS_WITH_AS(distance_matrix(c, kTol), doctest::Contains("DuplicatePoints"), Error);
}

TEST_CASE("congruent: permutation and mirror images are congruent") {
  FamilySpec spec;
  spec.n = 7;
  spec.seed = 11;
  const PointCloud a = random_cloud(spec);

  ExactTransform perm = random_exact_transform(a.n(), 5);
  perm.axis_permutation = {0, 1, 2};
  perm.axis_sign = {1, 1, 1};
  perm.translation = {0, 0, 0};
  CHECK(congruent(a, transform_cloud(a, perm), kTol).has_value());

  ExactTransform mirror;
  mirror.axis_sign = {-1, 1, 1};
  const auto w = congruent(a, transform_cloud(a, mirror), kTol);
  REQUIRE(w.has_value());
  CHECK(w->max_residual <= kTol.epsilon);
}

TEST_CASE("congruent: unit square vs 1x2 rectangle differ") {
  const PointCloud square = cloud_of({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}});
  const PointCloud rect = cloud_of({{0, 0, 0}, {1, 0, 0}, {1, 2, 0}, {0, 2, 0}});
  CHECK(!congruent(square, rect, kTol).has_value());
}

TEST_CASE("congruent guards its preconditions") {
  const PointCloud two = cloud_of({{0, 0, 0}, {1, 0, 0}});
  const PointCloud three = cloud_of({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
  CHECK_THROWS_WITH_AS(congruent(two, three, kTol), doctest::Contains("SizeMismatch"), Error);

  FamilySpec spec;
  spec.n = 11;
  spec.seed = 3;
  const PointCloud big = random_cloud(spec);
  CHECK_THROWS_WITH_AS(congruent(big, big, kTol), doctest::Contains("TooLargeForExhaustive"),
                       Error);
}

TEST_CASE("congruent behaves as an equivalence relation on samples") {
  std::vector<PointCloud> clouds;
  for (std::uint64_t s = 0; s < 6; ++s) {
    FamilySpec spec;
    spec.n = 6;
    spec.seed = s;
    const PointCloud base = random_cloud(spec);
    clouds.push_back(base);
    clouds.push_back(transform_cloud(base, random_exact_transform(base.n(), s + 100)));
  }
  for (const auto& c : clouds) CHECK(congruent(c, c, kTol).has_value());
  for (std::size_t i = 0; i < clouds.size(); ++i)
    for (std::size_t j = i + 1; j < clouds.size(); ++j) {
      const bool ij = congruent(clouds[i], clouds[j], kTol).has_value();
      const bool ji = congruent(clouds[j], clouds[i], kTol).has_value();
      CHECK(ij == ji);
      for (std::size_t k = j + 1; k < clouds.size(); ++k) {
        const bool jk = congruent(clouds[j], clouds[k], kTol).has_value();
        const bool ik = congruent(clouds[i], clouds[k], kTol).has_value();
        if (ij && jk) CHECK(ik);
      }
    }
}

TEST_CASE("trilaterate: equilateral base, all radii 2") {
  const Vec3 a(0, 0, 0), b(2, 0, 0), c(1, std::sqrt(3.0), 0);
  const auto sols = trilaterate(a, b, c, 2, 2, 2, kTol);
  REQUIRE(sols.size() == 2);
  // Frozen expected values, checked here by substituting the radii back.
  const Vec3 expect(1.0, 1.0 / std::sqrt(3.0), std::sqrt(8.0 / 3.0));
  CHECK((sols[0] - expect).norm() < 1e-9);
  CHECK((sols[1] - Vec3(expect.x(), expect.y(), -expect.z())).norm() < 1e-9);
  for (const Vec3& s : sols) {
    CHECK(std::abs((s - a).norm() - 2.0) < 2 * kTol.epsilon);
    CHECK(std::abs((s - b).norm() - 2.0) < 2 * kTol.epsilon);
    CHECK(std::abs((s - c).norm() - 2.0) < 2 * kTol.epsilon);
  }
}

TEST_CASE("trilaterate: radii of an existing base vertex give that vertex") {
  const Vec3 a(0, 0, 0), b(3, 0, 0), c(1, 2, 0);
  const Vec3 target = c;
  const auto sols =
      trilaterate(a, b, c, (target - a).norm(), (target - b).norm(), (target - c).norm(), kTol);
  REQUIRE(sols.size() == 1);
  CHECK((sols[0] - target).norm() < 1e-9);
}

TEST_CASE("trilaterate: unreachable radii give no solutions") {
  const Vec3 a(0, 0, 0), b(2, 0, 0), c(1, std::sqrt(3.0), 0);
  CHECK(trilaterate(a, b, c, 0.1, 0.1, 0.1, kTol).empty());
}

TEST_CASE("trilaterate rejects collinear bases") {
  CHECK_THROWS_WITH_AS(trilaterate(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), 1, 1, 1, kTol),
                       doctest::Contains("CollinearBase"), Error);
}

TEST_CASE("trilaterate solutions reproduce their radii on random inputs") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    FamilySpec spec;
    spec.n = 4;
    spec.seed = 900 + s;
    const PointCloud c = random_cloud(spec);
    const Vec3 apex = c.points[3];
    std::vector<Vec3> sols;
    try {
      sols = trilaterate(c.points[0], c.points[1], c.points[2], (apex - c.points[0]).norm(),
                         (apex - c.points[1]).norm(), (apex - c.points[2]).norm(), kTol);
    } catch (const Error&) {
      continue;  // collinear draw
    }
    REQUIRE(!sols.empty());
    bool found = false;
    for (const Vec3& sol : sols) {
      for (int k = 0; k < 3; ++k)
        CHECK(std::abs((sol - c.points[k]).norm() - (apex - c.points[k]).norm()) <
              2 * kTol.epsilon);
      if ((sol - apex).norm() < 1e-7) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("edm_realizable_3d accepts real clouds and rejects impossible data") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    FamilySpec spec;
    spec.n = 6;
    spec.seed = 50 + s;
    CHECK(edm_realizable_3d(distance_matrix(random_cloud(spec), kTol), kTol));
  }

  DistanceMatrix bad;  // triangle inequality violated: d = (1, 1, 3)
  bad.n = 3;
  bad.ticks = {0, 333333, 1000000, 333333, 0, 333333, 1000000, 333333, 0};
  CHECK(!edm_realizable_3d(bad, kTol));
}

TEST_CASE("edm_realizable_3d: the regular 4-simplex needs four dimensions") {
  DistanceMatrix simplex;
  simplex.n = 5;
  simplex.ticks.assign(25, 1000000);
  for (int i = 0; i < 5; ++i) simplex.ticks[i * 5 + i] = 0;

  // Independent oracle: nonzero order-6 Cayley-Menger determinant.
  std::vector<std::vector<double>> d2(5, std::vector<double>(5, 1.0));
  for (int i = 0; i < 5; ++i) d2[i][i] = 0.0;
  CHECK(std::abs(cayley_menger_5(d2)) > 1e-6);

  CHECK(!edm_realizable_3d(simplex, kTol));
}

TEST_CASE("embed_3d rebuilds segments and triangles") {
  const PointCloud segment = cloud_of({{0, 0, 0}, {1, 0, 0}});
  const PointCloud seg2 = embed_3d(distance_matrix(segment, kTol), kTol);
  REQUIRE(seg2.n() == 2);
  CHECK(std::abs((seg2.points[0] - seg2.points[1]).norm() - 1.0) < 1e-6);

  const PointCloud tri = cloud_of({{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}});
  const DistanceMatrix td = distance_matrix(tri, kTol);
  const PointCloud tri2 = embed_3d(td, kTol);
  const DistanceMatrix td2 = distance_matrix(tri2, kTol);
  CHECK(td.ticks == td2.ticks);
}

TEST_CASE("embed_3d of a random cloud's matrix is congruent to the original") {
  FamilySpec spec;
  spec.n = 6;
  spec.seed = 77;
  const PointCloud c = random_cloud(spec);
  const PointCloud e = embed_3d(distance_matrix(c, kTol), kTol);
  CHECK(congruent(c, e, kTol).has_value());
}

TEST_CASE("embed_3d round trip over many random clouds") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    FamilySpec spec;
    spec.n = 4 + static_cast<int>(s % 6);
    spec.seed = 1000 + s;
    const PointCloud c = random_cloud(spec);
    const PointCloud e = embed_3d(distance_matrix(c, kTol), kTol);
    CHECK(congruent(c, e, kTol).has_value());
  }
}

TEST_CASE("embed_3d refuses unrealizable input") {
  DistanceMatrix bad;
  bad.n = 3;
  bad.ticks = {0, 333333, 1000000, 333333, 0, 333333, 1000000, 333333, 0};
  CHECK_THROWS_WITH_AS(embed_3d(bad, kTol), doctest::Contains("NotRealizable"), Error);
}

TEST_CASE("distance matrices are invariant under exact congruences") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    FamilySpec spec;
    spec.n = 5 + static_cast<int>(s % 4);
    spec.seed = 300 + s;
    const PointCloud c = random_cloud(spec);
    ExactTransform op = random_exact_transform(c.n(), s);
    op.node_permutation.clear();  // keep node order; compare entrywise
    const DistanceMatrix d1 = distance_matrix(c, kTol);
    const DistanceMatrix d2 = distance_matrix(transform_cloud(c, op), kTol);
    CHECK(d1.ticks == d2.ticks);
  }
}

TEST_CASE("superposition residual is tiny for congruent pairs, large otherwise") {
  FamilySpec spec;
  spec.n = 6;
  spec.seed = 5;
  const PointCloud a = random_cloud(spec);
  const ExactTransform op = random_exact_transform(a.n(), 9);
  const PointCloud b = transform_cloud(a, op);
  const auto witness = congruent(a, b, kTol);
  REQUIRE(witness.has_value());
  CHECK(superposition_residual(a, b, witness->permutation) < kTol.epsilon);

  spec.seed = 6;
  const PointCloud c = random_cloud(spec);
  std::vector<int> identity = {0, 1, 2, 3, 4, 5};
  CHECK(superposition_residual(a, c, identity) > 100 * kTol.epsilon);
}

TEST_CASE("tolerance bounds are validated") {
  const PointCloud c = cloud_of({{0, 0, 0}, {1, 0, 0}});
  CHECK_THROWS_AS(distance_matrix(c, Tolerance{-1.0}), Error);
  CHECK_THROWS_AS(distance_matrix(c, Tolerance{0.0}), Error);
  CHECK_THROWS_AS(distance_matrix(c, Tolerance{1e-12}), Error);
  CHECK_NOTHROW(distance_matrix(c, Tolerance{1e-4}));
}
