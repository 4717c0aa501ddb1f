#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "wl3d/generate.hpp"
#include "wl3d/reconstruct.hpp"

using namespace wl3d;

namespace {

const Tolerance kTol;
const Variant k3FWL{3, Flavor::FWL};

PointCloud cloud_of(std::initializer_list<Vec3> pts) {
  PointCloud c;
  c.points = pts;
  return c;
}

PointCloud regular_tetrahedron() {
  return cloud_of({{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}});
}

// 3-4-5 base triangle plus externals, used for the common-edge oracle.
PointCloud right_triangle_cloud(int externals) {
  PointCloud c = cloud_of({{0, 0, 0}, {3, 0, 0}, {0, 4, 0}});
  const Vec3 extra[] = {{1.0, 1.25, 2.0}, {2.25, 2.5, -1.5}, {0.5, 3.0, 1.0}};
  for (int i = 0; i < externals; ++i) c.points.push_back(extra[i]);
  return c;
}

}  // namespace

TEST_CASE("select_root prefers scalene non-degenerate classes") {
  FamilySpec spec;
  spec.n = 6;
  spec.seed = 51;
  const Transcript t = refine_to_stable(random_cloud(spec), k3FWL, kTol);
  const RootSelection root = select_root(t);
  CHECK(root.scalene);
  REQUIRE(root.base_signature.size() == 3);
  for (Tick v : root.base_signature) CHECK(v > 0);

  const Transcript tet = refine_to_stable(regular_tetrahedron(), k3FWL, kTol);
  const RootSelection tet_root = select_root(tet);
  CHECK(!tet_root.scalene);
  CHECK(tet_root.base_signature[0] == tet_root.base_signature[2]);

  const Transcript tiny = refine_to_stable(cloud_of({{0, 0, 0}, {1, 0, 0}}), k3FWL, kTol);
  CHECK_THROWS_WITH_AS(select_root(tiny), doctest::Contains("NoNonDegenerateTuple"), Error);
}

TEST_CASE("identify_common_edges recovers the 3-4-5 base edges") {
  // Build the cloud, refine, and read the tree: the slot replacing the right
  // angle vertex must report the hypotenuse-free edge of length 4... the CE
  // values are exactly the base edge ticks in slot order (bc, ac, ab).
  const PointCloud c = right_triangle_cloud(1);
  const Transcript t = refine_to_stable(c, k3FWL, kTol);
  // Locate the (0,1,2) tuple's class: signature (3,4,5)/5 in ticks.
  const WLTree tree = unroll_tree(t, {0, 1, 2}, 1);
  const auto ce = identify_common_edges(tree);
  // diameter is 5, so ticks are d/5 * 1e6.
  CHECK(ce[0].ce_length == 1000000);  // d(b,c) = 5
  CHECK(ce[1].ce_length == 800000);   // d(a,c) = 4
  CHECK(ce[2].ce_length == 600000);   // d(a,b) = 3
  std::vector<Tick> got = {ce[0].ce_length, ce[1].ce_length, ce[2].ce_length};
  std::sort(got.begin(), got.end());
  CHECK(got == tree.root.init_sig);
}

TEST_CASE("identify_common_edges: equilateral base gives three equal edges") {
  PointCloud c = cloud_of({{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}, {0.5, 0.3, 0.9}});
  const Transcript t = refine_to_stable(c, k3FWL, kTol);
  const WLTree tree = unroll_tree(t, {0, 1, 2}, 1);
  const auto ce = identify_common_edges(tree);
  CHECK(ce[0].ce_length == ce[1].ce_length);
  CHECK(ce[1].ce_length == ce[2].ce_length);
}

TEST_CASE("a tampered transcript raises MalformedTranscript") {
  const PointCloud c = right_triangle_cloud(2);
  Transcript t = refine_to_stable(c, k3FWL, kTol);
  // Damage one collapsed-pair signature in the init table.
  for (auto& sig : t.init_table)
    if (sig.size() == 3 && sig[0] == 0 && sig[1] > 0 && sig[1] == sig[2]) {
      sig[2] += 7;
      break;
    }
  CHECK_THROWS_WITH_AS(reconstruct(t, kTol), doctest::Contains("MalformedTranscript"), Error);
}

TEST_CASE("extract_new_edges: external slot pairs drop the common edge") {
  const PointCloud c = right_triangle_cloud(1);
  const DistanceMatrix d = distance_matrix(c, kTol);
  const Transcript t = refine_to_stable(c, k3FWL, kTol);
  const WLTree tree = unroll_tree(t, {0, 1, 2}, 1);
  const auto ce = identify_common_edges(tree);
  const NeighborFaces faces = extract_new_edges(tree, ce);
  REQUIRE(faces.externals.size() == 1);
  const auto& pairs = faces.externals[0].ne_pairs;
  // Slot 1 leaves {d(j,b), d(j,c)}, slot 2 {d(j,a), d(j,c)}, slot 3 {d(j,a), d(j,b)}.
  const Tick ja = d.at(3, 0), jb = d.at(3, 1), jc = d.at(3, 2);
  const auto sorted2 = [](Tick x, Tick y) {
    return std::array<Tick, 2>{std::min(x, y), std::max(x, y)};
  };
  CHECK(pairs[0] == sorted2(jb, jc));
  CHECK(pairs[1] == sorted2(ja, jc));
  CHECK(pairs[2] == sorted2(ja, jb));
}

TEST_CASE("classify_ne_case covers the three lawful shapes and rejects others") {
  CHECK(classify_ne_case({{{1, 2}, {1, 3}, {2, 3}}}) == 1);
  CHECK(classify_ne_case({{{1, 1}, {1, 2}, {1, 2}}}) == 2);
  CHECK(classify_ne_case({{{1, 1}, {1, 1}, {1, 1}}}) == 3);
  CHECK_THROWS_WITH_AS(classify_ne_case({{{1, 2}, {3, 4}, {5, 6}}}),
                       doctest::Contains("ImpossibleHistogram"), Error);
  CHECK_THROWS_WITH_AS(classify_ne_case({{{1, 1}, {1, 1}, {1, 2}}}),
                       doctest::Contains("ImpossibleHistogram"), Error);
}

TEST_CASE("resolve_apex_distances: unique assignment in the scalene case") {
  NeighborFacesEntry entry;
  entry.ne_pairs = {{{2, 3}, {1, 3}, {1, 2}}};
  const ApexDistances apex = resolve_apex_distances(entry);
  CHECK(apex == ApexDistances{1, 2, 3});
}

TEST_CASE("resolve_apex_distances: all-equal case returns the constant triple") {
  NeighborFacesEntry entry;
  entry.ne_pairs = {{{7, 7}, {7, 7}, {7, 7}}};
  CHECK(resolve_apex_distances(entry) == ApexDistances{7, 7, 7});
}

TEST_CASE("resolve_apex_distances: case-2 alternatives embed congruently") {
  // Pairs {q,p},{q,p},{q,q} admit (q,q,p)-style assignments; both survive
  // and give congruent local tetrahedra over an equilateral base.
  NeighborFacesEntry entry;
  const Tick q = 800000, p = 700000;
  entry.ne_pairs = {{{std::min(q, p), std::max(q, p)},
                     {std::min(q, p), std::max(q, p)},
                     {q, q}}};
  const ApexDistances first = resolve_apex_distances(entry);
  // Enumerate both by brute force over assignments.
  std::vector<ApexDistances> all;
  for (Tick ra : {q, p})
    for (Tick rb : {q, p})
      for (Tick rc : {q, p}) {
        const auto s2 = [](Tick x, Tick y) {
          return std::array<Tick, 2>{std::min(x, y), std::max(x, y)};
        };
        if (s2(rb, rc) == entry.ne_pairs[0] && s2(ra, rc) == entry.ne_pairs[1] &&
            s2(ra, rb) == entry.ne_pairs[2])
          if (std::find(all.begin(), all.end(), ApexDistances{ra, rb, rc}) == all.end())
            all.push_back({ra, rb, rc});
      }
  REQUIRE(!all.empty());
  CHECK(std::find(all.begin(), all.end(), first) != all.end());

  // Both assignments must produce congruent 4-point configurations.
  const std::array<Vec3, 3> face = {Vec3(0, 0, 0), Vec3(0.9, 0, 0),
                                    Vec3(0.45, 0.9 * std::sqrt(3.0) / 2.0, 0)};
  std::vector<PointCloud> local;
  for (const ApexDistances& apex : all) {
    const auto sols = trilaterate(face[0], face[1], face[2],
                                  apex.r_a * kTol.epsilon, apex.r_b * kTol.epsilon,
                                  apex.r_c * kTol.epsilon, kTol);
    REQUIRE(!sols.empty());
    PointCloud c;
    c.points = {face[0], face[1], face[2], sols[0]};
    local.push_back(c);
  }
  for (std::size_t i = 1; i < local.size(); ++i)
    CHECK(congruent(local[0], local[i], kTol).has_value());
}

TEST_CASE("candidate_points: n=4 leaves an empty candidate set") {
  const std::array<Vec3, 3> face = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.2, 0.9, 0)};
  const std::vector<ApexDistances> externals = {{700000, 800000, 750000}};
  const CandidatePointSet cp = candidate_points(face, externals, 0, kTol);
  CHECK(cp.candidates.empty());
  CHECK(cp.cardinality() == 0);
}

TEST_CASE("candidate_points: n=5 generic face yields one mirror pair") {
  FamilySpec spec;
  spec.n = 5;
  spec.seed = 61;
  const PointCloud c = random_cloud(spec);
  const DistanceMatrix d = distance_matrix(c, kTol);
  const auto pts = detail::normalized_copy(c);
  const std::array<Vec3, 3> face = {pts[0], pts[1], pts[2]};
  std::vector<ApexDistances> externals;
  for (int j = 3; j < 5; ++j) externals.push_back({d.at(j, 0), d.at(j, 1), d.at(j, 2)});
  const CandidatePointSet cp = candidate_points(face, externals, 0, kTol);
  REQUIRE(cp.candidates.size() == 1);
  CHECK(!cp.candidates[0].merged);
  CHECK(cp.cardinality() == 2);  // 2(n-4) with n = 5
}

TEST_CASE("candidate_points merges an exactly coplanar external") {
  const std::array<Vec3, 3> face = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.3, 0.8, 0)};
  const Vec3 in_plane(0.7, 0.4, 0.0);
  const auto tick = [](double v) { return static_cast<Tick>(std::llround(v / kTol.epsilon)); };
  const std::vector<ApexDistances> externals = {
      {tick(in_plane.norm()), tick((in_plane - face[1]).norm()),
       tick((in_plane - face[2]).norm())},
      {900000, 850000, 870000}};
  const CandidatePointSet cp = candidate_points(face, externals, 1, kTol);
  REQUIRE(cp.candidates.size() == 1);
  CHECK(cp.candidates[0].merged);
  CHECK(cp.cardinality() == 1);
}

TEST_CASE("intersect_cps: hand-built sets delete unsupported members") {
  // One mirror pair in cp1; only the upper member appears in all other sets.
  CandidatePointSet cp1, cp2, cp3, cp4;
  CandidateInfo pair;
  pair.upper = Vec3(0.3, 0.4, 0.5);
  pair.lower = Vec3(0.3, 0.4, -0.5);
  pair.apex = {1, 2, 3};
  pair.entry = 0;
  cp1.candidates.push_back(pair);

  CandidateInfo seen;
  seen.upper = pair.upper + Vec3(1e-5, 0, 0);  // within the match window
  seen.lower = Vec3(9, 9, 9);
  seen.apex = {4, 5, 6};
  for (CandidatePointSet* cp : {&cp2, &cp3, &cp4}) cp->candidates.push_back(seen);

  const auto resolved = intersect_cps(cp1, cp2, cp3, cp4, kTol);
  REQUIRE(resolved.size() == 1);
  CHECK((resolved[0] - pair.upper).norm() < 1e-4);

  // Remove the supporting candidate from cp3: the node is lost entirely.
  cp3.candidates[0].upper = Vec3(5, 5, 5);
  cp3.candidates[0].lower = Vec3(6, 6, 6);
  CHECK_THROWS_WITH_AS(intersect_cps(cp1, cp2, cp3, cp4, kTol),
                       doctest::Contains("CountMismatch"), Error);
}

TEST_CASE("intersect_cps: a fully surviving lone mirror pair is ambiguous") {
  CandidatePointSet cp1, cp2, cp3, cp4;
  CandidateInfo pair;
  pair.upper = Vec3(0.3, 0.4, 0.5);
  pair.lower = Vec3(0.3, 0.4, -0.5);
  pair.apex = {1, 2, 3};
  cp1.candidates.push_back(pair);
  for (CandidatePointSet* cp : {&cp2, &cp3, &cp4}) {
    CandidateInfo both = pair;
    both.apex = {4, 5, 6};
    cp->candidates.push_back(both);
  }
  CHECK_THROWS_WITH_AS(intersect_cps(cp1, cp2, cp3, cp4, kTol),
                       doctest::Contains("AmbiguousNode"), Error);
}

TEST_CASE("intersect_cps: n=4 resolves vacuously") {
  CandidatePointSet empty;
  CHECK(intersect_cps(empty, empty, empty, empty, kTol).empty());
}

TEST_CASE("reconstruct: regular tetrahedron round-trips") {
  const PointCloud c = regular_tetrahedron();
  const Transcript t = refine_to_stable(c, k3FWL, kTol);
  const Reconstruction rec = reconstruct(t, kTol);
  CHECK(rec.certificate.fingerprint_match);
  CHECK(congruent(c, rec.cloud, kTol).has_value());
}

TEST_CASE("reconstruct: n=3 triangle rebuilt from the root signature") {
  const PointCloud c = cloud_of({{0, 0, 0}, {3, 0, 0}, {0.7, 2.2, 0}});
  const Transcript t = refine_to_stable(c, k3FWL, kTol);
  const Reconstruction rec = reconstruct(t, kTol);
  CHECK(rec.certificate.fingerprint_match);
  CHECK(congruent(c, rec.cloud, kTol).has_value());
}

TEST_CASE("reconstruct: n=1 and n=2 base cases") {
  const Transcript t1 = refine_to_stable(cloud_of({{2, 3, 4}}), k3FWL, kTol);
  CHECK(reconstruct(t1, kTol).cloud.n() == 1);
  const Transcript t2 = refine_to_stable(cloud_of({{0, 0, 0}, {0, 2, 0}}), k3FWL, kTol);
  const Reconstruction r2 = reconstruct(t2, kTol);
  CHECK(r2.certificate.fingerprint_match);
  CHECK(r2.cloud.n() == 2);
}

TEST_CASE("reconstruct: random clouds round-trip with matching certificates") {
  for (std::uint64_t s = 0; s < 40; ++s) {
    FamilySpec spec;
    spec.n = 4 + static_cast<int>(s % 6);
    spec.seed = 7000 + s;
    const PointCloud c = random_cloud(spec);
    const Transcript t = refine_to_stable(c, k3FWL, kTol);
    const Reconstruction rec = reconstruct(t, kTol);
    CHECK(rec.certificate.fingerprint_match);
    CHECK(congruent(c, rec.cloud, kTol).has_value());
  }
}

TEST_CASE("reconstruct: anchor choice does not change the congruence class") {
  FamilySpec spec;
  spec.n = 7;
  spec.seed = 71;
  const PointCloud c = random_cloud(spec);
  const Transcript t = refine_to_stable(c, k3FWL, kTol);
  std::vector<PointCloud> rebuilt;
  for (int anchor = 0; anchor < 3; ++anchor) {
    ReconstructOptions opt;
    opt.force_anchor = anchor;
    const Reconstruction rec = reconstruct(t, kTol, opt);
    CHECK(rec.certificate.fingerprint_match);
    rebuilt.push_back(rec.cloud);
  }
  for (std::size_t i = 1; i < rebuilt.size(); ++i)
    CHECK(congruent(rebuilt[0], rebuilt[i], kTol).has_value());
}

TEST_CASE("reconstruct: planar clouds take the planar path") {
  for (std::uint64_t s = 0; s < 8; ++s) {
    const PointCloud c = symmetric_cloud(SymmetricTemplate::Planar, 6, s);
    const Transcript t = refine_to_stable(c, k3FWL, kTol);
    const Reconstruction rec = reconstruct(t, kTol);
    CHECK(rec.certificate.fingerprint_match);
    CHECK(rec.certificate.planar);
    CHECK(congruent(c, rec.cloud, kTol).has_value());
  }
}

TEST_CASE("reconstruct: mirror-pair and pyramid templates survive the symmetric paths") {
  for (std::uint64_t s = 0; s < 6; ++s) {
    for (const SymmetricTemplate tmpl :
         {SymmetricTemplate::MirrorPair, SymmetricTemplate::SquarePyramid,
          SymmetricTemplate::Prism}) {
      const int n = tmpl == SymmetricTemplate::Prism ? 6 : 6;
      const PointCloud c = symmetric_cloud(tmpl, n, s);
      const Transcript t = refine_to_stable(c, k3FWL, kTol);
      const Reconstruction rec = reconstruct(t, kTol);
      CHECK(rec.certificate.fingerprint_match);
      CHECK(congruent(c, rec.cloud, kTol).has_value());
    }
  }
}

TEST_CASE("reconstruct refuses non-(3,FWL) transcripts and oversized inputs") {
  FamilySpec spec;
  spec.n = 5;
  spec.seed = 3;
  const PointCloud c = random_cloud(spec);
  const Transcript t = refine_to_stable(c, Variant{3, Flavor::WL}, kTol);
  CHECK_THROWS_WITH_AS(reconstruct(t, kTol), doctest::Contains("MalformedTranscript"), Error);
}

TEST_CASE("turn-over soundness: every case-2/3 apex alternative embeds congruently") {
  // Scan symmetric clouds for case-2 and case-3 externals and verify that
  // every consistent apex assignment yields a congruent local tetrahedron.
  int case23_checked = 0;
  for (std::uint64_t s = 0; s < 8; ++s) {
    for (const SymmetricTemplate tmpl :
         {SymmetricTemplate::SquarePyramid, SymmetricTemplate::Prism}) {
      const PointCloud cloud = symmetric_cloud(tmpl, 6, s);
      const Transcript t = refine_to_stable(cloud, k3FWL, kTol);
      const RootSelection root = select_root(t);
      std::vector<int> tuple;
      for (int a = 0; a < t.n && tuple.empty(); ++a)
        for (int b = 0; b < t.n && tuple.empty(); ++b)
          for (int c = 0; c < t.n && tuple.empty(); ++c) {
            if (a == b || b == c || a == c) continue;
            if (t.coloring[t.rounds][tuple_index({a, b, c}, t.n)] == root.color)
              tuple = {a, b, c};
          }
      const WLTree tree = unroll_tree(t, tuple, 1);
      const auto ce = identify_common_edges(tree);
      const NeighborFaces faces = extract_new_edges(tree, ce);

      const double eps = kTol.epsilon;
      const double lab = static_cast<double>(ce[2].ce_length) * eps;
      const double lac = static_cast<double>(ce[1].ce_length) * eps;
      const double lbc = static_cast<double>(ce[0].ce_length) * eps;
      const double cx = (lab * lab + lac * lac - lbc * lbc) / (2.0 * lab);
      const double cy = std::sqrt(std::max(lac * lac - cx * cx, 0.0));
      const std::array<Vec3, 3> face = {Vec3(0, 0, 0), Vec3(lab, 0, 0), Vec3(cx, cy, 0)};

      for (const NeighborFacesEntry& entry : faces.externals) {
        if (classify_ne_case(entry.ne_pairs) == 1) continue;
        // Enumerate all consistent assignments by brute force.
        std::vector<ApexDistances> all;
        const auto& p = entry.ne_pairs;
        for (int o1 = 0; o1 < 2; ++o1)
          for (int o2 = 0; o2 < 2; ++o2)
            for (int o3 = 0; o3 < 2; ++o3) {
              const Tick rb = p[0][o1], rc = p[0][1 - o1];
              const Tick ra = p[1][o2], rc2 = p[1][1 - o2];
              const Tick ra2 = p[2][o3], rb2 = p[2][1 - o3];
              if (rc2 != rc || ra2 != ra || rb2 != rb) continue;
              if (std::find(all.begin(), all.end(), ApexDistances{ra, rb, rc}) == all.end())
                all.push_back({ra, rb, rc});
            }
        REQUIRE(!all.empty());
        std::vector<PointCloud> local;
        for (const ApexDistances& apex : all) {
          const auto sols =
              trilaterate(face[0], face[1], face[2], apex.r_a * eps, apex.r_b * eps,
                          apex.r_c * eps, kTol);
          if (sols.empty()) continue;
          PointCloud c4;
          c4.points = {face[0], face[1], face[2], sols[0]};
          local.push_back(c4);
        }
        REQUIRE(!local.empty());
        for (std::size_t i = 1; i < local.size(); ++i)
          CHECK(congruent(local[0], local[i], kTol).has_value());
        ++case23_checked;
      }
    }
  }
  CHECK(case23_checked > 0);
}
