#include "wl3d/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include <nlohmann/json.hpp>

namespace wl3d {

namespace {

// Quantized radii perturb the squared apex height by at most about
// 2 eps scale^2 (1 + 4 scale / height), measured over random and planar
// clouds with a 3x margin: the thinner the base triangle the noisier the
// normal component. Everything downstream (mirror merging, in-plane
// acceptance, cross-face matching) scales with the square root of this.
double z2_noise_bound(const detail::TriParts& parts, double eps) {
  return 2.0 * eps * parts.scale * parts.scale *
         (1.0 + 4.0 * parts.scale / std::max(parts.height_min, 1e-9));
}

double effective_uncertainty(double u, double eps) { return std::max(u, 32.0 * eps); }

double pair_window(double ua, double ub, double eps) {
  return 0.8 * (effective_uncertainty(ua, eps) + effective_uncertainty(ub, eps)) + 64.0 * eps;
}

double merged_window(double ua, double ub, double eps) {
  return 1.7 * (effective_uncertainty(ua, eps) + effective_uncertainty(ub, eps)) + 64.0 * eps;
}

constexpr Tick kTickReadWindow = 2000;

bool contains_zero(const std::vector<Tick>& sig) {
  return std::find(sig.begin(), sig.end(), 0) != sig.end();
}

// The collapsed-pair pattern (0, L, L): the replaced slot landed on one of
// the other two base nodes, and L is the edge those two base nodes share.
bool is_collapsed_pair(const std::vector<Tick>& sig) {
  return sig.size() == 3 && sig[0] == 0 && sig[1] > 0 && sig[1] == sig[2];
}

bool remove_once(std::vector<Tick>& values, Tick v) {
  const auto it = std::find(values.begin(), values.end(), v);
  if (it == values.end()) return false;
  values.erase(it);
  return true;
}

// All apex assignments consistent with the slot-sharing constraints,
// deterministically ordered. Cases 2 and 3 admit several; the caller takes
// the first (the alternatives are congruent).
std::vector<ApexDistances> apex_assignments(const std::array<std::array<Tick, 2>, 3>& p) {
  std::vector<ApexDistances> found;
  for (int o1 = 0; o1 < 2; ++o1)
    for (int o2 = 0; o2 < 2; ++o2)
      for (int o3 = 0; o3 < 2; ++o3) {
        const Tick rb = p[0][o1], rc = p[0][1 - o1];
        const Tick ra = p[1][o2], rc2 = p[1][1 - o2];
        const Tick ra2 = p[2][o3], rb2 = p[2][1 - o3];
        if (rc2 != rc || ra2 != ra || rb2 != rb) continue;
        const ApexDistances a{ra, rb, rc};
        if (std::find(found.begin(), found.end(), a) == found.end()) found.push_back(a);
      }
  std::sort(found.begin(), found.end(), [](const ApexDistances& x, const ApexDistances& y) {
    return std::tie(x.r_a, x.r_b, x.r_c) < std::tie(y.r_a, y.r_b, y.r_c);
  });
  return found;
}


// Smallest altitude of the triangle described by a sorted signature, in
// ticks. Sliver root bases are numerically hopeless and go to the back of
// the ladder; what matters is the altitude relative to the cloud diameter.
double base_min_altitude(const std::vector<Tick>& sig) {
  const double d1 = static_cast<double>(sig[0]);
  const double d2 = static_cast<double>(sig[1]);
  const double d3 = static_cast<double>(sig[2]);
  const double s = 0.5 * (d1 + d2 + d3);
  const double area2 = s * (s - d1) * (s - d2) * (s - d3);
  if (!(area2 > 0.0)) return 0.0;
  return 2.0 * std::sqrt(area2) / d3;
}

struct ParsedExternal {
  NeighborFacesEntry entry;
  int ne_case = 0;
  ApexDistances apex;
  int apex_alternatives = 1;
  bool ce_collision = false;
};

struct ParsedFace {
  std::array<Tick, 3> ce{};  // (d(b,c), d(a,c), d(a,b)) in slot order
  std::vector<ParsedExternal> externals;
};

struct Level1Entry {
  std::array<ColorId, 3> colors{};
  std::array<std::vector<Tick>, 3> sigs;
};

std::vector<Level1Entry> level1_entries(const Transcript& t, int round, ColorId color) {
  if (round < 1 || round > t.rounds || color < 0 ||
      color >= static_cast<ColorId>(t.rules[round].size()))
    throw Error(ErrorCode::MalformedTranscript, "rule lookup out of range");
  const Rule& rule = t.rules[round][color];
  if (rule.nbrs.size() != static_cast<std::size_t>(t.n) * 3)
    throw Error(ErrorCode::MalformedTranscript, "joint-triple list has wrong size");
  std::vector<Level1Entry> entries(t.n);
  for (int g = 0; g < t.n; ++g)
    for (int s = 0; s < 3; ++s) {
      entries[g].colors[s] = rule.nbrs[3 * g + s];
      entries[g].sigs[s] = init_signature_of(t, round - 1, entries[g].colors[s]);
    }
  return entries;
}

std::array<Tick, 3> common_edges_core(const std::vector<Level1Entry>& entries) {
  std::array<Tick, 3> ce{};
  for (int slot = 0; slot < 3; ++slot) {
    int count = 0;
    Tick length = -1;
    for (const Level1Entry& e : entries) {
      if (!is_collapsed_pair(e.sigs[slot])) continue;
      ++count;
      if (length == -1) length = e.sigs[slot][1];
      else if (length != e.sigs[slot][1])
        throw Error(ErrorCode::MalformedTranscript,
                    "slot " + std::to_string(slot + 1) + " collapsed pairs disagree");
    }
    if (count != 2)
      throw Error(ErrorCode::MalformedTranscript,
                  "slot " + std::to_string(slot + 1) + " has " + std::to_string(count) +
                      " collapsed-pair entries, expected 2");
    ce[slot] = length;
  }
  return ce;
}

ParsedExternal parse_external(const Level1Entry& entry, const std::array<Tick, 3>& ce) {
  ParsedExternal out;
  out.entry.component_colors = entry.colors;
  for (int slot = 0; slot < 3; ++slot) {
    std::vector<Tick> sig = entry.sigs[slot];
    if (sig.size() != 3)
      throw Error(ErrorCode::MalformedTranscript, "initial signature is not a triple");
    if (std::count(sig.begin(), sig.end(), ce[slot]) > 1) out.ce_collision = true;
    if (!remove_once(sig, ce[slot]))
      throw Error(ErrorCode::CEAbsentFromSignature,
                  "slot " + std::to_string(slot + 1) +
                      " signature lacks the common edge length " + std::to_string(ce[slot]));
    std::sort(sig.begin(), sig.end());
    out.entry.ne_pairs[slot] = {sig[0], sig[1]};
  }
  out.ne_case = classify_ne_case(out.entry.ne_pairs);
  const std::vector<ApexDistances> found = apex_assignments(out.entry.ne_pairs);
  if (found.empty())
    throw Error(ErrorCode::InconsistentPairs, "no apex assignment satisfies the slot sharing");
  out.apex = found.front();
  out.apex_alternatives = static_cast<int>(found.size());
  return out;
}

ParsedFace parse_face(const Transcript& t, int round, ColorId color) {
  const std::vector<Level1Entry> entries = level1_entries(t, round, color);
  ParsedFace face;
  face.ce = common_edges_core(entries);

  int base_entries = 0;
  for (const Level1Entry& e : entries) {
    const bool degenerate = contains_zero(e.sigs[0]) || contains_zero(e.sigs[1]) ||
                            contains_zero(e.sigs[2]);
    if (degenerate) {
      ++base_entries;
      continue;
    }
    face.externals.push_back(parse_external(e, face.ce));
  }
  if (base_entries != 3)
    throw Error(ErrorCode::MalformedTranscript,
                "expected 3 base entries, found " + std::to_string(base_entries));
  if (static_cast<int>(face.externals.size()) != t.n - 3)
    throw Error(ErrorCode::MalformedTranscript, "external entry count does not match n - 3");
  return face;
}

struct Frame {
  Vec3 a, b, c;
  double lab, lac, lbc;
};

Frame lay_base(const std::array<Tick, 3>& ce, double eps) {
  Frame f;
  f.lbc = static_cast<double>(ce[0]) * eps;
  f.lac = static_cast<double>(ce[1]) * eps;
  f.lab = static_cast<double>(ce[2]) * eps;
  f.a = Vec3::Zero();
  f.b = Vec3(f.lab, 0, 0);
  const double cx = (f.lab * f.lab + f.lac * f.lac - f.lbc * f.lbc) / (2.0 * f.lab);
  const double cy2 = f.lac * f.lac - cx * cx;
  const double scale = std::max({f.lab, f.lac, f.lbc});
  if (cy2 < 16.0 * eps * eps * scale * scale)
    throw Error(ErrorCode::CollinearBase, "root triangle is degenerate");
  f.c = Vec3(cx, std::sqrt(cy2), 0);
  return f;
}

double apex_height_sq(const Frame& f, const ApexDistances& apex, double eps) {
  const double ra = static_cast<double>(apex.r_a) * eps;
  const double rb = static_cast<double>(apex.r_b) * eps;
  const double rc = static_cast<double>(apex.r_c) * eps;
  const double x = (ra * ra - rb * rb + f.lab * f.lab) / (2.0 * f.lab);
  const double cx = f.c.x(), cy = f.c.y();
  const double y = (ra * ra - rc * rc + cx * cx + cy * cy - 2.0 * cx * x) / (2.0 * cy);
  return ra * ra - x * x - y * y;
}

// Searches a side face's candidates for one that is tick-compatible and
// positionally close to `p`; consumed candidates are skipped.
int find_support(const Vec3& p, bool p_merged, double p_uncertainty,
                 const CandidatePointSet& cp, const std::vector<int>& compatible,
                 const std::vector<char>& used, double eps) {
  for (const int idx : compatible) {
    if (used[idx]) continue;
    const CandidateInfo& cand = cp.candidates[idx];
    const double w = (p_merged || cand.merged)
                         ? merged_window(p_uncertainty, cp.uncertainty, eps)
                         : pair_window(p_uncertainty, cp.uncertainty, eps);
    if ((p - cand.upper).norm() < w || (p - cand.lower).norm() < w) return idx;
  }
  return -1;
}

// Reads d(u, w) in ticks from the depth-2 expansion of (u, b, c): the child
// entry for node w carries (u, w, c) and (u, b, w), whose signatures contain
// the sought edge next to already-known ones.
Tick tick_between(const Transcript& t, int round, ColorId u_face_color,
                  const ApexDistances& u, const ApexDistances& w, Tick d_bc, double estimate,
                  std::vector<std::string>* notes) {
  const std::vector<Level1Entry> children = level1_entries(t, round, u_face_color);
  std::vector<Tick> target = {w.r_b, w.r_c, d_bc};
  std::sort(target.begin(), target.end());

  std::vector<Tick> candidates;
  for (const Level1Entry& child : children) {
    if (child.sigs[0] != target) continue;
    std::vector<Tick> mid = child.sigs[1];  // (u, w, c): {d(u,w), d(w,c), d(u,c)}
    if (!remove_once(mid, w.r_c) || !remove_once(mid, u.r_c)) continue;
    std::vector<Tick> last = child.sigs[2];  // (u, b, w): {d(u,w), d(u,b), d(w,b)}
    if (!remove_once(last, u.r_b) || !remove_once(last, w.r_b)) continue;
    if (mid.size() != 1 || last.size() != 1 || mid[0] != last[0]) continue;
    candidates.push_back(mid[0]);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  Tick best = -1;
  double best_gap = 1e18;
  for (const Tick c : candidates) {
    const double gap = std::abs(static_cast<double>(c) - estimate);
    if (gap < best_gap) {
      best_gap = gap;
      best = c;
    }
  }
  if (best < 0 || best_gap > kTickReadWindow)
    throw Error(ErrorCode::MalformedTranscript,
                "no consistent edge length found in the depth-2 expansion");
  if (candidates.size() > 1 && notes)
    notes->push_back("edge read had " + std::to_string(candidates.size()) +
                     " candidates; picked the one nearest the position estimate");
  return best;
}

struct PipelineResult {
  PointCloud cloud;
  ReconstructionCertificate certificate;
};

// One attempt at the full pipeline for a fixed root class and anchor rank.
PipelineResult run_pipeline(const Transcript& t, const Tolerance& tol, ColorId root_color,
                            int anchor_rank) {
  const double eps = tol.epsilon;
  const int n = t.n;
  const int top = t.rounds;
  PipelineResult result;
  ReconstructionCertificate& cert = result.certificate;

  const ParsedFace root = parse_face(t, top, root_color);
  {
    std::vector<Tick> sorted_ce(root.ce.begin(), root.ce.end());
    std::sort(sorted_ce.begin(), sorted_ce.end());
    if (sorted_ce != init_signature_of(t, top, root_color))
      throw Error(ErrorCode::MalformedTranscript,
                  "common edges disagree with the root signature");
  }
  const Frame frame = lay_base(root.ce, eps);

  for (const ParsedExternal& e : root.externals) {
    ++cert.case_histogram[e.ne_case - 1];
    if (e.ce_collision)
      cert.collision_notes.push_back("common-edge length repeats inside a slot signature");
  }

  // Deterministic anchor ladder: most off-plane external first.
  std::vector<int> ladder(root.externals.size());
  for (std::size_t i = 0; i < ladder.size(); ++i) ladder[i] = static_cast<int>(i);
  std::vector<double> height(root.externals.size());
  for (std::size_t i = 0; i < height.size(); ++i)
    height[i] = apex_height_sq(frame, root.externals[i].apex, eps);
  std::stable_sort(ladder.begin(), ladder.end(),
                   [&](int x, int y) { return height[x] > height[y]; });
  if (anchor_rank >= static_cast<int>(ladder.size()))
    throw Error(ErrorCode::UnrealizableExternal, "anchor ladder exhausted");
  const int anchor_entry = ladder[anchor_rank];
  cert.anchor_entry = anchor_entry;

  const std::array<Vec3, 3> base_face = {frame.a, frame.b, frame.c};
  std::vector<ApexDistances> root_apexes;
  for (const ParsedExternal& e : root.externals) root_apexes.push_back(e.apex);

  const ApexDistances m_apex = root.externals[anchor_entry].apex;
  const detail::TriParts m_parts = detail::trilaterate_parts(
      frame.a, frame.b, frame.c, static_cast<double>(m_apex.r_a) * eps,
      static_cast<double>(m_apex.r_b) * eps, static_cast<double>(m_apex.r_c) * eps, tol);
  const double m_noise = z2_noise_bound(m_parts, eps);
  if (m_parts.z2 < -m_noise)
    throw Error(ErrorCode::UnrealizableExternal, "anchor cannot be trilaterated");
  const double m_z = std::sqrt(std::max(m_parts.z2, 0.0));
  const bool planar_anchor = 2.0 * m_z < 2.2 * std::sqrt(m_noise);

  std::vector<Vec3> positions = {frame.a, frame.b, frame.c};
  std::vector<ApexDistances> node_apex = {{0, root.ce[2], root.ce[1]},
                                          {root.ce[2], 0, root.ce[0]},
                                          {root.ce[1], root.ce[0], 0}};
  std::vector<int> node_entry = {-1, -1, -1};
  std::vector<Tick> node_to_anchor;  // ticks to m for nodes 4.., non-planar path

  if (planar_anchor) {
    // The most off-plane external already merges into the base plane, so the
    // whole cloud is planar: single in-plane positions, no mirror logic.
    cert.planar = true;
    const CandidatePointSet cp = candidate_points(base_face, root_apexes, anchor_entry, tol);
    cert.cp_cardinalities[0] = cp.cardinality();
    positions.push_back(m_parts.base);
    node_apex.push_back(m_apex);
    node_entry.push_back(anchor_entry);
    for (const CandidateInfo& cand : cp.candidates) {
      if (!cand.merged)
        throw Error(ErrorCode::UnrealizableExternal,
                    "non-planar external under a planar anchor");
      positions.push_back(cand.upper);
      node_apex.push_back(cand.apex);
      node_entry.push_back(cand.entry);
    }
    // A flat start leaves the normal direction with zero gradient in the
    // final snap; deterministic sub-uncertainty nudges unlock it. Truly
    // planar targets just get flattened back.
    const double nudge = 0.5 * effective_uncertainty(cp.uncertainty, eps);
    for (std::size_t i = 3; i < positions.size(); ++i) {
      const double frac =
          static_cast<double>((i * 2654435761u) % 1024u) / 1024.0 - 0.5;
      positions[i].z() += nudge * frac;
    }
  } else {
    const Vec3 m_pos = m_parts.base + m_z * m_parts.ez;  // positive side
    positions.push_back(m_pos);
    node_apex.push_back(m_apex);
    node_entry.push_back(anchor_entry);

    const CandidatePointSet cp1 = candidate_points(base_face, root_apexes, anchor_entry, tol);
    cert.cp_cardinalities[0] = cp1.cardinality();

    if (n > 4) {
      // Side faces (a,b,m), (a,m,c), (m,b,c) come from the anchor's level-1
      // entry; their own level-1 data is the depth-2 layer of the root tree.
      const std::array<ColorId, 3>& mc = root.externals[anchor_entry].entry.component_colors;
      struct SideFace {
        ColorId color;
        std::array<Vec3, 3> corners;
        std::array<Tick, 3> expected_ce;
        ApexDistances known;  // ticks of the already-placed 4th node
      };
      const SideFace faces[3] = {
          // component slot 3 holds (a, b, m); the known 4th node is c
          {mc[2],
           {frame.a, frame.b, m_pos},
           {m_apex.r_b, m_apex.r_a, root.ce[2]},
           {root.ce[1], root.ce[0], m_apex.r_c}},
          // component slot 2 holds (a, m, c); the known 4th node is b
          {mc[1],
           {frame.a, m_pos, frame.c},
           {m_apex.r_c, root.ce[1], m_apex.r_a},
           {root.ce[2], m_apex.r_b, root.ce[0]}},
          // component slot 1 holds (m, b, c); the known 4th node is a
          {mc[0],
           {m_pos, frame.b, frame.c},
           {root.ce[0], m_apex.r_c, m_apex.r_b},
           {m_apex.r_a, root.ce[2], root.ce[1]}},
      };

      std::array<CandidatePointSet, 3> side_cps;
      for (int f = 0; f < 3; ++f) {
        const ParsedFace pf = parse_face(t, top - 1, faces[f].color);
        if (pf.ce != faces[f].expected_ce)
          throw Error(ErrorCode::MalformedTranscript,
                      "side face common edges disagree with the anchor's distances");
        int known_entry = -1;
        for (std::size_t i = 0; i < pf.externals.size(); ++i)
          if (pf.externals[i].apex == faces[f].known) {
            known_entry = static_cast<int>(i);
            break;
          }
        if (known_entry < 0)
          throw Error(ErrorCode::MalformedTranscript,
                      "side face lacks the expected frame-node entry");
        std::vector<ApexDistances> apexes;
        for (const ParsedExternal& e : pf.externals) apexes.push_back(e.apex);
        side_cps[f] = candidate_points(faces[f].corners, apexes, known_entry, tol);
        cert.cp_cardinalities[f + 1] = side_cps[f].cardinality();
      }

      // Per side face, the ticks to the two corners shared with the root
      // base must match a candidate exactly; positions break the mirror.
      std::array<std::vector<char>, 3> used = {
          std::vector<char>(side_cps[0].candidates.size(), 0),
          std::vector<char>(side_cps[1].candidates.size(), 0),
          std::vector<char>(side_cps[2].candidates.size(), 0)};
      std::map<std::tuple<Tick, Tick, Tick>, int> twin_taken;

      for (const CandidateInfo& cand : cp1.candidates) {
        const Tick shared_root[3] = {cand.apex.r_a, cand.apex.r_b, cand.apex.r_c};
        std::array<std::vector<int>, 3> compatible;
        for (int f = 0; f < 3; ++f) {
          for (int idx = 0; idx < static_cast<int>(side_cps[f].candidates.size()); ++idx) {
            const ApexDistances& sa = side_cps[f].candidates[idx].apex;
            const Tick side_vals[3] = {sa.r_a, sa.r_b, sa.r_c};
            int matches = 0;
            for (int s = 0; s < 3; ++s)
              for (int rc = 0; rc < 3; ++rc)
                if ((side_cps[f].face[s] - base_face[rc]).norm() < 1e-12 &&
                    side_vals[s] == shared_root[rc])
                  ++matches;
            if (matches == 2) compatible[f].push_back(idx);
          }
        }

        // A branch is one mirror member with full side-face support, a
        // consistent anchor tick, and a mirror-free position from the
        // linearized sphere system around (a, b, c, m). The position score
        // arbitrates between two live branches: this is the fourth face
        // doing the disambiguation, in algebraic form.
        struct BranchFit {
          bool alive = false;
          std::array<int, 3> support{-1, -1, -1};
          Tick to_m = -1;
          Vec3 member = Vec3::Zero();
          Vec3 refined = Vec3::Zero();
          double score = 1e18;
        };
        const auto probe = [&](const Vec3& member, bool merged_flag) {
          BranchFit br;
          br.member = member;
          for (int f = 0; f < 3; ++f) {
            br.support[f] = find_support(member, merged_flag, cp1.uncertainty, side_cps[f],
                                         compatible[f], used[f], eps);
            if (br.support[f] < 0) return br;
          }
          for (int f = 0; f < 3; ++f) {
            const ApexDistances& sa = side_cps[f].candidates[br.support[f]].apex;
            const Tick side_vals[3] = {sa.r_a, sa.r_b, sa.r_c};
            for (int s = 0; s < 3; ++s)
              if ((side_cps[f].face[s] - m_pos).norm() < 1e-12) {
                if (br.to_m >= 0 && br.to_m != side_vals[s]) return br;
                br.to_m = side_vals[s];
              }
          }
          if (br.to_m < 0) return br;
          br.alive = true;
          br.refined = member;
          br.score = 0.0;
          const double ra = static_cast<double>(cand.apex.r_a) * eps;
          const double radii[3] = {static_cast<double>(cand.apex.r_b) * eps,
                                   static_cast<double>(cand.apex.r_c) * eps,
                                   static_cast<double>(br.to_m) * eps};
          const Vec3 others[3] = {frame.b, frame.c, m_pos};
          Eigen::Matrix3d lhs;
          Eigen::Vector3d rhs;
          for (int row = 0; row < 3; ++row) {
            lhs.row(row) = 2.0 * (others[row] - frame.a).transpose();
            rhs(row) = ra * ra - radii[row] * radii[row] + others[row].squaredNorm() -
                       frame.a.squaredNorm();
          }
          if (std::abs(lhs.determinant()) > 1e-12) {
            br.refined = lhs.colPivHouseholderQr().solve(rhs);
            br.score = (br.refined - member).norm();
          }
          return br;
        };

        const BranchFit up = probe(cand.upper, cand.merged);
        const BranchFit low = cand.merged ? BranchFit{} : probe(cand.lower, cand.merged);

        const BranchFit* pick = nullptr;
        if (cand.merged) {
          if (!up.alive)
            throw Error(ErrorCode::CountMismatch, "merged candidate unsupported by side faces");
          pick = &up;
        } else if (up.alive && low.alive) {
          int twins = 0;
          for (const CandidateInfo& other : cp1.candidates)
            if (other.apex == cand.apex) ++twins;
          if (twins >= 2) {
            // Mirror twins occupy both members; each entry takes the best
            // untaken fit for its own anchor tick.
            int& mask = twin_taken[{cand.apex.r_a, cand.apex.r_b, cand.apex.r_c}];
            const bool up_free = (mask & 1) == 0, low_free = (mask & 2) == 0;
            if (!up_free && !low_free)
              throw Error(ErrorCode::CountMismatch, "more twin entries than mirror members");
            if (up_free && (!low_free || up.score <= low.score)) {
              pick = &up;
              mask |= 1;
            } else {
              pick = &low;
              mask |= 2;
            }
          } else {
            const BranchFit& winner = up.score <= low.score ? up : low;
            const BranchFit& loser = up.score <= low.score ? low : up;
            const double far = 16.0 * merged_window(cp1.uncertainty, cp1.uncertainty, eps);
            if (loser.score < 4.0 * winner.score + 64.0 * eps &&
                (up.member - low.member).norm() > far)
              throw Error(ErrorCode::AmbiguousNode,
                          "a full mirror pair survives all four candidate point sets");
            pick = &winner;
          }
        } else if (up.alive || low.alive) {
          pick = up.alive ? &up : &low;
        } else {
          throw Error(ErrorCode::CountMismatch, "candidate deleted from every side face");
        }

        for (int f = 0; f < 3; ++f) used[f][pick->support[f]] = 1;
        const double accept = 2.0 * merged_window(cp1.uncertainty, cp1.uncertainty, eps);
        positions.push_back(pick->score < accept ? pick->refined : pick->member);
        node_apex.push_back(cand.apex);
        node_entry.push_back(cand.entry);
        node_to_anchor.push_back(pick->to_m);
      }
    }
    if (positions.size() != static_cast<std::size_t>(n))
      throw Error(ErrorCode::CountMismatch, "resolved node count does not equal n - 4");
  }

  // Assemble the full target tick matrix: frame-adjacent entries from the
  // level-1 data, external-external entries from the depth-2 layer.
  std::vector<Tick> target(static_cast<std::size_t>(n) * n, 0);
  const auto set_tick = [&](int i, int j, Tick v) {
    target[static_cast<std::size_t>(i) * n + j] = v;
    target[static_cast<std::size_t>(j) * n + i] = v;
  };
  set_tick(0, 1, root.ce[2]);
  set_tick(0, 2, root.ce[1]);
  set_tick(1, 2, root.ce[0]);
  for (int i = 3; i < n; ++i) {
    set_tick(i, 0, node_apex[i].r_a);
    set_tick(i, 1, node_apex[i].r_b);
    set_tick(i, 2, node_apex[i].r_c);
  }
  if (!cert.planar)
    for (int i = 4; i < n; ++i) set_tick(i, 3, node_to_anchor[i - 4]);

  const int ext_start = cert.planar ? 3 : 4;
  for (int i = ext_start; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const ColorId face_color = root.externals[node_entry[i]].entry.component_colors[0];
      const double estimate = (positions[i] - positions[j]).norm() / eps;
      const Tick value = tick_between(t, top - 1, face_color, node_apex[i], node_apex[j],
                                      root.ce[0], estimate, &cert.collision_notes);
      set_tick(i, j, value);
    }

  if (!detail::polish_to_ticks(positions, target, n, tol))
    throw Error(ErrorCode::CertificateMismatch,
                "output cannot be snapped onto the transcript's tick matrix");

  result.cloud.points = positions;
  return result;
}

PipelineResult reconstruct_small(const Transcript& t, const Tolerance& tol) {
  PipelineResult result;
  const double eps = tol.epsilon;
  if (t.n == 1) {
    result.cloud.points = {Vec3::Zero()};
    return result;
  }
  if (t.n == 2) {
    Tick d = -1;
    for (const auto& sig : t.init_table)
      if (is_collapsed_pair(sig)) d = sig[1];
    if (d <= 0) throw Error(ErrorCode::MalformedTranscript, "no pair signature found");
    result.cloud.points = {Vec3::Zero(), Vec3(static_cast<double>(d) * eps, 0, 0)};
    return result;
  }
  // n == 3: the root signature is the triangle.
  const RootSelection root = select_root(t);
  const std::vector<Tick>& sig = root.base_signature;  // ascending
  const double lab = static_cast<double>(sig[2]) * eps;
  const double lac = static_cast<double>(sig[1]) * eps;
  const double lbc = static_cast<double>(sig[0]) * eps;
  const double cx = (lab * lab + lac * lac - lbc * lbc) / (2.0 * lab);
  const double cy2 = std::max(lac * lac - cx * cx, 0.0);
  result.cloud.points = {Vec3::Zero(), Vec3(lab, 0, 0), Vec3(cx, std::sqrt(cy2), 0)};
  return result;
}

}  // namespace

int CandidatePointSet::cardinality() const {
  int total = 0;
  for (const CandidateInfo& c : candidates) total += c.merged ? 1 : 2;
  return total;
}

RootSelection select_root(const Transcript& t) {
  if (t.variant.k != 3)
    throw Error(ErrorCode::MalformedTranscript, "root selection needs a k = 3 transcript");
  std::vector<RootSelection> eligible;
  const int final_colors = t.color_count(t.rounds);
  for (ColorId c = 0; c < final_colors; ++c) {
    const std::vector<Tick>& sig = init_signature_of(t, t.rounds, c);
    if (contains_zero(sig)) continue;
    RootSelection r;
    r.color = c;
    r.base_signature = sig;
    r.scalene = sig[0] != sig[1] && sig[1] != sig[2];
    eligible.push_back(std::move(r));
  }
  if (eligible.empty())
    throw Error(ErrorCode::NoNonDegenerateTuple, "no tuple of three distinct nodes exists");
  std::sort(eligible.begin(), eligible.end(), [](const RootSelection& x, const RootSelection& y) {
    if (x.scalene != y.scalene) return x.scalene;
    if (x.base_signature != y.base_signature) return x.base_signature < y.base_signature;
    return x.color < y.color;
  });
  return eligible.front();
}

std::array<CommonEdgeReport, 3> identify_common_edges(const WLTree& tree) {
  if (tree.depth < 1 || tree.variant.flavor != Flavor::FWL || tree.variant.k != 3)
    throw Error(ErrorCode::MalformedTranscript, "need a depth >= 1 tree of a (3,FWL) run");
  if (contains_zero(tree.root.init_sig))
    throw Error(ErrorCode::MalformedTranscript, "root tuple is degenerate");
  std::vector<Level1Entry> entries(tree.root.child_groups.size());
  for (std::size_t g = 0; g < tree.root.child_groups.size(); ++g) {
    if (tree.root.child_groups[g].size() != 3)
      throw Error(ErrorCode::MalformedTranscript, "joint triple of wrong arity");
    for (int s = 0; s < 3; ++s) {
      entries[g].colors[s] = tree.root.child_groups[g][s].color;
      entries[g].sigs[s] = tree.root.child_groups[g][s].init_sig;
    }
  }
  const std::array<Tick, 3> ce = common_edges_core(entries);
  return {CommonEdgeReport{1, ce[0]}, CommonEdgeReport{2, ce[1]}, CommonEdgeReport{3, ce[2]}};
}

NeighborFaces extract_new_edges(const WLTree& tree,
                                const std::array<CommonEdgeReport, 3>& common_edges) {
  NeighborFaces out;
  const std::array<Tick, 3> ce = {common_edges[0].ce_length, common_edges[1].ce_length,
                                  common_edges[2].ce_length};
  for (const auto& group : tree.root.child_groups) {
    bool degenerate = false;
    for (const auto& node : group)
      if (contains_zero(node.init_sig)) degenerate = true;
    if (degenerate) continue;
    Level1Entry e;
    for (int s = 0; s < 3; ++s) {
      e.colors[s] = group[s].color;
      e.sigs[s] = group[s].init_sig;
    }
    out.externals.push_back(parse_external(e, ce).entry);
  }
  return out;
}

int classify_ne_case(const std::array<std::array<Tick, 2>, 3>& ne_pairs) {
  std::map<Tick, int> histogram;
  for (const auto& pair : ne_pairs)
    for (const Tick v : pair) ++histogram[v];
  std::vector<int> counts;
  for (const auto& [value, count] : histogram) counts.push_back(count);
  std::sort(counts.rbegin(), counts.rend());
  if (counts == std::vector<int>{2, 2, 2}) return 1;
  if (counts == std::vector<int>{4, 2}) return 2;
  if (counts == std::vector<int>{6}) return 3;
  throw Error(ErrorCode::ImpossibleHistogram,
              "new-edge multiset is not one of the 2:2:2, 4:2, 6 shapes");
}

ApexDistances resolve_apex_distances(const NeighborFacesEntry& entry) {
  const std::vector<ApexDistances> found = apex_assignments(entry.ne_pairs);
  if (found.empty())
    throw Error(ErrorCode::InconsistentPairs, "no apex assignment satisfies the slot sharing");
  return found.front();
}

CandidatePointSet candidate_points(const std::array<Vec3, 3>& face,
                                   const std::vector<ApexDistances>& externals,
                                   int anchor_index, const Tolerance& tol) {
  if (anchor_index < 0 || anchor_index >= static_cast<int>(externals.size()))
    throw Error(ErrorCode::BadIndices, "anchor index out of range");
  CandidatePointSet out;
  out.face = face;
  out.anchor_entry = anchor_index;
  const double eps = tol.epsilon;
  for (int i = 0; i < static_cast<int>(externals.size()); ++i) {
    const ApexDistances& apex = externals[i];
    const detail::TriParts parts = detail::trilaterate_parts(
        face[0], face[1], face[2], static_cast<double>(apex.r_a) * eps,
        static_cast<double>(apex.r_b) * eps, static_cast<double>(apex.r_c) * eps, tol);
    const double noise = z2_noise_bound(parts, eps);
    out.uncertainty = std::max(out.uncertainty, std::sqrt(noise));
    if (parts.z2 < -noise)
      throw Error(ErrorCode::UnrealizableExternal,
                  "external " + std::to_string(i) + " cannot be trilaterated");
    if (i == anchor_index) continue;
    CandidateInfo info;
    info.apex = apex;
    info.entry = i;
    const double z = std::sqrt(std::max(parts.z2, 0.0));
    if (2.0 * z < 2.2 * std::sqrt(noise)) {
      info.upper = info.lower = parts.base;
      info.merged = true;
    } else {
      info.upper = parts.base + z * parts.ez;
      info.lower = parts.base - z * parts.ez;
    }
    out.candidates.push_back(info);
  }
  return out;
}

std::vector<Vec3> intersect_cps(const CandidatePointSet& cp1, const CandidatePointSet& cp2,
                                const CandidatePointSet& cp3, const CandidatePointSet& cp4,
                                const Tolerance& tol) {
  const double eps = tol.epsilon;
  const CandidatePointSet* others[3] = {&cp2, &cp3, &cp4};

  const auto supported = [&](const Vec3& p, bool merged) {
    for (const CandidatePointSet* cp : others) {
      bool found = false;
      for (const CandidateInfo& cand : cp->candidates) {
        const double w = (merged || cand.merged)
                             ? merged_window(cp1.uncertainty, cp->uncertainty, eps)
                             : pair_window(cp1.uncertainty, cp->uncertainty, eps);
        if ((p - cand.upper).norm() < w || (p - cand.lower).norm() < w) {
          found = true;
          break;
        }
      }
      if (!found) return false;
    }
    return true;
  };

  // Twin groups: identical apex ticks give identical mirror pairs, one node
  // per member; both members surviving is only ambiguous for a lone entry.
  std::map<std::tuple<Tick, Tick, Tick>, std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(cp1.candidates.size()); ++i) {
    const ApexDistances& a = cp1.candidates[i].apex;
    groups[{a.r_a, a.r_b, a.r_c}].push_back(i);
  }

  std::vector<Vec3> resolved;
  for (const auto& [key, members] : groups) {
    const CandidateInfo& cand = cp1.candidates[members.front()];
    if (cand.merged) {
      if (!supported(cand.upper, true))
        throw Error(ErrorCode::CountMismatch, "merged candidate unsupported by the other faces");
      for (std::size_t k = 0; k < members.size(); ++k) resolved.push_back(cand.upper);
      continue;
    }
    const bool up = supported(cand.upper, false);
    const bool low = supported(cand.lower, false);
    if (up && low) {
      if (members.size() == 2) {
        resolved.push_back(cand.upper);
        resolved.push_back(cand.lower);
        continue;
      }
      throw Error(ErrorCode::AmbiguousNode,
                  "a full mirror pair survives all four candidate point sets");
    }
    if (!up && !low)
      throw Error(ErrorCode::CountMismatch, "candidate deleted from every face");
    for (std::size_t k = 0; k < members.size(); ++k)
      resolved.push_back(up ? cand.upper : cand.lower);
  }
  if (resolved.size() != cp1.candidates.size())
    throw Error(ErrorCode::CountMismatch, "resolved count does not equal n - 4");
  return resolved;
}

Reconstruction reconstruct(const Transcript& t, const Tolerance& tol,
                           const ReconstructOptions& options) {
  if (!(t.variant == Variant{3, Flavor::FWL}))
    throw Error(ErrorCode::MalformedTranscript, "reconstruction needs a (3,FWL) transcript");
  if (t.n > 50)
    throw Error(ErrorCode::EngineTooLarge, "reconstruction capped at n = 50");

  const auto certify = [&](PipelineResult r) {
    const Transcript check = refine_to_stable(r.cloud, t.variant, tol);
    r.certificate.fingerprint = check.fingerprint.digest;
    r.certificate.fingerprint_match = check.fingerprint == t.fingerprint;
    return Reconstruction{std::move(r.cloud), std::move(r.certificate)};
  };

  if (t.n <= 3) {
    Reconstruction rec = certify(reconstruct_small(t, tol));
    if (!rec.certificate.fingerprint_match)
      throw Error(ErrorCode::CertificateMismatch, "output refines to a different fingerprint");
    return rec;
  }

  std::vector<RootSelection> roots;
  {
    const int final_colors = t.color_count(t.rounds);
    for (ColorId c = 0; c < final_colors; ++c) {
      const std::vector<Tick>& sig = init_signature_of(t, t.rounds, c);
      if (contains_zero(sig)) continue;
      RootSelection r;
      r.color = c;
      r.base_signature = sig;
      r.scalene = sig[0] != sig[1] && sig[1] != sig[2];
      roots.push_back(std::move(r));
    }
    const double alt_gate = 0.02 / tol.epsilon;  // 2% of the diameter, in ticks
    std::sort(roots.begin(), roots.end(),
              [alt_gate](const RootSelection& x, const RootSelection& y) {
                const double xa = base_min_altitude(x.base_signature);
                const double ya = base_min_altitude(y.base_signature);
                const bool xt = xa >= alt_gate, yt = ya >= alt_gate;
                if (xt != yt) return xt;
                if (!xt) return xa > ya;  // below the gate, fattest first
                if (x.scalene != y.scalene) return x.scalene;
                if (x.base_signature != y.base_signature)
                  return x.base_signature < y.base_signature;
                return x.color < y.color;
              });
  }
  if (roots.empty())
    throw Error(ErrorCode::NoNonDegenerateTuple, "no tuple of three distinct nodes exists");

  std::vector<int> root_ranks, anchor_ranks;
  if (options.force_root) root_ranks = {*options.force_root};
  else
    for (int i = 0; i < std::min<int>(options.max_root_attempts,
                                      static_cast<int>(roots.size()));
         ++i)
      root_ranks.push_back(i);
  if (options.force_anchor) anchor_ranks = {*options.force_anchor};
  else
    for (int i = 0; i < options.max_anchor_attempts; ++i) anchor_ranks.push_back(i);

  std::optional<Error> last_error;
  for (const int ri : root_ranks) {
    if (ri >= static_cast<int>(roots.size())) break;
    for (const int ai : anchor_ranks) {
      try {
        PipelineResult r = run_pipeline(t, tol, roots[ri].color, ai);
        r.certificate.root_attempts = ri + 1;
        r.certificate.anchor_attempts = ai + 1;
        Reconstruction rec = certify(std::move(r));
        if (rec.certificate.fingerprint_match) return rec;
        last_error =
            Error(ErrorCode::CertificateMismatch, "output refines to a different fingerprint");
      } catch (const Error& e) {
        if (e.code() == ErrorCode::EngineTooLarge) throw;
        last_error = e;
      }
    }
  }
  throw last_error.value_or(
      Error(ErrorCode::CertificateMismatch, "all reconstruction attempts failed"));
}

std::string ReconstructionCertificate::to_json() const {
  nlohmann::json j;
  j["fingerprint_match"] = fingerprint_match;
  j["fingerprint"] = fingerprint;
  j["cp_cardinalities"] = cp_cardinalities;
  j["case_histogram"] = case_histogram;
  j["collision_notes"] = collision_notes;
  j["anchor_entry"] = anchor_entry;
  j["root_attempts"] = root_attempts;
  j["anchor_attempts"] = anchor_attempts;
  j["planar"] = planar;
  return j.dump(2);
}

}  // namespace wl3d
