#include "wl3d/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <functional>

namespace wl3d {

namespace {

bool is_collapsed_pair(const std::vector<Tick>& sig) {
  return sig.size() == 3 && sig[0] == 0 && sig[1] > 0 && sig[1] == sig[2];
}

// Apex assignments for a candidate group, with the orientations that
// produced them. Shared-edge constraints: row1/row2 share the c-edge,
// row1/row3 the b-edge, row2/row3 the a-edge.
std::vector<GroupAssignment> group_assignments(const std::array<std::array<Tick, 2>, 3>& p) {
  std::vector<GroupAssignment> found;
  for (int o1 = 0; o1 < 2; ++o1)
    for (int o2 = 0; o2 < 2; ++o2)
      for (int o3 = 0; o3 < 2; ++o3) {
        const Tick rb = p[0][o1], rc = p[0][1 - o1];
        const Tick ra = p[1][o2], rc2 = p[1][1 - o2];
        const Tick ra2 = p[2][o3], rb2 = p[2][1 - o3];
        if (rc2 != rc || ra2 != ra || rb2 != rb) continue;
        GroupAssignment g;
        g.orientation = {o1, o2, o3};
        g.apex = {ra, rb, rc};
        bool dup = false;
        for (const GroupAssignment& other : found)
          if (other.apex == g.apex) dup = true;
        if (!dup) found.push_back(g);
      }
  return found;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int x, int y) { parent[find(x)] = find(y); }
};

int slot_id(int row, int pair, int element, int width) {
  return (row * width + pair) * 2 + element;
}

void add_splices(UnionFind& uf, const Grouping& g, int width) {
  for (const GroupAssignment& ga : g.groups) {
    const int r1 = ga.pair_index[0], r2 = ga.pair_index[1], r3 = ga.pair_index[2];
    const int b1 = ga.orientation[0], c1 = 1 - ga.orientation[0];
    const int a2 = ga.orientation[1], c2 = 1 - ga.orientation[1];
    const int a3 = ga.orientation[2], b3 = 1 - ga.orientation[2];
    uf.unite(slot_id(0, r1, c1, width), slot_id(1, r2, c2, width));
    uf.unite(slot_id(0, r1, b1, width), slot_id(2, r3, b3, width));
    uf.unite(slot_id(1, r2, a2, width), slot_id(2, r3, a3, width));
  }
}

}  // namespace

NERows build_rows(const Transcript& t, ColorId root_color) {
  if (!(t.variant == Variant{3, Flavor::WL}))
    throw Error(ErrorCode::MalformedTranscript, "row analysis needs a (3,WL) transcript");
  const int top = t.rounds;
  if (root_color < 0 || root_color >= static_cast<ColorId>(t.rules[top].size()))
    throw Error(ErrorCode::MalformedTranscript, "root color out of range");
  const std::vector<Tick> root_sig = init_signature_of(t, top, root_color);
  if (std::find(root_sig.begin(), root_sig.end(), 0) != root_sig.end())
    throw Error(ErrorCode::MalformedTranscript, "root tuple is degenerate");

  const Rule& rule = t.rules[top][root_color];
  if (rule.nbrs.size() != static_cast<std::size_t>(t.n) * 3)
    throw Error(ErrorCode::MalformedTranscript, "slot multiset list has wrong size");

  NERows out;
  for (int slot = 0; slot < 3; ++slot) {
    std::vector<std::vector<Tick>> sigs;
    for (int j = 0; j < t.n; ++j)
      sigs.push_back(init_signature_of(t, top - 1, rule.nbrs[slot * t.n + j]));

    // Two collapsed-pair entries carry the common edge.
    Tick ce = -1;
    int collapsed = 0;
    for (const auto& sig : sigs) {
      if (!is_collapsed_pair(sig)) continue;
      ++collapsed;
      if (ce == -1) ce = sig[1];
      else if (ce != sig[1])
        throw Error(ErrorCode::MalformedTranscript, "collapsed pairs disagree in one slot");
    }
    if (collapsed != 2)
      throw Error(ErrorCode::MalformedTranscript,
                  "slot " + std::to_string(slot + 1) + " has " + std::to_string(collapsed) +
                      " collapsed-pair entries, expected 2");
    out.ce[slot] = ce;

    // Remove the two collapsed pairs and the slot's own copy of the root.
    std::vector<std::vector<Tick>> externals;
    bool root_seen = false;
    for (const auto& sig : sigs) {
      if (is_collapsed_pair(sig)) continue;
      if (!root_seen && sig == root_sig) {
        root_seen = true;
        continue;
      }
      externals.push_back(sig);
    }
    if (!root_seen || static_cast<int>(externals.size()) != t.n - 3)
      throw Error(ErrorCode::MalformedTranscript, "slot entries do not add up to n - 3");

    for (auto sig : externals) {
      const auto it = std::find(sig.begin(), sig.end(), ce);
      if (it == sig.end())
        throw Error(ErrorCode::CEAbsentFromSignature,
                    "slot signature lacks the common edge length");
      sig.erase(it);
      out.rows[slot].push_back({std::min(sig[0], sig[1]), std::max(sig[0], sig[1])});
    }
    std::sort(out.rows[slot].begin(), out.rows[slot].end());
  }
  return out;
}

GroupingEnumeration enumerate_groupings(const NERows& rows, long long budget) {
  const int width = rows.width();
  GroupingEnumeration out;

  std::vector<char> used2(width, 0), used3(width, 0);
  Grouping current;
  current.groups.resize(width);

  // Group order is quotiented out by keeping the row-1 entries in index
  // order; matchings against rows 2 and 3 remain distinct objects even when
  // the pairs they exchange carry equal values.
  const std::function<void(int)> recurse = [&](int i) {
    if (out.budget_exhausted) return;
    if (++out.visited > budget) {
      out.budget_exhausted = true;
      return;
    }
    if (i == width) {
      out.groupings.push_back(current);
      return;
    }
    for (int j2 = 0; j2 < width && !out.budget_exhausted; ++j2) {
      if (used2[j2]) continue;
      for (int j3 = 0; j3 < width && !out.budget_exhausted; ++j3) {
        if (used3[j3]) continue;
        const std::array<std::array<Tick, 2>, 3> pairs = {
            rows.rows[0][i], rows.rows[1][j2], rows.rows[2][j3]};
        const std::vector<GroupAssignment> assignments = group_assignments(pairs);
        if (assignments.empty()) ++out.infeasible_combinations;
        for (GroupAssignment ga : assignments) {
          ga.pair_index = {i, j2, j3};
          current.groups[i] = ga;
          used2[j2] = used3[j3] = 1;
          recurse(i + 1);
          used2[j2] = used3[j3] = 0;
        }
      }
    }
  };
  recurse(0);
  return out;
}

EqualityClasses label_equality_classes(const Grouping& g, const NERows& rows,
                                       const Grouping* real) {
  const int width = rows.width();
  const int slots = 6 * width;
  UnionFind uf(slots);
  add_splices(uf, g, width);
  if (real) add_splices(uf, *real, width);

  EqualityClasses out;
  out.class_of.assign(slots, -1);
  std::vector<int> root_to_class;
  std::vector<int> roots;
  for (int s = 0; s < slots; ++s) {
    const int r = uf.find(s);
    auto it = std::find(roots.begin(), roots.end(), r);
    int cls;
    if (it == roots.end()) {
      roots.push_back(r);
      out.class_length.push_back(-2);  // unset
      cls = static_cast<int>(roots.size()) - 1;
    } else {
      cls = static_cast<int>(it - roots.begin());
    }
    out.class_of[s] = cls;

    const int element = s % 2;
    const int pair = (s / 2) % width;
    const int row = s / (2 * width);
    const Tick value = rows.rows[row][pair][element];
    if (out.class_length[cls] == -2) out.class_length[cls] = value;
    else if (out.class_length[cls] != value) {
      out.class_length[cls] = -1;
      out.feasible = false;
    }
  }
  return out;
}

TetraComparison compare_tetrahedra(const Grouping& g, const NERows& rows,
                                   const std::vector<std::array<Tick, 3>>& real_triples,
                                   const Tolerance& tol) {
  TetraComparison out;
  std::vector<std::array<Tick, 3>> remaining = real_triples;
  for (auto& t : remaining) std::sort(t.begin(), t.end());
  std::sort(remaining.begin(), remaining.end());

  const double eps = tol.epsilon;
  const double lab = static_cast<double>(rows.ce[2]) * eps;
  const double lac = static_cast<double>(rows.ce[1]) * eps;
  const double lbc = static_cast<double>(rows.ce[0]) * eps;

  for (const GroupAssignment& ga : g.groups) {
    const double ra = static_cast<double>(ga.apex.r_a) * eps;
    const double rb = static_cast<double>(ga.apex.r_b) * eps;
    const double rc = static_cast<double>(ga.apex.r_c) * eps;
    const double cm = cayley_menger_4(lab * lab, lac * lac, ra * ra, lbc * lbc, rb * rb,
                                      rc * rc);
    const double scale = std::max({lab, lac, lbc, ra, rb, rc});
    const bool ok = cm >= -1024.0 * eps * std::pow(scale, 7);
    out.realizable.push_back(ok);

    std::array<Tick, 3> triple = {ga.apex.r_a, ga.apex.r_b, ga.apex.r_c};
    std::sort(triple.begin(), triple.end());
    const auto it = std::find(remaining.begin(), remaining.end(), triple);
    if (it != remaining.end()) {
      remaining.erase(it);
    } else if (ok) {
      out.new_tetrahedra.push_back(triple);
    }
  }
  return out;
}

std::vector<std::array<Tick, 3>> real_apex_triples(const DistanceMatrix& d, int a, int b,
                                                   int c) {
  std::vector<std::array<Tick, 3>> out;
  for (int j = 0; j < d.n; ++j) {
    if (j == a || j == b || j == c) continue;
    std::array<Tick, 3> t = {d.at(j, a), d.at(j, b), d.at(j, c)};
    std::sort(t.begin(), t.end());
    out.push_back(t);
  }
  return out;
}

}  // namespace wl3d
