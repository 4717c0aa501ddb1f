#include "wl3d/refinement.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wl3d/sha256.hpp"

namespace wl3d {

namespace {

constexpr int kMaxNodesK3 = 64;
constexpr int kMaxNodesK2 = 256;
constexpr int kMinRounds = 3;

void check_variant(const Variant& v) {
  if ((v.k != 2 && v.k != 3) || (v.flavor != Flavor::WL && v.flavor != Flavor::FWL))
    throw Error(ErrorCode::ParseError, "variant must be one of 2wl, 2fwl, 3wl, 3fwl");
}

// Canonical interning: signatures are ranked lexicographically and ids
// assigned in that order, which keeps ids reproducible across runs and
// node orderings.
std::vector<ColorId> intern(const std::vector<std::vector<ColorId>>& sigs,
                            std::vector<const std::vector<ColorId>*>* unique_out) {
  std::vector<const std::vector<ColorId>*> order;
  order.reserve(sigs.size());
  for (const auto& s : sigs) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return *a < *b; });
  order.erase(std::unique(order.begin(), order.end(),
                          [](const auto* a, const auto* b) { return *a == *b; }),
              order.end());

  std::vector<ColorId> ids(sigs.size());
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    const auto it = std::lower_bound(order.begin(), order.end(), &sigs[i],
                                     [](const auto* a, const auto* b) { return *a < *b; });
    ids[i] = static_cast<ColorId>(it - order.begin());
  }
  if (unique_out) *unique_out = std::move(order);
  return ids;
}

std::vector<Rule> rules_from_unique(const std::vector<const std::vector<ColorId>*>& unique_sigs) {
  std::vector<Rule> rules;
  rules.reserve(unique_sigs.size());
  for (const auto* sig : unique_sigs) {
    Rule r;
    r.prev = (*sig)[0];
    r.nbrs.assign(sig->begin() + 1, sig->end());
    rules.push_back(std::move(r));
  }
  return rules;
}

std::string canonical_encoding(const Transcript& t) {
  std::ostringstream out;
  out << "wl3d/" << t.variant.name() << ";n=" << t.n << ";rounds=" << t.rounds
      << ";unit=" << Tolerance{t.epsilon}.unit_ticks() << ";";
  out << "init:";
  for (std::size_t c = 0; c < t.init_table.size(); ++c) {
    out << c << "=";
    for (Tick v : t.init_table[c]) out << v << ",";
    out << ";";
  }
  for (int r = 1; r <= t.rounds; ++r) {
    out << "r" << r << ":";
    for (std::size_t c = 0; c < t.rules[r].size(); ++c) {
      out << c << "<" << t.rules[r][c].prev << "|";
      for (ColorId v : t.rules[r][c].nbrs) out << v << ",";
      out << ";";
    }
  }
  out << "final:";
  const auto counts = t.final_class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) out << c << "x" << counts[c] << ";";
  return out.str();
}

}  // namespace

std::string Variant::name() const {
  return std::to_string(k) + (flavor == Flavor::WL ? "wl" : "fwl");
}

Variant Variant::parse(const std::string& name) {
  if (name == "2wl") return {2, Flavor::WL};
  if (name == "2fwl") return {2, Flavor::FWL};
  if (name == "3wl") return {3, Flavor::WL};
  if (name == "3fwl") return {3, Flavor::FWL};
  throw Error(ErrorCode::ParseError, "unknown variant '" + name + "'");
}

std::size_t tuple_count(int n, int k) {
  std::size_t c = 1;
  for (int i = 0; i < k; ++i) c *= static_cast<std::size_t>(n);
  return c;
}

std::size_t tuple_index(const std::vector<int>& tuple, int n) {
  std::size_t idx = 0;
  for (int v : tuple) {
    if (v < 0 || v >= n) throw Error(ErrorCode::BadIndices, "tuple entry out of range");
    idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(v);
  }
  return idx;
}

int Transcript::color_count(int round) const {
  if (round == 0) return static_cast<int>(init_table.size());
  return static_cast<int>(rules[round].size());
}

std::vector<long long> Transcript::final_class_counts() const {
  std::vector<long long> counts(color_count(rounds), 0);
  for (ColorId c : coloring[rounds]) ++counts[c];
  return counts;
}

std::pair<std::vector<ColorId>, std::vector<std::vector<Tick>>> init_colors(
    const PointCloud& cloud, Variant variant, const Tolerance& tol) {
  check_variant(variant);
  const DistanceMatrix d = distance_matrix(cloud, tol);
  const int n = d.n;
  if ((variant.k == 3 && n > kMaxNodesK3) || (variant.k == 2 && n > kMaxNodesK2))
    throw Error(ErrorCode::EngineTooLarge,
                "refinement capped at n = " +
                    std::to_string(variant.k == 3 ? kMaxNodesK3 : kMaxNodesK2) +
                    " for k = " + std::to_string(variant.k));

  std::vector<std::vector<ColorId>> sigs(tuple_count(n, variant.k));
  if (variant.k == 3) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          Tick s[3] = {d.at(a, b), d.at(b, c), d.at(c, a)};
          std::sort(s, s + 3);
          sigs[(static_cast<std::size_t>(a) * n + b) * n + c] = {
              static_cast<ColorId>(s[0]), static_cast<ColorId>(s[1]),
              static_cast<ColorId>(s[2])};
        }
  } else {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        sigs[static_cast<std::size_t>(a) * n + b] = {static_cast<ColorId>(d.at(a, b))};
  }

  std::vector<const std::vector<ColorId>*> unique_sigs;
  std::vector<ColorId> coloring = intern(sigs, &unique_sigs);

  std::vector<std::vector<Tick>> init_table;
  init_table.reserve(unique_sigs.size());
  for (const auto* s : unique_sigs) {
    std::vector<Tick> row;
    row.reserve(s->size());
    for (ColorId v : *s) row.push_back(static_cast<Tick>(v));
    init_table.push_back(std::move(row));
  }
  return {std::move(coloring), std::move(init_table)};
}

std::pair<std::vector<ColorId>, std::vector<Rule>> refine_step(
    const std::vector<ColorId>& coloring, int n, Variant variant) {
  check_variant(variant);
  const int k = variant.k;
  const std::size_t count = tuple_count(n, k);
  if (coloring.size() != count)
    throw Error(ErrorCode::SizeMismatch, "coloring size does not match n^k");

  std::vector<std::vector<ColorId>> sigs(count);

  if (k == 3) {
    const auto idx3 = [n](int a, int b, int c) {
      return (static_cast<std::size_t>(a) * n + b) * n + c;
    };
    std::vector<std::array<ColorId, 3>> joint(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          std::vector<ColorId>& sig = sigs[idx3(a, b, c)];
          sig.reserve(1 + 3 * n);
          sig.push_back(coloring[idx3(a, b, c)]);
          if (variant.flavor == Flavor::FWL) {
            for (int j = 0; j < n; ++j)
              joint[j] = {coloring[idx3(j, b, c)], coloring[idx3(a, j, c)],
                          coloring[idx3(a, b, j)]};
            std::sort(joint.begin(), joint.end());
            for (const auto& g : joint) sig.insert(sig.end(), g.begin(), g.end());
          } else {
            for (int slot = 0; slot < 3; ++slot) {
              const std::size_t start = sig.size();
              for (int j = 0; j < n; ++j) {
                const std::size_t t = slot == 0 ? idx3(j, b, c)
                                    : slot == 1 ? idx3(a, j, c)
                                                : idx3(a, b, j);
                sig.push_back(coloring[t]);
              }
              std::sort(sig.begin() + start, sig.end());
            }
          }
        }
  } else {
    const auto idx2 = [n](int a, int b) { return static_cast<std::size_t>(a) * n + b; };
    std::vector<std::array<ColorId, 2>> joint(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        std::vector<ColorId>& sig = sigs[idx2(a, b)];
        sig.reserve(1 + 2 * n);
        sig.push_back(coloring[idx2(a, b)]);
        if (variant.flavor == Flavor::FWL) {
          for (int j = 0; j < n; ++j) joint[j] = {coloring[idx2(j, b)], coloring[idx2(a, j)]};
          std::sort(joint.begin(), joint.end());
          for (const auto& g : joint) sig.insert(sig.end(), g.begin(), g.end());
        } else {
          for (int slot = 0; slot < 2; ++slot) {
            const std::size_t start = sig.size();
            for (int j = 0; j < n; ++j)
              sig.push_back(coloring[slot == 0 ? idx2(j, b) : idx2(a, j)]);
            std::sort(sig.begin() + start, sig.end());
          }
        }
      }
  }

  std::vector<const std::vector<ColorId>*> unique_sigs;
  std::vector<ColorId> next = intern(sigs, &unique_sigs);
  return {std::move(next), rules_from_unique(unique_sigs)};
}

Transcript refine_to_stable(const PointCloud& cloud, Variant variant, const Tolerance& tol) {
  check_variant(variant);
  Transcript t;
  t.variant = variant;
  t.n = cloud.n();
  t.epsilon = tol.epsilon;

  auto [coloring0, init_table] = init_colors(cloud, variant, tol);
  t.init_table = std::move(init_table);
  t.coloring.push_back(std::move(coloring0));
  t.rules.emplace_back();  // round 0 has no rule table

  const long long hard_cap =
      std::min<long long>(static_cast<long long>(tuple_count(t.n, variant.k)) + kMinRounds, 512);
  int round = 0;
  int prev_colors = static_cast<int>(t.init_table.size());
  while (true) {
    ++round;
    if (round > hard_cap)
      throw Error(ErrorCode::NoConvergence, "refinement failed to stabilize (engine bug)");
    auto [next, rules] = refine_step(t.coloring.back(), t.n, variant);
    const int colors = static_cast<int>(rules.size());
    t.coloring.push_back(std::move(next));
    t.rules.push_back(std::move(rules));
    // Refinement only splits classes, so an unchanged count means an
    // unchanged partition.
    if (colors == prev_colors && round >= kMinRounds) break;
    prev_colors = colors;
  }
  t.rounds = round;
  t.fingerprint = fingerprint_of(t);
  return t;
}

Fingerprint fingerprint_of(const Transcript& t) {
  return Fingerprint{sha256_hex(canonical_encoding(t))};
}

const std::vector<Tick>& init_signature_of(const Transcript& t, int round, ColorId color) {
  ColorId c = color;
  for (int r = round; r >= 1; --r) {
    if (c < 0 || c >= static_cast<ColorId>(t.rules[r].size()))
      throw Error(ErrorCode::MalformedTranscript, "color id out of range in rule table");
    c = t.rules[r][c].prev;
  }
  if (c < 0 || c >= static_cast<ColorId>(t.init_table.size()))
    throw Error(ErrorCode::MalformedTranscript, "initial color id out of range");
  return t.init_table[c];
}

namespace {

WLTreeNode unroll_color(const Transcript& t, int round, ColorId color, int depth) {
  WLTreeNode node;
  node.color = color;
  node.init_sig = init_signature_of(t, round, color);
  if (depth == 0) return node;
  if (round == 0)
    throw Error(ErrorCode::DepthExceedsRounds, "tree depth exceeds recorded rounds");
  const Rule& rule = t.rules[round][color];
  const int k = t.variant.k;
  if (t.variant.flavor == Flavor::FWL) {
    const int groups = static_cast<int>(rule.nbrs.size()) / k;
    node.child_groups.resize(groups);
    for (int g = 0; g < groups; ++g)
      for (int s = 0; s < k; ++s)
        node.child_groups[g].push_back(
            unroll_color(t, round - 1, rule.nbrs[g * k + s], depth - 1));
  } else {
    const int per_slot = static_cast<int>(rule.nbrs.size()) / k;
    node.child_groups.resize(k);
    for (int slot = 0; slot < k; ++slot)
      for (int j = 0; j < per_slot; ++j)
        node.child_groups[slot].push_back(
            unroll_color(t, round - 1, rule.nbrs[slot * per_slot + j], depth - 1));
  }
  return node;
}

}  // namespace

WLTree unroll_tree(const Transcript& t, const std::vector<int>& root_tuple, int depth) {
  if (depth < 0 || depth > t.rounds)
    throw Error(ErrorCode::DepthExceedsRounds,
                "depth " + std::to_string(depth) + " exceeds rounds " + std::to_string(t.rounds));
  if (static_cast<int>(root_tuple.size()) != t.variant.k)
    throw Error(ErrorCode::BadIndices, "root tuple arity does not match variant");
  WLTree tree;
  tree.variant = t.variant;
  tree.depth = depth;
  const ColorId root = t.coloring[t.rounds][tuple_index(root_tuple, t.n)];
  tree.root = unroll_color(t, t.rounds, root, depth);
  return tree;
}

std::string transcript_to_json(const Transcript& t) {
  nlohmann::json j;
  j["format"] = "wl3d-transcript-v1";
  j["variant"] = t.variant.name();
  j["n"] = t.n;
  j["rounds"] = t.rounds;
  j["epsilon"] = t.epsilon;
  j["init_table"] = t.init_table;
  nlohmann::json rules = nlohmann::json::array();
  for (int r = 1; r <= t.rounds; ++r) {
    nlohmann::json round = nlohmann::json::array();
    for (const Rule& rule : t.rules[r])
      round.push_back({{"prev", rule.prev}, {"nbrs", rule.nbrs}});
    rules.push_back(std::move(round));
  }
  j["rules"] = std::move(rules);
  j["coloring"] = t.coloring;
  j["fingerprint"] = t.fingerprint.digest;
  return j.dump();
}

Transcript transcript_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid transcript JSON: ") + e.what());
  }
  Transcript t;
  try {
    if (j.at("format").get<std::string>() != "wl3d-transcript-v1")
      throw Error(ErrorCode::ParseError, "unknown transcript format");
    t.variant = Variant::parse(j.at("variant").get<std::string>());
    t.n = j.at("n").get<int>();
    t.rounds = j.at("rounds").get<int>();
    t.epsilon = j.at("epsilon").get<double>();
    t.init_table = j.at("init_table").get<std::vector<std::vector<Tick>>>();
    t.rules.emplace_back();
    for (const auto& round : j.at("rules")) {
      std::vector<Rule> rules;
      for (const auto& entry : round) {
        Rule r;
        r.prev = entry.at("prev").get<ColorId>();
        r.nbrs = entry.at("nbrs").get<std::vector<ColorId>>();
        rules.push_back(std::move(r));
      }
      t.rules.push_back(std::move(rules));
    }
    t.coloring = j.at("coloring").get<std::vector<std::vector<ColorId>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("transcript fields: ") + e.what());
  }
  if (t.n < 1 || t.rounds < 1 || static_cast<int>(t.rules.size()) != t.rounds + 1 ||
      static_cast<int>(t.coloring.size()) != t.rounds + 1)
    throw Error(ErrorCode::MalformedTranscript, "inconsistent transcript shape");
  for (int r = 0; r <= t.rounds; ++r)
    if (t.coloring[r].size() != tuple_count(t.n, t.variant.k))
      throw Error(ErrorCode::MalformedTranscript, "coloring size does not match n^k");
  // The digest is derived data; recompute rather than trust the file.
  t.fingerprint = fingerprint_of(t);
  return t;
}

}  // namespace wl3d
